//! KTO value function and loss over precomputed log-ratios.
//!
//! `r` is `log πθ(y|x) − log πref(y|x)` and `kl_estimate` is a per-example
//! contribution to the reference point `z0`; both come from outside.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtoParams {
    pub beta: f64,
    pub lambda_d: f64,
    pub lambda_u: f64,
}

impl Default for KtoParams {
    fn default() -> Self {
        KtoParams {
            beta: 0.1,
            lambda_d: 0.7,
            lambda_u: 1.0,
        }
    }
}

impl KtoParams {
    pub fn validate(&self) -> Result<(), KtoError> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda_d", self.lambda_d),
            ("lambda_u", self.lambda_u),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KtoError::InvalidParam(name));
            }
        }
        Ok(())
    }

    pub fn lambda(&self, label: Label) -> f64 {
        match label {
            Label::Desirable => self.lambda_d,
            Label::Undesirable => self.lambda_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Desirable,
    #[serde(rename = "unacceptable", alias = "undesirable")]
    Undesirable,
}

impl std::str::FromStr for Label {
    type Err = KtoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desirable" | "d" | "1" | "true" => Ok(Label::Desirable),
            "undesirable" | "unacceptable" | "u" | "0" | "false" => Ok(Label::Undesirable),
            other => Err(KtoError::BadLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtoExample {
    pub r: f64,
    pub kl_estimate: f64,
    pub label: Label,
}

#[derive(Debug, thiserror::Error)]
pub enum KtoError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("parameter `{0}` must be positive and finite")]
    InvalidParam(&'static str),
    #[error("unknown label `{0}`")]
    BadLabel(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clamped batch mean of the KL estimates. Treated as a constant downstream.
pub fn z0(batch: &[KtoExample]) -> Result<f64, KtoError> {
    if batch.is_empty() {
        return Err(KtoError::EmptyBatch);
    }
    let mean = batch.iter().map(|e| e.kl_estimate).sum::<f64>() / batch.len() as f64;
    Ok(mean.max(0.0))
}

fn margin(ex: &KtoExample, z0: f64, p: &KtoParams) -> f64 {
    match ex.label {
        Label::Desirable => p.beta * (ex.r - z0),
        Label::Undesirable => p.beta * (z0 - ex.r),
    }
}

pub fn value(ex: &KtoExample, z0: f64, p: &KtoParams) -> f64 {
    p.lambda(ex.label) * sigmoid(margin(ex, z0, p))
}

/// `λ_y − v` written as `λ_y·σ(−x)` so it never cancels to zero.
pub fn example_loss(ex: &KtoExample, z0: f64, p: &KtoParams) -> f64 {
    p.lambda(ex.label) * sigmoid(-margin(ex, z0, p))
}

pub fn loss(batch: &[KtoExample], p: &KtoParams) -> Result<f64, KtoError> {
    let z = z0(batch)?;
    Ok(batch.iter().map(|e| example_loss(e, z, p)).sum::<f64>() / batch.len() as f64)
}

/// Analytic derivative of [`value`] with respect to `r`.
pub fn dvalue_dr(ex: &KtoExample, z0: f64, p: &KtoParams) -> f64 {
    let lambda = p.lambda(ex.label);
    let x = margin(ex, z0, p);
    let s = sigmoid(x);
    let magnitude = p.beta * lambda * s * sigmoid(-x);
    match ex.label {
        Label::Desirable => magnitude,
        Label::Undesirable => -magnitude,
    }
}

/// Summary statistics for a dataset of examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtoReport {
    pub examples: usize,
    pub desirable: usize,
    pub undesirable: usize,
    pub z0: f64,
    pub loss: f64,
    pub mean_value_desirable: Option<f64>,
    pub mean_value_undesirable: Option<f64>,
    pub mean_grad: f64,
}

pub fn evaluate(batch: &[KtoExample], p: &KtoParams) -> Result<KtoReport, KtoError> {
    p.validate()?;
    let z = z0(batch)?;
    let mean_of = |label: Label| {
        let vals: Vec<f64> = batch
            .iter()
            .filter(|e| e.label == label)
            .map(|e| value(e, z, p))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(KtoReport {
        examples: batch.len(),
        desirable: batch.iter().filter(|e| e.label == Label::Desirable).count(),
        undesirable: batch.iter().filter(|e| e.label == Label::Undesirable).count(),
        z0: z,
        loss: loss(batch, p)?,
        mean_value_desirable: mean_of(Label::Desirable),
        mean_value_undesirable: mean_of(Label::Undesirable),
        mean_grad: batch.iter().map(|e| dvalue_dr(e, z, p)).sum::<f64>() / batch.len() as f64,
    })
}

/// Reads `r,kl,label` rows (header optional).
pub fn read_examples_csv(path: &Path) -> Result<Vec<KtoExample>, KtoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != 3 {
            return Err(KtoError::BadRow {
                row,
                message: format!("expected 3 fields (r, kl, label), found {}", rec.len()),
            });
        }
        if i == 0 && rec[0].eq_ignore_ascii_case("r") {
            continue;
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| KtoError::BadRow {
                    row,
                    message: format!("{what} `{s}` is not a finite number"),
                })
        };
        let r = num(&rec[0], "r")?;
        let kl = num(&rec[1], "kl")?;
        let label = rec[2].parse::<Label>().map_err(|e| KtoError::BadRow {
            row,
            message: e.to_string(),
        })?;
        out.push(KtoExample {
            r,
            kl_estimate: kl,
            label,
        });
    }
    Ok(out)
}
