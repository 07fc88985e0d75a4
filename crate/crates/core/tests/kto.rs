use proptest::prelude::*;
use werewolf_core::ktomath::{
    dvalue_dr, evaluate, example_loss, loss, read_examples_csv, sigmoid, value, z0, KtoExample,
    KtoParams, Label,
};

fn ex(r: f64, kl: f64, label: Label) -> KtoExample {
    KtoExample {
        r,
        kl_estimate: kl,
        label,
    }
}

fn label_strategy() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Desirable), Just(Label::Undesirable)]
}

fn params_strategy() -> impl Strategy<Value = KtoParams> {
    (0.01f64..2.0, 0.05f64..3.0, 0.05f64..3.0).prop_map(|(beta, lambda_d, lambda_u)| KtoParams {
        beta,
        lambda_d,
        lambda_u,
    })
}

#[test]
fn reference_point_is_the_clamped_mean() {
    let batch = |kls: &[f64]| kls.iter().map(|k| ex(0.0, *k, Label::Desirable)).collect::<Vec<_>>();
    assert_eq!(z0(&batch(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
    assert!((z0(&batch(&[0.2, 0.4])).unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(z0(&batch(&[-0.1, 0.1])).unwrap(), 0.0);
    assert_eq!(z0(&batch(&[-0.3, 0.1])).unwrap(), 0.0);
    assert!(z0(&[]).is_err());
}

#[test]
fn value_at_the_reference_point() {
    let p = KtoParams::default();
    assert_eq!(value(&ex(0.4, 0.0, Label::Desirable), 0.4, &p), 0.35);
    assert_eq!(value(&ex(0.4, 0.0, Label::Undesirable), 0.4, &p), 0.5);
    assert_eq!(loss(&[ex(0.0, 0.0, Label::Desirable)], &p).unwrap(), 0.35);
}

#[test]
fn value_ten_nats_above_the_reference() {
    // 0.7 / (1 + e^-1)
    let expected = 0.511_741_005_041_003_4;
    let got = value(&ex(10.0, 0.0, Label::Desirable), 0.0, &KtoParams::default());
    assert!((got - expected).abs() < 1e-15, "{got}");
}

#[test]
fn mixed_batch_matches_manual_arithmetic() {
    let p = KtoParams::default();
    let batch = [
        ex(1.0, 0.2, Label::Desirable),
        ex(-2.0, 0.4, Label::Undesirable),
        ex(3.0, 0.1, Label::Desirable),
        ex(0.5, 0.1, Label::Undesirable),
    ];
    // z0 = 0.2; margins 0.08, 0.22, 0.28, -0.03
    let s = |x: f64| 1.0 / (1.0 + (-x).exp());
    let manual = ((0.7 - 0.7 * s(0.08))
        + (1.0 - s(0.22))
        + (0.7 - 0.7 * s(0.28))
        + (1.0 - s(-0.03)))
        / 4.0;
    assert!((loss(&batch, &p).unwrap() - manual).abs() < 1e-12);
    let report = evaluate(&batch, &p).unwrap();
    assert_eq!((report.examples, report.desirable, report.undesirable), (4, 2, 2));
    assert!((report.z0 - 0.2).abs() < 1e-15);
}

#[test]
fn gradient_at_the_reference_point() {
    let p = KtoParams::default();
    assert!((dvalue_dr(&ex(0.0, 0.0, Label::Desirable), 0.0, &p) - 0.0175).abs() < 1e-15);
    assert!((dvalue_dr(&ex(0.0, 0.0, Label::Undesirable), 0.0, &p) + 0.025).abs() < 1e-15);
}

#[test]
fn loss_vanishes_for_confident_desirable_examples() {
    let p = KtoParams::default();
    assert!(loss(&[ex(1e4, 0.0, Label::Desirable)], &p).unwrap() < 1e-12);
}

#[test]
fn invalid_params_are_rejected() {
    let bad = KtoParams {
        beta: 0.0,
        ..KtoParams::default()
    };
    assert!(evaluate(&[ex(0.0, 0.0, Label::Desirable)], &bad).is_err());
}

#[test]
fn csv_rows_load_with_or_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    std::fs::write(&path, "r,kl,label\n0.5,0.1,desirable\n-1,0.2,unacceptable\n").unwrap();
    let rows = read_examples_csv(&path).unwrap();
    assert_eq!(rows, vec![ex(0.5, 0.1, Label::Desirable), ex(-1.0, 0.2, Label::Undesirable)]);
    std::fs::write(&path, "0.5,0.1,maybe\n").unwrap();
    assert!(read_examples_csv(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn value_is_bounded(x in -30.0f64..30.0, label in label_strategy(), p in params_strategy()) {
        let r = x / p.beta;
        let v = value(&ex(r, 0.0, label), 0.0, &p);
        prop_assert!(v > 0.0 && v < p.lambda(label));
        prop_assert!(example_loss(&ex(r, 0.0, label), 0.0, &p) > 0.0);
    }

    #[test]
    fn value_is_monotone_in_r(x in -30.0f64..30.0, step in 0.01f64..5.0, label in label_strategy(), p in params_strategy()) {
        let r = x / p.beta;
        let lo = value(&ex(r, 0.0, label), 0.0, &p);
        let hi = value(&ex(r + step / p.beta, 0.0, label), 0.0, &p);
        match label {
            Label::Desirable => prop_assert!(hi > lo),
            Label::Undesirable => prop_assert!(hi < lo),
        }
    }

    #[test]
    fn labels_mirror_around_the_reference(z in 0.0f64..5.0, delta in -100.0f64..100.0, beta in 0.01f64..2.0, lambda in 0.05f64..3.0) {
        let p = KtoParams { beta, lambda_d: lambda, lambda_u: lambda };
        let d = value(&ex(z + delta, 0.0, Label::Desirable), z, &p);
        let u = value(&ex(z - delta, 0.0, Label::Undesirable), z, &p);
        prop_assert!((d - u).abs() <= 1e-15 * d.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences(r in -50.0f64..50.0, z in 0.0f64..5.0, label in label_strategy(), p in params_strategy()) {
        let h = 1e-5;
        let analytic = dvalue_dr(&ex(r, 0.0, label), z, &p);
        let numeric = (value(&ex(r + h, 0.0, label), z, &p) - value(&ex(r - h, 0.0, label), z, &p)) / (2.0 * h);
        prop_assert!((analytic - numeric).abs() / analytic.abs().max(1.0) <= 1e-6);
        let v = value(&ex(r, 0.0, label), z, &p);
        let closed = p.beta * v * (1.0 - v / p.lambda(label));
        let signed = if label == Label::Desirable { closed } else { -closed };
        prop_assert!((analytic - signed).abs() <= 1e-12);
    }

    #[test]
    fn loss_is_positive(rows in prop::collection::vec((-100.0f64..100.0, -1.0f64..2.0, label_strategy()), 1..16)) {
        let batch: Vec<KtoExample> = rows.into_iter().map(|(r, kl, l)| ex(r, kl, l)).collect();
        prop_assert!(loss(&batch, &KtoParams::default()).unwrap() > 0.0);
    }

    #[test]
    fn sigmoid_is_symmetric(x in -700.0f64..700.0) {
        prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
    }
}
