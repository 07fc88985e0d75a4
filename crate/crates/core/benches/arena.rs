use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use werewolf_core::arena::{simulate, AgentPlan, SimulationPlan};
use werewolf_core::engine::SetupVariant;

fn plan(games: u32, concurrency: usize) -> SimulationPlan {
    let mut plan = SimulationPlan::new(SetupVariant::Swg9, games, 1, AgentPlan::from_kinds("random").unwrap());
    plan.record_transcripts = false;
    plan.concurrency = concurrency;
    plan
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_swg9");
    group.sample_size(20);
    for games in [64u32, 512] {
        group.bench_with_input(BenchmarkId::new("sequential", games), &games, |b, &g| {
            let p = plan(g, 1);
            b.iter(|| simulate(&p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", games), &games, |b, &g| {
            let p = plan(g, 0);
            b.iter(|| simulate(&p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);
