use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use judgemark_core::panel::control_scores;
use judgemark_core::ranking::{generalized_kendall, parameter_set, ranking_from_marks, TieBreak};
use judgemark_core::simul::ranking_vs_marking_experiment;
use judgemark_core::synth::{generate_competition, SynthSpec};
use judgemark_core::variability::{fit_scopes, FitOptions};
use judgemark_core::{ParameterSetId, SigmaModel};

fn fit(c: &mut Criterion) {
    let data = generate_competition(&SynthSpec::artistic_default(1)).unwrap();
    let controls = control_scores(&data.records);
    c.bench_function("fit_scopes_10k_marks", |b| {
        b.iter(|| fit_scopes(black_box(&data.records), &controls, FitOptions::default()).unwrap())
    });
}

fn kendall(c: &mut Criterion) {
    let n = 200;
    let controls: Vec<f64> = (0..n).map(|i| 9.8 - 0.01 * i as f64).collect();
    let marks: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
    let r = ranking_from_marks(&marks, TieBreak::ByIndex);
    let params = parameter_set(ParameterSetId::Set3, &controls).unwrap();
    c.bench_function("generalized_kendall_n200", |b| b.iter(|| generalized_kendall(black_box(&r), &params).unwrap()));
}

fn experiment(c: &mut Criterion) {
    let model = SigmaModel::from_params("FX_W", 0.5905, -0.004244, 0.5, 0.05);
    let controls = [9.0, 8.9, 8.8, 8.7, 8.6, 8.5, 8.4, 8.3];
    c.bench_function("experiment_1000_judges", |b| {
        b.iter(|| ranking_vs_marking_experiment(black_box(&controls), &model, 1000, 42).unwrap())
    });
}

criterion_group!(benches, fit, kendall, experiment);
criterion_main!(benches);
