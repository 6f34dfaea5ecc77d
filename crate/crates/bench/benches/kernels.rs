use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use weakcal::autodiff::Dual;
use weakcal::qcore::{rho_from_components, Mat2};
use weakcal::rnn::{batch_loss_grad, forward, LossWeights};
use weakcal::sdelearn::{batch_gradient, batch_value, CeObjective, PackKind, ParamPack};
use weakcal::sme::{milstein_step, ConstrainedParams, PhysicalModel, StepDiagnostics};
use weakcal::TrajectoryRecord;
use weakcal_bench::{device_shots, gru, spam};

fn step(c: &mut Criterion) {
    let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
    let ops = m.ops::<f64>();
    let rho = rho_from_components(0.3, -0.2, 0.5);
    let mut diag = StepDiagnostics::default();
    c.bench_function("milstein_step_f64", |b| {
        b.iter(|| milstein_step(black_box(&rho), black_box(0.1), black_box(-0.05), &ops, 0.04, &mut diag).unwrap())
    });
    let pack = ParamPack::from_constrained(PackKind::Constrained, ConstrainedParams::DEVICE, 0.0);
    let raw: Vec<Dual<3>> = pack.raw.iter().enumerate().map(|(i, v)| Dual::variable(*v, i)).collect();
    let dops = weakcal::sdelearn::ops_from_raw(PackKind::Constrained, &raw);
    let drho: Mat2<Dual<3>> = Mat2::lift(&rho);
    c.bench_function("milstein_step_dual3", |b| {
        b.iter(|| {
            milstein_step(black_box(&drho), Dual::constant(0.1), Dual::constant(-0.05), &dops, 0.04, &mut diag).unwrap()
        })
    });
}

fn sde_gradient(c: &mut Criterion) {
    let shots = device_shots(64, 200);
    let refs: Vec<&TrajectoryRecord> = shots.iter().collect();
    let sp = spam();
    let obj = CeObjective { shots: refs, spam: &sp };
    let idx: Vec<usize> = (0..64).collect();
    let mut g = c.benchmark_group("sde_batch_64x200");
    g.sample_size(10);
    for kind in [PackKind::Constrained, PackKind::Operator] {
        let pack = ParamPack::from_constrained(kind, ConstrainedParams::DEVICE, 0.0);
        g.bench_function(format!("gradient_{kind:?}"), |b| b.iter(|| batch_gradient(&pack, &obj, &idx)));
    }
    let pack = ParamPack::from_constrained(PackKind::Constrained, ConstrainedParams::DEVICE, 0.0);
    g.bench_function("value", |b| b.iter(|| batch_value(&pack, &obj, &idx)));
    g.finish();
}

fn gru_passes(c: &mut Criterion) {
    let shots = device_shots(64, 200);
    let refs: Vec<&TrajectoryRecord> = shots.iter().collect();
    let model = gru(16);
    let sp = spam();
    let mut g = c.benchmark_group("gru_h16_64x200");
    g.sample_size(10);
    g.bench_function("forward", |b| b.iter(|| refs.iter().map(|s| forward(&model, s).states.len()).sum::<usize>()));
    g.bench_function("forward_backward", |b| b.iter(|| batch_loss_grad(&model, &refs, &sp, &LossWeights::default())));
    g.finish();
}

criterion_group!(benches, step, sde_gradient, gru_passes);
criterion_main!(benches);
