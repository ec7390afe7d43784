use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use cusp_core::einstein::apply_l_full;
use cusp_core::flow::{rhs, FlowConfig};
use cusp_core::geometry::{CuspModel, TorusDerivative};
use cusp_core::harness::probes::random_perturbation;
use cusp_core::heat::{cz_convolve, taper, OmegaGrid};

fn flow_operators(c: &mut Criterion) {
    let model = Arc::new(
        CuspModel::new(3, vec![1.0, 1.0], (0.0, 12.0), 96, vec![12, 12])
            .unwrap()
            .with_torus_derivative(TorusDerivative::Centered),
    );
    let h = random_perturbation(&model, 0.01, 0.5, 11.5, 0.3, 7);
    let cfg = FlowConfig::default();
    c.bench_function("rhs 96x12x12", |b| b.iter(|| rhs(black_box(&h), &cfg, 0.0).unwrap()));
    c.bench_function("apply_l_full 96x12x12", |b| b.iter(|| apply_l_full(black_box(&h))));
}

fn singular_convolution(c: &mut Criterion) {
    let f = OmegaGrid::from_fn(1.0, 129, 65, |x, t| taper(x, t, 1.0) * (3.0 * x + t).sin());
    c.bench_function("cz_convolve 129x65", |b| b.iter(|| cz_convolve(black_box(&f)).unwrap()));
}

criterion_group!(benches, flow_operators, singular_convolution);
criterion_main!(benches);
