//! Kernel throughput for the compiled execution path.
//!
//! The same benchmark ids are produced with and without the `parallel`
//! feature, so criterion baselines compare the two paths directly:
//!
//! ```text
//! cargo bench -p peq-core --no-default-features -- --save-baseline sequential
//! cargo bench -p peq-core -- --baseline sequential
//! ```

use std::hint::black_box;

use criterion::{criterion_group, BenchmarkId, Criterion, Throughput};
use peq_core::dynamics::advect;
use peq_core::energetics::compute_norms;
use peq_core::fields::{apply_bcs_velocity, make_smooth_state, Forcing, ForcingProfile, Params, State};
use peq_core::geometry::Grid;
use peq_core::operators::{diagnose_w, lap_h, BcProfile, Ghosted};
use peq_core::pressure::project_step;
use peq_core::timestepper::Stepper;

const SIZES: [usize; 2] = [16, 32];

fn setup(n: usize) -> (Grid, Params, State) {
    let grid = Grid::new(1.0, 1.0, 1.0, n, n, n).unwrap();
    let params = Params { re1: 10.0, re2: 1.0, rt1: 10.0, rt2: 1.0, f0: 1.0, beta: 0.5, alpha: 1.0 };
    let state = make_smooth_state(&grid, params.alpha, 1);
    (grid, params, state)
}

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for n in SIZES {
        let (grid, params, state) = setup(n);
        group.throughput(Throughput::Elements(grid.cells() as u64));
        let (vx, vy) = apply_bcs_velocity(&state);
        let t = Ghosted::fill(&state.temperature, BcProfile::temperature(params.alpha, grid.dz));
        let w = Ghosted::fill(&diagnose_w(&vx, &vy, &grid), BcProfile::NEUMANN);
        group.bench_with_input(BenchmarkId::new("lap_h", n), &n, |b, _| b.iter(|| lap_h(black_box(&t), &grid)));
        group.bench_with_input(BenchmarkId::new("advect", n), &n, |b, _| b.iter(|| advect(&vx, &vy, &w, black_box(&t), &grid)));
        group.bench_with_input(BenchmarkId::new("diagnose_w", n), &n, |b, _| b.iter(|| diagnose_w(black_box(&vx), &vy, &grid)));
        group.bench_with_input(BenchmarkId::new("project_step", n), &n, |b, _| {
            b.iter(|| project_step(black_box(&state.v), &grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("compute_norms", n), &n, |b, _| {
            b.iter(|| compute_norms(black_box(&state), &grid, &params))
        });
    }
    group.finish();
}

fn stepping(c: &mut Criterion) {
    let mut group = c.benchmark_group("ssprk3");
    group.sample_size(20);
    for n in SIZES {
        let (grid, params, state) = setup(n);
        group.throughput(Throughput::Elements(grid.cells() as u64));
        let forcing = Forcing::from_profile(&grid, ForcingProfile::Cosine { amplitude: 1.0 });
        let mut stepper = Stepper::new(params, forcing, grid);
        let dt = 0.1 * grid.dz * grid.dz;
        group.bench_with_input(BenchmarkId::new("step", n), &n, |b, _| b.iter(|| stepper.step(black_box(&state), dt).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, operators, stepping);
fn main() {
    eprintln!("execution path: {}", peq_core::par::MODE);
    benches();
    Criterion::default().configure_from_args().final_summary();
}
