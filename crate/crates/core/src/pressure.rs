//! Surface pressure from the depth-averaged incompressibility constraint.
//!
//! The default [`NeumannStencil::Wide`] operator is exactly
//! `div_h . grad_h`, with `grad_h` taken under zero-flux ghosts and `div_h`
//! under the velocity ghost rules. Using it, the projected depth-averaged
//! tendency is divergence-free to the solver tolerance, and the projection is
//! orthogonal in the grid inner product.

use crate::dynamics::surface_pressure_grad;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::linalg::{conjugate_gradient, CgOptions};
use crate::operators::{depth_average, div_h, grad_h, lap_h, BcProfile, Field2, Ghosted, VecField3};

/// Discrete Neumann Laplacian used by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeumannStencil {
    /// `div_h(grad_h p)`, with wall ghosts matching the velocity.
    #[default]
    Wide,
    /// Five-point Laplacian with mirrored ghosts.
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProblem {
    pub rhs: Field2,
    /// Relative residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stencil: NeumannStencil,
    /// RMS size of the data the right-hand side was computed from. Rounding
    /// in the mean and the residual target are judged against
    /// `max(rms(rhs), reference_rms)`; zero means the right-hand side alone.
    pub reference_rms: f64,
}

impl PoissonProblem {
    pub fn new(rhs: Field2) -> Self {
        PoissonProblem { rhs, tolerance: 1e-11, max_iterations: 5000, stencil: NeumannStencil::Wide, reference_rms: 0.0 }
    }
}

/// Relative mean tolerated on the right-hand side.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-10;

/// Applies the chosen Neumann Laplacian to a horizontal field.
pub fn neumann_laplacian(p: &Field2, stencil: NeumannStencil, grid: &Grid) -> Field2 {
    let layer = grid.with_layers(1);
    let g = Ghosted::fill_layer(p, BcProfile::NEUMANN);
    let out = match stencil {
        NeumannStencil::Compact => lap_h(&g, &layer),
        NeumannStencil::Wide => {
            let gr = grad_h(&g, &layer);
            div_h(
                &Ghosted::fill(&gr.x, BcProfile::VELOCITY_X),
                &Ghosted::fill(&gr.y, BcProfile::VELOCITY_Y),
                &layer,
            )
        }
    };
    Field2::from_layer(out)
}

pub fn solve_neumann_poisson(problem: &PoissonProblem, grid: &Grid) -> Result<Field2> {
    solve_neumann_poisson_from(problem, grid, None)
}

/// As [`solve_neumann_poisson`], starting CG from `guess`.
pub fn solve_neumann_poisson_from(problem: &PoissonProblem, grid: &Grid, guess: Option<&Field2>) -> Result<Field2> {
    let (nx, ny) = problem.rhs.shape();
    let b = problem.rhs.data();
    let n = b.len() as f64;
    let mean = b.iter().sum::<f64>() / n;
    let rms = (b.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let reference = rms.max(problem.reference_rms);
    if mean.abs() > SOLVABILITY_TOLERANCE * reference {
        return Err(Error::Solvability { mean, rms });
    }
    if rms <= problem.tolerance * reference {
        return Ok(Field2::zeros(nx, ny));
    }
    // Solve the positive semi-definite system -L p = -rhs.
    let neg: Vec<f64> = b.iter().map(|x| -x).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        let lx = neumann_laplacian(&Field2::from_vec(nx, ny, x.to_vec()), problem.stencil, grid);
        for (o, v) in out.iter_mut().zip(lx.data()) {
            *o = -v;
        }
    };
    let tolerance = problem.tolerance * reference / rms;
    let opts = CgOptions { tolerance, max_iterations: problem.max_iterations, remove_mean: true };
    let sol = conjugate_gradient(apply, &neg, guess.map(|g| g.data()), &opts).map_err(|e| match e {
        Error::NoConvergence { iterations, residual, .. } => {
            Error::NoConvergence { solver: "neumann poisson", iterations, residual }
        }
        other => other,
    })?;
    let mut x = sol.solution;
    let m = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= m);
    Ok(Field2::from_vec(nx, ny, x))
}

/// Settings for [`project_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stencil: NeumannStencil,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { tolerance: 1e-11, max_iterations: 5000, stencil: NeumannStencil::Wide }
    }
}

/// Removes the gradient part of the depth-averaged tendency. Returns the
/// projected tendency and the (mean-zero) surface pressure.
pub fn project_step(tendency: &VecField3, grid: &Grid) -> Result<(VecField3, Field2)> {
    project_step_with(tendency, grid, &ProjectionOptions::default(), None)
}

pub fn project_step_with(
    tendency: &VecField3,
    grid: &Grid,
    opts: &ProjectionOptions,
    guess: Option<&Field2>,
) -> Result<(VecField3, Field2)> {
    if !(tendency.x.is_finite() && tendency.y.is_finite()) {
        return Err(Error::Domain("tendency passed to the projection is not finite".into()));
    }
    let layer = grid.with_layers(1);
    let ax = depth_average(&tendency.x, grid);
    let ay = depth_average(&tendency.y, grid);
    let rhs = Field2::from_layer(div_h(
        &Ghosted::fill_layer(&ax, BcProfile::VELOCITY_X),
        &Ghosted::fill_layer(&ay, BcProfile::VELOCITY_Y),
        &layer,
    ));
    let scale = ax.max_abs().max(ay.max_abs()) * (1.0 / layer.dx + 1.0 / layer.dy);
    let problem = PoissonProblem {
        rhs,
        tolerance: opts.tolerance,
        max_iterations: opts.max_iterations,
        stencil: opts.stencil,
        reference_rms: scale,
    };
    let p_s = solve_neumann_poisson_from(&problem, grid, guess)?;
    let mut out = tendency.clone();
    out.axpy(-1.0, &surface_pressure_grad(&p_s, grid.nz, grid));
    Ok((out, p_s))
}

/// Grid divergence of the depth average of a velocity-like field.
pub fn depth_averaged_divergence(v: &VecField3, grid: &Grid) -> Field2 {
    let layer = grid.with_layers(1);
    Field2::from_layer(div_h(
        &Ghosted::fill_layer(&depth_average(&v.x, grid), BcProfile::VELOCITY_X),
        &Ghosted::fill_layer(&depth_average(&v.y, grid), BcProfile::VELOCITY_Y),
        &layer,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{inner2, Field3};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1.5, 1.0, 0.5, n, n + 2, 4).unwrap()
    }

    fn rms(f: &Field2) -> f64 {
        (f.data().iter().map(|x| x * x).sum::<f64>() / f.data().len() as f64).sqrt()
    }

    fn random_tendency(g: &Grid, seed: u64) -> VecField3 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut r = || Field3::from_vec(g.nx, g.ny, g.nz, (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        VecField3 { x: r(), y: r() }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = grid(8);
        let p = solve_neumann_poisson(&PoissonProblem::new(Field2::zeros(8, 10)), &g).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn cosine_mode_converges_to_continuum_solution() {
        let mut errs = Vec::new();
        for stencil in [NeumannStencil::Wide, NeumannStencil::Compact] {
            let mut e = Vec::new();
            for n in [16usize, 32, 64] {
                let g = grid(n);
                let k = PI / g.lx;
                let rhs = Field2::from_fn(g.nx, g.ny, |i, _| (k * g.x(i)).cos());
                let mut prob = PoissonProblem::new(rhs);
                prob.stencil = stencil;
                let p = solve_neumann_poisson(&prob, &g).unwrap();
                let err = (0..g.nx)
                    .flat_map(|i| (0..g.ny).map(move |j| (i, j)))
                    .map(|(i, j)| (p.at(i, j) + (k * g.x(i)).cos() / (k * k)).abs())
                    .fold(0.0, f64::max);
                e.push(err);
            }
            assert!(e[2] < 2e-3, "{stencil:?} {e:?}");
            assert!(e[0] / e[1] > 3.5 && e[1] / e[2] > 3.5, "{stencil:?} {e:?}");
            errs.push(e);
        }
    }

    #[test]
    fn wide_cosine_mode_is_an_exact_eigenvector() {
        let g = grid(12);
        let k = 2.0 * PI / g.lx;
        let rhs = Field2::from_fn(g.nx, g.ny, |i, _| (k * g.x(i)).cos());
        let p = solve_neumann_poisson(&PoissonProblem::new(rhs), &g).unwrap();
        let lambda = ((k * g.dx).sin() / g.dx).powi(2);
        for i in 0..g.nx {
            assert!((p.at(i, 3) + (k * g.x(i)).cos() / lambda).abs() < 1e-8);
        }
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = grid(8);
        let e = solve_neumann_poisson(&PoissonProblem::new(Field2::from_fn(8, 10, |_, _| 1.0)), &g).unwrap_err();
        assert!(matches!(e, Error::Solvability { .. }));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let g = grid(16);
        let rhs = Field2::from_fn(16, 18, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let m = rhs.mean();
        let rhs = Field2::from_vec(16, 18, rhs.data().iter().map(|x| x - m).collect());
        let mut prob = PoissonProblem::new(rhs);
        prob.max_iterations = 2;
        match solve_neumann_poisson(&prob, &g) {
            Err(Error::NoConvergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 2);
                assert!(residual > prob.tolerance);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn divergence_free_tendency_is_unchanged() {
        let g = grid(10);
        let s = crate::fields::make_smooth_state(&g, 1.0, 8);
        let (out, p) = project_step(&s.v, &g).unwrap();
        assert!(p.max_abs() < 1e-10, "{}", p.max_abs());
        let mut d = out.clone();
        d.axpy(-1.0, &s.v);
        assert!(d.max_abs() < 1e-10);
    }

    #[test]
    fn pure_gradient_is_removed() {
        let g = grid(10);
        let psi = Field2::from_fn(g.nx, g.ny, |i, j| (g.x(i) * 2.0).sin() + (g.y(j) * 3.0).cos() * g.x(i));
        let m = psi.mean();
        let psi = Field2::from_vec(g.nx, g.ny, psi.data().iter().map(|x| x - m).collect());
        let t = surface_pressure_grad(&psi, g.nz, &g);
        let (out, p) = project_step(&t, &g).unwrap();
        assert!(out.max_abs() < 1e-8 * t.max_abs(), "{}", out.max_abs());
        // The wide operator can only see psi through its gradient.
        let diff: Vec<f64> = p.data().iter().zip(psi.data()).map(|(a, b)| a - b).collect();
        let dg = surface_pressure_grad(&Field2::from_vec(g.nx, g.ny, diff), g.nz, &g);
        assert!(dg.max_abs() < 1e-8 * t.max_abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn projection_properties(seed in 0u64..10_000) {
            let g = grid(8);
            let t = random_tendency(&g, seed);
            let (out, p) = project_step(&t, &g).unwrap();
            let div = depth_averaged_divergence(&out, &g);
            let scale = rms(&depth_averaged_divergence(&t, &g));
            prop_assert!(rms(&div) <= 1e-8 * scale);
            prop_assert!(p.mean().abs() < 1e-13 * (1.0 + p.max_abs()));
            let (again, _) = project_step(&out, &g).unwrap();
            let mut d = again.clone();
            d.axpy(-1.0, &out);
            prop_assert!(d.max_abs() <= 1e-8 * t.max_abs());
            let e_in = inner2(&depth_average(&t.x, &g), &depth_average(&t.x, &g), &g)
                + inner2(&depth_average(&t.y, &g), &depth_average(&t.y, &g), &g);
            let e_out = inner2(&depth_average(&out.x, &g), &depth_average(&out.x, &g), &g)
                + inner2(&depth_average(&out.y, &g), &depth_average(&out.y, &g), &g);
            prop_assert!(e_out <= e_in * (1.0 + 1e-12));
        }
    }
}
