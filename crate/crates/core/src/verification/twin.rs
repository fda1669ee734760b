//! Twin-run continuous-dependence experiment.
//!
//! A base trajectory and one or more trajectories started from a perturbed
//! velocity are advanced in lockstep with the same fixed step. The squared
//! distance `delta(t)` is compared against the accumulator `A(t)` built from
//! the base run: a constant `C` is fitted on the first half of the run and the
//! envelope `log delta(t) - log delta(0) <= C A(t)` is validated on the second.

use crate::energetics::compute_norms;
use crate::error::{Error, Result};
use crate::fields::{Forcing, Params, State};
use crate::geometry::Grid;
use crate::operators::VecField3;
use crate::pressure::ProjectionOptions;
use crate::timestepper::Stepper;

#[derive(Debug, Clone)]
pub struct TwinConfig {
    pub grid: Grid,
    pub params: Params,
    pub forcing: Forcing,
    pub base: State,
    /// Direction of the velocity perturbation; the temperature is never perturbed.
    pub perturbation: VecField3,
    pub t_end: f64,
    pub dt: f64,
    /// Relative allowance on the validated envelope.
    pub slack: f64,
    pub projection: ProjectionOptions,
}

impl TwinConfig {
    pub fn new(grid: Grid, params: Params, forcing: Forcing, base: State, perturbation: VecField3, t_end: f64, dt: f64) -> Self {
        TwinConfig { grid, params, forcing, base, perturbation, t_end, dt, slack: 1.25, projection: ProjectionOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinRunReport {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `||v1 - v2||^2 + ||T1 - T2||^2`.
    pub delta: Vec<f64>,
    /// `A(t)`, the time integral of the base-run norm products.
    pub accumulator: Vec<f64>,
    /// Least-squares slope of `log delta - log delta(0)` against `A` on the training half.
    pub c_fit: f64,
    pub slack: f64,
    /// Largest `log-ratio - envelope` on the validation half (non-positive when the envelope holds).
    pub worst_excess: f64,
    pub worst_time: f64,
    pub passed: bool,
}

impl TwinRunReport {
    pub fn log_ratio(&self) -> Vec<f64> {
        let d0 = self.delta[0];
        self.delta.iter().map(|d| d.ln() - d0.ln()).collect()
    }

    /// The envelope value `C A + slack |C| A` at each sample.
    pub fn envelope(&self) -> Vec<f64> {
        self.accumulator.iter().map(|a| self.c_fit * a + self.slack * self.c_fit.abs() * a).collect()
    }

    /// `delta_self / delta_other` at each common sample.
    pub fn delta_ratios(&self, other: &TwinRunReport) -> Vec<f64> {
        self.delta.iter().zip(&other.delta).skip(1).map(|(a, b)| a / b).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,delta,A,log_ratio,envelope\n");
        let env = self.envelope();
        let lr = self.log_ratio();
        for n in 0..self.times.len() {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", self.times[n], self.delta[n], self.accumulator[n], lr[n], env[n]));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "eps={:e} samples={} delta(0)={:.4e} delta(T)={:.4e} A(T)={:.4e} C_fit={:.4e} worst excess={:.3e} at t={:.4} {}",
            self.eps,
            self.times.len(),
            self.delta[0],
            self.delta.last().copied().unwrap_or(f64::NAN),
            self.accumulator.last().copied().unwrap_or(f64::NAN),
            self.c_fit,
            self.worst_excess,
            self.worst_time,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

fn distance_sq(a: &State, b: &State, grid: &Grid) -> f64 {
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    (sq(a.v.x.data(), b.v.x.data()) + sq(a.v.y.data(), b.v.y.data()) + sq(a.temperature.data(), b.temperature.data())) * grid.cell_volume()
}

fn integrand(state: &State, grid: &Grid, params: &Params) -> f64 {
    let n = compute_norms(state, grid, params);
    n.grad_v_sq * n.grad_v_sq + n.grad_temp_sq * n.grad_temp_sq + n.vz_sq * n.grad_vz_sq + n.tz_sq * n.grad_tz_sq
}

/// Runs the base trajectory and one perturbed trajectory per `eps`.
pub fn twin_runs(cfg: &TwinConfig, eps: &[f64]) -> Result<Vec<TwinRunReport>> {
    if !(cfg.dt > 0.0 && cfg.t_end > 0.0) {
        return Err(Error::Config(format!("twin run needs positive dt and t_end, got {} and {}", cfg.dt, cfg.t_end)));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::Config("perturbation sizes must be finite and nonnegative".into()));
    }
    let g = cfg.grid;
    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let make = || Stepper::new(cfg.params, cfg.forcing.clone(), g).with_projection(cfg.projection);
    let mut runs: Vec<(Stepper, State)> = Vec::with_capacity(eps.len() + 1);
    runs.push((make(), cfg.base.clone()));
    for &e in eps {
        let mut s = cfg.base.clone();
        s.v.axpy(e, &cfg.perturbation);
        runs.push((make(), s));
    }

    let mut times = vec![cfg.base.time];
    let mut deltas: Vec<Vec<f64>> = runs[1..].iter().map(|(_, s)| vec![distance_sq(&runs[0].1, s, &g)]).collect();
    let mut acc = vec![0.0];
    let mut last_integrand = integrand(&runs[0].1, &g, &cfg.params);
    for n in 1..=steps {
        let jobs: Vec<&mut (Stepper, State)> = runs.iter_mut().collect();
        let results = crate::par::map_jobs(jobs, |(stepper, state)| {
            let next = stepper.step(state, dt)?;
            *state = next;
            Ok::<(), Error>(())
        });
        for (r, label) in results.into_iter().zip(0..) {
            r.map_err(|e| Error::Domain(format!("twin run {} failed at step {n}: {e}", if label == 0 { "base".to_string() } else { format!("perturbed #{label}") })))?;
        }
        let t = cfg.base.time + n as f64 * dt;
        times.push(t);
        let now = integrand(&runs[0].1, &g, &cfg.params);
        acc.push(acc[n - 1] + 0.5 * dt * (last_integrand + now));
        last_integrand = now;
        for (d, (_, s)) in deltas.iter_mut().zip(&runs[1..]) {
            d.push(distance_sq(&runs[0].1, s, &g));
        }
    }

    Ok(eps
        .iter()
        .zip(deltas)
        .map(|(&e, delta)| evaluate(e, times.clone(), delta, acc.clone(), cfg.slack))
        .collect())
}

/// Runs one twin pair.
pub fn twin_run(cfg: &TwinConfig, eps: f64) -> Result<TwinRunReport> {
    Ok(twin_runs(cfg, &[eps])?.remove(0))
}

fn evaluate(eps: f64, times: Vec<f64>, delta: Vec<f64>, accumulator: Vec<f64>, slack: f64) -> TwinRunReport {
    let t0 = times[0];
    let half = t0 + 0.5 * (times[times.len() - 1] - t0);
    if delta[0] == 0.0 {
        // Identical initial data: the distance must stay exactly zero.
        let passed = delta.iter().all(|&d| d == 0.0);
        return TwinRunReport { eps, times, delta, accumulator, c_fit: 0.0, slack, worst_excess: 0.0, worst_time: t0, passed };
    }
    let y: Vec<f64> = delta.iter().map(|d| d.ln() - delta[0].ln()).collect();
    let (mut sya, mut saa) = (0.0, 0.0);
    for n in 1..times.len() {
        if times[n] <= half {
            sya += y[n] * accumulator[n];
            saa += accumulator[n] * accumulator[n];
        }
    }
    let c_fit = if saa > 0.0 { sya / saa } else { 0.0 };
    let mut worst = (f64::NEG_INFINITY, t0);
    for n in 0..times.len() {
        if times[n] > half {
            let a = accumulator[n];
            let bound = c_fit * a + slack * c_fit.abs() * a;
            let excess = y[n] - bound;
            if excess > worst.0 || excess.is_nan() {
                worst = (excess, times[n]);
            }
        }
    }
    // Rounding allowance for the log of a sum of squares.
    let passed = worst.0 <= 1e-12 && y.iter().all(|v| v.is_finite());
    TwinRunReport { eps, times, delta, accumulator, c_fit, slack, worst_excess: worst.0, worst_time: worst.1, passed }
}
