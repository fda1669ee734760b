//! Manufactured-solution convergence studies.
//!
//! The manufactured state is
//!
//! ```text
//! v1 =  g(t) sin(kx x) cos(ky y) (a + c1 cos(kz z))
//! v2 = -g(t) q cos(kx x) sin(ky y) (a + c2 cos(2 kz z))
//! T  =  g(t) cos(kx x) cos(ky y) cos(mu (z + h))
//! ```
//!
//! with `kx = pi/Lx`, `ky = pi/Ly`, `kz = pi/h`, `q = Ly/Lx` and `mu` the
//! first positive root of `mu tan(mu h) = alpha`. Every boundary condition
//! holds exactly, the depth average is divergence free and the surface
//! pressure is zero, so the discrete error measures interior truncation only.

use std::f64::consts::PI;

use crate::dynamics::Tendency;
use crate::error::{Error, Result};
use crate::fields::{robin_wavenumbers, Forcing, Params, State};
use crate::geometry::Grid;
use crate::operators::{Field3, VecField3};
use crate::timestepper::{integrate_with, StepControl, Stepper};

/// Time dependence of the manufactured amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmsProfile {
    /// `g = amplitude`.
    Steady { amplitude: f64 },
    /// `g = amplitude cos t`.
    Oscillating { amplitude: f64 },
}

impl MmsProfile {
    fn g(&self, t: f64) -> (f64, f64) {
        match *self {
            MmsProfile::Steady { amplitude } => (amplitude, 0.0),
            MmsProfile::Oscillating { amplitude } => (amplitude * t.cos(), -amplitude * t.sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsConfig {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
    pub params: Params,
    pub profile: MmsProfile,
    /// Barotropic weight and the two baroclinic weights.
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub t_end: f64,
    /// Layers per horizontal cell count (`nz = n * vertical_ratio`).
    pub vertical_ratio: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            lx: 1.0,
            ly: 1.0,
            h: 0.5,
            params: Params { re1: 5.0, re2: 5.0, rt1: 5.0, rt2: 5.0, f0: 1.0, beta: 0.5, alpha: 1.0 },
            profile: MmsProfile::Steady { amplitude: 1.0 },
            a: 1.0,
            c1: 0.5,
            c2: 0.3,
            t_end: 0.05,
            vertical_ratio: 0.5,
        }
    }
}

/// Shape functions and their derivatives at a point, for unit amplitude.
#[derive(Debug, Clone, Copy)]
struct Point {
    v1: f64,
    v2: f64,
    t: f64,
    w: f64,
    v1_x: f64,
    v1_y: f64,
    v1_z: f64,
    v1_zz: f64,
    v2_x: f64,
    v2_y: f64,
    v2_z: f64,
    v2_zz: f64,
    t_x: f64,
    t_y: f64,
    t_z: f64,
    t_zz: f64,
    /// Horizontal gradient of `int_{-h}^{z} T`.
    it_x: f64,
    it_y: f64,
}

/// The analytic manufactured solution for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct MmsSolution {
    cfg: MmsConfig,
    kx: f64,
    ky: f64,
    kz: f64,
    mu: f64,
    q: f64,
}

impl MmsSolution {
    pub fn new(cfg: MmsConfig) -> Result<Self> {
        cfg.params.validate()?;
        let mu = robin_wavenumbers(cfg.params.alpha, cfg.h, 1)[0];
        Ok(MmsSolution { cfg, kx: PI / cfg.lx, ky: PI / cfg.ly, kz: PI / cfg.h, mu, q: cfg.ly / cfg.lx })
    }

    fn point(&self, x: f64, y: f64, z: f64) -> Point {
        let (a, c1, c2, h) = (self.cfg.a, self.cfg.c1, self.cfg.c2, self.cfg.h);
        let (kx, ky, kz, mu, q) = (self.kx, self.ky, self.kz, self.mu, self.q);
        let (sx, cx) = (kx * x).sin_cos();
        let (sy, cy) = (ky * y).sin_cos();
        let (s1, k1) = (kz * z).sin_cos();
        let (s2, k2) = (2.0 * kz * z).sin_cos();
        let p1 = a + c1 * k1;
        let p1z = -c1 * kz * s1;
        let p1zz = -c1 * kz * kz * k1;
        let p2 = a + c2 * k2;
        let p2z = -2.0 * c2 * kz * s2;
        let p2zz = -4.0 * c2 * kz * kz * k2;
        let (sr, r) = (mu * (z + h)).sin_cos();
        let integral = c1 * s1 / kz - c2 * s2 / (2.0 * kz);
        Point {
            v1: sx * cy * p1,
            v2: -q * cx * sy * p2,
            t: cx * cy * r,
            w: -kx * cx * cy * integral,
            v1_x: kx * cx * cy * p1,
            v1_y: -ky * sx * sy * p1,
            v1_z: sx * cy * p1z,
            v1_zz: sx * cy * p1zz,
            v2_x: q * kx * sx * sy * p2,
            v2_y: -q * ky * cx * cy * p2,
            v2_z: -q * cx * sy * p2z,
            v2_zz: -q * cx * sy * p2zz,
            t_x: -kx * sx * cy * r,
            t_y: -ky * cx * sy * r,
            t_z: -mu * cx * cy * sr,
            t_zz: -mu * mu * cx * cy * r,
            it_x: -kx * sx * cy * sr / mu,
            it_y: -ky * cx * sy * sr / mu,
        }
    }

    /// The exact state at time `t` sampled at cell centres.
    pub fn state(&self, grid: &Grid, t: f64) -> State {
        let (g, _) = self.cfg.profile.g(t);
        let f = |sel: fn(&Point) -> f64| {
            Field3::from_fn(grid.nx, grid.ny, grid.nz, |i, j, k| g * sel(&self.point(grid.x(i), grid.y(j), grid.z(k))))
        };
        State { v: VecField3 { x: f(|p| p.v1), y: f(|p| p.v2) }, temperature: f(|p| p.t), time: t }
    }

    /// Source pieces `(shape, quadratic, linear)` so that the source at time
    /// `t` is `g' shape + g^2 quadratic + g linear`.
    fn source_parts(&self, grid: &Grid) -> [Tendency; 3] {
        let p = self.cfg.params;
        let lap_h = -(self.kx * self.kx + self.ky * self.ky);
        let f = |sel: &dyn Fn(&Point, f64) -> f64| {
            Field3::from_fn(grid.nx, grid.ny, grid.nz, |i, j, k| sel(&self.point(grid.x(i), grid.y(j), grid.z(k)), p.coriolis(grid.y(j))))
        };
        let shape = Tendency {
            dv: VecField3 { x: f(&|s, _| s.v1), y: f(&|s, _| s.v2) },
            dt: f(&|s, _| s.t),
        };
        let quadratic = Tendency {
            dv: VecField3 {
                x: f(&|s, _| s.v1 * s.v1_x + s.v2 * s.v1_y + s.w * s.v1_z),
                y: f(&|s, _| s.v1 * s.v2_x + s.v2 * s.v2_y + s.w * s.v2_z),
            },
            dt: f(&|s, _| s.v1 * s.t_x + s.v2 * s.t_y + s.w * s.t_z),
        };
        let linear = Tendency {
            dv: VecField3 {
                x: f(&|s, fc| -fc * s.v2 - s.it_x - (lap_h * s.v1) / p.re1 - s.v1_zz / p.re2),
                y: f(&|s, fc| fc * s.v1 - s.it_y - (lap_h * s.v2) / p.re1 - s.v2_zz / p.re2),
            },
            dt: f(&|s, _| -(lap_h * s.t) / p.rt1 - s.t_zz / p.rt2),
        };
        [shape, quadratic, linear]
    }

    /// Source to add to the discrete tendency so the manufactured state solves the equations.
    pub fn source(&self, grid: &Grid) -> impl Fn(f64) -> Tendency + Send + Sync + 'static {
        let [shape, quad, lin] = self.source_parts(grid);
        let profile = self.cfg.profile;
        move |t| {
            let (g, gp) = profile.g(t);
            let combine = |a: &Field3, b: &Field3, c: &Field3| {
                let mut out = a.map(|v| gp * v);
                out.axpy(g * g, b);
                out.axpy(g, c);
                out
            };
            Tendency {
                dv: VecField3 {
                    x: combine(&shape.dv.x, &quad.dv.x, &lin.dv.x),
                    y: combine(&shape.dv.y, &quad.dv.y, &lin.dv.y),
                },
                dt: combine(&shape.dt, &quad.dt, &lin.dt),
            }
        }
    }
}

/// Errors and observed orders of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<usize>,
    /// `L2` errors of `(v1, v2, T)` at `t_end`, one entry per level.
    pub errors: Vec<[f64; 3]>,
    /// `log2` error ratios between consecutive levels.
    pub orders: Vec<[f64; 3]>,
    pub steps: Vec<usize>,
}

pub const FIELD_NAMES: [&str; 3] = ["v1", "v2", "T"];

/// Order below which the finest pair counts as a verification failure.
pub const MIN_FINEST_ORDER: f64 = 1.7;

impl ConvergenceReport {
    /// Observed orders of the finest pair.
    pub fn finest_orders(&self) -> [f64; 3] {
        self.orders.last().copied().unwrap_or([f64::NAN; 3])
    }

    /// Whether every order on the finest pair reaches [`MIN_FINEST_ORDER`].
    pub fn passed(&self) -> bool {
        self.finest_orders().iter().all(|&o| o >= MIN_FINEST_ORDER)
    }

    /// Whether every order of every pair lies in `[lo, hi]`.
    pub fn orders_within(&self, lo: f64, hi: f64) -> bool {
        !self.orders.is_empty() && self.orders.iter().flatten().all(|&o| o >= lo && o <= hi)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:>6} {:>7} {:>12} {:>12} {:>12} {:>7} {:>7} {:>7}\n", "N", "steps", "err v1", "err v2", "err T", "p v1", "p v2", "p T");
        for (n, level) in self.levels.iter().enumerate() {
            let e = self.errors[n];
            s.push_str(&format!("{:>6} {:>7} {:>12.4e} {:>12.4e} {:>12.4e}", level, self.steps[n], e[0], e[1], e[2]));
            if n > 0 {
                let o = self.orders[n - 1];
                s.push_str(&format!(" {:>7.3} {:>7.3} {:>7.3}", o[0], o[1], o[2]));
            }
            s.push('\n');
        }
        s
    }
}

fn l2_error(a: &Field3, b: &Field3, grid: &Grid) -> f64 {
    let sq: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq * grid.cell_volume()).sqrt()
}

/// Result of a single manufactured-solution run.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsLevel {
    pub n: usize,
    pub errors: [f64; 3],
    pub steps: usize,
}

/// Runs one level: `n x n` horizontal cells, starting from the exact state.
pub fn mms_level(n: usize, cfg: &MmsConfig) -> Result<MmsLevel> {
    let sol = MmsSolution::new(*cfg)?;
    let nz = ((n as f64 * cfg.vertical_ratio).round() as usize).max(crate::geometry::MIN_CELLS);
    let grid = Grid::new(cfg.lx, cfg.ly, cfg.h, n, n, nz)?;
    let mut stepper = Stepper::new(cfg.params, Forcing::zero(&grid), grid).with_source(Box::new(sol.source(&grid)));
    let control = StepControl::adaptive(cfg.t_end, cfg.t_end.max(f64::MIN_POSITIVE));
    struct Count(usize);
    impl crate::timestepper::Observer for Count {
        fn observe(&mut self, obs: &crate::timestepper::Observation<'_>) -> Result<()> {
            self.0 = obs.step;
            Ok(())
        }
    }
    let mut count = Count(0);
    let end = integrate_with(&mut stepper, sol.state(&grid, 0.0), &control, &mut [&mut count])?;
    let exact = sol.state(&grid, cfg.t_end);
    Ok(MmsLevel {
        n,
        errors: [
            l2_error(&end.v.x, &exact.v.x, &grid),
            l2_error(&end.v.y, &exact.v.y, &grid),
            l2_error(&end.temperature, &exact.temperature, &grid),
        ],
        steps: count.0,
    })
}

/// Refinement study over the given horizontal cell counts (at least three,
/// strictly increasing).
pub fn mms_run(levels: &[usize], cfg: &MmsConfig) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 levels, got {}", levels.len())));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("levels must be strictly increasing".into()));
    }
    let runs = crate::par::map_jobs(levels.to_vec(), |n| mms_level(n, cfg));
    let runs: Vec<MmsLevel> = runs.into_iter().collect::<Result<_>>()?;
    let errors: Vec<[f64; 3]> = runs.iter().map(|r| r.errors).collect();
    let orders = runs
        .windows(2)
        .map(|w| {
            let ratio = (w[1].n as f64 / w[0].n as f64).log2();
            std::array::from_fn(|f| (w[0].errors[f] / w[1].errors[f]).log2() / ratio)
        })
        .collect();
    Ok(ConvergenceReport { levels: levels.to_vec(), errors, orders, steps: runs.iter().map(|r| r.steps).collect() })
}
