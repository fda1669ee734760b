//! Prognostic state, physical parameters, forcing and ghost-cell boundary conditions.
//!
//! Surface wind stress and the reference surface temperature are identically
//! zero here, so every boundary condition is homogeneous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::operators::{BcProfile, Field3, Ghosted, VecField3};

/// Horizontal velocity and temperature at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: VecField3,
    pub temperature: Field3,
    pub time: f64,
}

impl State {
    pub fn rest(grid: &Grid) -> Self {
        State {
            v: VecField3::zeros(grid.nx, grid.ny, grid.nz),
            temperature: Field3::zeros(grid.nx, grid.ny, grid.nz),
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.x.is_finite() && self.v.y.is_finite() && self.temperature.is_finite() && self.time.is_finite()
    }

    pub fn scaled(mut self, velocity: f64, temperature: f64) -> Self {
        self.v.x.scale(velocity);
        self.v.y.scale(velocity);
        self.temperature.scale(temperature);
        self
    }
}

/// Reynolds numbers, heat diffusivities, beta-plane Coriolis parameters and
/// the surface heat-exchange coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub re1: f64,
    pub re2: f64,
    pub rt1: f64,
    pub rt2: f64,
    pub f0: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params { re1: 10.0, re2: 10.0, rt1: 10.0, rt2: 10.0, f0: 1.0, beta: 0.0, alpha: 1.0 }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Re1", self.re1),
            ("Re2", self.re2),
            ("Rt1", self.rt1),
            ("Rt2", self.rt2),
            ("alpha", self.alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("f0", self.f0), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `f = f0 (beta + y)`.
    #[inline]
    pub fn coriolis(&self, y: f64) -> f64 {
        self.f0 * (self.beta + y)
    }
}

/// Static heat source.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub q: Field3,
}

/// Named analytic heat-source profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingProfile {
    Zero,
    /// `A cos(pi x / Lx) cos(pi y / Ly)`.
    Cosine { amplitude: f64 },
    /// `A cos(pi x / Lx) cos(pi y / Ly) cos(pi (z + h) / h)`.
    CosineZ { amplitude: f64 },
    /// `A` everywhere.
    Uniform { amplitude: f64 },
}

impl Forcing {
    pub fn zero(grid: &Grid) -> Self {
        Forcing { q: Field3::zeros(grid.nx, grid.ny, grid.nz) }
    }

    pub fn from_profile(grid: &Grid, profile: ForcingProfile) -> Self {
        let kx = PI / grid.lx;
        let ky = PI / grid.ly;
        let kz = PI / grid.h;
        let q = match profile {
            ForcingProfile::Zero => Field3::zeros(grid.nx, grid.ny, grid.nz),
            ForcingProfile::Cosine { amplitude } => Field3::from_fn(grid.nx, grid.ny, grid.nz, |i, j, _| {
                amplitude * (kx * grid.x(i)).cos() * (ky * grid.y(j)).cos()
            }),
            ForcingProfile::CosineZ { amplitude } => Field3::from_fn(grid.nx, grid.ny, grid.nz, |i, j, k| {
                amplitude * (kx * grid.x(i)).cos() * (ky * grid.y(j)).cos() * (kz * (grid.z(k) + grid.h)).cos()
            }),
            ForcingProfile::Uniform { amplitude } => {
                Field3::from_fn(grid.nx, grid.ny, grid.nz, |_, _, _| amplitude)
            }
        };
        Forcing { q }
    }
}

/// Ghost-filled velocity components: `v_z = 0` top and bottom, `v . n = 0` and
/// free slip on the side walls.
pub fn apply_bcs_velocity(state: &State) -> (Ghosted, Ghosted) {
    (
        Ghosted::fill(&state.v.x, BcProfile::VELOCITY_X),
        Ghosted::fill(&state.v.y, BcProfile::VELOCITY_Y),
    )
}

/// Ghost-filled temperature: Robin at the surface, insulated elsewhere.
pub fn apply_bcs_temperature(state: &State, params: &Params, grid: &Grid) -> Ghosted {
    Ghosted::fill(&state.temperature, BcProfile::temperature(params.alpha, grid.dz))
}

/// First `count` roots of `mu tan(mu h) = alpha`; `cos(mu (z + h))` then
/// satisfies both vertical temperature conditions.
pub fn robin_wavenumbers(alpha: f64, h: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|p| {
            let g = |mu: f64| mu * (mu * h).sin() - alpha * (mu * h).cos();
            let mut lo = p as f64 * PI / h;
            let mut hi = (p as f64 + 0.5) * PI / h;
            let glo = g(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == (glo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

const MAX_MODE: usize = 3;

/// Deterministic random band-limited state built from basis functions that
/// satisfy every boundary condition. The depth-averaged velocity is
/// divergence-free for the discrete `div_h` to rounding error.
pub fn make_smooth_state(grid: &Grid, alpha: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let kx = |m: usize| m as f64 * PI / grid.lx;
    let ky = |n: usize| n as f64 * PI / grid.ly;
    let kz = |p: usize| p as f64 * PI / grid.h;
    // Discrete symbols of the centred first difference acting on sin/cos.
    let sx = |m: usize| (kx(m) * grid.dx).sin() / grid.dx;
    let sy = |n: usize| (ky(n) * grid.dy).sin() / grid.dy;

    let mut v1 = Field3::zeros(nx, ny, nz);
    let mut v2 = Field3::zeros(nx, ny, nz);
    let mut t = Field3::zeros(nx, ny, nz);

    let weight = |m: usize, n: usize, p: usize| 1.0 / (1 + m * m + n * n + p * p) as f64;

    // Barotropic part from a streamfunction; a v1 ~ sy, v2 ~ -sx pairing keeps div_h(vbar) = 0.
    for m in 1..=MAX_MODE {
        for n in 1..=MAX_MODE {
            let c = rng.gen_range(-1.0..1.0) * weight(m, n, 0);
            let (a, b) = (c * sy(n), -c * sx(m));
            add_mode(&mut v1, grid, |x, y, _| a * (kx(m) * x).sin() * (ky(n) * y).cos());
            add_mode(&mut v2, grid, |x, y, _| b * (kx(m) * x).cos() * (ky(n) * y).sin());
        }
    }
    // Baroclinic part: vertical cosines with zero midpoint depth average.
    for p in 1..=2 {
        for m in 0..=MAX_MODE {
            for n in 0..=MAX_MODE {
                let a = rng.gen_range(-1.0..1.0) * weight(m, n, p);
                let b = rng.gen_range(-1.0..1.0) * weight(m, n, p);
                if m >= 1 {
                    add_mode(&mut v1, grid, |x, y, z| {
                        a * (kx(m) * x).sin() * (ky(n) * y).cos() * (kz(p) * (z + grid.h)).cos()
                    });
                }
                if n >= 1 {
                    add_mode(&mut v2, grid, |x, y, z| {
                        b * (kx(m) * x).cos() * (ky(n) * y).sin() * (kz(p) * (z + grid.h)).cos()
                    });
                }
            }
        }
    }
    let mus = robin_wavenumbers(alpha, grid.h, 2);
    for (p, &mu) in mus.iter().enumerate() {
        for m in 0..=MAX_MODE {
            for n in 0..=MAX_MODE {
                let c = rng.gen_range(-1.0..1.0) * weight(m, n, p);
                add_mode(&mut t, grid, |x, y, z| {
                    c * (kx(m) * x).cos() * (ky(n) * y).cos() * (mu * (z + grid.h)).cos()
                });
            }
        }
    }
    State { v: VecField3 { x: v1, y: v2 }, temperature: t, time: 0.0 }
}

fn add_mode(f: &mut Field3, grid: &Grid, mode: impl Fn(f64, f64, f64) -> f64) {
    for k in 0..grid.nz {
        let z = grid.z(k);
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                let idx = grid.idx(i, j, k);
                f.data_mut()[idx] += mode(grid.x(i), y, z);
            }
        }
    }
}
