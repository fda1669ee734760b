//! Domain, structured grid and domain-dependent constants.

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgOptions};
use crate::operators::{lap_h, BcProfile, Field3, Ghosted};

/// The cylinder `M x (-h, 0)` with a rectangular cross-section `M = (0, lx) x (0, ly)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

/// Cell-centred grid over a [`Domain`].
///
/// Cell `(i, j, k)` has its centre at `((i+1/2) dx, (j+1/2) dy, -h + (k+1/2) dz)`.
/// Flat indices are x-fastest: `i + nx (j + ny k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

pub const MIN_CELLS: usize = 4;

/// Validates extents and cell counts and builds the matching grid.
pub fn build_domain(lx: f64, ly: f64, h: f64, nx: usize, ny: usize, nz: usize) -> Result<(Domain, Grid)> {
    for (name, v) in [("Lx", lx), ("Ly", ly), ("h", h)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
        }
    }
    for (name, n) in [("Nx", nx), ("Ny", ny), ("Nz", nz)] {
        if n < MIN_CELLS {
            return Err(Error::Config(format!("{name} must be at least {MIN_CELLS}, got {n}")));
        }
    }
    let grid = Grid {
        nx,
        ny,
        nz,
        dx: lx / nx as f64,
        dy: ly / ny as f64,
        dz: h / nz as f64,
        lx,
        ly,
        h,
    };
    Ok((Domain { lx, ly, h }, grid))
}

impl Grid {
    pub fn new(lx: f64, ly: f64, h: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        build_domain(lx, ly, h, nx, ny, nz).map(|(_, g)| g)
    }

    pub fn domain(&self) -> Domain {
        Domain { lx: self.lx, ly: self.ly, h: self.h }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        -self.h + (k as f64 + 0.5) * self.dz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn columns(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// `|Omega| = lx ly h`.
    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.h
    }

    /// `|M| = lx ly`.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy).min(self.dz)
    }

    /// The same horizontal grid with a different number of layers.
    pub fn with_layers(&self, nz: usize) -> Grid {
        Grid {
            nz,
            dz: self.h / nz as f64,
            ..*self
        }
    }
}

/// Side-wall condition set used when computing the Poincare constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallProfile {
    /// Zero at the x-walls, free at the y-walls (the first velocity component).
    V1,
    /// Zero at the y-walls, free at the x-walls (the second velocity component).
    V2,
    /// Both components: the larger of the two constants.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConstants {
    pub c_m: f64,
    pub volume: f64,
    pub area: f64,
}

impl DomainConstants {
    pub fn compute(grid: &Grid) -> Result<Self> {
        Ok(DomainConstants {
            c_m: poincare_constant(grid, WallProfile::Velocity)?,
            volume: grid.volume(),
            area: grid.area(),
        })
    }
}

const POINCARE_TOL: f64 = 1e-8;
const POINCARE_MAX_SWEEPS: usize = 500;

/// `C_M = 1 / lambda_min` for the discrete horizontal Laplacian under the given
/// side-wall conditions, by inverse power iteration.
pub fn poincare_constant(grid: &Grid, profile: WallProfile) -> Result<f64> {
    match profile {
        WallProfile::V1 => smallest_eigenvalue(grid, BcProfile::VELOCITY_X).map(|l| 1.0 / l),
        WallProfile::V2 => smallest_eigenvalue(grid, BcProfile::VELOCITY_Y).map(|l| 1.0 / l),
        WallProfile::Velocity => {
            let a = poincare_constant(grid, WallProfile::V1)?;
            let b = poincare_constant(grid, WallProfile::V2)?;
            Ok(a.max(b))
        }
    }
}

fn smallest_eigenvalue(grid: &Grid, bc: BcProfile) -> Result<f64> {
    let layer = grid.with_layers(1);
    let n = layer.columns();
    let neg_lap = |u: &[f64], out: &mut [f64]| {
        let f = Field3::from_vec(layer.nx, layer.ny, 1, u.to_vec());
        let l = lap_h(&Ghosted::fill(&f, bc), &layer);
        for (o, v) in out.iter_mut().zip(l.data()) {
            *o = -v;
        }
    };
    // Deterministic, non-symmetric start vector so it overlaps the lowest mode.
    let mut u: Vec<f64> = (0..n)
        .map(|c| {
            let (i, j) = (c % layer.nx, c / layer.nx);
            1.0 + 0.3 * layer.x(i) / layer.lx + 0.2 * (layer.y(j) / layer.ly).powi(2)
        })
        .collect();
    normalize(&mut u);
    let opts = CgOptions {
        tolerance: 1e-13,
        max_iterations: 20 * n + 100,
        remove_mean: false,
    };
    let mut lambda = f64::NAN;
    let mut au = vec![0.0; n];
    for _ in 0..POINCARE_MAX_SWEEPS {
        let solve = conjugate_gradient(neg_lap, &u, None, &opts)?;
        let mut next = solve.solution;
        normalize(&mut next);
        neg_lap(&next, &mut au);
        let rq: f64 = next.iter().zip(&au).map(|(a, b)| a * b).sum();
        let converged = ((rq - lambda) / rq).abs() < POINCARE_TOL;
        lambda = rq;
        u = next;
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::NoConvergence {
        solver: "inverse power iteration",
        iterations: POINCARE_MAX_SWEEPS,
        residual: f64::NAN,
    })
}

fn normalize(u: &mut [f64]) {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= norm);
}
