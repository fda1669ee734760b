//! Discrete differential and integral operators on the cell-centred grid.
//!
//! Derivatives are second-order centred differences evaluated on
//! [`Ghosted`] inputs, so boundary conditions enter only through the ghost
//! fill. Vertical integrals all use the same midpoint rule, which makes
//! `w(z = 0) = -h div(vbar)` hold exactly at the discrete level.

mod field;

pub use field::{robin_multiplier, BcProfile, Field2, Field3, Ghosted, VecField2, VecField3};

use crate::geometry::Grid;
use crate::par;

/// Applies a row kernel `f(padded, row_offset, out_row)` over every interior x-line.
fn stencil(g: &Ghosted, kernel: impl Fn(&[f64], usize, &mut [f64]) + Sync + Send) -> Field3 {
    let (nx, ny, nz) = g.shape();
    let mut out = Field3::zeros(nx, ny, nz);
    let raw = g.raw();
    par::for_each_row(out.data_mut(), nx, |r, row| kernel(raw, g.row_offset(r), row));
    out
}

pub fn ddx(g: &Ghosted, grid: &Grid) -> Field3 {
    let c = 0.5 / grid.dx;
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = (d[o + i + 1] - d[o + i - 1]) * c;
        }
    })
}

pub fn ddy(g: &Ghosted, grid: &Grid) -> Field3 {
    let c = 0.5 / grid.dy;
    let s = g.stride_y();
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = (d[o + i + s] - d[o + i - s]) * c;
        }
    })
}

pub fn ddz(g: &Ghosted, grid: &Grid) -> Field3 {
    let c = 0.5 / grid.dz;
    let s = g.stride_z();
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = (d[o + i + s] - d[o + i - s]) * c;
        }
    })
}

pub fn d2dz2(g: &Ghosted, grid: &Grid) -> Field3 {
    let c = 1.0 / (grid.dz * grid.dz);
    let s = g.stride_z();
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            let p = o + i;
            *v = (d[p + s] - 2.0 * d[p] + d[p - s]) * c;
        }
    })
}

/// Five-point horizontal Laplacian.
pub fn lap_h(g: &Ghosted, grid: &Grid) -> Field3 {
    let cx = 1.0 / (grid.dx * grid.dx);
    let cy = 1.0 / (grid.dy * grid.dy);
    let s = g.stride_y();
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            let p = o + i;
            *v = (d[p + 1] - 2.0 * d[p] + d[p - 1]) * cx + (d[p + s] - 2.0 * d[p] + d[p - s]) * cy;
        }
    })
}

/// `kh lap_h + kz d2dz2` in one pass.
pub fn diffuse(g: &Ghosted, kh: f64, kz: f64, grid: &Grid) -> Field3 {
    let cx = kh / (grid.dx * grid.dx);
    let cy = kh / (grid.dy * grid.dy);
    let cz = kz / (grid.dz * grid.dz);
    let (sy, sz) = (g.stride_y(), g.stride_z());
    stencil(g, |d, o, row| {
        for (i, v) in row.iter_mut().enumerate() {
            let p = o + i;
            let c2 = 2.0 * d[p];
            *v = (d[p + 1] - c2 + d[p - 1]) * cx + (d[p + sy] - c2 + d[p - sy]) * cy + (d[p + sz] - c2 + d[p - sz]) * cz;
        }
    })
}

pub fn grad_h(g: &Ghosted, grid: &Grid) -> VecField3 {
    VecField3 { x: ddx(g, grid), y: ddy(g, grid) }
}

/// `d(ux)/dx + d(uy)/dy`; the components carry their own ghost rules.
pub fn div_h(ux: &Ghosted, uy: &Ghosted, grid: &Grid) -> Field3 {
    assert_eq!(ux.shape(), uy.shape());
    let cx = 0.5 / grid.dx;
    let cy = 0.5 / grid.dy;
    let s = uy.stride_y();
    let (nx, ny, nz) = ux.shape();
    let mut out = Field3::zeros(nx, ny, nz);
    let (a, b) = (ux.raw(), uy.raw());
    par::for_each_row(out.data_mut(), nx, |r, row| {
        let o = ux.row_offset(r);
        for (i, v) in row.iter_mut().enumerate() {
            let p = o + i;
            *v = (a[p + 1] - a[p - 1]) * cx + (b[p + s] - b[p - s]) * cy;
        }
    });
    out
}

/// `int_{-h}^{z} phi` at cell centres by the midpoint rule:
/// `out_k = dz (phi_k / 2 + sum_{m<k} phi_m)`.
pub fn vertical_cumint(f: &Field3, grid: &Grid) -> Field3 {
    let (nx, ny, nz) = f.shape();
    let n = nx * ny;
    let dz = grid.dz;
    let mut out = Field3::zeros(nx, ny, nz);
    let mut acc = vec![0.0; n];
    let src = f.data();
    let dst = out.data_mut();
    for k in 0..nz {
        let layer = &src[k * n..(k + 1) * n];
        let o = &mut dst[k * n..(k + 1) * n];
        for c in 0..n {
            o[c] = dz * (acc[c] + 0.5 * layer[c]);
            acc[c] += layer[c];
        }
    }
    out
}

/// `(1/h) int_{-h}^{0} phi = (dz/h) sum_k phi_k`.
pub fn depth_average(f: &Field3, grid: &Grid) -> Field2 {
    let (nx, ny, nz) = f.shape();
    let n = nx * ny;
    let mut acc = vec![0.0; n];
    for k in 0..nz {
        for (a, v) in acc.iter_mut().zip(f.layer(k)) {
            *a += v;
        }
    }
    let w = grid.dz / grid.h;
    acc.iter_mut().for_each(|a| *a *= w);
    Field2::from_vec(nx, ny, acc)
}

/// Repeats a horizontal field over `nz` layers.
pub fn broadcast(f: &Field2, nz: usize) -> Field3 {
    let (nx, ny) = f.shape();
    let mut data = Vec::with_capacity(nx * ny * nz);
    for _ in 0..nz {
        data.extend_from_slice(f.data());
    }
    Field3::from_vec(nx, ny, nz, data)
}

/// `phi - depth_average(phi)`.
pub fn fluctuation(f: &Field3, grid: &Grid) -> Field3 {
    let avg = depth_average(f, grid);
    let (nx, ny, nz) = f.shape();
    let n = nx * ny;
    let mut out = f.clone();
    for k in 0..nz {
        for (o, a) in out.data_mut()[k * n..(k + 1) * n].iter_mut().zip(avg.data()) {
            *o -= a;
        }
    }
    out
}

/// `w = -int_{-h}^{z} div(v)`; vanishes at the bottom by construction.
pub fn diagnose_w(vx: &Ghosted, vy: &Ghosted, grid: &Grid) -> Field3 {
    let mut w = vertical_cumint(&div_h(vx, vy, grid), grid);
    w.scale(-1.0);
    w
}

/// `p = p_s - int_{-h}^{z} T`.
pub fn hydrostatic_pressure(t: &Field3, p_s: &Field2, grid: &Grid) -> Field3 {
    let mut p = broadcast(p_s, t.shape().2);
    p.axpy(-1.0, &vertical_cumint(t, grid));
    p
}

/// `<a, b> = sum a b dV` over the 3D grid.
pub fn inner(a: &Field3, b: &Field3, grid: &Grid) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let (nx, ny, nz) = a.shape();
    let (da, db) = (a.data(), b.data());
    par::sum_rows(ny * nz, |r| {
        let s = r * nx;
        da[s..s + nx].iter().zip(&db[s..s + nx]).map(|(x, y)| x * y).sum::<f64>()
    }) * grid.cell_volume()
}

pub fn inner_vec(a: &VecField3, b: &VecField3, grid: &Grid) -> f64 {
    inner(&a.x, &b.x, grid) + inner(&a.y, &b.y, grid)
}

/// `<a, b> = sum a b dA` over `M`.
pub fn inner2(a: &Field2, b: &Field2, grid: &Grid) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>() * grid.cell_area()
}

pub fn norm_sq(a: &Field3, grid: &Grid) -> f64 {
    inner(a, a, grid)
}
