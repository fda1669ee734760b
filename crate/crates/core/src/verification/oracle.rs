//! Dense-matrix oracle for the linear operators.
//!
//! Each operator is probed column by column with unit basis vectors and the
//! result compared with an independent assembly from one-dimensional
//! difference matrices combined by Kronecker products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::operators::{
    broadcast, d2dz2, ddx, ddy, ddz, depth_average, diagnose_w, div_h, fluctuation, grad_h, lap_h,
    vertical_cumint, BcProfile, Field2, Field3, Ghosted,
};
use crate::dynamics::{advect, baroclinic_pressure_grad};
use crate::pressure::{neumann_laplacian, project_step_with, NeumannStencil, ProjectionOptions};

/// Largest grid the oracle accepts in any direction.
pub const MAX_ORACLE_CELLS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub max_abs: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Location of the worst entry, as a basis-cell description.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub grid: (usize, usize, usize),
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_table(&self) -> String {
        let (nx, ny, nz) = self.grid;
        let mut s = format!("oracle on {nx}x{ny}x{nz}\n{:<44} {:>12} {:>10} {:<6} worst\n", "check", "max_abs", "tol", "status");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<44} {:>12.3e} {:>10.1e} {:<6} {}\n",
                c.name,
                c.max_abs,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" },
                c.detail
            ));
        }
        s
    }
}

/// Column `c` of the result is `f(e_c)`.
fn probe(n_in: usize, n_out: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_out, n_in);
    let mut e = vec![0.0; n_in];
    for c in 0..n_in {
        e[c] = 1.0;
        let col = f(&e);
        assert_eq!(col.len(), n_out);
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v;
        }
        e[c] = 0.0;
    }
    m
}

fn id(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Centred first difference with ghosts `e_{-1} = lo e_0`, `e_n = hi e_{n-1}`.
fn d1(n: usize, d: f64, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            m[(i, i + 1)] += 0.5 / d;
        } else {
            m[(i, n - 1)] += 0.5 * hi / d;
        }
        if i > 0 {
            m[(i, i - 1)] -= 0.5 / d;
        } else {
            m[(i, 0)] -= 0.5 * lo / d;
        }
    }
    m
}

fn d2(n: usize, d: f64, lo: f64, hi: f64) -> DMatrix<f64> {
    let c = 1.0 / (d * d);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] -= 2.0 * c;
        if i + 1 < n {
            m[(i, i + 1)] += c;
        } else {
            m[(i, n - 1)] += hi * c;
        }
        if i > 0 {
            m[(i, i - 1)] += c;
        } else {
            m[(i, 0)] += lo * c;
        }
    }
    m
}

/// Midpoint cumulative integral from the bottom.
fn cumint(n: usize, dz: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, m| {
        if m < k {
            dz
        } else if m == k {
            0.5 * dz
        } else {
            0.0
        }
    })
}

/// `x`-fastest 3D operator from per-direction factors.
fn kron3(z: &DMatrix<f64>, y: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    z.kronecker(&y.kronecker(x))
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

fn stack_cols(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

struct Checker {
    grid: Grid,
    checks: Vec<OracleCheck>,
}

impl Checker {
    fn cell(&self, n: usize) -> String {
        let (nx, ny, nz) = (self.grid.nx, self.grid.ny, self.grid.nz);
        let cells = nx * ny * nz;
        let (comp, n) = if n >= cells { (1, n - cells) } else { (0, n) };
        if n >= cells {
            return format!("index {n}");
        }
        format!("component {comp} cell ({}, {}, {})", n % nx, (n / nx) % ny, n / (nx * ny))
    }

    fn compare(&mut self, name: impl Into<String>, got: &DMatrix<f64>, want: &DMatrix<f64>, tol: f64) {
        let name = name.into();
        if got.shape() != want.shape() {
            self.checks.push(OracleCheck {
                name,
                max_abs: f64::INFINITY,
                tolerance: tol,
                passed: false,
                detail: format!("shape {:?} vs {:?}", got.shape(), want.shape()),
            });
            return;
        }
        let mut worst = (0.0f64, 0usize, 0usize);
        for c in 0..got.ncols() {
            for r in 0..got.nrows() {
                let d = (got[(r, c)] - want[(r, c)]).abs();
                if d > worst.0 || d.is_nan() {
                    worst = (d, r, c);
                }
            }
        }
        let detail = format!("row {} / basis {}", self.cell(worst.1), self.cell(worst.2));
        self.checks.push(OracleCheck { name, max_abs: worst.0, tolerance: tol, passed: worst.0 <= tol, detail });
    }

    fn scalar(&mut self, name: impl Into<String>, value: f64, tol: f64, detail: String) {
        self.checks.push(OracleCheck { name: name.into(), max_abs: value, tolerance: tol, passed: value <= tol, detail });
    }
}

fn f3(grid: &Grid, x: &[f64]) -> Field3 {
    Field3::from_vec(grid.nx, grid.ny, grid.nz, x.to_vec())
}

fn f2(grid: &Grid, x: &[f64]) -> Field2 {
    Field2::from_vec(grid.nx, grid.ny, x.to_vec())
}

fn concat(a: &Field3, b: &Field3) -> Vec<f64> {
    a.data().iter().chain(b.data()).copied().collect()
}

/// Smallest eigenvalue of `-m` above `floor`.
fn smallest_above(m: &DMatrix<f64>, floor: f64) -> f64 {
    let sym = (-m.clone() - m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > floor)
        .fold(f64::INFINITY, f64::min)
}

/// Assembles every linear operator densely and checks it against the stencils.
pub fn dense_oracle_check(grid: &Grid) -> Result<OracleReport> {
    if grid.nx.max(grid.ny).max(grid.nz) > MAX_ORACLE_CELLS {
        return Err(Error::Domain(format!(
            "dense oracle needs at most {MAX_ORACLE_CELLS} cells per direction, got {}x{}x{}",
            grid.nx, grid.ny, grid.nz
        )));
    }
    let g = *grid;
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let n = g.cells();
    let n2 = g.columns();
    let tol = 1e-12;
    let mut ck = Checker { grid: g, checks: Vec::new() };
    let alpha = 0.75;
    let profiles = [
        ("neumann", BcProfile::NEUMANN),
        ("velocity-x", BcProfile::VELOCITY_X),
        ("velocity-y", BcProfile::VELOCITY_Y),
        ("vertical-velocity", BcProfile::VERTICAL_VELOCITY),
        ("temperature", BcProfile::temperature(alpha, g.dz)),
    ];
    let dx = |bc: &BcProfile| d1(nx, g.dx, bc.x[0], bc.x[1]);
    let dy = |bc: &BcProfile| d1(ny, g.dy, bc.y[0], bc.y[1]);
    let dz = |bc: &BcProfile| d1(nz, g.dz, bc.z[0], bc.z[1]);
    let dxx = |bc: &BcProfile| d2(nx, g.dx, bc.x[0], bc.x[1]);
    let dyy = |bc: &BcProfile| d2(ny, g.dy, bc.y[0], bc.y[1]);
    let dzz = |bc: &BcProfile| d2(nz, g.dz, bc.z[0], bc.z[1]);
    let (ix, iy, iz) = (id(nx), id(ny), id(nz));

    for (label, bc) in &profiles {
        let run = |op: fn(&Ghosted, &Grid) -> Field3| probe(n, n, |x| op(&Ghosted::fill(&f3(&g, x), *bc), &g).into_vec());
        ck.compare(format!("ddx [{label}]"), &run(ddx), &kron3(&iz, &iy, &dx(bc)), tol);
        ck.compare(format!("ddy [{label}]"), &run(ddy), &kron3(&iz, &dy(bc), &ix), tol);
        ck.compare(format!("ddz [{label}]"), &run(ddz), &kron3(&dz(bc), &iy, &ix), tol);
        ck.compare(format!("d2dz2 [{label}]"), &run(d2dz2), &kron3(&dzz(bc), &iy, &ix), tol);
        let lap = run(lap_h);
        let lap_want = kron3(&iz, &iy, &dxx(bc)) + kron3(&iz, &dyy(bc), &ix);
        ck.compare(format!("lap_h [{label}]"), &lap, &lap_want, tol);
        ck.compare(format!("lap_h symmetric [{label}]"), &lap, &lap.transpose(), tol);
        let zz = run(d2dz2);
        ck.compare(format!("d2dz2 symmetric [{label}]"), &zz, &zz.transpose(), tol);
    }

    let nb = BcProfile::NEUMANN;
    let (vx, vy) = (BcProfile::VELOCITY_X, BcProfile::VELOCITY_Y);
    let grad = probe(n, 2 * n, |x| {
        let gr = grad_h(&Ghosted::fill(&f3(&g, x), nb), &g);
        concat(&gr.x, &gr.y)
    });
    let grad_want = stack_rows(&kron3(&iz, &iy, &dx(&nb)), &kron3(&iz, &dy(&nb), &ix));
    ck.compare("grad_h [neumann]", &grad, &grad_want, tol);
    let div = probe(2 * n, n, |x| {
        let (a, b) = x.split_at(n);
        div_h(&Ghosted::fill(&f3(&g, a), vx), &Ghosted::fill(&f3(&g, b), vy), &g).into_vec()
    });
    let div_want = stack_cols(&kron3(&iz, &iy, &dx(&vx)), &kron3(&iz, &dy(&vy), &ix));
    ck.compare("div_h [velocity]", &div, &div_want, tol);
    ck.compare("grad_h^T = -div_h", &grad.transpose(), &(-div.clone()), tol);

    let ci = probe(n, n, |x| vertical_cumint(&f3(&g, x), &g).into_vec());
    let ci_want = kron3(&cumint(nz, g.dz), &iy, &ix);
    ck.compare("vertical_cumint", &ci, &ci_want, tol);
    let avg = probe(n, n2, |x| depth_average(&f3(&g, x), &g).into_vec());
    let avg_want = DMatrix::from_element(1, nz, 1.0 / nz as f64).kronecker(&id(n2));
    ck.compare("depth_average", &avg, &avg_want, tol);
    let bc_m = probe(n2, n, |x| broadcast(&f2(&g, x), nz).into_vec());
    let bc_want = DMatrix::from_element(nz, 1, 1.0).kronecker(&id(n2));
    ck.compare("broadcast", &bc_m, &bc_want, tol);
    let fl = probe(n, n, |x| fluctuation(&f3(&g, x), &g).into_vec());
    ck.compare("fluctuation", &fl, &(id(n) - &bc_want * &avg_want), tol);
    ck.compare("depth_average . fluctuation = 0", &(&avg * &fl), &DMatrix::zeros(n2, n), 1e-14);

    let w = probe(2 * n, n, |x| {
        let (a, b) = x.split_at(n);
        diagnose_w(&Ghosted::fill(&f3(&g, a), vx), &Ghosted::fill(&f3(&g, b), vy), &g).into_vec()
    });
    ck.compare("diagnose_w", &w, &(-(&ci_want * &div_want)), tol);

    let bpg = probe(n, 2 * n, |x| {
        let b = baroclinic_pressure_grad(&f3(&g, x), &g);
        concat(&b.x, &b.y)
    });
    ck.compare("baroclinic_pressure_grad", &bpg, &(-(&grad_want * &ci_want)), tol);

    // Horizontal Neumann Laplacians on the cross-section.
    let (ix2, iy2) = (id(nx), id(ny));
    let dx2n = d1(nx, g.dx, 1.0, 1.0);
    let dy2n = d1(ny, g.dy, 1.0, 1.0);
    let dx2v = d1(nx, g.dx, -1.0, -1.0);
    let dy2v = d1(ny, g.dy, -1.0, -1.0);
    let gh2 = stack_rows(&iy2.kronecker(&dx2n), &dy2n.kronecker(&ix2));
    let dv2 = stack_cols(&iy2.kronecker(&dx2v), &dy2v.kronecker(&ix2));
    let wide_want = &dv2 * &gh2;
    let compact_want = iy2.kronecker(&d2(nx, g.dx, 1.0, 1.0)) + d2(ny, g.dy, 1.0, 1.0).kronecker(&ix2);
    for (label, st, want) in [("wide", NeumannStencil::Wide, &wide_want), ("compact", NeumannStencil::Compact, &compact_want)] {
        let m = probe(n2, n2, |x| neumann_laplacian(&f2(&g, x), st, &g).into_vec());
        ck.compare(format!("neumann laplacian [{label}]"), &m, want, tol);
        let row_sum = m.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
        ck.scalar(format!("neumann laplacian row sums [{label}]"), row_sum, 1e-12, String::from("constants in kernel"));
        ck.compare(format!("neumann laplacian symmetric [{label}]"), &m, &m.transpose(), tol);
    }

    // Spectra on one-dimensional sections.
    let kx = std::f64::consts::PI / g.lx;
    let predicted = 2.0 / (g.dx * g.dx) * (1.0 - (kx * g.dx).cos());
    for (label, lo) in [("neumann", 1.0), ("dirichlet", -1.0)] {
        let l = smallest_above(&d2(nx, g.dx, lo, lo), 1e-9);
        ck.scalar(
            format!("smallest eigenvalue, 1D {label} laplacian"),
            (l - predicted).abs() / predicted,
            1e-12,
            format!("{l:.12} vs (2/dx^2)(1-cos(pi dx/Lx)) = {predicted:.12}"),
        );
    }
    let lw = smallest_above(&(&d1(nx, g.dx, -1.0, -1.0) * &d1(nx, g.dx, 1.0, 1.0)), 1e-9);
    let pw = ((kx * g.dx).sin() / g.dx).powi(2);
    ck.scalar("smallest eigenvalue, 1D wide laplacian", (lw - pw).abs() / pw, 1e-12, format!("{lw:.12} vs sin^2(pi dx/Lx)/dx^2 = {pw:.12}"));

    // Projection: dense pseudo-inverse against CG.
    let opts = ProjectionOptions { tolerance: 1e-15, max_iterations: 10 * n2, stencil: NeumannStencil::Wide };
    let mut failure = None;
    let proj = probe(2 * n, 2 * n, |x| {
        let (a, b) = x.split_at(n);
        let t = crate::operators::VecField3 { x: f3(&g, a), y: f3(&g, b) };
        match project_step_with(&t, &g, &opts, None) {
            Ok((p, _)) => concat(&p.x, &p.y),
            Err(e) => {
                failure = Some(e.to_string());
                vec![f64::NAN; 2 * n]
            }
        }
    });
    if let Some(e) = failure {
        ck.scalar("projection solve", f64::INFINITY, 0.0, e);
    }
    let avg2 = stack_cols(&avg_want, &DMatrix::zeros(n2, n));
    let avg2y = stack_cols(&DMatrix::zeros(n2, n), &avg_want);
    let div_bar = &iy2.kronecker(&dx2v) * &avg2 + &dy2v.kronecker(&ix2) * &avg2y;
    let pinv = wide_want.clone().pseudo_inverse(1e-10).map_err(|e| Error::Domain(e.to_string()))?;
    let grad3 = stack_rows(&(&bc_want * &iy2.kronecker(&dx2n)), &(&bc_want * &dy2n.kronecker(&ix2)));
    let proj_want = id(2 * n) - &grad3 * &pinv * &div_bar;
    ck.compare("projection", &proj, &proj_want, tol);
    ck.compare("projection idempotent", &(&proj_want * &proj_want), &proj_want, tol);
    ck.compare("projection symmetric", &proj_want, &proj_want.transpose(), tol);
    ck.compare("projection removes gradients", &(&proj * &grad3), &DMatrix::zeros(2 * n, n2), 1e-11);

    // Transport with a fixed velocity is skew-symmetric in the transported field.
    let vel_x = Field3::from_fn(nx, ny, nz, |i, j, k| ((i * 5 + j * 3 + k * 7) % 11) as f64 / 11.0 - 0.4);
    let vel_y = Field3::from_fn(nx, ny, nz, |i, j, k| ((i * 2 + j * 7 + k * 3) % 13) as f64 / 13.0 - 0.6);
    let gvx = Ghosted::fill(&vel_x, vx);
    let gvy = Ghosted::fill(&vel_y, vy);
    let gw = Ghosted::fill(&diagnose_w(&gvx, &gvy, &g), BcProfile::VERTICAL_VELOCITY);
    for (label, bc) in &profiles[..3] {
        let m = probe(n, n, |x| advect(&gvx, &gvy, &gw, &Ghosted::fill(&f3(&g, x), *bc), &g).into_vec());
        ck.compare(format!("advect skew-symmetric [{label}]"), &m, &(-m.transpose()), tol);
    }
    let tbc = BcProfile::temperature(alpha, g.dz);
    let m = probe(n, n, |x| advect(&gvx, &gvy, &gw, &Ghosted::fill(&f3(&g, x), tbc), &g).into_vec());
    ck.compare("advect skew-symmetric [temperature]", &m, &(-m.transpose()), tol);

    // Linearity spot check on a composite operator.
    let xa = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
    let xb = DVector::from_fn(n, |i, _| (i as f64 * 0.11).cos());
    let lin = |x: &DVector<f64>| {
        let b = baroclinic_pressure_grad(&f3(&g, x.as_slice()), &g);
        DVector::from_vec(concat(&b.x, &b.y))
    };
    let diff = (lin(&(&xa * 2.0 + &xb)) - (lin(&xa) * 2.0 + lin(&xb))).amax();
    ck.scalar("linearity (baroclinic_pressure_grad)", diff, tol, String::new());

    Ok(OracleReport { grid: (nx, ny, nz), checks: ck.checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_agrees_on_small_grids() {
        for (nx, ny, nz) in [(4, 4, 4), (5, 4, 6)] {
            let g = Grid::new(1.0, 1.2, 0.7, nx, ny, nz).unwrap();
            let rep = dense_oracle_check(&g).unwrap();
            assert!(rep.all_passed(), "{}", rep.to_table());
        }
    }

    #[test]
    fn oracle_detects_a_wrong_assembly() {
        let g = Grid::new(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        let mut ck = Checker { grid: g, checks: vec![] };
        let a = d1(4, 0.25, 1.0, 1.0);
        let mut b = a.clone();
        b[(0, 0)] += 1e-6;
        ck.compare("perturbed", &a, &b, 1e-12);
        assert!(!ck.checks[0].passed);
        assert!(ck.checks[0].detail.contains("(0, 0, 0)"));
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let g = Grid::new(1.0, 1.0, 1.0, 8, 4, 4).unwrap();
        assert!(dense_oracle_check(&g).is_err());
    }
}
