//! Norms, a-priori bound functions and inequality monitoring.
//!
//! First-derivative norms are sums over cell faces of squared face
//! differences, with boundary faces (whose outer value is a ghost) weighted
//! by one half. For the mirrored and anti-mirrored ghost rules this is exactly
//! the quadratic form of the five-point Laplacian, and for the Robin rule the
//! half-weighted top face plus the trace term reproduces it, so the discrete
//! energy budgets close with the same norms reported here.

use crate::error::{Error, Result};
use crate::fields::{apply_bcs_temperature, apply_bcs_velocity, Forcing, Params, State};
use crate::geometry::Grid;
use crate::operators::{
    d2dz2, ddz, depth_average, fluctuation, lap_h, BcProfile, Field2, Field3, Ghosted,
};
use crate::par;

/// Every norm used by the bound chain, at one instant. Volume norms are over
/// the box, barred quantities over the cross-section `M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormRecord {
    pub t: f64,
    pub v_sq: f64,
    pub grad_v_sq: f64,
    pub vz_sq: f64,
    pub grad_vz_sq: f64,
    pub vzz_sq: f64,
    pub temp_sq: f64,
    pub grad_temp_sq: f64,
    pub tz_sq: f64,
    pub grad_tz_sq: f64,
    /// `||T(z = 0)||^2` over `M`.
    pub temp_top_sq: f64,
    /// `||vtilde||_6^6`.
    pub vtilde_l6_6: f64,
    /// `||T||_6`.
    pub temp_l6: f64,
    pub vbar_sq: f64,
    pub grad_vbar_sq: f64,
    pub lap_vbar_sq: f64,
    pub vtilde_sq: f64,
    pub v_h1_sq: f64,
    pub temp_h1_sq: f64,
}

impl NormRecord {
    pub const FIELDS: [&'static str; 19] = [
        "t",
        "v_sq",
        "grad_v_sq",
        "vz_sq",
        "grad_vz_sq",
        "vzz_sq",
        "temp_sq",
        "grad_temp_sq",
        "tz_sq",
        "grad_tz_sq",
        "temp_top_sq",
        "vtilde_l6_6",
        "temp_l6",
        "vbar_sq",
        "grad_vbar_sq",
        "lap_vbar_sq",
        "vtilde_sq",
        "v_h1_sq",
        "temp_h1_sq",
    ];

    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.v_sq,
            self.grad_v_sq,
            self.vz_sq,
            self.grad_vz_sq,
            self.vzz_sq,
            self.temp_sq,
            self.grad_temp_sq,
            self.tz_sq,
            self.grad_tz_sq,
            self.temp_top_sq,
            self.vtilde_l6_6,
            self.temp_l6,
            self.vbar_sq,
            self.grad_vbar_sq,
            self.lap_vbar_sq,
            self.vtilde_sq,
            self.v_h1_sq,
            self.temp_h1_sq,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != Self::FIELDS.len() {
            return Err(Error::Format(format!("expected {} norm values, got {}", Self::FIELDS.len(), v.len())));
        }
        Ok(NormRecord {
            t: v[0],
            v_sq: v[1],
            grad_v_sq: v[2],
            vz_sq: v[3],
            grad_vz_sq: v[4],
            vzz_sq: v[5],
            temp_sq: v[6],
            grad_temp_sq: v[7],
            tz_sq: v[8],
            grad_tz_sq: v[9],
            temp_top_sq: v[10],
            vtilde_l6_6: v[11],
            temp_l6: v[12],
            vbar_sq: v[13],
            grad_vbar_sq: v[14],
            lap_vbar_sq: v[15],
            vtilde_sq: v[16],
            v_h1_sq: v[17],
            temp_h1_sq: v[18],
        })
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
    Z,
}

/// `sum over faces of (difference / spacing)^2 * cell volume`, boundary faces halved.
fn face_sq(g: &Ghosted, axis: Axis, grid: &Grid) -> f64 {
    let (nx, ny, nz) = g.shape();
    let (stride, n, d) = match axis {
        Axis::X => (1, nx, grid.dx),
        Axis::Y => (g.stride_y(), ny, grid.dy),
        Axis::Z => (g.stride_z(), nz, grid.dz),
    };
    let raw = g.raw();
    let s = par::sum_rows(ny * nz, |r| {
        let o = g.row_offset(r);
        let (j, k) = (r % ny, r / ny);
        let mut acc = 0.0;
        for i in 0..nx {
            let pos = match axis {
                Axis::X => i,
                Axis::Y => j,
                Axis::Z => k,
            };
            let p = o + i;
            // Face on the upper side of the cell.
            let up = raw[p + stride] - raw[p];
            acc += if pos + 1 == n { 0.5 * up * up } else { up * up };
            if pos == 0 {
                let lo = raw[p] - raw[p - stride];
                acc += 0.5 * lo * lo;
            }
        }
        acc
    });
    s * grid.cell_volume() / (d * d)
}

fn grad_sq(g: &Ghosted, grid: &Grid) -> f64 {
    face_sq(g, Axis::X, grid) + face_sq(g, Axis::Y, grid)
}

fn sum_sq(f: &Field3, grid: &Grid) -> f64 {
    f.data().iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()
}

/// `sum over columns of ((T_top + ghost) / 2)^2 dA`.
fn top_trace_sq(g: &Ghosted, grid: &Grid) -> f64 {
    let (nx, ny, nz) = g.shape();
    let mut acc = 0.0;
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let tr = 0.5 * (g.get(i, j, nz as isize - 1) + g.get(i, j, nz as isize));
            acc += tr * tr;
        }
    }
    acc * grid.cell_area()
}

/// Values of the temperature on the surface, `(T_top + ghost) / 2`.
pub fn surface_trace(state: &State, params: &Params, grid: &Grid) -> Field2 {
    let g = apply_bcs_temperature(state, params, grid);
    let nz = grid.nz as isize;
    Field2::from_fn(grid.nx, grid.ny, |i, j| 0.5 * (g.get(i as isize, j as isize, nz - 1) + g.get(i as isize, j as isize, nz)))
}

pub fn compute_norms(state: &State, grid: &Grid, params: &Params) -> NormRecord {
    let (gx, gy) = apply_bcs_velocity(state);
    let gt = apply_bcs_temperature(state, params, grid);
    let layer = grid.with_layers(1);

    let v_sq = sum_sq(&state.v.x, grid) + sum_sq(&state.v.y, grid);
    let grad_v_sq = grad_sq(&gx, grid) + grad_sq(&gy, grid);
    let vz_sq = face_sq(&gx, Axis::Z, grid) + face_sq(&gy, Axis::Z, grid);
    let vz1 = ddz(&gx, grid);
    let vz2 = ddz(&gy, grid);
    let grad_vz_sq = grad_sq(&Ghosted::fill(&vz1, BcProfile::VELOCITY_X), grid)
        + grad_sq(&Ghosted::fill(&vz2, BcProfile::VELOCITY_Y), grid);
    let vzz_sq = sum_sq(&d2dz2(&gx, grid), grid) + sum_sq(&d2dz2(&gy, grid), grid);

    let temp_sq = sum_sq(&state.temperature, grid);
    let grad_temp_sq = grad_sq(&gt, grid);
    let tz_sq = face_sq(&gt, Axis::Z, grid);
    let grad_tz_sq = grad_sq(&Ghosted::fill(&ddz(&gt, grid), BcProfile::NEUMANN), grid);
    let temp_top_sq = top_trace_sq(&gt, grid);
    let temp_l6 = (state.temperature.data().iter().map(|x| x.powi(6)).sum::<f64>() * grid.cell_volume()).powf(1.0 / 6.0);

    let vt1 = fluctuation(&state.v.x, grid);
    let vt2 = fluctuation(&state.v.y, grid);
    let vtilde_l6_6 = vt1
        .data()
        .iter()
        .zip(vt2.data())
        .map(|(a, b)| (a * a + b * b).powi(3))
        .sum::<f64>()
        * grid.cell_volume();
    let vtilde_sq = sum_sq(&vt1, grid) + sum_sq(&vt2, grid);

    let vb1 = depth_average(&state.v.x, grid);
    let vb2 = depth_average(&state.v.y, grid);
    let area = grid.cell_area();
    let vbar_sq = vb1.data().iter().chain(vb2.data()).map(|x| x * x).sum::<f64>() * area;
    let gb1 = Ghosted::fill_layer(&vb1, BcProfile::VELOCITY_X);
    let gb2 = Ghosted::fill_layer(&vb2, BcProfile::VELOCITY_Y);
    // Layer-grid cells have volume dA h.
    let grad_vbar_sq = (grad_sq(&gb1, &layer) + grad_sq(&gb2, &layer)) / grid.h;
    let lap_vbar_sq = (sum_sq(&lap_h(&gb1, &layer), &layer) + sum_sq(&lap_h(&gb2, &layer), &layer)) / grid.h;

    NormRecord {
        t: state.time,
        v_sq,
        grad_v_sq,
        vz_sq,
        grad_vz_sq,
        vzz_sq,
        temp_sq,
        grad_temp_sq,
        tz_sq,
        grad_tz_sq,
        temp_top_sq,
        vtilde_l6_6,
        temp_l6,
        vbar_sq,
        grad_vbar_sq,
        lap_vbar_sq,
        vtilde_sq,
        v_h1_sq: v_sq + grad_v_sq + vz_sq,
        temp_h1_sq: temp_sq + grad_temp_sq + tz_sq,
    }
}

/// Norms of the (static) heat source.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForcingNorms {
    pub q_sq: f64,
    pub q_h1_sq: f64,
}

impl ForcingNorms {
    pub fn compute(forcing: &Forcing, grid: &Grid) -> Self {
        let g = Ghosted::fill(&forcing.q, BcProfile::NEUMANN);
        let q_sq = sum_sq(&forcing.q, grid);
        ForcingNorms { q_sq, q_h1_sq: q_sq + grad_sq(&g, grid) + face_sq(&g, Axis::Z, grid) }
    }

    pub fn q_h1(&self) -> f64 {
        self.q_h1_sq.sqrt()
    }
}

/// Multipliers standing in for the generic constants of the qualitative bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub k6: f64,
    pub k2: f64,
    pub kz: f64,
    pub kv: f64,
    pub kt: f64,
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa { k6: 1.0, k2: 1.0, kz: 1.0, kv: 1.0, kt: 1.0 }
    }
}

impl Kappa {
    pub fn as_array(&self) -> [f64; 5] {
        [self.k6, self.k2, self.kz, self.kv, self.kt]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Kappa { k6: a[0], k2: a[1], kz: a[2], kv: a[3], kt: a[4] }
    }
}

/// Names of the five qualitative bounds, in [`Kappa::as_array`] order.
pub const QUALITATIVE: [&str; 5] = ["vtilde_l6_k6", "grad_vbar_k2", "vz_kz", "grad_v_kv", "temp_h1_kt"];

/// Exponents above this are reported as an infinite bound.
pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

/// The bound functions at time `t`. Values that overflow, or whose exponent
/// exceeds the cap, are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCertificate {
    pub t: f64,
    pub k1: f64,
    pub k6: f64,
    pub k2: f64,
    pub kz: f64,
    pub kv: f64,
    pub kt: f64,
    pub c_m: f64,
    pub kappa: Kappa,
    /// Natural logarithms of `k1 .. kt` (may be finite where the values overflow).
    pub ln: [f64; 6],
}

impl BoundCertificate {
    /// `[K6, K2, Kz, KV, Kt]`, matching [`QUALITATIVE`].
    pub fn qualitative(&self) -> [f64; 5] {
        [self.k6, self.k2, self.kz, self.kv, self.kt]
    }
}

/// `ln(e^a + e^b)` without overflow.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `x = e^{ln_x}` raised to `p`, as an exponent contribution `x^p t` (0 when `t = 0`).
fn pow_times(ln_x: f64, p: f64, t: f64) -> f64 {
    if t == 0.0 || ln_x == f64::NEG_INFINITY {
        return 0.0;
    }
    (p * ln_x + t.ln()).exp()
}

/// `ln(e^exponent * prefactor)`; a zero prefactor gives a zero bound even when the exponent is capped.
fn scaled(exponent: f64, ln_prefactor: f64) -> f64 {
    if ln_prefactor == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        exponent + ln_prefactor
    }
}

fn capped(exponent: f64, cap: f64) -> f64 {
    if exponent > cap || exponent.is_nan() {
        f64::INFINITY
    } else {
        exponent
    }
}

/// Evaluates the bound chain for data `init` (the `t = 0` norms).
#[allow(clippy::too_many_arguments)]
pub fn bound_certificate(
    t: f64,
    init: &NormRecord,
    q: &ForcingNorms,
    params: &Params,
    grid: &Grid,
    c_m: f64,
    kappa: Kappa,
    exponent_cap: f64,
) -> Result<BoundCertificate> {
    let inputs = [
        ("t", t),
        ("C_M", c_m),
        ("||Q||^2", q.q_sq),
        ("||vbar0||^2", init.vbar_sq),
        ("||vtilde0||^2", init.vtilde_sq),
        ("||T0||^2", init.temp_sq),
        ("||v0||_H1^2", init.v_h1_sq),
        ("||T0||_H1^2", init.temp_h1_sq),
    ];
    for (name, v) in inputs {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    if params.alpha.is_nan() || params.alpha <= 0.0 {
        return Err(Error::Domain(format!("alpha must be positive, got {}", params.alpha)));
    }
    let h = grid.h;
    let a = h * h * params.rt2 + h / params.alpha;
    let t_stat = init.temp_sq + (2.0 * a).powi(2) * q.q_sq;
    let k1 = 2.0 * a * q.q_sq * t
        + (h * init.vbar_sq + init.vtilde_sq)
        + (1.0 + c_m * h * h * params.re1 * params.re1 + h * h * params.re1 * t) * t_stat;
    let l1 = k1.ln();
    let v2 = init.v_h1_sq;

    let e6 = capped(k1 * k1, exponent_cap);
    let l6 = scaled(e6, ln_add(3.0 * v2.ln(), 2.0 * l1));
    let l2 = scaled(e6, ln_add(ln_add(v2.ln(), l1), l6));
    let ez = capped(pow_times(l2, 2.0, t) + pow_times(l6, 2.0 / 3.0, t), exponent_cap);
    let base = ln_add(v2.ln(), l1);
    let lz = scaled(ez, base);
    let kz_term = if l1 == f64::NEG_INFINITY || lz == f64::NEG_INFINITY { 0.0 } else { (l1 + lz).exp() };
    let ev = capped(pow_times(l6, 2.0 / 3.0, t) + kz_term, exponent_cap);
    let lv = scaled(ev, base);
    let kv_sq = if lv == f64::NEG_INFINITY { 0.0 } else { (2.0 * lv).exp() };
    let et = capped(pow_times(l6, 2.0, t) + kv_sq, exponent_cap);
    let lt = scaled(et, (init.temp_h1_sq + q.q_sq).ln());

    let ln = [l1, l6, l2, lz, lv, lt];
    let val = |l: f64| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() };
    Ok(BoundCertificate {
        t,
        k1,
        k6: val(l6),
        k2: val(l2),
        kz: val(lz),
        kv: val(lv),
        kt: val(lt),
        c_m,
        kappa,
        ln,
    })
}

/// The measured quantities matching [`QUALITATIVE`].
pub fn qualitative_norms(n: &NormRecord) -> [f64; 5] {
    [n.vtilde_l6_6, n.grad_vbar_sq, n.vz_sq, n.grad_v_sq, n.temp_h1_sq]
}

/// Smallest multipliers for which every `(norms, certificate)` pair satisfies
/// the qualitative bounds; bounds that are infinite or zero are skipped.
pub fn calibrate_kappa(samples: &[(NormRecord, BoundCertificate)]) -> Kappa {
    let mut k = [0.0f64; 5];
    for (n, c) in samples {
        let m = qualitative_norms(n);
        for (b, (&x, &bound)) in m.iter().zip(c.qualitative().iter()).enumerate() {
            if bound.is_finite() && bound > 0.0 {
                k[b] = k[b].max(x / bound);
            }
        }
    }
    Kappa::from_array(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    /// Multiplicative slack on quantitative right-hand sides.
    pub slack: f64,
    /// Additive allowance, as a multiple of `(dx^2 + dz^2) * max(lhs, rhs)`.
    pub truncation: f64,
    pub kappa: Kappa,
    pub exponent_cap: f64,
    pub min_rows: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions { slack: 1.05, truncation: 1.0, kappa: Kappa::default(), exponent_cap: DEFAULT_EXPONENT_CAP, min_rows: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: &'static str,
    pub quantitative: bool,
    pub passed: bool,
    /// Minimum over checks of `allowed - lhs`, where `allowed` includes slack.
    pub worst_margin: f64,
    /// Maximum over checks of `lhs / rhs` (0 when every right-hand side is 0 and lhs <= 0).
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub checks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub inequalities: Vec<InequalityReport>,
}

impl MonitorReport {
    pub fn all_passed(&self) -> bool {
        self.inequalities.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityReport> {
        self.inequalities.iter().find(|r| r.name == name)
    }

    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<15} {:<12} {:<6} {:>14} {:>14} {:>12} {:>7}\n",
            "name", "kind", "status", "worst_margin", "worst_ratio", "at_t", "checks"
        );
        for r in &self.inequalities {
            s.push_str(&format!(
                "{:<15} {:<12} {:<6} {:>14.6e} {:>14.6e} {:>12.6} {:>7}\n",
                r.name,
                if r.quantitative { "quantitative" } else { "qualitative" },
                if r.passed { "pass" } else { "FAIL" },
                r.worst_margin,
                r.worst_ratio,
                r.worst_time,
                r.checks
            ));
        }
        s
    }

    /// Machine-readable CSV rows (with header).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,kind,passed,worst_margin,worst_ratio,worst_time,checks\n");
        for r in &self.inequalities {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.name,
                if r.quantitative { "quantitative" } else { "qualitative" },
                r.passed,
                r.worst_margin,
                r.worst_ratio,
                r.worst_time,
                r.checks
            ));
        }
        s
    }
}

struct Tracker {
    report: InequalityReport,
}

impl Tracker {
    fn new(name: &'static str, quantitative: bool) -> Self {
        Tracker {
            report: InequalityReport {
                name,
                quantitative,
                passed: true,
                worst_margin: f64::INFINITY,
                worst_ratio: 0.0,
                worst_time: 0.0,
                checks: 0,
            },
        }
    }

    fn check(&mut self, t: f64, lhs: f64, rhs: f64, allowed: f64) {
        let r = &mut self.report;
        r.checks += 1;
        let margin = allowed - lhs;
        let ok = lhs <= allowed || (lhs.is_finite() && allowed == f64::INFINITY);
        if margin < r.worst_margin || (!ok && r.passed) {
            r.worst_margin = margin;
            r.worst_time = t;
        }
        if rhs > 0.0 {
            r.worst_ratio = r.worst_ratio.max(lhs / rhs);
        } else if lhs > 0.0 {
            r.worst_ratio = f64::INFINITY;
        }
        if !ok {
            r.passed = false;
        }
    }
}

fn trapezoid(rows: &[NormRecord], f: impl Fn(&NormRecord) -> f64) -> Vec<f64> {
    let mut acc = vec![0.0; rows.len()];
    for n in 1..rows.len() {
        acc[n] = acc[n - 1] + 0.5 * (rows[n].t - rows[n - 1].t) * (f(&rows[n]) + f(&rows[n - 1]));
    }
    acc
}

/// Checks the explicit-constant inequalities and the kappa-scaled bounds
/// along a time-ordered ledger whose first row holds the initial data.
pub fn check_inequalities(
    rows: &[NormRecord],
    q: &ForcingNorms,
    params: &Params,
    grid: &Grid,
    c_m: f64,
    opts: &MonitorOptions,
) -> Result<MonitorReport> {
    if rows.len() < opts.min_rows {
        return Err(Error::InsufficientData(format!(
            "{} ledger rows, at least {} needed",
            rows.len(),
            opts.min_rows
        )));
    }
    if rows.windows(2).any(|w| w[1].t.is_nan() || w[0].t.is_nan() || w[1].t < w[0].t) {
        return Err(Error::InsufficientData("ledger rows are not time-ordered".into()));
    }
    let h = grid.h;
    let a = h * h * params.rt2 + h / params.alpha;
    let trunc = opts.truncation * (grid.dx * grid.dx + grid.dz * grid.dz);
    let allowed = |lhs: f64, rhs: f64| opts.slack * rhs + trunc * lhs.abs().max(rhs.abs());
    let init = rows[0];
    let t0 = init.t;

    let mut p2 = Tracker::new("poincare_trace", true);
    let mut t2 = Tracker::new("temp_decay", true);
    let mut te = Tracker::new("temp_budget", true);
    let mut vee = Tracker::new("kinetic_budget", true);
    let mut k1c = Tracker::new("energy_k1", true);
    let mut kt6 = Tracker::new("temp_l6", true);
    let mut qual: Vec<Tracker> = QUALITATIVE.iter().map(|n| Tracker::new(n, false)).collect();

    let t_diss = |n: &NormRecord| n.grad_temp_sq / params.rt1 + n.tz_sq / params.rt2 + params.alpha * n.temp_top_sq;
    let v_diss = |n: &NormRecord| n.grad_v_sq / params.re1 + n.vz_sq / params.re2;
    let int_t = trapezoid(rows, t_diss);
    let int_v = trapezoid(rows, v_diss);
    let int_te = trapezoid(rows, |n| 2.0 / params.rt1 * n.grad_temp_sq + n.tz_sq / params.rt2 + params.alpha * n.temp_top_sq);
    let int_vee = trapezoid(rows, |n| 2.0 * v_diss(n));
    let int_bc = trapezoid(rows, |n| 2.0 * h * (n.temp_sq * n.grad_v_sq).sqrt());

    for (n, row) in rows.iter().enumerate() {
        let tr = row.t - t0;
        let rhs = 2.0 * h * h * row.tz_sq + 2.0 * h * row.temp_top_sq;
        p2.check(row.t, row.temp_sq, rhs, allowed(row.temp_sq, rhs));

        let rhs = (-tr / (2.0 * a)).exp() * init.temp_sq + (2.0 * a).powi(2) * q.q_sq;
        t2.check(row.t, row.temp_sq, rhs, allowed(row.temp_sq, rhs));

        if n > 0 {
            let prev = &rows[n - 1];
            let lhs = row.temp_sq - prev.temp_sq + (int_te[n] - int_te[n - 1]);
            let rhs = 2.0 * a * q.q_sq * (row.t - prev.t);
            te.check(row.t, lhs, rhs, allowed(lhs, rhs));
        }

        let lhs = row.v_sq - init.v_sq + int_vee[n];
        let rhs = int_bc[n];
        vee.check(row.t, lhs, rhs, allowed(lhs, rhs));

        let cert = bound_certificate(tr, &init, q, params, grid, c_m, opts.kappa, opts.exponent_cap)?;
        let lhs = row.v_sq + int_v[n] + row.temp_sq + int_t[n];
        k1c.check(row.t, lhs, cert.k1, allowed(lhs, cert.k1));

        let rhs = q.q_h1() * tr + init.temp_h1_sq.sqrt();
        kt6.check(row.t, row.temp_l6, rhs, allowed(row.temp_l6, rhs));

        let m = qualitative_norms(row);
        let kap = opts.kappa.as_array();
        for (b, tracker) in qual.iter_mut().enumerate() {
            let bound = kap[b] * cert.qualitative()[b];
            tracker.check(row.t, m[b], bound, bound);
        }
    }
    let mut inequalities: Vec<InequalityReport> = [p2, t2, te, vee, k1c, kt6].into_iter().map(|t| t.report).collect();
    inequalities.extend(qual.into_iter().map(|t| t.report));
    Ok(MonitorReport { inequalities })
}

/// Bound certificates for every row of a ledger, relative to its first row.
pub fn certificate_series(
    rows: &[NormRecord],
    q: &ForcingNorms,
    params: &Params,
    grid: &Grid,
    c_m: f64,
    kappa: Kappa,
    exponent_cap: f64,
) -> Result<Vec<BoundCertificate>> {
    let Some(init) = rows.first() else {
        return Err(Error::InsufficientData("empty ledger".into()));
    };
    rows.iter()
        .map(|r| bound_certificate(r.t - init.t, init, q, params, grid, c_m, kappa, exponent_cap))
        .collect()
}
