//! Right-hand sides of the momentum and temperature equations.
//!
//! Transport uses the skew-symmetric form
//! `1/2 [v . grad phi + w phi_z] + 1/2 [div(v phi) + (w phi)_z]`, with the
//! ghost of a product equal to the product of ghosts. Because the normal
//! velocity is odd across every face, `<advect(v, w, phi), phi> = 0` holds for
//! the discrete sums exactly (up to rounding), for any `v` and `w`.

use crate::fields::{apply_bcs_temperature, apply_bcs_velocity, Forcing, Params, State};
use crate::geometry::Grid;
use crate::operators::{
    broadcast, ddx, ddy, ddz, depth_average, diagnose_w, diffuse, fluctuation, grad_h, inner, inner2,
    lap_h, vertical_cumint, BcProfile, Field2, Field3, Ghosted, VecField3,
};
use crate::par;

/// Time derivatives of the prognostic fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub dv: VecField3,
    pub dt: Field3,
}

impl Tendency {
    pub fn is_finite(&self) -> bool {
        self.dv.x.is_finite() && self.dv.y.is_finite() && self.dt.is_finite()
    }
}

/// Ghost-filled prognostic fields plus the diagnosed vertical velocity.
#[derive(Debug, Clone)]
pub struct Diagnosed {
    pub vx: Ghosted,
    pub vy: Ghosted,
    pub t: Ghosted,
    pub w: Ghosted,
}

impl Diagnosed {
    pub fn new(state: &State, params: &Params, grid: &Grid) -> Self {
        let (vx, vy) = apply_bcs_velocity(state);
        let w = Ghosted::fill(&diagnose_w(&vx, &vy, grid), BcProfile::VERTICAL_VELOCITY);
        let t = apply_bcs_temperature(state, params, grid);
        Diagnosed { vx, vy, t, w }
    }
}

/// Skew-symmetric transport of `phi` by `(vx, vy, w)`.
pub fn advect(vx: &Ghosted, vy: &Ghosted, w: &Ghosted, phi: &Ghosted, grid: &Grid) -> Field3 {
    let (nx, ny, nz) = phi.shape();
    assert!(vx.shape() == phi.shape() && vy.shape() == phi.shape() && w.shape() == phi.shape());
    let cx = 0.25 / grid.dx;
    let cy = 0.25 / grid.dy;
    let cz = 0.25 / grid.dz;
    let (sy, sz) = (phi.stride_y(), phi.stride_z());
    let (a, b, c, f) = (vx.raw(), vy.raw(), w.raw(), phi.raw());
    let mut out = Field3::zeros(nx, ny, nz);
    par::for_each_row(out.data_mut(), nx, |r, row| {
        let o = phi.row_offset(r);
        for (i, v) in row.iter_mut().enumerate() {
            let p = o + i;
            let x = a[p] * (f[p + 1] - f[p - 1]) + (a[p + 1] * f[p + 1] - a[p - 1] * f[p - 1]);
            let y = b[p] * (f[p + sy] - f[p - sy]) + (b[p + sy] * f[p + sy] - b[p - sy] * f[p - sy]);
            let z = c[p] * (f[p + sz] - f[p - sz]) + (c[p + sz] * f[p + sz] - c[p - sz] * f[p - sz]);
            *v = x * cx + y * cy + z * cz;
        }
    });
    out
}

/// `f(y) k x v = f (-v2, v1)` with `f = f0 (beta + y)`.
pub fn coriolis(v: &VecField3, f0: f64, beta: f64, grid: &Grid) -> VecField3 {
    let (nx, ny, nz) = v.x.shape();
    let fy = |j: usize| f0 * (beta + grid.y(j));
    VecField3 {
        x: Field3::from_fn(nx, ny, nz, |i, j, k| -fy(j) * v.y.at(i, j, k)),
        y: Field3::from_fn(nx, ny, nz, |i, j, k| fy(j) * v.x.at(i, j, k)),
    }
}

/// `-grad_h int_{-h}^{z} T`, the hydrostatic pressure gradient caused by `T`.
pub fn baroclinic_pressure_grad(t: &Field3, grid: &Grid) -> VecField3 {
    let mut g = grad_h(&Ghosted::fill(&vertical_cumint(t, grid), BcProfile::NEUMANN), grid);
    g.x.scale(-1.0);
    g.y.scale(-1.0);
    g
}

/// `grad_h p_s` broadcast over depth.
pub fn surface_pressure_grad(p_s: &Field2, nz: usize, grid: &Grid) -> VecField3 {
    let g = grad_h(&Ghosted::fill_layer(p_s, BcProfile::NEUMANN), &grid.with_layers(1));
    VecField3 {
        x: broadcast(&Field2::from_layer(g.x), nz),
        y: broadcast(&Field2::from_layer(g.y), nz),
    }
}

/// The five contributions to the velocity tendency, each with the sign it
/// carries on the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTerms {
    pub advection: VecField3,
    pub surface_pressure: VecField3,
    pub baroclinic: VecField3,
    pub coriolis: VecField3,
    pub viscous: VecField3,
}

impl VelocityTerms {
    pub fn total(&self) -> VecField3 {
        let mut t = self.advection.clone();
        for term in [&self.surface_pressure, &self.baroclinic, &self.coriolis, &self.viscous] {
            t.axpy(1.0, term);
        }
        t
    }
}

fn negate(mut v: VecField3) -> VecField3 {
    v.x.scale(-1.0);
    v.y.scale(-1.0);
    v
}

pub fn velocity_terms(d: &Diagnosed, state: &State, params: &Params, p_s: &Field2, grid: &Grid) -> VelocityTerms {
    let advection = VecField3 {
        x: advect(&d.vx, &d.vy, &d.w, &d.vx, grid).map(|a| -a),
        y: advect(&d.vx, &d.vy, &d.w, &d.vy, grid).map(|a| -a),
    };
    let viscous = VecField3 {
        x: diffuse(&d.vx, 1.0 / params.re1, 1.0 / params.re2, grid),
        y: diffuse(&d.vy, 1.0 / params.re1, 1.0 / params.re2, grid),
    };
    VelocityTerms {
        advection,
        surface_pressure: negate(surface_pressure_grad(p_s, grid.nz, grid)),
        baroclinic: negate(baroclinic_pressure_grad(&state.temperature, grid)),
        coriolis: negate(coriolis(&state.v, params.f0, params.beta, grid)),
        viscous,
    }
}

/// `-advect(v, w, v) - grad p_s + grad int T - f k x v - L1 v`.
pub fn rhs_velocity(state: &State, params: &Params, p_s: &Field2, grid: &Grid) -> VecField3 {
    velocity_terms(&Diagnosed::new(state, params, grid), state, params, p_s, grid).total()
}

/// The contributions to the temperature tendency.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureTerms {
    pub source: Field3,
    pub advection: Field3,
    pub diffusion: Field3,
}

impl TemperatureTerms {
    pub fn total(&self) -> Field3 {
        let mut t = self.source.clone();
        t.axpy(1.0, &self.advection);
        t.axpy(1.0, &self.diffusion);
        t
    }
}

pub fn temperature_terms(d: &Diagnosed, params: &Params, forcing: &Forcing, grid: &Grid) -> TemperatureTerms {
    TemperatureTerms {
        source: forcing.q.clone(),
        advection: advect(&d.vx, &d.vy, &d.w, &d.t, grid).map(|a| -a),
        diffusion: diffuse(&d.t, 1.0 / params.rt1, 1.0 / params.rt2, grid),
    }
}

/// `Q - advect(v, w, T) - L2 T`.
pub fn rhs_temperature(state: &State, params: &Params, forcing: &Forcing, grid: &Grid) -> Field3 {
    temperature_terms(&Diagnosed::new(state, params, grid), params, forcing, grid).total()
}

/// Full tendency for a given surface pressure.
pub fn tendency(d: &Diagnosed, state: &State, params: &Params, forcing: &Forcing, p_s: &Field2, grid: &Grid) -> Tendency {
    let mut dv = VecField3 {
        x: diffuse(&d.vx, 1.0 / params.re1, 1.0 / params.re2, grid),
        y: diffuse(&d.vy, 1.0 / params.re1, 1.0 / params.re2, grid),
    };
    dv.x.axpy(-1.0, &advect(&d.vx, &d.vy, &d.w, &d.vx, grid));
    dv.y.axpy(-1.0, &advect(&d.vx, &d.vy, &d.w, &d.vy, grid));
    dv.axpy(-1.0, &baroclinic_pressure_grad(&state.temperature, grid));
    dv.axpy(-1.0, &coriolis(&state.v, params.f0, params.beta, grid));
    if p_s.max_abs() > 0.0 {
        dv.axpy(-1.0, &surface_pressure_grad(p_s, grid.nz, grid));
    }
    let mut dt = diffuse(&d.t, 1.0 / params.rt1, 1.0 / params.rt2, grid);
    dt.axpy(-1.0, &advect(&d.vx, &d.vy, &d.w, &d.t, grid));
    dt.axpy(1.0, &forcing.q);
    Tendency { dv, dt }
}

/// Norms of the barotropic and baroclinic split residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResiduals {
    /// `|| depth_average(rhs) - barotropic rhs ||` over `M`, scaled by `sqrt(h)`.
    pub barotropic: f64,
    /// `|| fluctuation(rhs) - baroclinic rhs ||` over the box.
    pub baroclinic: f64,
    /// `||rhs||` plus the norms of its individual terms; sets the rounding scale.
    pub scale: f64,
}

/// Pieces of the skew transport built from the generic operators, kept
/// separate so the depth average can be taken term by term.
struct Transport {
    /// `1/2 (a . grad b)`.
    horizontal_advective: VecField3,
    /// `1/2 w(a) b_z`.
    vertical_advective: VecField3,
    /// `1/2 div(a b)` with `a b` a tensor product.
    horizontal_flux: VecField3,
    /// `1/2 (w(a) b)_z`.
    vertical_flux: VecField3,
}

impl Transport {
    fn total(&self) -> VecField3 {
        let mut t = self.horizontal_advective.clone();
        t.axpy(1.0, &self.vertical_advective);
        t.axpy(1.0, &self.horizontal_flux);
        t.axpy(1.0, &self.vertical_flux);
        t
    }
}

fn half_sum(a: Field3, b: Field3) -> Field3 {
    a.zip_map(&b, |x, y| 0.5 * (x + y))
}

fn transport(a: &VecField3, b: &VecField3, grid: &Grid) -> Transport {
    let ax = Ghosted::fill(&a.x, BcProfile::VELOCITY_X);
    let ay = Ghosted::fill(&a.y, BcProfile::VELOCITY_Y);
    let w = Ghosted::fill(&diagnose_w(&ax, &ay, grid), BcProfile::VERTICAL_VELOCITY);
    let comps = [
        Ghosted::fill(&b.x, BcProfile::VELOCITY_X),
        Ghosted::fill(&b.y, BcProfile::VELOCITY_Y),
    ];
    let wi = w.interior();
    let mut parts: Vec<[Field3; 4]> = Vec::new();
    for bc in &comps {
        let ha = half_sum(
            a.x.zip_map(&ddx(bc, grid), |u, d| u * d),
            a.y.zip_map(&ddy(bc, grid), |u, d| u * d),
        );
        let va = wi.zip_map(&ddz(bc, grid), |u, d| 0.5 * u * d);
        let hf = half_sum(ddx(&ax.product(bc), grid), ddy(&ay.product(bc), grid));
        let vf = ddz(&w.product(bc), grid).map(|x| 0.5 * x);
        parts.push([ha, va, hf, vf]);
    }
    let [hx, vax, hfx, vfx] = parts.remove(0);
    let [hy, vay, hfy, vfy] = parts.remove(0);
    Transport {
        horizontal_advective: VecField3 { x: hx, y: hy },
        vertical_advective: VecField3 { x: vax, y: vay },
        horizontal_flux: VecField3 { x: hfx, y: hfy },
        vertical_flux: VecField3 { x: vfx, y: vfy },
    }
}

fn avg_vec(v: &VecField3, grid: &Grid) -> (Field2, Field2) {
    (depth_average(&v.x, grid), depth_average(&v.y, grid))
}

fn fluct_vec(v: &VecField3, grid: &Grid) -> VecField3 {
    VecField3 { x: fluctuation(&v.x, grid), y: fluctuation(&v.y, grid) }
}

fn bcast_vec(x: &Field2, y: &Field2, nz: usize) -> VecField3 {
    VecField3 { x: broadcast(x, nz), y: broadcast(y, nz) }
}

fn norm_vec(v: &VecField3, grid: &Grid) -> f64 {
    (inner(&v.x, &v.x, grid) + inner(&v.y, &v.y, grid)).sqrt()
}

/// Compares the depth average and the fluctuation of the full velocity
/// tendency with the barotropic and baroclinic right-hand sides assembled
/// directly from `vbar` and `vtilde`.
pub fn split_residual_check(state: &State, params: &Params, p_s: &Field2, grid: &Grid) -> SplitResiduals {
    let nz = grid.nz;
    let layer = grid.with_layers(1);
    let terms = velocity_terms(&Diagnosed::new(state, params, grid), state, params, p_s, grid);
    let full = terms.total();

    let (vbx, vby) = avg_vec(&state.v, grid);
    let vbar = bcast_vec(&vbx, &vby, nz);
    let vt = fluct_vec(&state.v, grid);
    let vbar2 = VecField3 { x: vbx.as_layer(), y: vby.as_layer() };

    // Barotropic transport: 2D skew transport of vbar plus the depth-averaged
    // self-interaction of vtilde and the vbar-driven vertical transport of vtilde.
    let tt = transport(&vt, &vt, grid);
    let tbt = transport(&vbar, &vt, grid);
    let bar2 = transport(&vbar2, &vbar2, &layer);
    let mut self_adv = tt.horizontal_advective.clone();
    self_adv.axpy(1.0, &tt.vertical_advective);
    let (sax, say) = avg_vec(&self_adv, grid);
    let (vvx, vvy) = avg_vec(&tbt.vertical_advective, grid);
    // div of the depth-averaged tensor vtilde (x) vtilde, on the single layer.
    let flux = {
        let gx = Ghosted::fill(&vt.x, BcProfile::VELOCITY_X);
        let gy = Ghosted::fill(&vt.y, BcProfile::VELOCITY_Y);
        let pair = |a: &Ghosted, b: &Ghosted| {
            let p = a.product(b);
            let bc = p.bc();
            Ghosted::fill_layer(&depth_average(&p.interior(), grid), bc)
        };
        let (xx, xy, yy) = (pair(&gx, &gx), pair(&gx, &gy), pair(&gy, &gy));
        let fx = half_sum(ddx(&xx, &layer), ddy(&xy, &layer));
        let fy = half_sum(ddx(&xy, &layer), ddy(&yy, &layer));
        (fx, fy)
    };
    let nbar_x = bar2.total().x.zip_map(&flux.0, |a, b| a + b);
    let nbar_y = bar2.total().y.zip_map(&flux.1, |a, b| a + b);
    let nbar_x = Field2::from_layer(nbar_x).data().iter().zip(sax.data()).zip(vvx.data()).map(|((a, b), c)| a + b + c).collect::<Vec<_>>();
    let nbar_y = Field2::from_layer(nbar_y).data().iter().zip(say.data()).zip(vvy.data()).map(|((a, b), c)| a + b + c).collect::<Vec<_>>();
    let nbar_x = Field2::from_vec(grid.nx, grid.ny, nbar_x);
    let nbar_y = Field2::from_vec(grid.nx, grid.ny, nbar_y);

    // Remaining barotropic terms.
    let gbx = Ghosted::fill_layer(&vbx, BcProfile::VELOCITY_X);
    let gby = Ghosted::fill_layer(&vby, BcProfile::VELOCITY_Y);
    let visc_x = lap_h(&gbx, &layer).map(|x| x / params.re1);
    let visc_y = lap_h(&gby, &layer).map(|x| x / params.re1);
    let cor = coriolis(&vbar2, params.f0, params.beta, &layer);
    let gp = grad_h(&Ghosted::fill_layer(p_s, BcProfile::NEUMANN), &layer);
    let avg_int_t = depth_average(&vertical_cumint(&state.temperature, grid), grid);
    let gt = grad_h(&Ghosted::fill_layer(&avg_int_t, BcProfile::NEUMANN), &layer);
    let assemble = |visc: &Field3, nb: &Field2, c: &Field3, p: &Field3, t: &Field3| {
        let v: Vec<f64> = (0..grid.columns())
            .map(|n| visc.data()[n] - nb.data()[n] - c.data()[n] - p.data()[n] + t.data()[n])
            .collect();
        Field2::from_vec(grid.nx, grid.ny, v)
    };
    let bar_rhs_x = assemble(&visc_x, &nbar_x, &cor.x, &gp.x, &gt.x);
    let bar_rhs_y = assemble(&visc_y, &nbar_y, &cor.y, &gp.y, &gt.y);
    let (fbx, fby) = avg_vec(&full, grid);
    let rbx = Field2::from_vec(grid.nx, grid.ny, fbx.data().iter().zip(bar_rhs_x.data()).map(|(a, b)| a - b).collect());
    let rby = Field2::from_vec(grid.nx, grid.ny, fby.data().iter().zip(bar_rhs_y.data()).map(|(a, b)| a - b).collect());
    let barotropic = (grid.h * (inner2(&rbx, &rbx, grid) + inner2(&rby, &rby, grid))).sqrt();

    // Baroclinic right-hand side: no surface pressure.
    let mut adv = tt.total();
    adv.axpy(1.0, &transport(&vt, &vbar, grid).total());
    adv.axpy(1.0, &tbt.total());
    adv.axpy(1.0, &transport(&vbar, &vbar, grid).total());
    adv.axpy(-1.0, &bcast_vec(&nbar_x, &nbar_y, nz));
    let gvx = Ghosted::fill(&vt.x, BcProfile::VELOCITY_X);
    let gvy = Ghosted::fill(&vt.y, BcProfile::VELOCITY_Y);
    let mut til = VecField3 {
        x: diffuse(&gvx, 1.0 / params.re1, 1.0 / params.re2, grid),
        y: diffuse(&gvy, 1.0 / params.re1, 1.0 / params.re2, grid),
    };
    til.axpy(-1.0, &adv);
    til.axpy(-1.0, &coriolis(&vt, params.f0, params.beta, grid));
    let dev = fluctuation(&vertical_cumint(&state.temperature, grid), grid);
    til.axpy(1.0, &grad_h(&Ghosted::fill(&dev, BcProfile::NEUMANN), grid));
    let mut rt = fluct_vec(&full, grid);
    rt.axpy(-1.0, &til);
    let baroclinic = norm_vec(&rt, grid);

    let scale = norm_vec(&full, grid)
        + [&terms.advection, &terms.surface_pressure, &terms.baroclinic, &terms.coriolis, &terms.viscous]
            .iter()
            .map(|t| norm_vec(t, grid))
            .sum::<f64>();
    SplitResiduals { barotropic, baroclinic, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_smooth_state;
    use crate::operators::inner_vec;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(1.2, 1.0, 0.6, 8, 7, 6).unwrap()
    }

    fn params() -> Params {
        Params { re1: 5.0, re2: 3.0, rt1: 4.0, rt2: 2.0, f0: 1.3, beta: 0.4, alpha: 0.9 }
    }

    #[test]
    fn rest_state_has_zero_tendency() {
        let g = grid();
        let s = State::rest(&g);
        let p = params();
        let dv = rhs_velocity(&s, &p, &Field2::zeros(g.nx, g.ny), &g);
        assert_eq!(dv.max_abs(), 0.0);
        let dt = rhs_temperature(&s, &p, &Forcing::zero(&g), &g);
        assert_eq!(dt.max_abs(), 0.0);
    }

    #[test]
    fn zero_velocity_transports_nothing() {
        let g = grid();
        let s = make_smooth_state(&g, 1.0, 2);
        let z = Ghosted::fill(&Field3::zeros(g.nx, g.ny, g.nz), BcProfile::VELOCITY_X);
        let t = Ghosted::fill(&s.temperature, BcProfile::NEUMANN);
        assert_eq!(advect(&z, &z, &z, &t, &g).max_abs(), 0.0);
    }

    #[test]
    fn constant_scalar_in_constant_flow_interior() {
        let g = grid();
        let vx = Ghosted::fill(&Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| 0.7), BcProfile::VELOCITY_X);
        let vy = Ghosted::fill(&Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| -0.3), BcProfile::VELOCITY_Y);
        let w = Ghosted::fill(&Field3::zeros(g.nx, g.ny, g.nz), BcProfile::VERTICAL_VELOCITY);
        let phi = Ghosted::fill(&Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| 2.0), BcProfile::NEUMANN);
        let a = advect(&vx, &vy, &w, &phi, &g);
        for k in 0..g.nz {
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    assert!(a.at(i, j, k).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn coriolis_examples() {
        let g = grid();
        let v = VecField3 {
            x: Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| 1.0),
            y: Field3::zeros(g.nx, g.ny, g.nz),
        };
        let c = coriolis(&v, 1.0, 0.0, &g);
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    assert_eq!(c.x.at(i, j, k), 0.0);
                    assert_eq!(c.y.at(i, j, k), g.y(j));
                }
            }
        }
        assert_eq!(coriolis(&v, 0.0, 0.4, &g).max_abs(), 0.0);
        let s = make_smooth_state(&g, 1.0, 9);
        let c = coriolis(&s.v, 1.3, 0.4, &g);
        for n in 0..g.cells() {
            let dot = c.x.data()[n] * s.v.x.data()[n] + c.y.data()[n] * s.v.y.data()[n];
            let mag = (c.x.data()[n] * s.v.x.data()[n]).abs();
            assert!(dot.abs() <= 2.0 * f64::EPSILON * mag);
        }
    }

    #[test]
    fn baroclinic_examples() {
        let g = grid();
        let c = Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| 1.7);
        assert!(baroclinic_pressure_grad(&c, &g).max_abs() < 1e-14);
        // T = x^2: interior centred difference of (z + h) x^2 is exact.
        let t = Field3::from_fn(g.nx, g.ny, g.nz, |i, _, _| g.x(i).powi(2));
        let b = baroclinic_pressure_grad(&t, &g);
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 1..g.nx - 1 {
                    let want = -(g.z(k) + g.h) * 2.0 * g.x(i);
                    assert!((b.x.at(i, j, k) - want).abs() < 1e-12);
                    assert!(b.y.at(i, j, k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn temperature_only_drives_baroclinic_term() {
        let g = grid();
        let p = params();
        let mut s = State::rest(&g);
        s.temperature = Field3::from_fn(g.nx, g.ny, g.nz, |i, _, _| (g.x(i)).cos());
        let ps = Field2::zeros(g.nx, g.ny);
        let terms = velocity_terms(&Diagnosed::new(&s, &p, &g), &s, &p, &ps, &g);
        assert_eq!(terms.advection.max_abs(), 0.0);
        assert_eq!(terms.coriolis.max_abs(), 0.0);
        assert_eq!(terms.viscous.max_abs(), 0.0);
        assert_eq!(terms.surface_pressure.max_abs(), 0.0);
        assert_eq!(terms.total(), terms.baroclinic);
        assert!(terms.baroclinic.max_abs() > 0.0);
    }

    #[test]
    fn temperature_tendency_examples() {
        let g = grid();
        let p = Params { alpha: 1e-300, ..params() };
        let mut s = State::rest(&g);
        s.temperature = Field3::from_fn(g.nx, g.ny, g.nz, |_, _, _| 3.0);
        assert!(rhs_temperature(&s, &p, &Forcing::zero(&g), &g).max_abs() < 1e-12);
        let s = State::rest(&g);
        let f = Forcing::from_profile(&g, crate::fields::ForcingProfile::Cosine { amplitude: 2.0 });
        assert_eq!(rhs_temperature(&s, &p, &f, &g), f.q);
    }

    #[test]
    fn fused_tendency_matches_term_assembly() {
        let g = grid();
        let p = params();
        let s = make_smooth_state(&g, p.alpha, 4);
        let ps = Field2::from_fn(g.nx, g.ny, |i, j| (i as f64 * 0.3).cos() * (j as f64 * 0.2).sin());
        let f = Forcing::from_profile(&g, crate::fields::ForcingProfile::CosineZ { amplitude: 0.5 });
        let d = Diagnosed::new(&s, &p, &g);
        let t = tendency(&d, &s, &p, &f, &ps, &g);
        let v = rhs_velocity(&s, &p, &ps, &g);
        let tt = rhs_temperature(&s, &p, &f, &g);
        for (a, b) in t.dv.x.data().iter().chain(t.dv.y.data()).zip(v.x.data().iter().chain(v.y.data())) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in t.dt.data().iter().zip(tt.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn z_independent_flow_has_no_baroclinic_residual() {
        let g = grid();
        let p = Params { f0: 0.0, ..params() };
        let mut s = make_smooth_state(&g, p.alpha, 5);
        let (bx, by) = avg_vec(&s.v, &g);
        s.v = bcast_vec(&bx, &by, g.nz);
        s.temperature = Field3::zeros(g.nx, g.ny, g.nz);
        let r = split_residual_check(&s, &p, &Field2::zeros(g.nx, g.ny), &g);
        assert!(r.baroclinic <= 1e-13 * r.scale, "{r:?}");
        assert!(r.barotropic <= 1e-13 * r.scale, "{r:?}");
    }

    #[test]
    fn trivial_split_residuals() {
        let g = grid();
        let p = Params { f0: 0.0, ..params() };
        let r = split_residual_check(&State::rest(&g), &p, &Field2::zeros(g.nx, g.ny), &g);
        assert_eq!((r.barotropic, r.baroclinic), (0.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn transport_is_energy_neutral(seed in 0u64..1000, vseed in 0u64..1000) {
            let g = grid();
            let p = params();
            let s = make_smooth_state(&g, p.alpha, seed);
            let mut v = make_smooth_state(&g, p.alpha, vseed);
            // Arbitrary, not even divergence-compatible, velocity field.
            v.v.x = v.v.x.zip_map(&s.temperature, |a, b| a + 0.3 * b * b);
            let d = Diagnosed::new(&v, &p, &g);
            let t = Ghosted::fill(&s.temperature, BcProfile::temperature(p.alpha, g.dz));
            let a = advect(&d.vx, &d.vy, &d.w, &t, &g);
            let scale = inner(&a.map(f64::abs), &s.temperature.map(f64::abs), &g);
            prop_assert!(inner(&a, &s.temperature, &g).abs() <= 1e-13 * scale.max(1e-300));
            let av = VecField3 {
                x: advect(&d.vx, &d.vy, &d.w, &d.vx, &g),
                y: advect(&d.vx, &d.vy, &d.w, &d.vy, &g),
            };
            let e = inner_vec(&av, &v.v, &g);
            let scale = inner(&av.x.map(f64::abs), &v.v.x.map(f64::abs), &g)
                + inner(&av.y.map(f64::abs), &v.v.y.map(f64::abs), &g);
            prop_assert!(e.abs() <= 1e-13 * scale);
        }

        #[test]
        fn coriolis_is_energy_neutral(seed in 0u64..1000, f0 in -3.0f64..3.0, beta in -1.0f64..1.0) {
            let g = grid();
            let s = make_smooth_state(&g, 1.0, seed);
            let c = coriolis(&s.v, f0, beta, &g);
            let scale = inner(&c.x.map(f64::abs), &s.v.x.map(f64::abs), &g) + inner(&c.y.map(f64::abs), &s.v.y.map(f64::abs), &g);
            prop_assert!(inner_vec(&c, &s.v, &g).abs() <= 4.0 * f64::EPSILON * scale.max(1e-300));
        }

        #[test]
        fn split_residuals_vanish(seed in 0u64..1000) {
            let g = grid();
            let p = params();
            let s = make_smooth_state(&g, p.alpha, seed);
            let ps = Field2::from_fn(g.nx, g.ny, |i, j| ((i * 3 + j) as f64).sin());
            let r = split_residual_check(&s, &p, &ps, &g);
            prop_assert!(r.barotropic <= 1e-12 * r.scale, "{:?}", r);
            prop_assert!(r.baroclinic <= 1e-12 * r.scale, "{:?}", r);
        }
    }
}
