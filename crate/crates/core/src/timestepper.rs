//! Three-stage SSP Runge-Kutta integration with a projection at every stage.

use crate::dynamics::{tendency, Diagnosed, Tendency};
use crate::error::{Error, Result};
use crate::fields::{Forcing, Params, State};
use crate::geometry::Grid;
use crate::operators::{diagnose_w, Field2, Field3, VecField3};
use crate::pressure::{project_step_with, ProjectionOptions};

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Upper bound on the step; with `fixed` set, the step itself.
    pub dt: f64,
    pub fixed: bool,
    pub cfl_adv: f64,
    pub cfl_diff: f64,
    pub t_end: f64,
}

impl StepControl {
    pub fn adaptive(t_end: f64, dt_max: f64) -> Self {
        StepControl { dt: dt_max, fixed: false, cfl_adv: 0.5, cfl_diff: 0.25, t_end }
    }

    pub fn fixed(t_end: f64, dt: f64) -> Self {
        StepControl { dt, fixed: true, ..StepControl::adaptive(t_end, dt) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cfl_adv", self.cfl_adv), ("cfl_diff", self.cfl_diff)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Explicit stability limit, clipped to `control.dt` and the time left.
pub fn stable_dt(state: &State, params: &Params, grid: &Grid, control: &StepControl) -> f64 {
    let (vx, vy) = crate::fields::apply_bcs_velocity(state);
    let w = diagnose_w(&vx, &vy, grid);
    let speed = state.v.x.max_abs().max(state.v.y.max_abs()).max(w.max_abs());
    let diff = [
        params.re1 * grid.dx * grid.dx,
        params.re1 * grid.dy * grid.dy,
        params.re2 * grid.dz * grid.dz,
        params.rt1 * grid.dx * grid.dx,
        params.rt1 * grid.dy * grid.dy,
        params.rt2 * grid.dz * grid.dz,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let mut dt = control.cfl_diff * diff / 2.0;
    if speed > 0.0 {
        dt = dt.min(control.cfl_adv * grid.min_spacing() / speed);
    }
    dt.min(control.dt).min(control.t_end - state.time)
}

/// Extra tendency added before projection, evaluated at the stage time.
pub type Source = Box<dyn Fn(f64) -> Tendency + Send + Sync>;

/// Owns everything a step needs, including the last surface pressure, which
/// warm-starts the next Poisson solve.
pub struct Stepper {
    pub params: Params,
    pub forcing: Forcing,
    pub grid: Grid,
    pub projection: ProjectionOptions,
    source: Option<Source>,
    p_s: Field2,
}

impl Stepper {
    pub fn new(params: Params, forcing: Forcing, grid: Grid) -> Self {
        Stepper {
            params,
            forcing,
            grid,
            projection: ProjectionOptions::default(),
            source: None,
            p_s: Field2::zeros(grid.nx, grid.ny),
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_projection(mut self, projection: ProjectionOptions) -> Self {
        self.projection = projection;
        self
    }

    /// Surface pressure from the most recent stage.
    pub fn surface_pressure(&self) -> &Field2 {
        &self.p_s
    }

    /// Projected tendency at `state`.
    pub fn evaluate(&mut self, state: &State) -> Result<Tendency> {
        let g = &self.grid;
        let d = Diagnosed::new(state, &self.params, g);
        let zero = Field2::zeros(g.nx, g.ny);
        let mut t = tendency(&d, state, &self.params, &self.forcing, &zero, g);
        if let Some(src) = &self.source {
            let s = src(state.time);
            t.dv.axpy(1.0, &s.dv);
            t.dt.axpy(1.0, &s.dt);
        }
        let (dv, p_s) = project_step_with(&t.dv, g, &self.projection, Some(&self.p_s))?;
        self.p_s = p_s;
        Ok(Tendency { dv, dt: t.dt })
    }

    /// One SSP-RK3 step of size `dt`.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<State> {
        let t0 = state.time;
        let k0 = self.checked(state, 1)?;
        let s1 = combine(state, 0.0, state, 1.0, &k0, dt, t0 + dt);
        check(&s1, 1)?;
        let k1 = self.checked(&s1, 2)?;
        let s2 = combine(state, 0.75, &s1, 0.25, &k1, dt, t0 + 0.5 * dt);
        check(&s2, 2)?;
        let k2 = self.checked(&s2, 3)?;
        let s3 = combine(state, 1.0 / 3.0, &s2, 2.0 / 3.0, &k2, dt, t0 + dt);
        check(&s3, 3)?;
        Ok(s3)
    }

    fn checked(&mut self, state: &State, stage: usize) -> Result<Tendency> {
        let t = self.evaluate(state).map_err(|e| match e {
            Error::Domain(_) => Error::BlowUp { field: "velocity tendency", time: state.time, stage },
            other => other,
        })?;
        if !t.dt.is_finite() {
            return Err(Error::BlowUp { field: "temperature tendency", time: state.time, stage });
        }
        Ok(t)
    }
}

fn check(s: &State, stage: usize) -> Result<()> {
    if !(s.v.x.is_finite() && s.v.y.is_finite()) {
        return Err(Error::BlowUp { field: "velocity", time: s.time, stage });
    }
    if !s.temperature.is_finite() {
        return Err(Error::BlowUp { field: "temperature", time: s.time, stage });
    }
    Ok(())
}

/// `a u + b (s + dt k)`, stamped with `time`.
fn combine(u: &State, a: f64, s: &State, b: f64, k: &Tendency, dt: f64, time: f64) -> State {
    let mix = |fu: &Field3, fs: &Field3, fk: &Field3| {
        let data = fu
            .data()
            .iter()
            .zip(fs.data())
            .zip(fk.data())
            .map(|((x, y), z)| a * x + b * (y + dt * z))
            .collect();
        let (nx, ny, nz) = fu.shape();
        Field3::from_vec(nx, ny, nz, data)
    };
    State {
        v: VecField3 { x: mix(&u.v.x, &s.v.x, &k.dv.x), y: mix(&u.v.y, &s.v.y, &k.dv.y) },
        temperature: mix(&u.temperature, &s.temperature, &k.dt),
        time,
    }
}

/// One SSP-RK3 step with a fresh [`Stepper`].
pub fn step_ssprk3(state: &State, params: &Params, forcing: &Forcing, grid: &Grid, dt: f64) -> Result<State> {
    Stepper::new(*params, forcing.clone(), *grid).step(state, dt)
}

/// What an observer sees after a step.
pub struct Observation<'a> {
    pub step: usize,
    pub dt: f64,
    pub state: &'a State,
    pub p_s: &'a Field2,
    pub grid: &'a Grid,
    pub params: &'a Params,
    pub is_final: bool,
}

pub trait Observer {
    /// Observe every `cadence` steps; step 0 and the final step are always observed.
    fn cadence(&self) -> usize {
        1
    }

    fn observe(&mut self, obs: &Observation<'_>) -> Result<()>;

    /// Flushes buffered output; called on normal completion and before an error propagates.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Advances `state` to `control.t_end`.
pub fn integrate(
    state: State,
    params: &Params,
    forcing: &Forcing,
    grid: &Grid,
    control: &StepControl,
    observers: &mut [&mut dyn Observer],
) -> Result<State> {
    let mut stepper = Stepper::new(*params, forcing.clone(), *grid);
    integrate_with(&mut stepper, state, control, observers)
}

/// Returns `true` when less than a rounding-level fraction of the run is left.
fn finished(t: f64, t_end: f64) -> bool {
    t_end - t <= 1e-12 * t_end.abs().max(1.0)
}

pub fn integrate_with(
    stepper: &mut Stepper,
    state: State,
    control: &StepControl,
    observers: &mut [&mut dyn Observer],
) -> Result<State> {
    control.validate()?;
    let result = run(stepper, state, control, observers);
    let flushed: Result<()> = observers.iter_mut().try_for_each(|o| o.flush());
    let state = result?;
    flushed?;
    Ok(state)
}

fn run(stepper: &mut Stepper, mut state: State, control: &StepControl, observers: &mut [&mut dyn Observer]) -> Result<State> {
    let mut step = 0usize;
    let notify = |observers: &mut [&mut dyn Observer], step: usize, dt: f64, state: &State, st: &Stepper, is_final: bool| {
        for o in observers.iter_mut() {
            let c = o.cadence().max(1);
            if step == 0 || is_final || step.is_multiple_of(c) {
                o.observe(&Observation {
                    step,
                    dt,
                    state,
                    p_s: &st.p_s,
                    grid: &st.grid,
                    params: &st.params,
                    is_final,
                })?;
            }
        }
        Ok::<(), Error>(())
    };
    if !state.is_finite() {
        return Err(Error::BlowUp { field: "initial state", time: state.time, stage: 0 });
    }
    let done = finished(state.time, control.t_end);
    notify(observers, 0, 0.0, &state, stepper, done)?;
    let t_start = state.time;
    while !finished(state.time, control.t_end) {
        let remaining = control.t_end - state.time;
        let candidate = if control.fixed {
            control.dt
        } else {
            stable_dt(&state, &stepper.params, &stepper.grid, control)
        };
        let last = candidate >= remaining * (1.0 - 1e-12);
        let dt = if last { remaining } else { candidate };
        let mut next = stepper.step(&state, dt)?;
        step += 1;
        next.time = if last {
            control.t_end
        } else if control.fixed {
            t_start + step as f64 * control.dt
        } else {
            next.time
        };
        state = next;
        notify(observers, step, dt, &state, stepper, last)?;
        if last {
            break;
        }
    }
    Ok(state)
}

/// Depth-averaged divergence of a state's velocity, for drift checks.
pub fn barotropic_divergence(state: &State, grid: &Grid) -> Field2 {
    crate::pressure::depth_averaged_divergence(&state.v, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_smooth_state, ForcingProfile};
    use crate::operators::norm_sq;
    use std::f64::consts::PI;

    fn unit_params() -> Params {
        Params { re1: 1.0, re2: 1.0, rt1: 1.0, rt2: 1.0, f0: 0.0, beta: 0.0, alpha: 1.0 }
    }

    #[test]
    fn stable_dt_examples() {
        let g = Grid::new(0.4, 0.4, 0.4, 4, 4, 4).unwrap();
        let s = State::rest(&g);
        let c = StepControl::adaptive(10.0, 1.0);
        assert!((stable_dt(&s, &unit_params(), &g, &c) - 1.25e-3).abs() < 1e-15);

        let p = Params { re1: 1e6, re2: 1e6, rt1: 1e6, rt2: 1e6, ..unit_params() };
        let mut s = State::rest(&g);
        // Alternating layers keep |w| below the horizontal speed.
        s.v.y = Field3::from_fn(4, 4, 4, |_, j, k| if j == 0 { 0.0 } else if k % 2 == 0 { 2.0 } else { -2.0 });
        let dt = stable_dt(&s, &p, &g, &c);
        let (vx, vy) = crate::fields::apply_bcs_velocity(&s);
        let wmax = diagnose_w(&vx, &vy, &g).max_abs();
        assert!(wmax <= 2.0);
        assert!((dt - 0.025).abs() < 1e-15, "{dt}");

        let mut s = State::rest(&g);
        s.time = 10.0 - 1e-4;
        assert!((stable_dt(&s, &unit_params(), &g, &c) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let g = Grid::new(1.0, 1.0, 1.0, 6, 6, 6).unwrap();
        let s = State::rest(&g);
        let p = Params::default();
        let n = step_ssprk3(&s, &p, &Forcing::zero(&g), &g, 1e-3).unwrap();
        assert_eq!(n.v, s.v);
        assert_eq!(n.temperature, s.temperature);
        assert_eq!(n.time, 1e-3);
    }

    #[test]
    fn diffusion_mode_decays_at_discrete_rate() {
        let g = Grid::new(1.0, 1.0, 1.0, 4, 4, 16).unwrap();
        let p = Params { alpha: 1e-300, rt2: 2.0, ..unit_params() };
        let kz = 2.0 * PI / g.h;
        let mut s = State::rest(&g);
        s.temperature = Field3::from_fn(4, 4, 16, |_, _, k| (kz * (g.z(k) + g.h)).cos());
        let lambda = 2.0 * (1.0 - (kz * g.dz).cos()) / (g.dz * g.dz) / p.rt2;
        for dt in [0.02, 0.01, 0.005] {
            let n = step_ssprk3(&s, &p, &Forcing::zero(&g), &g, dt).unwrap();
            assert_eq!(n.v.max_abs(), 0.0);
            let exact = (-lambda * dt).exp();
            let local = (lambda * dt).powi(4) / 24.0;
            for k in 0..16 {
                let got = n.temperature.at(1, 2, k);
                let want = exact * s.temperature.at(1, 2, k);
                assert!((got - want).abs() <= 1.01 * local + 1e-14, "dt {dt}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn oversized_step_blows_up() {
        let g = Grid::new(1.0, 1.0, 1.0, 6, 6, 6).unwrap();
        let p = unit_params();
        let s = make_smooth_state(&g, p.alpha, 1);
        let c = StepControl::adaptive(1e9, 1e9);
        let dt = 10.0 * stable_dt(&s, &p, &g, &c);
        let control = StepControl::fixed(1000.0 * dt, dt);
        let err = integrate(s, &p, &Forcing::zero(&g), &g, &control, &mut []).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err}");
    }

    struct Recorder {
        every: usize,
        rows: Vec<(usize, f64, f64)>,
        flushed: bool,
    }

    impl Observer for Recorder {
        fn cadence(&self) -> usize {
            self.every
        }
        fn observe(&mut self, o: &Observation<'_>) -> Result<()> {
            self.rows.push((o.step, o.state.time, norm_sq(&o.state.temperature, o.grid)));
            Ok(())
        }
        fn flush(&mut self) -> Result<()> {
            self.flushed = true;
            Ok(())
        }
    }

    #[test]
    fn zero_length_run_observes_once() {
        let g = Grid::new(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        let s = make_smooth_state(&g, 1.0, 0);
        let mut r = Recorder { every: 3, rows: vec![], flushed: false };
        let out = integrate(s.clone(), &Params::default(), &Forcing::zero(&g), &g, &StepControl::adaptive(0.0, 0.1), &mut [&mut r]).unwrap();
        assert_eq!(out, s);
        assert_eq!(r.rows.len(), 1);
        assert!(r.flushed);
    }

    #[test]
    fn runs_are_deterministic_and_damp_temperature() {
        let g = Grid::new(1.0, 1.0, 0.5, 8, 8, 6).unwrap();
        let p = Params { re1: 20.0, re2: 5.0, rt1: 20.0, rt2: 5.0, f0: 1.0, beta: 0.2, alpha: 1.0 };
        let s = make_smooth_state(&g, p.alpha, 2).scaled(0.5, 1.0);
        let control = StepControl::adaptive(0.2, 0.05);
        let mut a = Recorder { every: 4, rows: vec![], flushed: false };
        let mut b = Recorder { every: 4, rows: vec![], flushed: false };
        let fa = integrate(s.clone(), &p, &Forcing::zero(&g), &g, &control, &mut [&mut a]).unwrap();
        let fb = integrate(s.clone(), &p, &Forcing::zero(&g), &g, &control, &mut [&mut b]).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(a.rows, b.rows);
        assert_eq!(fa.time, 0.2);
        assert!(a.rows.len() >= 3);
        assert!(a.rows[0].0 == 0 && a.rows.iter().skip(1).rev().skip(1).all(|r| r.0 % 4 == 0));
        for w in a.rows.windows(2) {
            assert!(w[1].2 <= w[0].2, "{:?}", w);
        }
    }

    #[test]
    fn barotropic_divergence_does_not_drift() {
        let g = Grid::new(1.0, 1.0, 0.5, 6, 6, 4).unwrap();
        let p = Params { re1: 50.0, re2: 10.0, rt1: 50.0, rt2: 10.0, f0: 1.0, beta: 0.3, alpha: 1.0 };
        let s = make_smooth_state(&g, p.alpha, 3);
        let f = Forcing::from_profile(&g, ForcingProfile::Cosine { amplitude: 1.0 });
        let mut st = Stepper::new(p, f, g);
        let mut state = s;
        let dt = stable_dt(&state, &p, &g, &StepControl::adaptive(1e9, 1e9));
        let scale = state.v.max_abs() / g.dx;
        for _ in 0..1000 {
            state = st.step(&state, dt).unwrap();
        }
        let d = barotropic_divergence(&state, &g).max_abs();
        assert!(d <= 10.0 * st.projection.tolerance * scale.max(1.0), "{d}");
    }
}
