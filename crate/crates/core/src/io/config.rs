//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Keys are case-sensitive,
//! unknown keys are rejected and every key may appear at most once. Missing
//! keys take the defaults of [`RunConfig::default`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::energetics::{Kappa, MonitorOptions, DEFAULT_EXPONENT_CAP};
use crate::error::{Error, Result};
use crate::fields::{make_smooth_state, Forcing, ForcingProfile, Params, State};
use crate::geometry::{build_domain, Grid, MIN_CELLS};
use crate::pressure::{NeumannStencil, ProjectionOptions};
use crate::timestepper::StepControl;
use crate::verification::TwinConfig;

/// Initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    Rest,
    /// Seeded band-limited state with its velocity and temperature rescaled.
    Smooth { seed: u64, velocity_amplitude: f64, temperature_amplitude: f64 },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub params: Params,
    pub forcing: ForcingProfile,
    pub init: InitSpec,
    pub control: StepControl,
    /// Steps between ledger rows.
    pub ledger_cadence: usize,
    /// Steps between snapshots; `0` writes only the final snapshot.
    pub snapshot_cadence: usize,
    pub out_dir: Option<PathBuf>,
    pub projection: ProjectionOptions,
    pub monitor: MonitorOptions,
    /// Seed of the velocity perturbation used by twin runs.
    pub perturbation_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lx: 1.0,
            ly: 1.0,
            h: 1.0,
            nx: 16,
            ny: 16,
            nz: 16,
            params: Params::default(),
            forcing: ForcingProfile::Zero,
            init: InitSpec::Smooth { seed: 1, velocity_amplitude: 0.1, temperature_amplitude: 0.1 },
            control: StepControl::adaptive(1.0, 0.01),
            ledger_cadence: 10,
            snapshot_cadence: 0,
            out_dir: None,
            projection: ProjectionOptions::default(),
            monitor: MonitorOptions::default(),
            perturbation_seed: 2,
        }
    }
}

/// Recognised keys, in the order [`RunConfig::to_text`] writes them.
pub const CONFIG_KEYS: [&str; 36] = [
    "Lx",
    "Ly",
    "h",
    "Nx",
    "Ny",
    "Nz",
    "Re1",
    "Re2",
    "Rt1",
    "Rt2",
    "f0",
    "beta",
    "alpha",
    "forcing",
    "forcing_amplitude",
    "init",
    "seed",
    "velocity_amplitude",
    "temperature_amplitude",
    "t_end",
    "dt",
    "fixed_dt",
    "cfl_adv",
    "cfl_diff",
    "ledger_cadence",
    "snapshot_cadence",
    "out_dir",
    "poisson_tolerance",
    "poisson_max_iterations",
    "poisson_stencil",
    "slack",
    "truncation",
    "kappa",
    "exponent_cap",
    "min_rows",
    "perturbation_seed",
];

struct Entry {
    line: usize,
    value: String,
}

struct Entries(BTreeMap<&'static str, Entry>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<T>().map_err(|err| Error::Parse {
                line: e.line,
                message: format!("invalid value `{}` for {key}: {err}", e.value),
            }),
        }
    }

    fn text<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).map(|e| e.value.as_str()).unwrap_or(default)
    }

    fn line(&self, key: &str) -> usize {
        self.raw(key).map(|e| e.line).unwrap_or(0)
    }

    fn bad(&self, key: &str, message: String) -> Error {
        Error::Parse { line: self.line(key), message: format!("invalid value for {key}: {message}") }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, message: format!("expected `key = value`, found `{content}`") });
        };
        let key = key.trim();
        let Some(&known) = CONFIG_KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Parse { line, message: format!("unknown key `{key}`") });
        };
        if let Some(first) = entries.get(known) {
            let first: &Entry = first;
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}` (first set on line {}, again on line {line})", first.line),
            });
        }
        entries.insert(known, Entry { line, value: value.trim().to_string() });
    }
    let e = Entries(entries);
    let d = RunConfig::default();
    let dp = d.params;

    let amplitude: f64 = e.parse("forcing_amplitude", 1.0)?;
    let forcing = match e.text("forcing", "zero") {
        "zero" => ForcingProfile::Zero,
        "cosine" => ForcingProfile::Cosine { amplitude },
        "cosine_z" => ForcingProfile::CosineZ { amplitude },
        "uniform" => ForcingProfile::Uniform { amplitude },
        other => return Err(e.bad("forcing", format!("`{other}` is not one of zero, cosine, cosine_z, uniform"))),
    };
    let (dseed, dva, dta) = match d.init {
        InitSpec::Smooth { seed, velocity_amplitude, temperature_amplitude } => (seed, velocity_amplitude, temperature_amplitude),
        InitSpec::Rest => (1, 0.1, 0.1),
    };
    let init = match e.text("init", "smooth") {
        "rest" => InitSpec::Rest,
        "smooth" => InitSpec::Smooth {
            seed: e.parse("seed", dseed)?,
            velocity_amplitude: e.parse("velocity_amplitude", dva)?,
            temperature_amplitude: e.parse("temperature_amplitude", dta)?,
        },
        other => return Err(e.bad("init", format!("`{other}` is not one of rest, smooth"))),
    };
    let stencil = match e.text("poisson_stencil", "wide") {
        "wide" => NeumannStencil::Wide,
        "compact" => NeumannStencil::Compact,
        other => return Err(e.bad("poisson_stencil", format!("`{other}` is not one of wide, compact"))),
    };
    let kappa = match e.raw("kappa") {
        None => d.monitor.kappa,
        Some(entry) => {
            let parts: Vec<&str> = entry.value.split(',').map(str::trim).collect();
            if parts.len() != 5 {
                return Err(e.bad("kappa", format!("expected 5 comma-separated values, found {}", parts.len())));
            }
            let mut a = [0.0; 5];
            for (slot, p) in a.iter_mut().zip(parts) {
                *slot = p.parse().map_err(|err| e.bad("kappa", format!("`{p}`: {err}")))?;
            }
            Kappa::from_array(a)
        }
    };
    let t_end: f64 = e.parse("t_end", d.control.t_end)?;
    let control = StepControl {
        dt: e.parse("dt", d.control.dt)?,
        fixed: e.parse("fixed_dt", d.control.fixed)?,
        cfl_adv: e.parse("cfl_adv", d.control.cfl_adv)?,
        cfl_diff: e.parse("cfl_diff", d.control.cfl_diff)?,
        t_end,
    };
    let cfg = RunConfig {
        lx: e.parse("Lx", d.lx)?,
        ly: e.parse("Ly", d.ly)?,
        h: e.parse("h", d.h)?,
        nx: e.parse("Nx", d.nx)?,
        ny: e.parse("Ny", d.ny)?,
        nz: e.parse("Nz", d.nz)?,
        params: Params {
            re1: e.parse("Re1", dp.re1)?,
            re2: e.parse("Re2", dp.re2)?,
            rt1: e.parse("Rt1", dp.rt1)?,
            rt2: e.parse("Rt2", dp.rt2)?,
            f0: e.parse("f0", dp.f0)?,
            beta: e.parse("beta", dp.beta)?,
            alpha: e.parse("alpha", dp.alpha)?,
        },
        forcing,
        init,
        control,
        ledger_cadence: e.parse("ledger_cadence", d.ledger_cadence)?,
        snapshot_cadence: e.parse("snapshot_cadence", d.snapshot_cadence)?,
        out_dir: e.raw("out_dir").map(|v| PathBuf::from(&v.value)),
        projection: ProjectionOptions {
            tolerance: e.parse("poisson_tolerance", d.projection.tolerance)?,
            max_iterations: e.parse("poisson_max_iterations", d.projection.max_iterations)?,
            stencil,
        },
        monitor: MonitorOptions {
            slack: e.parse("slack", d.monitor.slack)?,
            truncation: e.parse("truncation", d.monitor.truncation)?,
            kappa,
            exponent_cap: e.parse("exponent_cap", DEFAULT_EXPONENT_CAP)?,
            min_rows: e.parse("min_rows", d.monitor.min_rows)?,
        },
        perturbation_seed: e.parse("perturbation_seed", d.perturbation_seed)?,
    };
    cfg.validate().map_err(|err| match err {
        Error::Config(msg) => {
            let key = msg.split(':').next().unwrap_or("");
            match e.raw(key) {
                Some(entry) => Error::Parse { line: entry.line, message: msg },
                None => Error::Config(msg),
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key}: must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key}: must be finite, got {v}")))
    }
}

impl RunConfig {
    /// Checks every value against the preconditions of the module that consumes it.
    /// Error messages start with the offending key.
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("Lx", self.lx), ("Ly", self.ly), ("h", self.h)] {
            positive(key, v)?;
        }
        for (key, n) in [("Nx", self.nx), ("Ny", self.ny), ("Nz", self.nz)] {
            if n < MIN_CELLS {
                return Err(Error::Config(format!("{key}: must be at least {MIN_CELLS}, got {n}")));
            }
        }
        let p = &self.params;
        for (key, v) in [("Re1", p.re1), ("Re2", p.re2), ("Rt1", p.rt1), ("Rt2", p.rt2), ("alpha", p.alpha)] {
            positive(key, v)?;
        }
        finite("f0", p.f0)?;
        finite("beta", p.beta)?;
        match self.forcing {
            ForcingProfile::Zero => {}
            ForcingProfile::Cosine { amplitude } | ForcingProfile::CosineZ { amplitude } | ForcingProfile::Uniform { amplitude } => {
                finite("forcing_amplitude", amplitude)?
            }
        }
        if let InitSpec::Smooth { velocity_amplitude, temperature_amplitude, .. } = self.init {
            finite("velocity_amplitude", velocity_amplitude)?;
            finite("temperature_amplitude", temperature_amplitude)?;
        }
        let c = &self.control;
        positive("dt", c.dt)?;
        if !(c.t_end.is_finite() && c.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end: must be nonnegative and finite, got {}", c.t_end)));
        }
        for (key, v) in [("cfl_adv", c.cfl_adv), ("cfl_diff", c.cfl_diff)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{key}: must lie in (0, 1), got {v}")));
            }
        }
        if self.ledger_cadence == 0 {
            return Err(Error::Config("ledger_cadence: must be at least 1".into()));
        }
        positive("poisson_tolerance", self.projection.tolerance)?;
        if self.projection.max_iterations == 0 {
            return Err(Error::Config("poisson_max_iterations: must be at least 1".into()));
        }
        let m = &self.monitor;
        positive("slack", m.slack)?;
        if !(m.truncation.is_finite() && m.truncation >= 0.0) {
            return Err(Error::Config(format!("truncation: must be nonnegative, got {}", m.truncation)));
        }
        if m.kappa.as_array().iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Config("kappa: every multiplier must be positive and finite".into()));
        }
        positive("exponent_cap", m.exponent_cap)?;
        if m.min_rows < 2 {
            return Err(Error::Config(format!("min_rows: must be at least 2, got {}", m.min_rows)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        build_domain(self.lx, self.ly, self.h, self.nx, self.ny, self.nz).map(|(_, g)| g)
    }

    pub fn forcing_field(&self, grid: &Grid) -> Forcing {
        Forcing::from_profile(grid, self.forcing)
    }

    pub fn initial_state(&self, grid: &Grid) -> State {
        match self.init {
            InitSpec::Rest => State::rest(grid),
            InitSpec::Smooth { seed, velocity_amplitude, temperature_amplitude } => {
                make_smooth_state(grid, self.params.alpha, seed).scaled(velocity_amplitude, temperature_amplitude)
            }
        }
    }

    /// Twin-run setup: the configured initial state as the base and the
    /// velocity of the seeded state `perturbation_seed` as the perturbation
    /// direction, advanced with the configured step as a fixed step.
    pub fn twin_config(&self) -> Result<TwinConfig> {
        let grid = self.grid()?;
        let base = self.initial_state(&grid);
        let perturbation = make_smooth_state(&grid, self.params.alpha, self.perturbation_seed).v;
        let mut cfg = TwinConfig::new(grid, self.params, self.forcing_field(&grid), base, perturbation, self.control.t_end, self.control.dt);
        cfg.projection = self.projection;
        Ok(cfg)
    }

    /// Canonical text form; `parse_config(cfg.to_text())` reproduces `cfg`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let (forcing, amplitude) = match self.forcing {
            ForcingProfile::Zero => ("zero", 0.0),
            ForcingProfile::Cosine { amplitude } => ("cosine", amplitude),
            ForcingProfile::CosineZ { amplitude } => ("cosine_z", amplitude),
            ForcingProfile::Uniform { amplitude } => ("uniform", amplitude),
        };
        let mut lines = vec![
            format!("Lx = {:?}", self.lx),
            format!("Ly = {:?}", self.ly),
            format!("h = {:?}", self.h),
            format!("Nx = {}", self.nx),
            format!("Ny = {}", self.ny),
            format!("Nz = {}", self.nz),
            format!("Re1 = {:?}", p.re1),
            format!("Re2 = {:?}", p.re2),
            format!("Rt1 = {:?}", p.rt1),
            format!("Rt2 = {:?}", p.rt2),
            format!("f0 = {:?}", p.f0),
            format!("beta = {:?}", p.beta),
            format!("alpha = {:?}", p.alpha),
            format!("forcing = {forcing}"),
            format!("forcing_amplitude = {amplitude:?}"),
        ];
        match self.init {
            InitSpec::Rest => lines.push("init = rest".into()),
            InitSpec::Smooth { seed, velocity_amplitude, temperature_amplitude } => {
                lines.push("init = smooth".into());
                lines.push(format!("seed = {seed}"));
                lines.push(format!("velocity_amplitude = {velocity_amplitude:?}"));
                lines.push(format!("temperature_amplitude = {temperature_amplitude:?}"));
            }
        }
        let c = &self.control;
        lines.extend([
            format!("t_end = {:?}", c.t_end),
            format!("dt = {:?}", c.dt),
            format!("fixed_dt = {}", c.fixed),
            format!("cfl_adv = {:?}", c.cfl_adv),
            format!("cfl_diff = {:?}", c.cfl_diff),
            format!("ledger_cadence = {}", self.ledger_cadence),
            format!("snapshot_cadence = {}", self.snapshot_cadence),
        ]);
        if let Some(dir) = &self.out_dir {
            lines.push(format!("out_dir = {}", dir.display()));
        }
        let k = self.monitor.kappa.as_array();
        lines.extend([
            format!("poisson_tolerance = {:?}", self.projection.tolerance),
            format!("poisson_max_iterations = {}", self.projection.max_iterations),
            format!(
                "poisson_stencil = {}",
                match self.projection.stencil {
                    NeumannStencil::Wide => "wide",
                    NeumannStencil::Compact => "compact",
                }
            ),
            format!("slack = {:?}", self.monitor.slack),
            format!("truncation = {:?}", self.monitor.truncation),
            format!("kappa = {:?}, {:?}, {:?}, {:?}, {:?}", k[0], k[1], k[2], k[3], k[4]),
            format!("exponent_cap = {:?}", self.monitor.exponent_cap),
            format!("min_rows = {}", self.monitor.min_rows),
            format!("perturbation_seed = {}", self.perturbation_seed),
        ]);
        lines.join("\n") + "\n"
    }
}
