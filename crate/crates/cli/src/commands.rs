//! Implementations of the subcommands.

use std::fs;
use std::path::Path;

use peq_core::energetics::{calibrate_kappa, certificate_series, check_inequalities, ForcingNorms, Kappa, MonitorOptions, NormRecord};
use peq_core::geometry::{DomainConstants, Grid};
use peq_core::io::{load_config, read_ledger, LedgerObserver, LedgerRow, RunConfig, SnapshotObserver};
use peq_core::timestepper::{integrate_with, Stepper};
use peq_core::verification::{dense_oracle_check, mms_run, twin_runs, MmsConfig, MmsProfile};

use crate::plot;
use crate::Failure;

type CommandResult = Result<(), Failure>;

fn io_failure(what: &str, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Failed(format!("{what} {}: {e}", path.display()))
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    load_config(path).map_err(|e| match e {
        peq_core::Error::Io(io) => Failure::Usage(format!("cannot read config {}: {io}", path.display())),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

fn load_ledger(path: &Path) -> Result<Vec<LedgerRow>, Failure> {
    read_ledger(path).map_err(|e| match e {
        peq_core::Error::Io(io) => Failure::Usage(format!("cannot read ledger {}: {io}", path.display())),
        other => Failure::Failed(format!("{}: {other}", path.display())),
    })
}

/// Grid, forcing norms and Poincare constant of a configuration.
fn setting(cfg: &RunConfig) -> Result<(Grid, ForcingNorms, f64), Failure> {
    let grid = cfg.grid()?;
    let q = ForcingNorms::compute(&cfg.forcing_field(&grid), &grid);
    let c_m = DomainConstants::compute(&grid)?.c_m;
    Ok((grid, q, c_m))
}

pub fn run(config: &Path, out: Option<&Path>) -> CommandResult {
    let cfg = load(config)?;
    let Some(dir) = out.or(cfg.out_dir.as_deref()) else {
        return Err(Failure::Usage("no output directory: pass --out or set out_dir in the config".into()));
    };
    fs::create_dir_all(dir).map_err(|e| io_failure("cannot create", dir, e))?;
    let copy = dir.join("config.txt");
    fs::write(&copy, cfg.to_text()).map_err(|e| io_failure("cannot write", &copy, e))?;

    let (grid, q, c_m) = setting(&cfg)?;
    let ledger_path = dir.join("ledger.csv");
    let mut ledger = LedgerObserver::create(&ledger_path, cfg.ledger_cadence, q, c_m, cfg.monitor.kappa, cfg.monitor.exponent_cap)?;
    let mut snapshots = SnapshotObserver::new(dir, cfg.snapshot_cadence);
    let mut stepper = Stepper::new(cfg.params, cfg.forcing_field(&grid), grid).with_projection(cfg.projection);
    let end = integrate_with(&mut stepper, cfg.initial_state(&grid), &cfg.control, &mut [&mut ledger, &mut snapshots])?;

    let last = ledger.rows().last().copied().unwrap_or_default();
    println!("grid {}x{}x{}, reached t = {}", grid.nx, grid.ny, grid.nz, end.time);
    println!("final ||v||^2 = {:.6e}, ||T||^2 = {:.6e}", last.v_sq, last.temp_sq);
    println!("ledger: {} ({} rows)", ledger_path.display(), ledger.rows().len());
    println!("snapshots: {}", snapshots.written().len());
    Ok(())
}

pub fn certify(ledger: &Path, config: &Path, calibrate: bool, csv: Option<&Path>) -> CommandResult {
    let cfg = load(config)?;
    let rows: Vec<NormRecord> = load_ledger(ledger)?.into_iter().map(|r| r.norms).collect();
    let (grid, q, c_m) = setting(&cfg)?;
    let mut opts: MonitorOptions = cfg.monitor;
    if calibrate {
        let certs = certificate_series(&rows, &q, &cfg.params, &grid, c_m, opts.kappa, opts.exponent_cap)?;
        let samples: Vec<_> = rows.iter().copied().zip(certs).collect();
        let mut kappa = calibrate_kappa(&samples).as_array();
        // A bound whose measured side vanishes everywhere keeps its configured multiplier.
        for (k, configured) in kappa.iter_mut().zip(opts.kappa.as_array()) {
            if *k <= 0.0 {
                *k = configured;
            }
        }
        opts.kappa = Kappa::from_array(kappa);
        let [k6, k2, kz, kv, kt] = kappa;
        println!("calibrated kappa = {k6:e},{k2:e},{kz:e},{kv:e},{kt:e}");
    }
    let report = check_inequalities(&rows, &q, &cfg.params, &grid, c_m, &opts)?;
    print!("{}", report.to_table());
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).map_err(|e| io_failure("cannot write", path, e))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.inequalities.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        Err(Failure::Failed(format!("inequalities violated: {}", failed.join(", "))))
    }
}

pub fn verify_mms(levels: usize, oscillating: bool) -> CommandResult {
    if levels < 3 {
        return Err(Failure::Usage(format!("--levels must be at least 3, got {levels}")));
    }
    if levels > 6 {
        return Err(Failure::Usage(format!("--levels must be at most 6, got {levels}")));
    }
    let sizes: Vec<usize> = (0..levels).map(|i| 16 << i).collect();
    let mut cfg = MmsConfig::default();
    if oscillating {
        cfg.profile = MmsProfile::Oscillating { amplitude: 1.0 };
    }
    let report = mms_run(&sizes, &cfg)?;
    print!("{}", report.to_table());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Failed(format!("finest-pair orders {:?} below the required minimum", report.finest_orders())))
    }
}

pub fn verify_oracle(sizes: &[usize]) -> CommandResult {
    let sizes = if sizes.is_empty() { vec![4, 6] } else { sizes.to_vec() };
    let mut passed = true;
    for n in sizes {
        let grid = Grid::new(1.0, 0.8, 0.6, n, n, n)?;
        let report = dense_oracle_check(&grid)?;
        print!("{}", report.to_table());
        passed &= report.all_passed();
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Failed("stencil and dense assembly disagree".into()))
    }
}

/// Largest tolerated deviation of `delta(eps) / delta(eps/2)` from 4.
const RATIO_TOLERANCE: f64 = 0.15;

pub fn verify_twin(config: &Path, eps: f64, csv: Option<&Path>) -> CommandResult {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Failure::Usage(format!("--eps must be positive and finite, got {eps}")));
    }
    let cfg = load(config)?;
    let twin = cfg.twin_config()?;
    let reports = twin_runs(&twin, &[eps, eps / 2.0])?;
    for r in &reports {
        println!("{}", r.summary());
    }
    let ratios = reports[0].delta_ratios(&reports[1]);
    let deviation = ratios.iter().map(|r| (r / 4.0 - 1.0).abs()).fold(0.0, f64::max);
    println!("delta(eps)/delta(eps/2): worst deviation from 4 is {:.3}%", 100.0 * deviation);
    if let Some(path) = csv {
        fs::write(path, reports[0].to_csv()).map_err(|e| io_failure("cannot write", path, e))?;
    }
    if !reports.iter().all(|r| r.passed) {
        return Err(Failure::Failed("growth envelope violated on the validation window".into()));
    }
    if deviation > RATIO_TOLERANCE {
        return Err(Failure::Failed(format!("perturbation response is not quadratic in eps (deviation {:.1}%)", 100.0 * deviation)));
    }
    Ok(())
}

pub fn plot(ledger: &Path, out: &Path, config: Option<&Path>) -> CommandResult {
    let rows = load_ledger(ledger)?;
    let decay = match config {
        Some(path) => {
            let cfg = load(path)?;
            let (grid, q, _) = setting(&cfg)?;
            Some(plot::DecayEnvelope::new(&cfg.params, &grid, &q))
        }
        None => None,
    };
    fs::create_dir_all(out).map_err(|e| io_failure("cannot create", out, e))?;
    let written = plot::draw_all(&rows, decay.as_ref(), out).map_err(Failure::Failed)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
