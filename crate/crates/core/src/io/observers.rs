//! Observers that write the ledger and snapshots while a run progresses.

use std::path::{Path, PathBuf};

use crate::energetics::{bound_certificate, compute_norms, ForcingNorms, Kappa, NormRecord};
use crate::error::Result;
use crate::fields::apply_bcs_velocity;
use crate::io::ledger::{append_ledger_row, write_ledger_header};
use crate::io::snapshot::write_snapshot;
use crate::operators::diagnose_w;
use crate::timestepper::{Observation, Observer};

/// Appends one ledger row per observation. The first observed state is the
/// initial data of every certificate.
pub struct LedgerObserver {
    path: PathBuf,
    cadence: usize,
    forcing: ForcingNorms,
    c_m: f64,
    kappa: Kappa,
    exponent_cap: f64,
    init: Option<NormRecord>,
    rows: Vec<NormRecord>,
}

impl LedgerObserver {
    /// Starts a fresh ledger file at `path` (truncating any existing one).
    pub fn create(path: &Path, cadence: usize, forcing: ForcingNorms, c_m: f64, kappa: Kappa, exponent_cap: f64) -> Result<Self> {
        write_ledger_header(path)?;
        Ok(LedgerObserver {
            path: path.to_path_buf(),
            cadence: cadence.max(1),
            forcing,
            c_m,
            kappa,
            exponent_cap,
            init: None,
            rows: Vec::new(),
        })
    }

    /// Norm records written so far.
    pub fn rows(&self) -> &[NormRecord] {
        &self.rows
    }
}

impl Observer for LedgerObserver {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let norms = compute_norms(obs.state, obs.grid, obs.params);
        let init = *self.init.get_or_insert(norms);
        let cert = bound_certificate(norms.t - init.t, &init, &self.forcing, obs.params, obs.grid, self.c_m, self.kappa, self.exponent_cap)?;
        append_ledger_row(&norms, &cert, &self.path)?;
        self.rows.push(norms);
        Ok(())
    }
}

/// Writes `snap_<step>.peq` every `cadence` steps (never when `cadence` is
/// zero) and `final.peq` at the end of the run.
pub struct SnapshotObserver {
    dir: PathBuf,
    cadence: usize,
    written: Vec<PathBuf>,
}

impl SnapshotObserver {
    pub fn new(dir: &Path, cadence: usize) -> Self {
        SnapshotObserver { dir: dir.to_path_buf(), cadence, written: Vec::new() }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

impl Observer for SnapshotObserver {
    fn cadence(&self) -> usize {
        self.cadence.max(1)
    }

    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let periodic = self.cadence > 0 && obs.step.is_multiple_of(self.cadence);
        if !periodic && !obs.is_final {
            return Ok(());
        }
        let (vx, vy) = apply_bcs_velocity(obs.state);
        let w = diagnose_w(&vx, &vy, obs.grid);
        let mut names = Vec::new();
        if periodic {
            names.push(format!("snap_{:08}.peq", obs.step));
        }
        if obs.is_final {
            names.push("final.peq".to_string());
        }
        for name in names {
            let path = self.dir.join(name);
            write_snapshot(obs.state, obs.p_s, &w, obs.grid, &path)?;
            self.written.push(path);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_smooth_state, Forcing, Params};
    use crate::geometry::Grid;
    use crate::io::{read_ledger, read_snapshot};
    use crate::timestepper::{integrate, StepControl};

    #[test]
    fn run_writes_ledger_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1.0, 1.0, 1.0, 6, 6, 6).unwrap();
        let p = Params::default();
        let f = Forcing::zero(&g);
        let s = make_smooth_state(&g, p.alpha, 5).scaled(0.05, 0.05);
        let q = ForcingNorms::compute(&f, &g);
        let path = dir.path().join("ledger.csv");
        let mut ledger = LedgerObserver::create(&path, 3, q, 0.1, Kappa::default(), 700.0).unwrap();
        let mut snaps = SnapshotObserver::new(dir.path(), 4);
        let control = StepControl::fixed(0.01, 0.001);
        let end = integrate(s, &p, &f, &g, &control, &mut [&mut ledger, &mut snaps]).unwrap();
        // Steps 0, 3, 6, 9 and the final step 10.
        let rows = read_ledger(&path).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows.iter().map(|r| r.norms).collect::<Vec<_>>(), ledger.rows());
        assert!(rows[0].certificate[0] >= rows[0].norms.v_sq + rows[0].norms.temp_sq);
        let names: Vec<String> = snaps.written().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["snap_00000000.peq", "snap_00000004.peq", "snap_00000008.peq", "final.peq"]);
        let fin = read_snapshot(&dir.path().join("final.peq"), Some(&g)).unwrap();
        assert_eq!(fin.state, end);
    }
}
