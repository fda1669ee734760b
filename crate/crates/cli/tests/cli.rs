use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use peq_core::io::{parse_config, read_ledger, read_snapshot};

const DECAY: &str = "\
Nx = 8
Ny = 8
Nz = 6
h = 0.5
Re1 = 10
Re2 = 1
Rt1 = 10
Rt2 = 1
alpha = 2
forcing = zero
init = smooth
seed = 4
velocity_amplitude = 0.2
temperature_amplitude = 0.3
t_end = 0.2
ledger_cadence = 2
snapshot_cadence = 10
";

fn peq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peq")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Runs the decay configuration into `dir/run` and returns (config path, run dir).
fn decay_run(dir: &Path) -> (String, String) {
    let cfg = write(dir, "decay.cfg", DECAY);
    let out_dir = dir.join("run");
    let out = peq(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (cfg, out_dir.to_str().unwrap().to_string())
}

#[test]
fn run_writes_ledger_snapshots_and_config_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, run) = decay_run(tmp.path());
    let run = Path::new(&run);
    let rows = read_ledger(&run.join("ledger.csv")).unwrap();
    assert!(rows.len() >= 10);
    assert_eq!(rows[0].norms.t, 0.0);
    assert!((rows.last().unwrap().norms.t - 0.2).abs() < 1e-12);

    let copy = parse_config(&fs::read_to_string(run.join("config.txt")).unwrap()).unwrap();
    assert_eq!(copy, parse_config(DECAY).unwrap());
    let grid = copy.grid().unwrap();
    let last = read_snapshot(&run.join("final.peq"), Some(&grid)).unwrap();
    assert!((last.state.time - 0.2).abs() < 1e-12);
    assert!(run.join("snap_00000000.peq").exists());
}

#[test]
fn run_is_reproducible_from_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ra) = decay_run(a.path());
    let (_, rb) = decay_run(b.path());
    let la = fs::read(Path::new(&ra).join("ledger.csv")).unwrap();
    let lb = fs::read(Path::new(&rb).join("ledger.csv")).unwrap();
    assert_eq!(la, lb);
}

#[test]
fn certify_decay_ledger_passes_temperature_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, run) = decay_run(tmp.path());
    let ledger = format!("{run}/ledger.csv");
    let csv = tmp.path().join("report.csv");
    let out = peq(&["certify", "--ledger", &ledger, "--config", &cfg, "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let table = stdout(&out);
    let row = table.lines().find(|l| l.starts_with("temp_decay ")).expect("temp_decay row");
    assert!(row.contains(" pass "), "{row}");
    let rows = fs::read_to_string(csv).unwrap();
    assert!(rows.lines().any(|l| l.starts_with("temp_decay,quantitative,true,")));
}

#[test]
fn certify_flags_violated_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, run) = decay_run(tmp.path());
    // Tiny multipliers turn the qualitative bounds into violations.
    let strict = write(tmp.path(), "strict.cfg", &format!("{DECAY}kappa = 1e-30,1e-30,1e-30,1e-30,1e-30\n"));
    let out = peq(&["certify", "--ledger", &format!("{run}/ledger.csv"), "--config", &strict]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
    // Calibrating on the ledger itself restores them.
    let out = peq(&["certify", "--ledger", &format!("{run}/ledger.csv"), "--config", &strict, "--calibrate"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("calibrated kappa = "));
}

#[test]
fn verify_oracle_prints_agreement_table() {
    let out = peq(&["verify", "oracle", "--n", "4"]);
    assert_eq!(code(&out), 0);
    let table = stdout(&out);
    assert!(table.starts_with("oracle on 4x4x4"));
    assert!(table.lines().skip(2).all(|l| l.contains(" pass ")), "{table}");
}

#[test]
fn verify_twin_runs_both_perturbation_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "twin.cfg",
        "Nx = 8\nNy = 8\nNz = 8\nRe1 = 20\nRe2 = 2\nRt1 = 20\nRt2 = 2\nforcing = cosine\nforcing_amplitude = 2\n\
         velocity_amplitude = 1\ntemperature_amplitude = 1\nt_end = 0.2\ndt = 0.002\n",
    );
    let csv = tmp.path().join("twin.csv");
    let out = peq(&["verify", "twin", "--config", &cfg, "--eps", "1e-4", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("eps=")).count(), 2);
    let series = fs::read_to_string(csv).unwrap();
    assert_eq!(series.lines().next(), Some("t,delta,A,log_ratio,envelope"));
    assert_eq!(series.lines().count(), 102);
}

#[test]
fn plot_writes_png_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, run) = decay_run(tmp.path());
    let png = tmp.path().join("png");
    let out = peq(&["plot", "--ledger", &format!("{run}/ledger.csv"), "--out", png.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["energy_k1.png", "grad_vbar_k2.png", "temp_h1_kt.png", "temperature_decay.png"] {
        let bytes = fs::read(png.join(name)).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n", "{name}");
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["run", "--config"],
        &["run", "--config", "x.cfg", "--frobnicate"],
        &["verify"],
        &["verify", "mms", "--levels", "2"],
        &["verify", "twin", "--config", "x.cfg", "--eps", "-1"],
        &["run", "--config", "/nonexistent/peq.cfg", "--out", "/tmp"],
    ] {
        let out = peq(args);
        assert_eq!(code(&out), 2, "{args:?}");
    }
    let out = peq(&["bogus"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.cfg", "Re1 = -1\n");
    let out = peq(&["run", "--config", &bad, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Re1"));
    let typo = write(tmp.path(), "typo.cfg", "Re_1 = 5\n");
    let out = peq(&["run", "--config", &typo, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let missing_out = write(tmp.path(), "noout.cfg", "t_end = 0.01\n");
    assert_eq!(code(&peq(&["run", "--config", &missing_out])), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(peq_cli::cli_main(["peq", "--help"]), 0);
    assert_eq!(peq_cli::cli_main(["peq", "nope"]), 2);
}
