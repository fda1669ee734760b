//! Cross-module invariants exercised through the public API.

use peq_core::energetics::{bound_certificate, compute_norms, ForcingNorms, Kappa, DEFAULT_EXPONENT_CAP};
use peq_core::fields::{make_smooth_state, Forcing, Params, State};
use peq_core::geometry::{DomainConstants, Grid};
use peq_core::io::{append_ledger_row, decode_snapshot, parse_config, read_ledger, read_snapshot, write_ledger_header, write_snapshot};
use peq_core::operators::{Field2, Field3};
use peq_core::timestepper::{integrate, Observation, Observer, StepControl};
use peq_core::Error;
use proptest::prelude::*;

fn params() -> Params {
    Params { re1: 8.0, re2: 2.0, rt1: 8.0, rt2: 1.0, f0: 1.0, beta: 0.3, alpha: 1.5 }
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Collects the norm record of every observed state.
#[derive(Default)]
struct Norms(Vec<peq_core::energetics::NormRecord>);

impl Observer for Norms {
    fn observe(&mut self, obs: &Observation<'_>) -> peq_core::Result<()> {
        self.0.push(compute_norms(obs.state, obs.grid, obs.params));
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn snapshot_roundtrip_is_bit_exact(nx in 4usize..7, ny in 4usize..7, nz in 4usize..6, seed in any::<u64>(), t in -1e3f64..1e3) {
        let g = Grid::new(1.5, 0.75, 0.4, nx, ny, nz).unwrap();
        let c = g.cells();
        let mut s = State::rest(&g);
        s.v.x = Field3::from_vec(nx, ny, nz, noise(c, seed));
        s.v.y = Field3::from_vec(nx, ny, nz, noise(c, seed ^ 1));
        s.temperature = Field3::from_vec(nx, ny, nz, noise(c, seed ^ 2));
        s.time = t;
        let p_s = Field2::from_vec(nx, ny, noise(g.columns(), seed ^ 3));
        let w = Field3::from_vec(nx, ny, nz, noise(c, seed ^ 4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.peq");
        write_snapshot(&s, &p_s, &w, &g, &path).unwrap();
        let back = read_snapshot(&path, Some(&g)).unwrap();
        prop_assert_eq!(&back.state, &s);
        prop_assert_eq!(&back.p_s, &p_s);
        prop_assert_eq!(&back.w, &w);
        prop_assert_eq!(back.state.time.to_bits(), t.to_bits());

        let bytes = std::fs::read(&path).unwrap();
        let cut = (seed as usize) % bytes.len();
        let truncated = matches!(decode_snapshot(&bytes[..cut], None), Err(Error::Truncated { .. }));
        prop_assert!(truncated, "cut at {} of {} bytes", cut, bytes.len());
        let other = Grid::new(1.5, 0.75, 0.4, nx + 1, ny, nz).unwrap();
        prop_assert!(decode_snapshot(&bytes, Some(&other)).is_err());
    }

    #[test]
    fn ledger_values_roundtrip_exactly(seed in 0u64..1000, rows in 0usize..5) {
        let g = Grid::new(1.0, 1.0, 1.0, 6, 6, 4).unwrap();
        let p = params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        write_ledger_header(&path).unwrap();
        let q = ForcingNorms::default();
        let mut written = Vec::new();
        for r in 0..rows {
            let mut s = make_smooth_state(&g, p.alpha, seed + r as u64).scaled(1.0 / 3.0, 7.0);
            s.time = r as f64 / 7.0;
            let n = compute_norms(&s, &g, &p);
            let cert = bound_certificate(n.t, &n, &q, &p, &g, 0.1, Kappa::default(), DEFAULT_EXPONENT_CAP).unwrap();
            append_ledger_row(&n, &cert, &path).unwrap();
            written.push(n);
        }
        let back = read_ledger(&path).unwrap();
        prop_assert_eq!(back.len(), rows);
        for (b, n) in back.iter().zip(&written) {
            prop_assert_eq!(&b.norms, n);
        }
    }

    #[test]
    fn config_text_roundtrips(nx in 4usize..64, re1 in 0.1f64..1e4, alpha in 0.01f64..100.0, seed in any::<u64>(), t_end in 0.0f64..10.0) {
        let text = format!("Nx = {nx}\nRe1 = {re1:e}\nalpha = {alpha:e}\nseed = {seed}\nt_end = {t_end:e}\nforcing = cosine_z\nforcing_amplitude = 0.5\n");
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.nx, nx);
        prop_assert_eq!(cfg.params.re1, re1);
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn split_is_orthogonal_per_record(seed in any::<u64>(), h in 0.2f64..2.0) {
        let g = Grid::new(1.0, 1.3, h, 8, 6, 5).unwrap();
        let s = make_smooth_state(&g, 1.0, seed);
        let n = compute_norms(&s, &g, &params());
        prop_assert!((n.v_sq - h * n.vbar_sq - n.vtilde_sq).abs() <= 1e-12 * n.v_sq);
    }

    #[test]
    fn certificates_grow_with_time_and_data(seed in 0u64..500, bump in 0usize..18, t in 0.0f64..0.5) {
        let g = Grid::new(1.0, 1.0, 0.5, 6, 6, 4).unwrap();
        let p = params();
        let init = compute_norms(&make_smooth_state(&g, p.alpha, seed).scaled(0.3, 0.3), &g, &p);
        let q = ForcingNorms { q_sq: 0.2, q_h1_sq: 1.0 };
        let c_m = DomainConstants::compute(&g).unwrap().c_m;
        let cert = |t: f64, n: &peq_core::energetics::NormRecord| {
            bound_certificate(t, n, &q, &p, &g, c_m, Kappa::default(), DEFAULT_EXPONENT_CAP).unwrap()
        };
        let base = cert(t, &init);
        let later = cert(t + 0.1, &init);
        let mut values = init.values();
        values[1 + bump] *= 1.5;
        let bigger = cert(t, &peq_core::energetics::NormRecord::from_values(&values).unwrap());
        for (a, b) in [(base.ln, later.ln), (base.ln, bigger.ln)] {
            for (&x, &y) in a.iter().zip(&b) {
                prop_assert!(y >= x || (x.is_infinite() && y.is_infinite()), "{} -> {}", x, y);
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let g = Grid::new(1.0, 1.0, 0.5, 8, 8, 6).unwrap();
    let p = params();
    let f = Forcing::zero(&g);
    let control = StepControl::adaptive(0.05, 0.01);
    let s0 = make_smooth_state(&g, p.alpha, 5).scaled(0.5, 0.5);
    let a = integrate(s0.clone(), &p, &f, &g, &control, &mut []).unwrap();
    let b = integrate(s0, &p, &f, &g, &control, &mut []).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unforced_temperature_energy_never_grows() {
    let g = Grid::new(1.0, 1.0, 0.5, 8, 8, 8).unwrap();
    let p = params();
    let mut norms = Norms::default();
    let s0 = make_smooth_state(&g, p.alpha, 11).scaled(0.5, 1.0);
    integrate(s0, &p, &Forcing::zero(&g), &g, &StepControl::adaptive(0.2, 0.01), &mut [&mut norms]).unwrap();
    assert!(norms.0.len() > 10);
    for w in norms.0.windows(2) {
        assert!(w[1].temp_sq <= w[0].temp_sq * (1.0 + 1e-13), "{} -> {}", w[0].temp_sq, w[1].temp_sq);
    }
}
