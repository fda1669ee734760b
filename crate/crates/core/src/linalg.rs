//! Matrix-free conjugate gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Stop when `||b - A x|| <= tolerance * ||b||`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Project iterates and residuals onto the mean-zero subspace
    /// (for operators whose kernel is the constants).
    pub remove_mean: bool,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subtract_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A` given as
/// `apply(x, out)`.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgSolution>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut rhs = b.to_vec();
    if opts.remove_mean {
        subtract_mean(&mut rhs);
    }
    let b_norm = dot(&rhs, &rhs).sqrt();
    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    if opts.remove_mean {
        subtract_mean(&mut x);
    }
    if b_norm == 0.0 {
        return Ok(CgSolution {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut ap = vec![0.0; n];
    apply(&x, &mut ap);
    let mut r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    if opts.remove_mean {
        subtract_mean(&mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = opts.tolerance * b_norm;

    for it in 0..opts.max_iterations {
        if rr.sqrt() <= target {
            return Ok(CgSolution {
                solution: x,
                iterations: it,
                relative_residual: rr.sqrt() / b_norm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.remove_mean {
            subtract_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }

    // Recompute the true residual before reporting.
    apply(&x, &mut ap);
    let mut res: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    if opts.remove_mean {
        subtract_mean(&mut res);
    }
    let rel = dot(&res, &res).sqrt() / b_norm;
    if rel <= opts.tolerance {
        return Ok(CgSolution {
            solution: x,
            iterations: opts.max_iterations,
            relative_residual: rel,
        });
    }
    Err(Error::NoConvergence {
        solver: "conjugate gradient",
        iterations: opts.max_iterations,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_identity() {
        let b = [1.0, 2.0, 3.0];
        let opts = CgOptions { tolerance: 1e-12, max_iterations: 10, remove_mean: false };
        let s = conjugate_gradient(|x, o| o.copy_from_slice(x), &b, None, &opts).unwrap();
        for (x, b) in s.solution.iter().zip(&b) {
            assert!((x - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_1d_neumann() {
        // -u'' with reflecting ends; kernel = constants.
        let n = 20;
        let apply = |x: &[f64], o: &mut [f64]| {
            for i in 0..n {
                let l = if i == 0 { x[0] } else { x[i - 1] };
                let r = if i == n - 1 { x[n - 1] } else { x[i + 1] };
                o[i] = 2.0 * x[i] - l - r;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * std::f64::consts::PI / n as f64).cos()).collect();
        let opts = CgOptions { tolerance: 1e-12, max_iterations: 200, remove_mean: true };
        let s = conjugate_gradient(apply, &b, None, &opts).unwrap();
        let mean: f64 = s.solution.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
        let mut o = vec![0.0; n];
        apply(&s.solution, &mut o);
        let err = o.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn reports_iteration_cap() {
        let n = 50;
        let apply = |x: &[f64], o: &mut [f64]| {
            for i in 0..n {
                o[i] = (i + 1) as f64 * x[i];
            }
        };
        let b = vec![1.0; n];
        let opts = CgOptions { tolerance: 1e-14, max_iterations: 2, remove_mean: false };
        match conjugate_gradient(apply, &b, None, &opts) {
            Err(Error::NoConvergence { residual, .. }) => assert!(residual > 1e-14),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
