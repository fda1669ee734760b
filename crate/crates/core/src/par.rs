//! Row-parallel kernels.
//!
//! Every grid kernel in the crate writes one x-line ("row") of its output at a
//! time, and every reduction first produces one partial sum per row and then
//! adds the partials in row order. With the `parallel` feature the rows are
//! distributed over the rayon pool; without it they run in a plain loop. Both
//! paths produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Name of the compiled execution path, `"parallel"` or `"sequential"`.
#[cfg(feature = "parallel")]
pub const MODE: &str = "parallel";
#[cfg(not(feature = "parallel"))]
pub const MODE: &str = "sequential";

/// Rows handed to one rayon task at a time.
#[cfg(feature = "parallel")]
const MIN_ROWS_PER_TASK: usize = 16;

/// Calls `kernel(row_index, row)` for each `row_len`-sized chunk of `out`.
pub fn for_each_row<F>(out: &mut [f64], row_len: usize, kernel: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(row_len > 0 && out.len().is_multiple_of(row_len));
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(row_len)
            .with_min_len(MIN_ROWS_PER_TASK)
            .enumerate()
            .for_each(|(r, row)| kernel(r, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (r, row) in out.chunks_mut(row_len).enumerate() {
            kernel(r, row);
        }
    }
}

/// Deterministic sum of `partial(r)` over `0..n_rows`.
pub fn sum_rows<F>(n_rows: usize, partial: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..n_rows)
        .into_par_iter()
        .with_min_len(MIN_ROWS_PER_TASK)
        .map(&partial)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..n_rows).map(&partial).collect();
    partials.iter().sum()
}

/// Deterministic maximum of `partial(r)` over `0..n_rows` (0 for no rows).
pub fn max_rows<F>(n_rows: usize, partial: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..n_rows)
        .into_par_iter()
        .with_min_len(MIN_ROWS_PER_TASK)
        .map(&partial)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..n_rows).map(&partial).collect();
    partials.iter().fold(0.0, |a, &b| a.max(b))
}

/// Maps independent jobs, in parallel when the feature is enabled. Output order
/// matches input order.
pub fn map_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}
