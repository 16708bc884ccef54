//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature (on by default) row-partitioned kernels run on
//! the rayon pool. Without it every policy degrades to the sequential path.
//! Each output row is always computed by a single thread in a fixed order, so
//! results are bit-identical regardless of the policy or the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Work size (in output elements times inner length) below which `Exec::Auto`
/// stays sequential.
pub const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
    /// Parallel when the feature is enabled and the job is large enough.
    #[default]
    Auto,
}

impl Exec {
    /// Whether a job of `work` units should fan out under this policy.
    pub fn is_parallel(self, work: usize) -> bool {
        if !cfg!(feature = "parallel") {
            return false;
        }
        match self {
            Exec::Sequential => false,
            Exec::Parallel => true,
            Exec::Auto => work >= PAR_THRESHOLD,
        }
    }
}

/// Apply `f(row_index, row)` to every `row_len`-sized chunk of `out`.
pub fn for_each_row<T, F>(out: &mut [T], row_len: usize, exec: Exec, work: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if row_len == 0 || out.is_empty() {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel(work) {
        out.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = (exec, work);
    out.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

/// Map `f` over `items`, returning results in input order.
pub fn map_ordered<I, R, F>(items: Vec<I>, exec: Exec, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel(usize::MAX) {
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_kernel_matches_across_policies() {
        let mut a = vec![0u64; 64 * 8];
        let mut b = a.clone();
        let fill = |i: usize, row: &mut [u64]| {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (i * 31 + j) as u64;
            }
        };
        for_each_row(&mut a, 8, Exec::Sequential, 0, fill);
        for_each_row(&mut b, 8, Exec::Parallel, 0, fill);
        assert_eq!(a, b);
    }

    #[test]
    fn map_keeps_order() {
        let out = map_ordered((0..100).collect(), Exec::Parallel, |x: i32| x * 2);
        assert_eq!(out, (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }
}
