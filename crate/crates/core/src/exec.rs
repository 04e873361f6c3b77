//! Choice between sequential and rayon-backed per-cell evaluation.
//!
//! Every per-cell kernel in the crate writes each output slot from its own
//! input stencil only, so both strategies produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    /// Parallel above [`Exec::AUTO_THRESHOLD`] items, sequential otherwise.
    #[default]
    Auto,
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    Parallel,
}

impl Exec {
    pub const AUTO_THRESHOLD: usize = 1024;

    pub fn is_parallel(self, len: usize) -> bool {
        if !cfg!(feature = "parallel") {
            return false;
        }
        match self {
            Exec::Auto => len >= Self::AUTO_THRESHOLD,
            Exec::Sequential => false,
            Exec::Parallel => true,
        }
    }

    /// Fills `out[i] = f(i)`.
    pub fn fill<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel(out.len()) {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }

    /// Collects `f(i)` for `i in 0..len`, preserving order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel(len) {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }
}

/// Maps `f` over `items`, in parallel when the feature is enabled. Used for
/// independent runs (sweeps) and sampled certification.
pub fn par_map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
