//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it, or when the mode is set to [`Exec::Sequential`], items are
//! processed in order on the calling thread. Results are returned in input
//! order either way, so reports do not depend on scheduling.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

static MODE: AtomicU8 = AtomicU8::new(0);

/// Sets the process-wide execution mode.
pub fn set_mode(mode: Exec) {
    MODE.store(if mode == Exec::Sequential { 1 } else { 0 }, Ordering::Relaxed);
}

pub fn mode() -> Exec {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 0 {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Returns the first `Some` produced by `f` in input order; with the parallel
/// mode all items may be evaluated.
pub fn find_first<T, R, F>(items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).find_first(|r| r.is_some()).flatten();
        }
    }
    items.iter().find_map(f)
}
