//! Data-parallel map helpers.
//!
//! Grid sweeps in this crate (local models per energy, resonance scans per
//! parameter, trajectory ensembles) are embarrassingly parallel over
//! immutable inputs. [`map`] dispatches to `rayon` when the `parallel`
//! feature is enabled and to a sequential loop otherwise; [`map_seq`] is the
//! sequential implementation, always available so benchmarks can compare the
//! two on identical workloads. Both preserve input order.

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential map with the same signature as [`map`].
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}
