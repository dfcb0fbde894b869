use rayon::prelude::*;

/// Evaluates `f` on partitions `0..count` and returns the results in
/// partition order. The partitioning never depends on `workers`, so any
/// reduction over the returned vector is identical for every worker count.
pub(crate) fn map_partitions<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}
