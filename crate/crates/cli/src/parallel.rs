//! Replicate-level parallelism with deterministic output: each task owns its
//! index, results land in an index-addressed vector, and every reduction
//! downstream runs over that vector in index order, so the worker count
//! never changes a byte of output.

/// Maps `f` over `0..count` using up to `jobs` scoped threads.
pub fn parallel_map<T, F>(jobs: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(jobs);
    std::thread::scope(|scope| {
        for (worker, slice) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = worker * chunk;
                for (offset, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(base + offset));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_index_order_regardless_of_jobs() {
        let serial = parallel_map(1, 100, |i| i * i);
        let parallel = parallel_map(7, 100, |i| i * i);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn handles_empty_and_single() {
        assert_eq!(parallel_map(4, 0, |i| i), Vec::<usize>::new());
        assert_eq!(parallel_map(4, 1, |i| i + 1), vec![1]);
    }
}
