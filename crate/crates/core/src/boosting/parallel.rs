//! Fan-out of independent per-learner work over the available cores.
//!
//! Items are split into contiguous runs, one per worker, and results come
//! back in input order, so output is identical to a sequential loop.

use std::sync::OnceLock;
use std::thread;

/// Worker count: `SGBM_THREADS` if set to a positive integer, otherwise
/// the number of available cores.
pub fn worker_count() -> usize {
    static WORKERS: OnceLock<usize> = OnceLock::new();
    *WORKERS.get_or_init(|| {
        std::env::var("SGBM_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
    })
}

fn run_length(len: usize, workers: usize) -> usize {
    len.div_ceil(workers.min(len).max(1))
}

/// `items.iter().map(f).collect()`, spread over the worker threads.
pub(crate) fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    par_map_on(worker_count(), items, f)
}

fn par_map_on<T, R>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(run_length(items.len(), workers))
            .map(|run| scope.spawn(move || run.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("learner worker panicked"))
            .collect()
    })
}

/// `items.iter_mut().map(f).collect()`, spread over the worker threads.
pub(crate) fn par_map_mut<T, R>(items: &mut [T], f: impl Fn(&mut T) -> R + Sync) -> Vec<R>
where
    T: Send,
    R: Send,
{
    par_map_mut_on(worker_count(), items, f)
}

fn par_map_mut_on<T, R>(workers: usize, items: &mut [T], f: impl Fn(&mut T) -> R + Sync) -> Vec<R>
where
    T: Send,
    R: Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter_mut().map(f).collect();
    }
    let f = &f;
    let len = items.len();
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks_mut(run_length(len, workers))
            .map(|run| scope.spawn(move || run.iter_mut().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("learner worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<u64> = (0..37).collect();
        for workers in [1, 3, 4, 64] {
            let out = par_map_on(workers, &v, |x| x * 3);
            assert_eq!(out, v.iter().map(|x| x * 3).collect::<Vec<_>>());
            let mut w = v.clone();
            let out = par_map_mut_on(workers, &mut w, |x| {
                *x += 1;
                *x
            });
            assert_eq!(out, (1..38).collect::<Vec<_>>());
        }
        assert_eq!(run_length(10, 4), 3);
        assert_eq!(run_length(3, 8), 1);
    }
}
