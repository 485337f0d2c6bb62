//! Scoped-thread fan-out used by screening, stability selection, and the
//! benchmark harness. Results are collected by index, so the output order
//! (and therefore every downstream aggregate) is independent of `jobs`.

use alloc::vec::Vec;

/// Evaluates `f(0..count)` with up to `jobs` worker threads and returns the
/// results in index order. `jobs <= 1` runs inline.
pub fn map_indexed<T, F>(jobs: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let workers = jobs.min(count);
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut i = w;
                    while i < count {
                        out.push((i, f(i)));
                        i += workers;
                    }
                    out
                })
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("worker thread panicked") {
                slots[i] = Some(v);
            }
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential_in_order() {
        let seq = map_indexed(1, 17, |i| i * i);
        let par = map_indexed(4, 17, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[5], 25);
    }

    #[test]
    fn handles_empty_and_single() {
        assert_eq!(map_indexed(3, 0, |i| i), Vec::<usize>::new());
        assert_eq!(map_indexed(3, 1, |i| i + 1), alloc::vec![1]);
    }
}
