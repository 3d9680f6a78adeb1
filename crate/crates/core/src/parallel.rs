use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;

/// Default number of per-claim pipelines in flight.
pub const DEFAULT_FAN_OUT: usize = 4;

/// Maps `f` over `items` with at most `width` calls in flight, returning
/// results in input order regardless of scheduling.
pub fn bounded_map<T, R, F>(items: &[T], width: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if width <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..width.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
