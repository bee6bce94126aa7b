//! Experiment orchestration for the `lightcone` crate: config ingestion,
//! the run pipeline, verification suites and persisted artifacts.

pub mod config;
pub mod fit;
pub mod output;
pub mod pipeline;
pub mod verify;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use config::{ConfigError, ExperimentConfig};

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn dispatch<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every item dispatched")).collect()
}
