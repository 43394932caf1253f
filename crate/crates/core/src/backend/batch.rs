//! Bounded-concurrency batch driver with input-order results.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::BackendError;
use crate::error::PipelineError;

/// Run `stage` over every item with at most `max_in_flight` concurrent
/// invocations. Results come back in input order regardless of completion
/// order, and per-item failures are values in the output rather than an
/// abort of the batch.
pub fn run_stage_batch<T, R, F>(
    items: &[T],
    stage: F,
    max_in_flight: usize,
) -> Result<Vec<Result<R, BackendError>>, PipelineError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, BackendError> + Sync,
{
    if max_in_flight == 0 {
        return Err(PipelineError::InvalidConfig(
            "max_in_flight must be at least 1".into(),
        ));
    }
    let workers = max_in_flight.min(items.len());
    let next = AtomicUsize::new(0);
    let results = Mutex::new((0..items.len()).map(|_| None).collect::<Vec<_>>());
    if workers <= 1 {
        let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
        for (slot, item) in results.iter_mut().zip(items) {
            *slot = Some(stage(item));
        }
        return Ok(results.into_iter().map(|r| r.expect("slot filled")).collect());
    }
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= items.len() {
                    break;
                }
                let outcome = stage(&items[index]);
                results.lock().unwrap_or_else(|e| e.into_inner())[index] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(results
        .into_iter()
        .map(|r| r.expect("every index was claimed by exactly one worker"))
        .collect())
}
