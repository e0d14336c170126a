//! Threaded seed executor and the wall-clock / interrupt control.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use morltune_core::hpo::{SearchControl, SeedExecutor};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::CliError;

/// Runs per-seed jobs on a bounded thread pool; outputs keep seed order.
pub struct ParallelExecutor {
    pool: ThreadPool,
}

impl ParallelExecutor {
    pub fn new(threads: usize) -> Result<Self, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }
}

impl SeedExecutor for ParallelExecutor {
    fn map<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| seeds.par_iter().map(|&s| job(s)).collect())
    }
}

/// Wall clock started at construction plus a shared interrupt flag.
#[derive(Debug, Clone)]
pub struct RunControl {
    started: Instant,
    interrupted: Arc<AtomicBool>,
}

impl RunControl {
    pub fn new(interrupted: Arc<AtomicBool>) -> Self {
        Self {
            started: Instant::now(),
            interrupted,
        }
    }
}

impl SearchControl for RunControl {
    fn elapsed_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn interrupted(&self) -> bool {
        self.interrupted.load(Ordering::SeqCst)
    }
}

/// Flag set by Ctrl-C. The handler is installed once per process.
pub fn interrupt_flag() -> Arc<AtomicBool> {
    use std::sync::OnceLock;
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let handler_flag = Arc::clone(&flag);
        // A second handler (e.g. in tests) is harmless; the flag just stays unset.
        let _ = ctrlc::set_handler(move || handler_flag.store(true, Ordering::SeqCst));
        flag
    })
    .clone()
}
