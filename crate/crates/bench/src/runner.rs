//! Trial-level parallelism. Every task derives its randomness from
//! `(seed, trial)` alone and results come back in task order, so outputs do
//! not depend on the thread count.

use rayon::prelude::*;

use crate::error::{BenchError, Result};

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| BenchError::Config(format!("could not start {threads} threads: {e}")))?;
        Ok(Runner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), ..., f(n - 1)`, in order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
