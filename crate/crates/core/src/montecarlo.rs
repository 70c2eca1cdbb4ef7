//! Deterministic parallel trial runner.
//!
//! Trials are grouped into fixed-size batches. Batches are evaluated in
//! parallel waves but accumulated strictly in batch order, and the stop rule
//! is only checked at batch boundaries, so the totals depend on the seed and
//! batch size alone, never on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment fallback for the worker count.
pub const THREADS_ENV: &str = "STBC_MUD_THREADS";

/// Integer tallies merged across trials; merge must be associative.
pub trait Tally: Default + Send {
    fn merge(&mut self, other: Self);
}

impl Tally for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl Tally for Vec<u64> {
    fn merge(&mut self, other: Self) {
        if self.len() < other.len() {
            self.resize(other.len(), 0);
        }
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// Symbol-error tally for one SNR point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCount {
    pub errors: u64,
    pub symbols: u64,
    /// Degenerate channel draws that were redrawn.
    pub redraws: u64,
}

impl Tally for ErrorCount {
    fn merge(&mut self, other: Self) {
        self.errors += other.errors;
        self.symbols += other.symbols;
        self.redraws += other.redraws;
    }
}

/// Worker count: explicit value, else `STBC_MUD_THREADS`, else the machine's
/// available parallelism.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .filter(|&n| n > 0)
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()?
                .trim()
                .parse()
                .ok()
                .filter(|&n: &usize| n > 0)
        })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub struct Runner {
    pool: rayon::ThreadPool,
    threads: usize,
    batch: u64,
}

/// Outcome of [`Runner::run_until`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome<T> {
    pub tally: T,
    pub trials: u64,
    /// False when the trial cap was hit before the stop rule fired.
    pub stopped_by_rule: bool,
}

impl Runner {
    pub fn new(threads: usize, batch: u64) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidInput("batch size must be positive".into()));
        }
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        Ok(Self {
            pool,
            threads,
            batch,
        })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn batch(&self) -> u64 {
        self.batch
    }

    fn run_batch<T: Tally>(&self, start: u64, end: u64, trial: &(impl Fn(u64) -> T + Sync)) -> T {
        let mut acc = T::default();
        for t in start..end {
            acc.merge(trial(t));
        }
        acc
    }

    /// Runs trials `0, 1, 2, ...` until `stop(&tally)` holds at a batch
    /// boundary or `max_trials` have run.
    pub fn run_until<T, F, S>(&self, max_trials: u64, trial: F, stop: S) -> RunOutcome<T>
    where
        T: Tally,
        F: Fn(u64) -> T + Sync,
        S: Fn(&T) -> bool,
    {
        let mut tally = T::default();
        let mut done = 0u64;
        let wave = self.threads as u64;
        while done < max_trials {
            let starts: Vec<u64> = (0..wave)
                .map(|k| done + k * self.batch)
                .take_while(|&s| s < max_trials)
                .collect();
            let results: Vec<(u64, T)> = self.pool.install(|| {
                starts
                    .par_iter()
                    .map(|&s| {
                        let end = (s + self.batch).min(max_trials);
                        (end, self.run_batch(s, end, &trial))
                    })
                    .collect()
            });
            for (end, part) in results {
                tally.merge(part);
                done = end;
                if stop(&tally) {
                    return RunOutcome {
                        tally,
                        trials: done,
                        stopped_by_rule: true,
                    };
                }
            }
        }
        RunOutcome {
            tally,
            trials: done,
            stopped_by_rule: false,
        }
    }

    /// Runs exactly `total` trials.
    pub fn run_fixed<T, F>(&self, total: u64, trial: F) -> T
    where
        T: Tally,
        F: Fn(u64) -> T + Sync,
    {
        self.run_until(total, trial, |_| false).tally
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::trial_rng;
    use rand::Rng;

    fn coin(t: u64) -> ErrorCount {
        let mut rng = trial_rng(9, 0, t);
        ErrorCount {
            errors: u64::from(rng.random_bool(0.01)),
            symbols: 1,
            redraws: 0,
        }
    }

    #[test]
    fn totals_do_not_depend_on_thread_count() {
        let reference = Runner::new(1, 1000)
            .unwrap()
            .run_until(2_000_000, coin, |c| c.errors >= 100);
        assert!(reference.stopped_by_rule);
        assert_eq!(reference.trials % 1000, 0);
        for threads in [2, 3, 4, 8] {
            let got = Runner::new(threads, 1000)
                .unwrap()
                .run_until(2_000_000, coin, |c| c.errors >= 100);
            assert_eq!(got, reference, "threads = {threads}");
        }
    }

    #[test]
    fn trial_cap_is_respected() {
        let out = Runner::new(4, 300)
            .unwrap()
            .run_until(1000, coin, |_| false);
        assert_eq!(out.trials, 1000);
        assert_eq!(out.tally.symbols, 1000);
        assert!(!out.stopped_by_rule);
    }

    #[test]
    fn fixed_runs_sum_vectors() {
        let r = Runner::new(3, 7).unwrap();
        let v: Vec<u64> = r.run_fixed(100, |t| vec![1, t % 2]);
        assert_eq!(v, vec![100, 50]);
    }

    #[test]
    fn explicit_threads_win() {
        assert_eq!(resolve_threads(Some(5)), 5);
        assert!(resolve_threads(None) >= 1);
    }
}
