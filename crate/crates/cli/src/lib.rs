//! Experiment runner: replicated scenario runs, reconfiguration curves and
//! the candidate benchmark.

pub mod bench;
pub mod curve;
pub mod runner;
pub mod stats;

pub use bench::{candidate_bench, BenchRow};
pub use curve::{reconfig_curve, CurveSettings, Curves};
pub use runner::{cmd_rerun, cmd_run, Manifest, RerunReport};
pub use stats::{mean_std, Aggregate};

/// Environment variable capping worker threads.
pub const THREADS_VAR: &str = "OPTILOG_THREADS";

/// Worker pool sized by [`THREADS_VAR`], or rayon's default.
pub fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_VAR}={v:?} is not a thread count"))?;
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}
