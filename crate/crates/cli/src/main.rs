use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use optilog_cli::{candidate_bench, cmd_rerun, cmd_run, mean_std, reconfig_curve, thread_pool, CurveSettings, Curves};
use rayon::prelude::*;
use serde::Serialize;

const RUN_COLUMNS: &str = "\
Writes into --out:
  rep-NNN.csv        one row per round: round, epoch, config, proposal_us,
                     commit_us, duration_us, predicted_us, score_us, committed,
                     failed, missing_votes, raised, retained, retained_correct,
                     candidates, u, reconfigured (\"inf\" marks an unbounded value)
  rep-NNN.json       per-replication summary
  rep-NNN.log.jsonl  the shared log, one entry per line
  summary.json       mean, std and 95% t-interval of each metric
  manifest.json      scenario, master seed and replication seeds";

const CURVE_COLUMNS: &str = "\
CSV columns: reconfig, opti_runs, opti_mean_us, opti_std_us, kauri_runs,
kauri_mean_us, kauri_std_us, kauri_sa_runs, kauri_sa_mean_us, kauri_sa_std_us.
Row 0 is the initial tree. A *_runs count below --reps means some curves had
already ended: a bin baseline after its last bin, the adaptive tree once the
adversaries can force no further change.
With --raw: rep, seed, system, reconfig, score_us.";

const BENCH_COLUMNS: &str = "\
CSV columns: n, graphs, mean_ms, std_ms, max_ms, min_candidates; sorted by n.";

#[derive(Parser)]
#[command(name = "optilog", version, about = "Simulator and experiment runner for latency-aware BFT role assignment")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file several times with derived seeds.
    #[command(after_help = RUN_COLUMNS)]
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rerun a manifest and compare with the files next to it.
    Rerun {
        manifest: PathBuf,
        /// Write the rerun here instead of only comparing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tree score after each reconfiguration forced by targeted suspicions.
    #[command(after_help = CURVE_COLUMNS)]
    ReconfigCurve {
        #[arg(long)]
        n: usize,
        /// Adversarial replicas.
        #[arg(long)]
        faults: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Reconfigurations to follow; twice the faults when absent.
        #[arg(long)]
        reconfigs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Annealing iterations per search.
        #[arg(long, default_value_t = 5_000)]
        iterations: u64,
        /// One row per replication and point instead of aggregates.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the candidate computation on random suspicion graphs.
    #[command(after_help = BENCH_COLUMNS)]
    CandidateBench {
        #[arg(long, value_delimiter = ',', default_value = "4,10,25,50,100")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        graphs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sink(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_rows<T: Serialize>(out: Option<&PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    reconfig: usize,
    opti_runs: usize,
    opti_mean_us: Option<f64>,
    opti_std_us: Option<f64>,
    kauri_runs: usize,
    kauri_mean_us: Option<f64>,
    kauri_std_us: Option<f64>,
    kauri_sa_runs: usize,
    kauri_sa_mean_us: Option<f64>,
    kauri_sa_std_us: Option<f64>,
}

#[derive(Serialize)]
struct RawRow<'a> {
    rep: usize,
    seed: u64,
    system: &'a str,
    reconfig: usize,
    score_us: u64,
}

fn point(curves: &[Curves], i: usize, pick: fn(&Curves) -> &Vec<u64>) -> (usize, Option<f64>, Option<f64>) {
    let xs: Vec<f64> = curves.iter().filter_map(|c| pick(c).get(i)).map(|&v| v as f64).collect();
    if xs.is_empty() {
        return (0, None, None);
    }
    let (m, s) = mean_std(&xs);
    (xs.len(), Some(m), Some(s))
}

fn curve_rows(curves: &[Curves], reconfigs: usize) -> Vec<CurveRow> {
    (0..=reconfigs)
        .map(|i| {
            let o = point(curves, i, |c| &c.opti);
            let k = point(curves, i, |c| &c.kauri);
            let ks = point(curves, i, |c| &c.kauri_sa);
            CurveRow {
                reconfig: i,
                opti_runs: o.0,
                opti_mean_us: o.1,
                opti_std_us: o.2,
                kauri_runs: k.0,
                kauri_mean_us: k.1,
                kauri_std_us: k.2,
                kauri_sa_runs: ks.0,
                kauri_sa_mean_us: ks.1,
                kauri_sa_std_us: ks.2,
            }
        })
        .collect()
}

fn raw_rows(curves: &[Curves]) -> Vec<RawRow<'static>> {
    let mut rows = Vec::new();
    for (rep, c) in curves.iter().enumerate() {
        for (system, v) in [("opti", &c.opti), ("kauri", &c.kauri), ("kauri_sa", &c.kauri_sa)] {
            for (reconfig, &score_us) in v.iter().enumerate() {
                rows.push(RawRow {
                    rep,
                    seed: c.seed,
                    system,
                    reconfig,
                    score_us,
                });
            }
        }
    }
    rows
}

fn run(cli: Cli) -> Result<()> {
    let pool = thread_pool()?;
    match cli.cmd {
        Cmd::Run { scenario, reps, out, seed } => {
            let m = pool.install(|| cmd_run(&scenario, reps, &out, seed))?;
            eprintln!("wrote {} files to {}", m.files.len(), out.display());
        }
        Cmd::Rerun { manifest, out } => {
            let r = pool.install(|| cmd_rerun(&manifest, out.as_deref()))?;
            if !r.mismatched.is_empty() {
                bail!("rerun differs in {}", r.mismatched.join(", "));
            }
            eprintln!("rerun identical ({})", r.out.display());
        }
        Cmd::ReconfigCurve {
            n,
            faults,
            reps,
            reconfigs,
            seed,
            iterations,
            raw,
            out,
        } => {
            if reps == 0 {
                bail!("--reps must be at least 1");
            }
            let reconfigs = reconfigs.unwrap_or(2 * faults);
            let mut settings = CurveSettings::new(n, faults, reconfigs);
            settings.annealing.max_iterations = Some(iterations);
            settings.params()?;
            let seeds = optilog_cli::runner::replication_seeds(seed, reps);
            let curves: Vec<Curves> = pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&s| reconfig_curve(&settings, s))
                    .collect::<optilog_core::Result<_>>()
            })?;
            if raw {
                write_rows(out.as_ref(), &raw_rows(&curves))?;
            } else {
                write_rows(out.as_ref(), &curve_rows(&curves, reconfigs))?;
            }
        }
        Cmd::CandidateBench {
            sizes,
            graphs,
            seed,
            out,
        } => {
            if graphs == 0 {
                bail!("--graphs must be at least 1");
            }
            write_rows(out.as_ref(), &candidate_bench(&sizes, graphs, seed))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
