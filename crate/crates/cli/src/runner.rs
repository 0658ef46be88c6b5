//! Replicated scenario runs, their manifest, and reruns from it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use optilog_sim::{run_experiment, LatencySource, ScenarioSpec, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::Aggregate;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: ScenarioSpec,
    pub seed: u64,
    /// Per-replication simulation seeds, derived from `seed`.
    pub seeds: Vec<u64>,
    /// Output files, relative to the run directory.
    pub files: Vec<String>,
}

/// Replication seeds drawn from one master seed.
pub fn replication_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| rng.gen()).collect()
}

fn rep_name(i: usize) -> String {
    format!("rep-{i:03}")
}

/// Contents of one replication's files, in manifest order.
fn replicate(spec: &ScenarioSpec, seed: u64) -> Result<(Summary, Vec<u8>, String, Vec<u8>)> {
    let mut spec = spec.clone();
    spec.seed = seed;
    let report = run_experiment(&spec)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut log = Vec::new();
    report.log.write_jsonl(&mut log)?;
    let json = report.summary_json();
    Ok((report.summary, csv, json, log))
}

fn aggregate(summaries: &[Summary]) -> BTreeMap<&'static str, Aggregate> {
    let metric = |f: &dyn Fn(&Summary) -> Option<f64>| -> Aggregate {
        Aggregate::of(&summaries.iter().filter_map(f).collect::<Vec<_>>())
    };
    let mut out = BTreeMap::new();
    out.insert("mean_duration_us", metric(&|s| s.mean_duration_us));
    out.insert("committed_rounds", metric(&|s| Some(s.committed_rounds as f64)));
    out.insert("failed_rounds", metric(&|s| Some(s.failed_rounds as f64)));
    out.insert("reconfigurations", metric(&|s| Some(s.reconfigurations as f64)));
    out.insert("retained_correct", metric(&|s| Some(s.retained_correct as f64)));
    out.insert("final_u", metric(&|s| Some(s.final_u as f64)));
    out.insert("settled_at", metric(&|s| s.settled_at.map(|r| r as f64)));
    out
}

#[derive(Serialize)]
struct RunSummary<'a> {
    replications: usize,
    seed: u64,
    metrics: BTreeMap<&'static str, Aggregate>,
    per_replication: &'a [Summary],
}

/// Runs every replication and returns the file contents by name, the
/// manifest included.
pub fn render(spec: &ScenarioSpec, seed: u64, seeds: &[u64]) -> Result<BTreeMap<String, Vec<u8>>> {
    let results: Vec<_> = seeds.par_iter().map(|&s| replicate(spec, s)).collect::<Result<_>>()?;
    let mut files = BTreeMap::new();
    let mut summaries = Vec::with_capacity(results.len());
    for (i, (summary, csv, json, log)) in results.into_iter().enumerate() {
        let name = rep_name(i);
        files.insert(format!("{name}.csv"), csv);
        files.insert(format!("{name}.json"), json.into_bytes());
        files.insert(format!("{name}.log.jsonl"), log);
        summaries.push(summary);
    }
    let summary = RunSummary {
        replications: seeds.len(),
        seed,
        metrics: aggregate(&summaries),
        per_replication: &summaries,
    };
    files.insert(SUMMARY.into(), serde_json::to_string_pretty(&summary)?.into_bytes());
    let mut names: Vec<String> = files.keys().cloned().collect();
    names.push(MANIFEST.into());
    names.sort();
    let manifest = Manifest {
        scenario: spec.clone(),
        seed,
        seeds: seeds.to_vec(),
        files: names,
    };
    files.insert(MANIFEST.into(), serde_json::to_string_pretty(&manifest)?.into_bytes());
    Ok(files)
}

fn write_all(out: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, bytes) in files {
        let p = out.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Loads a scenario, runs `reps` replications and writes them to `out`.
pub fn cmd_run(scenario: &Path, reps: usize, out: &Path, seed: u64) -> Result<Manifest> {
    if reps == 0 {
        bail!("--reps must be at least 1");
    }
    let mut spec = ScenarioSpec::load(scenario)?;
    if let LatencySource::Csv(p) = &spec.latency {
        let abs = fs::canonicalize(p).with_context(|| format!("latency file {}", p.display()))?;
        spec.latency = LatencySource::Csv(abs);
    }
    let seeds = replication_seeds(seed, reps);
    let files = render(&spec, seed, &seeds)?;
    write_all(out, &files)?;
    Ok(serde_json::from_slice(&files[MANIFEST])?)
}

/// Files whose bytes differ between a rerun and the original directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RerunReport {
    pub out: PathBuf,
    pub mismatched: Vec<String>,
}

/// Reruns a manifest into `out` (the manifest's own directory when
/// absent) and compares against the files already there.
pub fn cmd_rerun(manifest: &Path, out: Option<&Path>) -> Result<RerunReport> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}:{}:{}: {e}", manifest.display(), e.line(), e.column()))?;
    let original = manifest.parent().unwrap_or(Path::new("."));
    let files = render(&m.scenario, m.seed, &m.seeds)?;
    let mut mismatched = Vec::new();
    for name in &m.files {
        let before = fs::read(original.join(name)).ok();
        if before.as_deref() != files.get(name).map(Vec::as_slice) {
            mismatched.push(name.clone());
        }
    }
    let out = out.unwrap_or(original).to_path_buf();
    if out != original {
        write_all(&out, &files)?;
    }
    Ok(RerunReport { out, mismatched })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = replication_seeds(3, 5);
        assert_eq!(a, replication_seeds(3, 5));
        assert_eq!(&a[..2], &replication_seeds(3, 2)[..]);
        let mut b = a.clone();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}
