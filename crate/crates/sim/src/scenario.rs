//! Scenario files: system parameters, latency source, adversaries.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use optilog_core::config::AnnealingParams;
use optilog_core::{LatencyMatrix, ReplicaId, RoundNumber, SystemParams, Topology, DEFAULT_WINDOW};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geo::synth_latency_matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencySource {
    /// One synthetic city per replica.
    Synthetic { seed: u64 },
    /// Square CSV matrix in microseconds; relative paths resolve against
    /// the scenario file.
    Csv(PathBuf),
}

/// How configurations are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Candidates, proposals and the config monitor.
    #[default]
    Optilog,
    /// Random disjoint bins, one tree per bin, then a star.
    Kauri,
    /// Like `Kauri`, with each bin's tree arranged by annealing.
    KauriSa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Silent from `start_round` on.
    Crash,
    /// Outgoing messages slowed by `factor`.
    DelayAttack { factor: f64 },
    /// Proposals held back by `extra_us` while leading.
    ProposalDelay { extra_us: u64 },
    /// Accuses correct internal nodes of the current configuration.
    TargetedSuspicion,
    /// Each member accuses one random correct replica per round.
    FalseSuspicionFlood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    pub members: Vec<ReplicaId>,
    #[serde(default)]
    pub start_round: RoundNumber,
}

fn default_window() -> u64 {
    DEFAULT_WINDOW
}

fn default_pre_gst() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub f: usize,
    pub delta: f64,
    #[serde(default = "default_window")]
    pub window_w: u64,
    pub topology: Topology,
    #[serde(default)]
    pub mode: Mode,
    pub latency: LatencySource,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    #[serde(default)]
    pub annealing: AnnealingParams,
    pub rounds: u64,
    pub seed: u64,
    #[serde(default)]
    pub gst_round: RoundNumber,
    /// Jitter bound before GST.
    #[serde(default = "default_pre_gst")]
    pub pre_gst_delta: f64,
}

impl ScenarioSpec {
    /// Reads, parses and validates a scenario file. Errors carry
    /// `path:line:column`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            SimError::Scenario(m) => SimError::Scenario(format!("{}:{m}", path.display())),
            other => other,
        })
    }

    /// Parses scenario text; errors are prefixed with `line:column`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut s: ScenarioSpec = serde_json::from_str(text)
            .map_err(|e| SimError::Scenario(format!("{}:{}: {e}", e.line(), e.column())))?;
        if let LatencySource::Csv(p) = &s.latency {
            if p.is_relative() {
                s.latency = LatencySource::Csv(base.join(p));
            }
        }
        s.validate()
            .map_err(|(key, msg)| SimError::Scenario(format!("{}:1: {key}: {msg}", locate(text, key))))?;
        Ok(s)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let params = self.params().map_err(|e| ("f", e.to_string()))?;
        if self.rounds == 0 {
            return Err(("rounds", "must be positive".into()));
        }
        if self.pre_gst_delta.is_nan() || self.pre_gst_delta < 1.0 {
            return Err(("pre_gst_delta", "must be at least 1".into()));
        }
        if self.annealing.wall_budget_ms.is_some() {
            return Err(("wall_budget_ms", "wall-time budgets make runs irreproducible; use max_iterations".into()));
        }
        if self.annealing.max_iterations == Some(0) {
            return Err(("max_iterations", "must be positive".into()));
        }
        if !(self.annealing.cooling_rate > 0.0 && self.annealing.cooling_rate < 1.0) {
            return Err(("cooling_rate", "must lie in (0, 1)".into()));
        }
        if self.mode != Mode::Optilog && self.topology != Topology::Tree {
            return Err(("mode", "the bin baselines need the tree topology".into()));
        }
        let mut members = BTreeSet::new();
        for a in &self.adversaries {
            for &m in &a.members {
                if !params.contains(m) {
                    return Err(("members", format!("replica {} out of range", m.0)));
                }
                members.insert(m);
            }
            if let AdversaryKind::DelayAttack { factor } = a.kind {
                if factor.is_nan() || factor < 1.0 {
                    return Err(("factor", "must be at least 1".into()));
                }
            }
        }
        if members.len() > self.f {
            return Err((
                "adversaries",
                format!("{} adversarial replicas exceed f = {}", members.len(), self.f),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> optilog_core::Result<SystemParams> {
        SystemParams::new(self.n, self.f, self.delta, self.window_w)
    }

    pub fn latency_matrix(&self) -> Result<LatencyMatrix<u64>> {
        let m = match &self.latency {
            LatencySource::Synthetic { seed } => synth_latency_matrix(self.n, *seed),
            LatencySource::Csv(p) => {
                let file = std::fs::File::open(p)
                    .map_err(|e| SimError::Scenario(format!("{}: {e}", p.display())))?;
                LatencyMatrix::read_csv(file)?
            }
        };
        if m.n() != self.n {
            return Err(SimError::Scenario(format!("latency matrix has {} rows, n = {}", m.n(), self.n)));
        }
        Ok(m)
    }

    /// Every adversarial replica.
    pub fn faulty(&self) -> BTreeSet<ReplicaId> {
        self.adversaries.iter().flat_map(|a| a.members.iter().copied()).collect()
    }
}

/// Line of the first occurrence of `"key"`, or 1.
fn locate(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OK: &str = r#"{
  "n": 7, "f": 2, "delta": 1.2, "topology": "tree",
  "latency": {"synthetic": {"seed": 1}},
  "adversaries": [{"kind": "proposal_delay", "extra_us": 5000, "members": [3], "start_round": 4}],
  "rounds": 10, "seed": 9
}"#;

    #[test]
    fn parses_with_defaults() {
        let s = ScenarioSpec::parse(OK, Path::new(".")).unwrap();
        assert_eq!(s.window_w, DEFAULT_WINDOW);
        assert_eq!(s.mode, Mode::Optilog);
        assert_eq!(s.adversaries[0].kind, AdversaryKind::ProposalDelay { extra_us: 5000 });
        assert_eq!(s.faulty(), [ReplicaId(3)].into());
    }

    #[test]
    fn syntax_errors_point_at_the_line() {
        let bad = OK.replace("\"rounds\": 10", "\"rounds\": ten");
        let e = ScenarioSpec::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("5:14"), "{e}");
    }

    #[test]
    fn too_many_adversaries_are_rejected() {
        let bad = OK.replace("[3]", "[1, 2, 3]");
        let e = ScenarioSpec::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("4:1: adversaries"), "{e}");
    }

    #[test]
    fn wall_budgets_are_rejected() {
        let bad = OK.replace("\"rounds\"", "\"annealing\": {\"wall_budget_ms\": 10}, \"rounds\"");
        assert!(ScenarioSpec::parse(&bad, Path::new(".")).is_err());
    }
}
