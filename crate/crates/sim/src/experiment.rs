//! The reconfiguration loop: one view per round over a shared log.

use std::collections::BTreeSet;
use std::io::Write;

use optilog_core::config::{kauri_trees, sa_search, score, Basis, ConfigProposal, Decision};
use optilog_core::pbft::pbft_timeouts;
use optilog_core::suspicion::{reciprocate, Suspicion, SuspicionKind};
use optilog_core::tree::{tree_timeouts, TreeConfig};
use optilog_core::{
    Configuration, LatencyMatrix, LatencyVector, LogPayload, MonitorSet, ReplicaId, RoundNumber, ScoreContext,
    SharedLog, Slack, StarConfig, SystemParams, TimeoutTable, Topology,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::adversary::Adversaries;
use crate::baseline::{baseline_score, kauri_sa_trees};
use crate::error::Result;
use crate::round::{run_round, Previous, RoundSetup};
use crate::scenario::{Mode, ScenarioSpec};
use crate::world::World;

fn inf<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if *v == u64::MAX {
        s.serialize_str("inf")
    } else {
        s.serialize_u64(*v)
    }
}

/// One CSV row per round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: u64,
    pub epoch: u64,
    pub config: String,
    pub proposal_us: u64,
    pub commit_us: Option<u64>,
    pub duration_us: Option<u64>,
    /// Expected round duration the sensors used.
    #[serde(serialize_with = "inf")]
    pub predicted_us: u64,
    #[serde(serialize_with = "inf")]
    pub score_us: u64,
    pub committed: bool,
    pub failed: bool,
    pub missing_votes: usize,
    pub raised: usize,
    /// Suspicions kept by the filter that closed the previous view.
    pub retained: usize,
    /// Of those, suspicions between two correct replicas.
    pub retained_correct: usize,
    pub candidates: usize,
    pub u: usize,
    pub reconfigured: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Initial,
    /// Roles left the candidate set.
    Invalid,
    /// The previous round missed its deadline.
    Failure,
    /// Bins exhausted; star from now on.
    StarFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconfigEvent {
    pub round: u64,
    pub epoch: u64,
    pub cause: Cause,
    pub from: Option<String>,
    pub to: String,
    #[serde(serialize_with = "inf")]
    pub score_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub f: usize,
    pub topology: Topology,
    pub mode: Mode,
    pub seed: u64,
    pub rounds: u64,
    pub committed_rounds: u64,
    pub failed_rounds: u64,
    /// Installs after the initial one.
    pub reconfigurations: u64,
    pub events: Vec<ReconfigEvent>,
    pub final_config: Option<String>,
    pub final_candidates: Vec<ReplicaId>,
    pub final_u: usize,
    pub faulty: Vec<ReplicaId>,
    pub mean_duration_us: Option<f64>,
    pub retained_correct: u64,
    /// First round whose logged slow suspicions accuse an adversary.
    pub first_accusation_of_faulty: Option<u64>,
    /// First round from which every round commits without reconfiguring.
    pub settled_at: Option<u64>,
    pub log_entries: usize,
    pub skipped_entries: u64,
    pub rejected_proposals: u64,
    pub failed_searches: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<RoundRow>,
    pub summary: Summary,
    pub log: SharedLog,
    pub monitor: MonitorSet,
    pub world: World,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Seed for one replica's search in one round.
fn search_seed(seed: u64, round: RoundNumber, author: ReplicaId) -> u64 {
    seed.rotate_left(17) ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (author.0 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// How the bin baselines walk through their trees.
struct Bins {
    trees: Vec<TreeConfig>,
    next: usize,
    fallback: StarConfig,
}

struct Run<'a> {
    spec: &'a ScenarioSpec,
    params: SystemParams,
    adv: Adversaries,
    log: SharedLog,
    mon: MonitorSet,
    epoch: u64,
    current: Option<Configuration>,
    events: Vec<ReconfigEvent>,
    failed_searches: u64,
}

impl Run<'_> {
    fn commit(&mut self, payload: LogPayload, view: RoundNumber) {
        let e = self.log.append(payload, view).clone();
        self.mon.apply(&e);
    }

    fn correct(&self) -> impl Iterator<Item = ReplicaId> + '_ {
        self.params.replicas().filter(|r| !self.adv.is_faulty(*r))
    }

    fn log_vectors(&mut self, r: RoundNumber, actual: &LatencyMatrix<u64>) {
        let n = self.params.n;
        let authors: Vec<ReplicaId> = if r == 0 {
            self.params.replicas().collect()
        } else {
            (0..n).map(|i| ReplicaId(((r as usize + i) % n) as u32)).take(n).collect()
        };
        for a in authors {
            if self.adv.silent(a, r) {
                continue;
            }
            let row = actual.rows()[a.index()].clone();
            self.commit(LogPayload::LatencyVector(LatencyVector::new(a, row)), r);
            if r > 0 {
                break;
            }
        }
    }

    /// Answers to the suspicions retained when the previous view closed.
    fn reciprocate(&mut self, r: RoundNumber, seen: &mut Option<u64>) -> (usize, usize) {
        let (kept, view) = self.mon.retained();
        if kept.is_empty() || *seen == Some(view) {
            return (0, 0);
        }
        *seen = Some(view);
        let kept: Vec<Suspicion> = kept.to_vec();
        let between_correct = kept
            .iter()
            .filter(|s| !self.adv.is_faulty(s.accuser) && !self.adv.is_faulty(s.accused))
            .count();
        for s in &kept {
            if !self.adv.responds(s.accused, r) {
                continue;
            }
            if let Some(reply) = reciprocate(s, s.accused, true) {
                self.commit(LogPayload::Suspicion(reply), r);
            }
        }
        (kept.len(), between_correct)
    }

    fn propose(&mut self, r: RoundNumber) {
        let absent = self.mon.absent();
        let (cand, u) = self.mon.candidates();
        let basis: Basis = self.mon.basis();
        let authors: Vec<ReplicaId> = self
            .correct()
            .filter(|a| !absent.contains(a))
            .take(self.params.f + 1)
            .collect();
        let mut proposals = Vec::new();
        {
            let ctx = self.mon.score_context(&absent, u);
            for a in authors {
                let seed = search_seed(self.spec.seed, r, a);
                match sa_search(self.spec.topology, self.params.n, &cand, |c| score(c, &ctx), &self.spec.annealing, seed) {
                    Ok(out) => proposals.push(ConfigProposal {
                        author: a,
                        config: out.config,
                        claimed_score: out.score,
                        basis,
                    }),
                    Err(_) => self.failed_searches += 1,
                }
            }
        }
        for p in proposals {
            self.commit(LogPayload::ConfigProposal(p), r);
        }
    }

    fn install(&mut self, r: RoundNumber, c: Configuration, cause: Cause, score_us: u64) {
        self.epoch += 1;
        self.events.push(ReconfigEvent {
            round: r,
            epoch: self.epoch,
            cause,
            from: self.current.as_ref().map(|c| c.label()),
            to: c.label(),
            score_us,
        });
        self.current = Some(c);
    }
}

/// Runs a scenario to completion. Deterministic in the scenario.
pub fn run_experiment(spec: &ScenarioSpec) -> Result<ExperimentReport> {
    let params = spec.params()?;
    let actual = spec.latency_matrix()?;
    let mut world = World::new(actual.clone(), params.slack(), spec.seed);
    world.gst_round = spec.gst_round;
    world.pre_gst = Slack::from_delta(spec.pre_gst_delta);
    let adv = Adversaries::new(spec.adversaries.clone());
    let mut run = Run {
        spec,
        params: params.clone(),
        adv,
        log: SharedLog::new(),
        mon: MonitorSet::new(&params, spec.topology),
        epoch: 0,
        current: None,
        events: Vec::new(),
        failed_searches: 0,
    };
    let mut acc_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xACC0_5E5E);
    let mut bins = match spec.mode {
        Mode::Optilog => None,
        _ => Some(bins_for(spec, &params, &actual)?),
    };
    let mut rows = Vec::with_capacity(spec.rounds as usize);
    let mut now = 0;
    let mut previous: Option<Previous> = None;
    let mut prev_failed = false;
    let mut seen = None;
    let mut first_accusation = None;

    for r in 0..spec.rounds {
        run.log_vectors(r, &actual);
        let (retained, retained_correct) = run.reciprocate(r, &mut seen);

        let before = run.epoch;
        match &mut bins {
            None => {
                let valid = run.mon.config().current_valid();
                if !valid || prev_failed {
                    run.propose(r);
                }
                let cause = if run.current.is_none() {
                    Cause::Initial
                } else if !valid {
                    Cause::Invalid
                } else {
                    Cause::Failure
                };
                for ev in run.mon.take_events() {
                    if let Decision::Reconfigure(c) = ev.decision {
                        let s = score_now(&run.mon, &c);
                        run.install(r, c, cause, s);
                    }
                }
            }
            Some(b) => {
                if run.current.is_none() || prev_failed {
                    let (c, cause) = match b.trees.get(b.next) {
                        Some(t) => {
                            b.next += 1;
                            let cause = if run.current.is_none() { Cause::Initial } else { Cause::Failure };
                            (Configuration::Tree(t.clone()), cause)
                        }
                        None => (Configuration::Star(b.fallback.clone()), Cause::StarFallback),
                    };
                    if run.current.as_ref() != Some(&c) {
                        let s = baseline_score(run.mon.latency(), &params, &c);
                        run.install(r, c, cause, s);
                    }
                }
            }
        }
        let reconfigured = run.epoch != before && before != 0;

        let Some(config) = run.current.clone() else {
            rows.push(RoundRow {
                round: r,
                epoch: run.epoch,
                config: String::new(),
                proposal_us: now,
                commit_us: None,
                duration_us: None,
                predicted_us: u64::MAX,
                score_us: u64::MAX,
                committed: false,
                failed: true,
                missing_votes: params.n,
                raised: 0,
                retained,
                retained_correct,
                candidates: run.mon.candidates().0.len(),
                u: run.mon.candidates().1,
                reconfigured,
            });
            prev_failed = true;
            continue;
        };

        let baseline = bins.is_some();
        let absent = if baseline { BTreeSet::new() } else { run.mon.absent() };
        let (cand, u) = run.mon.candidates();
        let mut ctx = ScoreContext::new(run.mon.latency(), params.n, params.f, u, &absent);
        ctx.provision_all_faults = baseline;
        let timeouts: TimeoutTable<u64> = match &config {
            Configuration::Tree(t) => tree_timeouts(t, run.mon.latency(), ctx.k(), &absent),
            Configuration::Star(s) => pbft_timeouts(s, run.mon.latency(), ctx.q(), &absent),
        };
        let score_us = score(&config, &ctx);
        let k = ctx.k();
        let allowance = ctx.extra();
        let trace = run_round(&RoundSetup {
            world: &world,
            config: &config,
            timeouts: &timeouts,
            adversaries: &run.adv,
            quorum: params.q(),
            round: r,
            now,
            previous,
        });
        let missing = k.saturating_sub(trace.votes_at_deadline);
        let failed = missing > allowance;

        let mut logged: Vec<Suspicion> = trace.suspicions_raised.clone();
        logged.extend(run.adv.accusations(r, &config, &mut acc_rng));
        if first_accusation.is_none()
            && logged
                .iter()
                .any(|s| s.kind == SuspicionKind::Slow && run.adv.is_faulty(s.accused))
        {
            first_accusation = Some(r);
        }
        for s in &logged {
            run.commit(LogPayload::Suspicion(*s), r);
        }

        rows.push(RoundRow {
            round: r,
            epoch: run.epoch,
            config: config.label(),
            proposal_us: trace.proposal_timestamp,
            commit_us: trace.commit_time,
            duration_us: trace.commit_time.map(|c| c - trace.proposal_timestamp),
            predicted_us: timeouts.round_duration,
            score_us,
            committed: trace.committed,
            failed,
            missing_votes: missing,
            raised: trace.suspicions_raised.len(),
            retained,
            retained_correct,
            candidates: cand.len(),
            u,
            reconfigured,
        });
        previous = trace.committed.then_some(Previous {
            leader: trace.leader,
            timestamp: trace.proposal_timestamp,
            duration: timeouts.round_duration,
        });
        prev_failed = failed;
        now = trace.end;
    }

    let summary = summarize(spec, &run, &rows, first_accusation);
    Ok(ExperimentReport {
        rows,
        summary,
        log: run.log,
        monitor: run.mon,
        world,
    })
}

fn score_now(mon: &MonitorSet, c: &Configuration) -> u64 {
    let absent = mon.absent();
    let (_, u) = mon.candidates();
    score(c, &mon.score_context(&absent, u))
}

fn bins_for(spec: &ScenarioSpec, params: &SystemParams, lat: &LatencyMatrix<u64>) -> Result<Bins> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xB1A5_0B1A);
    let trees = match spec.mode {
        Mode::KauriSa => kauri_sa_trees(params, lat, &spec.annealing, &mut rng)?
            .into_iter()
            .map(|(t, _)| t)
            .collect(),
        _ => kauri_trees(params, &mut rng)?,
    };
    let leader = trees.first().map_or(ReplicaId(0), |t| t.root);
    Ok(Bins {
        trees,
        next: 0,
        fallback: StarConfig::new(leader, params.n),
    })
}

fn summarize(spec: &ScenarioSpec, run: &Run<'_>, rows: &[RoundRow], first_accusation: Option<u64>) -> Summary {
    let durations: Vec<u64> = rows.iter().filter_map(|r| r.duration_us).collect();
    let settled_at = match rows.iter().rposition(|r| r.failed || r.reconfigured || !r.committed) {
        None => Some(0),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].round),
        Some(_) => None,
    };
    let (cand, u) = run.mon.candidates();
    Summary {
        n: spec.n,
        f: spec.f,
        topology: spec.topology,
        mode: spec.mode,
        seed: spec.seed,
        rounds: spec.rounds,
        committed_rounds: rows.iter().filter(|r| r.committed).count() as u64,
        failed_rounds: rows.iter().filter(|r| r.failed).count() as u64,
        reconfigurations: run.events.iter().filter(|e| e.cause != Cause::Initial).count() as u64,
        events: run.events.clone(),
        final_config: run.current.as_ref().map(|c| c.label()),
        final_candidates: cand.into_iter().collect(),
        final_u: u,
        faulty: run.adv.members().iter().copied().collect(),
        mean_duration_us: (!durations.is_empty())
            .then(|| durations.iter().sum::<u64>() as f64 / durations.len() as f64),
        retained_correct: rows.iter().map(|r| r.retained_correct as u64).sum(),
        first_accusation_of_faulty: first_accusation,
        settled_at,
        log_entries: run.log.len(),
        skipped_entries: run.mon.skipped(),
        rejected_proposals: run.mon.config().rejected(),
        failed_searches: run.failed_searches,
    }
}
