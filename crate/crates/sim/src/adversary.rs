//! Adversarial behaviour: network effects and logged accusations.

use std::collections::BTreeSet;

use optilog_core::suspicion::{MessageType, Suspicion};
use optilog_core::{Configuration, ReplicaId, RoundNumber, Slack};
use rand::seq::IteratorRandom;
use rand::Rng;

use crate::scenario::{AdversaryKind, AdversarySpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Adversaries {
    specs: Vec<AdversarySpec>,
    members: BTreeSet<ReplicaId>,
    /// (accuser, accused) pairs already raised by targeted accusers.
    accused: BTreeSet<(ReplicaId, ReplicaId)>,
}

impl Adversaries {
    pub fn new(specs: Vec<AdversarySpec>) -> Self {
        let members = specs.iter().flat_map(|s| s.members.iter().copied()).collect();
        Adversaries {
            specs,
            members,
            accused: BTreeSet::new(),
        }
    }

    pub fn none() -> Self {
        Self::new(Vec::new())
    }

    pub fn members(&self) -> &BTreeSet<ReplicaId> {
        &self.members
    }

    pub fn is_faulty(&self, r: ReplicaId) -> bool {
        self.members.contains(&r)
    }

    fn active(&self, r: ReplicaId, round: RoundNumber) -> impl Iterator<Item = &AdversaryKind> {
        self.specs
            .iter()
            .filter(move |s| round >= s.start_round && s.members.contains(&r))
            .map(|s| &s.kind)
    }

    /// Sends and logs nothing.
    pub fn silent(&self, r: ReplicaId, round: RoundNumber) -> bool {
        self.active(r, round).any(|k| *k == AdversaryKind::Crash)
    }

    /// Slowdown applied to `r`'s outgoing messages, in ppm.
    pub fn slowdown_ppm(&self, r: ReplicaId, round: RoundNumber) -> u64 {
        self.active(r, round).fold(Slack::ONE.ppm(), |acc, k| match k {
            AdversaryKind::DelayAttack { factor } => acc.max(Slack::from_delta(*factor).ppm()),
            _ => acc,
        })
    }

    /// How long `r` holds back a proposal it leads.
    pub fn proposal_delay(&self, r: ReplicaId, round: RoundNumber) -> u64 {
        self.active(r, round).fold(0, |acc, k| match k {
            AdversaryKind::ProposalDelay { extra_us } => acc.max(*extra_us),
            _ => acc,
        })
    }

    /// Whether `r` answers a logged suspicion against it. Correct replicas
    /// always do; adversaries deny unless silent.
    pub fn responds(&self, r: ReplicaId, round: RoundNumber) -> bool {
        !self.silent(r, round)
    }

    /// Slow suspicions the adversaries log after `round` ran under `config`.
    ///
    /// Targeted accusers each pick the lowest correct internal node they have
    /// not accused yet, spreading over distinct targets when they can.
    /// Flooders each accuse one random correct replica.
    pub fn accusations<R: Rng>(&mut self, round: RoundNumber, config: &Configuration, rng: &mut R) -> Vec<Suspicion> {
        let special = config.special();
        let mut out = Vec::new();
        let mut taken = BTreeSet::new();
        let members: Vec<ReplicaId> = self.members.iter().copied().collect();
        for x in members {
            if self.silent(x, round) {
                continue;
            }
            let kinds: Vec<AdversaryKind> = self.active(x, round).cloned().collect();
            for kind in kinds {
                match kind {
                    AdversaryKind::TargetedSuspicion => {
                        let open: Vec<ReplicaId> = special
                            .iter()
                            .copied()
                            .filter(|&c| c != x && !self.is_faulty(c) && !self.accused.contains(&(x, c)))
                            .collect();
                        let target = open
                            .iter()
                            .copied()
                            .filter(|c| !taken.contains(c))
                            .min()
                            .or_else(|| open.iter().copied().min());
                        if let Some(c) = target {
                            taken.insert(c);
                            self.accused.insert((x, c));
                            out.push(Suspicion::slow(x, c, round, message_for(config, x, c)));
                        }
                    }
                    AdversaryKind::FalseSuspicionFlood => {
                        let n = config_size(config) as u32;
                        let target = (0..n)
                            .map(ReplicaId)
                            .filter(|&c| c != x && !self.is_faulty(c))
                            .choose(rng);
                        if let Some(c) = target {
                            out.push(Suspicion::slow(x, c, round, message_for(config, x, c)));
                        }
                    }
                    _ => {}
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn config_size(c: &Configuration) -> usize {
    match c {
        Configuration::Tree(t) => t.size(),
        Configuration::Star(s) => s.members.len(),
    }
}

/// A message `accused` sends that `accuser` could claim was late.
fn message_for(config: &Configuration, accuser: ReplicaId, accused: ReplicaId) -> MessageType {
    match config {
        Configuration::Star(s) if s.leader == accused => MessageType::ProposalTimestamp,
        Configuration::Star(_) => MessageType::Write,
        Configuration::Tree(t) if t.root == accused => MessageType::ProposalTimestamp,
        Configuration::Tree(t) if t.intermediates.iter().any(|i| i.id == accused) => {
            if t.root == accuser {
                MessageType::AggVote
            } else {
                MessageType::FwdPropose
            }
        }
        Configuration::Tree(_) => MessageType::Vote,
    }
}
