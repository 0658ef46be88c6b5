use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::scalar::Slack;

pub type ViewNumber = u64;
pub type RoundNumber = u64;

/// Default stability window, in views, before old suspicions are purged.
pub const DEFAULT_WINDOW: u64 = 50;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ReplicaId(pub u32);

impl ReplicaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ReplicaId {
    fn from(v: u32) -> Self {
        ReplicaId(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{n} is not a perfect tree size (b^2 + b + 1)")]
    NonPerfectTreeSize { n: usize },
    #[error("need {needed} candidates for special roles, have {available}")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("unknown replica {0}")]
    UnknownReplica(ReplicaId),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Static system parameters: `n >= 3f + 1`, quorum `q = n - f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub f: usize,
    pub delta: f64,
    pub window_w: u64,
}

impl SystemParams {
    pub fn new(n: usize, f: usize, delta: f64, window_w: u64) -> Result<Self> {
        let p = SystemParams {
            n,
            f,
            delta,
            window_w,
        };
        p.validate()?;
        Ok(p)
    }

    /// `n` replicas with the largest tolerable `f`.
    pub fn with_max_faults(n: usize, delta: f64) -> Result<Self> {
        Self::new(n, n.saturating_sub(1) / 3, delta, DEFAULT_WINDOW)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if self.n < 3 * self.f + 1 {
            return Err(Error::InvalidParams(format!(
                "n = {} violates n >= 3f + 1 with f = {}",
                self.n, self.f
            )));
        }
        if !self.delta.is_finite() || self.delta < 1.0 {
            return Err(Error::InvalidParams(format!(
                "delta must be a finite value >= 1, got {}",
                self.delta
            )));
        }
        if self.window_w == 0 {
            return Err(Error::InvalidParams("window_w must be positive".into()));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::InvalidParams("n too large".into()));
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.n - self.f
    }

    pub fn slack(&self) -> Slack {
        Slack::from_delta(self.delta)
    }

    pub fn replicas(&self) -> impl Iterator<Item = ReplicaId> + Clone {
        (0..self.n as u32).map(ReplicaId)
    }

    pub fn contains(&self, id: ReplicaId) -> bool {
        id.index() < self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quorum_and_bounds() {
        let p = SystemParams::new(4, 1, 1.2, 50).unwrap();
        assert_eq!(p.q(), 3);
        assert!(SystemParams::new(3, 1, 1.2, 50).is_err());
        assert!(SystemParams::new(4, 1, 0.9, 50).is_err());
        assert!(SystemParams::new(4, 1, f64::NAN, 50).is_err());
        assert_eq!(SystemParams::with_max_faults(13, 1.0).unwrap().f, 4);
    }
}
