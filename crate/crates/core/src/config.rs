use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a party in `[0, n)`. The numeric order is the canonical tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<usize> for PartyId {
    fn from(i: usize) -> Self {
        PartyId(i as u32)
    }
}

/// Protocol parameters shared by all parties of an execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Number of parties.
    pub n: usize,
    /// Number of tolerated faulty parties, `n > 3f`.
    pub f: usize,
    /// Fairness parameter.
    #[serde(default)]
    pub kappa: usize,
    /// Minimum number of new bcch deliveries before a party starts a round.
    #[serde(default = "default_round_trigger")]
    pub round_trigger: usize,
    /// Maximum number of values the sequencer packs into one block.
    #[serde(default = "default_batch_cap")]
    pub batch_cap: usize,
}

fn default_round_trigger() -> usize {
    1
}

fn default_batch_cap() -> usize {
    64
}

impl Config {
    pub fn new(n: usize, f: usize, kappa: usize) -> Result<Self> {
        let cfg = Config {
            n,
            f,
            kappa,
            round_trigger: default_round_trigger(),
            batch_cap: default_batch_cap(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.n <= 3 * self.f {
            return Err(Error::Config(format!(
                "n > 3f violated: n = {}, f = {}",
                self.n, self.f
            )));
        }
        if self.round_trigger == 0 {
            return Err(Error::Config("round_trigger must be at least 1".into()));
        }
        if self.batch_cap == 0 {
            return Err(Error::Config("batch_cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of status rows (and ABC acknowledgements) a party waits for.
    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// Signed echo broadcast quorum, `ceil((n + f + 1) / 2)`.
    pub fn echo_quorum(&self) -> usize {
        (self.n + self.f + 1).div_ceil(2)
    }

    /// A transaction is stable once `2 * occurrence >= n + f - kappa`.
    pub fn is_stable(&self, occurrence: usize) -> bool {
        2 * occurrence as i64 >= self.n as i64 + self.f as i64 - self.kappa as i64
    }

    pub fn parties(&self) -> impl Iterator<Item = PartyId> {
        (0..self.n as u32).map(PartyId)
    }

    pub fn contains(&self, p: PartyId) -> bool {
        p.index() < self.n
    }
}
