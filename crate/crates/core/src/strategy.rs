use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{diagonal_pivots, greedy_pivots, rls_pivots, uniform_pivots};
use crate::error::{Error, Result};
use crate::factor::{NystromFactor, PivotTrace, StopRule};
use crate::oracle::EntryOracle;
use crate::rpcholesky::{rpcholesky, rpcholesky_blocked};

/// A column-selection rule, for code that is generic over how pivots are
/// chosen (the applications and the experiment runner).
///
/// String form: `rpcholesky`, `blocked:<B>`, `greedy`, `uniform`,
/// `uniform_noreplace`, `diagonal`, `rls:<lambda>:<delta>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PivotStrategy {
    RpCholesky,
    Blocked { block: usize },
    Greedy,
    Uniform { replace: bool },
    Diagonal,
    Rls { lambda: f64, delta: f64 },
}

impl PivotStrategy {
    /// Runs the rule for rank `k`. RLS ignores `k`; its sample size is random.
    pub fn run<R: Rng + ?Sized>(
        &self,
        oracle: &EntryOracle,
        k: usize,
        rng: &mut R,
    ) -> Result<(NystromFactor, PivotTrace)> {
        match *self {
            PivotStrategy::RpCholesky => rpcholesky(oracle, StopRule::FixedRank(k), rng),
            PivotStrategy::Blocked { block } => rpcholesky_blocked(oracle, k, block, rng),
            PivotStrategy::Greedy => greedy_pivots(oracle, StopRule::FixedRank(k)),
            PivotStrategy::Uniform { replace } => uniform_pivots(oracle, k, replace, rng),
            PivotStrategy::Diagonal => diagonal_pivots(oracle, k, rng),
            PivotStrategy::Rls { lambda, delta } => rls_pivots(oracle, lambda, delta, rng),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, PivotStrategy::Greedy)
    }

    /// Short name used in CSV output.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PivotStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PivotStrategy::RpCholesky => f.write_str("rpcholesky"),
            PivotStrategy::Blocked { block } => write!(f, "blocked:{block}"),
            PivotStrategy::Greedy => f.write_str("greedy"),
            PivotStrategy::Uniform { replace: true } => f.write_str("uniform"),
            PivotStrategy::Uniform { replace: false } => f.write_str("uniform_noreplace"),
            PivotStrategy::Diagonal => f.write_str("diagonal"),
            PivotStrategy::Rls { lambda, delta } => write!(f, "rls:{lambda}:{delta}"),
        }
    }
}

impl FromStr for PivotStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown pivot strategy {s:?}"));
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let strategy = match (head, rest.as_slice()) {
            ("rpcholesky", []) => PivotStrategy::RpCholesky,
            ("blocked", [b]) => PivotStrategy::Blocked { block: b.parse().map_err(|_| bad())? },
            ("greedy", []) => PivotStrategy::Greedy,
            ("uniform", []) => PivotStrategy::Uniform { replace: true },
            ("uniform_noreplace", []) => PivotStrategy::Uniform { replace: false },
            ("diagonal", []) => PivotStrategy::Diagonal,
            ("rls", [l, d]) => PivotStrategy::Rls { lambda: num(l)?, delta: num(d)? },
            _ => return Err(bad()),
        };
        Ok(strategy)
    }
}

impl TryFrom<String> for PivotStrategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PivotStrategy> for String {
    fn from(s: PivotStrategy) -> String {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in [
            PivotStrategy::RpCholesky,
            PivotStrategy::Blocked { block: 20 },
            PivotStrategy::Greedy,
            PivotStrategy::Uniform { replace: true },
            PivotStrategy::Uniform { replace: false },
            PivotStrategy::Diagonal,
            PivotStrategy::Rls { lambda: 0.5, delta: 0.1 },
        ] {
            assert_eq!(s.to_string().parse::<PivotStrategy>().unwrap(), s);
        }
        assert!("blocked".parse::<PivotStrategy>().is_err());
        assert!("dpp".parse::<PivotStrategy>().is_err());
    }
}
