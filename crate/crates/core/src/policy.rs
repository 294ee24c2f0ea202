//! Stationary deterministic policies, the named policy families, and the
//! structural classifier.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, State, Tier};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("bad threshold: {0}")]
    BadThreshold(String),
    #[error("policy covers H = {policy}, model has H = {model}")]
    DimensionMismatch { policy: usize, model: usize },
}

/// Action table over the non-absorbing states, indexed by `h - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PolicyRows")]
pub struct Policy {
    ordinary: Vec<Action>,
    intensive: Vec<Action>,
}

#[derive(Deserialize)]
struct PolicyRows {
    ordinary: Vec<Action>,
    intensive: Vec<Action>,
}

impl TryFrom<PolicyRows> for Policy {
    type Error = PolicyError;

    fn try_from(r: PolicyRows) -> Result<Self, PolicyError> {
        Policy::from_rows(r.ordinary, r.intensive)
    }
}

impl Policy {
    /// Builds a policy from per-tier action rows (entry `k` is level `k + 1`).
    pub fn from_rows(ordinary: Vec<Action>, intensive: Vec<Action>) -> Result<Self, PolicyError> {
        if ordinary.len() != intensive.len() || ordinary.is_empty() {
            return Err(PolicyError::DimensionMismatch {
                policy: ordinary.len(),
                model: intensive.len(),
            });
        }
        Ok(Self { ordinary, intensive })
    }

    /// Tier-independent policy from a single row.
    pub fn tier_independent(row: Vec<Action>) -> Result<Self, PolicyError> {
        Self::from_rows(row.clone(), row)
    }

    pub fn from_fn(h_max: usize, mut f: impl FnMut(State) -> Action) -> Self {
        let ordinary = (1..=h_max).map(|h| f(State::new(Tier::Ordinary, h))).collect();
        let intensive = (1..=h_max).map(|h| f(State::new(Tier::Intensive, h))).collect();
        Self { ordinary, intensive }
    }

    pub fn h_max(&self) -> usize {
        self.ordinary.len()
    }

    /// Action at a non-absorbing state. Panics if `s.h` is outside `[1, H]`.
    pub fn action(&self, s: State) -> Action {
        self.row(s.tier)[s.h - 1]
    }

    pub fn row(&self, tier: Tier) -> &[Action] {
        match tier {
            Tier::Ordinary => &self.ordinary,
            Tier::Intensive => &self.intensive,
        }
    }

    /// Member of the tier-independent set (same action at `(o,h)` and `(i,h)`).
    pub fn is_tier_independent(&self) -> bool {
        self.ordinary == self.intensive
    }

    pub fn check_dims(&self, h_max: usize) -> Result<(), PolicyError> {
        if self.h_max() == h_max {
            Ok(())
        } else {
            Err(PolicyError::DimensionMismatch {
                policy: self.h_max(),
                model: h_max,
            })
        }
    }

    pub fn classify(&self) -> PolicyClass {
        classify(self)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h    ")?;
        for h in 1..=self.h_max() {
            write!(f, "{h:>3}")?;
        }
        for tier in Tier::ALL {
            let label = match tier {
                Tier::Ordinary => "\nm=o  ",
                Tier::Intensive => "\nm=i  ",
            };
            write!(f, "{label}")?;
            for a in self.row(tier) {
                write!(f, "{:>3}", a.symbol())?;
            }
        }
        Ok(())
    }
}

/// Structural taxonomy of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PolicyClass {
    AlwaysOrdinary,
    AlwaysIntensive,
    /// Intensive for `1 <= h <= h_bar`, ordinary above, in both tiers.
    Threshold {
        h_bar: usize,
    },
    /// From ordinary, switch to intensive iff `h <= lower`; from intensive,
    /// switch back iff `h > upper`.
    TwoThreshold {
        lower: usize,
        upper: usize,
    },
    Other,
}

impl PolicyClass {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyClass::AlwaysOrdinary => "always_ordinary",
            PolicyClass::AlwaysIntensive => "always_intensive",
            PolicyClass::Threshold { .. } => "threshold",
            PolicyClass::TwoThreshold { .. } => "two_threshold",
            PolicyClass::Other => "other",
        }
    }

    pub fn h_bar(&self) -> Option<usize> {
        match self {
            PolicyClass::Threshold { h_bar } => Some(*h_bar),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyClass::Threshold { h_bar } => write!(f, "threshold(h_bar={h_bar})"),
            PolicyClass::TwoThreshold { lower, upper } => {
                write!(f, "two_threshold(lower={lower}, upper={upper})")
            }
            other => write!(f, "{}", other.name()),
        }
    }
}

pub fn make_constant(h_max: usize, tier: Tier) -> Policy {
    Policy::from_fn(h_max, |_| tier)
}

pub fn make_threshold(h_max: usize, h_bar: usize) -> Result<Policy, PolicyError> {
    if h_bar < 1 || h_bar >= h_max {
        return Err(PolicyError::BadThreshold(format!(
            "h_bar = {h_bar} must lie in [1, H-1] = [1, {}]",
            h_max.saturating_sub(1)
        )));
    }
    Ok(Policy::from_fn(h_max, |s| threshold_action(s.h, h_bar)))
}

pub fn make_two_threshold(h_max: usize, lower: usize, upper: usize) -> Result<Policy, PolicyError> {
    if !(1 <= lower && lower < upper && upper <= h_max) {
        return Err(PolicyError::BadThreshold(format!(
            "need 1 <= lower < upper <= H, got lower = {lower}, upper = {upper}, H = {h_max}"
        )));
    }
    Ok(Policy::from_fn(h_max, |s| match s.tier {
        Tier::Ordinary => threshold_action(s.h, lower),
        Tier::Intensive => threshold_action(s.h, upper),
    }))
}

fn threshold_action(h: usize, cut: usize) -> Action {
    if h <= cut {
        Tier::Intensive
    } else {
        Tier::Ordinary
    }
}

/// If `row` is intensive on `[1, k]` and ordinary above, returns `k`
/// (possibly `0` or `H`).
fn row_cut(row: &[Action]) -> Option<usize> {
    let k = row.iter().take_while(|a| **a == Tier::Intensive).count();
    row[k..].iter().all(|a| *a == Tier::Ordinary).then_some(k)
}

/// First matching class in the order always-ordinary, always-intensive,
/// threshold, two-threshold, other.
pub fn classify(policy: &Policy) -> PolicyClass {
    let ord = policy.row(Tier::Ordinary);
    let int = policy.row(Tier::Intensive);
    let h_max = policy.h_max();
    let all = |t: Tier| ord.iter().chain(int).all(|a| *a == t);
    if all(Tier::Ordinary) {
        return PolicyClass::AlwaysOrdinary;
    }
    if all(Tier::Intensive) {
        return PolicyClass::AlwaysIntensive;
    }
    match (row_cut(ord), row_cut(int)) {
        (Some(a), Some(b)) if a == b && (1..h_max).contains(&a) => PolicyClass::Threshold { h_bar: a },
        (Some(lower), Some(upper)) if 1 <= lower && lower < upper && upper <= h_max => {
            PolicyClass::TwoThreshold { lower, upper }
        }
        _ => PolicyClass::Other,
    }
}
