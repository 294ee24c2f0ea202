//! RPM instance definition: parameters, states, the controlled transition
//! kernel and the per-period cost function.
//!
//! Health levels run from `0` (critical, absorbing) to `H` (best). The
//! monitoring tier after a decision always equals the chosen action, and the
//! top level reflects: an improvement at `H` stays at `H`.

use std::fmt;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Monitoring tier. Also used as the action type: the action names the tier
/// occupied during the next period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "o")]
    Ordinary,
    #[serde(rename = "i")]
    Intensive,
}

pub type Action = Tier;

impl Tier {
    pub const ALL: [Tier; 2] = [Tier::Ordinary, Tier::Intensive];

    pub fn symbol(self) -> char {
        match self {
            Tier::Ordinary => 'o',
            Tier::Intensive => 'i',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Tier::Ordinary => 0,
            Tier::Intensive => 1,
        }
    }

    pub fn other(self) -> Tier {
        match self {
            Tier::Ordinary => Tier::Intensive,
            Tier::Intensive => Tier::Ordinary,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Joint (monitoring tier, health level) state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub tier: Tier,
    pub h: usize,
}

impl State {
    pub fn new(tier: Tier, h: usize) -> Self {
        Self { tier, h }
    }

    pub fn is_absorbing(&self) -> bool {
        self.h == 0
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tier, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("state {0} is absorbing; no action is taken at h = 0")]
    QueryOnAbsorbingState(State),
    #[error("health level {h} exceeds H = {max}")]
    OutOfRange { h: usize, max: usize },
    #[error("invalid model parameters: {0}")]
    Invalid(ValidationReport),
}

/// All scalars defining an RPM instance.
///
/// The improvement probabilities are the only stored probabilities; the
/// worsening probabilities are derived by [`ModelParams::mu_o`] and
/// [`ModelParams::mu_i`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "H")]
    pub h_max: usize,
    pub lambda_o: f64,
    pub lambda_i: f64,
    #[serde(rename = "C_o")]
    pub c_o: f64,
    #[serde(rename = "C_i")]
    pub c_i: f64,
    #[serde(rename = "C_c")]
    pub c_c: f64,
    #[serde(rename = "C_oi", default)]
    pub c_oi: f64,
    #[serde(rename = "C_io", default)]
    pub c_io: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn mu_o(&self) -> f64 {
        1.0 - self.lambda_o
    }

    pub fn mu_i(&self) -> f64 {
        1.0 - self.lambda_i
    }

    /// Improvement probability under the given tier.
    pub fn lambda(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Ordinary => self.lambda_o,
            Tier::Intensive => self.lambda_i,
        }
    }

    /// True when ordinary monitoring and both switches are free.
    pub fn is_simplified(&self) -> bool {
        self.c_o == 0.0 && self.c_oi == 0.0 && self.c_io == 0.0
    }

    /// Number of non-absorbing states, `2H`.
    pub fn num_states(&self) -> usize {
        2 * self.h_max
    }

    /// Largest one-period cost over all (state, action) pairs.
    pub fn max_step_cost(&self) -> f64 {
        (self.c_oi + self.c_i)
            .max(self.c_io + self.c_o)
            .max(self.c_i)
            .max(self.c_o)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        let report = validate(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(report))
        }
    }
}

/// One broken (or merely cautioned) assumption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// True if some violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let joined: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", joined.join("; "))
    }
}

pub const LAMBDA_O_ASYMPTOTIC_WARNING: &str =
    "Assumption 2(b): λ_o < 0.5 is required by the asymptotic analysis";

/// Checks every parameter invariant. Never fails; the report is the result.
pub fn validate(p: &ModelParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut bad = |field: &str, msg: &str| report.violations.push(Violation::new(field, msg));

    if p.h_max < 1 {
        bad("H", "H must be ≥ 1");
    }
    for (field, value) in [("lambda_o", p.lambda_o), ("lambda_i", p.lambda_i)] {
        if !(value.is_finite() && (0.0..1.0).contains(&value)) {
            bad(field, "improvement probability must lie in [0,1)");
        }
    }
    if p.lambda_i < p.lambda_o {
        bad("lambda_i", "Assumption 1a: λ_i ≥ λ_o");
    }
    let costs = [
        ("C_o", p.c_o),
        ("C_i", p.c_i),
        ("C_c", p.c_c),
        ("C_oi", p.c_oi),
        ("C_io", p.c_io),
    ];
    for (field, value) in costs {
        if !value.is_finite() || value < 0.0 {
            bad(field, "cost must be a finite nonnegative real");
        }
    }
    if !(p.c_o <= p.c_i && p.c_i <= p.c_c) {
        bad("C_i", "Assumption 1b: 0 ≤ C_o ≤ C_i ≤ C_c");
    }
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        bad("gamma", "γ must lie in (0,1)");
    }
    if p.lambda_o >= 0.5 {
        report
            .warnings
            .push(Violation::new("lambda_o", LAMBDA_O_ASYMPTOTIC_WARNING));
    }
    report
}

/// Simplified service: ordinary monitoring and switching are free.
pub fn simplified_preset(
    lambda_o: f64,
    lambda_i: f64,
    c_i: f64,
    c_c: f64,
    gamma: f64,
    h_max: usize,
) -> Result<ModelParams, ModelError> {
    ModelParams {
        h_max,
        lambda_o,
        lambda_i,
        c_o: 0.0,
        c_i,
        c_c,
        c_oi: 0.0,
        c_io: 0.0,
        gamma,
    }
    .validated()
}

/// Next-state distribution with zero-probability outcomes dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDist {
    outcomes: ArrayVec<(State, f64), 2>,
}

impl TransitionDist {
    pub fn outcomes(&self) -> &[(State, f64)] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn prob(&self, s: State) -> f64 {
        self.outcomes
            .iter()
            .filter(|(t, _)| *t == s)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }
}

fn check_live(p: &ModelParams, s: State) -> Result<(), ModelError> {
    if s.h == 0 {
        return Err(ModelError::QueryOnAbsorbingState(s));
    }
    if s.h > p.h_max {
        return Err(ModelError::OutOfRange { h: s.h, max: p.h_max });
    }
    Ok(())
}

/// Controlled kernel: the health level moves to `min(h+1, H)` with the
/// chosen tier's improvement probability, else to `h-1`.
pub fn transition(p: &ModelParams, s: State, a: Action) -> Result<TransitionDist, ModelError> {
    check_live(p, s)?;
    let up = p.lambda(a);
    let down = 1.0 - up;
    let mut outcomes = ArrayVec::new();
    if up > 0.0 {
        outcomes.push((State::new(a, (s.h + 1).min(p.h_max)), up));
    }
    if down > 0.0 {
        outcomes.push((State::new(a, s.h - 1), down));
    }
    Ok(TransitionDist { outcomes })
}

/// One-period cost of taking action `a` at `s`.
pub fn cost(p: &ModelParams, s: State, a: Action) -> Result<f64, ModelError> {
    check_live(p, s)?;
    Ok(step_cost(p, s.tier, a))
}

pub(crate) fn step_cost(p: &ModelParams, tier: Tier, a: Action) -> f64 {
    match (tier, a) {
        (Tier::Ordinary, Tier::Ordinary) => p.c_o,
        (Tier::Ordinary, Tier::Intensive) => p.c_oi + p.c_i,
        (Tier::Intensive, Tier::Intensive) => p.c_i,
        (Tier::Intensive, Tier::Ordinary) => p.c_io + p.c_o,
    }
}

/// Non-absorbing states in (tier, h) order: all ordinary levels, then
/// all intensive levels.
pub fn live_states(p: &ModelParams) -> impl Iterator<Item = State> + '_ {
    Tier::ALL
        .into_iter()
        .flat_map(move |tier| (1..=p.h_max).map(move |h| State::new(tier, h)))
}
