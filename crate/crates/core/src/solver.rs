//! Discounted-cost dynamic programming over the `2H` live states.
//!
//! The critical level is a fixed boundary: `V(o,0) = V(i,0) = C_c` in every
//! value table produced here. Value iteration uses synchronous (Jacobi)
//! sweeps so results are bitwise reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, Action, ModelParams, State, Tier, ValidationReport};
use crate::policy::{Policy, PolicyError};

pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Above this many health levels `Direct` evaluation falls back to iteration.
pub const DIRECT_MAX_H: usize = 10_000;
/// Largest policy space `bruteforce_optimal` will enumerate.
pub const BRUTEFORCE_MAX_POLICIES: u64 = 1 << 20;

const BRUTEFORCE_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(ValidationReport),
    #[error("{0}")]
    BadArgument(String),
    #[error("not converged after {} iterations (residual {:e})", .0.iterations, .0.final_residual)]
    NotConverged(Box<SolveResult>),
    #[error("singular policy-evaluation system")]
    SingularSystem,
    #[error("dimension mismatch: expected H = {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("policy space of {policies} policies exceeds the enumeration bound")]
    TooLarge { policies: u128 },
    #[error("no single policy attains the pointwise minimum: {diagnostic}")]
    NoUniformMinimizer {
        envelope: ValueFunction,
        diagnostic: String,
    },
}

impl From<PolicyError> for SolverError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::DimensionMismatch { policy, model } => SolverError::DimensionMismatch {
                expected: model,
                got: policy,
            },
            other => SolverError::BadArgument(other.to_string()),
        }
    }
}

/// Per-state values, indexed by health level `0..=H` in each tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub ordinary: Vec<f64>,
    pub intensive: Vec<f64>,
}

impl ValueFunction {
    /// Boundary-only table: `C_c` at `h = 0`, zero elsewhere.
    pub fn initial(p: &ModelParams) -> Self {
        let mut row = vec![0.0; p.h_max + 1];
        row[0] = p.c_c;
        Self {
            ordinary: row.clone(),
            intensive: row,
        }
    }

    pub fn h_max(&self) -> usize {
        self.ordinary.len().saturating_sub(1)
    }

    pub fn get(&self, s: State) -> f64 {
        self.row(s.tier)[s.h]
    }

    pub fn row(&self, tier: Tier) -> &[f64] {
        match tier {
            Tier::Ordinary => &self.ordinary,
            Tier::Intensive => &self.intensive,
        }
    }

    fn row_mut(&mut self, tier: Tier) -> &mut [f64] {
        match tier {
            Tier::Ordinary => &mut self.ordinary,
            Tier::Intensive => &mut self.intensive,
        }
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.ordinary
            .iter()
            .zip(&other.ordinary)
            .chain(self.intensive.iter().zip(&other.intensive))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_dims(&self, p: &ModelParams) -> Result<(), SolverError> {
        if self.ordinary.len() != p.h_max + 1 || self.intensive.len() != p.h_max + 1 {
            return Err(SolverError::DimensionMismatch {
                expected: p.h_max,
                got: self.h_max(),
            });
        }
        Ok(())
    }
}

/// `q[(m,h,a)]` for `h` in `1..=H`, stored by `h - 1` and action index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub ordinary: Vec<[f64; 2]>,
    pub intensive: Vec<[f64; 2]>,
}

impl QTable {
    pub fn get(&self, s: State, a: Action) -> f64 {
        let row = match s.tier {
            Tier::Ordinary => &self.ordinary,
            Tier::Intensive => &self.intensive,
        };
        row[s.h - 1][a.index()]
    }

    /// `q(s,o) - q(s,i)`; positive means intensive is strictly better.
    pub fn advantage_of_intensive(&self, s: State) -> f64 {
        self.get(s, Tier::Ordinary) - self.get(s, Tier::Intensive)
    }

    pub fn min_value(&self, s: State) -> f64 {
        self.get(s, Tier::Ordinary).min(self.get(s, Tier::Intensive))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub values: ValueFunction,
    pub policy: Policy,
    pub iterations: usize,
    pub final_residual: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMethod {
    Direct,
    Iterative,
}

fn check_params(p: &ModelParams) -> Result<(), SolverError> {
    let report = p.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(SolverError::InvalidParams(report))
    }
}

fn check_tolerance(epsilon: f64, max_iter: usize) -> Result<(), SolverError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SolverError::BadArgument(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if max_iter < 1 {
        return Err(SolverError::BadArgument("max_iter must be ≥ 1".into()));
    }
    Ok(())
}

/// One-step lookahead `c(s,a) + γ Σ P(s'|s,a) V(s')`.
pub fn backup(p: &ModelParams, v: &ValueFunction, s: State, a: Action) -> f64 {
    let up = p.lambda(a);
    let next_row = v.row(a);
    let expected = up * next_row[(s.h + 1).min(p.h_max)] + (1.0 - up) * next_row[s.h - 1];
    model::step_cost(p, s.tier, a) + p.gamma * expected
}

fn greedy_action(p: &ModelParams, v: &ValueFunction, s: State) -> (Action, f64) {
    let stay_o = backup(p, v, s, Tier::Ordinary);
    let go_i = backup(p, v, s, Tier::Intensive);
    // ties go to ordinary
    if go_i < stay_o {
        (Tier::Intensive, go_i)
    } else {
        (Tier::Ordinary, stay_o)
    }
}

/// One synchronous application of the Bellman optimality operator.
pub fn bellman_update(p: &ModelParams, v: &ValueFunction) -> ValueFunction {
    let mut next = v.clone();
    for tier in Tier::ALL {
        next.row_mut(tier)[0] = p.c_c;
        for h in 1..=p.h_max {
            next.row_mut(tier)[h] = greedy_action(p, v, State::new(tier, h)).1;
        }
    }
    next
}

fn policy_update(p: &ModelParams, policy: &Policy, v: &ValueFunction) -> ValueFunction {
    let mut next = v.clone();
    for tier in Tier::ALL {
        next.row_mut(tier)[0] = p.c_c;
        for h in 1..=p.h_max {
            let s = State::new(tier, h);
            next.row_mut(tier)[h] = backup(p, v, s, policy.action(s));
        }
    }
    next
}

/// Iterates `update` from the boundary-only table until the sup-norm change
/// drops to `ε(1-γ)/γ`, which bounds the distance to the fixed point by `ε`.
fn iterate(
    p: &ModelParams,
    epsilon: f64,
    max_iter: usize,
    mut update: impl FnMut(&ValueFunction) -> ValueFunction,
) -> (ValueFunction, usize, f64, bool) {
    let stop = epsilon * (1.0 - p.gamma) / p.gamma;
    let mut v = ValueFunction::initial(p);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = update(&v);
        residual = next.sup_distance(&v);
        v = next;
        if residual <= stop {
            return (v, it, residual, true);
        }
    }
    (v, max_iter, residual, false)
}

pub fn value_iteration(p: &ModelParams, epsilon: f64, max_iter: usize) -> Result<SolveResult, SolverError> {
    check_params(p)?;
    check_tolerance(epsilon, max_iter)?;
    let (values, iterations, final_residual, converged) =
        iterate(p, epsilon, max_iter, |v| bellman_update(p, v));
    let policy = greedy_policy(p, &values)?;
    let result = SolveResult {
        values,
        policy,
        iterations,
        final_residual,
        epsilon,
    };
    if converged {
        Ok(result)
    } else {
        Err(SolverError::NotConverged(Box::new(result)))
    }
}

pub fn solve(p: &ModelParams) -> Result<SolveResult, SolverError> {
    value_iteration(p, DEFAULT_EPSILON, DEFAULT_MAX_ITER)
}

pub fn policy_evaluation(
    p: &ModelParams,
    policy: &Policy,
    method: EvalMethod,
    epsilon: f64,
) -> Result<ValueFunction, SolverError> {
    check_params(p)?;
    policy.check_dims(p.h_max)?;
    match method {
        EvalMethod::Direct if p.h_max <= DIRECT_MAX_H => evaluate_direct(p, policy),
        _ => {
            check_tolerance(epsilon, DEFAULT_MAX_ITER)?;
            let (values, iterations, final_residual, converged) =
                iterate(p, epsilon, DEFAULT_MAX_ITER, |v| policy_update(p, policy, v));
            if converged {
                Ok(values)
            } else {
                let policy = policy.clone();
                Err(SolverError::NotConverged(Box::new(SolveResult {
                    values,
                    policy,
                    iterations,
                    final_residual,
                    epsilon,
                })))
            }
        }
    }
}

/// Half-bandwidth of `I - γP` when live states are interleaved as
/// `2(h-1) + tier`.
const BAND: usize = 3;

fn state_index(s: State) -> usize {
    2 * (s.h - 1) + s.tier.index()
}

/// Solves `(I - γP_π) V = c_π + γ P_π(→0) C_c` by banded elimination.
///
/// The matrix is strictly row-diagonally dominant (off-diagonal mass at most
/// `γ < 1`), so elimination without pivoting is stable and fill-in stays
/// inside the band.
fn evaluate_direct(p: &ModelParams, policy: &Policy) -> Result<ValueFunction, SolverError> {
    let n = p.num_states();
    let width = 2 * BAND + 1;
    // rows[i][j - i + BAND] holds A[i][j]
    let mut rows = vec![vec![0.0f64; width]; n];
    let mut rhs = vec![0.0f64; n];
    for s in model::live_states(p) {
        let i = state_index(s);
        let a = policy.action(s);
        rows[i][BAND] += 1.0;
        rhs[i] = model::step_cost(p, s.tier, a);
        let dist = model::transition(p, s, a).expect("live state");
        for &(next, prob) in dist.outcomes() {
            if next.h == 0 {
                rhs[i] += p.gamma * prob * p.c_c;
            } else {
                let j = state_index(next);
                rows[i][j + BAND - i] -= p.gamma * prob;
            }
        }
    }
    let original = (rows.clone(), rhs.clone());

    for k in 0..n {
        let pivot = rows[k][BAND];
        if !pivot.is_finite() || pivot.abs() < 1e-300 {
            return Err(SolverError::SingularSystem);
        }
        for i in (k + 1)..(k + BAND + 1).min(n) {
            let factor = rows[i][k + BAND - i] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..(k + BAND + 1).min(n) {
                let upper = rows[k][j + BAND - k];
                rows[i][j + BAND - i] -= factor * upper;
            }
            rhs[i] -= factor * rhs[k];
        }
    }
    let mut x = vec![0.0f64; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in (k + 1)..(k + BAND + 1).min(n) {
            acc -= rows[k][j + BAND - k] * x[j];
        }
        x[k] = acc / rows[k][BAND];
    }

    let (a0, b0) = original;
    let scale = b0.iter().chain(&x).fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let lo = i.saturating_sub(BAND);
        let hi = (i + BAND + 1).min(n);
        let lhs: f64 = (lo..hi).map(|j| a0[i][j + BAND - i] * x[j]).sum();
        let r = (lhs - b0[i]).abs();
        if !r.is_finite() || r > 1e-10 * scale {
            return Err(SolverError::SingularSystem);
        }
    }

    let mut v = ValueFunction::initial(p);
    for s in model::live_states(p) {
        v.row_mut(s.tier)[s.h] = x[state_index(s)];
    }
    Ok(v)
}

pub fn q_values(p: &ModelParams, values: &ValueFunction) -> Result<QTable, SolverError> {
    values.check_dims(p)?;
    let row = |tier: Tier| -> Vec<[f64; 2]> {
        (1..=p.h_max)
            .map(|h| {
                let s = State::new(tier, h);
                [
                    backup(p, values, s, Tier::Ordinary),
                    backup(p, values, s, Tier::Intensive),
                ]
            })
            .collect()
    };
    Ok(QTable {
        ordinary: row(Tier::Ordinary),
        intensive: row(Tier::Intensive),
    })
}

/// Per-state Q-minimizing action, ties broken toward ordinary.
pub fn greedy_policy(p: &ModelParams, values: &ValueFunction) -> Result<Policy, SolverError> {
    values.check_dims(p)?;
    Ok(Policy::from_fn(p.h_max, |s| greedy_action(p, values, s).0))
}

/// Two policies are tie-equivalent when their exact values agree within `tol`
/// at every state.
pub fn tie_equivalent(p: &ModelParams, a: &Policy, b: &Policy, tol: f64) -> Result<bool, SolverError> {
    if a == b {
        return Ok(true);
    }
    let va = policy_evaluation(p, a, EvalMethod::Direct, DEFAULT_EPSILON)?;
    let vb = policy_evaluation(p, b, EvalMethod::Direct, DEFAULT_EPSILON)?;
    Ok(va.sup_distance(&vb) <= tol)
}

fn policy_from_bits(h_max: usize, bits: u64, tier_independent: bool) -> Policy {
    let act = |k: usize| {
        if bits >> k & 1 == 1 {
            Tier::Intensive
        } else {
            Tier::Ordinary
        }
    };
    Policy::from_fn(h_max, |s| {
        let k = if tier_independent {
            s.h - 1
        } else {
            s.tier.index() * h_max + (s.h - 1)
        };
        act(k)
    })
}

/// Exhaustive-enumeration oracle.
///
/// Simplified instances enumerate only tier-independent policies (`2^H`);
/// general instances enumerate all `2^{2H}`. Every candidate is evaluated
/// exactly and the first one attaining the pointwise minimum everywhere is
/// returned; `iterations` reports the number of policies evaluated.
pub fn bruteforce_optimal(p: &ModelParams) -> Result<SolveResult, SolverError> {
    check_params(p)?;
    let tier_independent = p.is_simplified();
    let slots = if tier_independent { p.h_max } else { 2 * p.h_max };
    let count: u128 = 1u128 << slots.min(127);
    if slots >= 127 || count > BRUTEFORCE_MAX_POLICIES as u128 {
        return Err(SolverError::TooLarge { policies: count });
    }
    let count = count as u64;

    let evaluated: Vec<(Policy, ValueFunction)> = (0..count)
        .map(|bits| {
            let policy = policy_from_bits(p.h_max, bits, tier_independent);
            evaluate_direct(p, &policy).map(|v| (policy, v))
        })
        .collect::<Result<_, _>>()?;

    let mut envelope = evaluated[0].1.clone();
    for (_, v) in &evaluated[1..] {
        for tier in Tier::ALL {
            for (e, x) in envelope.row_mut(tier).iter_mut().zip(v.row(tier)) {
                *e = e.min(*x);
            }
        }
    }
    let attains = |v: &ValueFunction| {
        Tier::ALL.into_iter().all(|t| {
            v.row(t)
                .iter()
                .zip(envelope.row(t))
                .all(|(x, e)| *x <= e + BRUTEFORCE_TIE_TOL)
        })
    };
    match evaluated.iter().find(|(_, v)| attains(v)) {
        Some((policy, _)) => Ok(SolveResult {
            values: envelope,
            policy: policy.clone(),
            iterations: count as usize,
            final_residual: 0.0,
            epsilon: BRUTEFORCE_TIE_TOL,
        }),
        None => {
            let best_gap = evaluated
                .iter()
                .map(|(_, v)| v.sup_distance(&envelope))
                .fold(f64::INFINITY, f64::min);
            Err(SolverError::NoUniformMinimizer {
                envelope,
                diagnostic: format!(
                    "{count} policies evaluated; closest policy is {best_gap:e} above the envelope"
                ),
            })
        }
    }
}
