//! Seeded Monte Carlo simulation of the controlled chain.
//!
//! Each period consumes exactly one uniform draw `u` from a ChaCha8 stream;
//! the health level goes up iff `u < λ_a`. Trajectory `k` of an estimate is
//! seeded with `seed + k`, so parallel scheduling cannot change results.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, Action, ModelParams, State, Tier};
use crate::policy::{make_constant, Policy};

/// Identity of the pseudo-random generator recorded alongside estimates.
pub const GENERATOR_ID: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";
pub const MIN_VALUE_SAMPLES: usize = 100;
/// Discount tail below which a value-estimation trajectory is cut off.
pub const VALUE_TAIL: f64 = 1e-9;
pub const MGF_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(model::ValidationReport),
    #[error("{0}")]
    BadArgument(String),
    #[error("{truncated} trajectories hit the {max_steps}-step cap before absorbing")]
    TruncationWarning {
        truncated: usize,
        max_steps: usize,
        estimate: EstimateResult,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: State,
    pub action: Action,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<Step>,
    pub absorbed: bool,
    /// Absorption time; equals `steps.len()` when `absorbed`.
    pub t: usize,
    pub discounted_cost: f64,
}

impl Trajectory {
    /// CSV with columns `step,tier,h,action,cost`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["step", "tier", "h", "action", "cost"])?;
        for (k, st) in self.steps.iter().enumerate() {
            out.write_record([
                k.to_string(),
                st.state.tier.symbol().to_string(),
                st.state.h.to_string(),
                st.action.symbol().to_string(),
                st.cost.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    pub generator_id: String,
}

struct Outcome {
    absorbed: bool,
    t: usize,
    discounted_cost: f64,
}

fn run(
    p: &ModelParams,
    policy: &Policy,
    s0: State,
    seed: u64,
    max_steps: usize,
    mut record: Option<&mut Vec<Step>>,
) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = s0;
    let mut discount = 1.0f64;
    let mut total = 0.0f64;
    let mut t = 0usize;
    while s.h > 0 && t < max_steps {
        let a = policy.action(s);
        let c = model::step_cost(p, s.tier, a);
        if let Some(steps) = record.as_deref_mut() {
            steps.push(Step {
                state: s,
                action: a,
                cost: c,
            });
        }
        total += discount * c;
        let u: f64 = rng.random();
        let h = if u < p.lambda(a) {
            (s.h + 1).min(p.h_max)
        } else {
            s.h - 1
        };
        s = State::new(a, h);
        discount *= p.gamma;
        t += 1;
    }
    let absorbed = s.h == 0;
    if absorbed {
        total += discount * p.c_c;
    }
    Outcome {
        absorbed,
        t,
        discounted_cost: total,
    }
}

fn check_inputs(p: &ModelParams, policy: &Policy, s0: State) -> Result<(), SimError> {
    let report = p.validate();
    if !report.is_ok() {
        return Err(SimError::InvalidParams(report));
    }
    policy
        .check_dims(p.h_max)
        .map_err(|e| SimError::BadArgument(e.to_string()))?;
    if s0.h > p.h_max {
        return Err(SimError::BadArgument(format!(
            "start level {} exceeds H = {}",
            s0.h, p.h_max
        )));
    }
    Ok(())
}

/// Deterministic in `(params, policy, s0, seed, max_steps)`.
pub fn simulate(
    p: &ModelParams,
    policy: &Policy,
    s0: State,
    seed: u64,
    max_steps: usize,
) -> Result<Trajectory, SimError> {
    check_inputs(p, policy, s0)?;
    let mut steps = Vec::new();
    let out = run(p, policy, s0, seed, max_steps, Some(&mut steps));
    Ok(Trajectory {
        seed,
        steps,
        absorbed: out.absorbed,
        t: out.t,
        discounted_cost: out.discounted_cost,
    })
}

/// `⌈log(VALUE_TAIL) / log γ⌉`.
pub fn value_horizon(gamma: f64) -> usize {
    (VALUE_TAIL.ln() / gamma.ln()).ceil() as usize
}

/// Sequential Welford mean/stderr; exact for constant samples.
fn summarize(samples: &[f64], seed: u64) -> EstimateResult {
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for (k, x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = samples.len();
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    EstimateResult {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
        seed,
        generator_id: GENERATOR_ID.to_string(),
    }
}

/// Monte Carlo estimate of `V_π(s0)` over `n` trajectories.
pub fn estimate_value(
    p: &ModelParams,
    policy: &Policy,
    s0: State,
    n: usize,
    seed: u64,
) -> Result<EstimateResult, SimError> {
    check_inputs(p, policy, s0)?;
    if n < MIN_VALUE_SAMPLES {
        return Err(SimError::BadArgument(format!(
            "n must be ≥ {MIN_VALUE_SAMPLES}, got {n}"
        )));
    }
    let max_steps = value_horizon(p.gamma);
    let samples: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|k| run(p, policy, s0, seed.wrapping_add(k), max_steps, None).discounted_cost)
        .collect();
    Ok(summarize(&samples, seed))
}

/// Monte Carlo estimate of `E[γ^T | h_0 = h0]` under always-ordinary.
///
/// Requires `H ≥ h0 + 50·⌈1/(μ_o − λ_o)⌉` so the reflecting top is
/// effectively never reached.
pub fn estimate_hitting_mgf(
    p: &ModelParams,
    h0: usize,
    n: usize,
    seed: u64,
) -> Result<EstimateResult, SimError> {
    let report = p.validate();
    if !report.is_ok() {
        return Err(SimError::InvalidParams(report));
    }
    if !p.is_simplified() {
        return Err(SimError::BadArgument(
            "hitting-time MGF requires the simplified service".into(),
        ));
    }
    if p.lambda_o >= 0.5 {
        return Err(SimError::BadArgument(
            "hitting-time MGF requires λ_o < 0.5".into(),
        ));
    }
    let margin = 50 * (1.0 / (p.mu_o() - p.lambda_o)).ceil() as usize;
    if p.h_max < h0 + margin {
        return Err(SimError::BadArgument(format!(
            "H = {} too small: need H ≥ h0 + {margin} = {}",
            p.h_max,
            h0 + margin
        )));
    }
    if n < 2 {
        return Err(SimError::BadArgument("n must be ≥ 2".into()));
    }
    let policy = make_constant(p.h_max, Tier::Ordinary);
    let s0 = State::new(Tier::Ordinary, h0);
    let runs: Vec<(bool, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let out = run(p, &policy, s0, seed.wrapping_add(k), MGF_MAX_STEPS, None);
            (out.absorbed, p.gamma.powi(out.t as i32))
        })
        .collect();
    let truncated = runs.iter().filter(|(absorbed, _)| !absorbed).count();
    let samples: Vec<f64> = runs.iter().filter(|(a, _)| *a).map(|(_, g)| *g).collect();
    let estimate = summarize(&samples, seed);
    if truncated > 0 {
        return Err(SimError::TruncationWarning {
            truncated,
            max_steps: MGF_MAX_STEPS,
            estimate,
        });
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic;
    use crate::model::simplified_preset;
    use crate::solver::{self, EvalMethod};

    fn six_level(c_c: f64) -> ModelParams {
        simplified_preset(0.2, 0.3, 1.0, c_c, 0.9, 6).unwrap()
    }

    #[test]
    fn start_at_critical() {
        let p = six_level(20.0);
        let tr = simulate(
            &p,
            &make_constant(6, Tier::Ordinary),
            State::new(Tier::Ordinary, 0),
            1,
            100,
        )
        .unwrap();
        assert!(tr.absorbed);
        assert_eq!(tr.t, 0);
        assert_eq!(tr.discounted_cost, 20.0);
    }

    #[test]
    fn certain_down_drift() {
        let p = ModelParams {
            lambda_o: 0.0,
            ..six_level(20.0)
        };
        let tr = simulate(
            &p,
            &make_constant(6, Tier::Ordinary),
            State::new(Tier::Ordinary, 2),
            9,
            100,
        )
        .unwrap();
        assert!(tr.absorbed);
        assert_eq!(tr.t, 2);
        assert_eq!(tr.steps.len(), 2);
        assert_eq!(tr.discounted_cost, 0.9 * 0.9 * 20.0);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = six_level(20.0);
        let pol = make_constant(6, Tier::Ordinary);
        let a = simulate(&p, &pol, State::new(Tier::Ordinary, 3), 42, 1000).unwrap();
        let b = simulate(&p, &pol, State::new(Tier::Ordinary, 3), 42, 1000).unwrap();
        assert_eq!(a, b);
        for (k, st) in a.steps.iter().enumerate() {
            assert!(st.state.h >= 1, "step {k}");
        }
    }

    #[test]
    fn truncation_reported() {
        let p = six_level(20.0);
        let pol = make_constant(6, Tier::Intensive);
        let tr = simulate(&p, &pol, State::new(Tier::Ordinary, 6), 3, 0).unwrap();
        assert!(!tr.absorbed);
        assert_eq!(tr.discounted_cost, 0.0);
    }

    #[test]
    fn value_estimate_matches_dp() {
        let p = six_level(20.0);
        let pol = make_constant(6, Tier::Ordinary);
        let s0 = State::new(Tier::Ordinary, 3);
        let est = estimate_value(&p, &pol, s0, 100_000, 7).unwrap();
        let exact = solver::policy_evaluation(&p, &pol, EvalMethod::Direct, 1e-12)
            .unwrap()
            .get(s0);
        assert!(
            (est.mean - exact).abs() <= 4.0 * est.stderr,
            "{} vs {exact}",
            est.mean
        );
    }

    #[test]
    fn value_estimate_under_optimal_threshold() {
        let p = six_level(60.0);
        let r = solver::solve(&p).unwrap();
        let s0 = State::new(Tier::Ordinary, 2);
        let est = estimate_value(&p, &r.policy, s0, 100_000, 11).unwrap();
        let exact = r.values.get(s0);
        assert!(
            (est.mean - exact).abs() <= 4.0 * est.stderr,
            "{} vs {exact}",
            est.mean
        );
    }

    #[test]
    fn degenerate_value_estimate_is_exact() {
        let p = ModelParams {
            lambda_o: 0.0,
            ..six_level(20.0)
        };
        let est = estimate_value(
            &p,
            &make_constant(6, Tier::Ordinary),
            State::new(Tier::Ordinary, 1),
            100,
            0,
        )
        .unwrap();
        assert_eq!(est.mean, 0.9 * 20.0);
        assert_eq!(est.stderr, 0.0);
        assert!(estimate_value(
            &p,
            &make_constant(6, Tier::Ordinary),
            State::new(Tier::Ordinary, 1),
            10,
            0
        )
        .is_err());
    }

    #[test]
    fn mgf_degenerate() {
        let p = simplified_preset(0.0, 0.3, 1.0, 20.0, 0.9, 60).unwrap();
        let est = estimate_hitting_mgf(&p, 1, 100, 5).unwrap();
        assert_eq!(est.mean, 0.9);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mgf_matches_phi() {
        let p = simplified_preset(0.2, 0.3, 1.0, 20.0, 0.9, 500).unwrap();
        let est = estimate_hitting_mgf(&p, 1, 200_000, 123).unwrap();
        let phi = asymptotic::phi(0.2, 0.9).unwrap();
        assert!(
            (est.mean - phi).abs() <= 4.0 * est.stderr,
            "{} vs {phi}",
            est.mean
        );
    }

    #[test]
    fn mgf_preconditions() {
        let small = simplified_preset(0.2, 0.3, 1.0, 20.0, 0.9, 50).unwrap();
        assert!(matches!(
            estimate_hitting_mgf(&small, 1, 100, 0),
            Err(SimError::BadArgument(_))
        ));
        let general = ModelParams {
            c_oi: 1.0,
            ..simplified_preset(0.2, 0.3, 1.0, 20.0, 0.9, 500).unwrap()
        };
        assert!(estimate_hitting_mgf(&general, 1, 100, 0).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let p = six_level(20.0);
        let pol = make_constant(6, Tier::Ordinary);
        let tr = simulate(&p, &pol, State::new(Tier::Ordinary, 3), 5, 1000).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,tier,h,action,cost"));
        assert_eq!(lines.count(), tr.steps.len());
        assert!(text.starts_with("step,tier,h,action,cost\n0,o,3,o,0\n"));
    }

    #[test]
    fn estimate_json_shape() {
        let p = six_level(20.0);
        let est = estimate_value(
            &p,
            &make_constant(6, Tier::Ordinary),
            State::new(Tier::Ordinary, 2),
            100,
            1,
        )
        .unwrap();
        let j = serde_json::to_value(&est).unwrap();
        assert_eq!(j["generator_id"], GENERATOR_ID);
        assert_eq!(j["n"], 100);
    }
}
