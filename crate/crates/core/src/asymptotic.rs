//! Closed-form results for the simplified service in the large-`H` regime.
//!
//! Under always-ordinary monitoring the health level is a random walk with
//! downward drift, and the discounted absorption cost from level `h` is
//! `φ^h · C_c`, where `φ = E[γ^T]` for a single level. Everything here is a
//! pure function of the parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;

/// Spacing of the scan used to bracket γ-boundary roots.
pub const GAMMA_SCAN_STEP: f64 = 1e-3;
pub const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticError {
    #[error("domain error: {0}")]
    Domain(String),
}

fn domain(msg: impl Into<String>) -> AsymptoticError {
    AsymptoticError::Domain(msg.into())
}

/// Single-level hitting-time factor `φ = (1 − √(1 − 4λμγ²)) / (2λγ)`.
///
/// Evaluated in the rationalized form `2μγ / (1 + √(1 − 4λμγ²))`, which is
/// algebraically identical and avoids cancellation for small `γ` and for
/// `λ_o` near one half.
pub fn phi(lambda_o: f64, gamma: f64) -> Result<f64, AsymptoticError> {
    if !(lambda_o > 0.0 && lambda_o < 0.5) {
        return Err(domain(format!(
            "Assumption 2(b) violated: λ_o must lie in (0, 0.5), got {lambda_o}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(domain(format!("γ must lie in (0, 1], got {gamma}")));
    }
    let mu = 1.0 - lambda_o;
    // 1 − 4λμγ² rewritten as a sum of nonnegative terms
    let disc = (mu - lambda_o).powi(2) + 4.0 * lambda_o * mu * (1.0 - gamma) * (1.0 + gamma);
    Ok(2.0 * mu * gamma / (1.0 + disc.sqrt()))
}

fn require_simplified(p: &ModelParams) -> Result<f64, AsymptoticError> {
    if !p.is_simplified() {
        return Err(domain(
            "asymptotic results apply to the simplified service only (C_o = C_oi = C_io = 0)",
        ));
    }
    if !(p.c_c > 0.0) {
        return Err(domain("C_c must be positive"));
    }
    phi(p.lambda_o, p.gamma)
}

/// `V_o(h) = φ^h · C_c`.
pub fn v_o_asymptotic(p: &ModelParams, h: usize) -> Result<f64, AsymptoticError> {
    let phi = require_simplified(p)?;
    Ok(phi.powi(h as i32) * p.c_c)
}

/// Left side of the ordinary-optimality condition, `γ(λ_i − λ_o)(1 − φ²)`.
pub fn ordinary_condition_lhs(p: &ModelParams) -> Result<f64, AsymptoticError> {
    let phi = require_simplified(p)?;
    Ok(p.gamma * (p.lambda_i - p.lambda_o) * (1.0 - phi * phi))
}

/// `γμ(1 + γμ) / (1 − γ²λμ)` for the ordinary tier.
pub fn cond_b_lhs(lambda_o: f64, gamma: f64) -> f64 {
    let mu = 1.0 - lambda_o;
    gamma * mu * (1.0 + gamma * mu) / (1.0 - gamma * gamma * lambda_o * mu)
}

/// True iff `γ(λ_i − λ_o)(1 − φ²) ≤ C_i / C_c`, sufficient for always-ordinary
/// to be optimal.
pub fn check_ordinary_optimal(p: &ModelParams) -> Result<bool, AsymptoticError> {
    Ok(ordinary_condition_lhs(p)? <= p.c_i / p.c_c)
}

/// `(cond_a, cond_b)` of the threshold-optimality result.
pub fn check_threshold_conditions(p: &ModelParams) -> Result<(bool, bool), AsymptoticError> {
    let cond_a = ordinary_condition_lhs(p)? > p.c_i / p.c_c;
    Ok((cond_a, cond_b_lhs(p.lambda_o, p.gamma) <= 1.0))
}

/// Level above which ordinary monitoring is optimal in the asymptotic
/// regime, `⌈log(C_i/C_c) / log φ⌉ + 1`. Free intensive monitoring
/// (`C_i = 0`) gives `1`.
pub fn h_prime(p: &ModelParams) -> Result<usize, AsymptoticError> {
    let phi = require_simplified(p)?;
    if !(p.gamma < 1.0) {
        return Err(domain("h′ requires γ < 1"));
    }
    if p.c_i == 0.0 {
        return Ok(1);
    }
    let ratio = (p.c_i / p.c_c).ln() / phi.ln();
    // ratio is ≥ 0 since C_i ≤ C_c and φ < 1
    Ok(ratio.max(0.0).ceil() as usize + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    CostRatio,
    LambdaI,
    Gamma,
}

/// Free-parameter values at which `γ(λ_i − λ_o)(1 − φ²) = C_i / C_c`.
///
/// Cost-ratio and λ_i boundaries are closed-form. The γ boundary is found by
/// scanning `(0, 1)` on a `1e-3` grid for sign changes and bisecting each
/// bracket; zero, one or two roots may come back, in ascending order. An
/// empty list means the condition never binds.
pub fn boundary(p: &ModelParams, free: FreeParam) -> Result<Vec<f64>, AsymptoticError> {
    require_simplified(p)?;
    match free {
        FreeParam::CostRatio => {
            let lhs = ordinary_condition_lhs(p)?;
            Ok(if lhs > 0.0 { vec![1.0 / lhs] } else { vec![] })
        }
        FreeParam::LambdaI => {
            let phi = phi(p.lambda_o, p.gamma)?;
            let li = p.lambda_o + (p.c_i / p.c_c) / (p.gamma * (1.0 - phi * phi));
            Ok(if li < 1.0 { vec![li] } else { vec![] })
        }
        FreeParam::Gamma => {
            let rhs = p.c_i / p.c_c;
            let f = |g: f64| -> Result<f64, AsymptoticError> {
                let phi = phi(p.lambda_o, g)?;
                Ok(g * (p.lambda_i - p.lambda_o) * (1.0 - phi * phi) - rhs)
            };
            let steps = (1.0 / GAMMA_SCAN_STEP).round() as usize;
            let mut roots = Vec::new();
            let mut prev_g = GAMMA_SCAN_STEP;
            let mut prev_f = f(prev_g)?;
            for k in 2..steps {
                let g = k as f64 * GAMMA_SCAN_STEP;
                let fg = f(g)?;
                if fg == 0.0 {
                    roots.push(g);
                } else if prev_f != 0.0 && (prev_f < 0.0) != (fg < 0.0) {
                    roots.push(bisect(&f, prev_g, g, prev_f)?);
                }
                prev_g = g;
                prev_f = fg;
            }
            Ok(roots)
        }
    }
}

fn bisect(
    f: &impl Fn(f64) -> Result<f64, AsymptoticError>,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
) -> Result<f64, AsymptoticError> {
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub phi: f64,
    pub thm1_lhs: f64,
    pub thm1_rhs: f64,
    pub ordinary_sufficient: bool,
    pub cond_a: bool,
    pub cond_b_lhs: f64,
    pub cond_b: bool,
    pub h_prime: usize,
}

pub fn report(p: &ModelParams) -> Result<AsymptoticReport, AsymptoticError> {
    let phi = require_simplified(p)?;
    let thm1_lhs = ordinary_condition_lhs(p)?;
    let thm1_rhs = p.c_i / p.c_c;
    let cond_b_lhs = cond_b_lhs(p.lambda_o, p.gamma);
    Ok(AsymptoticReport {
        phi,
        thm1_lhs,
        thm1_rhs,
        ordinary_sufficient: thm1_lhs <= thm1_rhs,
        cond_a: thm1_lhs > thm1_rhs,
        cond_b_lhs,
        cond_b: cond_b_lhs <= 1.0,
        h_prime: h_prime(p)?,
    })
}

impl AsymptoticReport {
    /// Aligned two-column rendering.
    pub fn table(&self) -> String {
        let rows: [(&str, String); 8] = [
            ("phi", format!("{:.6}", self.phi)),
            ("thm1_lhs", format!("{:.6}", self.thm1_lhs)),
            ("thm1_rhs", format!("{:.6}", self.thm1_rhs)),
            ("ordinary_sufficient", self.ordinary_sufficient.to_string()),
            ("cond_a", self.cond_a.to_string()),
            ("cond_b_lhs", format!("{:.6}", self.cond_b_lhs)),
            ("cond_b", self.cond_b.to_string()),
            ("h_prime", self.h_prime.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<20} {v:>12}\n"));
        }
        out
    }
}
