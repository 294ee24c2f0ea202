//! One-parameter sweeps over the optimal policy, the asymptotic-vs-exact
//! value comparison, and their CSV/SVG exports.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotic::{self, FreeParam};
use crate::model::{ModelParams, State, Tier};
use crate::policy::PolicyClass;
use crate::solver;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("asymptotic: {0}")]
    Asymptotic(#[from] asymptotic::AsymptoticError),
    #[error("solver: {0}")]
    Solver(#[from] solver::SolverError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// Varies `C_c` with `C_i` fixed.
    #[serde(rename = "cost_ratio")]
    CostRatio,
    #[serde(rename = "lambda_i")]
    LambdaI,
    #[serde(rename = "gamma")]
    Gamma,
    /// Sets both switching costs to the grid value.
    #[serde(rename = "C_oi_C_io")]
    SwitchingCost,
}

impl SweepParam {
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::CostRatio => "C_c/C_i",
            SweepParam::LambdaI => "lambda_i",
            SweepParam::Gamma => "gamma",
            SweepParam::SwitchingCost => "C_oi = C_io",
        }
    }

    fn boundary_param(self) -> Option<FreeParam> {
        match self {
            SweepParam::CostRatio => Some(FreeParam::CostRatio),
            SweepParam::LambdaI => Some(FreeParam::LambdaI),
            SweepParam::Gamma => Some(FreeParam::Gamma),
            SweepParam::SwitchingCost => None,
        }
    }

    pub fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self {
            SweepParam::CostRatio => p.c_c = value * p.c_i,
            SweepParam::LambdaI => p.lambda_i = value,
            SweepParam::Gamma => p.gamma = value,
            SweepParam::SwitchingCost => {
                p.c_oi = value;
                p.c_io = value;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ModelParams,
    pub free: SweepParam,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub annotate_boundary: bool,
}

/// `start, start + step, ...` up to `stop` inclusive (within half a step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 0.5).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.grid.is_empty() {
            return Err(BenchError::InvalidSpec("grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(BenchError::InvalidSpec("grid must be strictly increasing".into()));
        }
        for &value in &self.grid {
            let report = self.free.apply(&self.base, value).validate();
            if !report.is_ok() {
                return Err(BenchError::InvalidSpec(format!(
                    "grid point {} = {value}: {report}",
                    self.free.label()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// `None` when the solve failed; see `error`.
    pub policy_class: Option<PolicyClass>,
    pub thm1_holds: Option<bool>,
    pub cond_b_holds: Option<bool>,
    pub solve_iterations: usize,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn h_bar(&self) -> Option<usize> {
        self.policy_class.and_then(|c| c.h_bar())
    }

    fn class_name(&self) -> &'static str {
        self.policy_class.map_or("error", |c| c.name())
    }

    fn threshold_cell(&self) -> String {
        match self.policy_class {
            Some(PolicyClass::Threshold { h_bar }) => h_bar.to_string(),
            Some(PolicyClass::TwoThreshold { lower, upper }) => format!("{lower}:{upper}"),
            _ => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub free: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Closed-form boundary roots, when requested and defined.
    pub boundary: Vec<f64>,
}

fn evaluate_point(spec: &SweepSpec, value: f64) -> SweepRow {
    let p = spec.free.apply(&spec.base, value);
    let (thm1_holds, cond_b_holds) = match (
        asymptotic::check_ordinary_optimal(&p),
        asymptotic::check_threshold_conditions(&p),
    ) {
        (Ok(t1), Ok((_, b))) => (Some(t1), Some(b)),
        _ => (None, None),
    };
    match solver::solve(&p) {
        Ok(r) => SweepRow {
            value,
            policy_class: Some(r.policy.classify()),
            thm1_holds,
            cond_b_holds,
            solve_iterations: r.iterations,
            error: None,
        },
        Err(e) => SweepRow {
            value,
            policy_class: None,
            thm1_holds,
            cond_b_holds,
            solve_iterations: match &e {
                solver::SolverError::NotConverged(r) => r.iterations,
                _ => 0,
            },
            error: Some(e.to_string()),
        },
    }
}

/// Solves every grid point (in parallel; rows keep grid order).
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, BenchError> {
    spec.validate()?;
    let rows: Vec<SweepRow> = spec.grid.par_iter().map(|&v| evaluate_point(spec, v)).collect();
    let boundary = match (spec.annotate_boundary, spec.free.boundary_param()) {
        (true, Some(free)) => {
            let base = match spec.free {
                // the closed form needs a concrete C_c; any grid point will do
                SweepParam::CostRatio => spec.free.apply(&spec.base, spec.grid[0]),
                _ => spec.base,
            };
            asymptotic::boundary(&base, free)?
        }
        _ => Vec::new(),
    };
    Ok(SweepOutcome {
        free: spec.free,
        rows,
        boundary,
    })
}

impl SweepOutcome {
    /// `(last always-ordinary value, first threshold value)` around the first
    /// regime change.
    pub fn regime_bracket(&self) -> Option<(f64, f64)> {
        self.rows
            .windows(2)
            .find_map(|w| match (w[0].policy_class, w[1].policy_class) {
                (Some(PolicyClass::AlwaysOrdinary), Some(PolicyClass::Threshold { .. })) => {
                    Some((w[0].value, w[1].value))
                }
                _ => None,
            })
    }

    /// Threshold levels along the grid never decrease, considering only
    /// rows that classify as single-threshold policies.
    pub fn thresholds_non_decreasing(&self) -> bool {
        let hs: Vec<usize> = self.rows.iter().filter_map(|r| r.h_bar()).collect();
        hs.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv_writer(w);
        out.write_record(["value", "policy_class", "h_bar", "thm1_holds", "cond_b_holds"])?;
        let opt = |b: Option<bool>| b.map_or(String::new(), |b| b.to_string());
        for r in &self.rows {
            out.write_record([
                r.value.to_string(),
                r.class_name().to_string(),
                r.threshold_cell(),
                opt(r.thm1_holds),
                opt(r.cond_b_holds),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Policy-class bands, blue threshold markers and dashed boundary lines.
    pub fn to_svg(&self, h_max: usize) -> String {
        let free = self.free;
        let (w, h) = (640.0, 400.0);
        let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
        let pw = w - left - right;
        let ph = h - top - bottom;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
        );
        if let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) {
            let (x0, x1) = (first.value, last.value);
            let span = if x1 > x0 { x1 - x0 } else { 1.0 };
            let x_of = |v: f64| left + (v - x0) / span * pw;
            let y_of = |level: f64| top + ph - level / h_max.max(1) as f64 * ph;
            let n = self.rows.len();
            for (k, r) in self.rows.iter().enumerate() {
                let lo = if k == 0 {
                    x0
                } else {
                    0.5 * (self.rows[k - 1].value + r.value)
                };
                let hi = if k + 1 == n {
                    x1
                } else {
                    0.5 * (r.value + self.rows[k + 1].value)
                };
                let fill = match r.policy_class {
                    Some(PolicyClass::AlwaysOrdinary) => "#e8f0fe",
                    Some(PolicyClass::AlwaysIntensive) => "#fde8e8",
                    Some(PolicyClass::Threshold { .. }) => "#eef7ee",
                    Some(PolicyClass::TwoThreshold { .. }) => "#fdf6e3",
                    _ => "#eeeeee",
                };
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{top}" width="{:.2}" height="{ph}" fill="{fill}"/>"#,
                    x_of(lo),
                    (x_of(hi) - x_of(lo)).max(0.5)
                );
            }
            for r in &self.rows {
                let levels: Vec<usize> = match r.policy_class {
                    Some(PolicyClass::Threshold { h_bar }) => vec![h_bar],
                    Some(PolicyClass::TwoThreshold { lower, upper }) => vec![lower, upper],
                    _ => vec![],
                };
                for level in levels {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="blue"/>"#,
                        x_of(r.value),
                        y_of(level as f64)
                    );
                }
            }
            for &b in &self.boundary {
                if b >= x0 && b <= x1 {
                    let x = x_of(b);
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="orange" stroke-width="2" stroke-dasharray="6,4"/>"#,
                        top + ph
                    );
                }
            }
            let _ = writeln!(
                svg,
                r#"<text x="{left}" y="{:.2}" font-size="11">{x0}</text><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{x1}</text>"#,
                top + ph + 14.0,
                left + pw,
                top + ph + 14.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            h - 12.0,
            free.label()
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">h_bar</text>"#,
            top + ph / 2.0,
            top + ph / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">0</text>"#,
            left - 4.0,
            top + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{h_max}</text>"#,
            left - 4.0,
            top + 10.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub h: usize,
    pub v_numeric: f64,
    pub v_asymptotic: f64,
}

/// Solver value next to `φ^h · C_c` for every level `0..=H`.
pub fn value_comparison(p: &ModelParams) -> Result<Vec<ComparisonRow>, BenchError> {
    let phi = asymptotic::phi(p.lambda_o, p.gamma)?;
    if !p.is_simplified() {
        return Err(BenchError::InvalidSpec(
            "value comparison needs the simplified service".into(),
        ));
    }
    let r = solver::solve(p)?;
    Ok((0..=p.h_max)
        .map(|h| ComparisonRow {
            h,
            v_numeric: r.values.get(State::new(Tier::Ordinary, h)),
            v_asymptotic: phi.powi(h as i32) * p.c_c,
        })
        .collect())
}

/// Largest `|V* − V_o| / V_o` over `h` in `1..=H`.
pub fn max_relative_gap(rows: &[ComparisonRow]) -> f64 {
    rows.iter()
        .filter(|r| r.h >= 1)
        .map(|r| (r.v_numeric - r.v_asymptotic).abs() / r.v_asymptotic)
        .fold(0.0, f64::max)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], w: W) -> Result<(), BenchError> {
    let mut out = csv_writer(w);
    out.write_record(["h", "v_numeric", "v_asymptotic"])?;
    for r in rows {
        out.write_record([
            r.h.to_string(),
            r.v_numeric.to_string(),
            r.v_asymptotic.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simplified_preset;
    use crate::policy::make_constant;
    use crate::solver::{policy_evaluation, EvalMethod};

    fn ten_level_base() -> ModelParams {
        simplified_preset(0.2, 0.4, 1.0, 50.0, 0.9, 10).unwrap()
    }

    #[test]
    fn grid_helper() {
        let g = linear_grid(5.0, 60.0, 1.0);
        assert_eq!(g.len(), 56);
        assert_eq!(g[55], 60.0);
        let g = linear_grid(0.21, 0.5, 0.005);
        assert_eq!(g.len(), 59);
        assert!((g[58] - 0.5).abs() < 1e-12);
        assert!(linear_grid(1.0, 0.0, 0.1).is_empty());
    }

    #[test]
    fn spec_validation() {
        let bad = SweepSpec {
            base: ten_level_base(),
            free: SweepParam::CostRatio,
            grid: vec![5.0, 5.0],
            annotate_boundary: false,
        };
        assert!(matches!(run_sweep(&bad), Err(BenchError::InvalidSpec(_))));
        let out_of_range = SweepSpec {
            grid: vec![0.1, 0.3],
            free: SweepParam::LambdaI,
            ..bad.clone()
        };
        assert!(out_of_range.validate().is_err());
        let empty = SweepSpec { grid: vec![], ..bad };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn cost_ratio_sweep_shape() {
        let spec = SweepSpec {
            base: ten_level_base(),
            free: SweepParam::CostRatio,
            grid: linear_grid(5.0, 60.0, 1.0),
            annotate_boundary: true,
        };
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.rows.len(), 56);
        let (lo, hi) = out.regime_bracket().unwrap();
        assert!(lo <= 20.03 + 1.0 && hi >= 20.03 - 1.0, "({lo}, {hi})");
        assert!(out.thresholds_non_decreasing());
        assert_eq!(out.boundary.len(), 1);
        let again = run_sweep(&spec).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn switching_cost_sweep_is_tier_dependent() {
        let base = ModelParams {
            h_max: 10,
            ..ten_level_base()
        };
        let spec = SweepSpec {
            base,
            free: SweepParam::SwitchingCost,
            grid: vec![0.0, 0.5, 1.0],
            annotate_boundary: true,
        };
        let out = run_sweep(&spec).unwrap();
        assert!(out.boundary.is_empty());
        assert_eq!(out.rows[1].thm1_holds, None);
        assert!(out.rows[0].thm1_holds.is_some());
    }

    #[test]
    fn comparison_rows() {
        let p = simplified_preset(0.2, 0.4, 1.0, 5.0, 0.9, 5).unwrap();
        let rows = value_comparison(&p).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[0].v_numeric, rows[0].v_asymptotic), (5.0, 5.0));
        assert!(max_relative_gap(&rows) <= 0.05);
    }

    #[test]
    fn comparison_equal_lambdas_is_ordinary_value() {
        let p = simplified_preset(0.2, 0.2, 1.0, 5.0, 0.9, 8).unwrap();
        let rows = value_comparison(&p).unwrap();
        let v = policy_evaluation(&p, &make_constant(8, Tier::Ordinary), EvalMethod::Direct, 1e-12).unwrap();
        for r in rows {
            assert!((r.v_numeric - v.get(State::new(Tier::Ordinary, r.h))).abs() <= 1e-9);
        }
    }

    #[test]
    fn csv_headers() {
        let empty = SweepOutcome {
            free: SweepParam::CostRatio,
            rows: vec![],
            boundary: vec![],
        };
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "value,policy_class,h_bar,thm1_holds,cond_b_holds\n"
        );

        let mut buf = Vec::new();
        write_comparison_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "h,v_numeric,v_asymptotic\n");

        let spec = SweepSpec {
            base: ten_level_base(),
            free: SweepParam::CostRatio,
            grid: vec![10.0, 60.0],
            annotate_boundary: true,
        };
        let out = run_sweep(&spec).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "10,always_ordinary,,true,false");
        assert!(lines[2].starts_with("60,threshold,"), "{}", lines[2]);
        let svg = out.to_svg(10);
        assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray") && svg.contains("fill=\"blue\""));
    }
}
