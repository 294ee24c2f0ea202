//! Optimal policies with nonzero switching costs, checked against an
//! independent in-place value iteration.

use rpm_core::model::{ModelParams, State, Tier};
use rpm_core::policy::{self, PolicyClass};
use rpm_core::solver;

/// Gauss–Seidel value iteration written from the model definition alone.
fn oracle_policy(p: &ModelParams) -> [Vec<char>; 2] {
    let h_max = p.h_max;
    let mut v = vec![vec![0.0; h_max + 1]; 2];
    v[0][0] = p.c_c;
    v[1][0] = p.c_c;
    let lam = [p.lambda_o, p.lambda_i];
    let run_cost = [p.c_o, p.c_i];
    let switch = [[0.0, p.c_oi], [p.c_io, 0.0]];
    let q = |v: &Vec<Vec<f64>>, m: usize, h: usize, a: usize| {
        let up = (h + 1).min(h_max);
        run_cost[a] + switch[m][a] + p.gamma * (lam[a] * v[a][up] + (1.0 - lam[a]) * v[a][h - 1])
    };
    for _ in 0..5000 {
        for m in 0..2 {
            for h in 1..=h_max {
                v[m][h] = q(&v, m, h, 0).min(q(&v, m, h, 1));
            }
        }
    }
    let row = |m: usize| {
        (1..=h_max)
            .map(|h| if q(&v, m, h, 1) < q(&v, m, h, 0) { 'i' } else { 'o' })
            .collect()
    };
    [row(0), row(1)]
}

fn hysteresis_instance() -> ModelParams {
    ModelParams {
        h_max: 6,
        lambda_o: 0.2,
        lambda_i: 0.3,
        c_o: 0.0,
        c_i: 1.0,
        c_c: 60.0,
        c_oi: 0.5,
        c_io: 0.5,
        gamma: 0.9,
    }
}

#[test]
fn switching_costs_produce_two_thresholds() {
    let p = hysteresis_instance();
    let [o_row, i_row] = oracle_policy(&p);
    assert_eq!(o_row.iter().collect::<String>(), "iioooo");
    assert_eq!(i_row.iter().collect::<String>(), "iiiiio");

    let r = solver::solve(&p).unwrap();
    assert_eq!(
        r.policy.classify(),
        PolicyClass::TwoThreshold { lower: 2, upper: 5 }
    );
    assert_eq!(r.policy, policy::make_two_threshold(6, 2, 5).unwrap());
}

#[test]
fn intensive_row_switches_later_than_ordinary_row() {
    let base = hysteresis_instance();
    for c in [0.0, 0.1, 0.25, 0.5] {
        let p = ModelParams {
            c_oi: c,
            c_io: c,
            ..base
        };
        let r = solver::solve(&p).unwrap();
        let last_intensive = |tier| {
            (1..=p.h_max)
                .filter(|&h| r.policy.action(State::new(tier, h)) == Tier::Intensive)
                .max()
        };
        let lo = last_intensive(Tier::Ordinary).unwrap_or(0);
        let hi = last_intensive(Tier::Intensive).unwrap_or(0);
        assert!(
            lo <= hi,
            "switch cost {c}: ordinary row {lo} > intensive row {hi}"
        );
        let [o_row, i_row] = oracle_policy(&p);
        for h in 1..=p.h_max {
            assert_eq!(
                r.policy.action(State::new(Tier::Ordinary, h)).symbol(),
                o_row[h - 1]
            );
            assert_eq!(
                r.policy.action(State::new(Tier::Intensive, h)).symbol(),
                i_row[h - 1]
            );
        }
    }
}

#[test]
fn bruteforce_agrees_on_hysteresis_instance() {
    let p = hysteresis_instance();
    let vi = solver::solve(&p).unwrap();
    let bf = solver::bruteforce_optimal(&p).unwrap();
    assert!(vi.values.sup_distance(&bf.values) < 1e-6);
    assert_eq!(bf.iterations, 1 << 12);
}
