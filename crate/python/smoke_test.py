"""Smoke test for the rpm_monitor extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
Then run:                 python3 python/smoke_test.py
"""

import math

import rpm_monitor as rm


def six_level(c_c):
    return rm.simplified_preset(0.2, 0.3, 1.0, c_c, 0.9, 6)


def main():
    p = six_level(20.0)
    assert p.validate() == []
    r = rm.solve(p)
    assert r.policy_class() == {"class": "always_ordinary"}, r.policy_class()
    assert r.values_ordinary[0] == 20.0

    r = rm.solve(six_level(60.0))
    assert r.policy_class() == {"class": "threshold", "h_bar": 3}
    assert r.policy == rm.make_threshold(6, 3)
    assert "".join(r.policy.ordinary) == "iiiooo"

    bf = rm.bruteforce_optimal(six_level(60.0))
    assert max(abs(a - b) for a, b in zip(bf.values_ordinary, r.values_ordinary)) < 1e-6

    exact_o, _ = rm.policy_evaluation(six_level(60.0), r.policy)
    assert max(abs(a - b) for a, b in zip(exact_o, r.values_ordinary)) < 1e-7

    q_o, _ = rm.q_values(six_level(60.0), r.values_ordinary, r.values_intensive)
    assert all((qi < qo) == (h <= 3) for h, (qo, qi) in enumerate(q_o, start=1))

    bad = rm.ModelParams(6, 0.4, 0.3, 0.0, 1.0, 20.0, 0.9)
    assert any("λ_i ≥ λ_o" in msg for _, msg in bad.validate())
    try:
        rm.solve(bad)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid params accepted")

    phi = rm.phi(0.2, 0.9)
    assert abs(phi - 0.9 * (0.2 * phi * phi + 0.8)) < 1e-12
    report = rm.check(six_level(60.0))
    assert report["cond_a"] and not report["cond_b"] and report["h_prime"] == 27

    ten_level = rm.simplified_preset(0.2, 0.4, 1.0, 50.0, 0.9, 10)
    (ratio,) = rm.boundary(ten_level, "cost_ratio")
    assert abs(ratio - 20.02) < 0.05
    sweep = rm.run_sweep(ten_level, "cost_ratio", rm.linear_grid(5, 60, 1), True)
    classes = [row["policy_class"]["class"] for row in sweep["rows"]]
    assert classes.index("threshold") == 16

    comparison_case = rm.simplified_preset(0.2, 0.4, 1.0, 5.0, 0.9, 5)
    gap = max(abs(v - a) / a for h, v, a in rm.value_comparison(comparison_case) if h >= 1)
    assert gap <= 0.05

    est = rm.estimate_value(six_level(20.0), rm.make_constant(6, "o"), "o", 3, 20000, seed=1)
    exact_o, _ = rm.policy_evaluation(six_level(20.0), rm.make_constant(6, "o"))
    assert abs(est["mean"] - exact_o[3]) <= 4 * est["stderr"]
    assert est == rm.estimate_value(six_level(20.0), rm.make_constant(6, "o"), "o", 3, 20000, seed=1)

    deg = rm.simplified_preset(0.0, 0.3, 1.0, 20.0, 0.9, 6)
    est = rm.estimate_value(deg, rm.make_constant(6, "o"), "o", 2, 100)
    assert math.isclose(est["mean"], 0.81 * 20.0) and est["stderr"] == 0.0

    hyst = rm.ModelParams(6, 0.2, 0.3, 0.0, 1.0, 60.0, 0.9, c_oi=0.5, c_io=0.5)
    assert rm.solve(hyst).policy_class() == {"class": "two_threshold", "lower": 2, "upper": 5}

    print("rpm_monitor smoke test: ok")


if __name__ == "__main__":
    main()
