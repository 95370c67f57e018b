"""Smoke tests for the nphmm python module.

Run with PYTHONPATH pointing at the directory containing the built extension.
"""

import json
import math
import sys
import tempfile

import nphmm

PARAMS_A = json.dumps(
    {
        "k": 2,
        "Q": [0.7, 0.3, 0.4, 0.6],
        "emissions": [
            {"type": "discrete", "probs": [0.6, 0.3, 0.1], "tail_mass": 0.0, "tail_rate": 0.0},
            {"type": "discrete", "probs": [0.2, 0.3, 0.5], "tail_mass": 0.0, "tail_rate": 0.0},
        ],
    }
)

PARAMS_B = json.dumps(
    {
        "k": 2,
        "Q": [0.6, 0.4, 0.3, 0.7],
        "emissions": [
            {"type": "discrete", "probs": [0.5, 0.4, 0.1], "tail_mass": 0.0, "tail_rate": 0.0},
            {"type": "discrete", "probs": [0.2, 0.4, 0.4], "tail_mass": 0.0, "tail_rate": 0.0},
        ],
    }
)


def test_rho_and_ck():
    assert nphmm.rho(0.5, 2) == 0.0
    assert abs(nphmm.rho(0.1, 2) - 8.0 / 9.0) < 1e-15
    assert nphmm.c_k_constant(2, 0.1) > 0.0


def test_simulate_and_log_likelihood():
    states, obs = nphmm.simulate(PARAMS_A, 50, seed=7)
    assert len(states) == 50 and len(obs) == 50
    assert all(s in (0, 1) for s in states)
    assert all(float(y).is_integer() and 1 <= y <= 3 for y in obs)
    ll = nphmm.log_likelihood(PARAMS_A, obs)
    assert math.isfinite(ll) and ll < 0.0
    # Wrong model should fit simulated data no better than the truth on average;
    # here just confirm it returns a finite, different value.
    ll_b = nphmm.log_likelihood(PARAMS_B, obs)
    assert math.isfinite(ll_b) and ll_b != ll


def test_d_ell_report():
    rep = json.loads(nphmm.d_ell(PARAMS_A, PARAMS_B, ell=2, method="exact"))
    assert rep["method"] == "exact-enumeration"
    assert 0.0 < rep["value"] <= 2.0
    same = json.loads(nphmm.d_ell(PARAMS_A, PARAMS_A, ell=2, method="exact"))
    assert same["value"] <= 1e-12


def test_kl_path():
    rep = json.loads(nphmm.kl_path(PARAMS_A, PARAMS_B, 4))
    assert rep["value"] > 0.0
    assert rep["n"] == 4


def test_check_suite():
    rep = json.loads(nphmm.check_suite("forgetting", trials=50, seed=3))
    assert rep["name"] == "forgetting"
    assert rep["pass"] is True
    assert rep["trials"] == 50
    again = json.loads(nphmm.check_suite("forgetting", trials=50, seed=3))
    assert again == rep


def test_run_chain():
    config = json.dumps(
        {
            "model": "discrete_dp",
            "k": 2,
            "q_prior": {"variant": "q3", "floor_q": 0.05},
            "dp": {"c0": 1.0, "alpha_g": 2.0, "dense_cap": 50},
            "iterations": 30,
            "burn_in": 10,
            "thin": 2,
            "seed": 11,
        }
    )
    states, obs = nphmm.simulate(PARAMS_A, 40, seed=5)
    doc = json.loads(nphmm.run_chain(config, obs))
    assert len(doc["draws"]) == 10
    assert doc["seed_lineage"]
    assert doc["config_hash"]
    q = doc["draws"][0]["Q"]
    assert len(q) == 4
    assert abs(q[0] + q[1] - 1.0) < 1e-12


def test_fit_rate_slope():
    rows = ["n,replicate,median_D,q90_D,exceedance_at_M,wall_time_s,seed_lineage,errors"]
    for i, n in enumerate((100, 200, 400, 800)):
        rows.append(f"{n},{i},{n ** -0.5:.17g},{2 * n ** -0.5:.17g},0,0.1,s{i},")
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write("\n".join(rows) + "\n")
        path = fh.name
    fit = json.loads(nphmm.fit_rate_slope(path, "median_D"))
    assert abs(fit["slope"] + 0.5) < 1e-9
    assert fit["n_points"] == 4


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for fn in tests:
        fn()
        print(f"ok {fn.__name__}")
    print(f"{len(tests)} smoke tests passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
