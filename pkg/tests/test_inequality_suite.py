import json
import math

import numpy as np
import pytest

from bvlab import inequality_suite as iq
from bvlab import localcoeffs as lc
from bvlab.errors import InequalityViolation
from oracles import rs_brute


def test_exp_series_examples():
    assert np.allclose(iq.exp_series(np.zeros(6)).coeffs, [1, 0, 0, 0, 0, 0, 0])
    assert np.allclose(iq.exp_series(np.ones(10)).coeffs, np.ones(11))
    beta = 0.7 - 0.3j
    b = np.zeros(8, dtype=complex)
    b[0] = beta
    ref = [beta**m / math.factorial(m) for m in range(9)]
    assert np.allclose(iq.exp_series(b).coeffs, ref, atol=1e-14)


def test_exp_log_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        b = rng.normal(size=32) + 1j * rng.normal(size=32)
        assert np.max(np.abs(iq.log_series(iq.exp_series(b)) - b)) < 1e-9 * max(1, np.abs(b).max())


def test_exp_series_reconstructs_rs_coefficients():
    # exp(sum |a_pk|^2 x^k / k) is the Rankin-Selberg local factor
    rng = np.random.default_rng(1)
    for n in range(1, 5):
        s = lc.random_satake(rng, n)
        b = [lc.rs_a_pk(s, k) for k in range(1, 9)]
        c = iq.exp_series(b).coeffs.real
        assert np.allclose(c, [lc.rs_lambda_pk(s, k) for k in range(9)], rtol=1e-9)
        assert np.allclose(c, rs_brute(s.as_array(), 8).real, rtol=1e-9)


def test_soundararajan_examples():
    assert iq.soundararajan_check(np.zeros(5), 5)
    rng = np.random.default_rng(2)
    for _ in range(200):
        r = 5 * np.sqrt(rng.uniform(size=20))
        assert iq.soundararajan_check(r * np.exp(2j * np.pi * rng.uniform(size=20)), 20)
    s = lc.random_satake(rng, 3)
    b = [-lc.a_pk(s, k) for k in range(1, 9)]
    lhs, rhs = iq.soundararajan_sides(np.array([b]))
    mu2 = [abs(lc.mu_pk(s, k)) ** 2 for k in range(9)]
    assert np.allclose(lhs[0], mu2, atol=1e-12)
    assert np.all(np.array(mu2) <= np.array([lc.rs_lambda_pk(s, k) for k in range(9)]) + 1e-10)


def test_dominations_examples(delta):
    led = iq.check_coefficient_dominations([1.0], 8)
    assert led.passed
    rs_rows = [r for r in led.rows if r["inequality_id"] == "ineq-2rs"]
    assert all(r["rhs"] == pytest.approx(1.0) for r in rs_rows)
    s = lc.satake_at(delta, 2)
    led = iq.check_coefficient_dominations(s, 8)
    assert led.passed
    lam2 = delta.tau[2] / 2**5.5
    row = [r for r in led.rows if r["inequality_id"] == "ineq-2rs" and r["k"] == 1][0]
    assert row["lhs"] == pytest.approx(lam2**2)
    assert row["rhs"] >= row["lhs"]


def test_pistar_examples():
    rng = np.random.default_rng(3)
    for _ in range(300):
        s = lc.random_satake(rng, int(rng.integers(1, 5)))
        assert iq.pistar_nonneg_check(s, 1, 1, 16)
        assert iq.pistar_nonneg_check(s, -1, 1, 16)
        assert iq.pistar_nonneg_check(s, 0, -1, 16)
    with pytest.raises(ValueError):
        iq.pistar_nonneg_check(s, 2, 1, 4)


def test_pk_chain_and_dump():
    rng = np.random.default_rng(4)
    for n in range(1, 5):
        assert iq.pk_chain_check(lc.random_satake(rng, n), 8).passed
    rec = iq.counterexample(7, [1j, -1j], 3, 2.0, 1.0, "ineq-pk")
    assert set(rec) == {"seed", "satake", "k", "lhs", "rhs", "inequality_id"}
    assert json.loads(iq.dump_counterexample(rec))["inequality_id"] == "ineq-pk"


def test_pk_chain_catches_sign_error(monkeypatch):
    orig = lc.mu_pk
    monkeypatch.setattr(lc, "mu_pk", lambda s, k: -orig(s, k) if k == 1 else orig(s, k))
    rng = np.random.default_rng(5)
    with pytest.raises(InequalityViolation) as e:
        iq.pk_chain_check(lc.random_satake(rng, 2), 8, seed=99)
    assert e.value.record["inequality_id"] == "ineq-pk"
    assert e.value.record["seed"] == 99


def test_trial_seeds_deterministic():
    assert iq.trial_seed(1, 5) == iq.trial_seed(1, 5)
    assert iq.trial_seed(1, 5) != iq.trial_seed(1, 6)
    a = iq.run_inequality_trials(3, trials=200)
    b = iq.run_inequality_trials(3, trials=200)
    assert [x.as_dict() for x in a] == [x.as_dict() for x in b]


def test_growth_report(exemplars):
    rows = iq.growth_estimates_report(exemplars["zeta"], [1e5])
    assert rows[0]["ratios"]["mu_sq"] == pytest.approx(6 / math.pi**2, abs=2e-3)
    rows = iq.growth_estimates_report(exemplars["delta"], [1e4, 1e5, 1e6])
    assert not any(r["flag"] for r in rows)
    rows = iq.growth_estimates_report(exemplars["sym2-delta"], [1e2])
    assert len(rows[0]["ratios"]) == 3


def test_global_dominations(exemplars):
    for nm in ("delta", "sym2-delta"):
        res = iq.global_domination_check(exemplars[nm], 10**4)
        assert all(v["violations"] == 0 for v in res.values()), res
