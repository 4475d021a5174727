import math

import numpy as np
import pytest

from bvlab import dirichlet as dr
from bvlab import localcoeffs as lc
from bvlab.errors import SizeLimitError
from oracles import divisor_count, mobius, spf_trial


def test_sieve_examples():
    s = dr.build_sieve(10)
    assert s.spf[4] == 2 and s.spf[9] == 3
    assert dr.build_sieve(100).spf[91] == 7
    assert dr.build_sieve(2).spf[2] == 2
    big = dr.build_sieve(5000)
    assert all(big.spf[m] == spf_trial(m) for m in range(2, 5001))
    with pytest.raises(SizeLimitError):
        dr.build_sieve(dr.SIEVE_MAX_N + 1)


def test_multiplicative_extend_examples():
    s = dr.build_sieve(200)
    ones = dr.multiplicative_extend(lambda p, k: 1, 200, s)
    assert np.all(ones.values[1:] == 1)
    d = dr.multiplicative_extend(lambda p, k: k + 1, 200, s)
    assert d[12] == 6
    assert all(d[m] == divisor_count(m) for m in range(1, 201))
    zeta = lc.ExemplarPi("zeta")
    mu = dr.multiplicative_extend(lambda p, k: lc.mu_pk(lc.satake_at(zeta, p), k), 200, s)
    assert mu[30] == -1
    assert all(mu[m] == mobius(m) for m in range(1, 201))


def test_convolution_examples(delta, sieve):
    N = 10**4
    one = dr.ones_table(N)
    assert np.array_equal(dr.dirichlet_convolve(one, one).values, dr.divisor_table(N).values)
    lam = dr.exemplar_table(delta, "lambda_pi", N, sieve)
    mu = dr.exemplar_table(delta, "mu_pi", N, sieve)
    unit = dr.dirichlet_convolve(lam, mu)
    ref = np.zeros(N + 1)
    ref[1] = 1
    assert np.max(np.abs(unit.values - ref)) < 1e-10
    rng = np.random.default_rng(0)
    f = dr.CoefficientTable("custom", np.r_[0, rng.normal(size=N)])
    assert np.allclose(dr.dirichlet_convolve(f, dr.unit_table(N)).values, f.values)


def test_convolution_algebra():
    rng = np.random.default_rng(1)
    N = 2000
    f, g, h = (dr.CoefficientTable("custom", np.r_[0, rng.normal(size=N)]) for _ in range(3))
    fg = dr.dirichlet_convolve(f, g)
    assert np.max(np.abs(fg.values - dr.dirichlet_convolve(g, f).values)) < 1e-10
    lhs = dr.dirichlet_convolve(fg, h).values
    rhs = dr.dirichlet_convolve(f, dr.dirichlet_convolve(g, h)).values
    assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(lhs))) < 1e-10


def test_von_mangoldt_examples(exemplars, sieve):
    N = 1000
    t = dr.von_mangoldt_a(exemplars["delta"], N, sieve)
    lam = dr.exemplar_table(exemplars["delta"], "lambda_pi", N, sieve)
    assert t[6] == 0
    for p in (2, 3, 97, 997):
        assert t[p] == pytest.approx(lam[p] * math.log(p))
    z = dr.von_mangoldt_a(exemplars["zeta"], N, sieve)
    assert np.allclose(z.values, dr.von_mangoldt_table(N).values)


@pytest.mark.parametrize("name,N", [("zeta", 1000), ("delta", 10**4), ("sym2-delta", 10**4)])
def test_log_derivative(exemplars, sieve, name, N):
    assert dr.truncated_log_deriv_check(exemplars[name], N, 1e-8, sieve)


def test_multiplicative_roles_start_at_one(exemplars, sieve):
    for role in dr.MULTIPLICATIVE_ROLES:
        if role == "divisor":
            continue
        assert dr.exemplar_table(exemplars["sym2-delta"], role, 100, sieve)[1] == pytest.approx(1)
    t = dr.von_mangoldt_a(exemplars["sym3-delta"], 100, sieve)
    nz = np.nonzero(t.values)[0]
    assert all(len(set(sieve.factor(int(m)))) == 1 for m in nz)


def test_rankin_selberg_windows(delta, sieve):
    rs = dr.exemplar_table(delta, "rs_lambda", 10**5, sieve)
    for x in (10**4, 10**5):
        assert 0.5 <= np.sum(rs.values[1 : x + 1].real) / x <= 2.0
    # prime-power shape: sum Lambda(m) |a(m)|^2 / x at 10^6
    rsv = dr.exemplar_table(delta, "rs_vonmangoldt", 10**6, sieve).values
    assert 0.7 <= np.sum(rsv[1:].real) / 1e6 <= 1.3


def test_residue_prefix_queries():
    rng = np.random.default_rng(2)
    v = np.r_[0, rng.normal(size=500)]
    for q in (1, 3, 7):
        C = dr.residue_prefix(v, q)
        for a in range(q):
            for y in (0, 1, 5, 250, 500):
                ref = sum(v[m] for m in range(1, y + 1) if m % q == a)
                assert dr.prefix_query(C, y, a, q) == pytest.approx(ref, abs=1e-12)


def test_csv_export():
    t = dr.divisor_table(4)
    assert t.to_csv().splitlines() == ["m,value_re,value_im", "1,1.0,0.0", "2,2.0,0.0", "3,2.0,0.0", "4,3.0,0.0"]
