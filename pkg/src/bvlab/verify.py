"""Property suites behind `bvlab verify`, shared with the test-suite.

Every check returns a CheckResult; failures carry a JSON-ready detail record and, for
inequality violations, the counterexample dump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import characters as ch
from . import dirichlet as dr
from . import inequality_suite as iq
from . import localcoeffs as lc
from . import symcore
from . import vaughan as vn
from .errors import BvlabError, InequalityViolation

SUITES = ("symcore", "local", "vaughan", "inequalities", "characters")
REL_TOL = 1e-9


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    dump: Optional[dict] = None

    def as_dict(self) -> dict:
        d = {"suite": self.suite, "check": self.name, "passed": self.passed, "detail": self.detail}
        if self.dump is not None:
            d["counterexample"] = self.dump
        return d


def _run(suite: str, name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    try:
        ok, detail = fn()
        return CheckResult(suite, name, bool(ok), detail)
    except InequalityViolation as e:
        return CheckResult(suite, name, False, {"error": str(e)}, dump=e.record)
    except BvlabError as e:
        return CheckResult(suite, name, False, {"error": f"{type(e).__name__}: {e}"})


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(iq.trial_seed(seed, salt))


def _unit_rows(rng, T, n):
    return np.exp(2j * np.pi * rng.uniform(0, 1, size=(T, n)))


# ------------------------------------------------------------------ symcore

def _newton(seed: int, count: int = 1000) -> tuple[bool, dict]:
    rng = _rng(seed, 1)
    worst = 0.0
    for n in range(1, 7):
        A = _unit_rows(rng, count // 6 + 1, n)
        e = symcore.elementary_table(A, n)
        p = symcore.power_sum_table(A, n)
        for k in range(1, n + 1):
            rhs = sum((-1) ** (i - 1) * e[:, k - i] * p[:, i] for i in range(1, k + 1))
            dev = np.abs(k * e[:, k] - rhs) / np.maximum(1.0, np.abs(rhs))
            worst = max(worst, float(dev.max()))
    return worst < REL_TOL, {"worst_relative": worst}


def _alternant_schur(parts, a) -> complex:
    n = len(a)
    lam = list(parts) + [0] * (n - len(parts))
    num = np.array([[aj ** (lam[i] + n - 1 - i) for aj in a] for i in range(n)])
    den = np.array([[aj ** (n - 1 - i) for aj in a] for i in range(n)])
    return complex(np.linalg.det(num) / np.linalg.det(den))


def _jacobi_trudi_vs_alternant(seed: int, count: int = 40) -> tuple[bool, dict]:
    rng = _rng(seed, 2)
    worst = 0.0
    for n in range(1, 5):
        done = 0
        while done < count // 4:
            ang = np.sort(rng.uniform(0, 2 * np.pi, n))
            gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
            if n > 1 and gaps.min() < 0.3:
                continue  # keep the Vandermonde well conditioned
            a = np.exp(1j * ang)
            for k in range(0, 9):
                for lam in symcore.enum_partitions(k, n):
                    jt = symcore.schur(lam, a)
                    alt = _alternant_schur(lam.parts, a)
                    worst = max(worst, abs(jt - alt) / max(1.0, abs(alt)))
            done += 1
    return worst < REL_TOL, {"worst_relative": worst}


def _schur_symmetry(seed: int, count: int = 50) -> tuple[bool, dict]:
    rng = _rng(seed, 3)
    bad = 0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        a = list(np.exp(2j * np.pi * rng.uniform(0, 1, n)))
        perm = [a[i] for i in rng.permutation(n)]
        for lam in symcore.enum_partitions(int(rng.integers(1, 9)), n):
            if symcore.schur(lam, a) != symcore.schur(lam, perm):
                bad += 1
    return bad == 0, {"mismatches": bad}


def _dual_pieri(seed: int, count: int = 50) -> tuple[bool, dict]:
    rng = _rng(seed, 4)
    bad = 0
    for _ in range(count):
        n = int(rng.integers(1, 5))
        a = np.exp(2j * np.pi * rng.uniform(0, 1, n))
        for l in range(1, n + 1):
            for m in range(1, 8):
                if not symcore.dual_pieri_check(l, m, a, 1e-9):
                    bad += 1
    return bad == 0, {"failures": bad}


def suite_symcore(seed: int, tau=None) -> list[CheckResult]:
    return [
        _run("symcore", "newton-identity", lambda: _newton(seed)),
        _run("symcore", "jacobi-trudi-vs-alternant", lambda: _jacobi_trudi_vs_alternant(seed)),
        _run("symcore", "schur-symmetric", lambda: _schur_symmetry(seed)),
        _run("symcore", "dual-pieri", lambda: _dual_pieri(seed)),
    ]


# -------------------------------------------------------------------- local

def _exemplars(tau) -> list[lc.ExemplarPi]:
    return [lc.ExemplarPi("zeta")] + [lc.ExemplarPi(nm, tau) for nm in ("delta", "sym2-delta", "sym3-delta")]


def _self_duality(tau, pmax: int = 10**4) -> tuple[bool, dict]:
    primes = dr.build_sieve(min(pmax, tau.N)).primes
    worst = 0.0
    for pi in _exemplars(tau):
        A = lc.satake_matrix(pi, primes)
        for tab in (lc.lambda_table_local(A, 8), lc.a_table_local(A, 8), lc.mu_table_local(A, 8)):
            worst = max(worst, float(np.abs(tab.imag).max()))
    return worst <= 1e-10, {"worst_imag": worst, "primes": int(primes.size)}


def _local_euler(seed: int, tau, count: int = 200) -> tuple[bool, dict]:
    rng = _rng(seed, 5)
    rows = [lc.satake_matrix(pi, [2, 3, 5, 7, 97])[i] for pi in _exemplars(tau) for i in range(5)]
    for n in range(1, 5):
        rows.extend(_unit_rows(rng, count // 4, n))
    worst = max(lc.local_euler_residual(r, 12) for r in rows)
    return worst <= 1e-10, {"worst_coefficient": worst, "sets": len(rows)}


def _rs_nonneg(seed: int) -> tuple[bool, dict]:
    rng = _rng(seed, 6)
    worst = 0.0
    for n in range(1, 5):
        for mode in ("unitary-circle", "ramanujan-bounded"):
            A, _ = lc.random_satake_batch(rng, 200, n, mode)
            worst = min(worst, float(lc.rs_lambda_table(A, 8).min()))
    return worst >= 0.0, {"min_value": worst}


def _deligne(tau) -> tuple[bool, dict]:
    primes = dr.build_sieve(tau.N).primes
    lam = tau.normalized()[primes]
    worst = float(np.abs(lam).max())
    return worst <= 2.0, {"max_abs_lambda_p": worst, "primes": int(primes.size)}


def suite_local(seed: int, tau) -> list[CheckResult]:
    return [
        _run("local", "self-duality", lambda: _self_duality(tau)),
        _run("local", "local-euler", lambda: _local_euler(seed, tau)),
        _run("local", "rs-nonneg", lambda: _rs_nonneg(seed)),
        _run("local", "deligne", lambda: _deligne(tau)),
    ]


# ------------------------------------------------------------------ vaughan

def random_vaughan_params(rng: np.random.Generator, ymax: int = 10**4) -> vn.VaughanParams:
    q = int(rng.integers(1, 21))
    units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
    a = int(rng.choice(units)) % q if q > 1 else 0
    X = float(rng.uniform(10, 100))
    if X == int(X):
        X += 0.5
    y = float(rng.uniform(1, ymax))
    return vn.VaughanParams(X=X, Y=X, y=y, q=q, a=a if q > 1 else 1)


def vaughan_identity_trials(seed: int, tau, configs: int = 100, ymax: int = 10**4,
                            names=("zeta", "delta", "sym2-delta")) -> dict:
    rng = _rng(seed, 7)
    sieve = dr.build_sieve(ymax)
    tables = {nm: vn.vaughan_tables(lc.ExemplarPi(nm, tau if nm != "zeta" else None), ymax, sieve)
              for nm in names}
    worst, where = 0.0, None
    for _ in range(configs):
        params = random_vaughan_params(rng, ymax)
        for nm in names:
            pi = lc.ExemplarPi(nm, tau if nm != "zeta" else None)
            dec = vn.decompose(pi, params, tables[nm])
            if dec.relative_residual > worst:
                worst, where = dec.relative_residual, {"pi": nm, **dec.__dict__}
    return {"worst_relative": worst, "configs": configs, "worst_at": _plain(where)}


def _plain(d):
    if d is None:
        return None
    return {k: ([v.real, v.imag] if isinstance(v, complex) else float(v) if isinstance(v, np.floating) else v)
            for k, v in d.items()}


def _vaughan_identity(seed, tau) -> tuple[bool, dict]:
    r = vaughan_identity_trials(seed, tau)
    return r["worst_relative"] < 1e-8, r


def _alpha_beta(seed, tau, configs: int = 20) -> tuple[bool, dict]:
    rng = _rng(seed, 8)
    pi = lc.ExemplarPi("delta", tau)
    tables = vn.vaughan_tables(pi, 10**4)
    worst = 0.0
    for _ in range(configs):
        p = random_vaughan_params(rng)
        dec = vn.decompose(pi, p, tables)
        s3 = vn.s3_from_alpha(p, tables)
        s4 = vn.s4_from_beta(p, tables)
        worst = max(worst, abs(s3 - dec.S3) / (1 + abs(dec.S3)), abs(s4 - dec.S4) / (1 + abs(dec.S4)))
    return worst < REL_TOL, {"worst_relative": worst}


def _tripwires(tau, xs=(1e4, 1e5)) -> tuple[bool, dict]:
    rows = vn.second_moment_tripwires(lc.ExemplarPi("delta", tau), xs)
    return not any(r["flag"] for r in rows), {"rows": rows}


def suite_vaughan(seed: int, tau) -> list[CheckResult]:
    return [
        _run("vaughan", "decomposition-identity", lambda: _vaughan_identity(seed, tau)),
        _run("vaughan", "alpha-beta-regrouping", lambda: _alpha_beta(seed, tau)),
        _run("vaughan", "second-moment-tripwires", lambda: _tripwires(tau)),
    ]


# ------------------------------------------------------------- inequalities

def _trials(seed) -> tuple[bool, dict]:
    out = iq.run_inequality_trials(seed, trials=10_000)
    viol = {s.inequality_id: s.violations for s in out}
    return sum(viol.values()) == 0, {"violations": viol, "trials": 10_000}


def _roundtrip(seed, count: int = 200, K: int = 32) -> tuple[bool, dict]:
    rng = _rng(seed, 9)
    B = (rng.normal(size=(count, K)) + 1j * rng.normal(size=(count, K))) * 0.5
    worst = 0.0
    for b in B:
        back = iq.log_series(iq.exp_series(b))
        worst = max(worst, float(np.max(np.abs(back - b) / np.maximum(1.0, np.abs(b)))))
    return worst < REL_TOL, {"worst_relative": worst}


def _pk_chain(seed, count: int = 200) -> tuple[bool, dict]:
    rng = _rng(seed, 10)
    for i in range(count):
        n = 1 + i % 4
        mode = "unitary-circle" if i % 2 == 0 else "ramanujan-bounded"
        s = lc.random_satake(rng, n, mode)
        iq.pk_chain_check(s, 8, seed=iq.trial_seed(seed, i))  # raises on violation
    return True, {"sets": count}


def _global(tau, N: int = 10**4) -> tuple[bool, dict]:
    res = iq.global_domination_check(lc.ExemplarPi("delta", tau), N)
    return all(v["violations"] == 0 for v in res.values()), res


def suite_inequalities(seed: int, tau) -> list[CheckResult]:
    return [
        _run("inequalities", "pk-chain", lambda: _pk_chain(seed)),
        _run("inequalities", "randomized-trials", lambda: _trials(seed)),
        _run("inequalities", "exp-log-roundtrip", lambda: _roundtrip(seed)),
        _run("inequalities", "global-domination-delta", lambda: _global(tau)),
    ]


# --------------------------------------------------------------- characters

def _orthogonality(qmax: int = 500) -> tuple[bool, dict]:
    worst = max(ch.orthogonality_defect(q) for q in range(1, qmax + 1))
    return worst <= 1e-10, {"worst_defect": worst, "qmax": qmax}


def _counts(qmax: int = 1000) -> tuple[bool, dict]:
    bad = [q for q in range(1, qmax + 1) if len(ch.enumerate_characters(q)) != ch.euler_phi(q)]
    return not bad, {"bad_moduli": bad[:20]}


def _conductors(qmax: int = 200) -> tuple[bool, dict]:
    bad = []
    for q in range(1, qmax + 1):
        for chi in ch.enumerate_characters(q):
            if ch.conductor_of(chi) != chi.conductor:
                bad.append([q, list(chi.index)])
    return not bad, {"mismatches": bad[:20]}


def _induction(qmax: int = 100) -> tuple[bool, dict]:
    worst = 0.0
    for q in range(1, qmax + 1):
        units = np.nonzero(np.gcd(np.arange(q), q) == 1)[0]
        for chi in ch.enumerate_characters(q):
            prim = ch.primitivize(chi)
            worst = max(worst, float(np.max(np.abs(chi(units) - prim(units)))))
    return worst <= 1e-12, {"worst": worst}


def suite_characters(seed: int, tau=None) -> list[CheckResult]:
    return [
        _run("characters", "orthogonality", _orthogonality),
        _run("characters", "count-phi", _counts),
        _run("characters", "conductor-structural-vs-brute", _conductors),
        _run("characters", "primitivization", _induction),
    ]


_DISPATCH = {"symcore": suite_symcore, "local": suite_local, "vaughan": suite_vaughan,
             "inequalities": suite_inequalities, "characters": suite_characters}


def run_suites(names, seed: int, tau, log: Callable[[str], None] = lambda s: None) -> list[CheckResult]:
    out = []
    for nm in names:
        log(f"verify {nm}")
        out.extend(_DISPATCH[nm](seed, tau))
    return out


def failures(results) -> list[dict]:
    return [r.as_dict() for r in results if not r.passed]


__all__ = ["SUITES", "CheckResult", "run_suites", "failures", "vaughan_identity_trials",
           "random_vaughan_params"] + [f"suite_{s}" for s in SUITES]
