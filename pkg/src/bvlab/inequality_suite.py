"""Coefficient inequalities at prime powers, checked exactly as stated and loudly on failure.

Each check reports (lhs, rhs) pairs.  A pair passes when
    lhs <= rhs + 1e-10 * max(1, |rhs|)
and a shortfall of 1e-6 (same scaling) or worse raises InequalityViolation with
a JSON-serializable counterexample.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import dirichlet as dr
from . import localcoeffs as lc
from . import symcore
from .errors import InequalityViolation, SizeLimitError

SLACK = 1e-10
ABORT = 1e-6
TRIPWIRE = 50.0

INEQUALITY_IDS = ("sound-auto", "coeffpair", "ineq-2rs", "ineq-pk", "bfpi", "mobius-Fpi",
                  "mobius+divisor-Fpi", "nonneg-coeffs")


# ------------------------------------------------------------- formal series

@dataclass(frozen=True)
class FormalSeries:
    coeffs: np.ndarray

    @property
    def K(self) -> int:
        return self.coeffs.shape[-1] - 1


def _exp_rows(B: np.ndarray) -> np.ndarray:
    """Rows of b(1..K) to rows of c(0..K) with m c(m) = sum_k b(k) c(m-k)."""
    T, K = B.shape
    C = np.zeros((T, K + 1), dtype=np.result_type(B.dtype, float))
    C[:, 0] = 1.0
    for m in range(1, K + 1):
        C[:, m] = np.einsum("tk,tk->t", B[:, :m], C[:, m - 1 :: -1][:, :m]) / m
    return C


def _log_rows(C: np.ndarray) -> np.ndarray:
    """Inverse of _exp_rows: b(m) = m c(m) - sum_{k<m} b(k) c(m-k)."""
    T, K1 = C.shape
    K = K1 - 1
    B = np.zeros((T, K), dtype=C.dtype)
    for m in range(1, K + 1):
        acc = m * C[:, m]
        if m > 1:
            acc = acc - np.einsum("tk,tk->t", B[:, : m - 1], C[:, m - 1 : 0 : -1])
        B[:, m - 1] = acc
    return B


def exp_series(logcoeffs: Sequence[complex]) -> FormalSeries:
    """exp(sum_k b(k) x^k / k) truncated at the length of b."""
    b = np.asarray(logcoeffs)
    if b.shape[-1] > 64:
        raise SizeLimitError("series truncation capped at K = 64")
    return FormalSeries(_exp_rows(b.reshape(1, -1))[0])


def log_series(series: FormalSeries) -> np.ndarray:
    return _log_rows(series.coeffs.reshape(1, -1))[0]


# ------------------------------------------------------------------ ledger

@dataclass
class Ledger:
    rows: list = field(default_factory=list)

    def add(self, inequality_id: str, k: int, lhs: float, rhs: float) -> bool:
        ok = bool(lhs <= rhs + SLACK * max(1.0, abs(rhs)))
        self.rows.append({"inequality_id": inequality_id, "k": int(k), "lhs": float(lhs),
                          "rhs": float(rhs), "ok": ok})
        return ok

    @property
    def passed(self) -> bool:
        return all(r["ok"] for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r["ok"]]


def _shortfall(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return (lhs - rhs) / np.maximum(1.0, np.abs(rhs))


def counterexample(seed, satake, k, lhs, rhs, inequality_id, **extra) -> dict:
    rec = {"seed": None if seed is None else int(seed),
           "satake": [[float(z.real), float(z.imag)] for z in np.asarray(satake, dtype=complex).ravel()],
           "k": int(k), "lhs": float(lhs), "rhs": float(rhs), "inequality_id": inequality_id}
    rec.update(extra)
    return rec


# -------------------------------------------------------- batched local sides

def _poly_power_rows(R: np.ndarray, e: int) -> np.ndarray:
    T, K1 = R.shape
    out = np.zeros_like(R)
    out[:, 0] = 1.0
    for _ in range(e):
        nxt = np.zeros_like(R)
        for k in range(K1):
            nxt[:, k] = np.einsum("tj,tj->t", out[:, : k + 1], R[:, k::-1])
        out = nxt
    return out


def domination_sides(A: np.ndarray, kmax: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(lhs, rhs) arrays of shape (T, kmax+1) for each local domination."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    T, n = A.shape
    h = lc.lambda_table_local(A, kmax)
    e = symcore.elementary_table(A, n)
    pw = lc.a_table_local(A, kmax)
    mu = lc.mu_table_local(A, kmax)
    rs = lc.rs_lambda_table(A, kmax)

    prods = (A[:, :, None] * np.conj(A)[:, None, :]).reshape(T, n * n)
    rs_a = symcore.power_sum_table(prods, kmax).real
    rs_a[:, 0] = 0.0

    bpk = np.zeros((T, kmax + 1))
    for k in range(kmax + 1):
        for l in range(min(k, n) + 1):
            bpk[:, k] += np.abs(e[:, l] * h[:, k - l])

    conv = _poly_power_rows(rs, n + 1)
    conv4 = _poly_power_rows(rs, 4 * (n + 1))
    ks = np.arange(kmax + 1)
    return {
        "coeffpair": (np.abs(pw) ** 2 * (ks > 0), rs_a),
        "ineq-2rs": (np.abs(h) ** 2, rs),
        "ineq-pk": (bpk ** 2, 4 * (n + 1) * rs),
        "bfpi": (bpk ** 2, conv4),
        "mobius-Fpi": (np.abs(mu) ** 2, rs),
        "mobius+divisor-Fpi": ((ks + 1) * np.abs(mu) ** 2, conv),
    }


def soundararajan_sides(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(|c(m)|^2, C(m)) rows for log-coefficient rows B = b(1..K)."""
    B = np.asarray(B, dtype=complex)
    c = _exp_rows(B)
    C = _exp_rows(np.abs(B) ** 2).real
    return np.abs(c) ** 2, C


def pistar_sides(A: np.ndarray, chi: np.ndarray, chi2: np.ndarray, kmax: int) -> np.ndarray:
    """Coefficients c(0..kmax) of exp(sum_k |1 + a_pk|^2 (1+chi^k)(1+chi'^k) x^k / k)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    pw = lc.a_table_local(A, kmax)[:, 1:]
    ks = np.arange(1, kmax + 1)
    chi = np.asarray(chi, dtype=float).reshape(-1, 1)
    chi2 = np.asarray(chi2, dtype=float).reshape(-1, 1)
    b = np.abs(1.0 + pw) ** 2 * (1.0 + chi ** ks) * (1.0 + chi2 ** ks)
    return _exp_rows(b).real


# ---------------------------------------------------------- scalar surfaces

def soundararajan_check(b: Sequence[complex], K: int) -> bool:
    if K > 64:
        raise SizeLimitError("series truncation capped at K = 64")
    B = np.zeros((1, K), dtype=complex)
    bb = np.asarray(b, dtype=complex)[:K]
    B[0, : bb.size] = bb
    lhs, rhs = soundararajan_sides(B)
    return bool(np.all(lhs <= rhs * (1 + SLACK) + SLACK))


def check_coefficient_dominations(s, kmax: int) -> Ledger:
    if kmax > 12:
        raise SizeLimitError("local dominations are checked up to k = 12")
    A = lc._arr(s).reshape(1, -1)
    led = Ledger()
    for ineq, (lhs, rhs) in domination_sides(A, kmax).items():
        for k in range(kmax + 1):
            led.add(ineq, k, lhs[0, k], rhs[0, k])
    return led


def pistar_nonneg_check(s, chi_p: int, chiprime_p: int, kmax: int) -> bool:
    if kmax > 32:
        raise SizeLimitError("nonnegativity is checked up to k = 32")
    if chi_p not in (-1, 0, 1) or chiprime_p not in (-1, 0, 1):
        raise ValueError("quadratic local values must lie in {-1, 0, 1}")
    c = pistar_sides(lc._arr(s), [chi_p], [chiprime_p], kmax)[0]
    return bool(np.all(c >= -SLACK))


def pk_chain_check(s, kmax: int, seed: Optional[int] = None) -> Ledger:
    """The signed step behind the 4(n+1) bound, through the scalar coefficient functions.

    (-1)^l mu(p^l) lambda(p^(k-l)) = s_(k-l+1, 1^(l-1)) + s_(k-l, 1^l) for 1 <= l <= min(k, n),
    then the bound itself.  Raises on a deviation of 1e-6 or worse, naming ineq-pk.
    """
    A = lc._arr(s)
    n = A.size
    led = Ledger()
    for k in range(1, kmax + 1):
        b = abs(lc.lambda_pk(A, k))
        for l in range(1, min(k, n) + 1):
            lhs = (-1) ** l * lc.mu_pk(A, l) * lc.lambda_pk(A, k - l)
            rhs = symcore.schur((k - l + 1,) + (1,) * (l - 1), A)
            if k - l >= 1:
                rhs += symcore.schur((k - l,) + (1,) * l, A)
            dev = abs(lhs - rhs) / max(1.0, abs(rhs))
            led.add("ineq-pk", k, dev, 0.0)
            if dev > ABORT:
                raise InequalityViolation(counterexample(seed, A, k, abs(lhs), abs(rhs), "ineq-pk",
                                                         step="pieri", l=l))
            b += abs(lhs)
        rs = lc.rs_lambda_pk(A, k)
        if not led.add("ineq-pk", k, b * b, 4 * (n + 1) * rs):
            if (b * b - 4 * (n + 1) * rs) / max(1.0, rs) > ABORT:
                raise InequalityViolation(counterexample(seed, A, k, b * b, 4 * (n + 1) * rs, "ineq-pk"))
    return led


# ------------------------------------------------------- randomized trials

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(root: int, i: int) -> int:
    return splitmix64((int(root) & _MASK64) ^ splitmix64(i))


@dataclass
class TrialSummary:
    inequality_id: str
    trials: int
    violations: int
    worst_shortfall: float
    counterexamples: list

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"inequality_id": self.inequality_id, "trials": self.trials,
                "violations": self.violations, "worst_shortfall": self.worst_shortfall,
                "counterexamples": self.counterexamples[:5]}


def _trial_inputs(root: int, trials: int, n_values: Sequence[int], modes: Sequence[str]):
    """Per-trial Satake rows, each from its own derived seed; grouped by rank n."""
    groups: dict[int, dict] = {}
    for i in range(trials):
        sd = trial_seed(root, i)
        rng = np.random.default_rng(sd)
        n = n_values[i % len(n_values)]
        mode = modes[(i // len(n_values)) % len(modes)]
        s = lc.random_satake(rng, n, mode)
        chi = rng.integers(-1, 2, size=2)
        g = groups.setdefault(n, {"seeds": [], "rows": [], "chi": []})
        g["seeds"].append(sd)
        g["rows"].append(s.as_array())
        g["chi"].append(chi)
    for g in groups.values():
        g["rows"] = np.array(g["rows"])
        g["chi"] = np.array(g["chi"])
        g["seeds"] = np.array(g["seeds"], dtype=np.uint64)
    return groups


def _collect(summary: TrialSummary, lhs, rhs, seeds, rows, abort: bool, extra_rows=None):
    sf = _shortfall(lhs, rhs)
    bad = sf > SLACK
    trials_bad = np.nonzero(bad.any(axis=1))[0]
    summary.violations += int(trials_bad.size)
    if sf.size:
        summary.worst_shortfall = max(summary.worst_shortfall, float(sf.max()))
    for t in trials_bad[:5]:
        k = int(np.argmax(sf[t]))
        rec = counterexample(seeds[t], rows[t] if rows is not None else [], k, lhs[t, k], rhs[t, k],
                             summary.inequality_id)
        if extra_rows is not None:
            rec["b"] = [[float(z.real), float(z.imag)] for z in extra_rows[t]]
        summary.counterexamples.append(rec)
        if abort and sf[t, k] > ABORT:
            raise InequalityViolation(rec)


def run_inequality_trials(seed: int, trials: int = 10_000, kmax: int = 8,
                          n_values: Sequence[int] = (1, 2, 3, 4),
                          modes: Sequence[str] = ("unitary-circle", "ramanujan-bounded"),
                          ids: Iterable[str] = INEQUALITY_IDS, abort: bool = True,
                          sound_K: int = 20, sound_bound: float = 5.0) -> list[TrialSummary]:
    """Evaluate every requested inequality on `trials` independent random inputs."""
    ids = list(ids)
    out = {i: TrialSummary(i, trials, 0, -math.inf, []) for i in ids}
    groups = _trial_inputs(seed, trials, tuple(n_values), tuple(modes))
    for n, g in sorted(groups.items()):
        A, seeds = g["rows"], g["seeds"]
        sides = domination_sides(A, kmax)
        for ineq in ids:
            if ineq in sides:
                _collect(out[ineq], *sides[ineq], seeds, A, abort)
        if "nonneg-coeffs" in ids:
            c = pistar_sides(A, g["chi"][:, 0], g["chi"][:, 1], kmax)
            _collect(out["nonneg-coeffs"], -c, np.zeros_like(c), seeds, A, abort)
    if "sound-auto" in ids:
        # Arbitrary complex log-coefficients |b(k)| <= sound_bound, one derived seed per trial,
        # plus the Satake-derived b(k) = -a_pi(p^k), which reproduces |mu|^2 <= lambda_RS.
        B = np.empty((trials, sound_K), dtype=complex)
        seeds = np.empty(trials, dtype=np.uint64)
        for i in range(trials):
            sd = trial_seed(seed ^ 0x5EED, i)
            rng = np.random.default_rng(sd)
            r = sound_bound * np.sqrt(rng.uniform(0, 1, sound_K))
            B[i] = r * np.exp(2j * np.pi * rng.uniform(0, 1, sound_K))
            seeds[i] = sd
        _collect(out["sound-auto"], *soundararajan_sides(B), seeds, None, abort, extra_rows=B)
        for n, g in sorted(groups.items()):
            Bs = -lc.a_table_local(g["rows"], kmax)[:, 1:]
            _collect(out["sound-auto"], *soundararajan_sides(Bs), g["seeds"], g["rows"], abort)
    return [out[i] for i in ids]


# ---------------------------------------------------------------- growth

def growth_estimates_report(pi: lc.ExemplarPi, xs: Sequence[float],
                            sieve: Optional[dr.FactorSieve] = None) -> list[dict]:
    """sum b^2 / (x log^(4n+3) x), sum |mu|^2 / x and sum d |mu|^2 / (x log^n x) at each x."""
    xmax = int(max(xs))
    sieve = sieve if sieve is not None and sieve.N >= xmax else dr.build_sieve(xmax)
    lam = dr.exemplar_table(pi, "lambda_pi", xmax, sieve)
    mu = dr.exemplar_table(pi, "mu_pi", xmax, sieve)
    b = dr.dirichlet_convolve(dr.CoefficientTable("custom", np.abs(lam.values)),
                              dr.CoefficientTable("custom", np.abs(mu.values)), role="b_Fpi")
    d = dr.divisor_table(xmax)
    n = pi.n
    rows = []
    for x in xs:
        N = int(x)
        L = max(math.log(x), 1.0)
        mu2 = np.abs(mu.values[1 : N + 1]) ** 2
        ratios = {
            "b_sq": float(np.sum(b.values[1 : N + 1] ** 2)) / (x * L ** (4 * n + 3)),
            "mu_sq": float(np.sum(mu2)) / x,
            "d_mu_sq": float(np.sum(d.values[1 : N + 1] * mu2)) / (x * L ** n),
        }
        rows.append({"x": x, "ratios": ratios, "flag": max(ratios.values()) > TRIPWIRE})
    return rows


def global_domination_check(pi: lc.ExemplarPi, N: int,
                            sieve: Optional[dr.FactorSieve] = None) -> dict[str, dict]:
    """The four dominations on whole tables 1..N, products taken as Dirichlet convolutions.

    Returns, per inequality, the count of m with lhs > rhs beyond slack and the worst shortfall.
    """
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(N)
    n = pi.n
    lam = dr.exemplar_table(pi, "lambda_pi", N, sieve)
    mu = dr.exemplar_table(pi, "mu_pi", N, sieve)
    rs = dr.exemplar_table(pi, "rs_lambda", N, sieve)
    d = dr.divisor_table(N)
    b = dr.dirichlet_convolve(dr.CoefficientTable("custom", np.abs(lam.values)),
                              dr.CoefficientTable("custom", np.abs(mu.values)), role="b_Fpi")
    rs_real = dr.CoefficientTable("rs_lambda", np.real(rs.values))
    mu2 = np.abs(mu.values) ** 2
    pairs = {
        "ineq-2rs": (np.abs(lam.values) ** 2, rs_real.values),
        "bfpi": (np.real(b.values) ** 2, dr.convolution_power(rs_real, 4 * (n + 1)).values.real),
        "mobius-Fpi": (mu2, rs_real.values),
        "mobius+divisor-Fpi": (d.values * mu2, dr.convolution_power(rs_real, n + 1).values.real),
    }
    out = {}
    for ineq, (lhs, rhs) in pairs.items():
        sf = _shortfall(lhs[1:], rhs[1:])
        out[ineq] = {"N": N, "violations": int(np.sum(sf > SLACK)), "worst_shortfall": float(sf.max())}
    return out


def dump_counterexample(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True)
