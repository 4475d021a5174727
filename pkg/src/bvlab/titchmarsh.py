"""Shifted divisor sums sum lambda(p) d(p-1) and sum lambda(m) d(m-1).

Divisor switching writes d(m) = 2 #{r | m : r < sqrt(m)} + [m is a square], turning
the shifted sum into progression sums over p = 1 mod r with p - 1 > r^2.
Convention: d(0) = 0, so the m = 1 term of the integer sum vanishes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import dirichlet as dr
from . import localcoeffs as lc
from .errors import ContractError, InconsistencyError, TableRangeError
from .reports import ExperimentReport

OVER = ("primes", "integers")
COLUMNS = ["x", "direct", "switched", "T1", "T2", "square_term", "normalized"]
IDENTITY_TOL = 1e-6
GROWTH_FLAG = 1.2
D0_NOTE = "d(0) := 0, so m = 1 contributes nothing to the integer-indexed sum"


@dataclass
class ShiftedSumReport:
    x: float
    direct: float
    switched: float
    T1: float
    T2: float
    square_term: float
    normalized: float
    over: str = "primes"
    large_r_sum: float = 0.0

    @property
    def identity_gap(self) -> float:
        return abs(self.direct - self.switched) / (1.0 + abs(self.direct))

    def row(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k in COLUMNS}


# ---------------------------------------------------------------- tables

@dataclass
class ShiftTables:
    """lambda restricted to the chosen support and the divisor table, both on 0..N."""
    N: int
    weights: np.ndarray
    d: np.ndarray
    over: str


def shift_tables(pi: lc.ExemplarPi, N: int, over: str = "primes",
                 sieve: Optional[dr.FactorSieve] = None) -> ShiftTables:
    if over not in OVER:
        raise ValueError(f"over must be one of {OVER}")
    if N > pi.reach:
        raise TableRangeError(f"{pi.name} table reaches {pi.reach}, need {N}")
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(N)
    lam = np.real(dr.exemplar_table(pi, "lambda_pi", N, sieve).values)
    if over == "primes":
        lam = np.where(sieve.is_prime[: N + 1], lam, 0.0)
    d = dr.divisor_table(N).values
    return ShiftTables(N, lam, d, over)


def _X(x: float, tables: ShiftTables) -> int:
    X = int(math.floor(x))
    if X > tables.N:
        raise TableRangeError(f"x = {x} beyond table length {tables.N}")
    return X


# ----------------------------------------------------------------- direct

def shifted_sum_direct(pi: lc.ExemplarPi, x: float, over: str = "primes",
                       tables: Optional[ShiftTables] = None) -> float:
    tables = tables or shift_tables(pi, int(x), over)
    X = _X(x, tables)
    if X < 2:
        return 0.0
    w = tables.weights[2 : X + 1]
    shifted = tables.d[1:X]  # d(m - 1) for m = 2..X; m = 1 has d(0) = 0
    return float(math.fsum(w * shifted))


# -------------------------------------------------------------- switching

def ramanujan_sum(q: int, n: int) -> int:
    """c_q(n) = sum_{d | (q, n)} d mu(q/d)."""
    if q < 1:
        raise ContractError("q must be positive")
    g = math.gcd(q, abs(n))
    total = 0
    for d in range(1, g + 1):
        if g % d == 0:
            total += d * _mobius(q // d)
    return total


def ramanujan_sum_exp(q: int, n: int) -> complex:
    """The defining exponential sum over reduced residues, for cross-checks."""
    a = np.array([a for a in range(1, q + 1) if math.gcd(a, q) == 1])
    return complex(np.sum(np.exp(2j * np.pi * a * n / q)))


def _mobius(m: int) -> int:
    r = 1
    p = 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            r = -r
        p += 1
    return -r if m > 1 else r


def _progression_one(weights: np.ndarray, X: int, r: int, lo: int = 0) -> float:
    """sum of weights[m] over lo < m <= X with m = 1 mod r."""
    start = 1 if r == 1 else r + 1
    if lo >= start:
        start += ((lo - start) // r + 1) * r
    if start > X:
        return 0.0
    return float(np.sum(weights[start : X + 1 : r]))


def divisor_switch_decompose(pi: lc.ExemplarPi, x: float, B: float = 1.0, over: str = "primes",
                             tables: Optional[ShiftTables] = None) -> ShiftedSumReport:
    """Direct sum, its switched form, the square term and the additive-character split T1 + T2."""
    tables = tables or shift_tables(pi, int(x), over)
    X = _X(x, tables)
    w = tables.weights
    direct = shifted_sum_direct(pi, x, over, tables)

    # exact switched form: r < sqrt(m - 1) <=> m > r^2 + 1
    rmax = math.isqrt(max(X - 2, 0))  # largest r with r^2 + 1 < X
    while (rmax + 1) ** 2 + 1 < X:
        rmax += 1
    while rmax > 0 and rmax**2 + 1 >= X:
        rmax -= 1
    pairs = math.fsum(_progression_one(w, X, r, lo=r * r + 1) for r in range(1, rmax + 1))
    k = np.arange(1, math.isqrt(max(X - 1, 0)) + 1)
    sq = k * k + 1
    square = float(math.fsum(w[sq[sq <= X]]))
    switched = 2 * pairs + square

    T1, T2, large = _additive_split(w, X, x, B)
    rep = ShiftedSumReport(x=float(x), direct=direct, switched=switched, T1=T1, T2=T2, square_term=square,
                           normalized=direct / normalizer(x, over), over=over, large_r_sum=large)
    if rep.identity_gap > IDENTITY_TOL:
        raise InconsistencyError(f"switched form {switched} differs from direct {direct} at x = {x}")
    return rep


def _additive_split(w: np.ndarray, X: int, x: float, B: float) -> tuple[float, float, float]:
    """T1 (l <= (log x)^B) and T2 (l > (log x)^B) of
    sum_{R0 < lq < sqrt(x-1)} (1/(lq)) sum_p lambda(p) c_q(p - 1),   R0 = sqrt(x)/(log x)^B,
    with the unconstrained large-r progression sum it must reproduce."""
    if X < 3:
        return 0.0, 0.0, 0.0
    L = math.log(x) ** B
    R0 = math.sqrt(x) / L
    top = math.sqrt(x - 1)
    rtop = math.ceil(top) - 1 if math.ceil(top) == top else math.floor(top)
    if rtop < 1:
        return 0.0, 0.0, 0.0
    P = np.zeros(rtop + 1)
    for r in range(1, rtop + 1):
        P[r] = _progression_one(w, X, r)
    mu = np.array([0] + [_mobius(m) for m in range(1, rtop + 1)])
    S = np.zeros(rtop + 1)  # S[q] = sum_{d | q} d mu(q/d) P(d)
    for dd in range(1, rtop + 1):
        S[dd::dd] += dd * P[dd] * mu[np.arange(dd, rtop + 1, dd) // dd]
    T1 = T2 = 0.0
    t1, t2 = [], []
    for l in range(1, rtop + 1):
        qs = np.arange(1, rtop // l + 1)
        r = l * qs
        sel = (r > R0) & (r < top)
        if not sel.any():
            continue
        val = float(np.sum(S[qs[sel]] / r[sel]))
        (t1 if l <= L else t2).append(val)
    T1, T2 = math.fsum(t1), math.fsum(t2)
    rs = np.arange(1, rtop + 1)
    large = float(math.fsum(P[1:][(rs > R0) & (rs < top)]))
    return T1, T2, large


# ------------------------------------------------------------- normalization

def normalizer(x: float, over: str = "primes") -> float:
    ll = math.log(math.log(x))
    if over == "primes":
        return x * ll**1.5 / math.sqrt(math.log(x))
    return x * ll**1.5


def normalized_curve(pi: lc.ExemplarPi, xs: Sequence[float], over: str = "primes", B: float = 1.0,
                     tables: Optional[ShiftTables] = None) -> ExperimentReport:
    xs = sorted(float(v) for v in xs)
    tables = tables or shift_tables(pi, int(xs[-1]), over)
    rep = ExperimentReport("titchmarsh", COLUMNS,
                           meta={"pi": pi.name, "over": over, "B": B,
                                 "normalization": "x (log log x)^(3/2) / sqrt(log x)" if over == "primes"
                                 else "x (log log x)^(3/2)"},
                           notes=[D0_NOTE])
    prev = None
    for x in xs:
        r = divisor_switch_decompose(pi, x, B, over, tables)
        rep.add(**r.row())
        if prev is not None and abs(r.normalized) > GROWTH_FLAG * abs(prev):
            rep.flag(f"x={x}: |normalized| rose from {abs(prev):.4g} to {abs(r.normalized):.4g}")
        prev = r.normalized
    return rep
