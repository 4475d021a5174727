"""Progression sums, smoothed sums, discrepancy curves and the large-sieve ratio.

Over Q the ray class group mod q is (Z/q)^x, so every modulus carries unit
weight in the discrepancy sums.  Reports record that convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import characters as ch
from . import dirichlet as dr
from . import localcoeffs as lc
from .errors import ContractError, TableRangeError
from .reports import ExperimentReport

WEIGHT_NOTE = "unit weight per modulus: over Q the class-group weight h(m)/phi(m) is constant"
DEFAULT_B = 1.0
WEIGHTS = ("plain", "log", "smoothed-rho")
VARIANTS = ("integers", "primes")
BV_COLUMNS = ["x", "Q", "D", "D_over_x", "pi", "eta", "B", "A"]

ParallelMap = Callable[[Callable, Iterable], Iterable]


def default_eta(n: int) -> float:
    return max(2.0, n / 2)


def default_rho(n: int) -> int:
    return n // 4 + 1


def level_Q(x: float, eta: float, B: float) -> float:
    return x ** (1.0 / eta) * math.log(x) ** (-B)


@dataclass
class ExperimentConfig:
    pi: str = "delta"
    x: float = 1e6
    eta: Optional[float] = None
    B: float = DEFAULT_B
    A: float = 1.0
    rho: Optional[int] = None
    seed: int = 0
    q_min: int = 1
    q_max: Optional[int] = None
    weight: str = "plain"
    variant: str = "integers"
    ladder: Optional[list] = None

    def __post_init__(self):
        n = lc.EXEMPLAR_RANK[self.pi]
        if self.eta is None:
            self.eta = default_eta(n)
        if self.rho is None:
            self.rho = default_rho(n)
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.weight not in WEIGHTS:
            raise ValueError(f"weight must be one of {WEIGHTS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def xs(self) -> list:
        if self.ladder:
            return sorted(float(v) for v in self.ladder)
        out = [float(self.x)]
        while out[0] / 10 >= 1e3 - 1e-9:
            out.insert(0, out[0] / 10)
        return out

    def Q(self, x: float) -> float:
        Q = level_Q(x, self.eta, self.B)
        return min(Q, self.q_max) if self.q_max else Q

    def echo(self) -> dict:
        return {k: getattr(self, k) for k in ("pi", "x", "eta", "B", "A", "rho", "seed", "q_min",
                                              "q_max", "weight", "variant", "ladder")}


@dataclass
class DiscrepancyCurve:
    points: list = field(default_factory=list)  # dicts with x, Q, D, D_over_x
    metadata: dict = field(default_factory=dict)

    def ratios(self) -> list:
        return [p["D_over_x"] for p in self.points]

    def strictly_decreasing(self) -> bool:
        r = self.ratios()
        return all(b < a for a, b in zip(r, r[1:]))

    def report(self) -> ExperimentReport:
        m = self.metadata
        rep = ExperimentReport("bv_curve", BV_COLUMNS, meta=dict(m), notes=[WEIGHT_NOTE])
        for p in self.points:
            rep.add(x=p["x"], Q=p["Q"], D=p["D"], D_over_x=p["D_over_x"], pi=m.get("pi", ""),
                    eta=m.get("eta", ""), B=m.get("B", ""), A=m.get("A", ""))
        return rep


# ----------------------------------------------------------- progression sums

def _check_args(t: dr.CoefficientTable, y: float, q: int, a: int) -> int:
    if q < 1:
        raise ContractError("modulus must be positive")
    if math.gcd(a, q) != 1:
        raise ContractError(f"gcd({a}, {q}) != 1")
    Y = int(math.floor(y))
    if Y > t.N:
        raise TableRangeError(f"y = {y} beyond table length {t.N}")
    return Y


def _residue_slice(t: dr.CoefficientTable, Y: int, q: int, a: int) -> tuple[np.ndarray, np.ndarray]:
    start = a % q if a % q else q
    ms = np.arange(start, Y + 1, q)
    return ms, t.values[ms]


def progression_sum(t: dr.CoefficientTable, y: float, q: int, a: int) -> complex:
    Y = _check_args(t, y, q, a)
    _, v = _residue_slice(t, Y, q, a)
    return v.sum() if v.size else 0.0


def psi_rho(t: dr.CoefficientTable, y: float, q: int, a: int, rho: int) -> complex:
    if y < 1:
        _check_args(t, 0, q, a)
        return 0.0
    Y = _check_args(t, y, q, a)
    ms, v = _residue_slice(t, Y, q, a)
    if not v.size:
        return 0.0
    return np.sum(v * (1.0 - ms / y) ** rho)


def gallagher_sides(t: dr.CoefficientTable, y: float, q: int, a: int, rho: int,
                    A: float) -> tuple[complex, complex]:
    """Both sides of the deweighting identity for psi_rho over [y - z, y], z = y / (log y)^(A/2).

    The left side integrates t^(rho-1) psi_(rho-1)(t) one unit interval at a time.
    On [j, j+1) the integrand is sum_i C(rho-1, i) M_(rho-1-i)(j) (t-j)^i with
    M_r(j) = sum_{m <= j, m = a (q)} c(m) (j-m)^r, advanced by
    M_r(j+1) = sum_s C(r, s) M_s(j) + [r = 0][j+1 = a (q)] c(j+1).
    """
    if rho < 1:
        raise ValueError("rho must be at least 1")
    z = y / math.log(y) ** (A / 2)
    lo = y - z
    Y = _check_args(t, y, q, a)
    r = rho - 1
    binom = [[math.comb(i, s) for s in range(r + 1)] for i in range(r + 1)]
    j0 = max(int(math.floor(lo)), 0)
    ms, v = _residue_slice(t, j0, q, a)
    d = (j0 - ms).astype(float)
    M = [np.sum(v * d**s) if v.size else 0.0 for s in range(r + 1)]
    total = 0.0
    j = j0
    while j <= Y:
        a_lo, a_hi = max(lo, j) - j, min(y, j + 1) - j
        if a_hi > a_lo:
            for i in range(r + 1):
                total += binom[r][i] * M[r - i] * (a_hi ** (i + 1) - a_lo ** (i + 1)) / (i + 1)
        j += 1
        if j > Y:
            break
        M = [sum(binom[s][u] * M[u] for u in range(s + 1)) for s in range(r + 1)]
        if (j - a) % q == 0:
            M[0] += t.values[j]
    rhs = (y**rho / rho) * psi_rho(t, y, q, a, rho) - (lo**rho / rho) * psi_rho(t, lo, q, a, rho)
    return total, rhs


def gallagher_identity_check(t: dr.CoefficientTable, y: float, q: int, a: int, rho: int, A: float,
                             tol: float) -> bool:
    if y < 10:
        raise ContractError("the deweighting identity is checked for y >= 10")
    lhs, rhs = gallagher_sides(t, y, q, a, rho, A)
    scale = max(abs(lhs), abs(rhs))
    if scale == 0:
        return True
    return abs(lhs - rhs) / scale < tol


def progression_via_characters(t: dr.CoefficientTable, y: float, q: int, a: int) -> complex:
    """(1/phi(q)) sum_chi conj(chi(a)) sum_{n <= y} t[n] chi(n)."""
    Y = _check_args(t, y, q, a)
    folded = np.zeros(q, dtype=complex)
    np.add.at(folded, np.arange(1, Y + 1) % q, t.values[1 : Y + 1])
    chars = ch.enumerate_characters(q)
    M = np.array([c.values for c in chars])
    sums = M @ folded
    return complex(np.sum(np.conj(M[:, a % q]) * sums) / len(chars))


# ------------------------------------------------------------- discrepancy

def _column_extrema(values: np.ndarray, q: int, rho: int = 0, upto: Optional[int] = None) -> np.ndarray:
    """sup over 1 <= y <= upto of |partial sum| in each residue class mod q (length-q array).

    With rho > 0 the sums are psi_rho(y) = sum_r C(rho, r) (-1/y)^r S_r, S_r = sum_{m <= y} c(m) m^r.
    psi_rho is continuous for rho >= 1 and, between consecutive class members, a degree-rho
    polynomial in 1/y; the sup is taken over jump points, the endpoint y = upto and the
    interior critical points of each piece.
    """
    N = values.shape[0] - 1 if upto is None else upto
    v = values[: N + 1]
    rows = -(-(N + 1) // q)
    pad = np.zeros(rows * q, dtype=v.dtype)
    pad[: N + 1] = v
    if rho == 0:
        S = np.cumsum(pad.reshape(rows, q), axis=0)
        return np.abs(S).max(axis=0)
    m = np.arange(rows * q, dtype=float)
    y = m.reshape(rows, q)
    valid = (y >= 1) & (y <= N)
    S = np.stack([np.cumsum((pad * m**r).reshape(rows, q), axis=0) for r in range(rho + 1)])
    coef = np.array([math.comb(rho, r) * (-1.0) ** r for r in range(rho + 1)])

    def P(u, Sk):  # psi_rho at 1/y = u from moments Sk (leading axis r)
        return sum(coef[r] * u**r * Sk[r] for r in range(rho + 1))

    ysafe = np.where(valid, y, 1.0)
    best = np.where(valid, np.abs(P(1.0 / ysafe, S)), 0.0).max(axis=0)

    # endpoint y = N, with the moments of the last class member <= N in each column
    last = np.minimum((N - np.arange(q)) // q, rows - 1)
    ok = np.arange(q) <= N
    cols = np.arange(q)[ok]
    Send = S[:, last[ok], cols]
    best[ok] = np.maximum(best[ok], np.abs(P(1.0 / N, Send)))

    # interior critical points on (y, min(y + q, N))
    if rho == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            ystar = S[2] / S[1]
            val = np.abs(S[0] - S[1] * S[1] / S[2])
        inside = valid & np.isfinite(ystar) & (ystar > y) & (ystar < np.minimum(y + q, N))
        if inside.any():
            best = np.maximum(best, np.where(inside, val, 0.0).max(axis=0))
    elif rho >= 3:
        idx = np.nonzero(valid & (S[rho] != 0))
        if idx[0].size:
            Sk = S[:, idx[0], idx[1]]
            # P'(u) = sum_{r >= 1} r coef_r S_r u^(r-1); roots via batched companion matrices
            d = np.stack([r * coef[r] * Sk[r] for r in range(1, rho + 1)], axis=-1)  # ascending
            deg = rho - 1
            comp = np.zeros(d.shape[:-1] + (deg, deg), dtype=d.dtype)
            comp[..., 1:, :-1] = np.eye(deg - 1) if deg > 1 else 0
            comp[..., :, -1] = -d[..., :deg] / d[..., deg : deg + 1]
            roots = np.linalg.eigvals(comp) if deg > 1 else comp[..., 0]
            yl = y[idx][:, None]
            yh = np.minimum(yl + q, N)
            for j in range(roots.shape[-1]):
                u = roots[:, j]
                real = np.abs(np.imag(u)) < 1e-12 * np.maximum(1.0, np.abs(u))
                ur = np.real(u)
                with np.errstate(divide="ignore"):
                    ys = np.where(ur > 0, 1.0 / np.where(ur > 0, ur, 1.0), -1.0)
                hit = real & (ys > yl[:, 0]) & (ys < yh[:, 0])
                if hit.any():
                    vals = np.abs(P(np.where(hit, ur, 0.0), Sk))
                    np.maximum.at(best, idx[1][hit], vals[hit])
    return best


def _per_q_max(values: np.ndarray, q: int, x: int, rho: int) -> float:
    ext = _column_extrema(values, q, rho, x)
    units = np.gcd(np.arange(q), q) == 1
    return float(ext[units].max())


def bv_discrepancy(t: dr.CoefficientTable, x: float, Q: float, rho: int = 0,
                   pmap: ParallelMap = map) -> float:
    """sum_{q <= Q} max_{(a, q) = 1} max_{y <= x} |sum_{m <= y, m = a (q)} t[m]|.

    With rho > 0 the inner sums are psi_rho at integer y.
    """
    X = int(math.floor(x))
    if X > t.N:
        raise TableRangeError(f"x = {x} beyond table length {t.N}")
    if Q < 1 or X < 1:
        return 0.0
    qs = range(1, int(math.floor(Q)) + 1)
    vals = list(pmap(lambda q: _per_q_max(t.values, q, X, rho), qs))
    return float(math.fsum(vals))


def bv_table(pi: lc.ExemplarPi, N: int, variant: str, weight: str,
             sieve: Optional[dr.FactorSieve] = None) -> dr.CoefficientTable:
    """lambda_pi on integers, or lambda_pi(p) on primes (times log p under the log weight)."""
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(N)
    lam = dr.exemplar_table(pi, "lambda_pi", N, sieve)
    v = lam.values.copy()
    if variant == "primes":
        mask = np.zeros(N + 1, dtype=bool)
        mask[sieve.primes[sieve.primes <= N]] = True
        v = np.where(mask, v, 0)
    if weight == "log":
        v[1:] = v[1:] * np.log(np.arange(1, N + 1, dtype=float))
    return dr.CoefficientTable("custom", v)


def run_bv_curve(cfg: ExperimentConfig, tau: Optional[lc.TauTable] = None,
                 sieve: Optional[dr.FactorSieve] = None, pmap: ParallelMap = map) -> DiscrepancyCurve:
    xs = cfg.xs()
    N = int(max(xs))
    pi = lc.ExemplarPi(cfg.pi, tau if cfg.pi != "zeta" else None)
    t = bv_table(pi, N, cfg.variant, cfg.weight, sieve)
    rho = cfg.rho if cfg.weight == "smoothed-rho" else 0
    curve = DiscrepancyCurve(metadata={**cfg.echo(), "rho_used": rho, "weight_note": WEIGHT_NOTE})
    for x in xs:
        Q = cfg.Q(x)
        D = bv_discrepancy(t, x, Q, rho=rho, pmap=pmap)
        curve.points.append({"x": float(x), "Q": float(Q), "D": D, "D_over_x": D / x})
    return curve


# -------------------------------------------------------- Siegel-Walfisz

def siegel_walfisz_check(pi: lc.ExemplarPi, xs: Sequence[float], A: float, q_min: int = 1,
                         sieve: Optional[dr.FactorSieve] = None) -> ExperimentReport:
    """max over q_min <= q <= (log x)^A and unit a of |sum_{n <= x, n = a} Lambda(n) a_pi(n) - M| / x.

    M = x / phi(q) for zeta (the pole), 0 otherwise.  Also reports the gap between the
    Lambda a_pi sum and the prime-only lambda_pi(p) log p sum over q = 1.
    """
    N = int(max(xs))
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(N)
    lva = dr.exemplar_table(pi, "vonmangoldt_a_pi", N, sieve)
    prime_t = bv_table(pi, N, "primes", "log", sieve)
    rep = ExperimentReport("siegel_walfisz", ["x", "q_max", "max_ratio", "worst_q", "worst_a",
                                              "prime_power_gap"],
                           meta={"pi": pi.name, "A": A, "q_min": q_min,
                                 "main_term": "x/phi(q)" if pi.name == "zeta" else "0"},
                           notes=[WEIGHT_NOTE])
    prev = None
    for x in sorted(xs):
        X = int(math.floor(x))
        qmax = int(math.floor(math.log(x) ** A))
        best, wq, wa = 0.0, None, None
        for q in range(q_min, qmax + 1):
            units = np.array([a for a in range(1, q + 1) if math.gcd(a, q) == 1])
            main = x / ch.euler_phi(q) if pi.name == "zeta" else 0.0
            C = dr.residue_prefix(lva.values[: X + 1], q)
            r = np.abs(dr.prefix_query(C, X, units, q) - main) / x
            i = int(np.argmax(r))
            if r[i] > best:
                best, wq, wa = float(r[i]), q, int(units[i])
        gap = abs(progression_sum(lva, X, 1, 1) - progression_sum(prime_t, X, 1, 1))
        if qmax < q_min:
            rep.notes.append(f"x={x}: modulus range [{q_min}, {qmax}] is empty; check is vacuous")
            rep.add(x=float(x), q_max=qmax, max_ratio=float("nan"), worst_q="", worst_a="",
                    prime_power_gap=float(gap))
            continue
        rep.add(x=float(x), q_max=qmax, max_ratio=float(best), worst_q=wq, worst_a=wa,
                prime_power_gap=float(gap))
        if gap > x**0.75:
            rep.flag(f"x={x}: prime-power gap {gap:.4g} exceeds x^0.75")
        if prev is not None and best >= prev:
            rep.flag(f"x={x}: max ratio {best:.4g} did not decrease from {prev:.4g}")
        prev = best
    return rep


# ------------------------------------------------------------- large sieve

def large_sieve_sides(c: np.ndarray, Q: int) -> tuple[float, float]:
    """c[n - 1] holds the coefficient of n, n = 1..x."""
    c = np.asarray(c)
    x = c.shape[0]
    if Q > 10**3 or x > 10**6:
        raise ContractError("large-sieve ratio is capped at Q = 10^3, x = 10^6")
    n = np.arange(1, x + 1)
    lhs = 0.0
    for q in range(1, Q + 1):
        prim = ch.enumerate_characters(q, primitive_only=True)
        if not prim:
            continue
        folded = np.zeros(q, dtype=complex)
        np.add.at(folded, n % q, c)
        M = np.array([p.values for p in prim])
        lhs += q / ch.euler_phi(q) * float(np.sum(np.abs(M @ folded) ** 2))
    rhs = (Q * Q + x) * float(np.sum(np.abs(c) ** 2))
    return lhs, rhs


def large_sieve_ratio(c: np.ndarray, Q: int) -> float:
    lhs, rhs = large_sieve_sides(c, Q)
    return 0.0 if lhs == 0 else lhs / rhs
