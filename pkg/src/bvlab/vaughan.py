"""Vaughan-type decomposition of sum Lambda(n) a_pi(n) over an arithmetic progression.

Coefficients come from the Dirichlet series identity
    L'/L = L' M + L M N + (L'/L + N)(1 - L M) - N
with M the truncation of 1/L at X and N the truncation of -L'/L at Y.  With
X = Y the progression sum up to y splits into S1 + S2 - S3 + S4, where S1 is
the short piece, S2 and S3 are linear in a smooth coefficient and S4 is
bilinear with both variables beyond X.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import dirichlet as dr
from . import localcoeffs as lc
from .errors import ContractError, TableRangeError


@dataclass(frozen=True)
class VaughanParams:
    X: float
    Y: float
    y: float
    q: int = 1
    a: int = 1

    def __post_init__(self):
        if not (self.X > 1 and self.Y > 1):
            raise ContractError("X and Y must exceed 1")
        if self.X != self.Y:
            raise ContractError("the decomposition is taken with X = Y")
        if self.q < 1 or math.gcd(self.a, self.q) != 1:
            raise ContractError(f"residue {self.a} is not a unit mod {self.q}")
        if self.y < 1:
            raise ContractError("y must be at least 1")


@dataclass(frozen=True)
class VaughanTables:
    lam: np.ndarray
    mu: np.ndarray
    lam_log: np.ndarray
    lva: np.ndarray  # Lambda(n) a_pi(n)

    @property
    def N(self) -> int:
        return self.lam.shape[0] - 1


def vaughan_tables(pi: lc.ExemplarPi, N: int, sieve: Optional[dr.FactorSieve] = None) -> VaughanTables:
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(N)
    lam = dr.exemplar_table(pi, "lambda_pi", N, sieve)
    mu = dr.exemplar_table(pi, "mu_pi", N, sieve)
    lva = dr.von_mangoldt_a(pi, N, sieve)
    return VaughanTables(lam.values, mu.values, dr.log_weighted(lam).values, lva.values)


@dataclass(frozen=True)
class VaughanDecomposition:
    q: int
    a: int
    y: float
    X: float
    S1: complex
    S2: complex
    S3: complex
    S4: complex
    direct: complex

    @property
    def total(self) -> complex:
        return self.S1 + self.S2 - self.S3 + self.S4

    @property
    def residual(self) -> float:
        return abs(self.total - self.direct)

    @property
    def relative_residual(self) -> float:
        return self.residual / (1.0 + abs(self.direct))

    def to_json(self) -> str:
        def enc(z):
            z = complex(z)
            return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}

        d = {"q": self.q, "a": self.a, "y": self.y, "X": self.X}
        for k in ("S1", "S2", "S3", "S4", "direct"):
            d[k] = enc(getattr(self, k))
        d["residual"] = self.residual
        return json.dumps(d, sort_keys=False)


def _unit_inverses(q: int) -> np.ndarray:
    inv = np.zeros(q, dtype=np.int64)
    for r in range(q):
        if math.gcd(r, q) == 1:
            inv[r] = pow(r, -1, q) if q > 1 else 0
    return inv


def _coprime(m: np.ndarray, q: int) -> np.ndarray:
    return np.gcd(m, q) == 1


def decompose(pi: lc.ExemplarPi, params: VaughanParams, tables: VaughanTables) -> VaughanDecomposition:
    """S1..S4 and the direct sum over n <= y, n = a mod q.

    Range conventions: b <= X and c <= X are non-strict, b > X and c > X strict.
    When y <= X the short piece S1 is cut at y so the identity still closes.
    """
    X, y, q, a = params.X, params.y, params.q, params.a
    Ny = int(math.floor(y))
    Nx = int(math.floor(X))
    if tables.N < Ny:
        raise ContractError(f"tables cover {tables.N}, need {Ny}")
    inv = _unit_inverses(q)
    C_lam = dr.residue_prefix(tables.lam[: Ny + 1], q)
    C_llog = dr.residue_prefix(tables.lam_log[: Ny + 1], q)
    C_lva = dr.residue_prefix(tables.lva[: Ny + 1], q)

    S1 = dr.prefix_query(C_lva, min(Nx, Ny), a, q)
    direct = dr.prefix_query(C_lva, Ny, a, q)

    # S2: b <= X, then c <= y/b with bc = a.
    b = np.arange(1, min(Nx, Ny) + 1)
    b = b[(tables.mu[b] != 0) & _coprime(b, q)]
    S2 = np.sum(tables.mu[b] * dr.prefix_query(C_llog, Ny // b, a * inv[b % q], q))

    # S3: b, c <= X, then d <= y/(bc).
    c = np.arange(1, min(Nx, Ny) + 1)
    c = c[(tables.lva[c] != 0) & _coprime(c, q)]
    bb, cc = np.meshgrid(b, c, indexing="ij")
    bc = (bb * cc).ravel()
    w = (tables.mu[bb] * tables.lva[cc]).ravel()
    keep = bc <= Ny
    bc, w = bc[keep], w[keep]
    S3 = np.sum(w * dr.prefix_query(C_lam, Ny // bc, a * inv[bc % q], q))

    # S4: b > X and c > X, then d <= y/(bc).
    S4 = 0.0 * S1
    lo = Nx + 1
    if lo * lo <= Ny:
        cs = np.arange(lo, Ny // lo + 1)
        cs = cs[(tables.lva[cs] != 0) & _coprime(cs, q)]
        bs_all = np.arange(lo, Ny // lo + 1)
        bs_all = bs_all[(tables.mu[bs_all] != 0) & _coprime(bs_all, q)]
        for cv in cs:
            bs = bs_all[bs_all <= Ny // cv]
            if bs.size == 0:
                continue
            bcv = bs * cv
            S4 = S4 + tables.lva[cv] * np.sum(
                tables.mu[bs] * dr.prefix_query(C_lam, Ny // bcv, a * inv[bcv % q], q))

    return VaughanDecomposition(q, a, y, X, S1, S2, S3, S4, direct)


def _alpha_values(tables: VaughanTables, X: float, N: int) -> np.ndarray:
    Nx = int(math.floor(X))
    top = min(Nx, N)
    f = np.zeros(N + 1, dtype=np.result_type(tables.mu, tables.lva))
    for b in np.nonzero(tables.mu[1 : top + 1])[0] + 1:
        hi = min(top, N // b)
        f[b : b * hi + 1 : b] += tables.mu[b] * tables.lva[1 : hi + 1]
    return f


def _beta_values(tables: VaughanTables, X: float, N: int) -> np.ndarray:
    f = np.zeros(N + 1, dtype=np.result_type(tables.mu, tables.lam))
    start = int(math.floor(X)) + 1
    for b in np.nonzero(tables.mu[start : N + 1])[0] + start:
        f[b::b] += tables.mu[b] * tables.lam[1 : N // b + 1]
    return f


def s3_from_alpha(params: VaughanParams, tables: VaughanTables) -> complex:
    """S3 regrouped as sum over n <= X^2 of alpha(n) times a progression sum of lambda."""
    Ny = int(math.floor(params.y))
    q, a = params.q, params.a
    top = min(Ny, int(math.floor(params.X)) ** 2)
    alpha = _alpha_values(tables, params.X, top)
    n = np.nonzero(alpha[1:])[0] + 1
    n = n[_coprime(n, q)]
    inv = _unit_inverses(q)
    C_lam = dr.residue_prefix(tables.lam[: Ny + 1], q)
    return np.sum(alpha[n] * dr.prefix_query(C_lam, Ny // n, a * inv[n % q], q))


def s4_from_beta(params: VaughanParams, tables: VaughanTables) -> complex:
    """S4 regrouped as sum over X < n < y/X of beta(n) times a progression sum of Lambda a_pi."""
    Ny = int(math.floor(params.y))
    Nx = int(math.floor(params.X))
    q, a = params.q, params.a
    if (Nx + 1) ** 2 > Ny:
        return 0.0
    top = Ny // (Nx + 1)
    beta = _beta_values(tables, params.X, top)
    n = np.nonzero(beta[1:])[0] + 1
    n = n[_coprime(n, q) & (n > params.X)]
    inv = _unit_inverses(q)
    C_lva = dr.residue_prefix(tables.lva[: Ny + 1], q)
    r = a * inv[n % q]
    inner = dr.prefix_query(C_lva, Ny // n, r, q) - dr.prefix_query(C_lva, np.full(n.shape, Nx), r, q)
    inner = np.where(Ny // n > Nx, inner, 0.0)
    return np.sum(beta[n] * inner)


def vaughan_identity_check(pi: lc.ExemplarPi, n0: int, X: float, Y: float, tol: float,
                           tables: Optional[VaughanTables] = None) -> bool:
    """Three-term right side at a single n0 > Y against Lambda(n0) a_pi(n0)."""
    lhs, rhs = vaughan_identity_terms(pi, n0, X, Y, tables)
    return abs(lhs - rhs) <= tol


def vaughan_identity_terms(pi: lc.ExemplarPi, n0: int, X: float, Y: float,
                           tables: Optional[VaughanTables] = None) -> tuple[complex, complex]:
    if n0 <= Y:
        raise ContractError(f"n0 = {n0} must exceed Y = {Y}")
    if tables is None or tables.N < n0:
        tables = vaughan_tables(pi, n0)
    divs = [d for d in range(1, n0 + 1) if n0 % d == 0]
    t1 = sum(tables.mu[b] * tables.lam_log[n0 // b] for b in divs if b <= X)
    t2 = 0.0
    t3 = 0.0
    for b in divs:
        for c in divs:
            if (n0 // b) % c:
                continue
            w = tables.mu[b] * tables.lva[c] * tables.lam[n0 // (b * c)]
            if b <= X and c <= Y:
                t2 += w
            elif b > X and c > Y:
                t3 += w
    return tables.lva[n0], t1 - t2 + t3


# ----------------------------------------------------------- coefficient builders

def alpha_coeff(pi: lc.ExemplarPi, X: float, N: int,
                tables: Optional[VaughanTables] = None) -> dr.CoefficientTable:
    """alpha(n) = sum over bc = n with b, c <= X of mu_pi(b) Lambda(c) a_pi(c)."""
    tables = tables if tables is not None and tables.N >= N else vaughan_tables(pi, N)
    return dr.CoefficientTable("alpha_Fpi", _alpha_values(tables, X, N))


def beta_coeff(pi: lc.ExemplarPi, X: float, N: int,
               tables: Optional[VaughanTables] = None) -> dr.CoefficientTable:
    """beta(n) = sum over bd = n with b > X of mu_pi(b) lambda_pi(d)."""
    tables = tables if tables is not None and tables.N >= N else vaughan_tables(pi, N)
    return dr.CoefficientTable("beta_Fpi", _beta_values(tables, X, N))


def b_coeff(pi: lc.ExemplarPi, N: int, tables: Optional[VaughanTables] = None) -> dr.CoefficientTable:
    """b(n) = sum over ab = n of |lambda_pi(a) mu_pi(b)|."""
    tables = tables if tables is not None and tables.N >= N else vaughan_tables(pi, N)
    f = dr.CoefficientTable("custom", np.abs(tables.lam[: N + 1]))
    g = dr.CoefficientTable("custom", np.abs(tables.mu[: N + 1]))
    return dr.dirichlet_convolve(f, g, role="b_Fpi")


def second_moment_tripwires(pi: lc.ExemplarPi, xs, tables: Optional[VaughanTables] = None,
                            limit: float = 50.0) -> list[dict]:
    """Normalized second moments of Lambda a_pi, alpha and beta with X = x^(1/3)."""
    xmax = int(max(xs))
    tables = tables if tables is not None and tables.N >= xmax else vaughan_tables(pi, xmax)
    n = pi.n
    rows = []
    for x in xs:
        N = int(x)
        X = x ** (1.0 / 3.0)
        L = math.log(x)
        lva2 = float(np.sum(np.abs(tables.lva[1 : N + 1]) ** 2)) / x
        al = _alpha_values(tables, X, N)
        be = _beta_values(tables, X, N)
        al2 = float(np.sum(np.abs(al) ** 2)) / (x * L ** (n + 2))
        be2 = float(np.sum(np.abs(be) ** 2)) / (x * L ** (4 * n + 3))
        rows.append({"x": x, "X": X, "lva_sq": lva2, "alpha_sq": al2, "beta_sq": be2,
                     "flag": max(lva2, al2, be2) > limit})
    return rows
