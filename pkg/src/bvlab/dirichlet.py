"""Arithmetic functions on 1..N: sieving, multiplicative extension, convolution."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, TextIO, Union

import numpy as np

from . import localcoeffs as lc
from .errors import ContractError, SizeLimitError, TableRangeError

SIEVE_MAX_N = 10**8

ROLES = ("lambda_pi", "vonmangoldt_a_pi", "mu_pi", "rs_lambda", "rs_vonmangoldt", "divisor",
         "b_Fpi", "alpha_Fpi", "beta_Fpi", "custom")
MULTIPLICATIVE_ROLES = ("lambda_pi", "mu_pi", "rs_lambda", "divisor")


@dataclass(frozen=True)
class FactorSieve:
    N: int
    spf: np.ndarray  # spf[m] = least prime factor of m for m >= 2; spf[0] = 0, spf[1] = 1

    @cached_property
    def primes(self) -> np.ndarray:
        m = np.arange(self.N + 1)
        return np.nonzero((self.spf == m) & (m >= 2))[0]

    @cached_property
    def is_prime(self) -> np.ndarray:
        mask = np.zeros(self.N + 1, dtype=bool)
        mask[self.primes] = True
        return mask

    @cached_property
    def prime_power_part(self) -> np.ndarray:
        """p^k exactly dividing m where p = spf[m]; 1 at m = 1."""
        pp = self.spf.copy()
        pp[0] = 0
        for p in self.primes[self.primes <= math.isqrt(self.N)]:
            pk = int(p) * int(p)
            while pk <= self.N:
                idx = np.arange(pk, self.N + 1, pk)
                pp[idx[self.spf[idx] == p]] = pk
                pk *= int(p)
        return pp

    @cached_property
    def prime_powers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(m, p, k) for every prime power m = p^k <= N, sorted by m."""
        ms, ps, ks = [], [], []
        for p in self.primes:
            pk, k = int(p), 1
            while pk <= self.N:
                ms.append(pk)
                ps.append(int(p))
                ks.append(k)
                pk *= int(p)
                k += 1
        order = np.argsort(ms, kind="stable")
        return (np.array(ms, dtype=np.int64)[order], np.array(ps, dtype=np.int64)[order],
                np.array(ks, dtype=np.int64)[order])

    def factor(self, m: int) -> list[tuple[int, int]]:
        out = []
        while m > 1:
            p = int(self.spf[m])
            k = 0
            while m % p == 0:
                m //= p
                k += 1
            out.append((p, k))
        return out


def build_sieve(N: int) -> FactorSieve:
    """Least-prime-factor table for 0..N."""
    if N > SIEVE_MAX_N:
        raise SizeLimitError(f"sieve size {N} exceeds {SIEVE_MAX_N}")
    N = max(int(N), 1)
    dtype = np.int32 if N < 2**31 else np.int64
    spf = np.zeros(N + 1, dtype=dtype)
    spf[1] = 1
    for p in range(2, math.isqrt(N) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
            spf[p] = p
    rest = np.nonzero(spf == 0)[0]
    rest = rest[rest >= 2]
    spf[rest] = rest
    return FactorSieve(N, spf)


@dataclass(frozen=True)
class CoefficientTable:
    role: str
    values: np.ndarray  # index 0 unused (zero); index m holds the coefficient of m^-s

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown table role {self.role!r}")

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def __getitem__(self, m):
        return self.values[m]

    def truncated(self, N: int) -> "CoefficientTable":
        if N > self.N:
            raise TableRangeError(f"table of length {self.N} cannot cover {N}")
        return CoefficientTable(self.role, self.values[: N + 1].copy())

    def to_csv(self, fh: Optional[TextIO] = None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "value_re", "value_im"])
        v = self.values
        re = np.real(v)
        im = np.imag(v) if np.iscomplexobj(v) else np.zeros_like(re)
        for m in range(1, self.N + 1):
            w.writerow([m, repr(float(re[m])), repr(float(im[m]))])
        return "" if fh is not None else buf.getvalue()


def real_if_close(values: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if np.iscomplexobj(values) and np.all(np.abs(values.imag) <= tol * (1 + np.abs(values.real))):
        return values.real.copy()
    return values


# ----------------------------------------------------- multiplicative tables

def extend_from_prime_powers(pp_values: np.ndarray, sieve: FactorSieve, N: int) -> np.ndarray:
    """values[m] = prod over p^k || m of pp_values[p^k]; pp_values must hold 1 at index 1."""
    if N > sieve.N:
        raise TableRangeError(f"sieve covers {sieve.N}, need {N}")
    ppart = sieve.prime_power_part[: N + 1].astype(np.int64)
    ppart[1] = 1
    m = np.arange(N + 1, dtype=np.int64)
    rest = np.ones(N + 1, dtype=np.int64)
    rest[1:] = m[1:] // ppart[1:]
    pv = pp_values[: N + 1].copy()
    pv[1] = 1
    vals = pv[ppart]
    cur = rest.copy()
    while True:
        live = cur > 1
        if not live.any():
            break
        vals[live] *= pv[ppart[cur[live]]]
        cur[live] = rest[cur[live]]
    vals[0] = 0
    return vals


def multiplicative_extend(local: Callable[[int, int], complex], N: int, sieve: FactorSieve,
                          role: str = "custom") -> CoefficientTable:
    """Extend local(p, k) multiplicatively to 1..N."""
    ms, ps, ks = sieve.prime_powers
    keep = ms <= N
    pv = np.zeros(N + 1, dtype=complex)
    pv[1] = 1.0
    for m, p, k in zip(ms[keep], ps[keep], ks[keep]):
        pv[m] = local(int(p), int(k))
    return CoefficientTable(role, real_if_close(extend_from_prime_powers(pv, sieve, N)))


def dirichlet_convolve(f: CoefficientTable, g: CoefficientTable, role: str = "custom") -> CoefficientTable:
    if f.N != g.N:
        raise ContractError(f"convolution needs equal lengths, got {f.N} and {g.N}")
    N = f.N
    dtype = np.result_type(f.values.dtype, g.values.dtype)
    out = np.zeros(N + 1, dtype=dtype)
    gv = g.values
    for d in np.nonzero(f.values[1:])[0] + 1:
        out[d::d] += f.values[d] * gv[1 : N // d + 1]
    return CoefficientTable(role, out)


def unit_table(N: int) -> CoefficientTable:
    v = np.zeros(N + 1)
    v[1] = 1.0
    return CoefficientTable("custom", v)


def ones_table(N: int) -> CoefficientTable:
    v = np.ones(N + 1)
    v[0] = 0.0
    return CoefficientTable("custom", v)


def divisor_table(N: int) -> CoefficientTable:
    d = np.zeros(N + 1)
    for k in range(1, N + 1):
        d[k::k] += 1
    d[0] = 0
    return CoefficientTable("divisor", d)


def mobius_table(N: int, sieve: Optional[FactorSieve] = None) -> CoefficientTable:
    sieve = sieve or build_sieve(N)
    ms, ps, ks = sieve.prime_powers
    pv = np.zeros(N + 1)
    pv[1] = 1.0
    keep = ms <= N
    pv[ms[keep]] = np.where(ks[keep] == 1, -1.0, 0.0)
    return CoefficientTable("mu_pi", extend_from_prime_powers(pv, sieve, N))


def von_mangoldt_table(N: int, sieve: Optional[FactorSieve] = None) -> CoefficientTable:
    sieve = sieve or build_sieve(N)
    ms, ps, _ = sieve.prime_powers
    v = np.zeros(N + 1)
    keep = ms <= N
    v[ms[keep]] = np.log(ps[keep].astype(float))
    return CoefficientTable("vonmangoldt_a_pi", v)


# ----------------------------------------------------------- exemplar tables

_LOCAL_KINDS = {
    "lambda_pi": lc.lambda_table_local,
    "mu_pi": lc.mu_table_local,
    "rs_lambda": lc.rs_lambda_table,
}


def _check_reach(pi: lc.ExemplarPi, N: int) -> None:
    if N > pi.reach:
        raise TableRangeError(f"{pi.name} coefficients need tau up to {N}, table has {pi.reach}")


def _prime_power_values(pi: lc.ExemplarPi, role: str, N: int, sieve: FactorSieve) -> np.ndarray:
    ms, ps, ks = sieve.prime_powers
    keep = ms <= N
    ms, ps, ks = ms[keep], ps[keep], ks[keep]
    primes = sieve.primes[sieve.primes <= N]
    A = lc.satake_matrix(pi, primes)
    row_of = np.zeros(N + 1, dtype=np.int64)
    row_of[primes] = np.arange(primes.size)
    pv = np.zeros(N + 1, dtype=complex)
    pv[1] = 1.0
    kmax = int(ks.max()) if ks.size else 0
    for k in range(1, kmax + 1):
        sel = ks == k
        rows = row_of[ps[sel]]
        if role in _LOCAL_KINDS:
            vals = _LOCAL_KINDS[role](A[rows], k)[:, k]
        elif role == "vonmangoldt_a_pi":
            vals = lc.a_table_local(A[rows], k)[:, k] * np.log(ps[sel].astype(float))
        elif role == "rs_vonmangoldt":
            vals = np.abs(lc.a_table_local(A[rows], k)[:, k]) ** 2 * np.log(ps[sel].astype(float))
        else:
            raise ValueError(f"no exemplar builder for role {role!r}")
        pv[ms[sel]] = vals
    return pv


def exemplar_table(pi: lc.ExemplarPi, role: str, N: int,
                   sieve: Optional[FactorSieve] = None) -> CoefficientTable:
    """Coefficient table of an exemplar for roles lambda_pi, mu_pi, rs_lambda,
    vonmangoldt_a_pi (Lambda(n) a_pi(n)) and rs_vonmangoldt (Lambda(n) a_{pi x pi~}(n))."""
    _check_reach(pi, N)
    sieve = sieve if sieve is not None and sieve.N >= N else build_sieve(N)
    pv = _prime_power_values(pi, role, N, sieve)
    if role in ("vonmangoldt_a_pi", "rs_vonmangoldt"):
        pv[1] = 0.0
        return CoefficientTable(role, real_if_close(pv))
    return CoefficientTable(role, real_if_close(extend_from_prime_powers(pv, sieve, N)))


def von_mangoldt_a(pi: lc.ExemplarPi, N: int, sieve: Optional[FactorSieve] = None) -> CoefficientTable:
    return exemplar_table(pi, "vonmangoldt_a_pi", N, sieve)


def log_weighted(t: CoefficientTable, role: str = "custom") -> CoefficientTable:
    v = t.values.copy()
    v[1:] = v[1:] * np.log(np.arange(1, t.N + 1, dtype=float))
    return CoefficientTable(role, v)


def truncated_log_deriv_check(pi: lc.ExemplarPi, N: int, tol: float,
                              sieve: Optional[FactorSieve] = None) -> bool:
    """(lambda log) * mu against Lambda a_pi, coefficientwise up to N."""
    if N > 10**5:
        raise SizeLimitError("log-derivative check is capped at N = 10^5")
    return log_deriv_deviation(pi, N, sieve) < tol


def log_deriv_deviation(pi: lc.ExemplarPi, N: int, sieve: Optional[FactorSieve] = None) -> float:
    sieve = sieve if sieve is not None and sieve.N >= N else build_sieve(N)
    lam = exemplar_table(pi, "lambda_pi", N, sieve)
    mu = exemplar_table(pi, "mu_pi", N, sieve)
    lhs = dirichlet_convolve(log_weighted(lam), mu)
    rhs = von_mangoldt_a(pi, N, sieve)
    return float(np.max(np.abs(lhs.values[1:] - rhs.values[1:])))


def convolution_power(t: CoefficientTable, k: int) -> CoefficientTable:
    out = unit_table(t.N)
    for _ in range(k):
        out = dirichlet_convolve(out, t)
    return out


# ------------------------------------------------------ progression prefixes

def residue_prefix(values: np.ndarray, q: int) -> np.ndarray:
    """C[m] = sum of values[j] over j <= m with j = m mod q (values[0] included)."""
    n = values.shape[0]
    rows = -(-n // q)
    pad = np.zeros(rows * q, dtype=values.dtype)
    pad[:n] = values
    return np.cumsum(pad.reshape(rows, q), axis=0).reshape(-1)[:n]


def prefix_query(C: np.ndarray, upto, residue, q: int):
    """sum over 1 <= j <= upto, j = residue mod q, from a residue_prefix table.

    upto and residue may be arrays; upto is an integer bound (already floored).
    """
    upto = np.asarray(upto, dtype=np.int64)
    residue = np.asarray(residue, dtype=np.int64) % q
    m = upto - ((upto - residue) % q)
    ok = m >= 1
    out = np.zeros(np.broadcast(upto, residue).shape, dtype=C.dtype)
    if np.ndim(out) == 0:
        return C[int(m)] if ok else out[()]
    out[ok] = C[m[ok]]
    return out
