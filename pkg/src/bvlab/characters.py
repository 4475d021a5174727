"""Dirichlet characters mod q, built from prime-power components.

A character is stored as its index vector over the cyclic factors of (Z/q)^x.
Values are materialized on first access as a dense array over residues 0..q-1,
exact roots of unity where the order allows (±1, ±i), zero on non-units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Optional

import numpy as np

from . import dirichlet as dr
from .errors import SizeLimitError

MAX_MODULUS = 10**5
PHI_SUM_MAX = 10**7


# ------------------------------------------------------------ small arithmetic

def factorize(q: int) -> list[tuple[int, int]]:
    out = []
    m = q
    p = 2
    while p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if m > 1:
        out.append((m, 1))
    return out


def euler_phi(q: int) -> int:
    r = q
    for p, _ in factorize(q):
        r = r // p * (p - 1)
    return r


def _primitive_root_prime_power(p: int, e: int) -> int:
    phi_p = p - 1
    qs = [r for r, _ in factorize(phi_p)]
    g = 2
    while True:
        if all(pow(g, phi_p // r, p) != 1 for r in qs):
            break
        g += 1
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    return g


def roots_of_unity(L: int) -> np.ndarray:
    """exp(2 pi i k / L) for k < L, snapped to exact values at quarter turns."""
    k = np.arange(L)
    z = np.exp(2j * np.pi * k / L)
    for num, val in ((0, 1), (1, 1j), (2, -1), (3, -1j)):
        hit = (4 * k) == num * L
        z[hit] = val
    return z


# ---------------------------------------------------------------- structure

@dataclass(frozen=True)
class _Factor:
    """One cyclic factor of (Z/q)^x: its order and the discrete log of each residue mod q."""
    prime: int
    order: int
    logs: np.ndarray  # int64 over 0..q-1, -1 on non-units
    role: str  # "odd", "minus1", "five"


@dataclass(frozen=True)
class _Group:
    q: int
    factors: tuple
    units: np.ndarray

    @cached_property
    def L(self) -> int:
        L = 1
        for f in self.factors:
            L = L * f.order // math.gcd(L, f.order)
        return L

    @cached_property
    def roots(self) -> np.ndarray:
        return roots_of_unity(self.L)


@lru_cache(maxsize=64)
def _group(q: int) -> _Group:
    if q < 1:
        raise ValueError("modulus must be positive")
    if q > MAX_MODULUS:
        raise SizeLimitError(f"modulus {q} exceeds {MAX_MODULUS}")
    res = np.arange(q, dtype=np.int64)
    units = np.gcd(res, q) == 1
    factors = []
    for p, e in factorize(q):
        pe = p**e
        r = res % pe
        if p == 2:
            if e == 1:
                continue
            # -1 component: 0 for r = 1 mod 4, 1 for r = 3 mod 4
            lg = np.where(r % 2 == 1, (r % 4 == 3).astype(np.int64), -1)
            factors.append(_Factor(2, 2, lg, "minus1"))
            if e >= 3:
                o = 2 ** (e - 2)
                table = np.full(pe, -1, dtype=np.int64)
                x = 1
                for j in range(o):
                    table[x] = j
                    table[pe - x] = j
                    x = x * 5 % pe
                factors.append(_Factor(2, o, np.where(r % 2 == 1, table[r], -1), "five"))
        else:
            phi = pe // p * (p - 1)
            g = _primitive_root_prime_power(p, e)
            table = np.full(pe, -1, dtype=np.int64)
            x = 1
            for j in range(phi):
                table[x] = j
                x = x * g % pe
            factors.append(_Factor(p, phi, table[r], "odd"))
    return _Group(q, tuple(factors), units)


def _v(p: int, m: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def _structural_conductor(group: _Group, index: tuple) -> int:
    f = 1
    two_minus, two_five = 0, 0
    for fac, j in zip(group.factors, index):
        if j == 0:
            continue
        o = fac.order // math.gcd(j, fac.order)
        if fac.role == "odd":
            f *= fac.prime ** (1 + _v(fac.prime, o))
        elif fac.role == "minus1":
            two_minus = 1
        else:
            two_five = _v(2, o)
    if two_five:
        f *= 2 ** (two_five + 2)
    elif two_minus:
        f *= 4
    return f


# --------------------------------------------------------------- character

@dataclass(frozen=True, eq=False)
class DirichletCharacter:
    modulus: int
    index: tuple
    conductor: int
    explicit_values: Optional[np.ndarray] = field(default=None, repr=False)

    @cached_property
    def values(self) -> np.ndarray:
        if self.explicit_values is not None:
            return self.explicit_values
        g = _group(self.modulus)
        if not g.factors:
            return g.units.astype(complex)
        E = np.zeros(self.modulus, dtype=np.int64)
        for fac, j in zip(g.factors, self.index):
            if j:
                E += (fac.logs * j % fac.order) * (g.L // fac.order)
        vals = g.roots[E % g.L]
        vals[~g.units] = 0
        return vals

    @property
    def q(self) -> int:
        return self.modulus

    @cached_property
    def order(self) -> int:
        if self.explicit_values is not None:
            v = self.values[np.abs(self.values) > 0.5]
            for m in range(1, self.modulus + 1):
                if np.allclose(v**m, 1, atol=1e-9):
                    return m
        g = _group(self.modulus)
        o = 1
        for fac, j in zip(g.factors, self.index):
            oj = fac.order // math.gcd(j, fac.order)
            o = o * oj // math.gcd(o, oj)
        return o

    @property
    def parity(self) -> int:
        if self.modulus <= 2:
            return 1
        return 1 if self.values[self.modulus - 1].real > 0 else -1

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    @property
    def is_principal(self) -> bool:
        return self.order == 1

    @property
    def is_quadratic(self) -> bool:
        return self.order == 2

    def __call__(self, n):
        return self.values[np.asarray(n) % self.modulus]

    def conj(self) -> "DirichletCharacter":
        if self.explicit_values is not None:
            return DirichletCharacter(self.modulus, (), self.conductor, np.conj(self.values))
        g = _group(self.modulus)
        idx = tuple((-j) % fac.order for fac, j in zip(g.factors, self.index))
        return DirichletCharacter(self.modulus, idx, self.conductor)

    def table(self, N: int) -> np.ndarray:
        """chi(n) for n = 0..N."""
        return self.values[np.arange(N + 1) % self.modulus]

    def __repr__(self):
        return f"DirichletCharacter(q={self.modulus}, index={self.index}, conductor={self.conductor})"


def enumerate_characters(q: int, primitive_only: bool = False) -> list[DirichletCharacter]:
    """All phi(q) characters mod q, principal first, in lexicographic index order."""
    g = _group(q)
    out = []
    for idx in product(*[range(f.order) for f in g.factors]):
        f = _structural_conductor(g, idx)
        if primitive_only and f != q:
            continue
        out.append(DirichletCharacter(q, tuple(idx), f))
    return out


def principal_character(q: int) -> DirichletCharacter:
    g = _group(q)
    return DirichletCharacter(q, tuple(0 for _ in g.factors), 1)


def count_primitive(q: int) -> int:
    """Number of primitive characters mod q, from the multiplicative formula."""
    r = 1
    for p, e in factorize(q):
        if e == 1:
            r *= p - 2
        else:
            r *= p ** (e - 2) * (p - 1) ** 2
    return r


def conductor_of(chi: DirichletCharacter) -> int:
    """Smallest f | q such that chi is trivial on units congruent to 1 mod f."""
    q = chi.modulus
    vals = chi.values
    res = np.arange(q)
    units = np.gcd(res, q) == 1
    for f in sorted(d for d in range(1, q + 1) if q % d == 0):
        sel = units & (res % f == 1 % f)
        if np.allclose(vals[sel], 1.0, atol=1e-9):
            return f
    return q


def primitivize(chi: DirichletCharacter) -> DirichletCharacter:
    """The primitive character mod the conductor inducing chi."""
    f = conductor_of(chi)
    q = chi.modulus
    vals = np.zeros(f, dtype=complex)
    for a in range(f):
        if math.gcd(a, f) != 1:
            continue
        b = a
        while math.gcd(b, q) != 1:
            b += f
        vals[a] = chi.values[b % q]
    if f == 1:
        vals = np.ones(1, dtype=complex)
    return DirichletCharacter(f, (), f, vals)


def gauss_sum(chi: DirichletCharacter) -> complex:
    q = chi.modulus
    if q == 1:
        return 1 + 0j
    a = np.arange(q)
    return complex(np.sum(chi.values * np.exp(2j * np.pi * a / q)))


# ------------------------------------------------------- quadratic characters

def is_fundamental_discriminant(d: int) -> bool:
    if d == 1:
        return True
    if d == 0:
        return False
    def squarefree(m):
        m = abs(m)
        return all(e == 1 for _, e in factorize(m)) if m > 1 else True
    if d % 4 == 1:
        return squarefree(d)
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and squarefree(m)
    return False


def fundamental_discriminants(dmax: int, include_one: bool = False) -> list[int]:
    """Fundamental discriminants d != 1 with |d| <= dmax, ordered by |d| then sign (negative first)."""
    out = [1] if include_one else []
    for a in range(3, dmax + 1):
        for d in (-a, a):
            if is_fundamental_discriminant(d):
                out.append(d)
    return out


def _kronecker_at_prime(d: int, p: int) -> int:
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    r = d % p
    if r == 0:
        return 0
    return 1 if pow(r, (p - 1) // 2, p) == 1 else -1


def _powmod(base: np.ndarray, exp: np.ndarray, mod: np.ndarray) -> np.ndarray:
    """Elementwise base^exp mod mod for moduli below 2^31."""
    result = np.ones_like(base)
    b = base % mod
    e = exp.copy()
    while np.any(e > 0):
        odd = (e & 1) == 1
        result = np.where(odd, result * b % mod, result)
        b = b * b % mod
        e >>= 1
    return result


def _kronecker_at_primes(d: int, ps: np.ndarray) -> np.ndarray:
    """(d / p) for an array of primes, by Euler's criterion and the rule at 2."""
    ps = ps.astype(np.int64)
    out = np.zeros(ps.size)
    odd = ps > 2
    po = ps[odd]
    r = np.int64(d) % po
    e = _powmod(r, (po - 1) // 2, po)
    out[odd] = np.where(r == 0, 0.0, np.where(e == 1, 1.0, -1.0))
    if (~odd).any():
        out[~odd] = _kronecker_at_prime(d, 2)
    return out


def kronecker_table(d: int, N: int, sieve: Optional[dr.FactorSieve] = None) -> np.ndarray:
    """(d / n) for n = 0..N as float, completely multiplicative in n (0 at n = 0)."""
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(max(N, 2))
    ps = sieve.primes[sieve.primes <= N]
    at_prime = np.zeros(N + 1)
    at_prime[ps] = _kronecker_at_primes(d, ps)
    m, p, k = sieve.prime_powers
    keep = m <= N
    m, p, k = m[keep], p[keep], k[keep]
    pp = np.zeros(N + 1)
    pp[m] = at_prime[p] ** k
    out = dr.extend_from_prime_powers(pp, sieve, N)
    out = np.real(out).astype(float)
    out[0] = 0.0
    return out


def kronecker_character(d: int) -> DirichletCharacter:
    """chi_d mod |d| for a fundamental discriminant d (primitive, quadratic unless d = 1)."""
    if not is_fundamental_discriminant(d):
        raise ValueError(f"{d} is not a fundamental discriminant")
    q = abs(d)
    vals = kronecker_table(d, q).astype(complex)[:q] if q > 1 else np.ones(1, dtype=complex)
    return DirichletCharacter(q, (), q, vals)


# -------------------------------------------------------------- phi sums

def phi_table(N: int, sieve: Optional[dr.FactorSieve] = None) -> np.ndarray:
    """phi(n) for n = 0..N (phi(0) = 0), by sieving over primes."""
    phi = np.arange(N + 1, dtype=np.int64)
    sieve = sieve if sieve is not None and sieve.N >= N else dr.build_sieve(max(N, 2))
    for p in sieve.primes[sieve.primes <= N]:
        p = int(p)
        phi[p::p] -= phi[p::p] // p
    return phi


def phi_reciprocal_sum(x: float) -> float:
    N = int(math.floor(x))
    if N > PHI_SUM_MAX:
        raise SizeLimitError(f"x = {x} exceeds {PHI_SUM_MAX}")
    if N < 1:
        return 0.0
    phi = phi_table(N)
    return math.fsum(1.0 / phi[1:].astype(float))


def phi_sum_constant(P: int = 10**6) -> float:
    """prod_p (1 + 1/(p(p-1))) over p <= P, with the tail estimated as exp(sum_{p>P} 1/p^2)."""
    ps = dr.build_sieve(P).primes.astype(float)
    logprod = math.fsum(np.log1p(1.0 / (ps * (ps - 1.0))))
    tail = 1.0 / (P * math.log(P))
    return math.exp(logprod + tail)


def orthogonality_defect(q: int) -> float:
    """max over unit pairs (a, b) of |(1/phi) sum_chi chi(a) conj chi(b) - [a = b]|."""
    chars = enumerate_characters(q)
    M = np.array([c.values for c in chars])
    units = np.nonzero(np.gcd(np.arange(q), q) == 1)[0]
    sub = M[:, units]
    G = sub.T @ np.conj(sub) / len(chars)
    return float(np.max(np.abs(G - np.eye(len(units)))))
