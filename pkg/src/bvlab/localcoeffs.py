"""Local Dirichlet coefficients from Satake parameters, and the exemplar forms.

The exemplars are the trivial representation (zeta), the discriminant form
Delta of weight 12 and its symmetric square and cube lifts.  All of them have
level one, so every prime is unramified and the Satake data at p is fixed by
tau(p).
"""
from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import symcore
from .errors import ArithmeticOverflowError, ContractError, SizeLimitError, TableRangeError
from .symcore import ComplexMultiset

TAU_MAX_N = 10**6
TAU_MAGIC = b"TAU1"
WEIGHT = 12
HALF_WEIGHT_SHIFT = (WEIGHT - 1) / 2  # tau(n) / n^(11/2) is the unitary normalization

EXEMPLAR_RANK = {"zeta": 1, "delta": 2, "sym2-delta": 3, "sym3-delta": 4}

# Three primes just below 2^40.  Their product exceeds 2^119, which covers
# |tau(n)| <= d(n) n^(11/2) < 2^118 for n <= 10^6 with a sign bit to spare.
_TAU_MODULI = (1099511627689, 1099511627653, 1099511627563)


# ------------------------------------------------------------------ tau table

@dataclass(frozen=True)
class TauTable:
    """Exact tau(m) for 1 <= m <= N; values[0] is an unused zero."""

    N: int
    values: np.ndarray  # object array of Python ints

    def __getitem__(self, m: int) -> int:
        if m < 1 or m > self.N:
            raise TableRangeError(f"tau({m}) outside table 1..{self.N}")
        return int(self.values[m])

    def normalized(self) -> np.ndarray:
        """tau(m) / m^(11/2) as floats, index 0 unused."""
        out = np.zeros(self.N + 1)
        m = np.arange(1, self.N + 1, dtype=float)
        out[1:] = self.values[1:].astype(float) / m ** HALF_WEIGHT_SHIFT
        return out

    def to_bytes(self) -> bytes:
        v = self.values[1:]
        lo = (v & ((1 << 64) - 1)).astype(np.uint64)
        hi = (v >> 64).astype(np.int64)
        rec = np.empty(self.N, dtype=[("lo", "<u8"), ("hi", "<i8")])
        rec["lo"] = lo
        rec["hi"] = hi
        header = TAU_MAGIC + b"\x00" * 4 + struct.pack("<Q", self.N)
        return header + rec.tobytes()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def truncate(self, N: int) -> "TauTable":
        if N > self.N:
            raise TableRangeError(f"cannot truncate table of size {self.N} to {N}")
        return TauTable(N, self.values[: N + 1].copy())


def _eta_cubed_support(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Exponents and coefficients of eta^3 / q^(1/8) = sum (-1)^k (2k+1) q^(k(k+1)/2) below q^L."""
    kmax = int((math.isqrt(8 * L) + 1) // 2) + 2
    k = np.arange(kmax, dtype=np.int64)
    e = k * (k + 1) // 2
    keep = e < L
    k = k[keep]
    return e[keep], np.where(k % 2 == 0, 1, -1) * (2 * k + 1)


def _jit(fn):
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return fn
    return numba.njit(cache=False)(fn)


@_jit
def _mul_sparse_mod(D, e, c, p):
    # out = D * (sum c_t q^e_t) mod (p, q^L).  |c| sums to < 2^21 and D < 2^40,
    # so the int64 accumulator cannot overflow before the final reduction.
    L = D.shape[0]
    out = np.zeros(L, np.int64)
    for t in range(e.shape[0]):
        s = e[t]
        cc = c[t]
        for i in range(L - s):
            out[s + i] += cc * D[i]
    for i in range(L):
        out[i] %= p
    return out


@_jit
def _square_sparse_mod(e, c, L, p):
    out = np.zeros(L, np.int64)
    for a in range(e.shape[0]):
        for b in range(e.shape[0]):
            s = e[a] + e[b]
            if s < L:
                out[s] += c[a] * c[b]
    for i in range(L):
        out[i] %= p
    return out


def _crt_signed(residues: list[np.ndarray], moduli: tuple[int, ...]) -> np.ndarray:
    """Garner reconstruction into symmetric-range Python ints (object array)."""
    x = residues[0].astype(object)
    M = moduli[0]
    for r, p in zip(residues[1:], moduli[1:]):
        inv = pow(M % p, -1, p)
        t = ((r.astype(object) - x) % p) * inv % p
        x = x + M * t
        M *= p
    half = M // 2
    return np.where(x > half, x - M, x)


def _divisor_counts(N: int) -> np.ndarray:
    d = np.zeros(N + 1, dtype=np.int64)
    for k in range(1, N + 1):
        d[k::k] += 1
    return d


def compute_tau_table(N: int) -> TauTable:
    """tau(m) for m <= N from Delta = q (eta^3)^8, multi-modular with an overflow guard."""
    if N < 1:
        raise ContractError("N must be positive")
    if N > TAU_MAX_N:
        raise SizeLimitError(f"tau table capped at {TAU_MAX_N}")
    L = N  # coefficient of q^(m-1) in eta^24 is tau(m)
    e, c = _eta_cubed_support(L)
    residues = []
    for p in _TAU_MODULI:
        D = _square_sparse_mod(e, c, L, p)
        for _ in range(6):
            D = _mul_sparse_mod(D, e, c, p)
        residues.append(D)
    vals = _crt_signed(residues, _TAU_MODULI)
    out = np.empty(N + 1, dtype=object)
    out[0] = 0
    out[1:] = vals
    _guard_tau(out, N)
    return TauTable(N, out)


def _guard_tau(values: np.ndarray, N: int) -> None:
    if values[1] != 1:
        raise ArithmeticOverflowError("tau(1) != 1 after reconstruction")
    m = np.arange(1, N + 1, dtype=float)
    bound = _divisor_counts(N)[1:] * m ** HALF_WEIGHT_SHIFT * (1 + 1e-9)
    mags = np.abs(values[1:].astype(float))
    bad = np.nonzero(mags > bound)[0]
    if bad.size:
        raise ArithmeticOverflowError(f"tau({bad[0] + 1}) exceeds d(n) n^(11/2): wrapped residue")
    if float(bound.max()) >= 2.0 ** 127:
        raise ArithmeticOverflowError("tau values may not fit in 128 bits")


def save_tau_cache(table: TauTable, path: os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(table.to_bytes())
    tmp.replace(path)


def load_tau_cache(path: os.PathLike) -> TauTable:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != TAU_MAGIC:
        raise ValueError(f"{path}: not a tau cache file")
    (N,) = struct.unpack("<Q", raw[8:16])
    if len(raw) != 16 + 16 * N:
        raise ValueError(f"{path}: truncated tau cache")
    rec = np.frombuffer(raw, dtype=[("lo", "<u8"), ("hi", "<i8")], offset=16)
    lo = rec["lo"].astype(object)
    hi = rec["hi"].astype(object)
    out = np.empty(N + 1, dtype=object)
    out[0] = 0
    out[1:] = (hi << 64) + lo
    return TauTable(int(N), out)


def tau_table(N: int, cache: Optional[os.PathLike] = None) -> TauTable:
    """Load from cache when it covers N, otherwise compute (and refresh the cache)."""
    if cache is not None and Path(cache).exists():
        t = load_tau_cache(cache)
        if t.N >= N:
            return t if t.N == N else t.truncate(N)
    t = compute_tau_table(N)
    if cache is not None:
        save_tau_cache(t, cache)
    return t


# -------------------------------------------------------------- Satake data

MODES = ("unitary-circle", "ramanujan-bounded", "exact-exemplar")


def theta_bound(n: int) -> float:
    return 0.5 - 1.0 / (n * n + 1)


@dataclass(frozen=True)
class SatakeSet:
    params: ComplexMultiset
    mode: str = "exact-exemplar"
    p: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.params, ComplexMultiset):
            object.__setattr__(self, "params", ComplexMultiset(tuple(self.params)))
        if self.mode not in MODES:
            raise ValueError(f"unknown Satake mode {self.mode!r}")
        mags = np.abs(self.params.as_array())
        if self.mode == "unitary-circle" and np.any(np.abs(mags - 1.0) > 1e-12):
            raise ContractError("unitary-circle Satake parameters must have modulus 1")
        if self.mode == "ramanujan-bounded":
            if self.p is None:
                raise ContractError("ramanujan-bounded Satake sets need their prime")
            lim = self.p ** theta_bound(self.n) * (1 + 1e-12)
            if np.any(mags > lim):
                raise ContractError(f"Satake parameter exceeds p^theta_n at p={self.p}")

    @property
    def n(self) -> int:
        return self.params.n

    def as_array(self) -> np.ndarray:
        return self.params.as_array()


def random_satake(rng: np.random.Generator, n: int, mode: str = "unitary-circle",
                  p: Optional[int] = None) -> SatakeSet:
    """Uniform angles; in ramanujan-bounded mode log-radii are uniform in [-theta_n, theta_n] log p."""
    ang = rng.uniform(0.0, 2 * math.pi, size=n)
    if mode == "unitary-circle":
        vals = np.exp(1j * ang)
        return SatakeSet(ComplexMultiset(tuple(vals)), mode, p)
    if mode == "ramanujan-bounded":
        if p is None:
            p = int(rng.choice([2, 3, 5, 7, 11, 13]))
        logr = rng.uniform(-1.0, 1.0, size=n) * theta_bound(n) * math.log(p)
        vals = np.exp(logr + 1j * ang)
        return SatakeSet(ComplexMultiset(tuple(vals)), mode, p)
    raise ValueError(f"random Satake sets support unitary-circle or ramanujan-bounded, not {mode!r}")


def random_satake_batch(rng: np.random.Generator, T: int, n: int, mode: str = "unitary-circle"):
    """T random parameter rows as a (T, n) array plus the prime attached to each row."""
    ang = rng.uniform(0.0, 2 * math.pi, size=(T, n))
    primes = rng.choice(np.array([2, 3, 5, 7, 11, 13]), size=T)
    if mode == "unitary-circle":
        return np.exp(1j * ang), primes
    if mode == "ramanujan-bounded":
        logr = rng.uniform(-1.0, 1.0, size=(T, n)) * theta_bound(n) * np.log(primes)[:, None]
        return np.exp(logr + 1j * ang), primes
    raise ValueError(mode)


# ---------------------------------------------------------------- exemplars

@dataclass(frozen=True)
class ExemplarPi:
    name: str
    tau: Optional[TauTable] = None

    def __post_init__(self):
        if self.name not in EXEMPLAR_RANK:
            raise ValueError(f"unknown exemplar {self.name!r}; choose from {sorted(EXEMPLAR_RANK)}")
        if self.name != "zeta" and self.tau is None:
            raise ContractError(f"{self.name} needs a tau table")

    @property
    def n(self) -> int:
        return EXEMPLAR_RANK[self.name]

    @property
    def reach(self) -> int:
        return 10**18 if self.tau is None else self.tau.N


def delta_roots(lam: np.ndarray) -> np.ndarray:
    """Roots of x^2 - lam x + 1, nonnegative imaginary part first; shape (..., 2)."""
    lam = np.asarray(lam, dtype=float)
    disc = np.sqrt(np.asarray(lam * lam - 4.0, dtype=complex))
    a = (lam + disc) / 2
    b = (lam - disc) / 2
    swap = a.imag < b.imag
    first = np.where(swap, b, a)
    second = np.where(swap, a, b)
    return np.stack([first, second], axis=-1)


def satake_matrix(pi: ExemplarPi, primes) -> np.ndarray:
    """Satake parameters at each prime as rows of a (len(primes), n) complex array."""
    primes = np.asarray(primes, dtype=np.int64)
    if pi.name == "zeta":
        return np.ones((primes.size, 1), dtype=complex)
    if primes.size and primes.max() > pi.tau.N:
        raise TableRangeError(f"prime {int(primes.max())} beyond tau table {pi.tau.N}")
    tau_p = pi.tau.values[primes].astype(float)
    lam = tau_p / primes.astype(float) ** HALF_WEIGHT_SHIFT
    ab = delta_roots(lam)
    a, b = ab[:, 0], ab[:, 1]
    if pi.name == "delta":
        return ab
    if pi.name == "sym2-delta":
        return np.stack([a * a, np.ones_like(a), b * b], axis=1)
    return np.stack([a ** 3, a, b, b ** 3], axis=1)


def satake_at(pi: ExemplarPi, p: int) -> SatakeSet:
    row = satake_matrix(pi, [p])[0]
    return SatakeSet(ComplexMultiset(tuple(row)), "exact-exemplar", int(p))


# ------------------------------------------------------- local coefficients

def _arr(s) -> np.ndarray:
    if isinstance(s, SatakeSet):
        return s.as_array()
    if isinstance(s, ComplexMultiset):
        return s.as_array()
    return np.asarray(s, dtype=complex).ravel()


def lambda_pk(s, k: int) -> complex:
    return symcore.complete_homogeneous(k, _arr(s))


def a_pk(s, k: int) -> complex:
    return symcore.power_sum(k, _arr(s))


def mu_pk(s, k: int) -> complex:
    A = _arr(s)
    if k > A.size:
        return 0j
    return (-1) ** k * symcore.elementary(k, A)


def rs_lambda_pk(s, k: int) -> float:
    """Sum of |s_lambda|^2 over partitions of k with at most n parts."""
    A = _arr(s).reshape(1, -1)
    return float(rs_lambda_table(A, k)[0, k])


def rs_a_pk(s, k: int) -> float:
    return float(abs(a_pk(s, k)) ** 2)


# batched forms, shape (T, K+1)

def lambda_table_local(A, K: int) -> np.ndarray:
    return symcore.complete_homogeneous_table(A, K)


def a_table_local(A, K: int) -> np.ndarray:
    return symcore.power_sum_table(A, K)


def mu_table_local(A, K: int) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    n = A.shape[1]
    e = symcore.elementary_table(A, min(K, n))
    out = np.zeros((A.shape[0], K + 1), dtype=complex)
    signs = (-1.0) ** np.arange(e.shape[1])
    out[:, : e.shape[1]] = e * signs
    return out


def rs_lambda_table(A, K: int) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    n = A.shape[1]
    H = symcore.complete_homogeneous_table(A, K + n)
    out = np.zeros((A.shape[0], K + 1))
    for k in range(K + 1):
        for lam in symcore.enum_partitions(k, n):
            out[:, k] += np.abs(symcore.schur_from_h(lam.parts, H, n)) ** 2
    return out


def local_euler_residual(s, K: int = 12) -> float:
    """max |coefficient| of (sum lambda x^k)(sum mu x^k) - 1 up to x^K."""
    A = _arr(s).reshape(1, -1)
    lam = lambda_table_local(A, K)[0]
    mu = np.array([mu_pk(A[0], k) for k in range(K + 1)])
    prod = np.convolve(lam, mu)[: K + 1]
    prod[0] -= 1.0
    return float(np.max(np.abs(prod)))
