"""Symmetric functions evaluated at finite multisets of complex numbers.

Everything works on a batch axis: a (T, n) array holds T multisets of size n,
and the scalar helpers are thin wrappers over the batched kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import SizeLimitError

MAX_PARTITION_WEIGHT = 64


@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...] = ()

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        for i, x in enumerate(parts):
            if x < 1:
                raise ValueError(f"partition parts must be positive: {self.parts}")
            if i and parts[i - 1] < x:
                raise ValueError(f"partition parts must be nonincreasing: {self.parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self):
        return f"Partition{self.parts}"


def _canonical(values: Iterable[complex]) -> tuple[complex, ...]:
    vals = [complex(v) for v in values]
    return tuple(sorted(vals, key=lambda z: (z.real, z.imag)))


@dataclass(frozen=True)
class ComplexMultiset:
    """A multiset of local parameters, stored in canonical (real, imag) order."""

    values: tuple[complex, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "values", _canonical(self.values))

    @property
    def n(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=complex)

    def conjugate(self) -> "ComplexMultiset":
        return ComplexMultiset(tuple(v.conjugate() for v in self.values))


MultisetLike = Union[ComplexMultiset, Sequence[complex], np.ndarray]


def _row(a: MultisetLike) -> np.ndarray:
    if isinstance(a, ComplexMultiset):
        arr = a.as_array()
    else:
        arr = np.array(_canonical(np.asarray(a, dtype=complex).ravel()), dtype=complex)
    return arr.reshape(1, -1)


def _batch(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    return A


# ---------------------------------------------------------------- partitions

def enum_partitions(k: int, max_length: int) -> list[Partition]:
    """All partitions of k with at most max_length parts, lexicographically decreasing."""
    if k < 0 or max_length < 0:
        raise ValueError("k and max_length must be nonnegative")
    if k > MAX_PARTITION_WEIGHT:
        raise SizeLimitError(f"partition weight {k} exceeds guard {MAX_PARTITION_WEIGHT}")
    return [Partition(p) for p in _partitions(k, max_length, k)]


@lru_cache(maxsize=None)
def _partitions(k: int, slots: int, largest: int) -> tuple[tuple[int, ...], ...]:
    if k == 0:
        return ((),)
    if slots == 0:
        return ()
    out = []
    for first in range(min(k, largest), 0, -1):
        for rest in _partitions(k - first, slots - 1, first):
            out.append((first,) + rest)
    return tuple(out)


# ---------------------------------------------------------- batched kernels

def elementary_table(A, L: int) -> np.ndarray:
    """e_0..e_L for each row of A, shape (T, L+1)."""
    A = _batch(A)
    T, n = A.shape
    e = np.zeros((T, L + 1), dtype=complex)
    e[:, 0] = 1.0
    for j in range(n):
        a = A[:, j]
        for l in range(min(j + 1, L), 0, -1):
            e[:, l] += a * e[:, l - 1]
    return e


def complete_homogeneous_table(A, K: int) -> np.ndarray:
    """h_0..h_K for each row of A, shape (T, K+1)."""
    A = _batch(A)
    T, n = A.shape
    h = np.zeros((T, K + 1), dtype=complex)
    h[:, 0] = 1.0
    for j in range(n):
        a = A[:, j]
        for k in range(1, K + 1):
            h[:, k] += a * h[:, k - 1]
    return h


def power_sum_table(A, K: int) -> np.ndarray:
    """p_0..p_K for each row of A (p_0 = n), shape (T, K+1)."""
    A = _batch(A)
    T, n = A.shape
    p = np.zeros((T, K + 1), dtype=complex)
    p[:, 0] = n
    pw = np.ones_like(A)
    for k in range(1, K + 1):
        pw = pw * A
        p[:, k] = pw.sum(axis=1)
    return p


def schur_from_h(parts: Sequence[int], H: np.ndarray, n: int) -> np.ndarray:
    """Jacobi-Trudi determinant det[h_{parts_i - i + j}] from a table of h values.

    H has shape (T, K+1) and must reach index parts[0] + len(parts) - 1.
    Negative indices are zero, so repeated parameters need no special care.
    """
    parts = tuple(parts)
    T = H.shape[0]
    m = len(parts)
    if m == 0:
        return np.ones(T, dtype=complex)
    if m > n:
        return np.zeros(T, dtype=complex)
    if m == 1:
        return H[:, parts[0]].copy()
    M = np.zeros((T, m, m), dtype=complex)
    K = H.shape[1] - 1
    for i in range(m):
        for j in range(m):
            idx = parts[i] - i + j
            if 0 <= idx <= K:
                M[:, i, j] = H[:, idx]
    return np.linalg.det(M)


def schur_table(A, k: int) -> tuple[list[Partition], np.ndarray]:
    """s_lambda for every lambda of weight k with length <= n, shape (T, #partitions)."""
    A = _batch(A)
    n = A.shape[1]
    parts = enum_partitions(k, n)
    H = complete_homogeneous_table(A, k + n)
    S = np.stack([schur_from_h(p.parts, H, n) for p in parts], axis=1)
    return parts, S


# ----------------------------------------------------------- scalar surface

def elementary(l: int, a: MultisetLike) -> complex:
    A = _row(a)
    if l > A.shape[1]:
        return 0j
    return complex(elementary_table(A, l)[0, l])


def power_sum(k: int, a: MultisetLike) -> complex:
    A = _row(a)
    return complex((A[0] ** k).sum())


def complete_homogeneous(k: int, a: MultisetLike) -> complex:
    return complex(complete_homogeneous_table(_row(a), k)[0, k])


def schur(lam: Union[Partition, Sequence[int]], a: MultisetLike) -> complex:
    parts = lam.parts if isinstance(lam, Partition) else Partition(tuple(lam)).parts
    A = _row(a)
    n = A.shape[1]
    if len(parts) > n:
        return 0j
    K = (parts[0] + len(parts)) if parts else 0
    H = complete_homogeneous_table(A, K)
    return complex(schur_from_h(parts, H, n)[0])


def dual_pieri_check(l: int, m: int, a: MultisetLike, tol: float) -> bool:
    """e_l h_m against s_(m+1, 1^(l-1)) + s_(m, 1^l)."""
    if l < 1 or m < 1:
        raise ValueError("dual Pieri check needs l >= 1 and m >= 1")
    lhs = elementary(l, a) * complete_homogeneous(m, a)
    rhs = schur((m + 1,) + (1,) * (l - 1), a) + schur((m,) + (1,) * l, a)
    return abs(lhs - rhs) <= tol
