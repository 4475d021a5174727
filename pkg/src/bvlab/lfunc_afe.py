"""L(s, Delta x chi) through the approximate functional equation.

Normalization: coefficients lambda(n) chi(n) with lambda(n) = tau(n) / n^(11/2),
completed function Lambda(s) = q_chi^s gamma(s) L(s) with
gamma(s) = Gamma_C(s + 11/2) = 2 (2 pi)^(-s - 11/2) Gamma(s + 11/2),
so the arithmetic conductor is q_chi^2.  With a(n) = lambda(n) chi(n),

    L(s) = sum a(n) n^-s V_s(n X / q_chi)
           + eps * q_chi^(1 - 2s) gamma(1-s)/gamma(s) * sum conj a(n) n^(s-1) V_(1-s)(n / (X q_chi)),

    V_s(y) = (1 / 2 pi i) int_(c) y^-u G_s(u) gamma(s+u)/gamma(s) du/u,
    G_s(u) = exp((u/w)^2 + i theta(s) u),   theta(s) = -(pi/2) tanh(Im s / w).

The phase cancels the e^(pi |Im u| / 2) growth of the gamma ratio toward the real
axis, which otherwise costs about pi |Im s| / 2 digits to cancellation.  theta is
odd in Im s, so G_(1-s)(u) = G_s(-u) as the dual sum requires.

V is computed by the trapezoid rule on a vertical line placed at the saddle of
the integrand (residue 1 added when the line sits left of 0), then tabulated on
a log grid and splined for bulk evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import loggamma

from . import characters as ch
from . import dirichlet as dr
from . import localcoeffs as lc
from .errors import ContractError, InconsistencyError, NumericError, SizeLimitError, TableRangeError
from .reports import ExperimentReport

WEIGHT = 12
MU = (WEIGHT - 1) / 2
KERNEL_WIDTH = 8.0
V_TAIL = 1e-12
Y_LO = 1e-3
QUAD_STEP = 0.05
REFINE_TOL = 1e-10
REFINE_HALVINGS = 4
QUAD_BLOCK = 2_000_000
LOG_GRID_STEP = 0.004
HERMITE_STEP = 1e-3
SECOND_MOMENT_MAX_Q = 200
SIEGEL_MAX_D = 10**4
ROOT_TEST_POINTS = (0.6, 0.7)
ROOT_X = ((2.0, 0.5), (8.0, 0.125), (4.0, 0.25), (3.0, 1.0 / 3.0))
ROOT_SEPARATION = 1e-2


# ------------------------------------------------------------------ gamma

def log_gamma_factor(s) -> complex:
    """log of 2 (2 pi)^(-s - mu) Gamma(s + mu)."""
    s = np.asarray(s, dtype=complex)
    return math.log(2.0) - (s + MU) * math.log(2 * math.pi) + loggamma(s + MU)


# -------------------------------------------------------------- cutoff V

def kernel_phase(s: complex, width: float = KERNEL_WIDTH) -> float:
    # full correction only once |Im s| passes the kernel width; a full phase at small
    # |Im s| would strip the gamma ratio's decay on the far side of the contour
    return -0.5 * math.pi * math.tanh(complex(s).imag / width)


def _saddle(s: complex, y: np.ndarray, width: float) -> np.ndarray:
    """Contour abscissa per y: the minimizer of the integrand's size on the real axis."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty(y.shape)
    base = loggamma(s + MU).real
    right = np.linspace(0.25, 80.0, 1600)
    left = np.linspace(-(s.real + MU) + 0.25, -0.25, 400)
    for cs, sel in ((right, y >= 1), (left, y < 1)):
        if not sel.any():
            continue
        g = cs**2 / width**2 + (loggamma(s + MU + cs).real - base) - cs * math.log(2 * math.pi) \
            - np.log(np.abs(cs))
        f = -np.outer(np.log(y[sel]), cs) + g
        out[sel] = cs[np.argmin(f, axis=1)]
    # quarter-step abscissas let many y share one kernel evaluation
    q = np.round(out * 4) / 4
    return np.where(q == 0, np.sign(out) * 0.25, q)


def smoothing_V_array(s: complex, ys, width: float = KERNEL_WIDTH, h: float = QUAD_STEP,
                      check: bool = True) -> np.ndarray:
    """V_s(y) for each y > 0 by trapezoid quadrature; the step halves until h and h/2 agree."""
    s = complex(s)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if np.any(ys <= 0):
        raise ContractError("V_s(y) needs y > 0")
    cs = _saddle(s, ys, width)
    T = 10 * width + abs(s.imag) + 10
    lg0 = loggamma(s + MU)
    theta = kernel_phase(s, width)
    out = np.empty(ys.shape, dtype=complex)
    for c in np.unique(cs):
        sel = cs == c
        logy = np.log(ys[sel])
        hh = h
        for _ in range(REFINE_HALVINGS + 1):
            half = hh / 2
            t = np.arange(-T, T + half / 2, half)
            u = c + 1j * t
            K = np.exp((u / width) ** 2 + 1j * theta * u + loggamma(s + MU + u) - lg0
                       - u * math.log(2 * math.pi)) / u
            fine = np.empty(logy.shape, dtype=complex)
            coarse = np.empty(logy.shape, dtype=complex)
            step = max(1, QUAD_BLOCK // u.size)
            for i in range(0, logy.size, step):  # bounded memory for the y-by-node matrix
                P = np.exp(-np.outer(logy[i : i + step], u))
                fine[i : i + step] = half / (2 * math.pi) * (P @ K)
                coarse[i : i + step] = hh / (2 * math.pi) * (P[:, ::2] @ K[::2])
            gap = np.max(np.abs(fine - coarse))
            if not check or gap <= REFINE_TOL:
                break
            hh = half
        else:
            raise NumericError(f"V quadrature did not settle at s={s}: refinements differ by {gap:.3g}")
        out[sel] = fine + (1.0 if c < 0 else 0.0)
    return out


class VTable:
    """V_s from Y_LO out to where |V| stays below V_TAIL.

    Quadrature values on a log grid are fitted by a quintic spline, which is then
    resampled (values and log-derivatives) on a uniform grid of step HERMITE_STEP
    so bulk evaluation is a cubic Hermite lookup.
    """

    def __init__(self, s: complex, width: float = KERNEL_WIDTH, step: float = LOG_GRID_STEP):
        self.s = complex(s)
        self.width = width
        hi = 4.0
        while True:
            probe = np.abs(smoothing_V_array(self.s, np.geomspace(hi / 2, hi, 40), width))
            if probe.max() < V_TAIL:
                break
            hi *= 2
            if hi > 1e4:
                raise NumericError("V_s does not decay below the tail threshold")
        logs = np.arange(math.log(Y_LO), math.log(hi) + step, step)
        vals = smoothing_V_array(self.s, np.exp(logs), width)
        above = np.nonzero(np.abs(vals) >= V_TAIL)[0]
        self.y_cut = float(np.exp(logs[above[-1] + 1])) if above.size else Y_LO
        self.real = self.s.imag == 0
        spl = make_interp_spline(logs, vals.real if self.real else vals, k=5)
        self.l0 = logs[0]
        self.h = HERMITE_STEP
        grid = np.arange(self.l0, math.log(self.y_cut) + 2 * self.h, self.h)
        self.l_end = grid[-1]
        self._f = spl(grid)
        self._d = spl.derivative()(grid) * self.h
        mids = logs[:-1][::97] + step / 2
        direct = smoothing_V_array(self.s, np.exp(mids), width)
        self.spline_error = float(np.max(np.abs(self.at_log(mids) - direct)))

    def _hermite(self, ly: np.ndarray) -> np.ndarray:
        u = (ly - self.l0) / self.h
        i = u.astype(np.int64)
        t = u - i
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * self._f[i] + (t3 - 2 * t2 + t) * self._d[i]
                + (3 * t2 - 2 * t3) * self._f[i + 1] + (t3 - t2) * self._d[i + 1])

    def at_log(self, ly: np.ndarray) -> np.ndarray:
        """V at y = exp(ly)."""
        ly = np.asarray(ly, dtype=float)
        out = np.zeros(ly.shape, dtype=self._f.dtype)
        out[ly < self.l0] = 1.0
        mid = (ly >= self.l0) & (ly < self.l_end - self.h)
        out[mid] = self._hermite(ly[mid])
        return out

    def at_sorted_log(self, ly: np.ndarray) -> np.ndarray:
        """at_log for increasing input, skipping the constant head and zero tail."""
        a = int(np.searchsorted(ly, self.l0))
        b = int(np.searchsorted(ly, self.l_end - self.h))
        out = np.zeros(ly.shape, dtype=self._f.dtype)
        out[:a] = 1.0
        if b > a:
            out[a:b] = self._hermite(ly[a:b])
        return out

    def __call__(self, y) -> np.ndarray:
        return self.at_log(np.log(np.asarray(y, dtype=float)))


_VCACHE: dict = {}


def v_table(s: complex, width: float = KERNEL_WIDTH) -> VTable:
    key = (complex(s), float(width))
    if key not in _VCACHE:
        _VCACHE[key] = VTable(s, width)
    return _VCACHE[key]


class _PowerCache:
    """log n and n^-s on 1..N, shared across twists."""

    def __init__(self):
        self.logn = np.zeros(0)
        self.pows: dict = {}

    def log(self, N: int) -> np.ndarray:
        if self.logn.shape[0] < N:
            self.logn = np.log(np.arange(1, max(N, 2 * self.logn.shape[0]) + 1, dtype=float))
        return self.logn[:N]

    def power(self, s: complex, N: int) -> np.ndarray:
        """n^-s for n = 1..N (real when s is real)."""
        arr = self.pows.get(s)
        if arr is None or arr.shape[0] < N:
            L = self.log(N)
            arr = np.exp(-s.real * L) if s.imag == 0 else np.exp(-s * L)
            if len(self.pows) > 24:
                self.pows.clear()
            self.pows[s] = arr
        return arr[:N]


_POW = _PowerCache()


# ------------------------------------------------------------------ context

@dataclass
class LValueRecord:
    s: complex
    value: complex
    truncation: int
    est_error: float

    def as_dict(self) -> dict:
        return {"s": [self.s.real, self.s.imag], "value": [self.value.real, self.value.imag],
                "truncation": self.truncation, "est_error": self.est_error}


@dataclass
class AFEContext:
    """Delta twisted by a primitive character (None for the untwisted form)."""

    lam: np.ndarray  # lambda(n) = tau(n)/n^(11/2), index 0..N
    chi: Optional[ch.DirichletCharacter] = None
    label: str = "1"
    width: float = KERNEL_WIDTH
    weight: int = WEIGHT
    mu: float = MU
    _eps: Optional[complex] = field(default=None, repr=False)

    def __post_init__(self):
        if self.chi is not None and not self.chi.is_primitive:
            raise ContractError("twists must be by primitive characters")

    @property
    def q_chi(self) -> int:
        return 1 if self.chi is None else self.chi.modulus

    @property
    def conductor(self) -> int:
        return self.q_chi**2

    @property
    def N(self) -> int:
        return self.lam.shape[0] - 1

    @cached_property
    def _chi_values(self) -> Optional[np.ndarray]:
        if self.chi is None:
            return None
        v = self.chi.values
        return v.real.copy() if np.all(v.imag == 0) else v

    def coeffs(self, n: int, dual: bool = False) -> np.ndarray:
        """a(1..n), or its conjugate; real whenever chi is real."""
        if n > self.N:
            raise TableRangeError(f"AFE needs {n} coefficients, table has {self.N}")
        a = self.lam[1 : n + 1]
        cv = self._chi_values
        if cv is None:
            return a
        q = self.q_chi
        reps = -(-(n + 1) // q)
        c = np.tile(cv, reps)[1 : n + 1]
        return a * (np.conj(c) if dual else c)

    def abs_mass(self, sigma: float, n: int) -> float:
        """sum_{m <= n} |lambda(m)| m^-sigma, an upper bound for the twisted sum."""
        return _abs_mass(self.lam, sigma, n)

    def dual(self) -> "AFEContext":
        if self.chi is None or self.chi.is_quadratic:
            return self
        return AFEContext(self.lam, self.chi.conj(), self.label + "*", self.width)

    @property
    def epsilon_closed_form(self) -> complex:
        """i^k tau(chi)^2 / q_chi for twists of a level-one form; chi(-1) i^k when chi is quadratic."""
        if self.chi is None:
            return complex(1j**self.weight)
        g = ch.gauss_sum(self.chi)
        return complex(1j**self.weight * g * g / self.q_chi)

    @property
    def epsilon(self) -> complex:
        if self._eps is None:
            self._eps = root_number(self)
        return self._eps


def make_context(tau: lc.TauTable, d: Optional[int] = None, chi: Optional[ch.DirichletCharacter] = None,
                 N: Optional[int] = None, width: float = KERNEL_WIDTH) -> AFEContext:
    if d is not None and chi is not None:
        raise ContractError("give a discriminant or a character, not both")
    if d is not None and d != 1:
        chi = ch.kronecker_character(d)
    lam = _normalized_lambda(tau, N)
    label = str(d) if d is not None else (f"{chi.modulus}:{chi.index}" if chi is not None else "1")
    return AFEContext(lam, chi, label, width)


_LAM_CACHE: dict = {}
_MASS_CACHE: dict = {}


def _abs_mass(lam: np.ndarray, sigma: float, n: int) -> float:
    key = (id(lam), float(sigma))
    cum = _MASS_CACHE.get(key)
    if cum is None:
        cum = np.cumsum(np.abs(lam) * np.r_[0.0, np.exp(-sigma * _POW.log(lam.shape[0] - 1))])
        _MASS_CACHE[key] = cum
    return float(cum[min(n, cum.shape[0] - 1)])


def _normalized_lambda(tau: lc.TauTable, N: Optional[int]) -> np.ndarray:
    N = tau.N if N is None else min(N, tau.N)
    key = (id(tau), N)
    if key not in _LAM_CACHE:
        v = np.zeros(N + 1)
        v[1:] = tau.normalized()[1 : N + 1]
        _LAM_CACHE.clear()
        _LAM_CACHE[key] = v
    return _LAM_CACHE[key]


# --------------------------------------------------------------- evaluation

def afe_parts(s: complex, ctx: AFEContext, X: float = 1.0) -> tuple[complex, complex, int, float]:
    """(first sum, dual sum times q^(1-2s) gamma(1-s)/gamma(s), length, error estimate)."""
    s = complex(s)
    V1, V2 = v_table(s, ctx.width), v_table(1 - s, ctx.width)
    q = ctx.q_chi
    n1 = int(math.floor(V1.y_cut * q / X)) + 1
    n2 = int(math.floor(V2.y_cut * q * X)) + 1
    logn = _POW.log(max(n1, n2))
    a = ctx.coeffs(n1)
    w1 = _POW.power(s, n1) * V1.at_sorted_log(logn[:n1] + math.log(X / q))
    first = complex(np.dot(a, w1))
    b = ctx.coeffs(n2, dual=True)
    w2 = _POW.power(1 - s, n2) * V2.at_sorted_log(logn[:n2] - math.log(X * q))
    fac = np.exp((1 - 2 * s) * math.log(q) + log_gamma_factor(1 - s) - log_gamma_factor(s))
    second = complex(fac * np.dot(b, w2))
    mass = ctx.abs_mass(s.real, n1) + abs(fac) * ctx.abs_mass(1 - s.real, n2)
    err = mass * (V1.spline_error + V2.spline_error + V_TAIL + 1e-15)
    return first, second, max(n1, n2), err


def root_number(ctx: AFEContext, tol: float = 1e-8, s0: float = ROOT_TEST_POINTS[0],
                check_closed_form: bool = True) -> complex:
    """Solve L = A(X) + eps B(X) for eps from two values of X.

    A wider X pair is tried when the dual sums at the first pair nearly coincide.
    """
    best = None
    for X1, X2 in ROOT_X:
        A1, B1 = afe_parts(s0, ctx, X=X1)[:2]
        A2, B2 = afe_parts(s0, ctx, X=X2)[:2]
        if best is None or abs(B2 - B1) > abs(best[3] - best[1]):
            best = (A1, B1, A2, B2)
        if abs(B2 - B1) > ROOT_SEPARATION:
            break
    A1, B1, A2, B2 = best
    if B2 == B1:
        raise InconsistencyError("root-number solve is degenerate")
    eps = (A1 - A2) / (B2 - B1)
    if abs(abs(eps) - 1) > tol:
        raise InconsistencyError(f"|eps| = {abs(eps):.12f} for twist {ctx.label}")
    if check_closed_form:
        closed = ctx.epsilon_closed_form
        if abs(eps - closed) > 1e-6:
            raise InconsistencyError(f"root number {eps} disagrees with closed form {closed} ({ctx.label})")
    return complex(eps)


def afe_eval(s: complex, ctx: AFEContext, X: float = 1.0) -> LValueRecord:
    first, second, n, err = afe_parts(s, ctx, X)
    return LValueRecord(complex(s), first + ctx.epsilon * second, n, err)


def completed(s: complex, ctx: AFEContext, X: float = 1.0) -> complex:
    s = complex(s)
    L = afe_eval(s, ctx, X).value
    return complex(np.exp(s * math.log(ctx.q_chi) + log_gamma_factor(s)) * L)


def fe_residual(s: complex, ctx: AFEContext) -> float:
    """|Lambda(s) - eps Lambda(1 - s, dual)| / |Lambda(s)|, the two sides at different X."""
    lhs = completed(s, ctx, X=1.0)
    rhs = ctx.epsilon * completed(1 - complex(s), ctx.dual(), X=1.7)
    return abs(lhs - rhs) / abs(lhs)


def direct_sum(s: complex, ctx: AFEContext, N: Optional[int] = None) -> complex:
    N = ctx.N if N is None else N
    n = np.arange(1, N + 1, dtype=float)
    return complex(np.sum(ctx.coeffs(N) * np.exp(-complex(s) * np.log(n))))


def smoothed_direct_L1(lam: np.ndarray, length: int = 10**5,
                       scales: Sequence[float] = (1500.0, 1750.0, 2000.0, 2250.0, 2500.0, 2750.0)) -> float:
    """sum lambda(n)/n e^(-n/N) at several N, extrapolated to N = infinity.

    The smoothed sum equals L(1) + sum_k L(1-k) (-1)^k / (k! N^k), so a polynomial fit in 1/N
    through the scales recovers L(1).
    """
    n = np.arange(1, length + 1, dtype=float)
    a = lam[1 : length + 1] / n
    vals = np.array([np.sum(a * np.exp(-n / N)) for N in scales])
    inv = 1.0 / np.asarray(scales)
    coef = np.polyfit(inv, vals, len(scales) - 1)
    return float(coef[-1])


# ------------------------------------------------------------- experiments

def _bound(Q: int, t: float, n: int = 2) -> float:
    Qg = max(Q, 3)
    return (Q * Q + Q ** (n / 2) * (3 + abs(t)) ** (n / 2)) * math.log(Qg * (3 + abs(t))) ** 2


def twist_family(Qmax: int, family: str) -> list[ch.DirichletCharacter]:
    """Primitive characters of conductor <= Qmax, trivial first; quadratic-only or all."""
    out: list = [None]
    if family == "quadratic":
        for d in ch.fundamental_discriminants(Qmax):
            out.append(ch.kronecker_character(d))
    elif family == "all":
        for q in range(3, Qmax + 1):
            out.extend(ch.enumerate_characters(q, primitive_only=True))
    else:
        raise ValueError("family must be 'quadratic' or 'all'")
    return out


def second_moment_experiment(t: float, Qs: Sequence[int], tau: lc.TauTable,
                             family: str = "all") -> ExperimentReport:
    """sum over primitive chi with conductor <= Q of |L(1/2 + it, Delta x chi)|^2, against the bound shape."""
    Qs = sorted(int(Q) for Q in Qs)
    if Qs[-1] > SECOND_MOMENT_MAX_Q:
        raise SizeLimitError(f"second moment capped at Q = {SECOND_MOMENT_MAX_Q}")
    s = complex(0.5, t)
    per_q: dict[int, float] = {}
    for chi in twist_family(Qs[-1], family):
        ctx = AFEContext(_normalized_lambda(tau, None), chi)
        v = afe_eval(s, ctx).value
        per_q[ctx.q_chi] = per_q.get(ctx.q_chi, 0.0) + abs(v) ** 2
    rep = ExperimentReport("second_moment", ["Q", "t", "moment", "bound", "ratio"],
                           meta={"family": family, "rank": 2, "s": [0.5, t],
                                 "bound": "(Q^2 + Q^(n/2)(3+|t|)^(n/2)) log^2(Q(3+|t|)), log guarded at Q >= 3"})
    for Q in Qs:
        m = math.fsum(v for q, v in per_q.items() if q <= Q)
        b = _bound(Q, t)
        rep.add(Q=Q, t=float(t), moment=m, bound=b, ratio=m / b)
    r = rep.column("ratio")
    rep.meta["spread"] = max(r) / min(r) if min(r) > 0 else float("inf")
    return rep


def envelope_slope(ds: Sequence[int], values: Sequence[float], points: int = 30) -> tuple[float, list]:
    """Least-squares slope of log(min_{|d| <= D} |L|) against log D on a geometric grid of D."""
    ad = np.abs(np.asarray(ds, dtype=float))
    v = np.asarray(values, dtype=float)
    order = np.argsort(ad, kind="stable")
    ad, v = ad[order], v[order]
    run = np.minimum.accumulate(v)
    grid = np.unique(np.geomspace(max(ad[0], 3.0), ad[-1], points).astype(int))
    idx = np.searchsorted(ad, grid, side="right") - 1
    env = run[idx]
    slope = float(np.polyfit(np.log(grid), np.log(env), 1)[0])
    return slope, [(int(g), float(e)) for g, e in zip(grid, env)]


def siegel_scan(d_range: Sequence[int], tau: lc.TauTable) -> ExperimentReport:
    """|L(1, Delta x chi_d)| for fundamental discriminants d, with the min-envelope slope."""
    ds = list(d_range)
    if any(abs(d) > SIEGEL_MAX_D for d in ds):
        raise SizeLimitError(f"Siegel scan capped at |d| <= {SIEGEL_MAX_D}")
    lam = _normalized_lambda(tau, None)
    rep = ExperimentReport("siegel_scan", ["d", "conductor", "L1_re", "L1_im", "abs_L1"],
                           meta={"s": 1.0, "conductor": "conductor of chi_d, |d|; the twist has q_chi^2"})
    sieve = dr.build_sieve(max(max(abs(d) for d in ds), 2))
    for d in ds:
        chi = None
        if d != 1:
            if not ch.is_fundamental_discriminant(d):
                raise ContractError(f"{d} is not a fundamental discriminant")
            vals = ch.kronecker_table(d, abs(d), sieve)[: abs(d)].astype(complex)
            chi = ch.DirichletCharacter(abs(d), (), abs(d), vals)
        ctx = AFEContext(lam, chi, label=str(d))
        v = afe_eval(1.0, ctx).value
        rep.add(d=d, conductor=abs(d), L1_re=v.real, L1_im=v.imag, abs_L1=abs(v))
    absL = rep.column("abs_L1")
    rep.meta["min_abs_L1"] = min(absL)
    rep.meta["argmin_d"] = ds[int(np.argmin(absL))]
    twisted = [(d, a) for d, a in zip(ds, absL) if abs(d) >= 3]
    if len(twisted) >= 2:
        slope, env = envelope_slope([d for d, _ in twisted], [a for _, a in twisted])
        rep.meta["envelope_slope"] = slope
        rep.meta["envelope"] = env
        if slope <= -0.5:
            rep.flag(f"min-envelope slope {slope:.4f} <= -0.5")
    if min(absL) <= 0:
        rep.flag("a computed |L(1)| vanished")
    return rep
