"""Closed-loop time responses.

Two solvers are provided: an exact zero-order-hold simulation of an
integer-order (Oustaloup-approximated) realization, and a Grünwald-Letnikov
solver working directly on a commensurate pseudo state space in
``w = s**alpha``.  All simulations start from rest and use a unit step.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve, matrix_balance
from scipy.signal import fftconvolve

from .approx import BandSpec, RationalTf, approximate_tf
from .errors import DomainError, UnsupportedFactorError
from .focore import as_factored, pseudo_rational

P = np.polynomial.polynomial

INPUTS = ("reference", "disturbance")
STIFF_RATIO = 0.5
SETTLING_BAND = 0.02
CONVERGENCE_TOL = 2e-3


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n,) or self.C.shape != (n,):
            raise DomainError("inconsistent state-space dimensions")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def evaluate(self, s):
        """Transfer function ``C (sI - A)^-1 B + D`` at the points ``s``."""
        s = np.atleast_1d(np.asarray(s, complex))
        eye = np.eye(self.n)
        out = np.empty(s.shape, complex)
        for i, si in enumerate(s):
            out[i] = self.C @ np.linalg.solve(si * eye - self.A, self.B) + self.D if self.n else self.D
        return out


def _companion(num, den):
    """Controllable canonical form of ``num/den`` (ascending coefficients, deg num <= deg den)."""
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    n = len(den) - 1
    if len(num) - 1 > n:
        raise DomainError("improper transfer function (numerator degree %d > denominator degree %d); "
                          "split off a derivative factor first" % (len(num) - 1, n))
    lead = den[-1]
    den = den / lead
    num = np.concatenate([num, np.zeros(n + 1 - len(num))]) / lead
    d = num[n] if n >= 0 else 0.0
    A = np.zeros((n, n))
    if n:
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -den[:n]
    B = np.zeros(n)
    if n:
        B[-1] = 1.0
    C = num[:n] - d * den[:n]
    return StateSpace(A, B, C, float(d))


def to_state_space(tf: RationalTf) -> StateSpace:
    """Controllable canonical realization of a proper rational transfer function."""
    return _companion(tf.num, tf.den)


def balance(ss: StateSpace) -> StateSpace:
    """Diagonal similarity transform that equalizes row and column norms of A."""
    if ss.n == 0:
        return ss
    _, (scale, perm) = matrix_balance(ss.A, permute=False, separate=True)
    Ab = ss.A * scale[None, :] / scale[:, None]
    return StateSpace(Ab, ss.B / scale, ss.C * scale, ss.D)


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)
    warnings: tuple = ()

    def __post_init__(self):
        if self.t.shape != self.y.shape or self.t.ndim != 1:
            raise DomainError("t and y must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.y)):
            raise DomainError("non-finite samples in time series")

    @property
    def dt(self) -> float:
        return float(self.meta.get("dt", self.t[1] - self.t[0] if len(self.t) > 1 else 0.0))

    def window(self, t_end: float) -> "TimeSeries":
        keep = self.t <= t_end + 1e-9 * max(1.0, t_end)
        return TimeSeries(self.t[keep], self.y[keep], dict(self.meta), self.warnings)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,y\n")
        for ti, yi in zip(self.t, self.y):
            buf.write("%.9g,%.9g\n" % (ti, yi))
        return buf.getvalue()


def _time_grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    steps = int(round(t_end / dt))
    return np.arange(steps + 1) * dt


def simulate_lti(ss: StateSpace, t_end: float, dt: float, meta: dict | None = None) -> TimeSeries:
    """Unit-step response by exact zero-order-hold discretization."""
    t = _time_grid(t_end, dt)
    warnings = []
    ss = balance(ss)
    n = ss.n
    if n == 0:
        return TimeSeries(t, np.full(t.shape, ss.D), {"solver": "zoh", "dt": dt, **(meta or {})})
    eig = np.linalg.eigvals(ss.A)
    if dt * np.max(np.abs(eig.real)) > STIFF_RATIO:
        warnings.append("dt_large_vs_fastest_mode")
    if np.any(eig.real > 0):
        warnings.append("unstable_realization")
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = ss.A * dt
    M[:n, n] = ss.B * dt
    E = expm(M)
    Ad, Bd = E[:n, :n], E[:n, n]
    x = np.zeros(n)
    y = np.empty(t.shape)
    for i in range(len(t)):
        y[i] = ss.C @ x + ss.D
        x = Ad @ x + Bd
    return TimeSeries(t, y, {"solver": "zoh", "dt": dt, **(meta or {})}, tuple(warnings))


def gl_weights(alpha: float, count: int) -> np.ndarray:
    """Grünwald-Letnikov binomial weights ``(-1)**j * binom(alpha, j)``."""
    c = np.empty(count)
    c[0] = 1.0
    for j in range(1, count):
        c[j] = c[j - 1] * (1.0 - (1.0 + alpha) / j)
    return c


def simulate_gl(num, den, alpha, t_end: float, dt: float, block: int = 1024,
                meta: dict | None = None) -> TimeSeries:
    """Unit-step response of ``num(w)/den(w)``, ``w = s**alpha``, by implicit GL.

    Uses the pseudo state space ``D^alpha x = A x + B u`` in controllable
    canonical form and keeps the full memory.  The history sum is split into
    a far part, evaluated per block with FFT convolution, and a near part
    evaluated directly.
    """
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    t = _time_grid(t_end, dt)
    ss = _companion(np.real(num), np.real(den))
    n, steps = ss.n, len(t)
    y = np.full(steps, ss.D)
    if n == 0:
        return TimeSeries(t, y, {"solver": "gl", "dt": dt, "alpha": alpha, **(meta or {})})
    ha = dt ** alpha
    lu = lu_factor(np.eye(n) - ha * ss.A)
    c = gl_weights(alpha, steps)
    x = np.zeros((steps, n))           # x[0] = 0: start from rest
    rhs_u = ha * ss.B                  # unit step, u_n = 1 for n >= 1
    for start in range(1, steps, block):
        stop = min(start + block, steps)
        # far history: contributions of x[0:start] to steps start..stop-1
        far = fftconvolve(c[: stop][:, None], x[:start], axes=0)[start:stop] if start > 1 else np.zeros((stop - start, n))
        for i in range(start, stop):
            near = c[1: i - start + 1][::-1] @ x[start:i] if i > start else 0.0
            x[i] = lu_solve(lu, rhs_u - far[i - start] - near)
    y[1:] = x[1:] @ ss.C + ss.D
    return TimeSeries(t, y, {"solver": "gl", "dt": dt, "alpha": alpha, **(meta or {})})


# ---------------------------------------------------------------------------
# closed loops


def _check_input(which: str):
    if which not in INPUTS:
        raise DomainError("input must be one of %s" % (INPUTS,))


def closed_loop_rational(loop, which: str = "reference", band: BandSpec = BandSpec()) -> RationalTf:
    """Oustaloup-approximated ``T`` (reference) or ``S_u`` (disturbance at plant input)."""
    _check_input(which)
    L = approximate_tf(loop.open_loop(), band)
    if which == "reference":
        return L.feedback()
    G = approximate_tf(as_factored(loop.plant), band)
    return RationalTf(P.polymul(G.num, L.den), P.polymul(G.den, P.polyadd(L.den, L.num)))


def closed_loop_pseudo(loop, which: str = "reference"):
    """Closed loop as real polynomials in ``w = s**alpha``: (num, den, alpha)."""
    _check_input(which)
    try:
        ng, dg, a1 = pseudo_rational(as_factored(loop.plant))
        nc, dc, a2 = pseudo_rational(as_factored(loop.controller))
    except UnsupportedFactorError as exc:
        raise UnsupportedFactorError("GL solver needs explicit (commensurate) factors: %s" % exc) from exc
    alpha = Fraction(1, math.lcm(Fraction(a1).denominator, Fraction(a2).denominator))
    ng, dg, _ = pseudo_rational(as_factored(loop.plant), alpha)
    nc, dc, _ = pseudo_rational(as_factored(loop.controller), alpha)
    sigma = -1.0 if loop.open_loop().negated else 1.0
    ol_num = sigma * P.polymul(ng, nc)
    char = P.polyadd(P.polymul(dg, dc), ol_num)
    num = ol_num if which == "reference" else P.polymul(ng, dc)
    scale = np.max(np.abs(char))
    num, char = np.asarray(num) / scale, np.asarray(char) / scale
    for c in (num, char):
        if np.max(np.abs(c.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(c))):
            raise DomainError("closed loop has non-real coefficients in w")
    char = np.real(char)
    nz = np.flatnonzero(np.abs(char) > 1e-14)
    char = char[: nz[-1] + 1]
    return np.real(num)[: len(char)], char, alpha


def step_response(loop, which: str = "reference", solver: str = "oustaloup", t_end: float = 60.0,
                  dt: float = 1e-3, band: BandSpec = BandSpec()) -> TimeSeries:
    meta = {"input": which}
    if solver == "oustaloup":
        tf = closed_loop_rational(loop, which, band)
        meta.update(band=[band.wl, band.wh], N=band.N)
        return simulate_lti(to_state_space(tf), t_end, dt, meta)
    if solver == "gl":
        num, den, alpha = closed_loop_pseudo(loop, which)
        return simulate_gl(num, den, alpha, t_end, dt, meta=meta)
    raise DomainError("solver must be 'oustaloup' or 'gl'")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ResponseMetrics:
    final_value: float
    undershoot: float
    overshoot: float
    settling_time: float | None
    converged: bool
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {"final_value": self.final_value, "undershoot": self.undershoot, "overshoot": self.overshoot,
                "settling_time": self.settling_time, "converged": self.converged, "flags": list(self.flags)}


def response_metrics(ts: TimeSeries, final_value: float, band: float = SETTLING_BAND,
                     tol: float = CONVERGENCE_TOL) -> ResponseMetrics:
    """Undershoot, overshoot, 2% settling time and a convergence verdict.

    The settling band is relative to ``final_value``; for a zero final value
    (disturbance rejection) it is taken relative to the peak excursion.
    """
    y = np.asarray(ts.y)
    if y.size == 0:
        raise DomainError("empty time series")
    undershoot = max(0.0, -float(np.min(y)))
    overshoot = max(0.0, float(np.max(y)) - final_value)
    width = band * (abs(final_value) if final_value != 0 else float(np.max(np.abs(y))))
    outside = np.flatnonzero(np.abs(y - final_value) > width)
    flags = []
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] == len(y) - 1:
        settling = None
        flags.append("no_settling")
    else:
        settling = float(ts.t[outside[-1] + 1])
    converged = abs(float(y[-1]) - final_value) <= tol
    return ResponseMetrics(final_value, undershoot, overshoot, settling, converged, tuple(flags))
