"""Closed-loop analysis and the example PI-based designs.

Conventions: the open loop is ``L = G*C``, or ``L = -G*C`` when the loop is
``negated`` (plants with negative DC gain).  ``T = L/(1+L)``,
``S_y = 1/(1+L)`` and ``S_u = G/(1+L)`` with G the plant as given.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .approx import BandSpec, approximate_tf
from .compensate import CancellationPlan, plan_cancellation
from .errors import DomainError, FracshapeError, ParseError, SingularityError, UnsupportedFactorError
from .focore import (
    FactoredTf,
    FrequencyResponse,
    Gain,
    IORational,
    StabilityVerdict,
    as_factored,
    check_grid,
    commensurate_order,
    log_grid,
    matignon_stable,
    PseudoPolynomial,
    pseudo_rational,
    pseudo_roots,
    verdict_from_roots,
)

P = np.polynomial.polynomial

DEFAULT_BAND = (1e-3, 1e3)
POINTS_PER_DECADE = 100
EXAMPLE_OMEGA_C = 0.54
EXAMPLE_TAU = 2.0


class NoCrossoverError(FracshapeError, ValueError):
    pass


@dataclass(frozen=True)
class LoopSpec:
    plant: FactoredTf
    controller: FactoredTf
    negated: bool = False

    def open_loop(self) -> FactoredTf:
        return FactoredTf(as_factored(self.plant).factors + as_factored(self.controller).factors,
                          self.negated ^ as_factored(self.plant).negated ^ as_factored(self.controller).negated)

    def with_gain(self, k: float) -> "LoopSpec":
        return LoopSpec(self.plant, FactoredTf((Gain(k),)) * as_factored(self.controller), self.negated)

    def to_dict(self) -> dict:
        return {"plant": as_factored(self.plant).to_dict(), "controller": as_factored(self.controller).to_dict(),
                "negated": self.negated}

    @classmethod
    def from_dict(cls, d: dict) -> "LoopSpec":
        try:
            return cls(FactoredTf.from_dict(d["plant"]), FactoredTf.from_dict(d["controller"]),
                       bool(d.get("negated", False)))
        except (KeyError, TypeError) as exc:
            raise ParseError("loop file needs 'plant' and 'controller'") from exc


# ---------------------------------------------------------------------------
# sensitivities


class Sensitivities:
    """Pointwise T, S_y, S_u of a loop, evaluated on demand."""

    def __init__(self, loop: LoopSpec, rtol: float = 1e-12):
        self.loop = loop
        self.rtol = rtol

    def _parts(self, grid):
        w = check_grid(grid)
        s = 1j * w
        L = self.loop.open_loop().evaluate(s)
        ret = 1.0 + L
        bad = np.abs(ret) <= self.rtol * np.maximum(1.0, np.abs(L))
        if np.any(bad):
            w0 = float(w[np.argmax(bad)])
            raise SingularityError("1 + L vanishes at omega=%g" % w0, omega=w0)
        return w, s, L, ret

    def T(self, grid) -> FrequencyResponse:
        w, _, L, ret = self._parts(grid)
        return FrequencyResponse(w, L / ret)

    def S_y(self, grid) -> FrequencyResponse:
        w, _, _, ret = self._parts(grid)
        return FrequencyResponse(w, 1.0 / ret)

    def S_u(self, grid) -> FrequencyResponse:
        w, s, _, ret = self._parts(grid)
        return FrequencyResponse(w, as_factored(self.loop.plant).evaluate(s) / ret)


def sensitivities(loop: LoopSpec) -> Sensitivities:
    return Sensitivities(loop)


# ---------------------------------------------------------------------------
# stability


def _cancel_common(num_roots, den_roots, rtol=1e-6):
    """Drop den roots that are matched by a numerator root (one-to-one)."""
    remaining = list(np.asarray(den_roots, complex))
    used = np.zeros(len(num_roots), bool)
    kept = []
    for r in remaining:
        if len(num_roots):
            d = np.abs(np.asarray(num_roots) - r)
            d[used] = np.inf
            j = int(np.argmin(d))
            if d[j] <= rtol * max(1.0, abs(r)):
                used[j] = True
                continue
        kept.append(r)
    return np.asarray(kept, complex)


def _roots(c):
    c = np.asarray(c, complex)
    nz = np.flatnonzero(c)
    c = c[: nz[-1] + 1] if nz.size else c[:1]
    if len(c) <= 1:
        return np.array([], complex)
    return pseudo_roots(PseudoPolynomial(1, tuple(c)))


@dataclass(frozen=True)
class LoopStability:
    """Verdicts for each closed-loop map after cancelling common roots."""

    alpha: object
    T: StabilityVerdict
    S_y: StabilityVerdict
    S_u: StabilityVerdict
    S_c: StabilityVerdict
    characteristic_roots: np.ndarray = field(repr=False)
    approximated: bool = False

    @property
    def internally_stable(self) -> bool:
        return all(v.stable for v in (self.T, self.S_y, self.S_u, self.S_c))

    def to_dict(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "approximated": self.approximated,
            "internally_stable": self.internally_stable,
            **{name: getattr(self, name).stable for name in ("T", "S_y", "S_u", "S_c")},
        }


def _as_io_rational(tf, band):
    r = approximate_tf(tf, band)
    return FactoredTf((IORational(tuple(r.num), tuple(r.den)),))


def closed_loop_stability(plant, controller, negated: bool = False, band: BandSpec | None = None) -> LoopStability:
    """Stability of T, S_y, S_u and C/(1+L) of the interconnection.

    Commensurate loops are tested in ``w = s**alpha`` with the Matignon
    sector; loops with implicit factors are first replaced by their Oustaloup
    approximations (``band``) and tested as IO systems.
    """
    plant, controller = as_factored(plant), as_factored(controller)
    approximated = False
    try:
        alpha = Fraction(1, math.lcm(commensurate_order(plant).denominator,
                                     commensurate_order(controller).denominator))
    except UnsupportedFactorError:
        band = band or BandSpec()
        plant, controller = _as_io_rational(plant, band), _as_io_rational(controller, band)
        alpha = Fraction(1)
        approximated = True
    ng, dg, _ = pseudo_rational(plant, alpha)
    nc, dc, _ = pseudo_rational(controller, alpha)
    sigma = -1.0 if negated else 1.0
    char = P.polyadd(P.polymul(dg, dc), sigma * P.polymul(ng, nc))
    char_roots = _roots(char)

    def verdict(num):
        return verdict_from_roots(_cancel_common(_roots(num), char_roots), alpha)

    return LoopStability(
        alpha=alpha,
        T=verdict(P.polymul(ng, nc)),
        S_y=verdict(P.polymul(dg, dc)),
        S_u=verdict(P.polymul(ng, dc)),
        S_c=verdict(P.polymul(nc, dg)),
        characteristic_roots=char_roots,
        approximated=approximated,
    )


@dataclass(frozen=True)
class InternalStability:
    plan: CancellationPlan
    criterion: StabilityVerdict | None   # roots of X**-k + G^C^ in w (explicit plans)
    loop: LoopStability

    @property
    def stable(self) -> bool:
        ok = self.loop.internally_stable
        return ok and (self.criterion is None or self.criterion.stable)


def internal_stability(plan: CancellationPlan, plant_hat, ctrl_hat, negated: bool = False,
                       band: BandSpec | None = None) -> InternalStability:
    """Check the loop ``G = Z**k * G^``, ``C = compensator * C^`` of a cancellation plan."""
    plant = FactoredTf((plan.io_factor,)) * as_factored(plant_hat)
    controller = plan.compensator_tf() * as_factored(ctrl_hat)
    loop = closed_loop_stability(plant, controller, negated, band)
    criterion = None
    if plan.method == "explicit":
        reduced = plan.residual_tf() * as_factored(plant_hat) * as_factored(ctrl_hat)
        n, d, alpha = pseudo_rational(reduced)
        sigma = -1.0 if negated else 1.0
        char = P.polyadd(d, sigma * n)
        criterion = matignon_stable(PseudoPolynomial(alpha, tuple(char)))
    return InternalStability(plan, criterion, loop)


# ---------------------------------------------------------------------------
# margins


@dataclass(frozen=True)
class MarginsReport:
    omega_c: float
    phase_margin_deg: float
    omega_pi: float | None
    gain_margin_db: float
    flags: tuple = ()

    def to_dict(self) -> dict:
        gm = self.gain_margin_db
        return {
            "omega_c": self.omega_c,
            "phase_margin_deg": self.phase_margin_deg,
            "omega_pi": self.omega_pi,
            "gain_margin_db": gm if math.isfinite(gm) else None,
            "flags": list(self.flags),
        }


def _wrap180(x):
    return (x + 180.0) % 360.0 - 180.0


def margins(loop, wmin: float = DEFAULT_BAND[0], wmax: float = DEFAULT_BAND[1],
            points_per_decade: int = POINTS_PER_DECADE) -> MarginsReport:
    """Gain/phase margins from the sampled open loop, crossings refined by root bracketing."""
    L = loop.open_loop() if isinstance(loop, LoopSpec) else as_factored(loop)
    w = log_grid(wmin, wmax, points_per_decade)
    x = np.log10(w)
    vals = L.evaluate(1j * w)
    logmag = np.log10(np.abs(vals))
    phase = np.degrees(np.unwrap(np.angle(vals)))

    def mag_at(xx):
        return float(np.log10(abs(L.evaluate(np.array([1j * 10 ** xx]))[0])))

    def phase_near(xx, ref):
        p = math.degrees(np.angle(L.evaluate(np.array([1j * 10 ** xx]))[0]))
        return ref + _wrap180(p - ref)

    flags = []
    crossings = []
    for i in range(len(w) - 1):
        a, b = logmag[i], logmag[i + 1]
        if a == 0:
            crossings.append((float(w[i]), phase[i]))
        elif a * b < 0:
            xc = brentq(mag_at, x[i], x[i + 1], xtol=1e-12, rtol=1e-12)
            crossings.append((10 ** xc, phase_near(xc, phase[i])))
    if not crossings:
        raise NoCrossoverError("no gain crossover in [%g, %g] rad/s; widen the band" % (wmin, wmax))
    if len(crossings) > 1:
        flags.append("multiple_gain_crossings")
    pms = [(_wrap180(180.0 + ph) if _wrap180(180.0 + ph) != -180.0 else 180.0, wc) for wc, ph in crossings]
    pm, wc = min(pms)

    phase_x = []
    for i in range(len(w) - 1):
        lo, hi = sorted((phase[i], phase[i + 1]))
        m_lo = math.ceil((lo + 180.0) / 360.0)
        m_hi = math.floor((hi + 180.0) / 360.0)
        for m in range(m_lo, m_hi + 1):
            level = -180.0 + 360.0 * m
            ref = phase[i]
            f = lambda xx: phase_near(xx, ref) - level  # noqa: E731
            if f(x[i]) == 0:
                xp = x[i]
            elif f(x[i + 1]) == 0 or f(x[i]) * f(x[i + 1]) > 0:
                continue
            else:
                xp = brentq(f, x[i], x[i + 1], xtol=1e-12, rtol=1e-12)
            phase_x.append((-20.0 * mag_at(xp), 10 ** xp))
    if not phase_x:
        flags.append("no_phase_crossing")
        return MarginsReport(wc, pm, None, math.inf, tuple(flags))
    if len(phase_x) > 1:
        flags.append("multiple_phase_crossings")
    gm, wp = min(phase_x, key=lambda t: abs(t[0]))
    return MarginsReport(wc, pm, wp, gm, tuple(flags))


def tune_gain(loop: LoopSpec, omega_c: float) -> tuple[float, float]:
    """Gain k putting the crossover of ``k*L`` at ``omega_c``; returns (k, |kL| - 1)."""
    L = loop.open_loop() if isinstance(loop, LoopSpec) else as_factored(loop)
    mag = abs(L.evaluate(np.array([1j * omega_c]))[0])
    if mag == 0 or not math.isfinite(mag):
        raise DomainError("|L(j%g)| = %g cannot be scaled to 1" % (omega_c, mag))
    k = 1.0 / mag
    return k, abs(k * mag) - 1.0


# ---------------------------------------------------------------------------
# the worked example


def example_plant() -> FactoredTf:
    """``(s - 1) / ((1 + s/2)(1 + s/3))``; DC gain -1, RHP zero at 1."""
    return FactoredTf((IORational((-1.0, 1.0), (1.0, 5.0 / 6.0, 1.0 / 6.0)),))


def pi_controller(tau: float = EXAMPLE_TAU) -> IORational:
    """``(tau s + 1) / (tau s)``."""
    return IORational((1.0, tau), (0.0, tau))


EXAMPLE_METHODS = {"C1": None, "C2": "mirror", "C3": "explicit", "C4": "implicit"}


def example_templates(tau: float = EXAMPLE_TAU) -> dict:
    """Unit-gain controllers: PI, PI*D1**-1, PI*Q**-1, PI*Qt**-1 for the zero at z=1, nu=2."""
    out = {}
    for name, method in EXAMPLE_METHODS.items():
        factors = (pi_controller(tau),)
        if method is not None:
            plan = plan_cancellation("real", 1.0, 2, method, k=1)
            factors += plan.compensator_tf().factors
        out[name] = FactoredTf(factors)
    return out


def build_example_controllers(omega_c: float = EXAMPLE_OMEGA_C, tau: float = EXAMPLE_TAU) -> dict:
    """The four example controllers with gains tuned to crossover ``omega_c``."""
    plant = example_plant()
    out = {}
    for name, tmpl in example_templates(tau).items():
        k, _ = tune_gain(LoopSpec(plant, tmpl, negated=True), omega_c)
        out[name] = FactoredTf((Gain(k),)) * tmpl
    return out


def example_loops(omega_c: float = EXAMPLE_OMEGA_C) -> dict:
    plant = example_plant()
    return {name: LoopSpec(plant, c, negated=True) for name, c in build_example_controllers(omega_c).items()}


def controller_gain(c: FactoredTf) -> float:
    return float(np.prod([f.g for f in c.factors if isinstance(f, Gain)]))
