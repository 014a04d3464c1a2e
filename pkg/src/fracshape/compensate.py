"""Fractional-order partial cancellation of integer-order zeros and poles.

An IO binomial ``1 - s/z`` factors exactly in ``w = s**(1/nu)`` as

    (1 - w/l0) * sum_{n<nu} (w/l0)**n,      l0 = principal nu-th root of z,

i.e. an explicit pseudo zero X times a pseudo polynomial Q whose roots are the
non-principal nu-th roots of z.  The constructors here return the pieces as
:mod:`fracshape.focore` factors so they can be dropped into a loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import DomainError, UnsupportedFactorError
from .focore import (
    ExplicitX,
    FactoredTf,
    Gain,
    ImplicitPower,
    PseudoPoly,
    PseudoPolynomial,
    StabilityVerdict,
    complex_power,
    matignon_stable,
    pseudo_roots,
)


def _check_nu(nu) -> int:
    if isinstance(nu, bool) or int(nu) != nu or nu < 2:
        raise DomainError("nu must be an integer >= 2, got %r" % (nu,))
    return int(nu)


def _check_k(k) -> int:
    if k not in (-1, 1):
        raise DomainError("k must be +1 (zero) or -1 (pole), got %r" % (k,))
    return int(k)


def _real_positive(z) -> float:
    zc = complex(z)
    if zc.imag != 0 or zc.real <= 0:
        raise DomainError("expected a real z > 0, got %r" % (z,))
    return zc.real


def _rhp_complex(z) -> complex:
    zc = complex(z)
    if zc.imag == 0:
        raise DomainError("degenerate pair: z=%r is real" % (z,))
    if zc.real <= 0:
        raise DomainError("z=%r is not in the open right half plane (|arg z| >= pi/2)" % (z,))
    return zc


def q_polynomial(z, nu: int) -> PseudoPolynomial:
    """Q_{z,nu} in ``w = s**(1/nu)``: coefficients ``l0**-m``, m = 0..nu-1."""
    nu = _check_nu(nu)
    lam0 = complex_power(complex(z), 1.0 / nu)
    return PseudoPolynomial(Fraction(1, nu), tuple(lam0 ** -m for m in range(nu)))


def pair_q_polynomial(z, nu: int) -> PseudoPolynomial:
    """Q_{z,nu} * Q_{conj z,nu}; real coefficients of degree 2(nu-1)."""
    qa = np.asarray(q_polynomial(z, nu).coeffs)
    qb = np.asarray(q_polynomial(complex(z).conjugate(), nu).coeffs)
    prod = np.polynomial.polynomial.polymul(qa, qb)
    scale = np.max(np.abs(prod))
    if np.max(np.abs(prod.imag)) > 1e-10 * scale:
        raise ArithmeticError("conjugate product has non-real coefficients")
    return PseudoPolynomial(Fraction(1, nu), tuple(prod.real))


def pair_x_polynomial(z, alpha) -> PseudoPolynomial:
    """Closed form ``w0**-2a (w**2 - 2 w0**a cos(phi*a) w + w0**2a)`` for the pair X."""
    z = complex(z)
    w0, phi, a = abs(z), math.atan2(z.imag, z.real), float(alpha)
    c = (1.0, -2.0 * w0 ** -a * math.cos(phi * a), w0 ** (-2 * a))
    return PseudoPolynomial(alpha, c)


# ---------------------------------------------------------------------------
# explicit split


def expand_real(z, nu: int, k: int = 1) -> tuple[ExplicitX, PseudoPoly]:
    """``Z1**k = X**k * Q**k`` for a real RHP zero (k=1) or pole (k=-1)."""
    z = _real_positive(z)
    nu, k = _check_nu(nu), _check_k(k)
    return ExplicitX(z, Fraction(1, nu), k), PseudoPoly(q_polynomial(z, nu), k)


def expand_pair(z, nu: int, k: int = 1) -> tuple[ExplicitX, PseudoPoly]:
    """Pair version for ``z, conj(z)`` in the open right half plane."""
    z = _rhp_complex(z)
    nu, k = _check_nu(nu), _check_k(k)
    return ExplicitX(z, Fraction(1, nu), k, pair=True), PseudoPoly(pair_q_polynomial(z, nu), k)


@dataclass(frozen=True)
class CharPoints:
    has_minimum: bool
    omega_min: float | None
    mag_min: float | None
    phase_min: float | None
    phase_at_z: float

    @property
    def phase_min_deg(self):
        return None if self.phase_min is None else math.degrees(self.phase_min)

    @property
    def phase_at_z_deg(self):
        return math.degrees(self.phase_at_z)


def explicit_char_points(z, alpha) -> CharPoints:
    """Magnitude minimum of the explicit pseudo zero and its phase at ``omega = z``.

    Phases in radians, for k = 1.
    """
    z = _real_positive(z)
    a = float(alpha)
    if not 0 < a <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    phase_z = (math.pi / 2) * (a / 2 - 1)
    if a == 1:
        return CharPoints(False, None, None, None, phase_z)
    c = math.cos(math.pi * a / 2)
    return CharPoints(True, z * c ** (1 / a), math.sin(math.pi * a / 2), (math.pi / 2) * (a - 1), phase_z)


# ---------------------------------------------------------------------------
# implicit terms and mirrors


def implicit_terms(z, nu: int, k: int = 1, pair: bool = False) -> tuple[ImplicitPower, FactoredTf]:
    """Implicit ``Qt = (1 + s/z)**(k(nu-1)/nu)`` and ``Xt = Z**k * Qt**-1``.

    With ``pair`` both use the conjugate-pair products (z in the open RHP).
    """
    nu, k = _check_nu(nu), _check_k(k)
    z = _rhp_complex(z) if pair else _real_positive(z)
    beta = Fraction(k * (nu - 1), nu)
    qt = ImplicitPower(z, beta, pair=pair, mirrored=True)
    xt = FactoredTf((ImplicitPower(z, k, pair=pair), ImplicitPower(z, -beta, pair=pair, mirrored=True)))
    return qt, xt


def mirror(z, k: int = 1) -> ImplicitPower:
    """Mirrored IO term ``D1**k = (1 + s/z)**k``; a complex z gives the pair ``D2**k``."""
    k = _check_k(k)
    zc = complex(z)
    if zc.real <= 0:
        raise DomainError("mirror needs Re(z) > 0")
    return ImplicitPower(zc, k, pair=zc.imag != 0, mirrored=True)


def io_term(z, k: int = 1) -> ImplicitPower:
    """The IO zero/pole being compensated: ``Z1**k`` or, for complex z, ``Z2**k``."""
    zc = complex(z)
    return ImplicitPower(zc, _check_k(k), pair=zc.imag != 0)


# ---------------------------------------------------------------------------
# stable low-damped pole pairs


@dataclass(frozen=True)
class StablePairCancellation:
    p: complex
    nu: int
    compensator: ExplicitX           # X_p, cancels the principal pseudo poles
    residual: PseudoPoly             # P * X_p = Q_p**-1
    implicit_compensator: ImplicitPower   # P**-alpha
    implicit_residual: ImplicitPower      # P * P**-alpha
    principal_roots: tuple
    residual_roots: np.ndarray = field(repr=False)
    residual_verdict: StabilityVerdict = field(repr=False)
    non_oscillating: bool = True
    warnings: tuple = ()


def stable_pair_cancel(p, nu: int) -> StablePairCancellation:
    """Partial cancellation of a stable complex pole pair ``P = w0**2 / (s**2 - 2 s w0 cos(phi) + w0**2)``."""
    p = complex(p)
    nu = _check_nu(nu)
    if p.imag == 0:
        raise DomainError("degenerate pair: p=%r is real" % (p,))
    if p.real >= 0:
        raise DomainError("p=%r is not a stable pole (|arg p| <= pi/2)" % (p,))
    a = Fraction(1, nu)
    qpoly = pair_q_polynomial(p, nu)
    roots = pseudo_roots(qpoly)
    verdict = matignon_stable(qpoly)
    args = np.abs(np.angle(roots))
    non_osc = bool(np.all(args >= math.pi / nu))
    warnings = () if non_osc else (
        "residual pseudo poles with |arg| < pi/nu remain; expect an oscillating step response",)
    lam0 = complex_power(p, 1.0 / nu)
    return StablePairCancellation(
        p=p,
        nu=nu,
        compensator=ExplicitX(p, a, 1, pair=True),
        residual=PseudoPoly(qpoly, -1),
        implicit_compensator=ImplicitPower(p, a, pair=True),
        implicit_residual=ImplicitPower(p, a - 1, pair=True),
        principal_roots=(lam0, lam0.conjugate()),
        residual_roots=roots,
        residual_verdict=verdict,
        non_oscillating=non_osc,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# plans


TARGETS = ("real", "pair", "stable_pair")
METHODS = ("explicit", "implicit", "mirror")

Piece = Union[ExplicitX, PseudoPoly, ImplicitPower, FactoredTf]


@dataclass(frozen=True)
class CancellationPlan:
    """What goes into the controller (``compensator``) and what stays in the
    loop (``residual``).  ``io_factor`` is the plant's IO term being treated."""

    target: str
    z: complex
    k: int
    nu: int
    method: str
    compensator: Piece
    residual: Piece
    io_factor: ImplicitPower
    warnings: tuple = ()

    def compensator_tf(self) -> FactoredTf:
        return _as_tf(self.compensator)

    def residual_tf(self) -> FactoredTf:
        return _as_tf(self.residual)


def _as_tf(piece) -> FactoredTf:
    return piece if isinstance(piece, FactoredTf) else FactoredTf((piece,))


def plan_cancellation(target: str, z, nu: int, method: str = "explicit", k: int = 1) -> CancellationPlan:
    if target not in TARGETS:
        raise DomainError("target must be one of %s" % (TARGETS,))
    if method not in METHODS:
        raise DomainError("method must be one of %s" % (METHODS,))
    nu = _check_nu(nu)
    if target == "stable_pair":
        # a stable pole pair, so k is -1 by construction
        sp = stable_pair_cancel(z, nu)
        io = ImplicitPower(sp.p, -1, pair=True)
        if method == "explicit":
            comp, res = sp.compensator, sp.residual
        elif method == "implicit":
            comp, res = sp.implicit_compensator, sp.implicit_residual
        else:
            comp, res = ImplicitPower(sp.p, 1, pair=True), FactoredTf()
        return CancellationPlan(target, sp.p, -1, nu, method, comp, res, io, sp.warnings)

    k = _check_k(k)
    pair = target == "pair"
    zc = _rhp_complex(z) if pair else complex(_real_positive(z))
    io = io_term(zc, k)
    if method == "explicit":
        x, q = expand_pair(zc, nu, k) if pair else expand_real(zc.real, nu, k)
        comp, res = PseudoPoly(q.poly, -k), x
    elif method == "implicit":
        qt, xt = implicit_terms(zc if pair else zc.real, nu, k, pair)
        comp, res = ImplicitPower(qt.z, -qt.exponent, pair=pair, mirrored=True), xt
    else:
        comp = mirror(zc, -k)
        res = FactoredTf((io, mirror(zc, -k)))
    return CancellationPlan(target, zc, k, nu, method, comp, res, io)


# ---------------------------------------------------------------------------
# asymptotics


@dataclass(frozen=True)
class Asymptotics:
    low_slope_db_dec: float
    low_phase_deg: float
    high_slope_db_dec: float
    high_phase_deg: float

    def __add__(self, other):
        return Asymptotics(*(a + b for a, b in zip(self._tuple(), other._tuple())))

    def _tuple(self):
        return (self.low_slope_db_dec, self.low_phase_deg, self.high_slope_db_dec, self.high_phase_deg)


def _explicit_high_phase(z: complex, a: float) -> float:
    # 1 - c * w**a with arg(c) = theta; the phase leaves 0 on the side opposite to theta
    theta = a * math.pi / 2 - np.angle(complex_power(z, a))
    theta = math.atan2(math.sin(theta), math.cos(theta))
    if theta == 0:
        raise DomainError("pseudo zero lies on the imaginary axis")
    return theta - math.copysign(math.pi, theta)


def asymptotics(f) -> Asymptotics:
    """Low/high-frequency magnitude slope and phase, phase continued from 0 at DC."""
    if isinstance(f, FactoredTf):
        total = Asymptotics(0.0, 180.0 if f.negated else 0.0, 0.0, 180.0 if f.negated else 0.0)
        for g in f.factors:
            total = total + asymptotics(g)
        return total
    if isinstance(f, Gain):
        ph = 0.0 if f.g > 0 else 180.0
        return Asymptotics(0.0, ph, 0.0, ph)
    if isinstance(f, ExplicitX):
        a = float(f.alpha)
        zs = (f.z, f.z.conjugate()) if f.pair else (f.z,)
        if not f.pair and f.z.imag != 0:
            raise UnsupportedFactorError("single explicit factor with complex z has no tabulated asymptotics")
        phase = sum(_explicit_high_phase(zz, a) for zz in zs)
        return Asymptotics(0.0, 0.0, 20.0 * a * f.k * len(zs), math.degrees(f.k * phase))
    if isinstance(f, ImplicitPower):
        b = float(f.exponent)
        zs = (f.z, f.z.conjugate()) if f.pair else (f.z,)
        phase = sum(np.angle(f.sign * 1j / zz) for zz in zs)
        return Asymptotics(0.0, 0.0, 20.0 * b * len(zs), math.degrees(b * phase))
    raise UnsupportedFactorError("no asymptotic table for factor kind %r" % getattr(f, "kind", type(f).__name__))
