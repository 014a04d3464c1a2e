"""Integer-order rational approximation of fractional factors (Oustaloup)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConditioningError, DomainError, UnsupportedFactorError
from .focore import (
    ExplicitX,
    FactoredTf,
    Gain,
    ImplicitPower,
    IORational,
    Monomial,
    PseudoPoly,
    as_factored,
    complex_power,
)

P = np.polynomial.polynomial

REALNESS_TOL = 1e-10


@dataclass(frozen=True)
class BandSpec:
    wl: float = 1e-3
    wh: float = 1e3
    N: int = 5

    def __post_init__(self):
        if not 0 < self.wl < self.wh:
            raise DomainError("band needs 0 < wl < wh")
        if self.wh / self.wl < 10 * (1 - 1e-12):
            raise DomainError("band must span at least one decade")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("Oustaloup order N must be an integer >= 1")

    @property
    def inner(self) -> tuple[float, float]:
        """Range where the approximation is expected to hold: one decade in from each edge."""
        return 10 * self.wl, self.wh / 10


class RationalTf:
    """Real-coefficient ``num(s)/den(s)``, coefficients ascending in s."""

    def __init__(self, num, den=(1.0,), zeros=None, poles=None, gain=None):
        num = _trim(np.atleast_1d(np.asarray(num, dtype=float)))
        den = _trim(np.atleast_1d(np.asarray(den, dtype=float)))
        if not np.any(den):
            raise DomainError("denominator is identically zero")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise DomainError("non-finite coefficient")
        scale = np.max(np.abs(den))
        self.num = num / scale
        self.den = den / scale
        self._zpk = None
        if zeros is not None and poles is not None and gain is not None:
            self._zpk = (np.asarray(zeros, complex), np.asarray(poles, complex), float(gain))

    @classmethod
    def from_complex(cls, num, den, tol: float = REALNESS_TOL) -> "RationalTf":
        """Round complex intermediates to real after checking the imaginary residue."""
        num = np.asarray(num, dtype=complex)
        den = np.asarray(den, dtype=complex)
        # fix the arbitrary common complex scale so that the leading den coefficient is real
        lead = den[np.flatnonzero(den)[-1]]
        rot = abs(lead) / lead
        num, den = num * rot, den * rot
        for part in (num, den):
            scale = np.max(np.abs(part)) if part.size else 0.0
            if scale and np.max(np.abs(part.imag)) > tol * scale:
                raise ConditioningError(
                    "approximation has non-real coefficients (relative residue %.2g); "
                    "try a smaller N or a narrower band" % (np.max(np.abs(part.imag)) / scale))
        return cls(num.real, den.real)

    @classmethod
    def constant(cls, c: float) -> "RationalTf":
        return cls([c], [1.0])

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    def zpk(self):
        if self._zpk is None:
            z = P.polyroots(self.num) if self.num_degree > 0 else np.array([], complex)
            p = P.polyroots(self.den) if self.den_degree > 0 else np.array([], complex)
            self._zpk = (z.astype(complex), p.astype(complex), self.num[-1] / self.den[-1])
        return self._zpk

    def poles(self) -> np.ndarray:
        return self.zpk()[1]

    def zeros(self) -> np.ndarray:
        return self.zpk()[0]

    def evaluate(self, s):
        s = np.asarray(s, dtype=complex)
        return P.polyval(s, self.num) / P.polyval(s, self.den)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return RationalTf(self.num * other, self.den)
        return RationalTf(P.polymul(self.num, other.num), P.polymul(self.den, other.den))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalTf":
        return RationalTf(self.den, self.num)

    def feedback(self) -> "RationalTf":
        """``self / (1 + self)``."""
        return RationalTf(self.num, P.polyadd(self.den, self.num))

    def to_dict(self) -> dict:
        return {"num": [float(c) for c in self.num], "den": [float(c) for c in self.den]}

    @classmethod
    def from_dict(cls, d: dict) -> "RationalTf":
        return cls(d["num"], d["den"])

    def __repr__(self):
        return "RationalTf(deg %d / deg %d)" % (self.num_degree, self.den_degree)


def _trim(c):
    c = np.asarray(c)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return c[:1] * 0
    return c[: nz[-1] + 1]


def _check_alpha(alpha) -> float:
    a = float(alpha)
    if not 0 < a < 1:
        raise DomainError(
            "Oustaloup needs 0 < alpha < 1, got %g; split integer parts off first" % a)
    return a


def oustaloup_corners(alpha, band: BandSpec):
    """Zero corners ``w_k^-`` and pole corners ``w_k^+`` for k = -N..N, and the gain."""
    a = _check_alpha(alpha)
    N = int(band.N)
    ratio = band.wh / band.wl
    k = np.arange(-N, N + 1)
    wz = band.wl * ratio ** ((k + N + (1 - a) / 2) / (2 * N + 1))
    wp = band.wl * ratio ** ((k + N + (1 + a) / 2) / (2 * N + 1))
    return wz, wp, band.wh ** a


def oustaloup(alpha, band: BandSpec) -> RationalTf:
    """Band-limited approximation ``H_alpha(s)`` of ``s**alpha``."""
    wz, wp, gain = oustaloup_corners(alpha, band)
    num = gain * P.polyfromroots(-wz)
    den = P.polyfromroots(-wp)
    return RationalTf(num, den, zeros=-wz, poles=-wp, gain=gain)


def approx_neg_power(alpha, band: BandSpec) -> RationalTf:
    """``s**-alpha ~ H_{1-alpha}(s) / s``; the integrator fixes the stationary gain."""
    a = _check_alpha(alpha)
    h = oustaloup(1 - a, band)
    return RationalTf(h.num, P.polymul(h.den, [0.0, 1.0]))


def approx_power(beta, band: BandSpec) -> RationalTf:
    """``s**beta`` for any real beta: exact integer part times Oustaloup of the remainder."""
    b = float(beta)
    n = math.floor(b)
    f = b - n
    if f < 1e-12 or 1 - f < 1e-12:
        n = round(b)
        return _monomial(n)
    return oustaloup(f, band) * _monomial(n)


def _monomial(n: int) -> RationalTf:
    if n >= 0:
        return RationalTf([0.0] * n + [1.0], [1.0])
    return RationalTf([1.0], [0.0] * (-n) + [1.0])


# ---------------------------------------------------------------------------
# implicit binomials via substitution


def _substitution_band(z: complex, sign: int, band: BandSpec, widen_tol: float = 1.05) -> BandSpec:
    """Oustaloup band for ``u = z + sign*s`` on ``s = j omega``.

    The band is widened, where needed, so that it contains the image of the
    validity range ``band.inner`` under ``|u|`` with a decade of margin.  It
    depends on ``|Im z|`` only, so conjugate roots share one band.
    """
    lo_w, hi_w = band.inner
    # |z + sign*j*w|**2 = Re(z)**2 + (Im(z) + sign*w)**2, worst case over conj(z)
    y = abs(z.imag)
    w_star = min(max(y, lo_w), hi_w)

    def mod(w, yy):
        return math.hypot(z.real, yy - w)

    u_lo = mod(w_star, y)
    u_hi = max(mod(hi_w, -y), mod(lo_w, -y))
    wl, wh = band.wl, band.wh
    if u_lo / 10 < wl / widen_tol:
        wl = u_lo / 10
    if 10 * u_hi > wh * widen_tol:
        wh = 10 * u_hi
    return BandSpec(wl, wh, band.N)


def _binomial_power_complex(z: complex, beta, sign: int, band: BandSpec):
    """Complex-coefficient (num, den) approximating ``(1 + sign*s/z)**beta``."""
    z = complex(z)
    if z.real == 0:
        raise DomainError("binomial root on the imaginary axis")
    b = float(beta)
    n = int(math.trunc(b))
    f = b - n
    eps = 1.0 if z.real > 0 else -1.0
    # 1 + sign*s/z = u / (eps*z) with u = eps*(z + sign*s), Re(u) > 0 on the axis
    u = np.array([eps * z, eps * sign], dtype=complex)
    num = np.array([1.0 + 0j])
    den = np.array([1.0 + 0j])
    ipow = n
    if abs(f) > 1e-12:
        ub = _substitution_band(z, sign, band)
        a = abs(f)
        wz, wp, gain = oustaloup_corners(1 - a, ub)
        hn = np.array([gain + 0j])
        hd = np.array([1.0 + 0j])
        for cz, cp in zip(wz, wp):
            hn = P.polymul(hn, P.polyadd(u, [cz]))
            hd = P.polymul(hd, P.polyadd(u, [cp]))
        if f < 0:
            # u**-a ~ H_{1-a}(u) / u
            num, den = hn, P.polymul(hd, u)
        else:
            # u**a ~ u / H_{1-a}(u)
            num, den = P.polymul(hd, u), hn
    if ipow > 0:
        num = P.polymul(num, P.polypow(u, ipow))
    elif ipow < 0:
        den = P.polymul(den, P.polypow(u, -ipow))
    # exact unit gain at s = 0, as for the binomial itself
    return num * (den[0] / num[0]), den


def approx_implicit_real(z: float, alpha, sign: int, exponent_sign: int, band: BandSpec) -> RationalTf:
    """``(1 + sign*s/z)**(exponent_sign*alpha)`` for real z > 0.

    sign=-1 is the plain binomial ``1 - s/z``; sign=+1 the mirrored one.
    """
    if z <= 0:
        raise DomainError("z must be > 0")
    if sign not in (-1, 1) or exponent_sign not in (-1, 1):
        raise DomainError("sign and exponent_sign must be +1 or -1")
    a = float(alpha)
    if not 0 < a <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    num, den = _binomial_power_complex(complex(z), exponent_sign * a, sign, band)
    tf = RationalTf.from_complex(num, den)
    if sign == 1:
        _guard_stable(tf, "mirrored binomial (1 + s/z)")
    return tf


def approx_implicit_pair(p: complex, alpha, exponent_sign: int, band: BandSpec, mirrored: bool = False) -> RationalTf:
    """``((1 -/+ s/p)(1 -/+ s/conj p))**(exponent_sign*alpha)``, one root at a time."""
    p = complex(p)
    if p.imag == 0:
        raise DomainError("pair approximation needs Im(p) != 0")
    sign = 1 if mirrored else -1
    b = exponent_sign * float(alpha)
    n1, d1 = _binomial_power_complex(p, b, sign, band)
    n2, d2 = _binomial_power_complex(p.conjugate(), b, sign, band)
    return RationalTf.from_complex(P.polymul(n1, n2), P.polymul(d1, d2))


def _guard_stable(tf: RationalTf, what: str):
    poles = tf.poles()
    if poles.size and np.max(poles.real) >= 0:
        raise ConditioningError("approximation of %s produced an unstable pole at %s"
                                % (what, poles[np.argmax(poles.real)]))


# ---------------------------------------------------------------------------
# whole transfer functions


def _explicit_complex(f: ExplicitX, band: BandSpec):
    a = float(f.alpha)
    h = approx_power(a, band)
    zs = (f.z, f.z.conjugate()) if f.pair else (f.z,)
    num = np.array([1.0 + 0j])
    den = np.array([1.0 + 0j])
    for zz in zs:
        za = complex_power(zz, a)
        # 1 - H/z**a = (z**a * hd - hn) / (z**a * hd)
        num = P.polymul(num, P.polysub(za * h.den, h.num))
        den = P.polymul(den, za * h.den)
    return (num, den) if f.k == 1 else (den, num)


def _pseudo_poly_complex(f: PseudoPoly, band: BandSpec):
    a = f.poly.alpha
    exact = isinstance(a, Fraction)
    groups = {}
    for m, c in enumerate(f.poly.coeffs):
        if c == 0:
            continue
        e = a * m if exact else float(a) * m
        n = math.floor(e)
        frac = e - n
        key = frac if exact else round(frac, 12)
        poly = groups.setdefault(key, np.zeros(1, complex))
        poly = P.polyadd(poly, np.r_[np.zeros(n), c])
        groups[key] = poly
    num = np.zeros(1, complex)
    den = np.ones(1, complex)
    for frac, poly in groups.items():
        if frac == 0:
            term_n, term_d = poly, np.ones(1)
        else:
            h = oustaloup(float(frac), band)
            term_n, term_d = P.polymul(poly, h.num), h.den
        num = P.polyadd(P.polymul(num, term_d), P.polymul(term_n, den))
        den = P.polymul(den, term_d)
    return (num, den) if f.k == 1 else (den, num)


def approximate_tf(tf, band: BandSpec = BandSpec()) -> RationalTf:
    """Single rational approximation of a factored FO transfer function."""
    tf = as_factored(tf)
    num = np.array([-1.0 + 0j if tf.negated else 1.0 + 0j])
    den = np.array([1.0 + 0j])
    for f in tf.factors:
        if isinstance(f, Gain):
            fn, fd = np.array([f.g]), np.ones(1)
        elif isinstance(f, Monomial):
            r = approx_power(f.exponent, band)
            fn, fd = r.num, r.den
        elif isinstance(f, ExplicitX):
            fn, fd = _explicit_complex(f, band)
        elif isinstance(f, PseudoPoly):
            fn, fd = _pseudo_poly_complex(f, band)
        elif isinstance(f, ImplicitPower):
            if f.pair:
                fn1, fd1 = _binomial_power_complex(f.z, f.exponent, f.sign, band)
                fn2, fd2 = _binomial_power_complex(f.z.conjugate(), f.exponent, f.sign, band)
                fn, fd = P.polymul(fn1, fn2), P.polymul(fd1, fd2)
            else:
                fn, fd = _binomial_power_complex(f.z, f.exponent, f.sign, band)
        elif isinstance(f, IORational):
            fn, fd = np.asarray(f.num), np.asarray(f.den)
        else:
            raise UnsupportedFactorError("cannot approximate factor %r" % (f,))
        num = P.polymul(num, fn)
        den = P.polymul(den, fd)
    return RationalTf.from_complex(num, den)
