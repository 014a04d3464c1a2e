"""Commensurate fractional-order transfer functions.

Representation of loop elements as products of factors, principal-branch
evaluation on the imaginary axis, root finding for pseudo polynomials in
``w = s**alpha`` and the Matignon sector test.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar, Iterable, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    DomainError,
    NoRootsError,
    NotCommensurateError,
    ParseError,
    SingularityError,
    UnsupportedFactorError,
)

Order = Union[Fraction, float]

REAL_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-8
SECTOR_TOL = 1e-10


def complex_power(base, exponent):
    """Principal branch power ``|b|**e * exp(1j*e*Arg(b))`` with Arg in (-pi, pi].

    Works elementwise on arrays. ``0**e`` is 0 for e > 0 and 1 for e == 0.
    """
    b = np.asarray(base, dtype=complex)
    e = float(exponent)
    mag = np.abs(b)
    zero = mag == 0
    if np.any(zero) and e < 0:
        raise DomainError("zero base with negative exponent %g" % e)
    arg = np.angle(b)
    # angle(-x - 0j) is -pi; the principal branch wants +pi on the cut
    arg = np.where((b.imag == 0) & (b.real < 0), np.pi, arg)
    with np.errstate(divide="ignore"):
        out = np.where(zero, 1.0 if e == 0 else 0.0, mag ** e * np.exp(1j * e * arg))
    if out.ndim == 0:
        return complex(out)
    return out


def as_order(value) -> Order:
    """Keep exact rationals exact; parse ``"1/3"`` strings; pass floats through."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError("bad order %r" % value) from exc
    return float(value)


def rationalize(value, max_den: int = 1000, tol: float = 1e-12) -> Fraction | None:
    """Exact rational for an order, or None when it is not (close to) one."""
    if isinstance(value, Fraction):
        return value
    f = Fraction(float(value)).limit_denominator(max_den)
    if abs(float(f) - float(value)) <= tol:
        return f
    return None


def _order_json(a: Order):
    if isinstance(a, Fraction):
        return str(a) if a.denominator != 1 else a.numerator
    return a


def _complex_json(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _parse_complex(obj) -> complex:
    if isinstance(obj, dict):
        try:
            return complex(float(obj["re"]), float(obj.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError("bad complex number %r" % (obj,)) from exc
    if isinstance(obj, (int, float)):
        return complex(obj)
    raise ParseError("bad complex number %r" % (obj,))


# ---------------------------------------------------------------------------
# pseudo polynomials


@dataclass(frozen=True)
class PseudoPolynomial:
    """``sum_m coeffs[m] * s**(m*alpha)``, i.e. a polynomial in ``w = s**alpha``.

    Coefficients are stored in ascending powers of ``w``.
    """

    alpha: Order
    coeffs: tuple

    def __post_init__(self):
        alpha = as_order(self.alpha)
        if not 0 < float(alpha) <= 1:
            raise DomainError("commensurate order must lie in (0, 1], got %s" % alpha)
        c = [complex(x) for x in self.coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c or (len(c) == 1 and c[0] == 0):
            raise DomainError("pseudo polynomial must have a nonzero coefficient")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_real(self) -> bool:
        c = np.asarray(self.coeffs)
        return bool(np.max(np.abs(c.imag)) <= REAL_TOL * np.max(np.abs(c)))

    def as_array(self) -> np.ndarray:
        c = np.asarray(self.coeffs, dtype=complex)
        return c.real.copy() if self.is_real else c

    def eval_w(self, w):
        return np.polynomial.polynomial.polyval(w, np.asarray(self.coeffs))

    def evaluate(self, s):
        return self.eval_w(complex_power(s, self.alpha))

    def to_dict(self) -> dict:
        return {"alpha": _order_json(self.alpha), "coeffs": [_complex_json(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "PseudoPolynomial":
        try:
            return cls(as_order(d["alpha"]), tuple(_parse_complex(c) for c in d["coeffs"]))
        except (KeyError, TypeError) as exc:
            raise ParseError("bad pseudo polynomial %r" % (d,)) from exc


def pseudo_roots(p: PseudoPolynomial) -> np.ndarray:
    """Roots in the w-plane, with multiplicity.

    Eigenvalues of the (balanced) companion matrix, then one Newton step per
    root, kept only where it lowers the residual.
    """
    c = np.asarray(p.coeffs, dtype=complex)
    n = len(c) - 1
    if n < 1:
        raise NoRootsError("degree-0 pseudo polynomial has no roots")
    monic = c[:-1] / c[-1]
    comp = np.zeros((n, n), dtype=complex)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -monic
    if np.all(monic.imag == 0):
        comp = comp.real
    roots = scipy.linalg.eigvals(comp)  # LAPACK geev balances by default

    dc = np.polynomial.polynomial.polyder(c)
    val = np.polynomial.polynomial.polyval(roots, c)
    der = np.polynomial.polynomial.polyval(roots, dc)
    with np.errstate(divide="ignore", invalid="ignore"):
        polished = roots - val / der
    newval = np.polynomial.polynomial.polyval(polished, c)
    better = np.isfinite(polished) & (np.abs(newval) < np.abs(val))
    roots = np.where(better, polished, roots)

    scale = np.max(np.abs(c))
    resid = np.abs(np.polynomial.polynomial.polyval(roots, c))
    # residual bound is relative to coefficient size and root magnitude
    bound = ROOT_RESIDUAL_TOL * scale * np.maximum(1.0, np.abs(roots)) ** n
    if np.any(resid > bound):
        raise NoRootsError("root polishing failed; residual %.3g" % resid.max())
    return roots


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    alpha: Order
    roots: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)
    min_margin: float
    indeterminate: bool = False

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "indeterminate": self.indeterminate,
            "alpha": _order_json(self.alpha),
            "min_margin_rad": self.min_margin,
            "roots": [_complex_json(r) for r in self.roots],
        }


def sector_margins(roots, alpha) -> np.ndarray:
    """``|arg(w)| - alpha*pi/2`` per root; roots at the origin sit on the boundary
    from the unstable side."""
    r = np.asarray(roots, dtype=complex)
    half = float(alpha) * math.pi / 2
    scale = max(1.0, float(np.max(np.abs(r)))) if r.size else 1.0
    at_origin = np.abs(r) <= 1e-12 * scale
    args = np.abs(np.angle(r))
    args = np.where((r.imag == 0) & (r.real < 0), math.pi, args)
    return np.where(at_origin, -half, args - half)


def verdict_from_roots(roots, alpha) -> StabilityVerdict:
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return StabilityVerdict(True, alpha, roots, np.array([]), math.inf)
    margins = sector_margins(roots, alpha)
    min_margin = float(np.min(margins))
    indeterminate = bool(np.any(np.abs(margins) <= SECTOR_TOL))
    stable = bool(min_margin > 0 and not indeterminate)
    return StabilityVerdict(stable, alpha, roots, margins, min_margin, indeterminate)


def matignon_stable(den: PseudoPolynomial) -> StabilityVerdict:
    """Stable iff every root w of ``den`` has ``|arg w| > alpha*pi/2``."""
    if den.degree == 0:
        return verdict_from_roots([], den.alpha)
    return verdict_from_roots(pseudo_roots(den), den.alpha)


# ---------------------------------------------------------------------------
# factors


class _FactorBase:
    kind: ClassVar[str]

    def evaluate(self, s):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Gain(_FactorBase):
    g: float
    kind: ClassVar[str] = "gain"

    def evaluate(self, s):
        return np.full(np.shape(s), complex(self.g))

    def to_dict(self):
        return {"kind": self.kind, "g": float(self.g)}


@dataclass(frozen=True)
class Monomial(_FactorBase):
    """``s**exponent``."""

    exponent: Order
    kind: ClassVar[str] = "monomial"

    def __post_init__(self):
        object.__setattr__(self, "exponent", as_order(self.exponent))

    def evaluate(self, s):
        e = float(self.exponent)
        if e.is_integer():
            return np.asarray(s, dtype=complex) ** int(e)
        return complex_power(s, e)

    def to_dict(self):
        return {"kind": self.kind, "exponent": _order_json(self.exponent)}


@dataclass(frozen=True)
class ExplicitX(_FactorBase):
    """Explicit pseudo zero (k=1) or pole (k=-1): ``(1 - s**alpha / z**alpha)**k``.

    ``z**alpha`` is the principal root, so for real z > 0 this is
    ``(1 - (s/z)**alpha)**k``.  With ``pair`` the conjugate factor is included.
    """

    z: complex
    alpha: Order
    k: int = 1
    pair: bool = False
    kind: ClassVar[str] = "explicit_x"

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "alpha", as_order(self.alpha))
        if self.k not in (-1, 1):
            raise DomainError("k must be +1 or -1")
        if not 0 < float(self.alpha) <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        if self.z == 0:
            raise DomainError("z must be nonzero")

    def _single(self, sa, z):
        return 1.0 - sa / complex_power(z, self.alpha)

    def evaluate(self, s):
        sa = complex_power(s, self.alpha)
        val = self._single(sa, self.z)
        if self.pair:
            val = val * self._single(sa, self.z.conjugate())
        return val if self.k == 1 else 1.0 / val

    def to_dict(self):
        return {"kind": self.kind, "z": _complex_json(self.z), "alpha": _order_json(self.alpha),
                "k": self.k, "pair": self.pair}


@dataclass(frozen=True)
class PseudoPoly(_FactorBase):
    """A pseudo polynomial raised to ``k`` in {-1, +1}."""

    poly: PseudoPolynomial
    k: int = 1
    kind: ClassVar[str] = "pseudo_poly"

    def __post_init__(self):
        if self.k not in (-1, 1):
            raise DomainError("k must be +1 or -1")

    def evaluate(self, s):
        val = self.poly.evaluate(s)
        if self.k == 1:
            return val
        if np.any(val == 0):
            raise SingularityError("pseudo polynomial vanishes on the grid")
        return 1.0 / val

    def to_dict(self):
        d = {"kind": self.kind, "k": self.k}
        d.update(self.poly.to_dict())
        return d


@dataclass(frozen=True)
class ImplicitPower(_FactorBase):
    """``(1 - s/z)**exponent`` or, mirrored, ``(1 + s/z)**exponent``.

    With ``pair`` the conjugate binomial (same exponent) is multiplied in, e.g.
    ``((s**2 + 2 s w0 cos(phi) + w0**2) / w0**2)**exponent`` for the mirrored pair.
    """

    z: complex
    exponent: Order
    pair: bool = False
    mirrored: bool = False
    kind: ClassVar[str] = "implicit_power"

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "exponent", as_order(self.exponent))
        if self.z == 0:
            raise DomainError("z must be nonzero")

    @property
    def sign(self) -> int:
        return 1 if self.mirrored else -1

    def _single(self, s, z):
        base = 1.0 + self.sign * np.asarray(s, dtype=complex) / z
        e = float(self.exponent)
        if e.is_integer():
            if e < 0 and np.any(base == 0):
                raise SingularityError("binomial vanishes on the grid")
            return base ** int(e)
        return complex_power(base, e)

    def evaluate(self, s):
        val = self._single(s, self.z)
        if self.pair:
            val = val * self._single(s, self.z.conjugate())
        return val

    def to_dict(self):
        return {"kind": self.kind, "z": _complex_json(self.z), "exponent": _order_json(self.exponent),
                "pair": self.pair, "mirrored": self.mirrored}


@dataclass(frozen=True)
class IORational(_FactorBase):
    """Integer-order rational factor, real coefficients in ascending powers of s."""

    num: tuple
    den: tuple = (1.0,)
    kind: ClassVar[str] = "io_rational"

    def __post_init__(self):
        num = tuple(float(x) for x in self.num)
        den = tuple(float(x) for x in self.den)
        if not any(den):
            raise DomainError("denominator is identically zero")
        if not all(map(math.isfinite, num + den)):
            raise DomainError("non-finite coefficient")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def evaluate(self, s):
        s = np.asarray(s, dtype=complex)
        d = np.polynomial.polynomial.polyval(s, np.asarray(self.den))
        scale = np.polynomial.polynomial.polyval(np.abs(s), np.abs(np.asarray(self.den)))
        bad = np.abs(d) <= 1e-14 * scale
        if np.any(bad):
            w = np.atleast_1d(np.abs(s))[np.atleast_1d(bad)][0]
            raise SingularityError("io_rational factor has a pole at omega=%g" % w, omega=float(w))
        return np.polynomial.polynomial.polyval(s, np.asarray(self.num)) / d

    def to_dict(self):
        return {"kind": self.kind, "num": list(self.num), "den": list(self.den)}


Factor = Union[Gain, Monomial, ExplicitX, PseudoPoly, ImplicitPower, IORational]
FACTOR_KINDS = {cls.kind: cls for cls in (Gain, Monomial, ExplicitX, PseudoPoly, ImplicitPower, IORational)}


def factor_from_dict(d: dict) -> Factor:
    if not isinstance(d, dict) or "kind" not in d:
        raise ParseError("factor must be an object with a 'kind' field: %r" % (d,))
    kind = d["kind"]
    try:
        if kind == "gain":
            return Gain(float(d["g"]))
        if kind == "monomial":
            return Monomial(as_order(d["exponent"]))
        if kind == "explicit_x":
            return ExplicitX(_parse_complex(d["z"]), as_order(d["alpha"]), int(d.get("k", 1)),
                             bool(d.get("pair", False)))
        if kind == "pseudo_poly":
            return PseudoPoly(PseudoPolynomial.from_dict(d), int(d.get("k", 1)))
        if kind == "implicit_power":
            return ImplicitPower(_parse_complex(d["z"]), as_order(d["exponent"]),
                                 bool(d.get("pair", False)), bool(d.get("mirrored", False)))
        if kind == "io_rational":
            return IORational(tuple(d["num"]), tuple(d.get("den", (1.0,))))
    except (KeyError, TypeError) as exc:
        raise ParseError("malformed %s factor: %r" % (kind, d)) from exc
    except DomainError as exc:
        raise ParseError("invalid %s factor: %s" % (kind, exc)) from exc
    raise ParseError("unknown factor kind %r" % (kind,))


@dataclass(frozen=True)
class FactoredTf:
    """Product of factors; ``negated`` flips the overall sign."""

    factors: tuple = ()
    negated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def evaluate(self, s):
        s = np.asarray(s, dtype=complex)
        val = np.ones(s.shape, dtype=complex)
        for f in self.factors:
            val = val * f.evaluate(s)
        return -val if self.negated else val

    def __mul__(self, other):
        if isinstance(other, FactoredTf):
            return FactoredTf(self.factors + other.factors, self.negated ^ other.negated)
        if isinstance(other, _FactorBase):
            return FactoredTf(self.factors + (other,), self.negated)
        return NotImplemented

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"factors": [f.to_dict() for f in self.factors], "negated": self.negated}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "FactoredTf":
        if not isinstance(d, dict) or not isinstance(d.get("factors"), list):
            raise ParseError("transfer function must be an object with a 'factors' list")
        return cls(tuple(factor_from_dict(f) for f in d["factors"]), bool(d.get("negated", False)))

    @classmethod
    def from_json(cls, text: str) -> "FactoredTf":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError("invalid JSON: %s" % exc) from exc


def as_factored(tf) -> FactoredTf:
    if isinstance(tf, FactoredTf):
        return tf
    if isinstance(tf, _FactorBase):
        return FactoredTf((tf,))
    if isinstance(tf, Iterable):
        return FactoredTf(tuple(tf))
    raise TypeError("cannot interpret %r as a transfer function" % (tf,))


# ---------------------------------------------------------------------------
# frequency response


@dataclass(frozen=True)
class FrequencyResponse:
    omega: np.ndarray
    values: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        """Phase in degrees, unwrapped from the lowest grid frequency."""
        return np.degrees(np.unwrap(np.angle(self.values)))


def check_grid(grid: Sequence[float]) -> np.ndarray:
    w = np.asarray(grid, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("frequency grid must be a non-empty 1-d sequence")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise DomainError("frequencies must be finite and strictly positive")
    if np.any(np.diff(w) <= 0):
        raise DomainError("frequency grid must be strictly increasing")
    return w


def log_grid(wmin: float, wmax: float, points_per_decade: int = 100) -> np.ndarray:
    n = max(2, int(math.ceil(math.log10(wmax / wmin) * points_per_decade)) + 1)
    return np.logspace(math.log10(wmin), math.log10(wmax), n)


def eval_freq(tf, grid) -> FrequencyResponse:
    w = check_grid(grid)
    return FrequencyResponse(w, as_factored(tf).evaluate(1j * w))


# ---------------------------------------------------------------------------
# commensurate rational form


def commensurate_order(tf) -> Fraction:
    """Largest ``1/L`` such that every order in ``tf`` is an integer multiple of it."""
    tf = as_factored(tf)
    dens = [1]
    for f in tf.factors:
        orders = []
        if isinstance(f, Monomial):
            orders = [f.exponent]
        elif isinstance(f, ExplicitX):
            orders = [f.alpha]
        elif isinstance(f, PseudoPoly):
            orders = [f.poly.alpha]
        elif isinstance(f, ImplicitPower):
            if not float(f.exponent).is_integer():
                raise UnsupportedFactorError(
                    "implicit factor %r is not a rational function of s**alpha; approximate it first" % (f,))
        for o in orders:
            r = rationalize(o)
            if r is None:
                raise NotCommensurateError("order %r is not rational" % (o,))
            dens.append(r.denominator)
    lcm = 1
    for d in dens:
        lcm = lcm * d // math.gcd(lcm, d)
    if lcm > 1000:
        raise NotCommensurateError("commensurate base order 1/%d is too fine" % lcm)
    return Fraction(1, lcm)


def _spread(coeffs, step: int) -> np.ndarray:
    out = np.zeros((len(coeffs) - 1) * step + 1, dtype=complex)
    out[::step] = coeffs
    return out


def pseudo_rational(tf, alpha: Fraction | None = None) -> tuple[np.ndarray, np.ndarray, Fraction]:
    """``tf`` as ``num(w)/den(w)`` with ``w = s**alpha`` (ascending coefficients).

    Implicit factors with non-integer exponents are not rational in w and raise
    :class:`UnsupportedFactorError`.
    """
    tf = as_factored(tf)
    base = commensurate_order(tf)
    if alpha is None:
        alpha = base
    alpha = Fraction(alpha)
    if alpha.numerator != 1:
        raise NotCommensurateError("base order must be 1/L, got %s" % alpha)
    L = alpha.denominator
    if L % base.denominator:
        raise NotCommensurateError("order %s is not a multiple of %s" % (base, alpha))

    def steps(order) -> int:
        q = rationalize(order) / alpha
        if q.denominator != 1:
            raise NotCommensurateError("order %s is not a multiple of %s" % (order, alpha))
        return int(q)

    P_ = np.polynomial.polynomial
    num = np.array([-1.0 + 0j if tf.negated else 1.0 + 0j])
    den = np.array([1.0 + 0j])
    for f in tf.factors:
        if isinstance(f, Gain):
            fn, fd = np.array([complex(f.g)]), np.ones(1)
        elif isinstance(f, Monomial):
            m = steps(f.exponent)
            mono = _spread([0, 1], abs(m))
            fn, fd = (mono, np.ones(1)) if m >= 0 else (np.ones(1), mono)
        elif isinstance(f, ExplicitX):
            q = steps(f.alpha)
            fn = np.ones(1, complex)
            for zz in ((f.z, f.z.conjugate()) if f.pair else (f.z,)):
                fn = P_.polymul(fn, _spread([1.0, -1.0 / complex_power(zz, f.alpha)], q))
            fd = np.ones(1)
            if f.k == -1:
                fn, fd = fd, fn
        elif isinstance(f, PseudoPoly):
            fn, fd = _spread(np.asarray(f.poly.coeffs), steps(f.poly.alpha)), np.ones(1)
            if f.k == -1:
                fn, fd = fd, fn
        elif isinstance(f, ImplicitPower):
            e = int(float(f.exponent))
            fn = np.ones(1, complex)
            for zz in ((f.z, f.z.conjugate()) if f.pair else (f.z,)):
                fn = P_.polymul(fn, P_.polypow(_spread([1.0, f.sign / zz], L), abs(e)))
            fd = np.ones(1)
            if e < 0:
                fn, fd = fd, fn
        elif isinstance(f, IORational):
            fn, fd = _spread(np.asarray(f.num, complex), L), _spread(np.asarray(f.den, complex), L)
        else:
            raise UnsupportedFactorError("unsupported factor %r" % (f,))
        num = P_.polymul(num, fn)
        den = P_.polymul(den, fd)
    return _trim_c(num), _trim_c(den), alpha


def _trim_c(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(c) > 0)
    return c[: nz[-1] + 1] if nz.size else c[:1]
