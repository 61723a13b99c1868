"""Complex special-function kernels with explicit branch bookkeeping.

Points that live on a Riemann surface are passed as :class:`SectorArg`, a value
together with the continuous argument chosen for it. Everything that depends on
the sheet (powers of z, the logarithmic part of K_1, the Tricomi function) reads
the argument from there, never from ``cmath.phase``.

Kernels
-------
* :func:`gamma` - complex Gamma (scipy backend, pole check).
* :func:`whittaker_M`, :func:`whittaker_W` - via Kummer M(a, b, z) and Tricomi
  U(a, b, z). Power series near the origin, the Poincare series for U at
  ``|z| >= WHITTAKER_ASYMPTOTIC_RADIUS``, and Taylor continuation of the Kummer
  equation along numerically stable paths in between.
* :func:`bessel_I1`, :func:`bessel_K1` - principal values from scipy's AMOS
  wrappers, continued to other sheets by the standard rotation formulas.
* :func:`bessel_continuation` - the same continuation obtained by recursing on
  the three-term K_1 identity, a second route used as a cross-check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special as _sp

from .errors import BranchError, OriginSingularityError, PoleError

WHITTAKER_ASYMPTOTIC_RADIUS = 40.0
BESSEL_SWITCH_RADIUS = 30.0
_SERIES_RADIUS = 2.0
_MAX_TAYLOR_STEP = 2.0
_MAX_BRANCH_WHITTAKER = 1.5 * math.pi
_MAX_BRANCH_BESSEL = 2.5 * math.pi
_EPS = 1e-17


@dataclass(frozen=True)
class SectorArg:
    """A complex number together with a chosen continuous argument."""

    value: complex
    branch_arg: float

    def __post_init__(self):
        v = complex(self.value)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "branch_arg", float(self.branch_arg))
        if not (math.isfinite(v.real) and math.isfinite(v.imag) and math.isfinite(self.branch_arg)):
            raise ValueError("SectorArg requires finite value and argument")
        r = abs(v)
        if r > 0.0:
            rebuilt = r * complex(math.cos(self.branch_arg), math.sin(self.branch_arg))
            if abs(rebuilt - v) > 1e-12 * r:
                raise BranchError(f"branch_arg {self.branch_arg} does not match value {v}")

    @classmethod
    def principal(cls, z: complex) -> "SectorArg":
        z = complex(z)
        return cls(z, cmath.phase(z))

    @classmethod
    def polar(cls, r: float, theta: float) -> "SectorArg":
        return cls(r * complex(math.cos(theta), math.sin(theta)), theta)

    @property
    def modulus(self) -> float:
        return abs(self.value)

    def log(self) -> complex:
        if self.value == 0:
            raise OriginSingularityError("logarithm at the origin")
        return complex(math.log(abs(self.value)), self.branch_arg)

    def power(self, p: complex) -> complex:
        """z**p on this sheet."""
        return cmath.exp(complex(p) * self.log())

    def rotate(self, turns_of_pi: int) -> "SectorArg":
        """The point z * exp(i pi m) on the sheet with argument shifted by m pi."""
        return SectorArg.polar(self.modulus, self.branch_arg + turns_of_pi * math.pi)

    def scale(self, c: float) -> "SectorArg":
        """Multiply by a positive real, keeping the sheet."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return SectorArg(self.value * c, self.branch_arg)


ArgLike = Union[SectorArg, complex, float, int]


def as_sector(z: ArgLike) -> SectorArg:
    return z if isinstance(z, SectorArg) else SectorArg.principal(complex(z))


# --------------------------------------------------------------------------- Gamma


def _is_nonpositive_integer(z: complex, tol: float = 0.0) -> bool:
    z = complex(z)
    return abs(z.imag) <= tol and z.real <= tol and abs(z.real - round(z.real)) <= tol


def gamma(z: complex) -> complex:
    """Complex Gamma function. Raises :class:`PoleError` at 0, -1, -2, ..."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at {z}")
    return complex(_sp.gamma(z))


def rgamma(z: complex) -> complex:
    """1/Gamma(z), entire; zero at the poles of Gamma."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        return 0j
    return complex(_sp.rgamma(z))


# --------------------------------------------------------------- Kummer machinery


def _kummer_series(a: complex, b: complex, z: complex) -> tuple[complex, complex]:
    """M(a, b, z) and dM/dz by the defining power series (small |z| only)."""
    term, dterm = 1 + 0j, a / b
    total, dtotal = term, dterm
    n = 0
    while True:
        term *= (a + n) / (b + n) * z / (n + 1)
        dterm *= (a + n + 1) / (b + n + 1) * z / (n + 1)
        total += term
        dtotal += dterm
        n += 1
        if n > 8 and abs(term) <= _EPS * abs(total) and abs(dterm) <= _EPS * max(abs(dtotal), 1e-300):
            break
        if n > 2000:
            break
    return total, dtotal


def _taylor_step(a, b, z0, y, yp, h):
    """One Taylor step of z y'' + (b - z) y' - a y = 0 from z0 to z0 + h."""
    d_prev, d_cur = y, yp * h
    total = d_prev + d_cur
    dtotal = d_cur
    small = 0
    n = 0
    scale = abs(y) + abs(yp * h)
    while True:
        d_next = (-(n + 1) * (n + b - z0) * h * d_cur + (n + a) * h * h * d_prev) / (z0 * (n + 1) * (n + 2))
        total += d_next
        dtotal += (n + 2) * d_next
        scale = max(scale, abs(d_next))
        if abs(d_next) <= _EPS * max(abs(total), 1e-300) or abs(d_next) <= 1e-300 + 1e-19 * scale:
            small += 1
            if small >= 3:
                break
        else:
            small = 0
        d_prev, d_cur = d_cur, d_next
        n += 1
        if n > 4000:
            break
    return total, dtotal / h


def _continue_radial(a, b, y, yp, theta, r0, r1):
    """Continue along the ray arg z = theta from |z| = r0 to |z| = r1."""
    e = complex(math.cos(theta), math.sin(theta))
    r = r0
    while abs(r1 - r) > 1e-15 * max(r1, 1.0):
        step = min(0.5 * r, _MAX_TAYLOR_STEP, abs(r1 - r))
        step = step if r1 > r else -step
        y, yp = _taylor_step(a, b, r * e, y, yp, step * e)
        r += step
        if (step > 0 and r > r1) or (step < 0 and r < r1):
            r = r1
    return y, yp


def _continue_arc(a, b, y, yp, radius, theta0, theta1):
    """Continue along the circle |z| = radius from angle theta0 to theta1."""
    chord = min(0.5 * radius, _MAX_TAYLOR_STEP)
    n = max(1, int(math.ceil(abs(theta1 - theta0) * radius / chord)))
    thetas = np.linspace(theta0, theta1, n + 1)
    for th0, th1 in zip(thetas[:-1], thetas[1:]):
        z0 = radius * complex(math.cos(th0), math.sin(th0))
        z1 = radius * complex(math.cos(th1), math.sin(th1))
        y, yp = _taylor_step(a, b, z0, y, yp, z1 - z0)
    return y, yp


def _kummer_M(a: complex, b: complex, z: SectorArg) -> tuple[complex, complex]:
    """Kummer M(a, b, z) and its derivative (entire in z; sheet irrelevant)."""
    r, th = z.modulus, z.branch_arg
    if r <= _SERIES_RADIUS:
        return _kummer_series(a, b, z.value)
    z0 = _SERIES_RADIUS * complex(math.cos(th), math.sin(th))
    y, yp = _kummer_series(a, b, z0)
    return _continue_radial(a, b, y, yp, th, _SERIES_RADIUS, r)


def _tricomi_asymptotic(a: complex, b: complex, z: SectorArg) -> tuple[complex, complex]:
    """Poincare series for U(a, b, z) and U'(a, b, z) at large |z|."""
    zv = z.value
    c = a - b + 1
    s, ds = 1 + 0j, 1 + 0j
    term, dterm = 1 + 0j, 1 + 0j
    last, dlast = math.inf, math.inf
    for n in range(0, 400):
        term_next = term * (a + n) * (c + n) / ((n + 1) * (-zv))
        dterm_next = dterm * (a + 1 + n) * (c + n) / ((n + 1) * (-zv))
        if abs(term_next) > last and abs(dterm_next) > dlast:
            break
        last, dlast = abs(term_next), abs(dterm_next)
        s += term_next
        ds += dterm_next
        term, dterm = term_next, dterm_next
        if abs(term) < _EPS * abs(s) and abs(dterm) < _EPS * abs(ds):
            break
    za = z.power(-a)
    u = za * s
    up = -a * za / zv * ds
    return u, up


def _asymptotic_radius(a: complex, b: complex) -> float:
    return max(WHITTAKER_ASYMPTOTIC_RADIUS, 2.0 * (abs(a) + 1) * (abs(a - b + 1) + 1))


def _tricomi_U(a: complex, b: complex, z: SectorArg) -> tuple[complex, complex]:
    """Tricomi U(a, b, z) and U' on the sheet of ``z``, |arg z| <= 3 pi / 2.

    The recessive solution is carried inward from the asymptotic radius where
    that direction is stable (Re z >= 0 side) and carried around a small circle
    and outward otherwise, so that the contaminating solution always decays.
    """
    r, th = z.modulus, z.branch_arg
    R0 = _asymptotic_radius(a, b)
    if abs(th) <= 0.5 * math.pi:
        if r >= R0:
            return _tricomi_asymptotic(a, b, z)
        y, yp = _tricomi_asymptotic(a, b, SectorArg.polar(R0, th))
        return _continue_radial(a, b, y, yp, th, R0, r)
    y, yp = _tricomi_asymptotic(a, b, SectorArg.polar(R0, 0.0))
    rs = min(r, _SERIES_RADIUS)
    y, yp = _continue_radial(a, b, y, yp, 0.0, R0, rs)
    y, yp = _continue_arc(a, b, y, yp, rs, 0.0, th)
    if r > rs:
        y, yp = _continue_radial(a, b, y, yp, th, rs, r)
    return y, yp


def _check_whittaker_branch(z: SectorArg) -> None:
    if abs(z.branch_arg) > _MAX_BRANCH_WHITTAKER + 1e-12:
        raise BranchError(f"branch_arg {z.branch_arg:.6g} outside [-3pi/2, 3pi/2]")


def whittaker_M(kappa: complex, mu: complex, z: ArgLike, deriv: bool = False):
    """Whittaker M_{kappa,mu}(z) = e^{-z/2} z^{mu+1/2} M(mu-kappa+1/2, 1+2mu, z).

    With ``deriv=True`` returns ``(value, d/dz value)``.
    """
    z = as_sector(z)
    kappa, mu = complex(kappa), complex(mu)
    b = 1 + 2 * mu
    if _is_nonpositive_integer(b):
        raise PoleError(f"M_kappa,mu undefined for 1+2mu = {b}")
    _check_whittaker_branch(z)
    if z.value == 0:
        if (mu + 0.5).real > 0:
            return (0j, 0j) if deriv else 0j
        raise OriginSingularityError("M_kappa,mu singular at z = 0 for Re(mu) <= -1/2")
    a = mu - kappa + 0.5
    m, mp = _kummer_M(a, b, z)
    pref = cmath.exp(-0.5 * z.value) * z.power(mu + 0.5)
    val = pref * m
    if not deriv:
        return val
    return val, val * (-0.5 + (mu + 0.5) / z.value) + pref * mp


def whittaker_W(kappa: complex, mu: complex, z: ArgLike, deriv: bool = False):
    """Whittaker W_{kappa,mu}(z) = e^{-z/2} z^{mu+1/2} U(mu-kappa+1/2, 1+2mu, z).

    Recessive as z -> +infinity. Integer values of 2mu need no special casing
    because U is produced by continuation of its own asymptotic series.
    """
    z = as_sector(z)
    kappa, mu = complex(kappa), complex(mu)
    _check_whittaker_branch(z)
    if z.value == 0:
        raise OriginSingularityError("W_kappa,mu is singular at z = 0")
    a = mu - kappa + 0.5
    b = 1 + 2 * mu
    u, up = _tricomi_U(a, b, z)
    pref = cmath.exp(-0.5 * z.value) * z.power(mu + 0.5)
    val = pref * u
    if not deriv:
        return val
    return val, val * (-0.5 + (mu + 0.5) / z.value) + pref * up


def whittaker_wronskian(kappa: complex, mu: complex) -> complex:
    """Closed form W{M_{kappa,mu}, W_{kappa,mu}} = -Gamma(1+2mu)/Gamma(1/2+mu-kappa)."""
    return -gamma(1 + 2 * complex(mu)) * rgamma(0.5 + complex(mu) - complex(kappa))


# ------------------------------------------------------------------ modified Bessel


def _principal_reduce(z: SectorArg) -> tuple[int, complex]:
    """Integer m and principal point z0 with z = z0 e^{i m pi}, arg z0 in (-pi, pi]."""
    th = z.branch_arg
    if abs(th) > _MAX_BRANCH_BESSEL + 1e-12:
        raise BranchError(f"branch_arg {th:.6g} outside [-5pi/2, 5pi/2]")
    m = 0
    while th - m * math.pi > math.pi:
        m += 1
    while th - m * math.pi <= -math.pi:
        m -= 1
    phi = th - m * math.pi
    r = z.modulus
    z0 = complex(r * math.cos(phi), r * math.sin(phi))
    if phi == math.pi:
        z0 = complex(-r, 0.0)
    return m, z0


def _principal_bessel(z0: complex) -> tuple[complex, complex, complex, complex]:
    return (
        complex(_sp.iv(0, z0)),
        complex(_sp.iv(1, z0)),
        complex(_sp.kv(0, z0)),
        complex(_sp.kv(1, z0)),
    )


def _bessel_all(z: SectorArg) -> tuple[complex, complex, complex, complex]:
    """(I0, I1, K0, K1) on the sheet of z via rotation formulas."""
    m, z0 = _principal_reduce(z)
    i0, i1, k0, k1 = _principal_bessel(z0)
    sign = -1.0 if m % 2 else 1.0
    return (
        i0,
        sign * i1,
        k0 - m * math.pi * 1j * i0,
        sign * (k1 + m * math.pi * 1j * i1),
    )


def bessel_I1(z: ArgLike, deriv: bool = False):
    """Modified Bessel I_1 on the sheet of z (I_1 is single valued up to sign rules)."""
    z = as_sector(z)
    if z.value == 0:
        return (0j, 0.5 + 0j) if deriv else 0j
    i0, i1, _, _ = _bessel_all(z)
    if not deriv:
        return i1
    return i1, i0 - i1 / z.value


def bessel_K1(z: ArgLike, deriv: bool = False):
    """Modified Bessel K_1 on the sheet of z."""
    z = as_sector(z)
    if z.value == 0:
        raise OriginSingularityError("K_1 is singular at z = 0")
    _, _, k0, k1 = _bessel_all(z)
    if not deriv:
        return k1
    return k1, -k0 - k1 / z.value


def bessel_continuation(z: ArgLike) -> tuple[complex, complex]:
    """(K_1(z), I_1(z)) from principal-sheet K_1 values through the identities

        K_1(z) = -K_1(z e^{-2 pi i}) - 2 K_1(z e^{-pi i})
        I_1(z) = (K_1(z e^{-pi i}) + K_1(z)) / (pi i)

    (and their mirror images for negative arguments), applied recursively.
    """
    z = as_sector(z)
    if z.value == 0:
        raise OriginSingularityError("K_1 is singular at z = 0")
    if abs(z.branch_arg) > _MAX_BRANCH_BESSEL + 1e-12:
        raise BranchError(f"branch_arg {z.branch_arg:.6g} outside [-5pi/2, 5pi/2]")
    k1 = _k1_recursive(z)
    if z.branch_arg >= 0:
        i1 = (_k1_recursive(z.rotate(-1)) + k1) / (math.pi * 1j)
    else:
        i1 = -(_k1_recursive(z.rotate(1)) + k1) / (math.pi * 1j)
    return k1, i1


def _k1_recursive(z: SectorArg) -> complex:
    th = z.branch_arg
    if -math.pi < th <= math.pi:
        _, z0 = _principal_reduce(z)
        return complex(_sp.kv(1, z0))
    if th > math.pi:
        return -_k1_recursive(z.rotate(-2)) - 2 * _k1_recursive(z.rotate(-1))
    return -_k1_recursive(z.rotate(2)) - 2 * _k1_recursive(z.rotate(1))


def bessel_sector_leading(z: ArgLike, sector: str) -> tuple[complex, complex]:
    """Leading large-|z| forms of (K_1, I_1) used on the rays of the lambda plane.

    ``sector`` is one of ``"pi/2"``, ``"3pi/2"``, ``"-pi/2"``: the ray direction
    around which the form is meant. The algebraic prefactor z^{-1/2} is taken
    on the sheet of ``z``.
    """
    z = as_sector(z)
    zv = z.value
    zm = z.power(-0.5)
    ep, em = cmath.exp(zv), cmath.exp(-zv)
    ck = math.sqrt(math.pi / 2) * zm
    ci = zm / math.sqrt(2 * math.pi)
    if sector == "pi/2":
        return ck * em, ci * (ep - 1j * em)
    if sector == "3pi/2":
        return ck * (em - 2j * ep), -ci * (ep + 1j * em)
    if sector == "-pi/2":
        return ck * em, ci * (ep + 1j * em)
    raise ValueError(f"unknown sector {sector!r}")
