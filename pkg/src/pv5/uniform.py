"""Scalar reductions of the lambda-system and their special-function approximants.

Eliminating the first component of Y gives phi'' = F(eta) phi for
phi = C^{-1/2} Y_2, with

    F = A^2 + BC - A' + A C'/C + 3/4 (C'/C)^2 - 1/2 C''/C.

Near t = 0 (variable eta = lambda t) F is close to a Whittaker equation with
kappa = 1/2, mu = alpha/2; for large t (variable eta = lambda - 1/2, in the
two conjugated gauges) it is close to a modified Bessel problem. This module
evaluates both sides, the closed-form Stokes multipliers they lead to, and
the connection formula obtained by equating them.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import specialfn as sf
from ._rk import Path, integrate_path
from .errors import (
    BranchError,
    CZeroError,
    DomainViolationError,
    NoSolutionError,
    PoleError,
    SingularPointError,
)
from .lax import _segment_distance, lax_system
from .pvcore import PVState, alpha_whittaker
from .specialfn import SectorArg

GAUGES = ("direct", "tilde", "hat")


# ------------------------------------------------------------ scalar reduction


@dataclass(frozen=True)
class _Rational:
    """const + sum_j p_j / (x - x_j), with exact derivatives."""

    const: complex
    terms: tuple

    def __call__(self, x: complex, order: int = 0) -> complex:
        if order == 0:
            return self.const + sum(p / (x - xj) for xj, p in self.terms)
        if order == 1:
            return -sum(p / (x - xj) ** 2 for xj, p in self.terms)
        return 2 * sum(p / (x - xj) ** 3 for xj, p in self.terms)

    @property
    def is_zero(self) -> bool:
        return self.const == 0 and all(p == 0 for _, p in self.terms)


@dataclass
class ScalarODECoeffs:
    """phi'' = F(eta) phi for one gauge, with the model part split off."""

    variant: str
    state: PVState
    A: _Rational
    B: _Rational
    C: _Rational

    @property
    def t(self) -> float:
        return float(np.real(self.state.t))

    def lambda_of_eta(self, eta: complex) -> complex:
        return eta / self.state.t if self.variant == "direct" else eta + 0.5

    def F(self, eta: complex) -> complex:
        eta = complex(eta)
        c = self.C(eta)
        if c == 0:
            raise CZeroError(f"C vanishes at eta = {eta}")
        a, a1 = self.A(eta), self.A(eta, 1)
        r1, r2 = self.C(eta, 1) / c, self.C(eta, 2) / c
        return a * a + self.B(eta) * c - a1 + a * r1 + 0.75 * r1 * r1 - 0.5 * r2

    def model(self, eta: complex) -> complex:
        eta = complex(eta)
        s = self.state
        if self.variant == "direct":
            q = s.v * s.v * (1 - s.y) ** 2 / s.y - s.v * s.t
            return 0.25 + q / eta ** 2 - 0.5 / eta - 0.25 / eta ** 2
        return bessel_model_F(eta, self.t)

    def g(self, eta: complex) -> complex:
        """F minus the model equation; only its size is ever used."""
        return self.F(eta) - self.model(eta)


def scalar_reduce(gauge: str, state: PVState) -> ScalarODECoeffs:
    """F for the direct gauge (eta = lambda t) or the tilde/hat gauge (eta = lambda - 1/2)."""
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    system = lax_system(state, gauge)
    t = state.t
    entries = []
    for i, j in ((0, 0), (0, 1), (1, 0)):
        if gauge == "direct":
            # dY/deta = M(eta/t)/t: R/(lambda - p) / t = R/(eta - p t)
            ent = _Rational(system.lead[i, j] / t, tuple((p * t, R[i, j]) for p, R in system.residues.items()))
        else:
            ent = _Rational(system.lead[i, j], tuple((p - 0.5, R[i, j]) for p, R in system.residues.items()))
        entries.append(ent)
    A, B, C = entries
    if C.is_zero or np.allclose([C.const] + [p for _, p in C.terms], 0, atol=1e-300):
        raise CZeroError("the C entry vanishes identically")
    return ScalarODECoeffs(gauge, state, A, B, C)


def bessel_model_F(eta: complex, t: float) -> complex:
    """t^2 eta^2 / (4 (eta^2 - 1/4)) + 3 / (4 eta^2)."""
    return t * t * eta * eta / (4 * (eta * eta - 0.25)) + 0.75 / (eta * eta)


# ----------------------------------------------------------- model coefficients


@dataclass(frozen=True)
class ModelCoefficients:
    kind: str  # "small-t" or "large-t"
    c1: complex = 0j
    c2: complex = 0j
    c3: complex = 0j
    d1: complex = 0j
    d2: complex = 0j
    d3: complex = 0j
    e1: complex = 0j
    e2: complex = 0j
    e3: complex = 0j
    e4: complex = 0j
    M: complex = 0j

    def as_dict(self) -> dict:
        names = ("c1", "c2", "c3") if self.kind == "small-t" else ("d1", "d2", "d3", "e1", "e2", "e3", "e4", "M")
        return {n: complex(getattr(self, n)) for n in names}


def whittaker_model_coeffs(state: PVState, t: Optional[float] = None) -> ModelCoefficients:
    """c1 = beta Gamma(1+alpha)/(t Gamma(alpha/2)), c2 = beta Gamma(1+alpha)/Gamma(1+alpha/2) e^{-alpha pi i/2},
    c3 = beta, with beta^2 = v (1 - 1/y)/u (principal root) and alpha on the
    branch nearest the extracted sigma."""
    t = float(np.real(state.t)) if t is None else float(t)
    if state.y == 0 or state.u == 0:
        raise BranchError("beta undefined for y = 0 or u = 0")
    alpha = alpha_whittaker(state)
    if sf._is_nonpositive_integer(1 + alpha):
        raise PoleError(f"Gamma(1 + alpha) has a pole at alpha = {alpha}")
    beta = cmath.sqrt(state.v * (1 - 1 / state.y) / state.u)
    g1 = sf.gamma(1 + alpha)
    c1 = beta * g1 * sf.rgamma(alpha / 2) / t
    c2 = beta * g1 * sf.rgamma(1 + alpha / 2) * cmath.exp(-0.5j * math.pi * alpha)
    return ModelCoefficients("small-t", c1=c1, c2=c2, c3=beta)


def large_t_coeffs(t: float) -> ModelCoefficients:
    if not t > 0:
        raise ValueError("t must be positive")
    sp = math.sqrt(math.pi)
    d1 = 1j * sp * math.exp(t / 4)
    d2 = 1j / sp * math.exp(-t / 4)
    d3 = math.exp(t / 4) / sp
    e1, e2, e3, e4 = d1, -2j * math.pi * d2, d2, d3
    return ModelCoefficients("large-t", d1=d1, d2=d2, d3=d3, e1=e1, e2=e2, e3=e3, e4=e4, M=e1 * e3 + e2 * e4)


# ------------------------------------------------------ closed-form multipliers


def s1_small_t(sigma: complex, r: complex) -> complex:
    return -2j / r * cmath.sin(0.5 * math.pi * sigma)


def s2_small_t(sigma: complex, r: complex) -> complex:
    return -2j * r * cmath.sin(0.5 * math.pi * sigma)


def s1_large_t(u_hat: complex) -> complex:
    return 2j / u_hat


def s2_large_t(u_hat: complex) -> complex:
    return -2j * u_hat


def connection_candidates(u_hat: complex) -> list:
    """All (sigma, r) with 0 <= Re sigma < 1 matching both multiplier pairs.

    Equating the pairs gives r^2 = -u_hat^2 and sin(pi sigma/2) = -r/u_hat.
    """
    u_hat = complex(u_hat)
    if u_hat == 0 or not cmath.isfinite(u_hat):
        raise NoSolutionError("u_hat must be finite and nonzero")
    out = []
    for r in (-1j * u_hat, 1j * u_hat):
        w = -r / u_hat
        base = 2 / math.pi * cmath.asin(w)
        for root in (base, 2 - base):
            for k in range(-2, 3):
                s = root + 4 * k
                if -1e-12 <= s.real < 1 - 1e-12:
                    s = complex(0.0 if abs(s.real) < 1e-12 else s.real, s.imag)
                    if not any(abs(s - c[0]) < 1e-12 and abs(r - c[1]) < 1e-12 for c in out):
                        out.append((s, r))
    return out


def connection_solve(u_hat: complex) -> tuple[complex, complex]:
    """Principal solution: the candidate with Im sigma > 0 (then r = -i u_hat)."""
    cands = connection_candidates(u_hat)
    if not cands:
        raise NoSolutionError("no solution with 0 <= Re sigma < 1")
    return max(cands, key=lambda c: (c[0].imag, -c[0].real))


def connection_check(sigma: complex, r: complex, u_hat: complex) -> tuple[float, float]:
    return (
        abs(s1_small_t(sigma, r) - s1_large_t(u_hat)),
        abs(s2_small_t(sigma, r) - s2_large_t(u_hat)),
    )


# ---------------------------------------------------------------- model pairs


def _zeta(eta: SectorArg) -> SectorArg:
    """(eta^2 - 1/4)^{1/2} = eta (1 - 1/(4 eta^2))^{1/2}, positive for real eta > 1/2."""
    e = eta.value
    inner = cmath.sqrt(1 - 0.25 / (e * e))
    return SectorArg(e * inner, eta.branch_arg + cmath.phase(inner))


def _bessel_pair(eta: SectorArg, zeta: SectorArg, t: float):
    """((phi_+, phi_+'), (phi_-, phi_-')) for given sheets of eta and zeta."""
    e, zv = eta.value, zeta.value
    z = zeta.scale(0.5 * t)
    sqrt_eta = eta.power(0.5)
    P = zv / sqrt_eta
    dP = -0.5 * zv / (sqrt_eta * e) + e / (sqrt_eta * zv)
    dz = 0.5 * t * e / zv
    k, kp = sf.bessel_K1(z, deriv=True)
    i, ip = sf.bessel_I1(z, deriv=True)
    return (P * k, dP * k + P * kp * dz), (P * i, dP * i + P * ip * dz)


def bessel_model_solution(which: str, eta, t: float, deriv: bool = False):
    """phi_+ = eta^{-1/2} zeta K_1(t zeta/2), phi_- = eta^{-1/2} zeta I_1(t zeta/2),
    zeta = (eta^2 - 1/4)^{1/2}, on the sheet of ``eta``."""
    eta = sf.as_sector(eta)
    for p in (0.0, 0.5, -0.5):
        if abs(eta.value - p) < 1e-14:
            raise SingularPointError(f"eta = {p} is a turning or singular point")
    plus, minus = _bessel_pair(eta, _zeta(eta), t)
    val = {"plus": plus, "minus": minus}[which]
    return val if deriv else val[0]


def whittaker_model_solution(which: str, eta, mu: complex, deriv: bool = False):
    """M_{1/2,mu}(eta) ("M") or W_{1/2,mu}(eta) ("W")."""
    fn = {"M": sf.whittaker_M, "W": sf.whittaker_W}[which]
    return fn(0.5, mu, eta, deriv=deriv)


# ----------------------------------------------------------- approximant error


@dataclass(frozen=True)
class EtaRay:
    """Polyline in the eta plane, sampled uniformly by arc length.

    ``arg_start`` fixes the sheet at the first node; the argument is then
    continued along the path.
    """

    nodes: tuple
    samples: int = 120
    arg_start: Optional[float] = None

    def points(self) -> np.ndarray:
        nodes = np.array([complex(z) for z in self.nodes])
        seg = np.abs(np.diff(nodes))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = np.linspace(0.0, cum[-1], self.samples)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        frac = (s - cum[idx]) / seg[idx]
        return nodes[idx] + frac * (nodes[idx + 1] - nodes[idx])


def _continued_args(points: np.ndarray, arg0: float) -> np.ndarray:
    ph = np.unwrap(np.angle(points))
    return ph + (arg0 - ph[0])


def _touches_interval(nodes, lo: float, hi: float, margin: float = 0.0) -> bool:
    """Does the polyline meet the real interval [lo, hi]?"""
    for a, b in zip(nodes[:-1], nodes[1:]):
        a, b = complex(a), complex(b)
        if a.imag == b.imag:
            if abs(a.imag) <= margin and max(a.real, b.real) >= lo and min(a.real, b.real) <= hi:
                return True
            continue
        if a.imag * b.imag <= 0:
            s = a.imag / (a.imag - b.imag)
            x = a.real + s * (b.real - a.real)
            if lo - margin <= x <= hi + margin:
                return True
    return False


def _check_domain(gauge: str, nodes, t: float) -> None:
    if gauge == "tilde" and _touches_interval(nodes, 0.5, math.inf):
        raise DomainViolationError("tilde-gauge rays must avoid [1/2, +inf)")
    if gauge == "hat" and _touches_interval(nodes, -math.inf, -0.5):
        raise DomainViolationError("hat-gauge rays must avoid (-inf, -1/2]")
    bad = (0.0, t) if gauge == "direct" else (0.0, 0.5, -0.5)
    for a, b in zip(nodes[:-1], nodes[1:]):
        for p in bad:
            if _segment_distance(p, complex(a), complex(b)) < 1e-6:
                raise DomainViolationError(f"ray passes through the singular point {p}")


def default_arg(gauge: str, eta0: complex) -> float:
    """Sheet at the first node: arg in (0, 2pi) for tilde, principal otherwise."""
    a = cmath.phase(eta0)
    if gauge == "tilde" and a <= 0:
        a += 2 * math.pi
    return a


def turning_point(state: PVState) -> complex:
    """eta_0 = 1 + (2 - alpha^2)^{1/2}, used only to place the base point of small-t rays."""
    a = alpha_whittaker(state)
    return 1 + cmath.sqrt(2 - a * a)


def default_ray(gauge: str, state: PVState, samples: int = 120) -> EtaRay:
    """Fixed rays on arg eta = pi/2: [i, 15i] near t = 0, [i/4, 10i] for large t."""
    if gauge == "direct":
        return EtaRay((1j, 15j), samples)
    return EtaRay((0.25j, 10j), samples)


@dataclass
class ApproximantReport:
    gauge: str
    t: float
    eta: np.ndarray
    numeric: np.ndarray
    fit: np.ndarray
    coefficients: tuple
    error: float
    model: str

    @property
    def relative_errors(self) -> np.ndarray:
        floor = 1e-12 * float(np.max(np.abs(self.fit)))
        return np.abs(self.numeric - self.fit) / np.maximum(np.abs(self.fit), floor)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_eta", "im_eta", "re_numeric", "im_numeric", "re_model", "im_model", "rel_error"])
        for e, n, f, r in zip(self.eta, self.numeric, self.fit, self.relative_errors):
            w.writerow([repr(e.real), repr(e.imag), repr(n.real), repr(n.imag), repr(f.real), repr(f.imag), repr(float(r))])
        return buf.getvalue()

    def summary(self) -> dict:
        c1, c2 = self.coefficients
        return {
            "gauge": self.gauge,
            "model": self.model,
            "t": self.t,
            "samples": len(self.eta),
            "C1": [c1.real, c1.imag],
            "C2": [c2.real, c2.imag],
            "max_relative_error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=1)


def _model_columns(gauge: str, state: PVState, pts: np.ndarray, args: np.ndarray, deriv_first: bool):
    """Sample matrix [phi_1, phi_2] on the ray and (value, derivative) data at its start."""
    t = float(np.real(state.t))
    cols = np.empty((len(pts), 2), dtype=complex)
    start = None
    if gauge == "direct":
        mu = 0.5 * alpha_whittaker(state)
        for k, (p, a) in enumerate(zip(pts, args)):
            e = SectorArg(p, a)
            m = whittaker_model_solution("M", e, mu, deriv=(k == 0))
            w = whittaker_model_solution("W", e, mu, deriv=(k == 0))
            if k == 0:
                start = (m, w)
                m, w = m[0], w[0]
            cols[k] = (m, w)
        return cols, start, f"whittaker(kappa=1/2, mu={mu:.6g})"
    zeta_prev = None
    for k, (p, a) in enumerate(zip(pts, args)):
        e = SectorArg(p, a)
        z = _zeta(e)
        if zeta_prev is not None:
            # keep zeta continuous along the ray
            if abs(z.value - zeta_prev.value) > abs(z.value + zeta_prev.value):
                z = z.rotate(1)
            za = z.branch_arg
            while za - zeta_prev.branch_arg > math.pi:
                za -= 2 * math.pi
            while za - zeta_prev.branch_arg < -math.pi:
                za += 2 * math.pi
            z = SectorArg(z.value, za)
        zeta_prev = z
        plus, minus = _bessel_pair(e, z, t)
        if k == 0:
            start = (plus, minus)
        cols[k] = (plus[0], minus[0])
    return cols, start, "bessel(K1, I1)"


def approximant_report(
    gauge: str,
    state: PVState,
    ray: Optional[EtaRay] = None,
    F: Optional[Callable[[complex], complex]] = None,
    rtol: float = 1e-11,
) -> ApproximantReport:
    """Integrate phi'' = F phi along the ray and fit C1 phi_1 + C2 phi_2 by least squares.

    The numerical solution starts from phi_1 + phi_2 data at the first node, so
    with the model equation in place of F the fit is exact. ``error`` is the
    largest pointwise relative deviation |phi - fit| / |fit| (with a floor of
    1e-12 max|fit| in the denominator).
    """
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    t = float(np.real(state.t))
    ray = ray or default_ray(gauge, state)
    _check_domain(gauge, ray.nodes, t)
    if F is None:
        F = scalar_reduce(gauge, state).F
    pts = ray.points()
    arg0 = ray.arg_start if ray.arg_start is not None else default_arg(gauge, pts[0])
    args = _continued_args(pts, arg0)
    cols, (a, b), model = _model_columns(gauge, state, pts, args, True)
    w = np.array([a[0] + b[0], a[1] + b[1]], dtype=complex)
    scale = float(np.max(np.abs(w)))

    def f(eta, x):
        return np.array([x[1], F(eta) * x[0]])

    numeric = np.empty(len(pts), dtype=complex)
    numeric[0] = w[0]
    for k in range(1, len(pts)):
        w, _ = integrate_path(f, Path.segment(pts[k - 1], pts[k]), w, rtol, 1e-14 * scale)
        numeric[k] = w[0]
    coef, *_ = np.linalg.lstsq(cols, numeric, rcond=None)
    fit = cols @ coef
    rep = ApproximantReport(gauge, t, pts, numeric, fit, (complex(coef[0]), complex(coef[1])), 0.0, model)
    rep.error = float(np.max(rep.relative_errors))
    return rep


def approximant_error(
    gauge: str,
    state: PVState,
    ray: Optional[EtaRay] = None,
    F: Optional[Callable[[complex], complex]] = None,
) -> float:
    return approximant_report(gauge, state, ray, F).error


NEGATIVE_CONTROL_RAY = EtaRay((0.5 + 1j, 0.5 + 1e-4j), 120)
NON_CONVERGENCE_LEVEL = 0.1
