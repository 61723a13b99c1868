"""The linear side: the lambda-system, its gauges, canonical frames and Stokes data.

The spectral system is

    dY/dlambda = [ (t/2) sigma_3 + A_0/lambda + A_1/(lambda-1) ] Y

with residues A_0 = [[v, -uv], [v/u, -v]] and A_1 = [[-v, uyv], [-v/(uy), v]].
Canonical solutions are normalised at infinity as
``N (I + m_1/lambda + ...) exp(lambda t/2 sigma_3)``; the constant matrix N
is the identity for this system and the gauge matrix for the conjugated ones.

All propagation is done on the factored frame Z = Y exp(-lambda t/2 sigma_3),
whose equation Z' = M Z - (t/2) Z sigma_3 has no exponentially large
coefficients. Each frame is carried only through its own sector, towards a
meeting point on the real axis where neighbouring frames are compared.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._rk import Path, integrate_path
from .errors import (
    BranchError,
    RadiusTooSmallError,
    SingularPointError,
    StructureViolationError,
)
from .pvcore import PVState, Trajectory, system_rhs

SIGMA3 = np.diag([1.0 + 0j, -1.0 + 0j])
EXCLUSION_RADIUS = 0.05
_POLES = (0.0, 1.0)


@dataclass(frozen=True)
class LaxCoefficients:
    """Trace-free coefficient matrix [[a, b], [c, -a]]."""

    a: complex
    b: complex
    c: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, -self.a]], dtype=complex)


def _check_lambda(lam: complex) -> None:
    for p in _POLES:
        if lam == p:
            raise SingularPointError(f"lambda = {p} is a singular point")


def lax_matrix(lam: complex, state: PVState) -> LaxCoefficients:
    """Coefficients of the spectral system at lambda."""
    lam = complex(lam)
    _check_lambda(lam)
    t, y, v, u = state.t, state.y, state.v, state.u
    a = t / 2 + v / lam - v / (lam - 1)
    b = -u * v / lam + u * y * v / (lam - 1)
    c = (v / u) / lam - (v / (u * y)) / (lam - 1)
    return LaxCoefficients(a, b, c)


def _bar_coefficients(lam, state):
    t, y, v = state.t, state.y, state.v
    abar = t / 2 + v / lam - v / (lam - 1)
    bbar = -v / lam + v * y / (lam - 1)
    cbar = v / lam - v / (y * (lam - 1))
    return abar, bbar, cbar


def gauge_tilde_coefficients(lam: complex, state: PVState) -> LaxCoefficients:
    """Coefficients after Y -> [[1,0],[-1,1]] u^{-sigma_3/2} Y."""
    lam = complex(lam)
    _check_lambda(lam)
    abar, bbar, cbar = _bar_coefficients(lam, state)
    return LaxCoefficients(abar + bbar, bbar, cbar - bbar - 2 * abar)


def gauge_hat_coefficients(lam: complex, state: PVState) -> LaxCoefficients:
    """Coefficients after Y -> [[1,0],[1,1]] (-uy)^{-sigma_3/2} Y."""
    lam = complex(lam)
    _check_lambda(lam)
    t, y, v = state.t, state.y, state.v
    a = t / 2 + v * (1 - 1 / y) / lam
    b = v / (y * lam) - v / (lam - 1)
    c = t + (2 * v - v * y - v / y) / lam
    return LaxCoefficients(a, b, c)


def tilde_gauge_matrix(state: PVState) -> np.ndarray:
    """G = [[1,0],[-1,1]] u^{-sigma_3/2}."""
    h = cmath.exp(-0.5 * state.ln_u)
    return np.array([[1, 0], [-1, 1]], dtype=complex) @ np.diag([h, 1 / h])


def minus_uy_sqrt(state: PVState) -> complex:
    """(-uy)^{1/2} = i u^{1/2} y^{1/2} with y^{1/2} continued along the trajectory."""
    if state.sqrt_y is None:
        raise BranchError("(-uy)^{1/2} needs the continued branch of y^{1/2}")
    return 1j * cmath.exp(0.5 * state.ln_u) * state.sqrt_y


def hat_gauge_matrix(state: PVState) -> np.ndarray:
    """G = [[1,0],[1,1]] (-uy)^{-sigma_3/2}."""
    k = minus_uy_sqrt(state)
    return np.array([[1, 0], [1, 1]], dtype=complex) @ np.diag([1 / k, k])


@dataclass
class LaxSystem:
    """A rational 2x2 system lead + sum_p R_p/(lambda - p) with a frame normalisation.

    ``coefficients(lambda)`` evaluates the closed-form entries; the residues
    are recovered from it by exact interpolation so the formal series and the
    propagated equation can never drift apart.
    """

    state: PVState
    coefficients: Callable[[complex], LaxCoefficients]
    normalization: np.ndarray
    name: str = "direct"
    lead: np.ndarray = field(init=False)
    residues: dict = field(init=False)

    def __post_init__(self):
        # M(lambda) = L + R0/lambda + R1/(lambda-1): three samples determine L, R0, R1.
        nodes = (2.0, 3.0, -1.0)
        rows = np.array([[1.0, 1 / x, 1 / (x - 1)] for x in nodes])
        vals = np.array([self.coefficients(x).matrix() for x in nodes])
        sol = np.linalg.solve(rows, vals.reshape(3, 4)).reshape(3, 2, 2)
        self.lead = sol[0]
        self.residues = {0.0: sol[1], 1.0: sol[2]}

    def matrix(self, lam: complex) -> np.ndarray:
        return self.coefficients(complex(lam)).matrix()

    def rhs_factored(self, lam: complex, z: np.ndarray) -> np.ndarray:
        """Z' = M Z - (t/2) Z sigma_3 for the flattened 2x2 Z."""
        Z = z.reshape(2, 2)
        M = self.coefficients(lam).matrix()
        half_t = 0.5 * self.state.t
        out = M @ Z
        out[:, 0] -= half_t * Z[:, 0]
        out[:, 1] += half_t * Z[:, 1]
        return out.reshape(4)


def lax_system(state: PVState, gauge: str = "direct") -> LaxSystem:
    if gauge == "direct":
        return LaxSystem(state, lambda lam: lax_matrix(lam, state), np.eye(2, dtype=complex), "direct")
    if gauge == "tilde":
        return LaxSystem(state, lambda lam: gauge_tilde_coefficients(lam, state), tilde_gauge_matrix(state), "tilde")
    if gauge == "hat":
        return LaxSystem(state, lambda lam: gauge_hat_coefficients(lam, state), hat_gauge_matrix(state), "hat")
    raise ValueError(f"unknown gauge {gauge!r}")


def gauge_tilde(state: PVState) -> Callable[[complex], LaxCoefficients]:
    """lambda -> tilde-gauge coefficients."""
    if state.u == 0:
        raise ValueError("u must be nonzero")
    return lambda lam: gauge_tilde_coefficients(lam, state)


def gauge_hat(state: PVState) -> Callable[[complex], LaxCoefficients]:
    """lambda -> hat-gauge coefficients (requires a continued y^{1/2})."""
    minus_uy_sqrt(state)
    return lambda lam: gauge_hat_coefficients(lam, state)


# ------------------------------------------------------------- formal series


def formal_series(system: LaxSystem, order: int) -> list:
    """Coefficients m_0 = I, m_1, ..., m_order of the formal solution at infinity.

    Works on N^{-1} M N, whose leading term must be (t/2) sigma_3. Writing
    1/(lambda - p) = sum_j p^{j-1} lambda^{-j}, the coefficient of
    lambda^{-k-1} gives
        (t/2)[sigma_3, m_{k+1}] = -k m_k - sum_{j=1}^{k+1} N_j m_{k+1-j},
    whose off-diagonal part fixes m_{k+1} and diagonal part fixes diag m_k.
    """
    t = system.state.t
    N = system.normalization
    Ninv = np.linalg.inv(N)
    lead = Ninv @ system.lead @ N
    if np.max(np.abs(lead - 0.5 * t * SIGMA3)) > 1e-9 * max(1.0, abs(t)):
        raise ValueError("normalisation does not diagonalise the leading term")
    res = {p: Ninv @ R @ N for p, R in system.residues.items()}

    def Nj(j):
        acc = np.zeros((2, 2), dtype=complex)
        for p, R in res.items():
            if j == 1:
                acc += R
            elif p != 0.0:
                acc += R * p ** (j - 1)
        return acc

    NJ = [None] + [Nj(j) for j in range(1, order + 3)]
    m = [np.eye(2, dtype=complex)]

    def off_from(R):
        out = np.zeros((2, 2), dtype=complex)
        out[0, 1] = R[0, 1] / t
        out[1, 0] = -R[1, 0] / t
        return out

    m.append(off_from(-(NJ[1] @ m[0])))
    for k in range(1, order + 1):
        mk = m[k].copy()
        mk[0, 0] = mk[1, 1] = 0
        rest = NJ[1] @ mk + sum((NJ[j] @ m[k + 1 - j] for j in range(2, k + 2)), np.zeros((2, 2), complex))
        mk[0, 0] = -rest[0, 0] / (k + NJ[1][0, 0])
        mk[1, 1] = -rest[1, 1] / (k + NJ[1][1, 1])
        m[k] = mk
        R = -k * mk - NJ[1] @ mk - sum((NJ[j] @ m[k + 1 - j] for j in range(2, k + 2)), np.zeros((2, 2), complex))
        m.append(off_from(R))
    return m


def closed_form_m1(state: PVState) -> np.ndarray:
    """The 1/lambda coefficient written out in closed form."""
    t, y, v, u = state.t, state.y, state.v, state.u
    d = v - v * v * (1 - y) ** 2 / (t * y)
    return np.array([[d, u * v * (1 - y) / t], [v * (y - 1) / (u * y * t), -d]], dtype=complex)


# ------------------------------------------------------------ frames, contours


SECTOR_RAYS = {1: -0.5 * math.pi, 2: 0.5 * math.pi, 3: 1.5 * math.pi}


@dataclass(frozen=True)
class Contour:
    nodes: tuple
    sector: int

    def __post_init__(self):
        nodes = tuple(complex(z) for z in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 2:
            raise ValueError("a contour needs at least two nodes")
        for a, b in zip(nodes[:-1], nodes[1:]):
            for p in _POLES:
                if _segment_distance(p, a, b) < EXCLUSION_RADIUS:
                    raise SingularPointError(f"segment {a}->{b} passes within {EXCLUSION_RADIUS} of {p}")


def _segment_distance(p, a, b) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    s = min(1.0, max(0.0, ((p - a) * d.conjugate()).real / abs(d) ** 2))
    return abs(p - (a + s * d))


@dataclass
class CanonicalFrame:
    """Factored frame Z = Y exp(-lambda t/2 sigma_3) at ``lam``."""

    lam: complex
    Yhat: np.ndarray
    sector: int
    truncation: float = 0.0
    det_drift: float = 0.0

    def full(self, t: float) -> np.ndarray:
        e = cmath.exp(0.5 * self.lam * t)
        return self.Yhat @ np.diag([e, 1 / e])


def r_min(t: float) -> float:
    return max(50.0, 200.0 / abs(t))


def canonical_frame(
    state: PVState,
    sector: int,
    R: float,
    order: int = 8,
    gauge: str = "direct",
    tol: float = 1e-8,
    system: Optional[LaxSystem] = None,
) -> CanonicalFrame:
    """Canonical frame of the given sector at |lambda| = R on its central ray.

    The formal series is summed to ``order``; the size of the next term is
    attached as ``truncation`` and must not exceed ``tol``.
    """
    if sector not in SECTOR_RAYS:
        raise ValueError("sector must be 1, 2 or 3")
    system = system or lax_system(state, gauge)
    m = formal_series(system, order + 1)
    # sectors 1 and 3 share the point -iR; they differ only by sheet
    lam = complex(0.0, R) if sector == 2 else complex(0.0, -R)
    S = sum((m[k] / lam ** k for k in range(order + 1)), np.zeros((2, 2), complex))
    trunc = float(np.max(np.abs(m[order + 1]))) / R ** (order + 1)
    if trunc > tol:
        raise RadiusTooSmallError(f"R={R}: truncation estimate {trunc:.3g} exceeds {tol:g}")
    return CanonicalFrame(lam, system.normalization @ S, sector, trunc)


def propagate(
    frame: CanonicalFrame,
    contour: Contour,
    state: PVState,
    gauge: str = "direct",
    rtol: float = 1e-11,
    atol: float = 1e-13,
    system: Optional[LaxSystem] = None,
) -> CanonicalFrame:
    """Carry a factored frame along the contour (first node must be frame.lam)."""
    system = system or lax_system(state, gauge)
    if abs(contour.nodes[0] - frame.lam) > 1e-9 * max(1.0, abs(frame.lam)):
        raise ValueError("contour must start at the frame point")
    z = frame.Yhat.reshape(4).astype(complex)
    det0 = np.linalg.det(frame.full(state.t))
    for a, b in zip(contour.nodes[:-1], contour.nodes[1:]):
        z, _ = integrate_path(system.rhs_factored, Path.segment(a, b), z, rtol, atol)
    Z = z.reshape(2, 2)
    end = contour.nodes[-1]
    out = CanonicalFrame(end, Z, frame.sector, frame.truncation)
    det1 = np.linalg.det(out.full(state.t))
    out.det_drift = float(abs(det1 - det0) / max(abs(det0), 1e-300))
    return out


def _inv2(A: np.ndarray) -> np.ndarray:
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det


def _stokes_at(Za: np.ndarray, Zb: np.ndarray, lam: complex, t: float) -> np.ndarray:
    X = _inv2(Za) @ Zb
    e = cmath.exp(lam * t)
    return np.array([[X[0, 0], X[0, 1] / e], [X[1, 0] * e, X[1, 1]]])


@dataclass
class StokesData:
    s1: complex
    s2: complex
    t_used: float
    diagnostics: dict

    def to_record(self) -> dict:
        def enc(x):
            if isinstance(x, complex):
                return [x.real, x.imag]
            if isinstance(x, dict):
                return {k: enc(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [enc(v) for v in x]
            if isinstance(x, np.generic):
                return enc(x.item())
            return x

        return {"s1": enc(complex(self.s1)), "s2": enc(complex(self.s2)), "t": self.t_used,
                "diagnostics": enc(self.diagnostics)}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=1)


def stokes_contours(R: float) -> dict:
    """Legs from each central ray to the meeting points 3/2 (for S_1) and -1/2 (for S_2).

    Each canonical frame is carried only through its own sector towards a
    meeting point near the origin, where the multiplier is read off; the
    multipliers do not depend on the point at which the frames are compared.
    """
    return {
        "S1_from_1": Contour((complex(0, -R), 1.5 - 0.5j, 1.5 + 0j), 1),
        "S1_from_2": Contour((complex(0, R), 1.5 + 0.5j, 1.5 + 0j), 2),
        "S2_from_2": Contour((complex(0, R), -0.5 + 0.5j, -0.5 + 0j), 2),
        "S2_from_3": Contour((complex(0, -R), -0.5 - 0.5j, -0.5 + 0j), 3),
    }


def stokes_multipliers(
    state: PVState,
    R: Optional[float] = None,
    gauge: str = "direct",
    order: int = 8,
    rtol: float = 1e-11,
    atol: float = 1e-13,
    tol: float = 1e-6,
) -> StokesData:
    """s_1 = (S_1)_{21}, s_2 = (S_2)_{12} with Y^{(k+1)} = Y^{(k)} S_k.

    Y^{(1)} lives on arg lambda = -pi/2, Y^{(2)} on pi/2 and Y^{(3)} on 3pi/2
    (the point -iR on the next sheet). Y^{(1)} and Y^{(2)} are compared at
    lambda = 3/2, to the right of both singular points; Y^{(2)} and Y^{(3)}
    at lambda = -1/2, to the left of both.
    """
    t = float(np.real(state.t))
    R = r_min(t) if R is None else float(R)
    system = lax_system(state, gauge)
    legs = stokes_contours(R)
    frames = {k: canonical_frame(state, k, R, order, system=system) for k in (1, 2, 3)}
    ends = {}
    for name, contour in legs.items():
        ends[name] = propagate(frames[contour.sector], contour, state, rtol=rtol, atol=atol, system=system)
    S1 = _stokes_at(ends["S1_from_1"].Yhat, ends["S1_from_2"].Yhat, 1.5, t)
    S2 = _stokes_at(ends["S2_from_2"].Yhat, ends["S2_from_3"].Yhat, -0.5, t)
    r1 = max(abs(S1[0, 1]), abs(S1[0, 0] - 1), abs(S1[1, 1] - 1))
    r2 = max(abs(S2[1, 0]), abs(S2[0, 0] - 1), abs(S2[1, 1] - 1))
    diag = {
        "R": R,
        "gauge": gauge,
        "order": order,
        "ray_angles": [SECTOR_RAYS[k] for k in (1, 2, 3)],
        "meeting_points": [1.5, -0.5],
        "structure_residual_S1": float(r1),
        "structure_residual_S2": float(r2),
        "truncation": float(max(f.truncation for f in frames.values())),
        "det_drift": float(max(e.det_drift for e in ends.values())),
        "S1": [[complex(x) for x in row] for row in S1],
        "S2": [[complex(x) for x in row] for row in S2],
    }
    if max(r1, r2) > tol:
        raise StructureViolationError(f"Stokes matrices off structure by {max(r1, r2):.3g} (tol {tol:g})")
    return StokesData(complex(S1[1, 0]), complex(S2[0, 1]), t, diag)


# --------------------------------------------------------- compatibility


def t_matrix(lam: complex, state: PVState) -> np.ndarray:
    """Coefficient of dY/dt compatible with the lambda-system:

    (lambda/2) sigma_3 + (1/t) [[0, u v (y-1)], [v (y-1)/(u y), 0]].
    """
    t, y, v, u = state.t, state.y, state.v, state.u
    return np.array(
        [[lam / 2, u * v * (y - 1) / t], [v * (y - 1) / (u * y * t), -lam / 2]], dtype=complex
    )


def zero_curvature_residual(
    state: PVState, lam: complex, derivs: Optional[Sequence[complex]] = None
) -> float:
    """Frobenius norm of d_t M_lambda - d_lambda M_t + [M_lambda, M_t].

    ``derivs`` = (y', v', (ln u)') defaults to the system's right-hand side.
    """
    lam = complex(lam)
    _check_lambda(lam)
    y, v, u = state.y, state.v, state.u
    yt, vt, lt = system_rhs(state) if derivs is None else derivs
    ut = u * lt
    at = 0.5 + vt / lam - vt / (lam - 1)
    bt = -(ut * v + u * vt) / lam + (ut * y * v + u * yt * v + u * y * vt) / (lam - 1)
    uy = u * y
    uyt = ut * y + u * yt
    ct = (vt * u - v * ut) / (u * u) / lam - (vt * uy - v * uyt) / (uy * uy) / (lam - 1)
    dM = np.array([[at, bt], [ct, -at]], dtype=complex)
    Ml = lax_matrix(lam, state).matrix()
    Mt = t_matrix(lam, state)
    dMt = 0.5 * SIGMA3
    res = dM - dMt + Ml @ Mt - Mt @ Ml
    return float(np.linalg.norm(res))


# ------------------------------------------------------------ isomonodromy


@dataclass
class ScanResult:
    t_points: list
    data: list
    deviation_s1: float
    deviation_s2: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviation_s1, self.deviation_s2)


def _max_pairwise_rel(values) -> float:
    worst = 0.0
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            a, b = values[i], values[j]
            den = max(abs(a), abs(b))
            if den > 0:
                worst = max(worst, abs(a - b) / den)
    return worst


def isomonodromy_scan(traj: Trajectory, t_points: Sequence[float], R: Optional[float] = None, **kw) -> ScanResult:
    """Multipliers at each t in ``t_points`` (which must be trajectory nodes)."""
    data = [stokes_multipliers(traj.at(t), R, **kw) for t in t_points]
    return ScanResult(
        list(t_points),
        data,
        _max_pairwise_rel([d.s1 for d in data]),
        _max_pairwise_rel([d.s2 for d in data]),
    )


def stokes_csv(data: Sequence[StokesData]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "re_s1", "im_s1", "re_s2", "im_s2", "R", "structure_S1", "structure_S2", "truncation"])
    for d in data:
        g = d.diagnostics
        w.writerow([repr(d.t_used), repr(d.s1.real), repr(d.s1.imag), repr(d.s2.real), repr(d.s2.imag),
                    repr(g["R"]), repr(g["structure_residual_S1"]), repr(g["structure_residual_S2"]),
                    repr(g["truncation"])])
    return buf.getvalue()


def contour_csv(contour: Contour, per_segment: int = 50) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_lambda", "im_lambda"])
    for a, b in zip(contour.nodes[:-1], contour.nodes[1:]):
        for s in np.linspace(0, 1, per_segment, endpoint=False):
            z = a + s * (b - a)
            w.writerow([repr(z.real), repr(z.imag)])
    z = contour.nodes[-1]
    w.writerow([repr(z.real), repr(z.imag)])
    return buf.getvalue()
