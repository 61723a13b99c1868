"""Dormand-Prince 5(4) integrator for complex ODEs along parametrised paths.

The caller supplies ``f(z, w)`` together with a path ``z(s)``, ``s`` in [0, 1];
the integrator advances ``dw/ds = z'(s) f(z(s), w)``. Straight segments and
circular arcs cover everything the package needs (complex-t detours around
movable poles, lambda-plane contours, eta rays).

Step control is the PI controller of Gustafsson: the error of the previous
accepted step enters the next proposal, which damps the step-size ringing that
plain I-control shows on oscillatory problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SingularityEncounteredError, StepUnderflowError

# Butcher tableau, Dormand & Prince (1980).
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
_B_LOW = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b - bl for b, bl in zip(_B, _B_LOW))

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass(frozen=True)
class Path:
    """A parametrised curve z(s), s in [0, 1], with its derivative."""

    z: Callable[[float], complex]
    dz: Callable[[float], complex]
    start: complex
    end: complex

    @staticmethod
    def segment(a: complex, b: complex) -> "Path":
        a, b = complex(a), complex(b)
        d = b - a
        return Path(lambda s: a + s * d, lambda s: d, a, b)

    @staticmethod
    def arc(center: complex, radius: float, theta0: float, theta1: float) -> "Path":
        """Arc of a circle from angle theta0 to theta1 (either orientation)."""
        c = complex(center)
        dth = theta1 - theta0

        def z(s):
            return c + radius * complex(math.cos(theta0 + s * dth), math.sin(theta0 + s * dth))

        def dz(s):
            th = theta0 + s * dth
            return 1j * dth * radius * complex(math.cos(th), math.sin(th))

        return Path(z, dz, z(0.0), z(1.0))

    def length_scale(self) -> float:
        return max(abs(self.end - self.start), abs(self.dz(0.5)))


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    error_sum: float = 0.0  # sum of absolute local error estimates (max norm)
    h_last: float = 0.0  # last proposed step, in units of arc length

    def merge(self, other: "StepStats") -> None:
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.error_sum += other.error_sum
        self.h_last = other.h_last


def integrate_path(
    f: Callable[[complex, np.ndarray], np.ndarray],
    path: Path,
    w0: np.ndarray,
    rtol: float,
    atol: float,
    guard: Optional[Callable[[complex, np.ndarray], Optional[str]]] = None,
    h0: Optional[float] = None,  # initial step in units of s
    h_min: float = 1e-13,
    max_steps: int = 2_000_000,
) -> tuple[np.ndarray, StepStats]:
    """Advance ``w`` along ``path`` from s=0 to s=1.

    ``guard(z, w)`` is called after every accepted step; a non-empty return
    value aborts with :class:`SingularityEncounteredError`. A collapsing step
    raises :class:`StepUnderflowError`. Returns the end value and step
    statistics. Each accepted step satisfies
    ``|err_i| <= atol + rtol * max(|w_i|, |w_new_i|)``.
    """
    w = np.array(w0, dtype=complex)
    stats = StepStats()

    def rhs(s, x):
        return path.dz(s) * f(path.z(s), x)

    s = 0.0
    k1 = rhs(s, w)
    if h0 is None:
        scale = atol + rtol * np.abs(w)
        d0 = float(np.max(np.abs(w) / scale))
        d1 = float(np.max(np.abs(k1) / scale))
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-3
        h = min(h, 0.1)
    else:
        h = h0
    err_prev = 1.0
    rejected_last = False
    k = [None] * 7
    for _ in range(max_steps):
        if s >= 1.0:
            break
        if h < h_min:
            raise StepUnderflowError(path.z(s), f"step size underflow at z={path.z(s):.6g}")
        last = s + h >= 1.0
        if last:
            h = 1.0 - s
        k[0] = k1
        for i in range(1, 7):
            acc = w.copy()
            for j, a in enumerate(_A[i]):
                if a != 0.0:
                    acc += (h * a) * k[j]
            k[i] = rhs(s + _C[i] * h, acc)
        w_new = acc  # FSAL: stage 7 argument is the 5th-order solution
        err_vec = h * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        if not np.all(np.isfinite(w_new)) or not np.all(np.isfinite(err_vec)):
            h *= 0.25
            stats.rejected += 1
            rejected_last = True
            continue
        scale = atol + rtol * np.maximum(np.abs(w), np.abs(w_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            s = 1.0 if last else s + h
            w = w_new
            k1 = k[6]
            stats.accepted += 1
            stats.error_sum += float(np.max(np.abs(err_vec)))
            if guard is not None:
                msg = guard(path.z(s), w)
                if msg:
                    raise SingularityEncounteredError(path.z(s), msg)
            err = max(err, 1e-10)
            factor = _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            h *= factor
            err_prev = err
            rejected_last = False
        else:
            stats.rejected += 1
            factor = max(_MIN_FACTOR, _SAFETY * err ** (-1 / 5))
            h *= factor
            rejected_last = True
    else:
        raise StepUnderflowError(path.z(s), "maximum number of steps exceeded")
    stats.h_last = h * abs(path.dz(1.0))
    return w, stats
