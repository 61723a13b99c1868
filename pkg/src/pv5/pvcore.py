"""The nonlinear side: the (y, v, u) system, its seeds, integration and read-out.

The unknowns obey

    t y' = t y - 2 v (y-1)^2
    t v' = (y - 1/y) v^2
    t (ln u)' = -2v + y v + v/y

and y solves the Painleve V equation with all formal monodromy parameters zero.
Two exact facts shape the numerics:

* ``u y^{1/2} e^{-t/2}`` is a first integral, so the square-root branch needed
  for read-out can be carried along any path by exponentiating a difference of
  ``ln u`` values instead of by guessing a sign.
* y has movable double poles on the real t axis (the real solutions behave like
  ``-tan^2``). Integration hops over them on small semicircles in complex t and
  rejoins the real axis at the next sample node.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import specialfn as sf
from ._rk import Path, StepStats, integrate_path
from .errors import (
    BranchError,
    DegenerateSeedError,
    PoleError,
    SingularityEncounteredError,
    SingularStateError,
    ToleranceError,
)

SIGMA_STAR = 1j / math.pi * math.log(3 + math.sqrt(8))

# Large-t formal solution of the system: y = -1 + sum Y_k t^{-k}, v = -t/8 + sum V_k t^{-k}.
# The coefficients were generated order by order with a computer-algebra system
# and cross-checked by substituting back (residual O(t^{-10})).
Y_SERIES = (-4.0, -8.0, 0.0, 32.0, -320.0, -1536.0, 35840.0, 156160.0, -7252992.0)
V_SERIES = {3: 2.0, 5: -160.0, 7: 25152.0}

_Y_POLE = 1e8
_Y_ZERO = 1e-8


@dataclass(frozen=True)
class PVState:
    """(y, v, u) at time t, with u stored through ln u.

    ``sqrt_y`` is the branch of y^{1/2} continued from the seed; it is ``None``
    for states built by hand. ``t`` is real for recorded samples and may be
    complex for points on a detour.
    """

    t: Union[float, complex]
    y: complex
    v: complex
    ln_u: complex
    sqrt_y: Optional[complex] = None

    def __post_init__(self):
        for name in ("y", "v", "ln_u"):
            val = complex(getattr(self, name))
            if not (math.isfinite(val.real) and math.isfinite(val.imag)):
                raise SingularStateError(f"non-finite {name}")
            object.__setattr__(self, name, val)
        if self.sqrt_y is not None:
            object.__setattr__(self, "sqrt_y", complex(self.sqrt_y))
        if self.t == 0:
            raise SingularStateError("t = 0")

    @classmethod
    def from_u(cls, t, y, v, u, sqrt_y=None) -> "PVState":
        if u == 0:
            raise SingularStateError("u = 0")
        return cls(t, y, v, cmath.log(complex(u)), sqrt_y)

    @property
    def u(self) -> complex:
        return cmath.exp(self.ln_u)

    def as_vector(self) -> np.ndarray:
        return np.array([self.y, self.v, self.ln_u], dtype=complex)


@dataclass(frozen=True)
class SeedZero:
    """Small-t data (sigma, r); s_squared is derived from sigma if omitted."""

    sigma: complex
    r: complex
    s_squared: Optional[complex] = None

    def __post_init__(self):
        sigma = complex(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "r", complex(self.r))
        if not (0.0 <= sigma.real < 1.0):
            raise ValueError("SeedZero needs 0 <= Re(sigma) < 1")
        if self.r == 0:
            raise ValueError("SeedZero needs r != 0")
        s2 = seed_s_squared(sigma)
        if self.s_squared is None:
            object.__setattr__(self, "s_squared", s2)
        elif abs(complex(self.s_squared) - s2) > 1e-10 * max(1.0, abs(s2)):
            raise ValueError("s_squared inconsistent with sigma")

    def describe(self) -> dict:
        return {"kind": "zero", "sigma": _cpair(self.sigma), "r": _cpair(self.r), "s_squared": _cpair(self.s_squared)}


@dataclass(frozen=True)
class SeedInf:
    """Large-t datum u_hat in u ~ u_hat e^{t/2}."""

    u_hat: complex

    def __post_init__(self):
        object.__setattr__(self, "u_hat", complex(self.u_hat))
        if self.u_hat == 0:
            raise ValueError("u_hat must be nonzero")

    def describe(self) -> dict:
        return {"kind": "infinity", "u_hat": _cpair(self.u_hat)}


@dataclass
class Trajectory:
    """Samples of an integrated solution, ordered in the marching direction."""

    samples: list
    tolerances: tuple
    seed_descriptor: dict = field(default_factory=dict)
    stats: StepStats = field(default_factory=StepStats)
    detours: list = field(default_factory=list)

    def __post_init__(self):
        ts = [s.t.real if isinstance(s.t, complex) else s.t for s in self.samples]
        if len(ts) > 1:
            d = np.diff(ts)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("trajectory samples must be strictly monotone in t")

    @property
    def times(self) -> np.ndarray:
        return np.array([float(np.real(s.t)) for s in self.samples])

    def at(self, t: float, rel: float = 1e-12) -> PVState:
        """The sample recorded at t (t must be one of the nodes)."""
        ts = self.times
        i = int(np.argmin(np.abs(ts - t)))
        if abs(ts[i] - t) > rel * max(1.0, abs(t)):
            raise KeyError(f"no sample at t={t}")
        return self.samples[i]

    @property
    def end(self) -> PVState:
        return self.samples[-1]

    def restricted(self, t_lo: float, t_hi: float) -> "Trajectory":
        keep = [s for s in self.samples if t_lo - 1e-12 <= float(np.real(s.t)) <= t_hi + 1e-12]
        return Trajectory(keep, self.tolerances, dict(self.seed_descriptor))

    def to_record(self) -> dict:
        return {
            "seed": self.seed_descriptor,
            "tolerances": {"rtol": self.tolerances[0], "atol": self.tolerances[1]},
            "samples": [
                {
                    "t": float(np.real(s.t)),
                    "y": _cpair(s.y),
                    "v": _cpair(s.v),
                    "ln_u": _cpair(s.ln_u),
                    "sqrt_y": _cpair(s.sqrt_y) if s.sqrt_y is not None else None,
                }
                for s in self.samples
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        rec = json.loads(text)
        samples = [
            PVState(
                d["t"],
                complex(*d["y"]),
                complex(*d["v"]),
                complex(*d["ln_u"]),
                complex(*d["sqrt_y"]) if d["sqrt_y"] is not None else None,
            )
            for d in rec["samples"]
        ]
        tol = rec["tolerances"]
        return cls(samples, (tol["rtol"], tol["atol"]), rec["seed"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "abs_y", "arg_y", "re_y", "im_y", "re_v", "im_v", "re_ln_u", "im_ln_u",
                    "re_sqrt_y", "im_sqrt_y", "re_alpha", "im_alpha"])
        for s in self.samples:
            sq = s.sqrt_y if s.sqrt_y is not None else complex("nan")
            a = 2 * s.v * (1 - s.y) / sq if s.sqrt_y is not None else complex("nan")
            w.writerow([repr(float(np.real(s.t))), repr(abs(s.y)), repr(cmath.phase(s.y)), repr(s.y.real),
                        repr(s.y.imag), repr(s.v.real), repr(s.v.imag), repr(s.ln_u.real), repr(s.ln_u.imag),
                        repr(sq.real), repr(sq.imag), repr(a.real), repr(a.imag)])
        return buf.getvalue()


def _cpair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# ------------------------------------------------------------------ the system


def _rhs(t, y, v):
    if t == 0:
        raise SingularStateError("t = 0")
    if y == 0 or y == 1:
        raise SingularStateError(f"y = {y} makes the system singular")
    ym1 = y - 1
    dy = y - 2 * v * ym1 * ym1 / t
    dv = (y - 1 / y) * v * v / t
    dlnu = v * ym1 * ym1 / (y * t)
    return dy, dv, dlnu


def system_rhs(state: PVState) -> tuple[complex, complex, complex]:
    """(dy/dt, dv/dt, d ln u/dt) at ``state``."""
    return _rhs(state.t, state.y, state.v)


def _second_derivative(t, y, v):
    dy, dv, _ = _rhs(t, y, v)
    ym1 = y - 1
    d2y = dy - 2 * (dv * ym1 * ym1 + 2 * v * ym1 * dy) / t + 2 * v * ym1 * ym1 / (t * t)
    return dy, d2y


def second_derivative(state: PVState) -> tuple[complex, complex]:
    """(y', y'') obtained by differentiating the system once more."""
    return _second_derivative(state.t, state.y, state.v)


def pv_residual(t, y, y1, y2) -> complex:
    """y'' minus the right-hand side of the Painleve V equation (all Theta = 0)."""
    if y == 0 or y == 1 or t == 0:
        raise SingularStateError("residual undefined at y in {0, 1} or t = 0")
    rhs = (1 / (2 * y) + 1 / (y - 1)) * y1 * y1 - y1 / t + y / t - y * (y + 1) / (2 * (y - 1))
    return y2 - rhs


def _sample_residual(s: PVState, extended: bool) -> float:
    t, y, v = s.t, s.y, s.v
    if extended:
        t, y, v = np.longdouble(np.real(t)), np.clongdouble(y), np.clongdouble(v)
    y1, y2 = _second_derivative(t, y, v)
    return float(abs(pv_residual(t, y, y1, y2)))


def pv_residual_along(traj: Trajectory, extended: bool = True) -> float:
    """Largest |residual| over the samples, derivatives taken from the system.

    The residual is an algebraic consequence of the system, so its computed
    value is rounding noise of size eps |y''|; next to a pole |y''| reaches
    1e10 and double precision leaves ~1e-6. ``extended=True`` evaluates the
    derivatives and the residual from the stored (t, y, v) in long double.
    """
    return max(_sample_residual(s, extended) for s in traj.samples)


def pv_residual_profile(traj: Trajectory) -> np.ndarray:
    """Per-sample rows (t, |residual| in double, |residual| in long double, |y''|)."""
    rows = []
    for s in traj.samples:
        _, y2 = second_derivative(s)
        rows.append((float(np.real(s.t)), _sample_residual(s, False), _sample_residual(s, True), abs(y2)))
    return np.array(rows)


# ------------------------------------------------------------------------ seeds


def seed_s_squared(sigma: complex) -> complex:
    """s^2 = (i sigma^2 / 4 pi^3) Gamma(-sigma)^2 / Gamma(sigma)^2 * Gamma(sigma/2)^6."""
    sigma = complex(sigma)
    if sigma == 0:
        raise PoleError("s^2 undefined at sigma = 0")
    g = sf.gamma(-sigma) / sf.gamma(sigma)
    return 1j * sigma * sigma / (4 * math.pi ** 3) * g * g * sf.gamma(sigma / 2) ** 6


def seed_at_zero(t: float, seed: SeedZero) -> PVState:
    """Leading small-t state: with w = sigma s^2 t^sigma,

    y = (w-2)^2/(w+2)^2,  v = 1/(4 s^2 t^sigma) - sigma^2 s^2 t^sigma / 16,
    u = -r (2+w)/(2-w),   y^{1/2} = (2-w)/(2+w).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    ts = cmath.exp(seed.sigma * math.log(t))
    s2 = seed.s_squared
    w = seed.sigma * s2 * ts
    if abs(w + 2) < 1e-14 or abs(w - 2) < 1e-14:
        raise DegenerateSeedError(f"sigma s^2 t^sigma = {w} makes the seed degenerate")
    y = (w - 2) ** 2 / (w + 2) ** 2
    v = 1 / (4 * s2 * ts) - seed.sigma ** 2 * s2 * ts / 16
    u = -seed.r * (2 + w) / (2 - w)
    return PVState.from_u(t, y, v, u, sqrt_y=(2 - w) / (2 + w))


def seed_at_infinity(t: float, seed: SeedInf, refined: bool = False, t_floor: float = 20.0) -> PVState:
    """Large-t state.

    ``refined=False`` returns the leading behaviour y = -1 - 4/t, v = -t/8,
    u = u_hat e^{t/2}. ``refined=True`` sums the formal series to O(t^{-10})
    and fixes u through the first integral u y^{1/2} = i u_hat e^{t/2}, so
    that the state lies on the solution labelled by u_hat rather than on a
    neighbour whose effective u_hat differs by O(1/t).
    The branch y^{1/2} = +i sqrt(-y) is the one that tends to +i.
    """
    if t < t_floor:
        raise ValueError(f"seed_at_infinity needs t >= {t_floor}")
    uh = seed.u_hat
    if not refined:
        y = -1 - 4 / t
        v = -t / 8
        ln_u = cmath.log(uh) + t / 2
    else:
        y = -1 + sum(c * t ** -(k + 1) for k, c in enumerate(Y_SERIES))
        v = -t / 8 + sum(c * t ** -k for k, c in V_SERIES.items())
        ln_u = cmath.log(uh) + t / 2 - 0.5 * math.log(-y)
    sq = 1j * cmath.sqrt(-complex(y))
    return PVState(t, complex(y), complex(v), complex(ln_u), sq)


# ------------------------------------------------------------------ integration


def _check_tolerances(rtol: float, atol: float) -> None:
    if not (1e-15 <= rtol <= 1e-2) or not (0 < atol <= 1e-2):
        raise ToleranceError(f"tolerances out of range: rtol={rtol}, atol={atol}")


def _vector_field(t, w):
    dy, dv, dl = _rhs(t, w[0], w[1])
    return np.array([dy, dv, dl])


def _guard(t, w):
    y = w[0]
    if abs(y) > _Y_POLE:
        return f"|y| > {_Y_POLE:g} near t={t}"
    if abs(y) < _Y_ZERO:
        return f"|y| < {_Y_ZERO:g} near t={t}"
    if abs(y - 1) < _Y_ZERO:
        return f"y close to 1 near t={t}"
    return None


def sample_grid(t_start: float, t_end: float, per_decade: int = 64, extra: Iterable[float] = ()) -> list:
    """Geometric nodes (per_decade per factor 10) plus requested points, in marching order."""
    n = max(1, int(math.ceil(per_decade * abs(math.log10(t_end / t_start)))))
    nodes = set(float(x) for x in t_start * (t_end / t_start) ** (np.arange(n + 1) / n))
    nodes.discard(float(t_start * (t_end / t_start) ** (n / n)))
    nodes.update([float(t_start), float(t_end)])
    lo, hi = min(t_start, t_end), max(t_start, t_end)
    nodes.update(float(x) for x in extra if lo <= x <= hi)
    out = sorted(nodes, reverse=t_end < t_start)
    dedup = [out[0]]
    for x in out[1:]:
        if abs(x - dedup[-1]) > 1e-12 * max(1.0, abs(x)):
            dedup.append(x)
    dedup[-1] = float(t_end)
    return dedup


def _detour_paths(a: float, b: float) -> list:
    c, r = 0.5 * (a + b), 0.5 * abs(b - a)
    if a > b:
        return [Path.arc(c, r, 0.0, math.pi), Path.arc(c, r, 0.0, -math.pi)]
    return [Path.arc(c, r, math.pi, 0.0), Path.arc(c, r, -math.pi, 0.0)]


def integrate(
    start: PVState,
    t_target: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    t_eval: Sequence[float] = (),
    per_decade: int = 64,
    seed_descriptor: Optional[dict] = None,
) -> Trajectory:
    """Integrate from ``start`` to ``t_target`` and record samples.

    Samples sit on a geometric grid plus ``t_eval``. Between neighbouring
    nodes the path is the real segment; if that meets a pole or zero of y the
    step is redone on the upper, then the lower semicircle. ``ln u`` is
    integrated, never u. Raises :class:`SingularityEncounteredError` if no
    route works.
    """
    _check_tolerances(rtol, atol)
    if not t_target > 0:
        raise ValueError("t_target must be positive")
    t0 = float(np.real(start.t))
    if isinstance(start.t, complex) and start.t.imag != 0:
        raise ValueError("start must lie on the real t axis")
    sq0 = start.sqrt_y if start.sqrt_y is not None else cmath.sqrt(start.y)
    first = replace(start, t=t0, sqrt_y=sq0)
    desc = dict(seed_descriptor) if seed_descriptor else {"kind": "state", "t": t0}
    if t_target == t0:
        return Trajectory([first], (rtol, atol), desc)
    nodes = sample_grid(t0, float(t_target), per_decade, t_eval)
    required = {float(t_target)} | {float(x) for x in t_eval}
    samples = [first]
    stats = StepStats()
    detours = []
    w = first.as_vector()
    sq = sq0
    t_prev = t0
    h_abs = None
    i = 1
    while i < len(nodes):
        b = nodes[i]
        candidates = [(b, Path.segment(t_prev, b))] + [(b, p) for p in _detour_paths(t_prev, b)]
        if b not in required and i + 1 < len(nodes):
            b2 = nodes[i + 1]
            candidates += [(b2, p) for p in _detour_paths(t_prev, b2)]
        last_err = None
        for end, path in candidates:
            try:
                h0 = None if h_abs is None else min(0.5, h_abs / max(abs(path.dz(0.0)), 1e-300))
                w_new, st = integrate_path(_vector_field, path, w, rtol, atol, guard=_guard, h0=h0)
            except (SingularityEncounteredError, SingularStateError) as exc:
                last_err = exc
                continue
            break
        else:
            where = getattr(last_err, "where", b)
            raise SingularityEncounteredError(where, f"could not pass singularity near t={where}: {last_err}")
        if path is not candidates[0][1]:
            detours.append((t_prev, end))
        stats.merge(st)
        h_abs = st.h_last
        sq = sq * cmath.exp((end - t_prev) / 2 - (w_new[2] - w[2]))
        w = w_new
        samples.append(PVState(end, w[0], w[1], w[2], sq))
        t_prev = end
        i = nodes.index(end) + 1
    traj = Trajectory(samples, (rtol, atol), desc, stats, detours)
    return traj


# ------------------------------------------------------------------- read-out


def _sqrt_y(state: PVState) -> complex:
    if state.sqrt_y is None:
        raise BranchError("state carries no continued branch of y^{1/2}")
    return state.sqrt_y


def extract_sigma(state: PVState) -> complex:
    """alpha(t) = 2 v (1-y) / y^{1/2} on the continued branch; tends to sigma as t -> 0."""
    return 2 * state.v * (1 - state.y) / _sqrt_y(state)


def extract_r(state: PVState) -> complex:
    """-u y^{1/2} on the continued branch; tends to r as t -> 0."""
    return -state.u * _sqrt_y(state)


def alpha_whittaker(state: PVState) -> complex:
    """Whittaker parameter alpha with alpha^2/4 = v^2 (1-y)^2 / y - v t.

    The sign is the one closest to :func:`extract_sigma`, i.e. the branch on
    which alpha = 2 v (1-y) / y^{1/2} + o(1).
    """
    a2 = 4 * (state.v ** 2 * (1 - state.y) ** 2 / state.y - state.v * state.t)
    a = cmath.sqrt(a2)
    ref = extract_sigma(state)
    return a if abs(a - ref) <= abs(a + ref) else -a


def sigma_error_estimate(traj: Trajectory) -> float:
    """First-order bound on the integration error in extract_sigma at the end.

    The accumulated local error estimates bound the error in (y, v, ln u); it
    is propagated through alpha = 2 v (1-y) / s with s = y^{1/2} moving like
    exp(-ln u).
    """
    s = traj.end
    sq = _sqrt_y(s)
    a = extract_sigma(s)
    sens = abs(2 * s.v / sq) + abs(2 * (1 - s.y) / sq) + abs(a)
    return traj.stats.error_sum * sens


# ---------------------------------------------------------- sine-Gordon form


def sine_gordon_angle(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """(x, q) with t = 4x and y = ((e^{iq}+1)/(e^{iq}-1))^2, q continued along the samples."""
    xs, logs = [], []
    for s in traj.samples:
        if abs(s.y - 1) < 1e-10:
            raise BranchError(f"q undefined near y = 1 (t={s.t})")
        w = _sqrt_y(s)
        e = (w + 1) / (w - 1)
        xs.append(float(np.real(s.t)) / 4)
        logs.append(e)
    e = np.array(logs)
    q = np.unwrap(np.angle(e)) - 1j * np.log(np.abs(e))
    return np.array(xs), q


def sine_gordon_residual(traj: Trajectory) -> float:
    """max |x q'' - 2x sin 2q + q' + 2 sin q| over interior samples.

    The samples must be equally spaced; q' and q'' are centred differences.
    """
    x, q = sine_gordon_angle(traj)
    if len(x) < 3:
        raise ValueError("need at least three samples")
    h = np.diff(x)
    if np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise ValueError("samples must be equally spaced")
    h = h[0]
    q1 = (q[2:] - q[:-2]) / (2 * h)
    q2 = (q[2:] - 2 * q[1:-1] + q[:-2]) / (h * h)
    xi, qi = x[1:-1], q[1:-1]
    res = xi * q2 - 2 * xi * np.sin(2 * qi) + q1 + 2 * np.sin(qi)
    return float(np.max(np.abs(res)))


def sine_gordon_samples(
    start: PVState, t_lo: float = 1.0, t_hi: float = 10.0, h: float = 1e-3,
    rtol: float = 1e-11, atol: float = 1e-13,
) -> Trajectory:
    """Trajectory on [t_lo, t_hi] sampled with spacing h in x = t/4 (4h in t)."""
    n = int(round((t_hi - t_lo) / (4 * h)))
    if n < 2 or abs(n * 4 * h - (t_hi - t_lo)) > 1e-9:
        raise ValueError("t_hi - t_lo must be a multiple of 4h")
    t0 = float(np.real(start.t))
    grid = t_hi - 4 * h * np.arange(n + 1) if t0 >= t_hi else t_lo + 4 * h * np.arange(n + 1)
    target = float(grid[-1])
    traj = integrate(start, target, rtol, atol, t_eval=list(grid), per_decade=0,
                     seed_descriptor={"kind": "sine-gordon grid", "h": h})
    return traj.restricted(t_lo, t_hi)
