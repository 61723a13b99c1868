"""Command line: verify | stokes | integrate | specialfn | lemma-check.

Exit codes: 0 all verdicts pass, 2 a verdict failed, 3 numerical failure,
64 usage or configuration error. Settings come from flags, then a flat
``key = value`` file given with ``--config``, then built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import lax, pvcore, specialfn, uniform
from .errors import ConfigError, PV5Error

EXIT_OK, EXIT_VERDICT, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 64

SEED_FLOOR = 20.0

TOLERANCES = {"sigma": 2e-2, "r": 2e-2, "s1s2": 5e-2, "s1": 5e-2, "s2": 5e-2, "isomonodromy": 1e-2}


@dataclass
class RunConfig:
    u_hat: complex = 1 + 0j
    t0: float = 0.05
    t1: float = 40.0
    rtol: float = 1e-11
    atol: float = 1e-13
    radius_R: Optional[float] = None  # None: R_min(t) = max(50, 200/t)
    t_scan: tuple = (1.0, 2.0, 4.0)
    output_dir: str = "pv5_out"
    format: str = "both"

    def validate(self) -> None:
        if not (0 < self.t0 < self.t1):
            raise ConfigError(f"need 0 < t0 < t1, got t0={self.t0}, t1={self.t1}")
        if self.t1 < SEED_FLOOR:
            raise ConfigError(f"the large-t seed needs t1 >= {SEED_FLOOR:g}")
        if self.u_hat == 0 or not all(math.isfinite(x) for x in (self.u_hat.real, self.u_hat.imag)):
            raise ConfigError("u_hat must be finite and nonzero")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("rtol and atol must be positive")
        if self.radius_R is not None and self.radius_R < 50:
            raise ConfigError("radius must be at least 50")
        if self.format not in ("json", "csv", "both"):
            raise ConfigError(f"unknown format {self.format!r}")
        for t in self.t_scan:
            if not (self.t0 <= t <= self.t1):
                raise ConfigError(f"t-scan value {t} outside [t0, t1]")

    def to_record(self) -> dict:
        d = dataclasses.asdict(self)
        d["u_hat"] = [self.u_hat.real, self.u_hat.imag]
        d["t_scan"] = list(self.t_scan)
        return d


@dataclass
class Verdict:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance

    def to_record(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


@dataclass
class RunRecord:
    config: RunConfig
    trajectory_ref: str
    stokes: list
    extracted: dict
    verdicts: list
    diagnostics: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def record(self) -> dict:
        """The deterministic part: identical configs give identical bytes."""
        return {
            "config": self.config.to_record(),
            "trajectory_ref": self.trajectory_ref,
            "stokes": [s.to_record() for s in self.stokes],
            "extracted": self.extracted,
            "verdicts": [v.to_record() for v in self.verdicts],
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        body = json.dumps(self.record(), sort_keys=True, indent=1)
        digest = hashlib.sha256(body.encode()).hexdigest()
        return json.dumps(
            {"record": self.record(), "sha256": digest, "timestamps": self.timestamps}, sort_keys=True, indent=1
        )


def _cpair(z: complex) -> list:
    return [complex(z).real, complex(z).imag]


# -------------------------------------------------------------------- commands


def _trajectory(config: RunConfig, extra: Sequence[float] = ()) -> pvcore.Trajectory:
    seed = pvcore.SeedInf(config.u_hat)
    start = pvcore.seed_at_infinity(config.t1, seed, refined=True, t_floor=SEED_FLOOR)
    desc = dict(seed.describe(), t1=config.t1, refined=True)
    marks = sorted({*config.t_scan, *extra} - {config.t0, config.t1})
    return pvcore.integrate(start, config.t0, config.rtol, config.atol, t_eval=marks, seed_descriptor=desc)


def cmd_integrate(config: RunConfig) -> pvcore.Trajectory:
    config.validate()
    return _trajectory(config)


def cmd_stokes(config: RunConfig, t: float = 2.0, state: Optional[pvcore.PVState] = None) -> lax.StokesData:
    """Multipliers at t on the trajectory of ``config`` (or at an explicit state)."""
    if state is None:
        config.validate()
        cfg = dataclasses.replace(config, t_scan=(t,))
        state = _trajectory(cfg).at(t)
    return lax.stokes_multipliers(state, config.radius_R)


def cmd_verify(config: RunConfig) -> tuple[RunRecord, pvcore.Trajectory]:
    """Seed at t1, integrate to t0, read off (sigma, r), compute Stokes data over t_scan."""
    config.validate()
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    checkpoints = [t for t in (0.2, 0.1) if config.t0 < t < config.t1]
    traj = _trajectory(config, checkpoints)
    end = traj.end
    # alpha(t) with alpha^2/4 = v^2 (1-y)^2/y - v t, on the branch near 2 v (1-y)/y^{1/2}
    sigma = pvcore.alpha_whittaker(end)
    sigma_leading = pvcore.extract_sigma(end)
    r = pvcore.extract_r(end)
    u_back = -r * math.exp(-0.5 * config.t0) / 1j
    stokes = [lax.stokes_multipliers(traj.at(t), config.radius_R) for t in config.t_scan]
    scan = lax.ScanResult(list(config.t_scan), stokes,
                          lax._max_pairwise_rel([d.s1 for d in stokes]),
                          lax._max_pairwise_rel([d.s2 for d in stokes]))
    sigma_star, r_star = uniform.connection_solve(config.u_hat)
    s1_ref, s2_ref = uniform.s1_large_t(config.u_hat), uniform.s2_large_t(config.u_hat)
    worst_prod = max(abs(d.s1 * d.s2 - s1_ref * s2_ref) for d in stokes)
    verdicts = [
        Verdict("sigma", abs(sigma - sigma_star), TOLERANCES["sigma"]),
        Verdict("r", abs(r - r_star), TOLERANCES["r"]),
        Verdict("s1s2", worst_prod, TOLERANCES["s1s2"]),
        Verdict("s1", max(abs(d.s1 - s1_ref) for d in stokes), TOLERANCES["s1"]),
        Verdict("s2", max(abs(d.s2 - s2_ref) for d in stokes), TOLERANCES["s2"]),
        Verdict("isomonodromy", scan.max_deviation, TOLERANCES["isomonodromy"]),
    ]
    history = {}
    for t in checkpoints + [config.t0]:
        s = traj.at(t)
        history[repr(t)] = {
            "alpha_error": abs(pvcore.alpha_whittaker(s) - sigma_star),
            "leading_alpha_error": abs(pvcore.extract_sigma(s) - sigma_star),
        }
    diagnostics = {
        "sigma_history": history,
        "sigma_integration_error_estimate": pvcore.sigma_error_estimate(traj),
        "pv_residual_max": pvcore.pv_residual_along(traj),
        "detours": [list(d) for d in traj.detours],
        "steps": {"accepted": traj.stats.accepted, "rejected": traj.stats.rejected},
        "mirrored_solution": [_cpair(c[0]) + _cpair(c[1]) for c in uniform.connection_candidates(config.u_hat)],
    }
    rec = RunRecord(
        config,
        "trajectory.csv",
        stokes,
        {"sigma": _cpair(sigma), "sigma_leading": _cpair(sigma_leading), "r": _cpair(r), "u_hat_back": _cpair(u_back),
         "sigma_target": _cpair(sigma_star), "r_target": _cpair(r_star)},
        verdicts,
        diagnostics,
        {"started": started, "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
    )
    return rec, traj


SPECIAL_FUNCTIONS = ("K1", "I1", "gamma", "whittakerM", "whittakerW")


def cmd_specialfn(name: str, z: complex, branch_arg: Optional[float] = None,
                  kappa: complex = 0.5, mu: complex = 0.0) -> complex:
    zs = specialfn.SectorArg(z, branch_arg) if branch_arg is not None else specialfn.as_sector(z)
    if name == "K1":
        return specialfn.bessel_K1(zs)
    if name == "I1":
        return specialfn.bessel_I1(zs)
    if name == "gamma":
        return specialfn.gamma(z)
    if name == "whittakerM":
        return specialfn.whittaker_M(kappa, mu, zs)
    if name == "whittakerW":
        return specialfn.whittaker_W(kappa, mu, zs)
    raise ConfigError(f"unknown function {name!r}; choose from {', '.join(SPECIAL_FUNCTIONS)}")


LEMMA_SWEEPS = {"2.1": (0.2, 0.1, 0.05, 0.025), "3.1": (20.0, 40.0, 80.0), "3.2": (20.0, 40.0, 80.0)}


def cmd_lemma_check(which: str, config: RunConfig, sweep: Optional[Sequence[float]] = None) -> dict:
    """Approximant errors over a t-sweep; the check passes when they strictly decrease.

    For 3.1 the negative control next to eta = 1/2 is also run and must stay
    above ``uniform.NON_CONVERGENCE_LEVEL`` at the largest t.
    """
    if which not in LEMMA_SWEEPS:
        raise ConfigError(f"unknown lemma {which!r}")
    sweep = tuple(sorted(sweep or LEMMA_SWEEPS[which], reverse=(which == "2.1")))
    if which != "2.1" and min(sweep) < SEED_FLOOR:
        raise ConfigError(f"lemma {which} sweeps need t >= {SEED_FLOOR:g}")
    reports = []
    if which == "2.1":
        cfg = dataclasses.replace(config, t0=min(sweep), t_scan=())
        cfg.validate()
        traj = _trajectory(cfg, sweep)
        states = [traj.at(t) for t in sweep]
    else:
        states = [pvcore.seed_at_infinity(t, pvcore.SeedInf(config.u_hat), refined=True) for t in sweep]
    gauge = {"2.1": "direct", "3.1": "tilde", "3.2": "hat"}[which]
    ray = uniform.EtaRay((-0.25j, -10j)) if which == "3.2" else None
    for s in states:
        reports.append(uniform.approximant_report(gauge, s, ray))
    errors = [r.error for r in reports]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    out = {"lemma": which, "gauge": gauge, "t": list(sweep), "errors": errors,
           "strictly_decreasing": decreasing, "reports": [r.summary() for r in reports]}
    passed = decreasing
    if which == "3.1":
        neg = [uniform.approximant_error("tilde", s, uniform.NEGATIVE_CONTROL_RAY) for s in states]
        out["negative_control"] = {"ray": [_cpair(z) for z in uniform.NEGATIVE_CONTROL_RAY.nodes], "errors": neg,
                                   "threshold": uniform.NON_CONVERGENCE_LEVEL,
                                   "non_convergent": neg[-1] >= uniform.NON_CONVERGENCE_LEVEL}
        passed = passed and out["negative_control"]["non_convergent"]
    out["pass"] = passed
    out["_reports"] = reports
    return out


# ------------------------------------------------------------------ plumbing


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


CONFIG_KEYS = {
    "u_hat_re": float, "u_hat_im": float, "t0": float, "t1": float, "rtol": float, "atol": float,
    "radius": float, "t_scan": str, "out": str, "format": str,
}


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{n}: bad value for {key}") from exc
    return values


def _parse_scan(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError as exc:
        raise ConfigError(f"bad t-scan list {text!r}") from exc


def build_config(args: argparse.Namespace) -> RunConfig:
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    cfg = RunConfig(output_dir=os.environ.get("PV5_OUT_DIR", RunConfig.output_dir))
    cfg.u_hat = complex(merged.get("u_hat_re", 1.0), merged.get("u_hat_im", 0.0))
    for key, attr in (("t0", "t0"), ("t1", "t1"), ("rtol", "rtol"), ("atol", "atol"),
                      ("radius", "radius_R"), ("out", "output_dir"), ("format", "format")):
        if key in merged:
            setattr(cfg, attr, merged[key])
    if "t_scan" in merged:
        cfg.t_scan = _parse_scan(merged["t_scan"])
    return cfg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file (overridden by flags)")
    p.add_argument("--u-hat-re", dest="u_hat_re", type=float)
    p.add_argument("--u-hat-im", dest="u_hat_im", type=float)
    p.add_argument("--t0", type=float, help="end point of the integration (default 0.05)")
    p.add_argument("--t1", type=float, help="seed point (default 40)")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--radius", type=float, help="canonical-frame radius R (default max(50, 200/t))")
    p.add_argument("--t-scan", dest="t_scan", help="comma separated t values (default 1,2,4)")
    p.add_argument("--out", help="output directory (default $PV5_OUT_DIR or ./pv5_out)")
    p.add_argument("--format", choices=("json", "csv", "both"))


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pv5", description="Connection problem and Stokes data for a degenerate Painleve V.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("verify", help="full pipeline with pass/fail verdicts")
    _common(p)
    p = sub.add_parser("integrate", help="integrate from the large-t seed down to t0")
    _common(p)
    p = sub.add_parser("stokes", help="Stokes multipliers at one t")
    _common(p)
    p.add_argument("--t", type=float, default=2.0)
    p.add_argument("--state-json", help='explicit state {"t":..,"y":[re,im],"v":[re,im],"ln_u":[re,im]}')
    p = sub.add_parser("specialfn", help="evaluate a special function")
    p.add_argument("name", choices=SPECIAL_FUNCTIONS)
    p.add_argument("--z-re", type=float, required=True)
    p.add_argument("--z-im", type=float, default=0.0)
    p.add_argument("--arg", type=float, help="branch argument of z (default principal)")
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--mu-re", type=float, default=0.0)
    p.add_argument("--mu-im", type=float, default=0.0)
    p = sub.add_parser("lemma-check", help="approximant convergence over a t-sweep")
    p.add_argument("which", choices=tuple(LEMMA_SWEEPS))
    p.add_argument("--t-sweep", help="comma separated t values")
    _common(p)
    return parser


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _state_from_json(text: str) -> pvcore.PVState:
    try:
        d = json.loads(text)
        return pvcore.PVState(float(d["t"]), complex(*d["y"]), complex(*d["v"]), complex(*d.get("ln_u", [0, 0])),
                              complex(*d["sqrt_y"]) if "sqrt_y" in d else None)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad --state-json: {exc}") from exc


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = make_parser().parse_args(argv)
        if args.command == "specialfn":
            z = complex(args.z_re, args.z_im)
            val = cmd_specialfn(args.name, z, args.arg, args.kappa, complex(args.mu_re, args.mu_im))
            print(json.dumps({"name": args.name, "z": _cpair(z), "value": _cpair(val)}), file=stdout)
            return EXIT_OK
        config = build_config(args)
        out_dir = Path(config.output_dir)
        if args.command == "verify":
            rec, traj = cmd_verify(config)
            if config.format in ("json", "both"):
                _write(out_dir, "runrecord.json", rec.to_json())
            if config.format in ("csv", "both"):
                _write(out_dir, "trajectory.csv", traj.to_csv())
                _write(out_dir, "stokes.csv", lax.stokes_csv(rec.stokes))
            for v in rec.verdicts:
                print(f"{'PASS' if v.passed else 'FAIL'} {v.name}: {v.value:.3e} (tol {v.tolerance:.0e})", file=stdout)
            return EXIT_OK if rec.passed else EXIT_VERDICT
        if args.command == "integrate":
            traj = cmd_integrate(config)
            if config.format in ("json", "both"):
                _write(out_dir, "trajectory.json", traj.to_json())
            if config.format in ("csv", "both"):
                _write(out_dir, "trajectory.csv", traj.to_csv())
            end = traj.end
            print(json.dumps({"t": end.t, "sigma": _cpair(pvcore.extract_sigma(end)),
                              "r": _cpair(pvcore.extract_r(end)), "samples": len(traj.samples)}), file=stdout)
            return EXIT_OK
        if args.command == "stokes":
            state = _state_from_json(args.state_json) if args.state_json else None
            data = cmd_stokes(config, args.t, state)
            if config.format in ("json", "both"):
                _write(out_dir, "stokes.json", data.to_json())
            if config.format in ("csv", "both"):
                _write(out_dir, "stokes.csv", lax.stokes_csv([data]))
            print(json.dumps({"t": data.t_used, "s1": _cpair(data.s1), "s2": _cpair(data.s2)}), file=stdout)
            return EXIT_OK
        if args.command == "lemma-check":
            sweep = _parse_scan(args.t_sweep) if args.t_sweep else None
            res = cmd_lemma_check(args.which, config, sweep)
            reports = res.pop("_reports")
            if config.format in ("json", "both"):
                _write(out_dir, f"lemma_{args.which}.json", json.dumps(res, sort_keys=True, indent=1))
            if config.format in ("csv", "both"):
                for t, r in zip(res["t"], reports):
                    _write(out_dir, f"lemma_{args.which}_t{t:g}.csv", r.to_csv())
            print(json.dumps({k: res[k] for k in ("lemma", "t", "errors", "pass")}), file=stdout)
            return EXIT_OK if res["pass"] else EXIT_VERDICT
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PV5Error as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())
