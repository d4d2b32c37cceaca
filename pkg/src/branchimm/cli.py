"""Command-line front end.

Every command writes one artifact (JSON, or CSV where it makes sense) that
embeds the resolved run configuration, a SHA-256 of the model file and a
timestamp.  Exit codes: 0 success, 1 invalid model, 2 inconclusive method,
3 truncation unstable, 4 a crosscheck failed, 64 bad command-line usage.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import classify as cl
from . import oracle, simulator
from .crosscheck import run_crosscheck
from .model import ModelError, ModelSpec, gen_fns, smallest_fixed_point, upward_mean

__all__ = ["COMMANDS", "RunConfig", "ConfigError", "run", "main"]

COMMANDS = ("validate", "classify", "simulate", "hitting", "stationary", "bounds", "crosscheck")

EXIT_OK, EXIT_MODEL, EXIT_INCONCLUSIVE, EXIT_UNSTABLE, EXIT_CHECK = range(5)
EXIT_USAGE = 64  # kept clear of 2, which means "inconclusive" here

SAMPLE_S = (0.0, 0.25, 0.5, 0.75, 1.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str
    command: str
    truncation: int = 128
    seed: int = 0
    replicas: int = 10_000
    horizon: float = 100.0
    state_cap: int = simulator.DEFAULT_STATE_CAP
    jump_cap: int = simulator.DEFAULT_JUMP_CAP
    tol: float | None = None
    out: str | None = None
    format: str = "json"
    x0: int = 1
    states: int = 20

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        for name in ("truncation", "replicas", "horizon", "state_cap", "jump_cap", "states"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.seed < 0 or self.x0 < 0:
            raise ConfigError("seed and x0 must be nonnegative")
        if self.truncation < 2:
            raise ConfigError("truncation must be at least 2")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def resolved_tol(self) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-8 if self.command == "stationary" else 1e-6

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["tol"] = self.resolved_tol()
        return d


class _Exit(Exception):
    def __init__(self, code: int, result: dict):
        super().__init__(code)
        self.code = code
        self.result = result


# -- commands ------------------------------------------------------------------------


def _validate(spec: ModelSpec, cfg: RunConfig) -> dict:
    g = gen_fns(spec, np.array(SAMPLE_S))
    return {
        "m": spec.m, "M": spec.M, "L": upward_mean(spec), "q": smallest_fixed_point(spec),
        "gamma": spec.gamma, "irreducible": spec.irreducible,
        "samples": {"s": list(SAMPLE_S), "F": g.F.tolist(), "G": g.G.tolist(), "A": g.A.tolist(), "B": g.B.tolist()},
    }


def _classify(spec: ModelSpec, cfg: RunConfig) -> dict:
    report = cl.classify(spec, bound_states=range(1, cfg.states + 1))
    out = report.to_dict()
    if report.any_inconclusive:
        raise _Exit(EXIT_INCONCLUSIVE, out)
    return out


def _simulate(spec: ModelSpec, cfg: RunConfig):
    if cfg.replicas == 1:
        path = simulator.simulate(spec, cfg.x0, cfg.horizon, cfg.state_cap, cfg.jump_cap, cfg.seed, 0)
        if cfg.format == "csv":
            return path.to_csv()
        return {"path": path.summary(), "jump_times": path.jump_times.tolist(), "states": path.states.tolist()}
    ens = simulator.run_ensemble(spec, cfg.x0, cfg.horizon, cfg.replicas, cfg.seed, cfg.state_cap, cfg.jump_cap)
    if cfg.format == "csv":
        rows = ["replica,terminal,state,end_time,jumps"]
        rows += [f"{k},{simulator._NAMES[int(c)]},{int(x)},{float(t)!r},{int(n)}"
                 for k, (c, x, t, n) in enumerate(zip(ens.codes, ens.states, ens.end_times, ens.jumps))]
        return "\n".join(rows) + "\n"
    return ens.summary()


def _bounds_table(spec: ModelSpec, states: Sequence[int]) -> dict:
    try:
        rows = {}
        for i in states:
            lo, hi = cl.extinction_time_bounds(spec, i)
            rows[i] = {"lower": lo, "upper": hi}
        return {"status": "ok", "rows": rows}
    except cl.CriterionNotApplicable as exc:
        return {"status": cl.NOT_APPLICABLE, "reason": str(exc)}


def _hitting(spec: ModelSpec, cfg: RunConfig) -> dict:
    i = cfg.x0
    if i < 1:
        raise ConfigError("hitting needs x0 >= 1")
    hit = oracle.stable_hitting_times(spec, N=cfg.truncation, tol=cfg.resolved_tol(), i_max=max(i, 20))
    est = simulator.estimate_hitting(spec, i, cfg.replicas, cfg.seed, horizon=cfg.horizon,
                                     state_cap=cfg.state_cap, jump_cap=cfg.jump_cap)
    bounds = _bounds_table(spec, [i])
    out = {"state": i, "oracle": {"mean": hit[i], "N": hit.N}, "monte_carlo": est.to_dict(), "bounds": bounds}
    if spec.gamma > 0:
        out["oracle"]["return_time_from_0"] = oracle.expected_return_time(spec, hit)
    return out


def _stationary(spec: ModelSpec, cfg: RunConfig):
    st = oracle.stable_stationary(spec, N=cfg.truncation, tol=cfg.resolved_tol())
    if cfg.format == "csv":
        return "state,mu\n" + "".join(f"{j},{float(p)!r}\n" for j, p in enumerate(st.mu))
    out = st.to_dict()
    if spec.is_power:
        out["gf_residual"] = oracle.stationary_gf_residual(spec, st.mu)
    return out


def _bounds(spec: ModelSpec, cfg: RunConfig):
    table = _bounds_table(spec, range(1, cfg.states + 1))
    if cfg.format == "csv" and table["status"] == "ok":
        return "state,lower,upper\n" + "".join(
            f"{i},{r['lower']!r},{r['upper']!r}\n" for i, r in table["rows"].items())
    return table


def _crosscheck(spec: ModelSpec, cfg: RunConfig) -> dict:
    res = run_crosscheck(spec, seed=cfg.seed, replicas=cfg.replicas, N=cfg.truncation, states=cfg.states)
    out = res.to_dict()
    if not res.passed:
        raise _Exit(EXIT_CHECK, out)
    return out


_HANDLERS = {"validate": _validate, "classify": _classify, "simulate": _simulate, "hitting": _hitting,
             "stationary": _stationary, "bounds": _bounds, "crosscheck": _crosscheck}


# -- orchestration ---------------------------------------------------------------------


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _artifact(cfg: RunConfig, digest: str, result) -> dict:
    return {"config": cfg.to_dict(), "model_sha256": digest, "timestamp": _timestamp(),
            "result": cl._jsonable(result)}


def _emit(cfg: RunConfig, digest: str, result) -> None:
    if isinstance(result, str):
        footer = f"# model_sha256={digest} timestamp={_timestamp()} config={json.dumps(cfg.to_dict(), sort_keys=True)}\n"
        text = result + footer
    else:
        text = json.dumps(_artifact(cfg, digest, result), sort_keys=True, indent=2) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    try:
        raw = Path(cfg.model).read_bytes()
    except OSError as exc:
        print(f"error: cannot read model file: {exc}", file=sys.stderr)
        return EXIT_MODEL
    digest = hashlib.sha256(raw).hexdigest()
    try:
        spec = ModelSpec.from_json(raw.decode("utf-8"))
    except (ModelError, UnicodeDecodeError) as exc:
        print(f"error: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    try:
        result = _HANDLERS[cfg.command](spec, cfg)
    except _Exit as stop:
        _emit(cfg, digest, stop.result)
        return stop.code
    except oracle.TruncationUnstable as exc:
        print(f"error: truncation unstable: {exc}", file=sys.stderr)
        _emit(cfg, digest, {"status": "truncation_unstable", "message": str(exc)})
        return EXIT_UNSTABLE
    except (oracle.SingularSystem, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _emit(cfg, digest, {"status": cl.INCONCLUSIVE, "message": str(exc)})
        return EXIT_INCONCLUSIVE
    _emit(cfg, digest, result)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="branchimm",
                                description="Classify, simulate and cross-check branching processes with immigration.")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--truncation", type=int, default=128, help="starting truncation N (doubled until stable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--state-cap", type=int, default=simulator.DEFAULT_STATE_CAP)
    p.add_argument("--jump-cap", type=int, default=simulator.DEFAULT_JUMP_CAP)
    p.add_argument("--tol", type=float, default=None, help="N-stability tolerance (default 1e-8 stationary, 1e-6 hitting)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--x0", type=int, default=1, help="initial state for simulate/hitting")
    p.add_argument("--states", type=int, default=20, help="largest initial state in bound tables")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_dict(vars(args))
    except ConfigError as exc:
        parser.error(str(exc))
    return run(cfg)
