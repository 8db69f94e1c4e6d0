"""Command-line front end: subcommands, sweeps, CSV emission, verification.

All data commands print CSV (one header row, comma separator, floats at 17
significant digits) so identical inputs give byte-identical output;
``verify`` prints one PASS/FAIL line per criterion instead.  Exit codes:
0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import measures, oracle, pressure, tropical
from .measures import MeasureError
from .model import ModelError, ModelParams, block_word, params_from_text
from .oracle import OracleError
from .pressure import PressureError
from .series import SeriesDivergenceError, ToleranceError
from .tropical import TropicalError

_MODEL_KEY = re.compile(r"(N|p|theta|alpha_u|alpha\.\d+\.\d+)$")
_OPTION_KEYS = ("beta", "tol", "depth", "tie_tol")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated model plus per-command numeric options."""

    model: ModelParams
    command: str
    beta: float | None = None
    beta_range: tuple[float, float, int] | None = None
    tol: float = 1e-12
    depth: int = 60
    tie_tol: float = tropical.DEFAULT_TIE_TOL
    cylinders: int = 0
    n_max: int = 6
    grid: dict = field(default_factory=dict)
    output: str | None = None


def _parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must be lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"malformed range {text!r}") from None
    if steps < 1 or hi < lo:
        raise ConfigError(f"need steps >= 1 and hi >= lo in {text!r}")
    return lo, hi, steps


def parse_config(text: str, overrides: dict) -> tuple[ModelParams, dict]:
    """Split a key=value config into validated model params and options.

    Recognised option keys: beta, tol, depth, tie_tol; everything else must
    be a model key.  ``overrides`` (from command-line flags) win over file
    values.  Errors name the offending key.
    """
    model_lines, options = [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key = line.partition("=")[0].strip()
        if key in _OPTION_KEYS:
            value = line.partition("=")[2].strip()
            try:
                options[key] = float(value)
            except ValueError:
                raise ConfigError(f"key {key!r}: malformed number {value!r}") from None
        elif _MODEL_KEY.fullmatch(key):
            model_lines.append(line)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    params = params_from_text("\n".join(model_lines))
    for key, value in overrides.items():
        if value is not None:
            options[key] = value
    return params, options


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _emit(header: list[str], rows: list[list], stream) -> None:
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _branch_label(zone: tropical.ZoneLabel) -> str:
    order = (tropical.BRANCH_AVERAGE, tropical.BRANCH_ALPHA, tropical.BRANCH_THETA)
    return "+".join(name for name in order if name in zone.active_branches)


def _worker_count() -> int:
    env = os.environ.get("FREEZE_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FREEZE_LAB_THREADS must be an integer, got {env!r}") from None
    return min(8, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

_GAMMA_HEADER = ["alpha_u", "alpha_p1", "gamma", "zone", "branch"]


def _gamma_row(params: ModelParams, tie_tol: float) -> list:
    zone = tropical.zone_classify(params, tie_tol=tie_tol)
    return [params.alpha_u, params.alpha_first(2), zone.gamma, zone.label,
            _branch_label(zone)]


def _cmd_gamma(cfg: RunConfig, stream) -> None:
    _emit(_GAMMA_HEADER, [_gamma_row(cfg.model, cfg.tie_tol)], stream)


def _with_alpha_p1(params: ModelParams, value: float) -> ModelParams:
    """Rebase block 2's slopes so its first slope is ``value`` (gaps kept)."""
    rows = list(params.alpha)
    base = rows[1][0]
    rows[1] = tuple(value + (a - base) for a in rows[1])
    return ModelParams(params.N, params.p, params.theta, tuple(rows), params.alpha_u)


def _cmd_zones(cfg: RunConfig, stream) -> None:
    a_u = cfg.grid["alpha_u"]
    a_p1 = cfg.grid["alpha_p1"]
    rows = []
    from .model import validate
    for i in range(a_u[2]):
        u_val = a_u[0] + (a_u[1] - a_u[0]) * i / max(a_u[2] - 1, 1)
        for k in range(a_p1[2]):
            p1_val = a_p1[0] + (a_p1[1] - a_p1[0]) * k / max(a_p1[2] - 1, 1)
            candidate = _with_alpha_p1(
                ModelParams(cfg.model.N, cfg.model.p, cfg.model.theta,
                            cfg.model.alpha, u_val), p1_val)
            if validate(candidate):
                print(f"zones: skipping invalid grid point alpha_u={u_val} "
                      f"alpha_p1={p1_val}", file=sys.stderr)
                continue
            rows.append(_gamma_row(candidate, cfg.tie_tol))
    _emit(_GAMMA_HEADER, rows, stream)


_PRESSURE_HEADER = ["beta", "P", "P_minus_logp", "g", "gamma", "zone",
                    "residual", "terms_used"]


def _pressure_row(params: ModelParams, beta: float, tol: float,
                  tie_tol: float) -> list:
    sol = pressure.solve_pressure(params, beta, tol=tol)
    zone = tropical.zone_classify(params, tie_tol=tie_tol)
    return [beta, sol.P, sol.P_minus_logp, sol.g, sol.gamma, zone.label,
            sol.residual, sol.terms_used]


def _cmd_pressure(cfg: RunConfig, stream) -> None:
    _emit(_PRESSURE_HEADER,
          [_pressure_row(cfg.model, cfg.beta, cfg.tol, cfg.tie_tol)], stream)


def _cmd_sweep(cfg: RunConfig, stream) -> None:
    lo, hi, steps = cfg.beta_range
    betas = [lo + (hi - lo) * i / max(steps - 1, 1) for i in range(steps)]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = list(pool.map(
            lambda b: _pressure_row(cfg.model, b, cfg.tol, cfg.tie_tol), betas))
    _emit(_PRESSURE_HEADER, rows, stream)


def _measures_header(n_blocks: int) -> list[str]:
    return (["beta"] + [f"nu_O{j}" for j in range(1, n_blocks + 1)] + ["nu_u"]
            + [f"mu_O{j}" for j in range(1, n_blocks + 1)] + ["mu_u"]
            + ["ratio_12", "zone", "predicted_w1", "predicted_w2"])


def _cmd_measures(cfg: RunConfig, stream) -> None:
    params = cfg.model
    sol = pressure.solve_pressure(params, cfg.beta, tol=cfg.tol)
    report = measures.measure_report(params, sol, tie_tol=cfg.tie_tol)
    row = ([cfg.beta] + list(report.nu_O) + [report.nu_u]
           + list(report.mu_O) + [report.mu_u]
           + [report.ratio_12, report.zone.label,
              report.predicted.weights[0], report.predicted.weights[1]])
    _emit(_measures_header(params.N), [row], stream)
    if cfg.cylinders > 0:
        stream.write("\n")
        rows = []
        for j in range(1, params.N + 1):
            for length in range(1, cfg.cylinders + 1):
                for ranks in _lex_words(params.p, length):
                    word = block_word(j, ranks)
                    rows.append([cfg.beta, j, "".join(str(i) for i in ranks),
                                 measures.nu_cylinder(params, sol, word)])
        _emit(["beta", "block", "word", "nu"], rows, stream)


def _lex_words(p: int, length: int):
    import itertools
    return itertools.product(range(1, p + 1), repeat=length)


def _cmd_subaction(cfg: RunConfig, stream) -> None:
    params = cfg.model
    sol = pressure.solve_pressure(params, cfg.beta, tol=cfg.tol)
    sub = tropical.subaction_eigenvector(params, tie_tol=cfg.tie_tol)
    hmap = measures.subaction_from_H(params, sol, n_max=cfg.n_max)
    rows = []
    for state in measures.default_states(params, n_max=cfg.n_max):
        kind = measures._state_kind(state)
        label = {"sigma": lambda: f"sigma_{kind[1]}",
                 "ring": lambda: f"ring_{kind[1]}_{kind[2]}",
                 "u": lambda: "u"}[kind[0]]()
        v_val = tropical.calibrated_subaction_at(params, state, sub)
        h_val = hmap[state]
        rows.append([cfg.beta, label, v_val, h_val, abs(h_val - v_val)])
    _emit(["beta", "state", "V", "logH_over_beta", "abs_diff"], rows, stream)


def _cmd_oracle(cfg: RunConfig, stream) -> None:
    params = cfg.model
    chain = oracle.build_chain(params, cfg.beta, cfg.depth)
    cm = oracle.chain_measures(chain)
    prediction = measures.predicted_limit(params, tie_tol=cfg.tie_tol)
    ratio = cm.mu_O[0] / cm.mu_O[1] if params.N >= 2 else math.nan
    row = ([cfg.beta] + list(cm.nu_O) + [cm.nu_u] + list(cm.mu_O) + [cm.mu_u]
           + [ratio, prediction.zone.label,
              prediction.weights[0], prediction.weights[1],
              cm.lam, oracle.error_bound(params, cfg.beta, cfg.depth)])
    _emit(_measures_header(params.N) + ["lambda", "bound"], [row], stream)


def _cmd_verify(only: str | None, stream) -> int:
    from . import acceptance
    names = None
    if only:
        names = [n.strip() for n in only.split(",") if n.strip()]
        unknown = [n for n in names if n.upper() not in acceptance.criterion_names()]
        if unknown:
            raise ConfigError(f"unknown criteria: {', '.join(unknown)}")
    results = acceptance.run_battery(names)
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        stream.write(f"{res.name} {status} ({res.seconds:.1f}s): {res.detail}\n")
        failures += 0 if res.passed else 1
    stream.write(f"{len(results) - failures}/{len(results)} criteria passed\n")
    return 0 if failures == 0 else 2


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freeze-lab",
        description="Freezing behaviour of Gibbs measures for layered shift potentials")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, needs_params: bool = True, **kwargs):
        cmd = sub.add_parser(name, **kwargs)
        if needs_params:
            cmd.add_argument("--params", required=True, metavar="FILE",
                             help="key = value model configuration file")
            cmd.add_argument("--output", metavar="PATH",
                             help="write CSV here instead of standard output")
            cmd.add_argument("--tie-tol", type=float, default=None,
                             help="tolerance for zone-boundary ties")
        return cmd

    add("gamma", help="freezing rate and zone for the configured parameters")

    zones = add("zones", help="gamma/zone classification over a parameter grid")
    zones.add_argument("--grid", nargs=2, required=True,
                       metavar=("alpha_u=lo:hi:steps", "alpha_p1=lo:hi:steps"))

    press = add("pressure", help="solve the pressure at one inverse temperature")
    press.add_argument("--beta", type=float, default=None)
    press.add_argument("--tol", type=float, default=None)

    sweep = add("sweep", help="pressure solves over a beta range")
    sweep.add_argument("--beta", required=True, metavar="lo:hi:steps")
    sweep.add_argument("--tol", type=float, default=None)

    meas = add("measures", help="eigenmeasure and Gibbs weights at one beta")
    meas.add_argument("--beta", type=float, default=None)
    meas.add_argument("--tol", type=float, default=None)
    meas.add_argument("--cylinders", type=int, default=0, metavar="DEPTH",
                      help="also list block-cylinder masses up to this depth")

    suba = add("subaction", help="calibrated subaction vs log-scale eigenfunction")
    suba.add_argument("--beta", type=float, default=None)
    suba.add_argument("--tol", type=float, default=None)
    suba.add_argument("--nmax", type=int, default=6,
                      help="track rings up to this depth")

    orac = add("oracle", help="finite-state truncated-chain ground truth")
    orac.add_argument("--beta", type=float, default=None)
    orac.add_argument("--depth", type=int, default=None, metavar="L")

    verify = add("verify", needs_params=False,
                 help="run the acceptance battery (built-in parameter sets)")
    verify.add_argument("--only", metavar="A1,A3,...",
                        help="comma-separated subset of criteria")
    return parser


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required value for {flag} "
                          f"(flag or config-file key)")
    return value


def _load_config(args) -> RunConfig:
    try:
        with open(args.params, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.params}: {exc}") from exc
    beta_arg = getattr(args, "beta", None)  # sweep passes a range string
    overrides = {
        "beta": beta_arg if isinstance(beta_arg, float) else None,
        "tol": getattr(args, "tol", None),
        "tie_tol": getattr(args, "tie_tol", None),
        "depth": getattr(args, "depth", None),
    }
    params, options = parse_config(text, overrides)
    cfg = RunConfig(model=params, command=args.command, output=args.output)
    if "tol" in options:
        cfg.tol = float(options["tol"])
        if cfg.tol <= 0:
            raise ConfigError("tol must be positive")
    if "tie_tol" in options:
        cfg.tie_tol = float(options["tie_tol"])
        if cfg.tie_tol < 0:
            raise ConfigError("tie_tol must be nonnegative")
    if "depth" in options:
        cfg.depth = int(options["depth"])
        if cfg.depth < 1:
            raise ConfigError("depth must be >= 1")
    if "beta" in options:
        cfg.beta = float(options["beta"])
        if cfg.beta < 0:
            raise ConfigError("beta must be nonnegative")
    if args.command == "sweep":
        cfg.beta_range = _parse_range(args.beta)
    elif args.command in ("pressure", "measures", "subaction", "oracle"):
        _require(cfg.beta, "--beta")
    if args.command == "zones":
        for item in args.grid:
            key, _, rng = item.partition("=")
            if key not in ("alpha_u", "alpha_p1"):
                raise ConfigError(f"grid axis must be alpha_u or alpha_p1, got {key!r}")
            cfg.grid[key] = _parse_range(rng)
        if set(cfg.grid) != {"alpha_u", "alpha_p1"}:
            raise ConfigError("zones needs both alpha_u and alpha_p1 grid axes")
    if args.command == "measures":
        cfg.cylinders = max(0, args.cylinders)
    if args.command == "subaction":
        cfg.n_max = max(1, args.nmax)
    return cfg


_DISPATCH = {
    "gamma": _cmd_gamma,
    "zones": _cmd_zones,
    "pressure": _cmd_pressure,
    "sweep": _cmd_sweep,
    "measures": _cmd_measures,
    "subaction": _cmd_subaction,
    "oracle": _cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args.only, sys.stdout)
        cfg = _load_config(args)
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8") as stream:
                _DISPATCH[cfg.command](cfg, stream)
        else:
            _DISPATCH[cfg.command](cfg, sys.stdout)
        return 0
    except (ConfigError, ModelError) as exc:
        print(f"freeze-lab: configuration error: {exc}", file=sys.stderr)
        return 1
    except (PressureError, OracleError, TropicalError, SeriesDivergenceError,
            ToleranceError, MeasureError) as exc:
        print(f"freeze-lab: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
