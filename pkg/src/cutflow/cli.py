"""Command-line front end: parse a key=value config file, dispatch one
experiment, and write its CSV artifacts.

Usage: ``cutflow <config-path> [--override key=value ...]``.  Exit codes:
0 on success, 2 on a configuration error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EXPERIMENTS = ("converge", "sweep-gamma", "sweep-center", "static-bubble",
               "evolve-stokes", "evolve-nse")


class ConfigError(Exception):
    """Invalid configuration; the message is user-facing."""


# ---------------------------------------------------------------- parsing

def parse_config_file(path: str) -> dict[str, tuple[int, str]]:
    """Read ``key = value`` lines; returns {key: (line_number, raw value)}."""
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    out: dict[str, tuple[int, str]] = {}
    for ln, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected 'key = value', got {body!r}")
        key, val = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key {key!r} "
                              f"(first set on line {out[key][0]})")
        out[key] = (ln, val.strip())
    return out


def parse_overrides(pairs: list[str]) -> dict[str, tuple[int, str]]:
    out: dict[str, tuple[int, str]] = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError(f"override {p!r}: expected key=value")
        key, val = p.split("=", 1)
        out[key.strip()] = (0, val.strip())   # line 0 marks an override
    return out


def _float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}")


def _nonneg(s: str) -> float:
    v = _float(s)
    if v < 0:
        raise ConfigError(f"must be nonnegative, got {s}")
    return v


def _positive(s: str) -> float:
    v = _float(s)
    if v <= 0:
        raise ConfigError(f"must be positive, got {s}")
    return v


def _posint(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}")
    if v <= 0:
        raise ConfigError(f"must be positive, got {s}")
    return v


def _posint_list(s: str) -> tuple[int, ...]:
    return tuple(_posint(p) for p in s.split(","))


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(_float(p) for p in s.split(","))


def _triplet(s: str) -> tuple[int, int, int]:
    parts = s.split("/")
    if len(parts) != 3 or not all(p.strip().upper().startswith("P") for p in parts):
        raise ConfigError(f"expected a triplet like P2/P1/P0, got {s!r}")
    try:
        ks = tuple(int(p.strip()[1:]) for p in parts)
    except ValueError:
        raise ConfigError(f"expected a triplet like P2/P1/P0, got {s!r}")
    if ks[0] < 1 or ks[1] < 1 or ks[2] < 0:
        raise ConfigError(f"unsupported triplet {s!r}")
    return ks


def _str(s: str) -> str:
    return s


# Per-experiment schema: key -> (parser, default).  REQUIRED marks keys
# that must be present in the config.
REQUIRED = object()

_COMMON = {
    "outdir": (_str, "."),
    "jobs": (_posint, 1),
}

_MANUFACTURED = {
    "triplet": (_triplet, (2, 1, 0)),
    "xc": (_float, 0.5),
    "yc": (_float, 0.5),
    "radius": (_positive, 0.23),
    "nu_plus": (_positive, 2.0),
    "nu_minus": (_positive, 1.0),
}

_EVOLUTION = {
    "n": (_posint, 40),
    "triplet": (_triplet, (3, 2, 1)),
    "nu_plus": (_positive, 0.1),
    "nu_minus": (_positive, 0.05),
    "mu": (_positive, 50.0),
    "a1": (_positive, 0.3537),
    "a2": (_positive, 0.2037),
    "T": (_positive, 0.1),
    "dt": (_positive, 0.00025),
    "alpha0": (_nonneg, 0.01),
    "gamma0": (_nonneg, 0.01),
    "snapshot_every": (lambda s: max(0, int(s)), 0),
}

SCHEMAS: dict[str, dict] = {
    "converge": {**_COMMON, **_MANUFACTURED,
                 "n": (_posint_list, (10, 20, 40, 80)),
                 "gamma0": (_nonneg, 0.0),
                 "alpha0": (_nonneg, 0.0)},
    "sweep-gamma": {**_COMMON, **_MANUFACTURED,
                    "n": (_posint, 10),
                    "gamma0": (_float_list, REQUIRED)},
    "sweep-center": {**_COMMON, **_MANUFACTURED,
                     "n": (_posint, 10),
                     "xc": (_float_list,
                            tuple(np.linspace(0.45, 0.55, 30))),
                     "gamma0_stab": (_nonneg, 0.02)},
    "static-bubble": {**_COMMON,
                      "h": (_positive, 0.0125),
                      "mu": (_positive, 1.0),
                      "r": (_positive, 0.25),
                      "triplet": (_triplet, (2, 1, 0)),
                      "alpha0": (_nonneg, 0.01),
                      "gamma0": (_nonneg, 0.01)},
    "evolve-stokes": {**_COMMON, **_EVOLUTION},
    "evolve-nse": {**_COMMON, **_EVOLUTION,
                   "rho_plus": (_nonneg, 0.2),
                   "rho_minus": (_nonneg, 0.1)},
}


def resolve_config(raw: dict[str, tuple[int, str]]) -> tuple[str, dict]:
    """Validate raw entries against the experiment schema."""
    if "experiment" not in raw:
        raise ConfigError("missing required key: experiment")
    _, exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from "
                          + ", ".join(EXPERIMENTS))
    schema = SCHEMAS[exp]
    cfg: dict = {}
    unknown = [(ln, k) for k, (ln, _) in raw.items()
               if k != "experiment" and k not in schema]
    if unknown:
        msgs = [f"line {ln}: unknown key {k!r}" if ln else
                f"override: unknown key {k!r}" for ln, k in sorted(unknown)]
        raise ConfigError("; ".join(msgs))
    missing = [k for k, (_, dflt) in schema.items()
               if dflt is REQUIRED and k not in raw]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(sorted(missing)))
    for key, (parse, dflt) in schema.items():
        if key in raw:
            ln, val = raw[key]
            try:
                cfg[key] = parse(val)
            except ConfigError as exc:
                where = f"line {ln}" if ln else "override"
                raise ConfigError(f"{where}: key {key!r}: {exc}")
        else:
            cfg[key] = dflt
    return exp, cfg


def write_config_echo(exp: str, cfg: dict, outdir: str) -> None:
    """Resolved configuration, one key per line, deterministic order."""
    with open(os.path.join(outdir, "config.echo"), "w") as f:
        f.write(f"experiment = {exp}\n")
        for key in sorted(cfg):
            val = cfg[key]
            if key == "triplet":
                val = "/".join(f"P{k}" for k in val)
            elif isinstance(val, tuple):
                val = ",".join(repr(v) if isinstance(v, float) else str(v)
                               for v in val)
            f.write(f"{key} = {val}\n")


# ---------------------------------------------------------- experiments

def _spec_from(cfg):
    from .manufactured import ExactSolutionSpec
    return ExactSolutionSpec(center=(cfg["xc"], cfg["yc"]),
                             nu_plus=cfg["nu_plus"], nu_minus=cfg["nu_minus"])


def _run_converge(cfg: dict, outdir: str) -> int:
    from .manufactured import convergence_study
    ku, kp, kl = cfg["triplet"]
    if len(cfg["n"]) < 3:
        raise ConfigError("converge needs at least 3 mesh sizes in n")
    convergence_study(cfg["n"], k_u=ku, k_p=kp, k_lambda=kl,
                      gamma0=cfg["gamma0"], alpha0=cfg["alpha0"],
                      spec=_spec_from(cfg),
                      csv_path=os.path.join(outdir, "converge.csv"))
    return EXIT_OK


def _gamma_point(args):
    from .manufactured import compute_errors, solve_manufactured
    g0, n, ku, kp, kl, xc, yc, radius, nup, num = args
    from .manufactured import ExactSolutionSpec
    spec = ExactSolutionSpec(center=(xc, yc), nu_plus=nup, nu_minus=num)
    sol = solve_manufactured(n, spec, radius=radius, k_u=ku, k_p=kp,
                             k_lambda=kl, gamma0=g0)
    return float(g0), compute_errors(sol, spec).err_lambda


def _run_sweep_gamma(cfg: dict, outdir: str) -> int:
    ku, kp, kl = cfg["triplet"]
    if any(g < 0 for g in cfg["gamma0"]):
        raise ConfigError("gamma0 values must be nonnegative")
    args = [(g0, cfg["n"], ku, kp, kl, cfg["xc"], cfg["yc"], cfg["radius"],
             cfg["nu_plus"], cfg["nu_minus"]) for g0 in cfg["gamma0"]]
    rows = _pmap(_gamma_point, args, cfg["jobs"])
    with open(os.path.join(outdir, "gamma.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["gamma0", "errLambda"])
        for g0, e in rows:
            w.writerow([repr(g0), repr(e)])
    return EXIT_OK


def _center_point(args):
    from .manufactured import (ExactSolutionSpec, compute_errors,
                               solve_manufactured)
    xc, n, ku, kp, kl, radius, g_stab, nup, num = args
    spec = ExactSolutionSpec(center=(float(xc), 0.5), nu_plus=nup,
                             nu_minus=num)
    errs = []
    for g0 in (0.0, g_stab):
        try:
            sol = solve_manufactured(n, spec, radius=radius, k_u=ku, k_p=kp,
                                     k_lambda=kl, gamma0=g0)
            errs.append(compute_errors(sol, spec).err_lambda)
        except Exception:
            errs.append(float("nan"))
    return float(xc), errs[0], errs[1]


def _run_sweep_center(cfg: dict, outdir: str) -> int:
    ku, kp, kl = cfg["triplet"]
    args = [(xc, cfg["n"], ku, kp, kl, cfg["radius"], cfg["gamma0_stab"],
             cfg["nu_plus"], cfg["nu_minus"]) for xc in cfg["xc"]]
    rows = _pmap(_center_point, args, cfg["jobs"])
    with open(os.path.join(outdir, "center.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["xc", "errLambda_unstab", "errLambda_stab"])
        for row in rows:
            w.writerow([repr(v) for v in row])
    return EXIT_OK


def _run_static_bubble(cfg: dict, outdir: str) -> int:
    from .unsteady import static_bubble
    ku, kp, kl = cfg["triplet"]
    pp, pm, dp, dev = static_bubble(cfg["h"], mu=cfg["mu"], r=cfg["r"],
                                    k_u=ku, k_p=kp, k_lambda=kl,
                                    alpha0=cfg["alpha0"], gamma0=cfg["gamma0"])
    with open(os.path.join(outdir, "bubble.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["h", "p_plus", "p_minus", "delta_p", "deviation"])
        w.writerow([repr(v) for v in (cfg["h"], pp, pm, dp, dev)])
    return EXIT_OK


def _run_evolution(cfg: dict, outdir: str, nse: bool) -> int:
    from .unsteady import nse_evolution, stokes_evolution
    ku, kp, kl = cfg["triplet"]
    params = {k: cfg[k] for k in ("nu_plus", "nu_minus", "mu", "a1", "a2",
                                  "T", "dt", "alpha0", "gamma0")}
    if nse:
        params.update(rho_plus=cfg["rho_plus"], rho_minus=cfg["rho_minus"])
        runner = nse_evolution
    else:
        runner = stokes_evolution
    record = runner(n=cfg["n"], params=params, k_u=ku, k_p=kp, k_lambda=kl,
                    snapshot_every=cfg["snapshot_every"], outdir=outdir)
    record.dump_csv(os.path.join(outdir, "evolution.csv"))
    if record.events:
        with open(os.path.join(outdir, "events.log"), "w") as f:
            for t, axis, msg in record.events:
                f.write(f"t={t:.10g} axis={axis} {msg}\n")
    return EXIT_NUMERICAL if record.aborted else EXIT_OK


def _pmap(fn, items, jobs: int):
    """Map preserving order, optionally across processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


RUNNERS = {
    "converge": _run_converge,
    "sweep-gamma": _run_sweep_gamma,
    "sweep-center": _run_sweep_center,
    "static-bubble": _run_static_bubble,
    "evolve-stokes": lambda cfg, outdir: _run_evolution(cfg, outdir, False),
    "evolve-nse": lambda cfg, outdir: _run_evolution(cfg, outdir, True),
}


def run(config_path: str, overrides: list[str]) -> int:
    try:
        raw = parse_config_file(config_path)
        raw.update(parse_overrides(overrides))
        exp, cfg = resolve_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = cfg["outdir"]
    os.makedirs(outdir, exist_ok=True)
    write_config_echo(exp, cfg, outdir)
    try:
        return RUNNERS[exp](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cutflow",
        description="Two-phase interface flow experiments on a fixed mesh.")
    parser.add_argument("config", help="path to a key=value config file")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config entry (repeatable)")
    args = parser.parse_args(argv)
    return run(args.config, args.override)


if __name__ == "__main__":
    sys.exit(main())
