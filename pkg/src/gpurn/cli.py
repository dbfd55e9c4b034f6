"""Command-line entry point: ``gpurn <command> [flags]``."""

import argparse
import io as _io
import sys
from dataclasses import dataclass

import numpy as np

from . import io
from .kron_embedding import lagrangian_array
from .mogulskii import mogulskii_table
from .probes import cramer_discrepancy
from .reproduce import verify
from .urn_model import (
    SpecValidationError,
    exact_distribution,
    simulate_batch,
    validate_spec,
)
from .variational import (
    DegenerateSpecError,
    EndpointEvent,
    InfeasibleEventError,
    OptimizerOptions,
    cramer_profile,
    optimize_endpoint,
    rate_profile,
    zero_cost_flow,
)

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NONCONVERGENCE, EXIT_IO = 0, 2, 3, 4, 5

COMMANDS = ("validate", "simulate", "exact-dist", "mogulskii-table", "lagrangian-table",
            "rate-endpoint", "zero-cost", "compare-cramer", "verify")

NEEDS_SPEC = {"validate", "simulate", "exact-dist", "lagrangian-table", "rate-endpoint",
              "zero-cost", "compare-cramer"}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    spec_path: str = None
    N: int = 100
    T: int = 200
    seed: int = 0
    grid: int = None
    floor: float = None
    event: tuple = None
    out: str = None
    format: str = "csv"
    threads: int = 1
    runs: int = 10000
    restarts: int = 8
    K: int = None

    def check(self):
        if self.command not in COMMANDS:
            raise ConfigError("unknown command %r" % self.command)
        if self.command in NEEDS_SPEC and not self.spec_path:
            raise ConfigError("%s needs --spec" % self.command)
        if self.command == "mogulskii-table" and not (self.spec_path or self.K):
            raise ConfigError("mogulskii-table needs --spec or --K")
        if self.command == "rate-endpoint" and self.event is None:
            raise ConfigError("rate-endpoint needs --event LO,HI")
        for name in ("N", "T", "threads", "runs", "restarts"):
            if getattr(self, name) < 1:
                raise ConfigError("--%s must be positive" % name)
        if self.grid is not None and self.grid < 2:
            raise ConfigError("--grid must be >= 2")
        if self.floor is not None and self.floor < 0:
            raise ConfigError("--floor must be >= 0")
        if self.format not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")


def _parse_event(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI, got %r" % text)
    return lo, hi


def build_parser():
    p = argparse.ArgumentParser(prog="gpurn", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", dest="spec_path")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--T", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int)
    p.add_argument("--floor", type=float)
    p.add_argument("--event", type=_parse_event)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--runs", type=int, default=10000, help="simulated histories (simulate)")
    p.add_argument("--restarts", type=int, default=8, help="optimizer restarts (rate-endpoint)")
    p.add_argument("--K", type=int, help="capacity for mogulskii-table without --spec")
    return p


def _emit(cfg, text):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(cfg, header, rows):
    if cfg.format == "json":
        doc = [dict(zip(header, (_jsonable(x) for x in row))) for row in rows]
        return io.format_json(doc)
    return io.format_csv(header, rows)


def _jsonable(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def _cmd_validate(cfg, spec):
    report = validate_spec(spec)
    lines = ["k,alpha,value,reason"] + ["%d,%s,%s,%s" % (v.k, io._fmt(v.alpha), io._fmt(v.value),
                                                          v.reason) for v in report]
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK if not report else EXIT_VALIDATION


def _cmd_simulate(cfg, spec):
    steps = simulate_batch(spec, cfg.N, cfg.runs, seed=cfg.seed, threads=cfg.threads)
    counts = np.bincount(steps.sum(axis=1), minlength=spec.K * cfg.N + 1)
    freq = counts / cfg.runs
    rows = io.distribution_rows(freq, cfg.N)
    if cfg.format == "json":
        doc = {"N": cfg.N, "runs": cfg.runs, "seed": cfg.seed, "psi_init": spec.psi_init,
               "first_history": [int(s) for s in steps[0]],
               "histogram": [{"m": m, "psi": psi, "probability": p} for m, psi, p in rows]}
        _emit(cfg, io.format_json(doc))
    else:
        _emit(cfg, io.format_csv(io.DIST_HEADER, rows))
    return EXIT_OK


def _cmd_exact(cfg, spec):
    probs = exact_distribution(spec, cfg.N)
    _emit(cfg, _table(cfg, io.DIST_HEADER, io.distribution_rows(probs, cfg.N)))
    return EXIT_OK


def _cmd_mogulskii(cfg, spec):
    K = spec.K if spec is not None else cfg.K
    rows = mogulskii_table(K, cfg.grid or 513)
    _emit(cfg, _table(cfg, io.MOGULSKII_HEADER, rows))
    return EXIT_OK


def _cmd_lagrangian(cfg, spec):
    g = np.linspace(0.0, spec.K, cfg.grid or 65)
    A, B = np.meshgrid(g, g, indexing="ij")
    with np.errstate(invalid="ignore"):
        L = lagrangian_array(spec, A, B, cfg.floor or 0.0)
    rows = [(a, b, l) for a, b, l in zip(A.ravel(), B.ravel(), L.ravel())]
    _emit(cfg, _table(cfg, ("alpha", "beta", "L"), rows))
    return EXIT_OK


def _profile_rows(spec, path, floor):
    v, psi, rates = rate_profile(spec, path, floor)
    cram = cramer_profile(spec, path)
    tau = (np.arange(len(v)) + 0.5) / len(v)
    return [(j, t, a, b, r, c) for j, (t, a, b, r, c) in enumerate(zip(tau, v, psi, rates, cram))]


def _cmd_rate(cfg, spec):
    opts = OptimizerOptions(restarts=cfg.restarts, seed=cfg.seed, threads=cfg.threads)
    if cfg.floor is not None:
        opts.floor = cfg.floor
    res = optimize_endpoint(spec, EndpointEvent(*cfg.event), cfg.T, opts)
    if cfg.format == "json":
        _emit(cfg, io.format_json(res.to_dict()))
    else:
        _emit(cfg, io.format_csv(io.PROFILE_HEADER,
                                 _profile_rows(spec, res.optimal_path, opts.floor)))
    return EXIT_OK if res.converged else EXIT_NONCONVERGENCE


def _cmd_zero_cost(cfg, spec):
    flow = zero_cost_flow(spec, cfg.T, cfg.floor or 0.0)
    rows = _profile_rows(spec, flow.path, cfg.floor or 0.0)
    if cfg.format == "json":
        doc = {"initial_velocities": flow.initial_velocities,
               "path": [float(x) for x in flow.path.values],
               "cells": [dict(zip(io.PROFILE_HEADER, (_jsonable(x) for x in r))) for r in rows]}
        _emit(cfg, io.format_json(doc))
    else:
        _emit(cfg, io.format_csv(io.PROFILE_HEADER, rows))
    return EXIT_OK


def _cmd_cramer(cfg, spec):
    report = cramer_discrepancy(spec, cfg.grid or 64, cfg.floor or 0.0)
    _emit(cfg, _table(cfg, ("alpha", "beta", "local_rate", "cramer_rate"), list(report.rows())))
    sys.stderr.write("min(local_rate - cramer_rate) over finite cells: %s\n"
                     % io._fmt(report.min_excess))
    return EXIT_OK


def _cmd_verify(cfg, spec):
    buf = _io.StringIO()
    ok = verify(seed=cfg.seed, out=lambda line: buf.write(line + "\n"))
    _emit(cfg, buf.getvalue())
    return EXIT_OK if ok else EXIT_NONCONVERGENCE


HANDLERS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "exact-dist": _cmd_exact,
    "mogulskii-table": _cmd_mogulskii,
    "lagrangian-table": _cmd_lagrangian,
    "rate-endpoint": _cmd_rate,
    "zero-cost": _cmd_zero_cost,
    "compare-cramer": _cmd_cramer,
    "verify": _cmd_verify,
}


def run(cfg):
    """Execute one command; returns the process exit status."""
    try:
        cfg.check()
    except ConfigError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return EXIT_CONFIG
    try:
        spec = io.load_spec(cfg.spec_path) if cfg.spec_path else None
        if spec is not None and cfg.command != "validate":
            report = validate_spec(spec)
            if report:
                sys.stderr.write("spec validation failed: %d violations (first: %r)\n"
                                 % (len(report), report[0]))
                return EXIT_VALIDATION
        return HANDLERS[cfg.command](cfg, spec)
    except (SpecValidationError, DegenerateSpecError) as exc:
        sys.stderr.write("spec error: %s\n" % exc)
        return EXIT_VALIDATION
    except InfeasibleEventError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write("I/O error: %s\n" % exc)
        return EXIT_IO
    except ValueError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(args))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
