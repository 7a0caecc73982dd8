"""Command-line front end: ``rate``, ``sweep``, ``simulate`` and ``verify-bounds``.

Exit codes: 0 success/feasible, 1 usage or configuration error, 2 infeasible
or aborted, 3 bound-verification failure. ``DIQKD_LOG_LEVEL`` sets the log
level.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import coverage
from . import postprocessing as pp
from .config import ConfigError, RunConfig, load_config
from .protocol import RoundBudgetExceeded
from .security import SweepRow, key_length, sweep_eta
from .session import resolve_budget, run_session

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BOUND_FAIL = 0, 1, 2, 3
SWEEP_COLUMNS = ("eta_tol", "fraction_asymptotic", "fraction_finite", "key_length", "xi", "zeta", "mu")


def parse_grid(spec: str) -> np.ndarray:
    """``"start:stop:steps"`` -> ``steps`` evenly spaced points, both ends included."""
    try:
        start, stop, steps = spec.split(":")
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise ConfigError(f"grid must look like start:stop:steps, got {spec!r}") from None
    if steps < 1:
        raise ConfigError("grid needs at least one step")
    if steps == 1:
        return np.array([start])
    return np.linspace(start, stop, steps)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.17g}"


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def _sweep_point(args):
    params, eta, budget = args
    return sweep_eta(params, [eta], budget)[0]


def cmd_rate(cfg: RunConfig, out: Optional[Path] = None) -> int:
    # no observed efficiency exists before a run, so eta_tol is used either way
    budget = resolve_budget(cfg)
    rep = key_length(cfg.params, budget)
    lines = {
        "ell": rep.key_length,
        "secret_fraction": rep.secret_fraction,
        "xi": rep.xi,
        "zeta": rep.zeta,
        "mu": rep.mu,
        "S_hat": rep.S_hat,
        "Q_hat": rep.Q_hat,
        "leak_EC": rep.leak_EC,
        "penalty": rep.penalty,
        "status": rep.status,
        "feasible": rep.feasible,
    }
    for k, v in lines.items():
        print(f"{k} = {v if isinstance(v, (str, bool, int)) else _fmt(v)}")
    doc = {"report": rep.as_dict(), "budget": asdict(budget), "params": asdict(cfg.params)}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out is not None:
        out.write_text(text + "\n")
    else:
        print(json.dumps(doc, sort_keys=True))
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def cmd_sweep(cfg: RunConfig, grid: np.ndarray, out: Optional[Path], workers: int = 1) -> int:
    budget = None if cfg.budget == "uniform" else resolve_budget(cfg)
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_point, [(cfg.params, float(e), budget) for e in grid]))
    else:
        rows = sweep_eta(cfg.params, [float(e) for e in grid], budget)
    text = sweep_csv(rows)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Optional[Path]) -> int:
    if cfg.seed is None:
        raise ConfigError("simulate requires a seed (config 'seed' or --seed)")
    try:
        res = run_session(cfg)
    except RoundBudgetExceeded as exc:
        print(f"infeasible channel: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    summary = res.summary()
    summary["seed"] = cfg.seed
    for k in ("status", "rounds", "S_test", "Q_test", "eta", "abort_reason", "ell", "keys_equal"):
        print(f"{k} = {summary[k]}")

    paths = dict(cfg.output)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        paths.setdefault("transcript", str(out / "transcript.txt"))
        paths.setdefault("report", str(out / "report.json"))
        paths.setdefault("keys", str(out / "key"))
    if "transcript" in paths:
        header = [f"seed={cfg.seed}", f"status={res.status}"]
        Path(paths["transcript"]).write_text(res.transcript.to_text(header))
    if "report" in paths:
        Path(paths["report"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if "keys" in paths and res.key_a is not None:
        stem = paths["keys"]
        Path(f"{stem}_alice.txt").write_text(pp.format_key(res.key_a, res.pa_seed))
        Path(f"{stem}_bob.txt").write_text(pp.format_key(res.key_b, res.pa_seed))
    return EXIT_OK if res.ok else EXIT_INFEASIBLE


def cmd_verify_bounds(trials: int, seed: int, out: Optional[Path] = None) -> int:
    results = coverage.run_bound_checks(trials, seed)
    for r in results:
        print(r.line())
    if trials < coverage.MIN_TRIALS:
        print(f"insufficient statistics: trials={trials} < {coverage.MIN_TRIALS}; Monte Carlo checks not judged")
    failed = [r for r in results if not r.ok]
    if out is not None:
        out.write_text(json.dumps([r.as_dict() for r in results], indent=2) + "\n")
    print(f"{len(results) - len(failed)}/{len(results)} checks ok")
    return EXIT_BOUND_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diqkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("rate", help="finite-key length for one configuration")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", type=Path, help="write the JSON report here")
    r.add_argument("--eta-source", choices=("tol", "observed"), default=None)

    s = sub.add_parser("sweep", help="secret fraction versus eta_tol, as CSV")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--grid", default="0.05:1:20", help="start:stop:steps over eta_tol")
    s.add_argument("--out", type=Path)
    s.add_argument("--workers", type=int, default=1)

    m = sub.add_parser("simulate", help="run the protocol round by round")
    m.add_argument("--config", required=True, type=Path)
    m.add_argument("--seed", type=int)
    m.add_argument("--out", type=Path, help="output directory")
    m.add_argument("--eta-source", choices=("tol", "observed"), default=None)

    v = sub.add_parser("verify-bounds", help="Monte Carlo coverage of the statistical bounds")
    v.add_argument("--trials", type=int, default=10**5)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", type=Path)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("DIQKD_LOG_LEVEL", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.cmd == "verify-bounds":
            return cmd_verify_bounds(args.trials, args.seed, args.out)
        cfg = load_config(args.config)
        if getattr(args, "eta_source", None):
            cfg = replace(cfg, eta_source=args.eta_source)
        if args.cmd == "rate":
            return cmd_rate(cfg, args.out)
        if args.cmd == "sweep":
            return cmd_sweep(cfg, parse_grid(args.grid), args.out, args.workers)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        return cmd_simulate(cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
