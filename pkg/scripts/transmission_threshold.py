"""Minimum channel transmission for a positive asymptotic rate, over a range of CHSH tolerances.

Efficiency is modelled as eta = t/2 (a linear-optics Bell measurement heralds
half of the arriving pairs).

    python scripts/transmission_threshold.py --out results/threshold.csv
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diqkd.security import TSIRELSON, InfeasibleError, min_transmission


@dataclass
class ThresholdConfig:
    s_min: float = 2.70
    s_max: float = TSIRELSON
    points: int = 30
    q_values: tuple[float, ...] = (0.0, 0.01, 0.02)
    bsm_efficiency: float = 0.5
    out: Path = field(default_factory=lambda: Path("results/threshold.csv"))


def main(cfg: ThresholdConfig) -> list[tuple[float, float, float | None]]:
    rows = []
    for q in cfg.q_values:
        for s in np.linspace(cfg.s_min, cfg.s_max, cfg.points):
            try:
                t = min_transmission(float(s), q, lambda t: cfg.bsm_efficiency * t)
            except InfeasibleError:
                t = None
            rows.append((float(s), q, t))
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with cfg.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["S_tol", "Q_tol", "t_min"])
        for s, q, t in rows:
            w.writerow([f"{s:.17g}", f"{q:.17g}", "infeasible" if t is None else f"{t:.17g}"])
    t281 = min_transmission(2.81, 0.0, lambda t: cfg.bsm_efficiency * t)
    print(f"S_tol = 2.81, Q_tol = 0: positive rate for t > {t281:.4f}")
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ThresholdConfig().out)
    ap.add_argument("--points", type=int, default=ThresholdConfig.points)
    args = ap.parse_args()
    main(ThresholdConfig(points=args.points, out=args.out))
