"""Secret fraction versus tolerated efficiency: two asymptotic curves and one finite-key curve.

Writes one CSV per curve into --out and prints where each curve crosses zero.

    python scripts/efficiency_sweep.py --out results/sweep
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diqkd.cli import sweep_csv
from diqkd.security import TSIRELSON, ProtocolParams, sweep_eta


@dataclass
class SweepConfig:
    visibilities: tuple[float, ...] = (0.999, 0.99)
    q_tol: float = 0.01
    eta_min: float = 0.01
    eta_max: float = 1.0
    points: int = 200
    # finite-key curve
    m_x: int = 10**8
    m_z: int = 10**8
    m_j: int = 10**8
    eps_sec: float = 1e-8
    eps_cor: float = 1e-12
    ec_efficiency: float = 1.1
    out: Path = field(default_factory=lambda: Path("results/sweep"))

    def grid(self) -> np.ndarray:
        return np.linspace(self.eta_min, self.eta_max, self.points)

    def params(self, s_tol: float) -> ProtocolParams:
        return ProtocolParams(
            m_x=self.m_x, m_z=self.m_z, m_j=self.m_j, S_tol=s_tol, Q_tol=self.q_tol,
            eta_tol=1.0, eps_cor=self.eps_cor, eps_sec=self.eps_sec, ec_efficiency=self.ec_efficiency,
        )


def zero_crossing(etas, values):
    for a, b, va, vb in zip(etas, etas[1:], values, values[1:]):
        if va <= 0 < vb:
            return a + (b - a) * (-va) / (vb - va)
    return None


def main(cfg: SweepConfig) -> dict[str, float | None]:
    cfg.out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    crossings = {}
    curves = {f"asymptotic_V{v}": min(v * TSIRELSON, TSIRELSON) for v in cfg.visibilities}
    curves["finite_key"] = TSIRELSON
    for name, s_tol in curves.items():
        rows = sweep_eta(cfg.params(s_tol), grid)
        (cfg.out / f"{name}.csv").write_text(sweep_csv(rows))
        col = [r.fraction_finite if name == "finite_key" else r.fraction_asymptotic for r in rows]
        crossings[name] = zero_crossing(grid, col)
        end = col[-1]
        cross = "none in range" if crossings[name] is None else f"{crossings[name]:.4f}"
        print(f"{name:>20s}: zero crossing at eta_tol = {cross}, fraction at eta_tol = {grid[-1]:g} is {end:.4f}")
    return crossings


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=SweepConfig().out)
    ap.add_argument("--points", type=int, default=SweepConfig.points)
    ap.add_argument("--m-x", type=int, default=SweepConfig.m_x)
    args = ap.parse_args()
    main(SweepConfig(points=args.points, m_x=args.m_x, m_z=args.m_x, m_j=args.m_x, out=args.out))
