"""Per-seed spread of the ASCLT KS statistic for a preset, at several N.

Used to calibrate single-orbit envelopes: prints quantiles of the per-seed KS
and the fraction of seeds where KS decreases between consecutive N.
"""
import argparse

import numpy as np

from asclt_lab import asmeasure, orbits
from asclt_lab.cli import load_config, preset_dir
from asclt_lab.experiments import _asclt_law, _setup


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("preset", nargs="?", default="c03b_doubling_asclt")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--N", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    args = ap.parse_args()
    cfg = load_config(preset_dir() / f"{args.preset}.yaml")
    system, obs, seq = _setup(cfg)
    law = _asclt_law(cfg, system, obs)
    grid = sorted(args.N)
    ks = np.empty((args.seeds, len(grid)))
    for s in range(args.seeds):
        traj = orbits.run_orbit(system, obs, grid[-1], orbits.replica_rng(cfg.seed, s), [grid[-1]],
                                keep_trajectory=True).trajectory
        ks[s] = [asmeasure.build_log_measure(traj[:n], seq).ks(law) for n in grid]
    for j, n in enumerate(grid):
        q = np.quantile(ks[:, j], [0.1, 0.5, 0.9])
        print(f"N={n:>9d}  ks q10={q[0]:.4f} median={q[1]:.4f} q90={q[2]:.4f}")
    for j in range(1, len(grid)):
        print(f"decreasing {grid[j-1]}->{grid[j]}: {np.mean(ks[:, j] < ks[:, j-1]):.2f}")


if __name__ == "__main__":
    main()
