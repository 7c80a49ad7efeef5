"""Streaming Birkhoff sums, running maxima, tight-maxima profiles and random-index sums."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .renorm import RenormSeq
from .systems import orbit_blocks


class GridMismatch(ValueError):
    pass


def replica_rng(base_seed: int, index: int) -> np.random.Generator:
    """Generator for replica `index`, derived from (base_seed, index) alone."""
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(index,)))


def geometric_grid(n: int, ratio: float = 2 ** 0.25, start: int = 1) -> np.ndarray:
    """Integers start, ..., n spaced geometrically with the given ratio; always contains n."""
    count = int(math.floor(math.log(n / start) / math.log(ratio))) + 1
    pts = np.unique(np.round(start * ratio ** np.arange(count)).astype(np.int64))
    pts = pts[(pts >= start) & (pts <= n)]
    return np.union1d(pts, [n]).astype(np.int64)


@dataclass
class OrbitStats:
    birkhoff: float
    running_max: float
    step_count: int
    # rows (k, S_k f, max_{j<=k} |S_j f|)
    checkpoints: np.ndarray
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid(self) -> np.ndarray:
        return self.checkpoints[:, 0].astype(np.int64)


def cumulative_sums(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compensated S_1..S_n and running max |S_j| for a 1-d or 2-d (rows) array."""
    v = np.atleast_2d(np.asarray(values, dtype=float))
    rows = v.shape[0]
    s, m = _kernels.kahan_cumsum(np.ascontiguousarray(v), np.zeros(rows), np.zeros(rows), np.zeros(rows))
    if np.ndim(values) == 1:
        return s[0], m[0]
    return s, m


def run_orbit(system, observable, n_steps: int, rng: np.random.Generator, checkpoint_grid=None,
              keep_trajectory: bool = False, block: int = 1 << 20, start=None) -> OrbitStats:
    """Birkhoff sums S_k f, k = 1..n_steps, along one orbit from the invariant measure."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    grid = geometric_grid(n_steps) if checkpoint_grid is None else np.asarray(checkpoint_grid, dtype=np.int64)
    if np.any(grid < 1) or np.any(grid > n_steps):
        raise ValueError("checkpoints must lie in [1, n_steps]")
    s0, c0, m0 = np.zeros(1), np.zeros(1), np.zeros(1)
    rows = []
    traj = np.empty(n_steps) if keep_trajectory else None
    done = 0
    for coords in orbit_blocks(system, rng, n_steps, block, start=start):
        vals = observable.evaluate(coords, system)
        sums, maxes = _kernels.kahan_cumsum(vals[None, :], s0, c0, m0)
        k = len(coords)
        sel = grid[(grid > done) & (grid <= done + k)] - done - 1
        for j in sel:
            rows.append((done + j + 1, sums[0, j], maxes[0, j]))
        if traj is not None:
            traj[done:done + k] = sums[0]
        done += k
    return OrbitStats(float(s0[0] + c0[0]), float(m0[0]), n_steps, np.array(rows, dtype=float).reshape(-1, 3), traj)


def run_replicas(system, observable, n_steps: int, replicas: int, base_seed: int, checkpoint_grid=None,
                 threads: int = 1, first_replica: int = 0) -> list[OrbitStats]:
    """Independent orbits; replica r uses replica_rng(base_seed, r)."""

    def one(r: int) -> OrbitStats:
        return run_orbit(system, observable, n_steps, replica_rng(base_seed, r), checkpoint_grid)

    idx = range(first_replica, first_replica + replicas)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, idx))
    return [one(r) for r in idx]


def sums_at(replicas: Sequence[OrbitStats], n: int) -> np.ndarray:
    """S_n f across replicas, n must be a checkpoint."""
    out = np.empty(len(replicas))
    for i, st in enumerate(replicas):
        j = np.searchsorted(st.grid, n)
        if j >= len(st.grid) or st.grid[j] != n:
            raise GridMismatch(f"{n} is not a checkpoint")
        out[i] = st.checkpoints[j, 1]
    return out


def tight_maxima_profile(replicas: Sequence[OrbitStats], seq: RenormSeq, c_grid: Iterable[float]) -> np.ndarray:
    """Rows (n, c, fraction of replicas with max_{k<=n} |S_k| > c B(n))."""
    if not replicas:
        raise ValueError("no replicas")
    grid = replicas[0].grid
    for st in replicas[1:]:
        if not np.array_equal(st.grid, grid):
            raise GridMismatch("replicas do not share a checkpoint grid")
    maxes = np.stack([st.checkpoints[:, 2] for st in replicas])
    bn = seq(grid.astype(float))
    rows = []
    for j, n in enumerate(grid):
        for c in c_grid:
            rows.append((float(n), float(c), float(np.mean(maxes[:, j] > c * bn[j]))))
    return np.array(rows)


@dataclass(frozen=True)
class IndexRule:
    """t_n = n (exact) or n + floor(n**exponent * u(x)) for a bounded observable u."""

    kind: str = "exact"
    u: object = None
    exponent: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "perturbed"):
            raise ValueError("index rule kind must be exact or perturbed")
        if self.kind == "perturbed" and self.u is None:
            raise ValueError("perturbed rule needs an observable u")

    def extra_steps(self, n: int) -> int:
        if self.kind == "exact":
            return 0
        return int(math.ceil(n**self.exponent * self.u.sup_norm())) + 1

    def index(self, n: int, x0, system) -> int:
        if self.kind == "exact":
            return n
        u0 = float(self.u.evaluate(np.atleast_1d(x0), system)[0])
        return n + int(math.floor(n**self.exponent * u0))


@dataclass
class RandomIndexResult:
    sample: np.ndarray        # S_{t_n} f / B_n
    exact_sample: np.ndarray  # S_n f / B_n on the same orbits
    ratio: np.ndarray         # t_n / n


def random_index_sums(system, observable, rule: IndexRule, n: int, replicas: int, seq: RenormSeq,
                      base_seed: int = 0) -> RandomIndexResult:
    extra = rule.extra_steps(n)
    bn = seq(n)
    sample = np.empty(replicas)
    exact = np.empty(replicas)
    ratio = np.empty(replicas)
    for r in range(replicas):
        # same stream as run_orbit, so Exact(n) reproduces its S_n
        coords = np.concatenate(list(orbit_blocks(system, replica_rng(base_seed, r), n + extra)))
        sums, _ = cumulative_sums(observable.evaluate(coords, system))
        t = rule.index(n, coords[0], system)
        if t < 1:
            raise ValueError("index rule produced t_n < 1")
        sample[r] = sums[t - 1] / bn
        exact[r] = sums[n - 1] / bn
        ratio[r] = t / n
    return RandomIndexResult(sample, exact, ratio)


def batch_means_variance(system, observable, n_total: int = 1 << 24, batch: int = 1 << 14,
                         rng: np.random.Generator | None = None) -> tuple[float, float]:
    """sigma^2 estimate batch * Var(batch means) from one long orbit, with its standard error."""
    if rng is None:
        rng = replica_rng(0, 0)
    nb = n_total // batch
    if nb < 2:
        raise ValueError("need at least two batches")
    totals = []
    for coords in orbit_blocks(system, rng, nb * batch, block=batch * max(1, (1 << 20) // batch)):
        vals = observable.evaluate(coords, system)
        totals.append(vals.reshape(-1, batch).sum(axis=1))
    t = np.concatenate(totals)
    s2 = float(np.var(t / math.sqrt(batch), ddof=1))
    return s2, s2 * math.sqrt(2.0 / (nb - 1))
