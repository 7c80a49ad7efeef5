"""First-return maps: return times, induced observables, Kac checks and lift experiments.

A return set Y is a union of cylinders of a fixed depth D, given as words
over the cell alphabet: y is in Y iff (cell(y), cell(Ty), ..., cell(T^{D-1}y))
is one of the words. Depth 0 is the whole space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .asmeasure import build_log_measure
from .laws import TargetLaw, ks_distance
from .orbits import cumulative_sums, geometric_grid, replica_rng, run_orbit
from .renorm import RenormSeq
from .systems import LsvMap, SymbolicSystem, SymbolPoint, orbit_blocks

DEFAULT_CAP = 100_000_000


class CapExceeded(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"no return to Y within {cap} steps")
        self.cap = cap


@dataclass(frozen=True)
class ReturnSet:
    words: tuple[tuple[int, ...], ...] = ()
    depth: int = 0

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.depth == 0 and self.words:
            raise ValueError("depth 0 is the whole space and takes no words")
        if self.depth > 0 and not self.words:
            raise ValueError("empty return set")
        if any(len(w) != self.depth for w in self.words):
            raise ValueError("all words must have length depth")

    @classmethod
    def whole(cls) -> ReturnSet:
        return cls((), 0)

    @classmethod
    def cells(cls, cells: Sequence[int]) -> ReturnSet:
        return cls(tuple((int(c),) for c in sorted(set(cells))), 1)

    @classmethod
    def dyadic(cls, lo: float, hi: float) -> ReturnSet:
        """[lo, hi) with dyadic endpoints, as binary words (doubling map)."""
        if not 0 <= lo < hi <= 1:
            raise ValueError("need 0 <= lo < hi <= 1")
        depth = 0
        while (lo * 2**depth) % 1 or (hi * 2**depth) % 1:
            depth += 1
            if depth > 52:
                raise ValueError("endpoints are not dyadic")
        if depth == 0:
            return cls.whole()
        js = range(int(lo * 2**depth), int(hi * 2**depth))
        return cls(tuple(tuple(int(b) for b in format(j, f"0{depth}b")) for j in js), depth)

    @property
    def is_whole(self) -> bool:
        return self.depth == 0

    def contains_word(self, word) -> bool:
        return self.is_whole or tuple(int(a) for a in word[: self.depth]) in self.words

    def mask(self, cells: np.ndarray) -> np.ndarray:
        """Membership of positions 0..len(cells)-depth from their cell itinerary."""
        usable = len(cells) - max(self.depth - 1, 0)
        if self.is_whole:
            return np.ones(len(cells), dtype=np.bool_)
        out = np.zeros(max(usable, 0), dtype=np.bool_)
        for w in self.words:
            hit = np.ones(max(usable, 0), dtype=np.bool_)
            for j, a in enumerate(w):
                hit &= cells[j:j + usable] == a
            out |= hit
        return out

    def to_dict(self) -> dict:
        return {"depth": self.depth, "words": [list(w) for w in self.words]}

    @classmethod
    def from_dict(cls, d: dict) -> ReturnSet:
        if "interval" in d:
            return cls.dyadic(*map(float, d["interval"]))
        if "cells" in d:
            return cls.cells(d["cells"])
        return cls(tuple(tuple(int(a) for a in w) for w in d.get("words", [])), int(d.get("depth", 0)))


def _itinerary(system, x: float, depth: int) -> list[int]:
    out = []
    for _ in range(depth):
        out.append(system.cell_of(x))
        x = system.step(x)
    return out


@dataclass
class InducedSystem:
    base: object
    Y: ReturnSet
    cap: int = DEFAULT_CAP
    _mass: float | None = field(default=None, init=False, repr=False)

    @property
    def m_Y(self) -> float:
        if self._mass is None:
            self._mass = self._measure()
            if not self._mass > 0:
                raise ValueError("return set has zero measure")
        return self._mass

    def _measure(self) -> float:
        if self.Y.is_whole:
            return 1.0
        if isinstance(self.base, SymbolicSystem):
            return float(sum(self.base.cell_measure(w) for w in self.Y.words))
        if isinstance(self.base, LsvMap):
            if self.Y.depth == 1:
                return self.base.cell_measure([w[0] for w in self.Y.words])

            def ind(x):
                x = np.atleast_1d(x)
                return np.array([float(self.Y.contains_word(_itinerary(self.base, xi, self.Y.depth))) for xi in x])

            return self.base.integrate(ind)
        raise TypeError(f"no return-set measure for {type(self.base).__name__}")

    def contains(self, point) -> bool:
        if self.Y.is_whole:
            return True
        if isinstance(point, SymbolPoint):
            return self.Y.contains_word(point.symbols(self.Y.depth))
        return self.Y.contains_word(_itinerary(self.base, point, self.Y.depth))

    def sample_point(self, rng: np.random.Generator):
        """y ~ m_Y as a point of the base system."""
        if isinstance(self.base, SymbolicSystem):
            return SymbolPoint.from_symbols(self._prefix(rng), self.base, rng)
        return self._lsv_start(rng)

    def _prefix(self, rng: np.random.Generator) -> np.ndarray:
        if self.Y.is_whole:
            return np.empty(0, dtype=np.int64)
        words = self.Y.words
        if len(words) == 1:
            return np.asarray(words[0], dtype=np.int64)
        w = np.array([self.base.cell_measure(x) for x in words])
        return np.asarray(words[rng.choice(len(words), p=w / w.sum())], dtype=np.int64)

    def _lsv_start(self, rng: np.random.Generator) -> float:
        # rejection from the invariant measure; first draw matches orbit_blocks
        for _ in range(1_000_000):
            x = float(self.base.sample_invariant_batch(rng, 1)[0])
            if self.contains(x):
                return x
        raise RuntimeError("rejection sampler for m_Y failed")

    def start(self, rng: np.random.Generator):
        """Start argument for orbit_blocks giving an orbit from y ~ m_Y."""
        if self.Y.is_whole:
            return None
        if isinstance(self.base, SymbolicSystem):
            return self._prefix(rng)
        return self._lsv_start(rng)


def induce_step(ind: InducedSystem, observable, y):
    """(T_Y y, phi(y), f_Y(y), max_{1<=k<=phi} |S_k f(y)|) by direct iteration."""
    if not ind.contains(y):
        raise ValueError("y is not in Y")
    system = ind.base
    symbolic = isinstance(y, SymbolPoint)
    s = m = 0.0
    x = y
    for k in range(1, ind.cap + 1):
        coord = system.coordinate(x) if symbolic else float(x)
        s += float(observable.evaluate(np.array([coord]), system)[0])
        m = max(m, abs(s))
        x = system.step(x)
        if ind.contains(x):
            return x, k, s, m
    raise CapExceeded(ind.cap)


@dataclass
class Excursions:
    phi: np.ndarray   # return times
    f_Y: np.ndarray   # induced observable along T_Y^j y
    M: np.ndarray     # excursion maxima

    @property
    def return_times(self) -> np.ndarray:
        """t_k = phi(y) + ... + phi(T_Y^{k-1} y)."""
        return np.cumsum(self.phi)

    def induced_sums(self) -> np.ndarray:
        """S^Y_k f_Y, k = 1..len."""
        return cumulative_sums(self.f_Y)[0]


def induced_orbit(ind: InducedSystem, observable, rng: np.random.Generator, n_returns: int,
                  block: int | None = None) -> Excursions:
    """n_returns consecutive excursions of one orbit from y ~ m_Y."""
    system = ind.base
    if block is None:
        block = int(min(1 << 20, 2 * n_returns / ind.m_Y + 1024))
    start = ind.start(rng)
    pend_v = np.empty(0)
    pend_c = np.empty(0, dtype=np.int64)
    phis, fys, mxs = [], [], []
    got = 0
    for coords in orbit_blocks(system, rng, ind.cap + ind.Y.depth + block, block, start=start):
        vals = np.concatenate([pend_v, observable.evaluate(coords, system)])
        cells = np.concatenate([pend_c, system.cell_of_coord(coords)])
        in_y = ind.Y.mask(cells)
        usable = len(in_y)
        phi, fy, mx = _kernels.excursions(vals[:usable], in_y, n_returns - got)
        phis.append(phi)
        fys.append(fy)
        mxs.append(mx)
        got += len(phi)
        if got >= n_returns:
            break
        used = int(phi.sum())
        pend_v, pend_c = vals[used:], cells[used:]
        if len(pend_v) > ind.cap:
            raise CapExceeded(ind.cap)
    return Excursions(np.concatenate(phis), np.concatenate(fys), np.concatenate(mxs))


def return_times(ind: InducedSystem, rng: np.random.Generator, n_returns: int) -> np.ndarray:
    from .systems import LocallyConstant

    return induced_orbit(ind, LocallyConstant.constant(0.0), rng, n_returns).phi


@dataclass
class KacRecord:
    mean_phi: float
    m_Y_estimate: float
    product: float
    stderr: float
    n_returns: int

    @property
    def passes(self) -> bool:
        return abs(self.product - 1.0) <= 3 * self.stderr


def block_bootstrap_stderr(x: np.ndarray, rng: np.random.Generator, resamples: int = 500,
                           block: int | None = None) -> float:
    """Standard error of the mean by resampling non-overlapping block means."""
    x = np.asarray(x, dtype=float)
    if block is None:
        block = max(1, int(round(len(x) ** (1 / 3))))
    nb = len(x) // block
    if nb < 2:
        raise ValueError("too few blocks for a bootstrap")
    means = x[: nb * block].reshape(nb, block).mean(axis=1)
    boot = means[rng.integers(0, nb, size=(resamples, nb))].mean(axis=1)
    return float(boot.std(ddof=1))


def kac_check(ind: InducedSystem, n_returns: int, base_seed: int = 0) -> KacRecord:
    """mean phi under m_Y times m(Y); Kac's formula says 1."""
    if n_returns < 1000:
        raise ValueError("kac_check needs at least 1000 returns")
    rng = replica_rng(base_seed, 0)
    phi = return_times(ind, rng, n_returns).astype(float)
    mean = float(phi.mean())
    se = block_bootstrap_stderr(phi, replica_rng(base_seed, 1)) * ind.m_Y
    return KacRecord(mean, 1.0 / mean, mean * ind.m_Y, se, len(phi))


def return_time_law(phi: np.ndarray, kmax: int) -> np.ndarray:
    """Rows (k, empirical P(phi = k)) for k = 1..kmax."""
    phi = np.asarray(phi)
    k = np.arange(1, kmax + 1)
    return np.column_stack([k, np.bincount(phi, minlength=kmax + 1)[1:kmax + 1] / len(phi)])


def tail_slope(phi: np.ndarray, n_lo: float = 10, n_hi: float = 1000, points: int = 20) -> float:
    """Least-squares slope of log P(phi > n) against log n on [n_lo, n_hi]."""
    srt = np.sort(np.asarray(phi))
    n = np.unique(np.round(np.geomspace(n_lo, n_hi, points)))
    surv = 1.0 - np.searchsorted(srt, n, side="right") / len(srt)
    ok = surv > 0
    if ok.sum() < 3:
        raise ValueError("too few nonzero tail points")
    return float(np.polyfit(np.log(n[ok]), np.log(surv[ok]), 1)[0])


@dataclass
class LiftResult:
    induced: np.ndarray  # S^Y_{floor(n m(Y))} f_Y / B(n)
    direct: np.ndarray   # S_n f / B(n)
    induced_profile: np.ndarray  # rows (k, c, P{max_{j<=k} |S^Y_j| > c B(k / m(Y))})
    condition_grid: np.ndarray   # rows (n, c, n m{y in Y : M(y) >= c B(n)})


def lift_experiment(ind: InducedSystem, observable, seq: RenormSeq, n: int, replicas: int,
                    base_seed: int = 0, c_grid=(0.5, 1.0, 2.0, 5.0, 10.0)) -> LiftResult:
    """Direct and induced replica samples on the same seeds.

    Replica r drives both orbits from replica_rng(base_seed, r), so for the
    whole space the two samples coincide.
    """
    mY = ind.m_Y
    k_ind = max(1, int(math.floor(n * mY)))
    grid = geometric_grid(k_ind)
    bn = seq(n)
    induced = np.empty(replicas)
    direct = np.empty(replicas)
    maxes = np.empty((replicas, len(grid)))
    all_m = []
    for r in range(replicas):
        direct[r] = run_orbit(ind.base, observable, n, replica_rng(base_seed, r), [n]).birkhoff / bn
        exc = induced_orbit(ind, observable, replica_rng(base_seed, r), k_ind)
        sums, run_max = cumulative_sums(exc.f_Y)
        induced[r] = sums[-1] / bn
        maxes[r] = run_max[grid - 1]
        all_m.append(exc.M)
    prof = []
    b_ind = seq(grid / mY)
    for j, k in enumerate(grid):
        for c in c_grid:
            prof.append((float(k), float(c), float(np.mean(maxes[:, j] > c * b_ind[j]))))
    m_sorted = np.sort(np.concatenate(all_m))
    cond = []
    for nn in geometric_grid(n, ratio=2.0):
        for c in c_grid:
            frac = 1.0 - np.searchsorted(m_sorted, c * seq(float(nn)), side="left") / len(m_sorted)
            cond.append((float(nn), float(c), float(nn * mY * frac)))
    return LiftResult(induced, direct, np.array(prof), np.array(cond))


@dataclass
class AsLiftResult:
    seeds: np.ndarray
    ks_induced: np.ndarray  # on Y, atoms S^Y_k f_Y / B(k / m(Y))
    ks_direct: np.ndarray   # on X, atoms S_k f / B(k)


def asclt_lift_experiment(ind: InducedSystem, observable, seq: RenormSeq, N: int, seeds: Sequence[int],
                          law: TargetLaw, base_seed: int = 0) -> AsLiftResult:
    """Per-seed KS of the log-average measures on Y and on X to the common law."""
    mY = ind.m_Y

    def seq_y(k):
        return seq(np.asarray(k, dtype=float) / mY)

    ki, kd = [], []
    for s in seeds:
        traj = run_orbit(ind.base, observable, N, replica_rng(base_seed, s), [N], keep_trajectory=True).trajectory
        kd.append(build_log_measure(traj, seq).ks(law))
        exc = induced_orbit(ind, observable, replica_rng(base_seed, s), N)
        ki.append(build_log_measure(exc.induced_sums(), seq_y).ks(law))
    return AsLiftResult(np.asarray(seeds), np.array(ki), np.array(kd))


def lift_ks(result: LiftResult, law: TargetLaw) -> tuple[float, float]:
    return ks_distance(result.induced, law), ks_distance(result.direct, law)
