"""Log-averaged empirical measures (1/H_N) sum_k (1/k) delta_{S_k / B_k} and friends.

Measures are normalized by the harmonic sum H_N, so they are probability
measures at every N; weighted averages follow the 1/log N convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .laws import TargetLaw, ks_distance, ks_two_measures
from .renorm import RenormSeq

EXACT_LIMIT = 1_000_000
DEFAULT_CLIP = 20.0


@dataclass(frozen=True)
class Tent:
    center: float
    half_width: float = 0.5

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.half_width

    @property
    def support_radius(self) -> float:
        """K with g = 0 off [-K, K]."""
        return abs(self.center) + self.half_width

    @property
    def sup_norm(self) -> float:
        return 1.0

    def __call__(self, x):
        return np.maximum(0.0, 1.0 - np.abs(np.asarray(x) - self.center) / self.half_width)


@dataclass(frozen=True)
class SmoothStep:
    """Lipschitz stand-in for the indicator of (-inf, center]."""

    center: float
    width: float = 0.25

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.width

    support_radius = math.inf
    sup_norm = 1.0

    def __call__(self, x):
        return np.clip(0.5 - (np.asarray(x) - self.center) / self.width, 0.0, 1.0)


def tent_suite() -> list[Tent]:
    """17 tents centred on [-4, 4], spaced by their half width."""
    return [Tent(float(c), 0.5) for c in np.linspace(-4, 4, 17)]


def step_suite() -> list[SmoothStep]:
    return [SmoothStep(float(c)) for c in np.linspace(-4, 4, 17)]


def harmonic(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))


@dataclass
class LogAvgMeasure:
    N: int
    normalizer: float  # H_N
    values: np.ndarray | None = None  # exact atoms S_k / B_k, k = 1..N
    edges: np.ndarray | None = None
    masses: np.ndarray | None = None  # unnormalized 1/k mass per bin
    clipped_low: float = 0.0
    clipped_high: float = 0.0
    _seq: RenormSeq | None = field(default=None, repr=False)

    @property
    def exact(self) -> bool:
        return self.values is not None

    @property
    def clipped_mass(self) -> float:
        return (self.clipped_low + self.clipped_high) / self.normalizer

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """(positions, probability weights); histogram bins give their centres."""
        if self.exact:
            w = 1.0 / np.arange(1, self.N + 1)
            return self.values, w / w.sum()
        centres = 0.5 * (self.edges[:-1] + self.edges[1:])
        pos = np.concatenate([[self.edges[0]], centres, [self.edges[-1]]])
        mass = np.concatenate([[self.clipped_low], self.masses, [self.clipped_high]])
        return pos, mass / mass.sum()

    def total_weight(self) -> float:
        if self.exact:
            return harmonic(self.N) / self.normalizer
        return (self.masses.sum() + self.clipped_low + self.clipped_high) / self.normalizer

    def mean(self) -> float:
        v, w = self.atoms()
        return float(np.dot(v, w))

    def variance(self) -> float:
        v, w = self.atoms()
        mu = np.dot(v, w)
        return float(np.dot((v - mu) ** 2, w))

    def ks(self, law: TargetLaw) -> float:
        if self.exact:
            v, w = self.atoms()
            return ks_distance(v, law, w)
        # ECDF known exactly at bin edges only
        cum = self.clipped_low + np.concatenate([[0.0], np.cumsum(self.masses)])
        return float(np.max(np.abs(cum / self.normalizer - law.cdf(self.edges))))

    def ks_to(self, other: LogAvgMeasure) -> float:
        v1, w1 = self.atoms()
        v2, w2 = other.atoms()
        return ks_two_measures(v1, w1, v2, w2)

    def extend(self, more_sums: np.ndarray, seq: RenormSeq) -> LogAvgMeasure:
        """The measure for N + len(more_sums), given S_{N+1}, S_{N+2}, ..."""
        more = np.asarray(more_sums, dtype=float)
        k = np.arange(self.N + 1, self.N + len(more) + 1)
        new_n = self.N + len(more)
        norm = harmonic(new_n)
        if self.exact:
            return LogAvgMeasure(new_n, norm, np.concatenate([self.values, more / seq(k)]))
        m = LogAvgMeasure(new_n, norm, None, self.edges, self.masses.copy(), self.clipped_low, self.clipped_high)
        m._accumulate(more / seq(k), 1.0 / k)
        return m

    def _accumulate(self, z: np.ndarray, w: np.ndarray) -> None:
        lo, hi = self.edges[0], self.edges[-1]
        self.clipped_low += float(w[z < lo].sum())
        self.clipped_high += float(w[z >= hi].sum())
        inside = (z >= lo) & (z < hi)
        idx = ((z[inside] - lo) / (hi - lo) * len(self.masses)).astype(np.int64)
        idx = np.minimum(idx, len(self.masses) - 1)
        self.masses += np.bincount(idx, weights=w[inside], minlength=len(self.masses))

    def to_rows(self) -> np.ndarray:
        if self.exact:
            v, w = self.atoms()
            return np.column_stack([v, w])
        return np.column_stack([self.edges[:-1], self.edges[1:], self.masses / self.normalizer])


def build_log_measure(trajectory, seq: RenormSeq, N: int | None = None, clip: float = DEFAULT_CLIP,
                      representation: str = "auto", bins: int = 8000) -> LogAvgMeasure:
    """Measure of the atoms S_k / B(k), k = 1..N, with weights 1/k / H_N.

    `trajectory` is the array S_1..S_N or an iterable of consecutive blocks.
    Exact atoms up to N = 1e6, a histogram on [-clip, clip] beyond.
    """
    if isinstance(trajectory, np.ndarray):
        blocks: Iterable[np.ndarray] = [trajectory if N is None else trajectory[:N]]
        total = len(trajectory) if N is None else N
    else:
        blocks = trajectory
        total = N
    if total is not None and total < 1:
        raise ValueError("N must be >= 1")
    exact = representation == "exact" or (representation == "auto" and total is not None and total <= EXACT_LIMIT)
    if exact:
        parts, done = [], 0
        for b in blocks:
            b = np.asarray(b, dtype=float)
            if total is not None:
                b = b[: total - done]
            k = np.arange(done + 1, done + len(b) + 1)
            parts.append(b / seq(k))
            done += len(b)
            if total is not None and done >= total:
                break
        if total is not None and done < total:
            raise ValueError(f"trajectory has {done} terms, need {total}")
        return LogAvgMeasure(done, harmonic(done), np.concatenate(parts), _seq=seq)
    edges = np.linspace(-clip, clip, bins + 1)
    m = LogAvgMeasure(0, 1.0, None, edges, np.zeros(bins))
    done = 0
    for b in blocks:
        b = np.asarray(b, dtype=float)
        if total is not None:
            b = b[: total - done]
        k = np.arange(done + 1, done + len(b) + 1)
        m._accumulate(b / seq(k), 1.0 / k)
        done += len(b)
        if total is not None and done >= total:
            break
    m.N = done
    m.normalizer = harmonic(done)
    return m


def _normalized_terms(trajectory: np.ndarray, seq: RenormSeq, N: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(trajectory, dtype=float)[:N]
    if len(s) < N:
        raise ValueError(f"trajectory has {len(s)} terms, need {N}")
    k = np.arange(1, N + 1, dtype=float)
    return s / seq(k), k


def weighted_log_average(trajectory, phi_values, g, seq: RenormSeq, N: int) -> float:
    """(1/log N) sum_{k<=N} phi(T^k x) / k * g(S_k f(x) / B_k).

    phi_values[k-1] must hold phi(T^k x).
    """
    z, k = _normalized_terms(trajectory, seq, N)
    phi = np.asarray(phi_values, dtype=float)[:N]
    if N == 1:
        raise ValueError("1/log N needs N >= 2")
    return float(np.sum(phi / k * g(z)) / math.log(N))


def log_avg_charfn(trajectory, seq: RenormSeq, N: int, t_grid) -> np.ndarray:
    z, k = _normalized_terms(trajectory, seq, N)
    w = 1.0 / k
    h = np.sum(w)  # same summation order as the numerator, so t = 0 gives exactly 1
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    return np.array([np.sum(w * np.exp(1j * tt * z)) / h for tt in t])


def rescale_invariance_check(trajectory, seq: RenormSeq, N: int, rho, g) -> tuple[float, float]:
    """Log averages of g(x_k) and g(rho_k x_k), x_k = S_k / B_k, with weights 1/k / H_N."""
    z, k = _normalized_terms(trajectory, seq, N)
    w = (1.0 / k) / harmonic(N)
    r = rho(k)
    return float(np.sum(w * g(z))), float(np.sum(w * g(r * z)))


def rescale_bound(seq_len: int, rho, g) -> float:
    """Deterministic bound sum_k (w_k) C |1 - rho_k| with C = max(2 K Lip(g), 2 sup|g|)."""
    k = np.arange(1, seq_len + 1, dtype=float)
    w = (1.0 / k) / harmonic(seq_len)
    const = max(2 * g.support_radius * g.lipschitz, 2 * g.sup_norm)
    return float(const * np.sum(w * np.abs(1 - rho(k))))


def rho_sqrt(k):
    return 1.0 + np.asarray(k, dtype=float) ** -0.5
