"""Gordin decomposition and reverse-martingale-difference test beds.

Sign convention: g = sum_{n>=1} L^n f and h = f + g - g o T, so that
f = h - g + g o T and L h = L f + (g - L f) - g = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .asmeasure import build_log_measure
from .laws import Gaussian, TargetLaw
from .orbits import cumulative_sums, replica_rng
from .renorm import RenormSeq, sqrt_seq
from .spectral import build_ulam
from .systems import DoublingMap, FourierSum, orbit_blocks


class NoDecay(RuntimeError):
    pass


@dataclass(frozen=True)
class FourierPoly:
    """sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x), k >= 1, as sorted (k, coef) tuples."""

    cos: tuple[tuple[int, float], ...] = ()
    sin: tuple[tuple[int, float], ...] = ()

    @staticmethod
    def _clean(d: dict) -> tuple[tuple[int, float], ...]:
        return tuple(sorted((k, v) for k, v in d.items() if v != 0.0))

    @classmethod
    def from_dicts(cls, cos: dict, sin: dict) -> FourierPoly:
        return cls(cls._clean(cos), cls._clean(sin))

    @classmethod
    def from_observable(cls, obs: FourierSum) -> FourierPoly:
        c: dict = {}
        s: dict = {}
        for k, a in obs.cos:
            c[k] = c.get(k, 0.0) + a
        for k, b in obs.sin:
            s[k] = s.get(k, 0.0) + b
        return cls.from_dicts(c, s)

    def to_observable(self) -> FourierSum:
        return FourierSum(self.cos, self.sin)

    @property
    def is_zero(self) -> bool:
        return not self.cos and not self.sin

    def transfer(self) -> FourierPoly:
        """Doubling-map transfer operator: frequency k -> k/2 if k even, else killed."""
        return FourierPoly.from_dicts({k // 2: a for k, a in self.cos if k % 2 == 0},
                                      {k // 2: b for k, b in self.sin if k % 2 == 0})

    def compose_T(self) -> FourierPoly:
        """p o T for the doubling map: frequency k -> 2k."""
        return FourierPoly.from_dicts({2 * k: a for k, a in self.cos}, {2 * k: b for k, b in self.sin})

    def _combine(self, other: FourierPoly, sign: float) -> FourierPoly:
        c = dict(self.cos)
        s = dict(self.sin)
        for k, a in other.cos:
            c[k] = c.get(k, 0.0) + sign * a
        for k, b in other.sin:
            s[k] = s.get(k, 0.0) + sign * b
        return FourierPoly.from_dicts(c, s)

    def __add__(self, other: FourierPoly) -> FourierPoly:
        return self._combine(other, 1.0)

    def __sub__(self, other: FourierPoly) -> FourierPoly:
        return self._combine(other, -1.0)

    def evaluate(self, x, system=None) -> np.ndarray:
        return self.to_observable().evaluate(x)

    def sup_norm(self) -> float:
        return float(sum(abs(v) for _, v in self.cos + self.sin))

    def mean_square(self) -> float:
        return 0.5 * float(sum(v * v for _, v in self.cos + self.sin))

    def coefficient_error(self, other: FourierPoly) -> float:
        diff = self - other
        return max((abs(v) for _, v in diff.cos + diff.sin), default=0.0)


@dataclass(frozen=True)
class GridFunction:
    """Piecewise constant on the uniform grid of G cells."""

    values: np.ndarray = field(compare=False)

    @property
    def G(self) -> int:
        return len(self.values)

    def evaluate(self, coords, system=None) -> np.ndarray:
        idx = np.minimum((np.asarray(coords) * self.G).astype(np.int64), self.G - 1)
        return self.values[idx]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class GordinDecomposition:
    mode: str  # "fourier" or "grid"
    f: FourierPoly | GridFunction
    g: FourierPoly | GridFunction
    h: FourierPoly | GridFunction
    K_truncation: int
    residual_norm: float
    system: object = None
    weights: np.ndarray | None = field(default=None, repr=False)  # cell masses in grid mode
    transfer: sparse.csr_matrix | None = field(default=None, repr=False)
    koopman: sparse.csr_matrix | None = field(default=None, repr=False)

    def h_observable(self):
        return self.h.to_observable() if self.mode == "fourier" else self.h

    def f_observable(self):
        return self.f.to_observable() if self.mode == "fourier" else self.f

    def mean_square_h(self) -> float:
        if self.mode == "fourier":
            return self.h.mean_square()
        return float(np.dot(self.weights, self.h.values**2))

    def L_h_norm(self) -> float:
        """sup |L h| in the decomposition's own representation."""
        if self.mode == "fourier":
            return self.h.transfer().sup_norm()
        return float(np.max(np.abs(self.transfer @ self.h.values)))

    def identity_residual(self, points: np.ndarray) -> float:
        """max |f - (h - g + g o T)|: at points (Fourier) or on the grid cells (grid)."""
        if self.mode == "fourier":
            x = np.asarray(points, dtype=float)
            gT = self.g.compose_T()
            return float(np.max(np.abs(self.f.evaluate(x) - (self.h.evaluate(x) - self.g.evaluate(x) + gT.evaluate(x)))))
        gT = self.koopman @ self.g.values
        return float(np.max(np.abs(self.f.values - (self.h.values - self.g.values + gT))))

    def to_rows(self, G: int = 1024) -> np.ndarray:
        if self.mode == "fourier":
            x = (np.arange(G) + 0.5) / G
        else:
            x = (np.arange(self.h.G) + 0.5) / self.h.G
        return np.column_stack([x, self.g.evaluate(x), self.h.evaluate(x)])


def gordin_decompose(system, observable, K: int = 200, representation: str = "fourier", G: int = 4096,
                     tol: float = 1e-8) -> GordinDecomposition:
    if representation in ("fourier", "FourierExact"):
        return _gordin_fourier(system, observable, K)
    if representation in ("grid", "UlamGrid"):
        return _gordin_grid(system, observable, K, G, tol)
    raise ValueError(f"unknown representation {representation!r}")


def _gordin_fourier(system, observable, K: int) -> GordinDecomposition:
    if not isinstance(system, DoublingMap) or not isinstance(observable, FourierSum):
        raise TypeError("FourierExact needs a Fourier sum on the doubling map")
    f = FourierPoly.from_observable(observable)
    g = FourierPoly()
    term = f.transfer()
    n = 0
    while not term.is_zero:
        n += 1
        if n > K:
            raise NoDecay(f"L^n f nonzero after {K} terms")
        g = g + term
        term = term.transfer()
    h = f + g - g.compose_T()
    return GordinDecomposition("fourier", f, g, h, n, 0.0, system)


def _gordin_grid(system, observable, K: int, G: int, tol: float) -> GordinDecomposition:
    op = build_ulam(system, observable, 0.0, G)
    m = op.weights
    P = op.base
    f = op.f_mid - np.dot(m, op.f_mid)
    # Koopman operator adjoint to P in L^2(m)
    U = (sparse.diags(1.0 / m) @ P.T @ sparse.diags(m)).tocsr()
    g = np.zeros(G)
    term = P @ f
    norms = [float(np.max(np.abs(f))), float(np.max(np.abs(term)))]
    residual = 0.0
    n = 1
    while True:
        g += term
        tnorm = norms[-1]
        if tnorm == 0.0:
            break
        if n >= 8:
            r = (norms[-1] / norms[-5]) ** 0.25 if norms[-5] > 0 else 0.0
            if r >= 1.0:
                raise NoDecay(f"|L^n f| not contracting (ratio {r:.4f})")
            residual = tnorm * r / (1 - r)
            if residual <= tol:
                break
        if n >= K:
            if residual > tol:
                raise NoDecay(f"residual {residual:.3g} after {K} terms")
            break
        term = P @ term
        norms.append(float(np.max(np.abs(term))))
        n += 1
    h = f + g - U @ g
    return GordinDecomposition("grid", GridFunction(f), GridFunction(g), GridFunction(h), n, residual, system,
                               m, P, U)


@dataclass
class MDDiagnostics:
    L_h_norm: float
    cond_means: np.ndarray  # rows (r, cell, mean, stderr)
    cond_pass: bool
    var_estimate: float
    var_stderr: float
    mean_square_h: float
    var_pass: bool


def verify_reverse_md(dec: GordinDecomposition, replicas: int, n: int, base_seed: int = 0,
                      resolutions: Sequence[int] = (2, 4, 8)) -> MDDiagnostics:
    system = dec.system
    hobs = dec.h_observable()
    # conditional means E(h(x) | cell of Tx) from independent (x, Tx) pairs
    xy = system.orbit(replica_rng(base_seed, 0), 2, replicas=max(replicas, 1000))
    hx = hobs.evaluate(xy[:, 0], system)
    rows = []
    ok = True
    for r in resolutions:
        cell = np.minimum((xy[:, 1] * r).astype(np.int64), r - 1)
        for c in range(r):
            sel = hx[cell == c]
            if len(sel) < 2:
                continue
            mu = float(sel.mean())
            se = float(sel.std(ddof=1) / math.sqrt(len(sel)))
            rows.append((r, c, mu, se))
            if abs(mu) > 3 * se + 1e-12:
                ok = False
    sums = np.empty(replicas)
    for i in range(replicas):
        coords = np.concatenate(list(orbit_blocks(system, replica_rng(base_seed, 10 + i), n)))
        sums[i] = hobs.evaluate(coords, system).sum() / math.sqrt(n)
    var = float(np.mean(sums**2))
    var_se = float(np.std(sums**2, ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf
    eh2 = dec.mean_square_h()
    return MDDiagnostics(dec.L_h_norm(), np.array(rows).reshape(-1, 4), ok, var, var_se, eh2,
                         abs(var - eh2) <= 3 * var_se + 1e-12)


@dataclass
class ReverseMDStream:
    """Z_1, Z_2, ...: i.i.d. draws from a law, or h(x), h(Tx), ... along an orbit."""

    kind: str  # "iid" or "dynamical"
    zeta: float
    law: TargetLaw | None = None
    system: object = None
    h: object = None
    seq: RenormSeq = field(default_factory=sqrt_seq)

    def __post_init__(self) -> None:
        if self.kind == "iid" and self.law is None:
            raise ValueError("iid stream needs a law")
        if self.kind == "dynamical" and (self.system is None or self.h is None):
            raise ValueError("dynamical stream needs a system and h")
        if self.kind not in ("iid", "dynamical"):
            raise ValueError(f"unknown stream kind {self.kind!r}")

    def generate(self, rng: np.random.Generator, N: int) -> np.ndarray:
        if self.kind == "iid":
            return np.asarray(self.law.sample(rng, N), dtype=float)
        coords = np.concatenate(list(orbit_blocks(self.system, rng, N)))
        return self.h.evaluate(coords, self.system)


@dataclass
class MDAsResult:
    seeds: np.ndarray
    ks: np.ndarray
    max_ratio: np.ndarray      # sup over k >= k0 of max_{j<=k} Z_j^2 / B_k^2
    late_ratio: np.ndarray     # max_{j in last decade} |Z_j| / B_j
    early_ratio: np.ndarray    # same over [k0, 10 k0)
    qv_rel_error: np.ndarray   # |sum_{j<=N} Z_j^2 / (B_N^2 zeta) - 1|
    hyp_iii: float             # sup_k b_k B_k / (B_k - B_{k-1})


def hypothesis_iii_bound(seq: RenormSeq, kmax: int) -> float:
    """sup_{k<=kmax} b_k B_k / (B_k - B_{k-1}) for b_k = 1/k, B_0 = 0."""
    k = np.arange(1, kmax + 1, dtype=float)
    B = seq(k)
    prev = np.concatenate([[0.0], B[:-1]])
    return float(np.max(B / (k * (B - prev))))


def reverse_md_asclt(stream: ReverseMDStream, N: int, seeds: Sequence[int], base_seed: int = 0,
                     k0: int = 100) -> MDAsResult:
    law = Gaussian(stream.zeta)
    ks, mr, late, early, qv = [], [], [], [], []
    k = np.arange(1, N + 1, dtype=float)
    B = stream.seq(k)
    for s in seeds:
        z = stream.generate(replica_rng(base_seed, s), N)
        sums, _ = cumulative_sums(z)
        ks.append(build_log_measure(sums, stream.seq).ks(law))
        run = np.maximum.accumulate(z**2)
        mr.append(float(np.max(run[k0 - 1:] / B[k0 - 1:] ** 2)) if N >= k0 else math.nan)
        ratio = np.abs(z) / B
        late.append(float(ratio[max(N // 10, 0):].max()))
        early.append(float(ratio[k0 - 1:10 * k0].max()) if N >= 10 * k0 else math.nan)
        tot = float(np.sum(z**2))
        qv.append(abs(tot / (B[-1] ** 2 * stream.zeta) - 1) if stream.zeta > 0 else tot)
    return MDAsResult(np.asarray(seeds), np.array(ks), np.array(mr), np.array(late), np.array(early),
                      np.array(qv), hypothesis_iii_bound(stream.seq, N))


@dataclass
class CoboundaryResult:
    seeds: np.ndarray
    ks_f: np.ndarray
    ks_h: np.ndarray
    ks_between: np.ndarray      # KS between the f- and h-measures
    max_gap: np.ndarray         # max_k |S_k f - S_k h| / B_k
    gap_at_N: np.ndarray        # |S_N f - S_N h| / B_N


def coboundary_correction_check(dec: GordinDecomposition, seq: RenormSeq, N: int, seeds: Sequence[int],
                                law: TargetLaw, base_seed: int = 0) -> CoboundaryResult:
    system = dec.system
    fo, ho = dec.f_observable(), dec.h_observable()
    kf, kh, kb, mg, gn = [], [], [], [], []
    B = seq(np.arange(1, N + 1, dtype=float))
    for s in seeds:
        coords = np.concatenate(list(orbit_blocks(system, replica_rng(base_seed, s), N)))
        sf, _ = cumulative_sums(fo.evaluate(coords, system))
        sh, _ = cumulative_sums(ho.evaluate(coords, system))
        mf = build_log_measure(sf, seq)
        mh = build_log_measure(sh, seq)
        kf.append(mf.ks(law))
        kh.append(mh.ks(law))
        kb.append(mf.ks_to(mh))
        gap = np.abs(sf - sh) / B
        mg.append(float(gap.max()))
        gn.append(float(gap[-1]))
    return CoboundaryResult(np.asarray(seeds), np.array(kf), np.array(kh), np.array(kb), np.array(mg), np.array(gn))
