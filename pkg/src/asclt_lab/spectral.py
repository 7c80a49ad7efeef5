"""Ulam discretization of the transfer operator and its perturbations L_t u = L(e^{itf} u).

Orientation: (L u)_j = sum_i P[j, i] u_i, with P the conditional transfer
mass between cells renormalized by the Ulam invariant vector, so rows sum
to one and L 1 = 1. Matrices are sparse (two branches per row for the
interval maps, A entries per row on A-letter cylinders).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .laws import TargetLaw
from .orbits import replica_rng
from .renorm import RenormSeq
from .systems import BernoulliShift, DoublingMap, LsvMap, _lsv_left_inverse, orbit_blocks


class UnsupportedSystem(TypeError):
    pass


class NoGap(RuntimeError):
    pass


class NonSummable(RuntimeError):
    pass


class ExtrapolationOutOfRange(ValueError):
    pass


@dataclass
class UlamOperator:
    G: int
    matrix: sparse.csr_matrix  # P diag(e^{it f(mid)})
    t: float
    system_id: str
    base: sparse.csr_matrix    # the t = 0 matrix
    weights: np.ndarray        # invariant measure of the cells, sums to 1
    f_mid: np.ndarray          # observable at cell midpoints

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def transfer(self, u: np.ndarray, power: int = 1) -> np.ndarray:
        """Unperturbed L^power u."""
        for _ in range(power):
            u = self.base @ u
        return u


def _doubling_matrix(G: int) -> sparse.csr_matrix:
    j = np.arange(G)
    rows = np.repeat(j, 2)
    cols = np.column_stack([j // 2, (j + G) // 2]).ravel()
    return sparse.csr_matrix((np.full(2 * G, 0.5), (rows, cols)), shape=(G, G))


def _bernoulli_matrix(probs: np.ndarray, depth: int) -> sparse.csr_matrix:
    # cylinder w = (w_0..w_{D-1}) indexed base A with w_0 most significant
    A = len(probs)
    G = A**depth
    w = np.arange(G)
    rows, cols, vals = [], [], []
    for a in range(A):
        rows.append(w)
        cols.append(a * A ** (depth - 1) + w // A)
        vals.append(np.full(G, probs[a]))
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(G, G))


def _interval_transfer(G: int, pre_left: np.ndarray, pre_right: np.ndarray) -> sparse.csr_matrix:
    """P[j, i] = G |B_i cap T^{-1} B_j| from the preimages of the grid points.

    pre_left / pre_right hold the branch preimages of k / G, k = 0..G.
    """
    rows, cols, vals = [], [], []
    grid = np.arange(G + 1) / G
    for pre in (pre_left, pre_right):
        lo, hi = pre[0], pre[-1]
        inner = grid[(grid > lo) & (grid < hi)]
        pts = np.union1d(np.union1d(pre, inner), [lo, hi])
        mid = 0.5 * (pts[:-1] + pts[1:])
        length = np.diff(pts)
        keep = length > 0
        i = np.minimum((mid[keep] * G).astype(np.int64), G - 1)
        j = np.clip(np.searchsorted(pre, mid[keep], side="right") - 1, 0, G - 1)
        rows.append(j)
        cols.append(i)
        vals.append(G * length[keep])
    P = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(G, G))
    return P.tocsr()


def _stationary(P: sparse.csr_matrix) -> np.ndarray:
    """h with P h = h, sum h = G (columns of P sum to 1)."""
    G = P.shape[0]
    A = (sparse.identity(G, format="lil") - P).tolil()
    A[0, :] = np.ones(G)
    rhs = np.zeros(G)
    rhs[0] = G
    return spsolve(A.tocsc(), rhs)


def _normalize(P: sparse.csr_matrix, h: np.ndarray) -> sparse.csr_matrix:
    return (sparse.diags(1.0 / h) @ P @ sparse.diags(h)).tocsr()


def _midpoints(system, G: int) -> np.ndarray:
    if isinstance(system, BernoulliShift):
        # cylinder midpoints in the interval code
        A = len(system.probs)
        depth = int(round(math.log(G, A)))
        w = np.arange(G)
        left = np.zeros(G)
        scale = np.ones(G)
        for d in range(depth):
            a = (w // A ** (depth - 1 - d)) % A
            left += scale * system.left[a]
            scale *= system.width[a]
        return left + scale / 2
    return (np.arange(G) + 0.5) / G


def _base_matrix(system, G: int) -> tuple[sparse.csr_matrix, np.ndarray, str]:
    if G < 2:
        raise ValueError("grid too small")
    if isinstance(system, DoublingMap):
        if G & (G - 1):
            raise ValueError("G must be a power of two")
        return _doubling_matrix(G), np.full(G, 1.0 / G), "doubling"
    if isinstance(system, BernoulliShift):
        if not system.finite:
            raise UnsupportedSystem("infinite-alphabet shifts have no finite Ulam matrix")
        p = np.asarray(system.probs)
        depth = round(math.log(G, len(p)))
        if len(p) ** depth != G:
            raise ValueError(f"G must be a power of the alphabet size {len(p)}")
        w = np.arange(G)
        weight = np.ones(G)
        for d in range(depth):
            weight *= p[(w // len(p) ** d) % len(p)]
        return _bernoulli_matrix(p, depth), weight, "bernoulli"
    if isinstance(system, LsvMap):
        if G % 2:
            raise ValueError("G must be even so no cell straddles 1/2")
        y = np.arange(G + 1) / G
        P = _interval_transfer(G, _lsv_left_inverse(y, system.alpha), 0.5 * (y + 1.0))
        h = _stationary(P)
        return _normalize(P, h), h / G, "lsv"
    raise UnsupportedSystem(f"no Ulam matrix for {type(system).__name__}")


_BASE_CACHE: dict = {}


def _cached_base(system, G: int):
    key = (repr(system), G)
    if key not in _BASE_CACHE:
        _BASE_CACHE[key] = _base_matrix(system, G)
    return _BASE_CACHE[key]


def build_ulam(system, observable, t: float, G: int) -> UlamOperator:
    if G < 64 and not isinstance(system, BernoulliShift):
        raise ValueError("G must be at least 64")
    P, weights, sid = _cached_base(system, G)
    f_mid = observable.evaluate(_midpoints(system, G), system)
    if t == 0:
        M = P.astype(complex)
    else:
        M = (P @ sparse.diags(np.exp(1j * t * f_mid))).tocsr()
    return UlamOperator(G, M, float(t), sid, P, weights, f_mid)


def leading_eigenvalue(op: UlamOperator, tol: float = 1e-14, max_iter: int = 20_000,
                       gap_check: int = 1000) -> tuple[complex, float]:
    """Power iteration from the constant vector; returns (lambda, |lambda_2| / |lambda_1| estimate)."""
    v = np.ones(op.G, dtype=complex)
    v /= np.linalg.norm(v)
    ratios: list[float] = []
    prev_res = None
    lam = 0j
    for it in range(1, max_iter + 1):
        w = op.matrix @ v
        lam = np.vdot(v, w)
        res = np.linalg.norm(w - lam * v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0j, 0.0
        if prev_res is not None and prev_res > 0:
            ratios.append(res / prev_res)
        if res <= tol * max(abs(lam), 1e-300):
            break
        if it >= gap_check and ratios and np.median(ratios[-20:]) > 0.999:
            raise NoGap(f"gap estimate {np.median(ratios[-20:]):.6f} at t={op.t}")
        prev_res = res
        v = w / nw
    gap = float(np.exp(np.mean(np.log(np.clip(ratios[-10:], 1e-300, None))))) if ratios else 0.0
    return complex(lam), min(gap, 1.0)


@dataclass
class EigenCurve:
    t: np.ndarray
    lam: np.ndarray
    gap: np.ndarray

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.lam.real, self.lam.imag, self.gap])

    def interpolator(self) -> Callable:
        re = CubicSpline(self.t, self.lam.real)
        im = CubicSpline(self.t, self.lam.imag)
        lo, hi = self.t[0], self.t[-1]

        def lam(s):
            s = np.asarray(s, dtype=float)
            if np.any(s < lo - 1e-15) or np.any(s > hi + 1e-15):
                raise ExtrapolationOutOfRange(f"t outside [{lo}, {hi}]")
            return re(s) + 1j * im(s)

        return lam


def eigen_curve(system, observable, t_grid: Sequence[float], G: int) -> EigenCurve:
    t = np.asarray(sorted(t_grid), dtype=float)
    lams, gaps = [], []
    for tt in t:
        lam, gap = leading_eigenvalue(build_ulam(system, observable, tt, G))
        lams.append(lam)
        gaps.append(gap)
    return EigenCurve(t, np.array(lams), np.array(gaps))


def choose_eps0(system, observable, G: int, t_max: float = 3.0, steps: int = 30, gap_limit: float = 0.95) -> float:
    """Largest t on a grid with measured gap <= gap_limit on all of [0, t]."""
    best = 0.0
    for tt in np.linspace(0, t_max, steps + 1)[1:]:
        try:
            _, gap = leading_eigenvalue(build_ulam(system, observable, tt, G))
        except NoGap:
            break
        if gap > gap_limit:
            break
        best = float(tt)
    return best


def eigenvalue_convergence_check(curve, seq: RenormSeq, law: TargetLaw, n_grid: Sequence[int],
                                 t_values: Sequence[float] = (1.0,)) -> np.ndarray:
    """Rows (t, n, |lambda(t / B_n)^n - E e^{itW}|); curve is an EigenCurve or a callable lambda(t)."""
    lam = curve.interpolator() if isinstance(curve, EigenCurve) else curve
    rows = []
    for t in t_values:
        target = complex(law.char_fn(t))
        for n in n_grid:
            val = complex(lam(t / seq(n))) ** int(n)
            rows.append((float(t), float(n), abs(val - target)))
    return np.array(rows)


@dataclass
class GreenKubo:
    sigma2: float
    stderr: float
    tail_bound: float
    correlations: np.ndarray  # C_0, C_1, ..., C_K


def _tail_bound(corr: np.ndarray) -> float:
    a = np.abs(corr[1:])
    K = len(a)
    scale = max(abs(corr[0]), 1e-300)
    if K == 0 or a[-1] <= 1e-15 * scale:
        return 0.0
    half = max(K // 2, 1)
    if a[half - 1] <= 0:
        return 0.0
    r = (a[-1] / a[half - 1]) ** (1.0 / max(K - half, 1))
    if r >= 1:
        raise NonSummable(f"correlations do not decay over {K} terms")
    return float(2 * a[-1] * r / (1 - r))


def green_kubo_sigma2(system, observable, K: int, method: str = "ulam", G: int = 4096,
                      replicas: int = 20_000, base_seed: int = 0) -> GreenKubo:
    """int f^2 + 2 sum_{k<=K} int f f o T^k, for centred f."""
    if method in ("ulam", "UlamPowers"):
        return _gk_ulam(system, observable, K, G)
    if method in ("mc", "MonteCarlo"):
        return _gk_mc(system, observable, K, replicas, base_seed)
    raise ValueError(f"unknown method {method!r}")


def _gk_ulam_once(system, observable, K: int, G: int) -> tuple[float, np.ndarray]:
    op = build_ulam(system, observable, 0.0, G)
    m = op.weights
    f = op.f_mid - np.dot(m, op.f_mid)
    corr = [float(np.dot(m, f * f))]
    u = f
    for _ in range(K):
        u = op.base @ u
        corr.append(float(np.dot(m, f * u)))
    corr = np.array(corr)
    return float(corr[0] + 2 * corr[1:].sum()), corr


def _gk_ulam(system, observable, K: int, G: int) -> GreenKubo:
    s2, corr = _gk_ulam_once(system, observable, K, G)
    tail = _tail_bound(corr)
    # grid Cauchy difference stands in for the discretization error
    coarse, _ = _gk_ulam_once(system, observable, K, G // 2)
    return GreenKubo(s2, abs(s2 - coarse) + tail, tail, corr)


def _gk_mc(system, observable, K: int, replicas: int, base_seed: int) -> GreenKubo:
    q = np.empty(replicas)
    corr = np.zeros(K + 1)
    for r in range(replicas):
        coords = np.concatenate(list(orbit_blocks(system, replica_rng(base_seed, r), K + 1)))
        f = observable.evaluate(coords, system)
        prods = f[0] * f
        corr += prods
        q[r] = prods[0] + 2 * prods[1:].sum()
    corr /= replicas
    if corr[0] > 0 and K >= 4 and np.mean(np.abs(corr[-max(K // 4, 1):])) > 0.5 * corr[0]:
        raise NonSummable(f"correlations do not decay over {K} terms")
    return GreenKubo(float(q.mean()), float(q.std(ddof=1) / math.sqrt(replicas)), 0.0, corr)


@dataclass
class CharfnResidual:
    residual: float
    stderr: float
    estimate: complex
    lam_power: complex


def charfn_vs_eigen(system, observable, t: float, n: int, replicas: int, op: UlamOperator | None = None,
                    G: int = 4096, base_seed: int = 0, lam: complex | None = None) -> CharfnResidual:
    """|mean of e^{it S_n f} over replicas - lambda(t)^n| with its Monte Carlo error."""
    if lam is None:
        if op is None:
            op = build_ulam(system, observable, t, G)
        lam, _ = leading_eigenvalue(op)
    z = np.empty(replicas, dtype=complex)
    for r in range(replicas):
        coords = np.concatenate(list(orbit_blocks(system, replica_rng(base_seed, r), n)))
        z[r] = np.exp(1j * t * observable.evaluate(coords, system).sum())
    est = complex(z.mean())
    se = math.sqrt((z.real.var(ddof=1) + z.imag.var(ddof=1)) / replicas)
    lp = complex(lam) ** n
    return CharfnResidual(abs(est - lp), se, est, lp)


def refinement_gap(system, observable, t: float, G: int) -> float:
    """|lambda_G(t) - lambda_2G(t)|."""
    a, _ = leading_eigenvalue(build_ulam(system, observable, t, G))
    b, _ = leading_eigenvalue(build_ulam(system, observable, t, 2 * G))
    return abs(a - b)
