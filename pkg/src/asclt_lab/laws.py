"""Target limit laws: Gaussian, stable and the point mass at zero.

Stable laws use the characteristic function

    E exp(itW) = exp(-c |t|^p (1 - i beta sgn(t) tan(p pi / 2)))

with p in (1, 2), c > 0, |beta| <= 1. The sampler works with the scale
gamma = c**(1/p), i.e. gamma**p == c.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn
from scipy.special import ndtr, sici

from .renorm import SlowVar, solve_bn

CDF_ATOL = 1e-6


class DegenerateTails(ValueError):
    pass


class QuadratureFailure(RuntimeError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Dirac0:
    def char_fn(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones(t.shape, dtype=complex)
        return complex(out) if out.ndim == 0 else out

    def cdf(self, x):
        out = (np.asarray(x, dtype=float) >= 0).astype(float)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, x):
        out = (np.asarray(x, dtype=float) > 0).astype(float)
        return float(out) if out.ndim == 0 else out

    def jumps(self) -> np.ndarray:
        return np.zeros(1)

    def sample(self, rng: np.random.Generator, size=None):
        return 0.0 if size is None else np.zeros(size)

    @property
    def scale(self) -> float:
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "dirac0"}


@dataclass(frozen=True)
class Gaussian:
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")

    @property
    def degenerate(self) -> bool:
        return self.sigma2 == 0

    @property
    def scale(self) -> float:
        return math.sqrt(self.sigma2)

    def char_fn(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-0.5 * self.sigma2 * t**2).astype(complex)
        return complex(out) if out.ndim == 0 else out

    def cdf(self, x):
        if self.degenerate:
            return Dirac0().cdf(x)
        out = ndtr(np.asarray(x, dtype=float) / self.scale)
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, x):
        if self.degenerate:
            return Dirac0().cdf_left(x)
        return self.cdf(x)

    def jumps(self) -> np.ndarray:
        return np.zeros(1) if self.degenerate else np.zeros(0)

    def sample(self, rng: np.random.Generator, size=None):
        return self.scale * rng.standard_normal(size)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "gaussian", "sigma2": self.sigma2}


def _std_stable_integrand(t, x, p, skew):
    # Im[e^{-itx} phi(t)] / t for the c = 1 law; skew = beta * tan(p pi / 2)
    tp = t**p
    return np.exp(-tp) * np.sin(skew * tp - t * x) / t


@dataclass(frozen=True)
class Stable:
    p: float
    c: float = 1.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not 1 < self.p < 2:
            raise ValueError("stable index p must lie strictly in (1, 2)")
        if not self.c > 0:
            raise ValueError("stable scale c must be positive")
        if abs(self.beta) > 1:
            raise ValueError("skewness beta must lie in [-1, 1]")

    @property
    def scale(self) -> float:
        """gamma with gamma**p == c."""
        return self.c ** (1.0 / self.p)

    @property
    def _skew(self) -> float:
        return self.beta * math.tan(self.p * math.pi / 2)

    def char_fn(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t) ** self.p
        out = np.exp(-self.c * a * (1 - 1j * self.beta * np.sign(t) * math.tan(self.p * math.pi / 2)))
        return complex(out) if out.ndim == 0 else out

    def tail_constant(self) -> float:
        """C with P(|W| > x) ~ C x^-p (sum of both tails)."""
        return self.c / (gamma_fn(1 - self.p) * math.cos(self.p * math.pi / 2))

    # Gil-Pelaez inversion, done for the c = 1 law and rescaled. Far from the
    # origin the oscillating factor goes into a QAWO weight: writing
    # sin(a - tz) = sin(a) cos(tz) - cos(a) sin(tz) and peeling off the 1/t
    # part, whose sine integral is Si(zU) in closed form.
    def _cdf_quad(self, z: float) -> float:
        p, skew = self.p, self._skew
        upper = 40.0 ** (1 / p)

        def even(t):
            return math.exp(-t**p) * math.sin(skew * t**p) / t if t > 0 else 0.0

        def odd(t):
            return (math.exp(-t**p) * math.cos(skew * t**p) - 1.0) / t if t > 0 else 0.0

        i1, e1 = integrate.quad(even, 0.0, upper, weight="cos", wvar=z, epsabs=1e-11, limit=500)
        i2, e2 = integrate.quad(odd, 0.0, upper, weight="sin", wvar=z, epsabs=1e-11, limit=500)
        if e1 + e2 > CDF_ATOL:
            raise QuadratureFailure(f"Gil-Pelaez error {e1 + e2:.2e} at z={z}")
        return 0.5 - (i1 - sici(z * upper)[0] - i2) / math.pi

    @cached_property
    def _table(self) -> tuple[float, CubicSpline]:
        # sinh-spaced nodes in standardized units, cdf evaluated in one adaptive pass
        span = 60.0
        u = np.linspace(-math.asinh(span / 2), math.asinh(span / 2), 1601)
        z = 2 * np.sinh(u)
        upper = 40.0 ** (1 / self.p)
        vals, err = integrate.quad_vec(
            lambda t: _std_stable_integrand(t, z, self.p, self._skew),
            0.0, upper, epsabs=1e-10, epsrel=1e-10, norm="max", limit=20000,
        )
        if err > CDF_ATOL:
            raise QuadratureFailure(f"Gil-Pelaez table error {err:.2e}")
        F = np.clip(0.5 - vals / math.pi, 0.0, 1.0)
        F = np.maximum.accumulate(F)
        return span, CubicSpline(u, F)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.atleast_1d(x / self.scale)
        span, spline = self._table
        out = np.empty(z.shape)
        inside = np.abs(z) < span
        out[inside] = spline(np.arcsinh(z[inside] / 2))
        for i in np.nonzero(~inside)[0]:
            out[i] = self._cdf_quad(float(z[i]))
        # the table and the far-field quadrature may disagree in the last ulps
        order = np.argsort(z, kind="stable")
        out[order] = np.maximum.accumulate(out[order])
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    cdf_left = cdf

    def jumps(self) -> np.ndarray:
        return np.zeros(0)

    def sample(self, rng: np.random.Generator, size=None):
        """Chambers-Mallows-Stuck draw, returned on the scale gamma = c**(1/p)."""
        a, b = self.p, self.beta
        tan_a = math.tan(math.pi * a / 2)
        shift = math.atan(b * tan_a) / a
        stretch = (1 + (b * tan_a) ** 2) ** (1 / (2 * a))
        v = rng.uniform(-math.pi / 2, math.pi / 2, size)
        w = rng.standard_exponential(size)
        x = (stretch * np.sin(a * (v + shift)) / np.cos(v) ** (1 / a)
             * (np.cos(v - a * (v + shift)) / w) ** ((1 - a) / a))
        return self.scale * x

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "stable", "p": self.p, "c": self.c, "beta": self.beta}


TargetLaw = Gaussian | Stable | Dirac0


def law_from_dict(d: dict[str, Any]) -> TargetLaw:
    kind = d.get("kind")
    if kind == "gaussian":
        return Gaussian(float(d.get("sigma2", 1.0)))
    if kind == "stable":
        return Stable(float(d["p"]), float(d.get("c", 1.0)), float(d.get("beta", 0.0)))
    if kind == "dirac0":
        return Dirac0()
    raise ValueError(f"unknown law kind {kind!r}")


def stable_from_tails(p: float, c1: float, c2: float) -> Stable:
    """Stable limit of i.i.d. sums whose tails are c1 x^-p (right) and c2 x^-p (left)."""
    if c1 < 0 or c2 < 0:
        raise ValueError("tail constants must be nonnegative")
    if c1 + c2 == 0:
        raise DegenerateTails("c1 + c2 must be positive")
    c = (c1 + c2) * gamma_fn(1 - p) * math.cos(p * math.pi / 2)
    return Stable(p, c, (c1 - c2) / (c1 + c2))


def char_fn(law: TargetLaw, t):
    return law.char_fn(t)


def cdf(law: TargetLaw, x):
    return law.cdf(x)


def sample(law: TargetLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


def cdf_table(law: TargetLaw, lo: float, hi: float, points: int = 1001) -> np.ndarray:
    """(x, F(x)) rows for plotting."""
    x = np.linspace(lo, hi, points)
    return np.column_stack([x, law.cdf(x)])


def _ecdf(values: np.ndarray, cum: np.ndarray, at: np.ndarray):
    # (ECDF(at-), ECDF(at)) for sorted unique values with cumulative weights cum
    left_idx = np.searchsorted(values, at, side="left")
    right_idx = np.searchsorted(values, at, side="right")
    padded = np.concatenate([[0.0], cum])
    return padded[left_idx], padded[right_idx]


def _collapse(values, weights):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("no atoms")
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    else:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != values.shape:
            raise ValueError("values and weights differ in length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
    order = np.argsort(values, kind="stable")
    v, inv = np.unique(values[order], return_inverse=True)
    w = np.bincount(inv, weights=weights[order])
    return v, np.cumsum(w)


def ks_distance(values, law: TargetLaw, weights=None) -> float:
    """Sup distance between a weighted empirical CDF and the law's CDF.

    Both one-sided limits are compared at every atom and at every jump of
    the law, which is where the supremum of two CDF differences lives.
    """
    v, cum = _collapse(values, weights)
    cum[-1] = 1.0
    at = np.union1d(v, law.jumps())
    e_left, e_right = _ecdf(v, cum, at)
    d_left = np.abs(e_left - law.cdf_left(at))
    d_right = np.abs(e_right - law.cdf(at))
    return float(max(d_left.max(), d_right.max()))


def ks_two_measures(values1, weights1, values2, weights2) -> float:
    """Sup distance between two weighted empirical CDFs."""
    v1, c1 = _collapse(values1, weights1)
    v2, c2 = _collapse(values2, weights2)
    at = np.union1d(v1, v2)
    l1, r1 = _ecdf(v1, c1, at)
    l2, r2 = _ecdf(v2, c2, at)
    return float(max(np.abs(l1 - l2).max(), np.abs(r1 - r2).max()))


# --- tail classification -------------------------------------------------

@dataclass(frozen=True)
class TailClass:
    condition: str
    p: float = 2.0
    c1: float = 0.0
    c2: float = 0.0
    slow: SlowVar = SlowVar()

    def __post_init__(self) -> None:
        if self.condition not in ("I", "II", "III"):
            raise ValueError("condition must be I, II or III")
        if self.condition == "I" and (self.p != 2 or self.slow != SlowVar()):
            raise ValueError("condition I forces p = 2 and L = 1")
        if self.condition == "II" and self.p != 2:
            raise ValueError("condition II forces p = 2")
        if self.condition == "III":
            if not 1 < self.p < 2:
                raise ValueError("condition III needs p in (1, 2)")
            if self.c1 + self.c2 <= 0:
                raise DegenerateTails("condition III needs c1 + c2 > 0")

    def bn(self, n: float) -> float:
        return solve_bn(self.p, self.slow, n)


@dataclass
class TailDiagnostics:
    condition: str
    upper_exponent: float | None
    lower_exponent: float | None
    abs_exponent: float | None
    c1_over_c2: float | None
    n_grid: list[float]
    # n m(|f| > B_n), n E|f|1{|f|>B_n} / B_n, n E f^2 1{|f|<=B_n} / B_n^2
    truncated_ratios: list[tuple[float, float, float]]


def hill_exponent(tail: np.ndarray, k: int) -> float | None:
    """Hill estimate of the tail index from the k largest positive values."""
    tail = np.sort(tail[tail > 0])[::-1]
    if len(tail) <= k or k < 2:
        return None
    logs = np.log(tail[:k]) - math.log(tail[k])
    h = logs.mean()
    return math.inf if h == 0 else float(1.0 / h)


def classify_tail(samples, candidate: TailClass | None = None, tail_fraction: float = 0.01,
                  n_grid=(10, 100, 1000, 10_000)) -> TailDiagnostics:
    x = np.asarray(samples, dtype=float)
    if x.size < 10_000:
        raise ValueError("classify_tail needs at least 1e4 samples")
    k = max(10, int(tail_fraction * x.size))
    upper = hill_exponent(x, k) if np.count_nonzero(x > 0) > k else None
    lower = hill_exponent(-x, k) if np.count_nonzero(x < 0) > k else None
    ax = np.abs(x - np.median(x))
    abs_exp = hill_exponent(ax, k)
    threshold = np.quantile(np.abs(x), 1 - tail_fraction)
    n_up = np.count_nonzero(x > threshold)
    n_lo = np.count_nonzero(x < -threshold)
    ratio = n_up / n_lo if n_lo > 0 else None
    if abs_exp is None or abs_exp > 2.2:
        cond = "I"
    elif abs_exp >= 1.9:
        cond = "II"
    else:
        cond = "III"
    p = candidate.p if candidate is not None else (min(abs_exp, 2.0) if cond == "III" and abs_exp else 2.0)
    slow = candidate.slow if candidate is not None else SlowVar()
    ratios = []
    ax = np.abs(x)
    for n in n_grid:
        bn = solve_bn(p, slow, n)
        big = ax > bn
        ratios.append((
            float(n * big.mean()),
            float(n * np.mean(ax * big) / bn),
            float(n * np.mean(x**2 * ~big) / bn**2),
        ))
    return TailDiagnostics(cond, upper, lower, abs_exp, ratio, list(map(float, n_grid)), ratios)
