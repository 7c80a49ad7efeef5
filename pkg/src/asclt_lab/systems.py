"""Dynamical systems with exact invariant-measure samplers, and observables.

Symbolic systems (Bernoulli shifts, the doubling map, the i.i.d. uniform
shift) are simulated on symbol streams, never by iterating floats: a point
is a stream plus an offset and T is the left shift. The real coordinate of
a point is its interval code

    u = F(a_0) + p(a_0) * (F(a_1) + p(a_1) * (...)),

which is uniform on [0, 1] under the Bernoulli measure, and equals the
binary expansion x for the doubling map.

Vectorised orbits come from `orbit`, which returns the coordinates of
x, Tx, ..., T^{n-1}x with x drawn from the invariant measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from . import _kernels

LOOKAHEAD = 64
METRIC_CAP = 64


# --- symbolic points -----------------------------------------------------

class SymbolStream:
    """Lazily extended i.i.d. symbol sequence shared by all shifts of a point."""

    def __init__(self, draw: Callable[[np.random.Generator, int], np.ndarray], rng: np.random.Generator):
        self._draw = draw
        self._rng = rng
        self._buf = np.empty(0, dtype=np.int64)

    def get(self, start: int, stop: int) -> np.ndarray:
        if stop > len(self._buf):
            extra = max(stop - len(self._buf), LOOKAHEAD)
            self._buf = np.concatenate([self._buf, self._draw(self._rng, extra)])
        return self._buf[start:stop]


@dataclass(frozen=True)
class SymbolPoint:
    stream: SymbolStream
    offset: int = 0

    def symbols(self, count: int) -> np.ndarray:
        return self.stream.get(self.offset, self.offset + count)

    def shifted(self, k: int = 1) -> SymbolPoint:
        return SymbolPoint(self.stream, self.offset + k)

    @classmethod
    def from_symbols(cls, symbols, system=None, rng=None) -> SymbolPoint:
        """A point whose stream starts with the given symbols; later ones come from system."""

        def draw(r, k):
            if system is None:
                raise IndexError("symbol stream exhausted")
            return system.draw(r, k)

        stream = SymbolStream(draw, rng if rng is not None else np.random.default_rng(0))
        stream._buf = np.asarray(symbols, dtype=np.int64).copy()
        return cls(stream, 0)


class SymbolicSystem:
    """Full one-sided shift with i.i.d. symbols (Gibbs-Markov with big images)."""

    tau: float = 0.5
    name = "symbolic"

    # subclasses provide: draw(rng, size), left, width (interval-code tables)
    left: np.ndarray
    width: np.ndarray

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def sample_invariant(self, rng: np.random.Generator) -> SymbolPoint:
        return SymbolPoint(SymbolStream(self.draw, rng), 0)

    def step(self, point: SymbolPoint) -> SymbolPoint:
        return point.shifted(1)

    def coordinate(self, point: SymbolPoint) -> float:
        u, scale = 0.0, 1.0
        for a in point.symbols(LOOKAHEAD):
            u += scale * self.left[a]
            scale *= self.width[a]
            if scale < 2.0**-60:
                break
        return u

    def cell_of(self, point: SymbolPoint) -> int:
        return int(point.symbols(1)[0])

    def cell_of_coord(self, coords) -> np.ndarray:
        edges = np.append(self.left, 1.0)
        return np.clip(np.searchsorted(edges, coords, side="right") - 1, 0, len(self.left) - 1)

    def gm_metric(self, x: SymbolPoint, y: SymbolPoint) -> float:
        """tau**s(x, y), s the first index where the symbols differ; 0 past the cap."""
        a, b = x.symbols(METRIC_CAP), y.symbols(METRIC_CAP)
        diff = np.nonzero(a != b)[0]
        return 0.0 if len(diff) == 0 else self.tau ** int(diff[0])

    def cell_measure(self, word) -> float:
        w = np.asarray(word, dtype=np.int64)
        return float(np.prod(self.width[w])) if len(w) else 1.0

    def orbit(self, rng: np.random.Generator, n: int, replicas: int | None = None, prefix=None) -> np.ndarray:
        """Coordinates of x, Tx, ..., T^{n-1}x; prefix forces the first symbols per row."""
        rows = 1 if replicas is None else replicas
        sym = self.draw(rng, (rows, n + LOOKAHEAD))
        if prefix is not None:
            prefix = np.atleast_2d(np.asarray(prefix, dtype=np.int64))
            sym[:, :prefix.shape[1]] = prefix
        tail = rng.random(rows)
        out = self._code_backward(sym, tail)[:, :n]
        return out[0] if replicas is None else out

    def _code_backward(self, sym: np.ndarray, tail: np.ndarray) -> np.ndarray:
        return _kernels.interval_code_backward(sym, self.left, self.width, tail)

    def integrate(self, func: Callable, breakpoints=()) -> float:
        """Integral of func(coordinate) under the invariant measure (Lebesgue on the code)."""
        pts = sorted(set(np.clip(list(breakpoints) + list(self.left[1:64]), 0, 1)))
        val, _ = integrate.quad(lambda u: float(func(np.asarray(u))), 0.0, 1.0, points=pts or None, limit=500)
        return val


@dataclass(frozen=True)
class BernoulliShift(SymbolicSystem):
    """Bernoulli shift on a finite alphabet, or the geometric family p_a = (1-q) q^a."""

    probs: tuple[float, ...] = ()
    q: float | None = None
    tau: float = 0.5
    name = "bernoulli"

    def __post_init__(self) -> None:
        if self.q is None:
            p = np.asarray(self.probs, dtype=float)
            if len(p) < 2 or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
                raise ValueError("probs must be a positive vector summing to 1")
        elif not 0 < self.q < 1:
            raise ValueError("geometric parameter q must lie in (0, 1)")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")

    @classmethod
    def geometric(cls, q: float, tau: float = 0.5) -> BernoulliShift:
        return cls(q=q, tau=tau)

    @property
    def finite(self) -> bool:
        return self.q is None

    @cached_property
    def width(self) -> np.ndarray:
        if self.finite:
            return np.asarray(self.probs, dtype=float)
        # table deep enough that q**A underflows; symbols beyond are never drawn in practice
        size = int(math.ceil(math.log(1e-300) / math.log(self.q)))
        a = np.arange(size)
        return (1 - self.q) * self.q**a

    @cached_property
    def left(self) -> np.ndarray:
        if self.finite:
            return np.concatenate([[0.0], np.cumsum(self.width)[:-1]])
        return 1.0 - self.q ** np.arange(len(self.width))

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.finite:
            return rng.choice(len(self.probs), size=size, p=self.probs).astype(np.int64)
        # inverse CDF of the geometric law, exact
        u = 1.0 - rng.random(size)
        a = np.floor(np.log(u) / math.log(self.q)).astype(np.int64)
        return np.minimum(a, len(self.width) - 1)

    def to_dict(self) -> dict[str, Any]:
        if self.finite:
            return {"kind": "bernoulli", "probs": list(self.probs), "tau": self.tau}
        return {"kind": "bernoulli", "q": self.q, "tau": self.tau}


@dataclass(frozen=True)
class DoublingMap(SymbolicSystem):
    """x -> 2x mod 1 with Lebesgue measure, as the shift on fair bits."""

    tau: float = 0.5
    name = "doubling"
    left = np.array([0.0, 0.5])
    width = np.array([0.5, 0.5])

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        # via doubles so that chunked draws reproduce one long draw
        return (rng.random(size) >= 0.5).astype(np.int64)

    def _code_backward(self, sym: np.ndarray, tail: np.ndarray) -> np.ndarray:
        # x_k = (b_k + x_{k+1}) / 2 is a first-order linear recursion; run it reversed
        rev = sym[:, ::-1].astype(float)
        out, _ = lfilter([0.5], [1.0, -0.5], rev, axis=1, zi=0.5 * tail[:, None])
        return out[:, ::-1]

    def map(self, x):
        """The float map, for tests only (it collapses to 0 after ~53 steps)."""
        return np.mod(2 * np.asarray(x), 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "doubling"}


@dataclass(frozen=True)
class IidUniform(SymbolicSystem):
    """Shift on [0,1]^N with product Lebesgue measure: coordinates are i.i.d. uniform."""

    name = "iid_uniform"
    tau: float = 0.5
    left = np.array([0.0])
    width = np.array([1.0])

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        raise TypeError("IidUniform has a continuous alphabet")

    def sample_invariant(self, rng: np.random.Generator) -> SymbolPoint:
        stream = SymbolStream(lambda r, k: r.random(k), rng)
        stream._buf = np.empty(0)
        return SymbolPoint(stream, 0)

    def coordinate(self, point: SymbolPoint) -> float:
        return float(point.symbols(1)[0])

    def cell_of(self, point: SymbolPoint) -> int:
        return 0

    def cell_of_coord(self, coords) -> np.ndarray:
        return np.zeros(np.shape(coords), dtype=np.int64)

    def gm_metric(self, x: SymbolPoint, y: SymbolPoint) -> float:
        a, b = x.symbols(METRIC_CAP), y.symbols(METRIC_CAP)
        diff = np.nonzero(a != b)[0]
        return 0.0 if len(diff) == 0 else self.tau ** int(diff[0])

    def orbit(self, rng: np.random.Generator, n: int, replicas: int | None = None, prefix=None) -> np.ndarray:
        if prefix is not None:
            raise ValueError("IidUniform has no cylinder prefixes")
        return rng.random(n if replicas is None else (replicas, n))

    def integrate(self, func: Callable, breakpoints=()) -> float:
        val, _ = integrate.quad(lambda u: float(func(np.asarray(u))), 0.0, 1.0,
                                points=sorted(breakpoints) or None, limit=500)
        return val

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "iid_uniform"}


# --- Liverani-Saussol-Vaienti map ----------------------------------------

@lru_cache(maxsize=8)
def _lsv_density(alpha: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Invariant density of the LSV map by a Nystrom solve.

    Works in s = x**alpha, where the density's x**-alpha singularity becomes
    smooth: with psi(x) = x**alpha h(x), the fixed-point equation
    h = L h reads psi(y) = y**alpha [psi(a) a**-alpha a'(y) + psi(b) b**-alpha / 2]
    for the inverse branches a (left) and b(y) = (y + 1) / 2. psi is
    interpolated by local cubics in s. Returns s-nodes and the density of
    the invariant measure with respect to ds.
    """
    gam = 1.0 / alpha
    s = np.linspace(0.0, 1.0, nodes + 1)
    x = s**gam
    y = x[1:]
    a = _lsv_left_inverse(y, alpha)
    b = 0.5 * (y + 1.0)
    K = np.zeros((nodes + 1, nodes + 1))
    rows = np.arange(1, nodes + 1)

    def add(points, coef):
        sp = points**alpha * nodes
        j0 = np.clip(np.floor(sp).astype(int) - 1, 0, nodes - 3)
        u = sp - j0
        lag = (-(u - 1) * (u - 2) * (u - 3) / 6, u * (u - 2) * (u - 3) / 2,
               -u * (u - 1) * (u - 3) / 2, u * (u - 1) * (u - 2) / 6)
        for q in range(4):
            np.add.at(K, (rows, j0 + q), coef * lag[q])

    add(a, (y / a) ** alpha / _lsv_left_slope(a, alpha))
    add(b, (y / b) ** alpha / 2.0)
    A = np.eye(nodes + 1) - K
    # h dx = psi x^-alpha dx = psi * gam * s^(gam - 2) ds
    jac = gam * s ** (gam - 2.0) if gam >= 2 else gam * np.where(s > 0, s, s[1]) ** (gam - 2.0)
    wq = np.full(nodes + 1, 1.0 / nodes)
    wq[[0, -1]] /= 2
    A[0] = wq * jac
    rhs = np.zeros(nodes + 1)
    rhs[0] = 1.0
    psi = np.linalg.solve(A, rhs)
    return s, psi * jac


def _lsv_left(x, alpha):
    return x * (1.0 + (2.0 * x) ** alpha)


def _lsv_left_slope(x, alpha):
    return 1.0 + (1.0 + alpha) * (2.0 * x) ** alpha


def _lsv_left_inverse(y, alpha):
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.full_like(y, 0.5)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = _lsv_left(mid, alpha) > y
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LsvMap:
    """T(x) = x (1 + 2^alpha x^alpha) on [0, 1/2), 2x - 1 on [1/2, 1]."""

    alpha: float = 0.3
    burn_in: int = 10_000
    tau: float = 0.5
    name = "lsv"

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def map(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < 0.5, _lsv_left(x, self.alpha), 2.0 * x - 1.0)
        return float(out) if out.ndim == 0 else out

    def step(self, point: float) -> float:
        return self.map(point)

    def coordinate(self, point: float) -> float:
        return float(point)

    def sample_invariant(self, rng: np.random.Generator) -> float:
        return float(self.sample_invariant_batch(rng, 1)[0])

    def sample_invariant_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        x0 = rng.random(size)
        _kernels.lsv_orbit(x0, 0, self.alpha, self.burn_in)
        return x0

    def cell_of(self, point: float) -> int:
        return int(point >= 0.5)

    def cell_of_coord(self, coords) -> np.ndarray:
        return (np.asarray(coords) >= 0.5).astype(np.int64)

    def gm_metric(self, x: float, y: float) -> float:
        for s in range(METRIC_CAP):
            if self.cell_of(x) != self.cell_of(y):
                return self.tau**s
            x, y = self.step(x), self.step(y)
        return 0.0

    def orbit(self, rng: np.random.Generator, n: int, replicas: int | None = None, start=None) -> np.ndarray:
        rows = 1 if replicas is None else replicas
        if start is None:
            x0 = rng.random(rows)
            burn = self.burn_in
        else:
            x0 = np.array(np.broadcast_to(np.asarray(start, dtype=float), (rows,)))
            burn = 0
        out = _kernels.lsv_orbit(x0, n, self.alpha, burn)
        return out[0] if replicas is None else out

    def density(self, nodes: int = 2000) -> Callable:
        """Invariant density h(x) with respect to Lebesgue."""
        s, dens_s = _lsv_density(self.alpha, nodes)
        spline = CubicSpline(s, dens_s)
        gam = 1.0 / self.alpha

        def h(x):
            x = np.asarray(x, dtype=float)
            sx = x**self.alpha
            return spline(sx) / (gam * np.maximum(sx, 1e-300) ** (gam - 1))

        return h

    def integrate(self, func: Callable, breakpoints=(), nodes: int = 2000) -> float:
        """Integral of func under the invariant measure, done in s = x**alpha."""
        s, dens_s = _lsv_density(self.alpha, nodes)
        spline = CubicSpline(s, dens_s)
        gam = 1.0 / self.alpha
        cuts = sorted({0.0, 1.0, 0.5**self.alpha, *(b**self.alpha for b in breakpoints)})
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            v, _ = integrate.quad(lambda t: float(func(np.asarray(t**gam))) * float(spline(t)),
                                  lo, hi, limit=500, epsabs=1e-12, epsrel=1e-12)
            total += v
        return total

    def cell_measure(self, cells) -> float:
        """m of a union of the two branch cells, from the invariant density."""
        cells = set(np.atleast_1d(cells).tolist())
        m1 = self.integrate(lambda x: (x >= 0.5).astype(float))
        return (m1 if 1 in cells else 0.0) + ((1 - m1) if 0 in cells else 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "lsv", "alpha": self.alpha}


System = BernoulliShift | DoublingMap | IidUniform | LsvMap


def system_from_dict(d: dict[str, Any]):
    kind = d.get("kind")
    if kind == "doubling":
        return DoublingMap()
    if kind == "bernoulli":
        if "q" in d:
            return BernoulliShift.geometric(float(d["q"]), float(d.get("tau", 0.5)))
        return BernoulliShift(tuple(map(float, d["probs"])), tau=float(d.get("tau", 0.5)))
    if kind == "lsv":
        return LsvMap(float(d.get("alpha", 0.3)), int(d.get("burn_in", 10_000)))
    if kind == "iid_uniform":
        return IidUniform()
    raise ValueError(f"unknown system kind {kind!r}")


# --- observables ----------------------------------------------------------

HOLDER_FUNCS: dict[str, tuple[Callable, float]] = {
    # name -> (vectorised function of the coordinate, Lipschitz constant on [0, 1])
    "identity": (lambda x: np.asarray(x, dtype=float), 1.0),
    "square": (lambda x: np.asarray(x, dtype=float) ** 2, 2.0),
    "cos2pi": (lambda x: np.cos(2 * np.pi * np.asarray(x, dtype=float)), 2 * np.pi),
}


@dataclass(frozen=True)
class LocallyConstant:
    values: tuple[float, ...]

    @classmethod
    def constant(cls, value: float) -> LocallyConstant:
        return cls((float(value),))

    def evaluate(self, coords, system) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        if len(v) == 1:
            return np.full(np.shape(coords), v[0])
        return v[system.cell_of_coord(coords)]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def distortion_bound(self, system) -> float:
        return 0.0

    def exact_mean(self, system) -> float | None:
        if len(self.values) == 1:
            return self.values[0]
        if isinstance(system, SymbolicSystem) and not isinstance(system, IidUniform):
            return float(sum(v * system.width[a] for a, v in enumerate(self.values)))
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "locally_constant", "values": list(self.values)}


@dataclass(frozen=True)
class FourierSum:
    """sum a cos(2 pi k x) + sum b sin(2 pi k x) over positive integer frequencies."""

    cos: tuple[tuple[int, float], ...] = ()
    sin: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        for k, _ in self.cos + self.sin:
            if int(k) != k or k < 1:
                raise ValueError("frequencies must be positive integers")

    def evaluate(self, coords, system=None) -> np.ndarray:
        x = np.asarray(coords, dtype=float)
        out = np.zeros(x.shape)
        for k, a in self.cos:
            out += a * np.cos(2 * np.pi * k * x)
        for k, b in self.sin:
            out += b * np.sin(2 * np.pi * k * x)
        return out

    def sup_norm(self) -> float:
        return float(sum(abs(a) for _, a in self.cos + self.sin))

    def lipschitz(self) -> float:
        return float(sum(2 * np.pi * k * abs(a) for k, a in self.cos + self.sin))

    def distortion_bound(self, system) -> float:
        return self.lipschitz()

    def exact_mean(self, system) -> float | None:
        # coordinates are Lebesgue-distributed on symbolic systems
        return 0.0 if isinstance(system, SymbolicSystem) else None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "fourier", "cos": [list(t) for t in self.cos], "sin": [list(t) for t in self.sin]}


@dataclass(frozen=True)
class HeavyTail:
    """f = G^{-1}(u) for the uniform coordinate u, with m(f > x) = c1 x^-p and
    m(f < -x) = c2 x^-p for x >= (c1 + c2)^(1/p)."""

    p: float
    c1: float = 1.0
    c2: float = 0.0

    def __post_init__(self) -> None:
        if not self.p > 0 or (self.p <= 1 and self.c1 != self.c2):
            raise ValueError("heavy-tail index must exceed 1, or the tails must be symmetric")
        if self.c1 < 0 or self.c2 < 0 or self.c1 + self.c2 <= 0:
            raise ValueError("need c1, c2 >= 0 with c1 + c2 > 0")

    @property
    def threshold(self) -> float:
        return (self.c1 + self.c2) ** (1 / self.p)

    def from_uniform(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        q2 = self.c2 / (self.c1 + self.c2)
        s = self.threshold
        with np.errstate(divide="ignore", invalid="ignore"):
            neg = -s * (u / q2) ** (-1 / self.p) if q2 > 0 else np.zeros_like(u)
            pos = s * ((1 - u) / (1 - q2)) ** (-1 / self.p) if q2 < 1 else np.zeros_like(u)
        return np.where(u < q2, neg, pos)

    def evaluate(self, coords, system=None) -> np.ndarray:
        if system is not None and not isinstance(system, SymbolicSystem):
            raise TypeError("HeavyTail needs a uniform coordinate (symbolic system)")
        return self.from_uniform(coords)

    def distortion_bound(self, system) -> float:
        # locally constant on 64-symbol cylinders
        return 0.0

    def exact_mean(self, system) -> float | None:
        q1 = self.c1 / (self.c1 + self.c2)
        if self.c1 == self.c2:
            return 0.0
        return self.threshold * self.p / (self.p - 1) * (2 * q1 - 1)

    def tail_class(self):
        from .laws import TailClass
        return TailClass("III", self.p, self.c1, self.c2)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "heavy_tail", "p": self.p, "c1": self.c1, "c2": self.c2}


@dataclass(frozen=True)
class Holder:
    name: str
    func: Callable = field(compare=False, repr=False, default=None)
    lipschitz: float = 1.0

    @classmethod
    def named(cls, name: str) -> Holder:
        func, lip = HOLDER_FUNCS[name]
        return cls(name, func, lip)

    def evaluate(self, coords, system=None) -> np.ndarray:
        return np.asarray(self.func(np.asarray(coords, dtype=float)), dtype=float)

    def distortion_bound(self, system) -> float:
        return self.lipschitz

    def exact_mean(self, system) -> float | None:
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "holder", "name": self.name}


@dataclass(frozen=True)
class Shifted:
    """base - shift; `centered` builds it with shift = the invariant mean."""

    base: Any
    shift: float

    def evaluate(self, coords, system=None) -> np.ndarray:
        return self.base.evaluate(coords, system) - self.shift

    def distortion_bound(self, system) -> float:
        return self.base.distortion_bound(system)

    def exact_mean(self, system) -> float | None:
        m = self.base.exact_mean(system)
        return None if m is None else m - self.shift

    def to_dict(self) -> dict[str, Any]:
        return {**self.base.to_dict(), "shift": self.shift}


Observable = LocallyConstant | FourierSum | HeavyTail | Holder | Shifted


def invariant_mean(obs, system) -> float:
    exact = obs.exact_mean(system)
    if exact is not None:
        return float(exact)
    return system.integrate(lambda x: obs.evaluate(x, system), breakpoints=(0.5,))


def centered(obs, system):
    mean = invariant_mean(obs, system)
    return obs if mean == 0 else Shifted(obs, mean)


def eval_observable(obs, system, point) -> float:
    return float(obs.evaluate(np.array([system.coordinate(point)]), system)[0])


def observable_from_dict(d: dict[str, Any], system=None):
    kind = d.get("kind")
    if kind == "locally_constant":
        obs = LocallyConstant(tuple(map(float, d["values"])))
    elif kind == "constant":
        obs = LocallyConstant.constant(float(d.get("value", 0.0)))
    elif kind == "fourier":
        obs = FourierSum(tuple((int(k), float(a)) for k, a in d.get("cos", [])),
                         tuple((int(k), float(b)) for k, b in d.get("sin", [])))
    elif kind == "heavy_tail":
        obs = HeavyTail(float(d["p"]), float(d.get("c1", 1.0)), float(d.get("c2", 0.0)))
    elif kind == "holder":
        obs = Holder.named(d["name"])
    else:
        raise ValueError(f"unknown observable kind {kind!r}")
    if "shift" in d:
        obs = Shifted(obs, float(d["shift"]))
    elif d.get("center"):
        if system is None:
            raise ValueError("centering needs the system")
        obs = centered(obs, system)
    return obs


def sample_invariant(system, rng):
    return system.sample_invariant(rng)


def step(system, point):
    return system.step(point)


def cell_of(system, point) -> int:
    return system.cell_of(point)


def gm_metric(system, x, y) -> float:
    return system.gm_metric(x, y)


def orbit_blocks(system, rng: np.random.Generator, n: int, block: int = 1 << 20, start=None):
    """Yield consecutive coordinate blocks of a single orbit of length n.

    Symbolic systems carry LOOKAHEAD symbols from one block into the next,
    so block boundaries only perturb coordinates below float resolution.
    """
    if isinstance(system, LsvMap):
        if start is None:
            state = np.array([rng.random()])
            _kernels.lsv_orbit(state, 0, system.alpha, system.burn_in)
        else:
            state = np.array([float(start)])
        done = 0
        while done < n:
            k = min(block, n - done)
            yield _kernels.lsv_orbit(state, k, system.alpha, 0)[0]
            done += k
        return
    if isinstance(system, IidUniform):
        done = 0
        while done < n:
            k = min(block, n - done)
            yield rng.random(k)
            done += k
        return
    # separate streams keep the orbit independent of the block size
    sym_rng, tail_rng = rng.spawn(2)
    carry = np.empty(0, dtype=np.int64)
    if start is not None:
        carry = np.asarray(start, dtype=np.int64)
    done = 0
    while done < n:
        k = min(block, n - done)
        fresh = system.draw(sym_rng, max(k + LOOKAHEAD - len(carry), 0))
        sym = np.concatenate([carry, fresh])[None, :]
        codes = system._code_backward(sym, tail_rng.random(1))[0]
        yield codes[:k]
        carry = sym[0, k:]
        done += k
