"""Slowly varying functions and renormalizing sequences B(n) = n^d L(n)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

BRACKET_CAP = 1e30


class NoBracket(ValueError):
    """No sign change of n L(x) - x^p on [1, BRACKET_CAP]."""


@dataclass(frozen=True)
class SlowVar:
    """A slowly varying function from a closed family.

    ``kind`` is one of ``"constant"``, ``"log_power"`` or ``"table"``.

    * constant: L(x) = value
    * log_power: L(x) = log(x)**exponent for x >= e, and 1 below e (keeps L
      positive and continuous on (0, inf))
    * table: log L interpolated linearly in log x, held constant outside
      the grid. Normalization (L'(x) = o(L(x)/x)) is the caller's problem.
    """

    kind: str = "constant"
    value: float = 1.0
    exponent: float = 0.0
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    _log_grid: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind == "constant":
            if not self.value > 0:
                raise ValueError("constant slow part must be positive")
        elif self.kind == "log_power":
            pass
        elif self.kind == "table":
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or len(g) < 2 or len(g) != len(v):
                raise ValueError("table needs matching grid/values of length >= 2")
            if np.any(g <= 0) or np.any(np.diff(g) <= 0):
                raise ValueError("table grid must be increasing and positive")
            if np.any(v <= 0):
                raise ValueError("table values must be positive")
            object.__setattr__(self, "_log_grid", np.log(g))
        else:
            raise ValueError(f"unknown slow-variation kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float = 1.0) -> SlowVar:
        return cls("constant", value=float(value))

    @classmethod
    def log_power(cls, exponent: float) -> SlowVar:
        return cls("log_power", exponent=float(exponent))

    @classmethod
    def table(cls, grid, values) -> SlowVar:
        return cls("table", grid=tuple(map(float, grid)), values=tuple(map(float, values)))

    def log_eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, math.log(self.value))
        if self.kind == "log_power":
            lx = np.log(np.maximum(x, math.e))
            return self.exponent * np.log(lx)
        return np.interp(np.log(x), self._log_grid, np.log(self.values))

    def __call__(self, x):
        out = np.exp(self.log_eval(x))
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "params": {"value": self.value}}
        if self.kind == "log_power":
            return {"kind": "log_power", "params": {"exponent": self.exponent}}
        return {"kind": "table", "params": {"grid": list(self.grid), "values": list(self.values)}}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SlowVar:
        kind = d["kind"]
        params = d.get("params", {})
        if kind == "constant":
            return cls.constant(params.get("value", 1.0))
        if kind == "log_power":
            return cls.log_power(params["exponent"])
        if kind == "table":
            return cls.table(params["grid"], params["values"])
        raise ValueError(f"unknown slow-variation kind {kind!r}")


@dataclass(frozen=True)
class RenormSeq:
    """B(x) = x**d * L(x); calling it on n gives B_n."""

    d: float
    slow: SlowVar = SlowVar()

    def __post_init__(self) -> None:
        if not self.d > 0:
            raise ValueError("exponent d must be positive")

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        out = np.exp(self.d * np.log(n) + self.slow.log_eval(n))
        return float(out) if out.ndim == 0 else out

    def monotone_from(self, n_max: float = 1e9, points: int = 2000) -> float:
        """Smallest grid point N0 past which B is nondecreasing on a log grid up to n_max."""
        grid = np.unique(np.round(np.geomspace(1, n_max, points)))
        while True:
            bad = np.nonzero(np.diff(self(grid)) < 0)[0]
            if not len(bad):
                return float(grid[0])
            j = bad[-1]
            # the last descent can end anywhere in (grid[j], grid[j+2]); refine there
            lo, hi = grid[j], grid[min(j + 2, len(grid) - 1)]
            if hi - lo <= 2:
                return float(grid[j + 1])
            grid = np.unique(np.concatenate([np.round(np.geomspace(lo, hi, 200)), grid[grid > hi]]))

    def to_dict(self) -> dict[str, Any]:
        return {"d": self.d, "L": self.slow.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RenormSeq:
        slow = SlowVar.from_dict(d["L"]) if "L" in d else SlowVar()
        return cls(float(d["d"]), slow)


def sqrt_seq() -> RenormSeq:
    return RenormSeq(0.5)


def solve_bn(p: float, slow: SlowVar, n: float) -> float:
    """Solve n L(x) = x**p for x, on the monotone tail of the log residual.

    For L == 1 this is n**(1/p) up to solver tolerance.
    """
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    log_n = math.log(n)

    def resid(log_x: float) -> float:
        return log_n + float(slow.log_eval(math.exp(log_x))) - p * log_x

    # scan for the last + to - sign change: the root on the tail
    grid = np.linspace(0.0, math.log(BRACKET_CAP), 400)
    vals = np.array([resid(g) for g in grid])
    change = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if vals[0] == 0:
        return 1.0
    if len(change) == 0:
        raise NoBracket(f"no sign change for p={p}, n={n} on [1, {BRACKET_CAP:g}]")
    i = change[-1]
    root = brentq(resid, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(root)


def bn_residual(p: float, slow: SlowVar, n: float, x: float) -> float:
    return abs(n * slow(x) / x**p - 1.0)
