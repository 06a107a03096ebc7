"""Uniform grids, grid functions, discrete measures and distances.

This is the numerical substrate shared by every other module: real-valued
functions sampled at cell midpoints of a uniform grid over an interval or a
circle, nonnegative cell weights standing in for measures, and the handful of
metrics (Wasserstein-1, Kolmogorov-Smirnov) used to compare them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "DiscreteMeasure",
    "EmpiricalSample",
    "GridMismatchError",
    "integrate",
    "wasserstein1",
    "histogram",
    "ks_distance",
    "char_function_bernoulli",
    "CharFunctionResult",
    "stream_rng",
    "uniform_measure",
    "arcsine_measure",
    "gauss_measure",
    "measure_from_cdf",
    "arcsine_cdf",
    "gauss_cdf",
    "sample_measure",
    "quantiles",
    "ks_two_sample",
    "arcsine_ppf",
    "gauss_ppf",
    "uniform_ppf",
]


class GridMismatchError(ValueError):
    """Raised when two objects live on incompatible discretizations."""


def _readonly(a) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` cells over ``[lower, upper]``.

    Nodes sit at cell midpoints ``lower + (i + 1/2) * width / n``.  For
    ``circle`` domains the coordinate is taken modulo the period
    ``upper - lower``.
    """

    lower: float
    upper: float
    n: int
    domain_kind: str = "interval"  # "interval" | "circle"

    def __post_init__(self):
        if self.domain_kind not in ("interval", "circle"):
            raise ValueError(f"unknown domain_kind {self.domain_kind!r}")
        if not self.lower < self.upper:
            raise ValueError("grid requires lower < upper")
        if self.n < 2:
            raise ValueError("grid requires n >= 2 cells")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def dx(self) -> float:
        return self.width / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.lower + (np.arange(self.n) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.lower + np.arange(self.n + 1) * self.dx

    def wrap(self, x):
        """Reduce coordinates into the domain (mod period on circles)."""
        x = np.asarray(x, dtype=float)
        if self.domain_kind == "circle":
            return self.lower + np.mod(x - self.lower, self.width)
        return x

    def cell_index(self, x) -> np.ndarray:
        """Index of the cell containing x (circle points wrapped first)."""
        x = self.wrap(x)
        idx = np.floor((x - self.lower) / self.dx).astype(int)
        return np.clip(idx, 0, self.n - 1)

    def contains(self, x) -> bool:
        if self.domain_kind == "circle":
            return True
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


@dataclass(frozen=True)
class GridFunction:
    """Real function known at the midpoints of a grid.

    Off-node evaluation is linear interpolation between midpoints; circle
    functions wrap around.  In the half-cell strips at interval ends the
    boundary segment is extended linearly and the result clamped into the
    signed envelope of the data (so nonnegative data never evaluates
    negative, which positivity of the transfer operators relies on).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError("values must have one entry per grid cell")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.n, float(value)))

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        g, v = self.grid, self.values
        if g.domain_kind == "circle":
            # reduce into the period before the half-cell shift so that
            # exactly representable translates by the period evaluate
            # bit-identically
            t = np.mod(x - g.lower, g.width) / g.dx - 0.5
            i0 = np.floor(t).astype(int)
            frac = t - i0
            out = v[i0 % g.n] * (1 - frac) + v[(i0 + 1) % g.n] * frac
        else:
            nodes = g.nodes
            t = (x - nodes[0]) / g.dx
            i0 = np.clip(np.floor(t).astype(int), 0, g.n - 2)
            frac = t - i0  # <0 / >1 in the end strips: linear extension
            out = v[i0] * (1 - frac) + v[i0 + 1] * frac
            # sign-preserving floor/cap: nonnegative data never evaluates
            # negative (and symmetrically), which operator positivity needs
            if v.min() >= 0.0:
                out = np.maximum(out, 0.0)
            elif v.max() <= 0.0:
                out = np.minimum(out, 0.0)
        return float(out[0]) if scalar else out

    # pointwise algebra (same grid)
    def _binop(self, other, op):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError("grid functions on different grids")
            return GridFunction(self.grid, op(self.values, other.values))
        return GridFunction(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binop(other, np.add)

    def __sub__(self, other):
        return self._binop(other, np.subtract)

    def __mul__(self, other):
        return self._binop(other, np.multiply)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative weights on grid cells; ``normalized`` means they sum to 1."""

    grid: Grid
    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = _readonly(self.weights)
        if w.shape != (self.grid.n,):
            raise ValueError("weights must have one entry per grid cell")
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(
                f"normalized measure weights sum to {w.sum()!r}, not 1"
            )
        object.__setattr__(self, "weights", w)

    @property
    def density(self) -> np.ndarray:
        """Density view: weight / cell width."""
        return self.weights / self.grid.dx

    @property
    def cdf_at_edges(self) -> np.ndarray:
        """Cumulative mass at the n+1 cell edges (exact for cell measures)."""
        return np.concatenate(([0.0], np.cumsum(self.weights)))

    def normalize(self) -> "DiscreteMeasure":
        s = self.weights.sum()
        if s <= 0:
            raise ValueError("cannot normalize a zero measure")
        return DiscreteMeasure(self.grid, self.weights / s, normalized=True)


@dataclass(frozen=True)
class EmpiricalSample:
    """Points in the grid domain plus the seeding metadata that produced them."""

    points: np.ndarray
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = _readonly(self.points)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def stream_rng(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Generator for stream ``stream_id`` derived from ``master_seed``.

    Uses the splittable SeedSequence construction, so streams are
    reproducible and independent of thread scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def integrate(f: GridFunction, mu: DiscreteMeasure) -> float:
    """Integral of ``f`` against ``mu``: sum of node values times cell weights."""
    if f.grid != mu.grid:
        raise GridMismatchError("function and measure use incompatible discretizations")
    return float(np.dot(f.values, mu.weights))


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Wasserstein-1 distance of two normalized measures on a shared grid.

    On the line this is the L1 distance of CDFs, computed here as
    ``dx * sum_i |cumsum(mu)_i - cumsum(nu)_i|``.  For circle grids the same
    formula is used (an upper bound for the rotational transport distance).
    """
    if mu.grid != nu.grid:
        raise GridMismatchError("measures on different grids")
    if not (mu.normalized and nu.normalized):
        raise ValueError("wasserstein1 requires normalized measures")
    diff = np.cumsum(mu.weights) - np.cumsum(nu.weights)
    return float(mu.grid.dx * np.abs(diff).sum())


def histogram(s: EmpiricalSample, grid: Grid) -> DiscreteMeasure:
    """Normalized bin counts of a sample on a grid."""
    if s.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if not grid.contains(s.points):
        raise ValueError("sample points outside the grid domain")
    idx = grid.cell_index(s.points)
    counts = np.bincount(idx, minlength=grid.n).astype(float)
    return DiscreteMeasure(grid, counts / counts.sum(), normalized=True)


def ks_distance(s: EmpiricalSample, mu: DiscreteMeasure) -> float:
    """Kolmogorov-Smirnov distance between a sample and a grid measure.

    Sup over grid nodes of |empirical CDF - model CDF|, the model CDF at a
    midpoint counting half of that cell's weight (mass uniform within cells).
    """
    grid = mu.grid
    if not grid.contains(s.points):
        raise GridMismatchError("sample outside the measure's domain")
    pts = np.sort(grid.wrap(s.points))
    nodes = grid.nodes
    emp = np.searchsorted(pts, nodes, side="right") / pts.size
    model = np.cumsum(mu.weights) - 0.5 * mu.weights
    return float(np.max(np.abs(emp - model)))


class CharFunctionResult(NamedTuple):
    value: float
    tail_bound: float


def char_function_bernoulli(a: float, t: float, K: int) -> CharFunctionResult:
    """Truncated characteristic function of the random series sum_k w_k a^k.

    Returns ``prod_{k=1..K} cos(a^k t)`` together with the bound
    ``sum_{k>K} (a^k t)^2 / 2`` on the log of the truncation error.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    if K < 1:
        raise ValueError("K must be >= 1")
    powers = a ** np.arange(1, K + 1)
    value = float(np.prod(np.cos(powers * t)))
    tail = (t * a ** (K + 1)) ** 2 / (2 * (1 - a * a))
    return CharFunctionResult(value, float(tail))


# ---------------------------------------------------------------------------
# built-in reference measures (cell-averaged from exact CDFs)
# ---------------------------------------------------------------------------

def measure_from_cdf(grid: Grid, cdf: Callable) -> DiscreteMeasure:
    """Cell weights from an exact CDF: weight_i = F(edge_{i+1}) - F(edge_i).

    Stores cell-averaged mass rather than pointwise density samples, which
    keeps integrable singularities (arcsine endpoints, Gauss at 0) finite.
    """
    F = np.asarray(cdf(grid.edges), dtype=float)
    w = np.diff(F)
    w = np.clip(w, 0.0, None)
    return DiscreteMeasure(grid, w / w.sum(), normalized=True)


def arcsine_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return (2.0 / np.pi) * np.arcsin(np.sqrt(x))


def gauss_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return np.log2(1.0 + x)


def uniform_measure(grid: Grid) -> DiscreteMeasure:
    return DiscreteMeasure(grid, np.full(grid.n, 1.0 / grid.n), normalized=True)


def arcsine_measure(grid: Grid) -> DiscreteMeasure:
    """Beta(1/2,1/2) law on [0,1]; CDF (2/pi) arcsin sqrt(x)."""
    return measure_from_cdf(grid, arcsine_cdf)


def gauss_measure(grid: Grid) -> DiscreteMeasure:
    """Gauss (continued-fraction) law on [0,1]; CDF log2(1+x)."""
    return measure_from_cdf(grid, gauss_cdf)


def sample_measure(
    mu: DiscreteMeasure, n: int, master_seed: int, stream_id: int = 0
) -> EmpiricalSample:
    """Inverse-CDF sample from a grid measure (uniform within each cell)."""
    rng = stream_rng(master_seed, stream_id)
    u = rng.random(n)
    pts = _inverse_cdf(mu, u)
    return EmpiricalSample(
        pts, seed_info={"master_seed": master_seed, "stream_id": stream_id}
    )


def quantiles(mu: DiscreteMeasure, m: int) -> np.ndarray:
    """The m mid-quantiles of a grid measure (levels (i+1/2)/m)."""
    u = (np.arange(m) + 0.5) / m
    return _inverse_cdf(mu, u)


def _inverse_cdf(mu: DiscreteMeasure, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(mu.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, u, side="left")
    idx = np.clip(idx, 0, mu.grid.n - 1)
    prev = np.where(idx > 0, cdf[idx - 1], 0.0)
    cell_mass = np.maximum(cdf[idx] - prev, 1e-300)
    frac = (u - prev) / cell_mass
    return mu.grid.lower + (idx + np.clip(frac, 0.0, 1.0)) * mu.grid.dx


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    both = np.concatenate((a, b))
    ca = np.searchsorted(a, both, side="right") / a.size
    cb = np.searchsorted(b, both, side="right") / b.size
    return float(np.max(np.abs(ca - cb)))


# exact inverse CDFs of the built-in laws (grid-free sampling)

def arcsine_ppf(u):
    return np.sin(0.5 * np.pi * np.asarray(u, dtype=float)) ** 2


def gauss_ppf(u):
    return np.exp2(np.asarray(u, dtype=float)) - 1.0


def uniform_ppf(u):
    return np.asarray(u, dtype=float)
