"""Stationary measures: Ulam discretization with power iteration, and
Hutchinson pushforward iteration for iterated function systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .grids import DiscreteMeasure, Grid, GridFunction, integrate, uniform_measure, wasserstein1
from .operators import apply_operator, cell_flow_matrix

__all__ = [
    "UlamMatrix",
    "StationaryResult",
    "AffineIFS",
    "build_ulam",
    "power_iterate",
    "verify_invariance",
    "hutchinson_matrix",
    "hutchinson_iterate",
    "contraction_certificate",
    "ContractionCertificate",
    "halving_ifs",
    "cantor_ifs",
    "measure_moments",
]


@dataclass(frozen=True)
class UlamMatrix:
    """Discretized action mu -> mu R: entries[i, j] is the mass sent from
    cell j to cell i.  Columns of a normalized operator sum to 1."""

    grid: Grid
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (self.grid.n, self.grid.n):
            raise ValueError("entries must be n x n for the grid")
        if np.any(e < -1e-14):
            raise ValueError("flow matrix has a negative entry")
        e = np.clip(e, 0.0, None).copy()
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def push(self, mu: DiscreteMeasure) -> np.ndarray:
        if mu.grid != self.grid:
            raise ValueError("measure grid mismatch")
        return self.entries @ mu.weights


@dataclass(frozen=True)
class StationaryResult:
    measure: DiscreteMeasure
    residual: float
    iterations: int
    converged: bool


def build_ulam(op, grid: Grid) -> UlamMatrix:
    """Column j = the operator's Markov kernel applied to cell j's mass,
    resolved onto target cells by exact interval overlap."""
    return UlamMatrix(grid=grid, entries=cell_flow_matrix(op, grid))


def power_iterate(m: UlamMatrix, tol: float = 1e-12, max_iters: int = 5000,
                  start: DiscreteMeasure | None = None) -> StationaryResult:
    """Iterate mu <- normalize(mu M) from the uniform start until the
    Wasserstein-1 step size drops below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = m.grid
    mu = start if start is not None else uniform_measure(grid)
    prev = mu
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        w = m.push(prev)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise ArithmeticError("power iteration diverged")
        cur = DiscreteMeasure(grid, w / total, normalized=True)
        if wasserstein1(cur, prev) <= tol:
            prev = cur
            converged = True
            break
        prev = cur
    pushed = m.push(prev)
    pushed_measure = DiscreteMeasure(grid, pushed / pushed.sum(), normalized=True)
    residual = wasserstein1(pushed_measure, prev)
    return StationaryResult(measure=prev, residual=residual,
                            iterations=iterations,
                            converged=converged and residual <= tol)


def verify_invariance(mu: DiscreteMeasure, op, test_fns: Sequence[GridFunction]) -> list:
    """Per test function, |int (Rf) dmu - int f dmu|."""
    out = []
    for f in test_fns:
        rf = apply_operator(op, f)
        out.append(abs(integrate(rf, mu) - integrate(f, mu)))
    return out


# ---------------------------------------------------------------------------
# iterated function systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineIFS:
    """Affine maps x -> slope_j x + shift_j with constant probabilities."""

    grid: Grid
    slopes: np.ndarray
    shifts: np.ndarray
    probs: np.ndarray
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.slopes, dtype=float)
        t = np.asarray(self.shifts, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if not (s.shape == t.shape == p.shape):
            raise ValueError("slopes, shifts, probs must align")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        for arr, key in ((s, "slopes"), (t, "shifts"), (p, "probs")):
            a = arr.copy()
            a.flags.writeable = False
            object.__setattr__(self, key, a)

    @property
    def alpha_bound(self) -> float:
        """sum_j p_j Lip(F_j), the Hutchinson contraction bound."""
        return float(np.dot(self.probs, np.abs(self.slopes)))

    def apply_map(self, j: int, x):
        return self.slopes[j] * np.asarray(x, dtype=float) + self.shifts[j]


def halving_ifs(grid: Grid) -> AffineIFS:
    return AffineIFS(grid, slopes=np.array([0.5, 0.5]), shifts=np.array([0.0, 0.5]),
                     probs=np.array([0.5, 0.5]), name="halving")


def cantor_ifs(grid: Grid) -> AffineIFS:
    return AffineIFS(grid, slopes=np.array([1 / 3, 1 / 3]), shifts=np.array([0.0, 2 / 3]),
                     probs=np.array([0.5, 0.5]), name="cantor")


def single_map_ifs(grid: Grid, slope: float, shift: float = 0.0) -> AffineIFS:
    return AffineIFS(grid, slopes=np.array([slope]), shifts=np.array([shift]),
                     probs=np.array([1.0]), name="single")


def hutchinson_matrix(ifs: AffineIFS) -> np.ndarray:
    """Pushforward matrix: cell mass flows along each affine map by exact
    interval overlap, weighted by the map probabilities."""
    grid = ifs.grid
    n, dx, lo = grid.n, grid.dx, grid.lower
    M = np.zeros((n, n))
    for j in range(len(ifs.probs)):
        a = ifs.apply_map(j, grid.edges[:-1])
        b = ifs.apply_map(j, grid.edges[1:])
        aa, bb = np.minimum(a, b), np.maximum(a, b)
        width = np.maximum(bb - aa, 1e-300)
        k0 = np.floor((aa - lo) / dx).astype(int)
        k1 = np.floor((bb - lo) / dx - 1e-15).astype(int)
        k1 = np.maximum(k1, k0)
        for s in range(int(np.max(k1 - k0)) + 1):
            k = k0 + s
            left = lo + k * dx
            overlap = np.clip(np.minimum(bb, left + dx) - np.maximum(aa, left), 0.0, None)
            tgt = np.clip(k, 0, n - 1)
            np.add.at(M, (tgt, np.arange(n)), ifs.probs[j] * overlap / width)
    return M


def hutchinson_iterate(ifs: AffineIFS, mu0: DiscreteMeasure, iters: int) -> StationaryResult:
    """Repeated pushforward mu <- sum_j p_j mu o F_j^{-1}.

    Raises if the Wasserstein distance between successive iterates ever
    expands; the contractive case decays geometrically.
    """
    if mu0.grid != ifs.grid:
        raise ValueError("start measure not on the IFS grid")
    M = hutchinson_matrix(ifs)
    mu = mu0
    last_step = np.inf
    for it in range(1, iters + 1):
        w = M @ mu.weights
        nxt = DiscreteMeasure(ifs.grid, w / w.sum(), normalized=True)
        step = wasserstein1(nxt, mu)
        if step > last_step * (1.0 + 1e-9) and step > 4.0 / ifs.grid.n:
            raise ArithmeticError(
                f"pushforward expanding at iteration {it}: {last_step:.3e} -> {step:.3e}"
            )
        last_step = step
        mu = nxt
    w = M @ mu.weights
    pushed = DiscreteMeasure(ifs.grid, w / w.sum(), normalized=True)
    return StationaryResult(measure=mu, residual=wasserstein1(pushed, mu),
                            iterations=iters, converged=last_step <= 4.0 / ifs.grid.n)


class ContractionCertificate(NamedTuple):
    ratio: float
    alpha_bound: float


def contraction_certificate(ifs: AffineIFS, mu: DiscreteMeasure,
                            nu: DiscreteMeasure) -> ContractionCertificate:
    """Observed one-step contraction ratio of the pushforward against the
    Lipschitz bound sum_j p_j |slope_j|."""
    base = wasserstein1(mu, nu)
    if base == 0.0:
        raise ValueError("mu and nu must differ")
    M = hutchinson_matrix(ifs)
    pm = DiscreteMeasure(ifs.grid, (M @ mu.weights), normalized=False).normalize()
    pn = DiscreteMeasure(ifs.grid, (M @ nu.weights), normalized=False).normalize()
    return ContractionCertificate(ratio=wasserstein1(pm, pn) / base,
                                  alpha_bound=ifs.alpha_bound)


def measure_moments(mu: DiscreteMeasure) -> tuple:
    """(mean, variance) of a grid measure, nodes weighted by cell masses."""
    x = mu.grid.nodes
    mean = float(np.dot(x, mu.weights))
    var = float(np.dot((x - mean) ** 2, mu.weights))
    return mean, var
