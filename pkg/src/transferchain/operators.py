"""Concrete transfer-operator forms and their action on grid functions.

Four operator shapes are supported: branch-weighted sums over inverse
branches of an endomorphism, integral operators driven by a control
distribution, the weighted Ruelle operator of a circle filter, and the
Gauss (continued fraction) operator.  A shared cell-flow construction
turns any of them into the column-stochastic matrix used by the invariant
measure module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .grids import DiscreteMeasure, Grid, GridFunction, GridMismatchError
from .wavelets import HarmonicSequence, WaveletFilter

__all__ = [
    "BranchSystem",
    "ControlledSystem",
    "CircleFilterOperator",
    "GaussOperator",
    "RadonNikodymWeight",
    "BranchEscapeError",
    "apply_branch",
    "apply_integral",
    "apply_ruelle_circle",
    "apply_ruelle_adjoint",
    "apply_gauss",
    "apply_gauss_at",
    "apply_operator",
    "pullout_check",
    "radon_nikodym",
    "cell_flow_matrix",
    "logistic_system",
    "doubling_system",
    "parametric_system",
    "parametric_weight",
    "random_control_system",
    "gauss_operator",
    "gauss_kernel_probs",
    "bernoulli_system",
    "circle_filter_system",
    "circle_trig_coeffs",
    "circle_trig_eval",
    "circle_upsample",
]


class BranchEscapeError(ValueError):
    """A branch image left the grid domain by more than round-off."""


# ---------------------------------------------------------------------------
# operator types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchSystem:
    """Endomorphism sigma with inverse branches tau_i and weights p_i(x).

    Defines (Rf)(x) = sum_i p_i(x) f(tau_i(x)).  Branch maps and weights are
    vectorized callables.  ``normalized`` asserts sum_i p_i(x) = 1 at nodes.
    """

    grid: Grid
    sigma: Callable
    branches: Sequence[Callable]
    weights: Sequence[Callable]
    normalized: bool = True
    name: str = ""

    def __post_init__(self):
        if len(self.branches) != len(self.weights):
            raise ValueError("need one weight function per branch")
        x = self.grid.nodes
        for i, tau in enumerate(self.branches):
            image = self.sigma(np.asarray(tau(x), dtype=float))
            err = self._circle_dist(image, x)
            if np.max(err) > 1e-10:
                raise ValueError(
                    f"branch {i} is not a right inverse of sigma "
                    f"(max |sigma(tau(x)) - x| = {np.max(err):.2e})"
                )
        if self.normalized:
            total = self.weight_matrix(x).sum(axis=0)
            if np.max(np.abs(total - 1.0)) > 1e-12:
                raise ValueError("branch weights do not sum to 1 at the nodes")

    def _circle_dist(self, a, b):
        d = np.abs(np.asarray(a) - np.asarray(b))
        if self.grid.domain_kind == "circle":
            d = np.minimum(d, self.grid.width - d)
        return d

    def weight_matrix(self, x) -> np.ndarray:
        """Stacked branch weights, shape (n_branches, len(x))."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(p(x), dtype=float), x.shape)
                         for p in self.weights])

    def branch_values(self, x, check: bool = True) -> np.ndarray:
        """Stacked branch images tau_i(x), clamped/validated against the domain."""
        x = np.asarray(x, dtype=float)
        g = self.grid
        out = np.empty((len(self.branches), x.size))
        for i, tau in enumerate(self.branches):
            y = np.asarray(tau(x), dtype=float)
            if g.domain_kind == "circle":
                y = g.wrap(y)
            else:
                low, high = y < g.lower, y > g.upper
                if check and (np.any(y < g.lower - 1e-12) or np.any(y > g.upper + 1e-12)):
                    j = int(np.argmax((y < g.lower - 1e-12) | (y > g.upper + 1e-12)))
                    raise BranchEscapeError(
                        f"branch {i} escapes the domain at node {j}: "
                        f"tau({x.flat[j]!r}) = {y.flat[j]!r}"
                    )
                y = np.where(low, g.lower, np.where(high, g.upper, y))
            out[i] = y
        return out


@dataclass(frozen=True)
class ControlledSystem:
    """Integral operator (Rf)(x) = int_Y f(F(x,y)) dnu(y).

    The control space Y is a finite branch set (probabilities ``branch_probs``)
    optionally crossed with the unit interval, quadratured by ``u_nodes`` /
    ``u_weights``.  ``F(x, i, u)`` must be vectorized in x and u.
    """

    grid: Grid
    F: Callable
    branch_probs: np.ndarray
    u_nodes: Optional[np.ndarray] = None
    u_weights: Optional[np.ndarray] = None
    transition_cdf: Optional[Callable] = None  # (x, t) -> P(F(x, Y) <= t)
    name: str = ""

    def __post_init__(self):
        p = np.asarray(self.branch_probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("branch probabilities must be a distribution")
        object.__setattr__(self, "branch_probs", p)
        if (self.u_nodes is None) != (self.u_weights is None):
            raise ValueError("u_nodes and u_weights must come together")
        if self.u_weights is not None:
            w = np.asarray(self.u_weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("control quadrature weights must sum to 1")


@dataclass(frozen=True)
class CircleFilterOperator:
    """Weighted Ruelle operator (Rf)(t) = (1/N) sum_k (|m0|^2 f)((t+k)/N)."""

    N: int
    filt: WaveletFilter
    name: str = ""

    def __post_init__(self):
        if self.N != self.filt.N:
            raise ValueError("operator branching must match the filter's")

    @property
    def is_normalized(self) -> bool:
        return self.filt.is_normalized


@dataclass(frozen=True)
class GaussOperator:
    """Gauss operator (Rf)(x) = sum_{n>=1} (n+x)^-2 f(1/(n+x)), truncated.

    ``truncation_K`` branches are summed; with ``tail_mode='integral'`` the
    remainder is estimated as f(0+) / (K + x + 1/2), using that the tail of
    sum (n+x)^-2 matches the midpoint integral to O(K^-3).
    """

    truncation_K: int = 10_000
    tail_mode: str = "integral"  # "integral" | "ignore"
    name: str = "gauss"

    def __post_init__(self):
        if self.truncation_K < 2:
            raise ValueError("need at least 2 Gauss branches")
        if self.tail_mode not in ("integral", "ignore"):
            raise ValueError(f"unknown tail_mode {self.tail_mode!r}")

    @staticmethod
    def sigma(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / x - np.floor(1.0 / x)

    @staticmethod
    def density(x):
        """The invariant density 1 / (ln 2 (1+x))."""
        return 1.0 / (np.log(2.0) * (1.0 + np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class RadonNikodymWeight:
    """W = d(lambda R)/d lambda on the grid, optionally with an exact callable."""

    W: GridFunction
    exact_fn: Optional[Callable] = None

    def eval(self, x):
        if self.exact_fn is not None:
            return np.asarray(self.exact_fn(np.asarray(x, dtype=float)), dtype=float)
        return self.W.eval(x)


# ---------------------------------------------------------------------------
# trigonometric helpers for circle grids (midpoint sampling)
# ---------------------------------------------------------------------------

def circle_trig_coeffs(values: np.ndarray) -> np.ndarray:
    """Complex Fourier coefficients c_0..c_{n//2} of midpoint samples.

    Exact for trigonometric polynomials of degree < n/2; the half-step
    phase accounts for the midpoint node convention.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    V = np.fft.rfft(v)
    m = np.arange(V.size)
    return V * np.exp(-1j * np.pi * m / n) / n


def circle_trig_eval(coeffs: np.ndarray, t) -> np.ndarray:
    """Evaluate sum_m c_m e^{2 pi i m t} + c.c. at arbitrary angles."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = np.arange(1, coeffs.size)
    phases = np.exp(2j * np.pi * np.outer(t, m))
    out = coeffs[0].real + 2.0 * (phases @ coeffs[1:]).real
    return out


def circle_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Resample midpoint values onto the factor-times-finer midpoint grid.

    Uses zero-padded FFT synthesis; exact for band-limited data.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    c = circle_trig_coeffs(v)
    if n % 2 == 0:  # split the Nyquist bin symmetrically
        c = c.copy()
        c[-1] *= 0.5
    nf = n * factor
    spec = np.zeros(nf, dtype=complex)
    m = np.arange(c.size)
    phase = np.exp(1j * np.pi * m / nf)
    spec[: c.size] = c * phase
    spec[-(c.size - 1):] = np.conj((c * phase)[1:])[::-1]
    return np.fft.ifft(spec).real * nf


# ---------------------------------------------------------------------------
# operator application
# ---------------------------------------------------------------------------

def apply_branch(bs: BranchSystem, f: GridFunction) -> GridFunction:
    """(Rf)(x_j) = sum_i p_i(x_j) f(tau_i(x_j)) at every node."""
    if f.grid != bs.grid:
        raise GridMismatchError("function not on the system grid")
    x = bs.grid.nodes
    taus = bs.branch_values(x)
    probs = bs.weight_matrix(x)
    vals = np.zeros(bs.grid.n)
    for i in range(len(bs.branches)):
        vals += probs[i] * f.eval(taus[i])
    return GridFunction(bs.grid, vals)


def apply_integral(cs: ControlledSystem, f: GridFunction) -> GridFunction:
    """Quadrature of f(F(x, .)) over the control space at every node."""
    if f.grid != cs.grid:
        raise GridMismatchError("function not on the system grid")
    x = cs.grid.nodes
    vals = np.zeros(cs.grid.n)
    for i, p_i in enumerate(cs.branch_probs):
        if p_i == 0.0:
            continue
        if cs.u_nodes is None:
            vals += p_i * f.eval(np.asarray(cs.F(x, i, None), dtype=float))
        else:
            for u, w in zip(cs.u_nodes, cs.u_weights):
                vals += p_i * w * f.eval(np.asarray(cs.F(x, i, u), dtype=float))
    return GridFunction(cs.grid, vals)


def apply_ruelle_circle(op: CircleFilterOperator, f: GridFunction) -> GridFunction:
    """(Rf)(t) = (1/N) sum_k |m0((t+k)/N)|^2 f((t+k)/N) on the same grid.

    The preimages of the n midpoints are exactly the midpoints of the
    N*n-fine grid, so f is lifted there by trigonometric resampling and
    |m0|^2 is evaluated exactly from the filter autocorrelation.
    """
    g = f.grid
    if g.domain_kind != "circle":
        raise GridMismatchError("Ruelle circle operator needs a circle grid")
    if g.n % op.N:
        raise GridMismatchError(f"grid size {g.n} not divisible by N = {op.N}")
    n, N = g.n, op.N
    fine = Grid(g.lower, g.upper, n * N, "circle")
    f_fine = circle_upsample(f.values, N)
    w_fine = op.filt.m0_sq((fine.nodes - g.lower) / g.width)
    prod = w_fine * f_fine
    vals = np.zeros(n)
    for k in range(N):
        vals += prod[k * n : (k + 1) * n]
    return GridFunction(g, vals / N)


def apply_ruelle_adjoint(op: CircleFilterOperator, f: GridFunction) -> GridFunction:
    """(R* f)(t) = |m0(t)|^2 f(N t mod 1), f composed by exact trig synthesis."""
    g = f.grid
    if g.domain_kind != "circle":
        raise GridMismatchError("adjoint Ruelle operator needs a circle grid")
    t = (g.nodes - g.lower) / g.width
    c = circle_trig_coeffs(f.values)
    f_comp = circle_trig_eval(c, np.mod(op.N * t, 1.0))
    return GridFunction(g, op.filt.m0_sq(t) * f_comp)


def apply_gauss(op: GaussOperator, f: GridFunction) -> GridFunction:
    if f.grid.domain_kind != "interval":
        raise GridMismatchError("Gauss operator lives on an interval grid")
    return GridFunction(f.grid, apply_gauss_at(op, f, f.grid.nodes))


def apply_gauss_at(op: GaussOperator, f: GridFunction, x, chunk: int = 4096) -> np.ndarray:
    """Truncated branch sum sum_{n<=K} (n+x)^-2 f(1/(n+x)) (+ tail estimate)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(x.size)
    K = op.truncation_K
    for start in range(1, K + 1, chunk):
        ns = np.arange(start, min(start + chunk, K + 1), dtype=float)[:, None]
        denom = ns + x[None, :]
        out += np.sum(f.eval((1.0 / denom).ravel()).reshape(denom.shape) / denom**2, axis=0)
    if op.tail_mode == "integral":
        f_origin = float(f.values[0])  # f(0+) under the boundary-cell extension
        out += f_origin / (K + x + 0.5)
    return out


def apply_operator(op, f: GridFunction) -> GridFunction:
    """Dispatch R f for any operator form."""
    if isinstance(op, BranchSystem):
        return apply_branch(op, f)
    if isinstance(op, ControlledSystem):
        return apply_integral(op, f)
    if isinstance(op, CircleFilterOperator):
        return apply_ruelle_circle(op, f)
    if isinstance(op, GaussOperator):
        return apply_gauss(op, f)
    raise TypeError(f"not a transfer operator: {type(op).__name__}")


def pullout_check(bs: BranchSystem, f: GridFunction, g: GridFunction) -> float:
    """Max node residual of R((f o sigma) g) - f R(g)."""
    x = bs.grid.nodes
    comp = GridFunction(bs.grid, f.eval(bs.grid.wrap(bs.sigma(x))) * g.values)
    lhs = apply_branch(bs, comp).values
    rhs = f.values * apply_branch(bs, g).values
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# cell flow (mass transport of mu -> mu R) and Radon-Nikodym weights
# ---------------------------------------------------------------------------

def _spread_interval(M, col_weights, a, b, grid: Grid):
    """Distribute col_weights[j] from source cell j over target cells
    covering [a_j, b_j], proportionally to overlap.  Exact for affine
    branch images; circle targets wrap."""
    n, dx, lo = grid.n, grid.dx, grid.lower
    a = np.minimum(a, b)
    b = np.maximum(a, b)
    width = b - a
    tiny = width <= 1e-15 * grid.width
    if np.any(tiny):
        mids = grid.cell_index(0.5 * (a + b))
        np.add.at(M, (mids[tiny], np.nonzero(tiny)[0]), col_weights[tiny])
    live = ~tiny
    if not np.any(live):
        return
    j_idx = np.nonzero(live)[0]
    a, b, w, width = a[live], b[live], col_weights[live], width[live]
    k0 = np.floor((a - lo) / dx).astype(int)
    k1 = np.floor((b - lo) / dx - 1e-15).astype(int)
    span = int(np.max(k1 - k0)) + 1
    for s in range(span):
        k = k0 + s
        left = lo + k * dx
        overlap = np.minimum(b, left + dx) - np.maximum(a, left)
        frac = np.clip(overlap, 0.0, None) / width
        if grid.domain_kind == "circle":
            k_t = np.mod(k, n)
        else:
            k_t = np.clip(k, 0, n - 1)
        nz = frac > 0
        if np.any(nz):
            np.add.at(M, (k_t[nz], j_idx[nz]), w[nz] * frac[nz])


def cell_flow_matrix(op, grid: Grid, raw: bool = False) -> np.ndarray:
    """Matrix M with M[i, j] = mass sent from cell j to cell i by one step
    of the operator's Markov kernel (column-stochastic when normalized).

    Branch images of each source cell are spread over target cells by exact
    interval overlap.  The Gauss operator uses its density-normalized
    kernel with the truncation deficit left in place; ``raw=True`` switches
    to the plain (n+x)^-2 weights, whose dual fixes Lebesgue measure.
    """
    n = grid.n
    M = np.zeros((n, n))
    edges_l = grid.edges[:-1]
    edges_r = grid.edges[1:]
    mids = grid.nodes
    if isinstance(op, BranchSystem):
        if op.grid != grid:
            raise GridMismatchError("operator grid differs from requested grid")
        probs = op.weight_matrix(mids)
        for i, tau in enumerate(op.branches):
            a = np.asarray(tau(edges_l), dtype=float)
            b = np.asarray(tau(edges_r), dtype=float)
            if grid.domain_kind == "circle":
                # place the image interval continuously, wrap targets
                base = grid.wrap(a)
                b = base + (b - a)
                a = base
            _spread_interval(M, probs[i], a, b, grid)
    elif isinstance(op, ControlledSystem):
        if op.grid != grid:
            raise GridMismatchError("operator grid differs from requested grid")
        if op.transition_cdf is not None:
            cdf_vals = np.stack([
                np.asarray(op.transition_cdf(mids, t), dtype=float) for t in grid.edges
            ])
            M = np.diff(cdf_vals, axis=0)
        else:
            for i, p_i in enumerate(op.branch_probs):
                if p_i == 0.0:
                    continue
                if op.u_nodes is None:
                    y = np.asarray(op.F(mids, i, None), dtype=float)
                    np.add.at(M, (grid.cell_index(y), np.arange(n)), p_i)
                else:
                    for u, w in zip(op.u_nodes, op.u_weights):
                        y = np.asarray(op.F(mids, i, u), dtype=float)
                        np.add.at(M, (grid.cell_index(y), np.arange(n)), p_i * w)
    elif isinstance(op, CircleFilterOperator):
        if grid.domain_kind != "circle" or grid.n % op.N:
            raise GridMismatchError("need a circle grid with size divisible by N")
        N = op.N
        t = (mids - grid.lower) / grid.width
        for k in range(N):
            pre = (t + k) / N
            w = op.filt.m0_sq(pre) / N
            a = grid.lower + ((edges_l - grid.lower) / N + k * grid.width / N)
            b = a + grid.dx / N
            _spread_interval(M, w, a, b, grid)
    elif isinstance(op, GaussOperator):
        if grid.domain_kind != "interval":
            raise GridMismatchError("Gauss operator lives on an interval grid")
        K = op.truncation_K
        x = mids
        for j in range(n):
            ns = np.arange(1, K + 1, dtype=float)
            w = (ns + x[j]) ** -2.0 if raw else gauss_kernel_probs(x[j], ns)
            a = 1.0 / (ns + edges_r[j])
            b = 1.0 / (ns + edges_l[j])
            k0 = np.floor((a - grid.lower) / grid.dx).astype(int)
            k1 = np.floor((b - grid.lower) / grid.dx - 1e-15).astype(int)
            k1 = np.maximum(k1, k0)
            width = b - a
            same = k0 == k1
            M[:, j] += np.bincount(np.clip(k0[same], 0, n - 1), weights=w[same], minlength=n)
            split = ~same
            if np.any(split):
                cut = grid.lower + k1[split] * grid.dx
                fr_hi = np.clip((b[split] - cut) / width[split], 0.0, 1.0)
                M[:, j] += np.bincount(np.clip(k1[split], 0, n - 1),
                                       weights=w[split] * fr_hi, minlength=n)
                M[:, j] += np.bincount(np.clip(k0[split], 0, n - 1),
                                       weights=w[split] * (1 - fr_hi), minlength=n)
    else:
        raise TypeError(f"not a transfer operator: {type(op).__name__}")
    return np.clip(M, 0.0, None)


def gauss_kernel_probs(x, ns):
    """Markov kernel of the Gauss backward chain: P(branch n | x).

    The density-normalized weights (n+x)^-2 h(1/(n+x)) / h(x) with h the
    Gauss density collapse to (1+x) / ((n+x)(n+x+1)), which sums to 1 over
    all branches.
    """
    x = np.asarray(x, dtype=float)
    ns = np.asarray(ns, dtype=float)
    return (1.0 + x) / ((ns + x) * (ns + x + 1.0))


def radon_nikodym(op, lam: DiscreteMeasure) -> RadonNikodymWeight:
    """W = d(lambda R)/d lambda from the operator's action on cell indicators.

    (lambda R)(cell_i) = sum_j M[i, j] lambda_j; W_i is that mass divided by
    lambda's own mass in cell i.  For the Gauss operator this uses the raw
    branch weights, so that int (R f) d lambda = int f W d lambda holds for
    the operator as applied, not for its normalized chain kernel.
    """
    if not lam.normalized:
        raise ValueError("reference measure must be normalized")
    if np.any(lam.weights <= 0):
        raise ValueError("reference measure must charge every cell")
    M = cell_flow_matrix(op, lam.grid, raw=True)
    pushed = M @ lam.weights
    return RadonNikodymWeight(GridFunction(lam.grid, pushed / lam.weights))


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------

def logistic_system(grid: Grid) -> BranchSystem:
    """sigma(x) = 4x(1-x) with uniform half weights on the two branches."""
    def tau_plus(x):
        return 0.5 * (1.0 + np.sqrt(np.clip(1.0 - x, 0.0, None)))

    def tau_minus(x):
        return 0.5 * (1.0 - np.sqrt(np.clip(1.0 - x, 0.0, None)))

    return BranchSystem(
        grid=grid,
        sigma=lambda x: 4.0 * x * (1.0 - x),
        branches=[tau_minus, tau_plus],
        weights=[lambda x: np.full(np.shape(x), 0.5)] * 2,
        name="logistic",
    )


def doubling_system(grid: Grid) -> BranchSystem:
    """sigma(x) = 2x mod 1 with branches x/2 and (x+1)/2, weights 1/2."""
    def sigma(x):
        y = 2.0 * np.asarray(x, dtype=float)
        return np.where(y < 1.0, y, y - 1.0) if grid.domain_kind == "interval" else y

    return BranchSystem(
        grid=grid,
        sigma=sigma,
        branches=[lambda x: 0.5 * x, lambda x: 0.5 * (x + 1.0)],
        weights=[lambda x: np.full(np.shape(x), 0.5)] * 2,
        name="doubling",
    )


def parametric_weight(u: float) -> Callable:
    """The Radon-Nikodym weight W^(u): 1/(2u) left of u, 1/(2(1-u)) right."""
    def W(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < u, 1.0 / (2.0 * u), 1.0 / (2.0 * (1.0 - u)))

    return W


def parametric_system(grid: Grid, u: float) -> BranchSystem:
    """Branches ux and u + (1-u)x, weights 1/2; sigma rescales each piece."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")

    def sigma(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= u, x / u, (x - u) / (1.0 - u))

    return BranchSystem(
        grid=grid,
        sigma=sigma,
        branches=[lambda x: u * x, lambda x: u + (1.0 - u) * x],
        weights=[lambda x: np.full(np.shape(x), 0.5)] * 2,
        name=f"parametric-{u}",
    )


def _random_control_cdf(x, t):
    """P(F(x, Y) <= t): the controlled move is U(0,x) or U(x,1) evenly."""
    x = np.asarray(x, dtype=float)
    t = float(t)
    below = np.clip(t / x, 0.0, 1.0)
    above = np.clip((t - x) / (1.0 - x), 0.0, 1.0)
    return 0.5 * (below + above)


def random_control_system(grid: Grid, n_control: int = 512) -> ControlledSystem:
    """The two-branch system with uniformly random contraction parameter.

    F(x, (i, u)) is u x for i = 0 and u + (1-u) x for i = 1, with u uniform
    on (0, 1); quadrature over u uses Gauss-Legendre nodes.
    """
    nodes, wts = np.polynomial.legendre.leggauss(n_control)
    u_nodes = 0.5 * (nodes + 1.0)
    u_weights = 0.5 * wts

    def F(x, i, u):
        x = np.asarray(x, dtype=float)
        return u * x if i == 0 else u + (1.0 - u) * x

    return ControlledSystem(
        grid=grid,
        F=F,
        branch_probs=np.array([0.5, 0.5]),
        u_nodes=u_nodes,
        u_weights=u_weights,
        transition_cdf=_random_control_cdf,
        name="random-control",
    )


def gauss_operator(K: int = 10_000, tail_mode: str = "integral") -> GaussOperator:
    return GaussOperator(truncation_K=K, tail_mode=tail_mode)


def bernoulli_system(grid: Grid, a: float) -> BranchSystem:
    """Backward chain of the random series sum_k w_k a^k on [-a/(1-a), a/(1-a)].

    Branches a(x-1) and a(x+1) with equal weights; the stationary law is the
    Bernoulli convolution with parameter a.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")

    def sigma(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, x / a - 1.0, x / a + 1.0)

    return BranchSystem(
        grid=grid,
        sigma=sigma,
        branches=[lambda x: a * (x - 1.0), lambda x: a * (x + 1.0)],
        weights=[lambda x: np.full(np.shape(x), 0.5)] * 2,
        name=f"bernoulli-{a}",
    )


def circle_filter_system(grid: Grid, filt: WaveletFilter,
                         h: Optional[HarmonicSequence] = None) -> BranchSystem:
    """The solenoid Markov move of a circle filter as a branch system.

    Branches (t+k)/N with weights (1/N) |m0|^2((t+k)/N) h((t+k)/N) / h(t);
    h defaults to the constant 1 (orthonormal filters).
    """
    if grid.domain_kind != "circle":
        raise ValueError("filter chains live on circle grids")
    N = filt.N
    h_eval = h.eval if h is not None else (lambda t: np.ones(np.shape(t)))

    def make_tau(k):
        return lambda t: (t + k) / N

    def raw_weights(t):
        t = np.asarray(t, dtype=float)
        return np.stack([filt.m0_sq((t + k) / N) * h_eval((t + k) / N)
                         for k in range(N)])

    def make_weight(k):
        def p(t):
            # the raw weights sum to (R h)(t) = h(t); dividing by their own
            # sum instead of h(t) is the same ratio but stays conditioned
            # near the zeros of h
            raw = raw_weights(t)
            return raw[k] / raw.sum(axis=0)
        return p

    return BranchSystem(
        grid=grid,
        sigma=lambda t: np.mod(N * np.asarray(t, dtype=float), grid.width),
        branches=[make_tau(k) for k in range(N)],
        weights=[make_weight(k) for k in range(N)],
        name=f"filter-{filt.name or 'circle'}",
    )
