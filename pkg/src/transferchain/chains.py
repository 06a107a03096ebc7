"""Markov chains synthesized from transfer operators, and the statistical
checks of their defining identities: the Markov property, the nested moment
formula, quasi-invariance of the path measure, and martingales from
harmonic functions.

Samplers are vectorized over a batch of paths.  All randomness for an
ensemble comes from one counter-ordered uniform table drawn up front from
the sampler's seed: row p is path p's stream, and step-major ordering makes
truncated simulations prefix-consistent.  Results are bit-identical for a
given seed regardless of worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .grids import DiscreteMeasure, Grid, GridFunction, stream_rng
from .operators import (
    BranchSystem,
    ControlledSystem,
    GaussOperator,
    RadonNikodymWeight,
    apply_branch,
    apply_integral,
    apply_operator,
    gauss_kernel_probs,
)

__all__ = [
    "MarkovSampler",
    "PathEnsemble",
    "ConditionalEstimate",
    "TransitionMatrixEstimate",
    "PathFunctional",
    "coordinate_functional",
    "QuasiInvarianceResult",
    "ScalingCheckResult",
    "step",
    "step_batch",
    "simulate_paths",
    "chain_apply",
    "estimate_conditional",
    "pooled_transitions",
    "markov_property_check",
    "conditional_expectation_check",
    "nested_operator_expectation",
    "path_moment_mc",
    "quasi_invariance_check",
    "apply_scaling_check",
    "martingale_check",
    "estimate_transition_matrix",
    "perron_harmonic_residual",
    "branch_sampler",
    "controlled_sampler",
    "gauss_backward_sampler",
    "finite_chain_sampler",
    "FiniteChain",
]


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic transition matrix over a declared finite state set."""

    states: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        P = np.asarray(self.probabilities, dtype=float)
        if P.shape != (s.size, s.size):
            raise ValueError("transition matrix must be square over the states")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows must be probability distributions")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "probabilities", P)


@dataclass(frozen=True)
class MarkovSampler:
    """One-step sampler of the chain generated by a transfer operator.

    kind: "branch" (move along inverse branches with weights p_i(x)),
    "controlled" (T' = F(T, psi) with psi ~ nu), "gauss-backward"
    (continued-fraction digit moves with density-normalized weights), or
    "finite" (discrete transition matrix).
    ``initial_ppf`` maps uniforms to initial states (exact inverse CDF).
    """

    kind: str
    system: object
    initial_ppf: Callable
    master_seed: int = 9001
    name: str = ""
    # diagnostic fixture: drive step n with step n-1's noise.  Note this
    # only breaks the Markov property visibly for controlled moves; branch
    # moves are backward-deterministic (the previous state is sigma of the
    # current one), so no reuse is detectable through state conditioning.
    reuse_driver_noise: bool = False

    @property
    def channels(self) -> int:
        return 2 if self.kind == "controlled" else 1

    @property
    def grid(self) -> Optional[Grid]:
        return getattr(self.system, "grid", None)

    def sigma(self, x):
        """The endomorphism undone by one chain move (where defined)."""
        if self.kind in ("branch",):
            g = self.system.grid
            return g.wrap(self.system.sigma(x)) if g.domain_kind == "circle" \
                else self.system.sigma(x)
        if self.kind == "gauss-backward":
            return GaussOperator.sigma(x)
        raise ValueError(f"{self.kind} sampler has no endomorphism")


def branch_sampler(system: BranchSystem, initial_ppf: Callable,
                   master_seed: int = 9001, name: str = "",
                   reuse_driver_noise: bool = False) -> MarkovSampler:
    return MarkovSampler("branch", system, initial_ppf, master_seed,
                         name or system.name, reuse_driver_noise)


def controlled_sampler(system: ControlledSystem, initial_ppf: Callable,
                       master_seed: int = 9001, name: str = "") -> MarkovSampler:
    return MarkovSampler("controlled", system, initial_ppf, master_seed,
                         name or system.name)


def gauss_backward_sampler(op: GaussOperator, initial_ppf: Callable,
                           master_seed: int = 9001) -> MarkovSampler:
    return MarkovSampler("gauss-backward", op, initial_ppf, master_seed, "gauss-backward")


def finite_chain_sampler(chain: FiniteChain, initial_probs,
                         master_seed: int = 9001, name: str = "finite") -> MarkovSampler:
    p0 = np.asarray(initial_probs, dtype=float)
    cdf0 = np.cumsum(p0)

    def ppf(u):
        idx = np.searchsorted(cdf0, np.asarray(u, dtype=float), side="left")
        return chain.states[np.clip(idx, 0, chain.states.size - 1)]

    return MarkovSampler("finite", chain, ppf, master_seed, name)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step_batch(s: MarkovSampler, x: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Advance a batch of states one move; uniforms has shape (channels, len(x))."""
    x = np.asarray(x, dtype=float)
    u = uniforms[0]
    if s.kind == "branch":
        sysm = s.system
        probs = sysm.weight_matrix(x)
        total = probs.sum(axis=0)
        if np.max(np.abs(total - 1.0)) > 1e-9:
            raise ValueError("branch weights at the current states do not sum to 1")
        cdf = np.cumsum(probs, axis=0)
        choice = (u[None, :] >= cdf).sum(axis=0)
        choice = np.minimum(choice, len(sysm.branches) - 1)
        taus = sysm.branch_values(x)
        return taus[choice, np.arange(x.size)]
    if s.kind == "controlled":
        sysm = s.system
        p = np.cumsum(sysm.branch_probs)
        branch = np.minimum((u[None, :] >= p[:, None]).sum(axis=0), len(sysm.branch_probs) - 1)
        out = np.empty_like(x)
        for i in range(len(sysm.branch_probs)):
            sel = branch == i
            if not np.any(sel):
                continue
            out[sel] = sysm.F(x[sel], i, uniforms[1][sel] if s.channels > 1 else None)
        return out
    if s.kind == "gauss-backward":
        K = s.system.truncation_K
        z_hat = 1.0 - (1.0 + x) / (K + 1.0 + x)  # truncated kernel mass
        v = u * z_hat
        n = np.ceil((1.0 + x) / (1.0 - v) - 1.0 - x)
        n = np.clip(n, 1, K)
        return 1.0 / (n + x)
    if s.kind == "finite":
        chain = s.system
        idx = _state_indices(x, chain.states)
        rows = np.cumsum(chain.probabilities, axis=1)[idx]
        nxt = (u[:, None] >= rows).sum(axis=1)
        return chain.states[np.clip(nxt, 0, chain.states.size - 1)]
    raise ValueError(f"unknown sampler kind {s.kind!r}")


def step(s: MarkovSampler, x: float, rng: np.random.Generator) -> float:
    """One move from state x, consuming the sampler's channel count of uniforms."""
    u = rng.random((s.channels, 1))
    return float(step_batch(s, np.array([float(x)]), u)[0])


def _state_indices(x, states, atol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    idx = np.argmin(np.abs(x[:, None] - states[None, :]), axis=1)
    if np.max(np.abs(x - states[idx])) > atol:
        raise ValueError("path value outside the declared finite state set")
    return idx


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathEnsemble:
    """A batch of sampled trajectories: paths[p, k] = T_k on path p."""

    paths: np.ndarray
    sampler: MarkovSampler
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.paths, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "paths", p)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_steps(self) -> int:
        return self.paths.shape[1] - 1

    def solenoid_violation(self) -> float:
        """Max |sigma(T_{k+1}) - T_k| over all stored transitions."""
        if self.n_steps == 0:
            return 0.0
        back = self.sampler.sigma(self.paths[:, 1:])
        diff = np.abs(back - self.paths[:, :-1])
        g = self.sampler.grid
        if g is not None and g.domain_kind == "circle":
            diff = np.minimum(diff, g.width - diff)
        return float(np.max(diff))


def simulate_paths(s: MarkovSampler, n_paths: int, n_steps: int) -> PathEnsemble:
    """Independent paths with initial states drawn i.i.d. from the initial law.

    Path p reads row p of a uniform table drawn once from the sampler seed;
    the table is step-major, so a shorter simulation of the same seed is a
    bit-exact prefix of a longer one.
    """
    if n_paths < 1 or n_steps < 0:
        raise ValueError("need n_paths >= 1 and n_steps >= 0")
    rng = stream_rng(s.master_seed, 0)
    u0 = rng.random(n_paths)
    paths = np.empty((n_paths, n_steps + 1))
    paths[:, 0] = s.initial_ppf(u0)
    prev_u = None
    for k in range(n_steps):
        u = rng.random((s.channels, n_paths))
        if s.reuse_driver_noise and prev_u is not None:
            u = prev_u
        paths[:, k + 1] = step_batch(s, paths[:, k], u)
        prev_u = u
    return PathEnsemble(
        paths=paths,
        sampler=s,
        seed_info={"master_seed": s.master_seed, "n_paths": n_paths,
                   "n_steps": n_steps, "system": s.name},
    )


def chain_apply(s: MarkovSampler, f: GridFunction) -> GridFunction:
    """The chain's realized one-step operator: x -> E[f(next) | x] on the grid."""
    if s.kind == "branch":
        return apply_branch(s.system, f)
    if s.kind == "controlled":
        return apply_integral(s.system, f)
    if s.kind == "gauss-backward":
        op: GaussOperator = s.system
        grid = f.grid
        x = grid.nodes
        K = op.truncation_K
        out = np.zeros(grid.n)
        chunk = 4096
        for start in range(1, K + 1, chunk):
            ns = np.arange(start, min(start + chunk, K + 1), dtype=float)[:, None]
            w = gauss_kernel_probs(x[None, :], ns)
            out += np.sum(w * f.eval((1.0 / (ns + x[None, :])).ravel()).reshape(w.shape), axis=0)
        z_hat = 1.0 - (1.0 + x) / (K + 1.0 + x)
        return GridFunction(grid, out / z_hat)
    raise ValueError(f"no grid operator for sampler kind {s.kind!r}")


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalEstimate:
    """Binned estimate of E[f(T_{m+1}) | T_m in bin]; empty bins are absent
    (NaN values), never reported as zero."""

    grid: Grid
    values: np.ndarray
    counts: np.ndarray
    std_errors: np.ndarray
    min_count: int = 100

    @property
    def occupied(self) -> np.ndarray:
        return self.counts >= self.min_count


def _eval_fn(f, x):
    if isinstance(f, GridFunction):
        return f.eval(x)
    return np.asarray(f(x), dtype=float)


def _binned_stats(grid: Grid, x: np.ndarray, y: np.ndarray, min_count: int) -> ConditionalEstimate:
    idx = grid.cell_index(x)
    counts = np.bincount(idx, minlength=grid.n).astype(int)
    sums = np.bincount(idx, weights=y, minlength=grid.n)
    sq = np.bincount(idx, weights=y * y, minlength=grid.n)
    values = np.full(grid.n, np.nan)
    ses = np.full(grid.n, np.nan)
    nz = counts > 0
    values[nz] = sums[nz] / counts[nz]
    var = np.zeros(grid.n)
    var[nz] = np.maximum(sq[nz] / counts[nz] - values[nz] ** 2, 0.0)
    pos = counts > 1
    ses[pos] = np.sqrt(var[pos] / counts[pos])
    return ConditionalEstimate(grid=grid, values=values, counts=counts,
                               std_errors=ses, min_count=min_count)


def estimate_conditional(pe: PathEnsemble, f, from_step: int, bins: Grid,
                         min_count: int = 100) -> ConditionalEstimate:
    """Binned mean of f(T_{from_step+1}) given T_{from_step}."""
    if from_step >= pe.n_steps:
        raise ValueError("from_step must leave at least one transition")
    x = pe.paths[:, from_step]
    y = _eval_fn(f, pe.paths[:, from_step + 1])
    return _binned_stats(bins, x, y, min_count)


def pooled_transitions(pe: PathEnsemble, lag: int = 1):
    """All (T_n, T_{n+lag}) pairs of the ensemble, flattened."""
    if lag < 1 or lag > pe.n_steps:
        raise ValueError("lag must lie in [1, n_steps]")
    xs, ys = [], []
    for n in range(pe.n_steps - lag + 1):
        xs.append(pe.paths[:, n])
        ys.append(pe.paths[:, n + lag])
    return np.concatenate(xs), np.concatenate(ys)


def markov_property_check(pe: PathEnsemble, f, n: int, bins: Grid,
                          min_count: int = 100, baseline_refine: int = 128) -> float:
    """Max standardized dependence of f(T_{n+1}) on the previous coordinate
    once the current one is accounted for.

    A fine-binned estimate of E[f(T_{n+1}) | T_n] is subtracted from each
    observation; for a Markov chain the residual has mean zero in every
    (T_{n-1} bin, T_n bin) cell up to fine-bin discretization, while any
    carried-over driving noise leaves a mean shift with a large z-score.
    Comparing raw binned means instead would confound the check: the pair
    conditioning narrows where T_n sits inside its bin.
    """
    if n < 1 or n + 1 > pe.n_steps:
        raise ValueError("need 1 <= n and n+1 <= n_steps")
    x = pe.paths[:, n]
    y = _eval_fn(f, pe.paths[:, n + 1])

    fine = Grid(bins.lower, bins.upper, min(bins.n * baseline_refine, 8192),
                bins.domain_kind)
    fine_idx = fine.cell_index(x)
    fine_counts = np.bincount(fine_idx, minlength=fine.n)
    fine_sums = np.bincount(fine_idx, weights=y, minlength=fine.n)
    baseline = np.where(fine_counts > 0, fine_sums / np.maximum(fine_counts, 1), 0.0)
    r = y - baseline[fine_idx]

    pair_idx = bins.cell_index(pe.paths[:, n - 1]) * bins.n + bins.cell_index(x)
    counts = np.bincount(pair_idx, minlength=bins.n * bins.n)
    sums = np.bincount(pair_idx, weights=r, minlength=bins.n * bins.n)
    sq = np.bincount(pair_idx, weights=r * r, minlength=bins.n * bins.n)
    live = counts >= min_count
    if not np.any(live):
        return 0.0
    mean = sums[live] / counts[live]
    var = np.maximum(sq[live] / counts[live] - mean**2, 1e-300)
    z = np.abs(mean) / np.sqrt(var / counts[live])
    return float(np.max(z))


def nested_operator_expectation(op, h: GridFunction, lam: DiscreteMeasure,
                                fs: Sequence[GridFunction]) -> float:
    """int f0 R(f1 R(f2 ... R(f_m h) ...)) dlambda by grid quadrature."""
    if not fs:
        raise ValueError("need at least one test function")
    if len(fs) > 7:
        raise ValueError("nested expectation supports at most 7 factors")
    g = fs[-1] * h
    for f in reversed(fs[:-1]):
        g = f * apply_operator(op, g)
    return float(np.dot(g.values, lam.weights))


class MomentEstimate(NamedTuple):
    mean: float
    std_error: float


def path_moment_mc(pe: PathEnsemble, fs: Sequence) -> MomentEstimate:
    """Sample mean and standard error of prod_k f_k(T_k)."""
    if len(fs) > pe.n_steps + 1:
        raise ValueError("more factors than stored coordinates")
    prod = np.ones(pe.n_paths)
    for k, f in enumerate(fs):
        prod = prod * _eval_fn(f, pe.paths[:, k])
    mean = float(prod.mean())
    se = float(prod.std(ddof=1) / np.sqrt(pe.n_paths))
    return MomentEstimate(mean=mean, std_error=se)


# ---------------------------------------------------------------------------
# path functionals, quasi-invariance, scaling unitary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathFunctional:
    """psi depending on coordinates 0..depends_on of a path."""

    depends_on: int
    fn: Callable  # (n_paths, depends_on+1) array -> (n_paths,) values


def coordinate_functional(f, k: int) -> PathFunctional:
    """psi = f o pi_k."""
    return PathFunctional(depends_on=k, fn=lambda block: _eval_fn(f, block[:, k]))


class QuasiInvarianceResult(NamedTuple):
    lhs: float
    rhs: float
    z: float


def _shifted_block(pe: PathEnsemble, m: int) -> np.ndarray:
    """Coordinates 0..m of sigma-hat applied pathwise: (sigma(x0), x0, ..)."""
    first = pe.sampler.sigma(pe.paths[:, 0])
    return np.column_stack([first, pe.paths[:, :m]])


def quasi_invariance_check(pe: PathEnsemble, W: RadonNikodymWeight,
                           psi: PathFunctional) -> QuasiInvarianceResult:
    """Paired Monte Carlo check of E[psi] = E[(psi o sigma-hat) (W o pi_0)]."""
    m = psi.depends_on
    if m > pe.n_steps:
        raise ValueError("functional needs more coordinates than stored")
    lhs_vals = psi.fn(pe.paths[:, : m + 1])
    rhs_vals = psi.fn(_shifted_block(pe, m)) * W.eval(pe.paths[:, 0])
    d = lhs_vals - rhs_vals
    se = d.std(ddof=1) / np.sqrt(pe.n_paths)
    z = abs(d.mean()) / se if se > 0 else 0.0
    return QuasiInvarianceResult(lhs=float(lhs_vals.mean()),
                                 rhs=float(rhs_vals.mean()), z=float(z))


class ScalingCheckResult(NamedTuple):
    norm_before: float
    norm_after: float
    z: float


def apply_scaling_check(pe: PathEnsemble, psi: PathFunctional,
                        W: RadonNikodymWeight) -> ScalingCheckResult:
    """Monte Carlo isometry check E[|sqrt(W o pi_0) (psi o sigma-hat)|^2] = E[|psi|^2]."""
    m = psi.depends_on
    before = psi.fn(pe.paths[:, : m + 1]) ** 2
    after = W.eval(pe.paths[:, 0]) * psi.fn(_shifted_block(pe, m)) ** 2
    d = after - before
    se = d.std(ddof=1) / np.sqrt(pe.n_paths)
    z = abs(d.mean()) / se if se > 0 else 0.0
    return ScalingCheckResult(norm_before=float(before.mean()),
                              norm_after=float(after.mean()), z=float(z))


# ---------------------------------------------------------------------------
# martingales
# ---------------------------------------------------------------------------

def _paired_bin_z(bins: Grid, x: np.ndarray, resid: np.ndarray, min_count: int,
                  scale: float = 1.0) -> float:
    """Max over occupied bins of |mean residual| / its standard error.

    The denominator is floored at round-off relative to ``scale`` so that a
    residual which is identically zero up to float dust scores zero instead
    of dust-over-dust."""
    est = _binned_stats(bins, x, resid, min_count)
    live = est.occupied
    if not np.any(live):
        return 0.0
    floor = 1e-13 * max(scale, 1e-300)
    se = np.maximum(np.where(np.isnan(est.std_errors), 0.0, est.std_errors)[live], floor)
    return float(np.max(np.abs(est.values[live]) / se))


def martingale_check(pe: PathEnsemble, h: GridFunction, k: int, bins: Grid,
                     min_count: int = 100, eigenvalue: float = 1.0) -> float:
    """Max z-score of the binned martingale residual h(T_{n+k}) - lambda^k h(T_n).

    Requires h to satisfy R h = lambda h for the chain's realized operator to
    1e-6 on h's grid (error otherwise); transitions are pooled over n.  The
    target is evaluated at the sample points rather than the bin center, so
    the statistic carries no bin-discretization bias.
    """
    if k < 1 or k > pe.n_steps:
        raise ValueError("need 1 <= k <= n_steps")
    rh = chain_apply(pe.sampler, h)
    harm_resid = float(np.max(np.abs(rh.values - eigenvalue * h.values)))
    if harm_resid > 1e-6:
        raise ValueError(
            f"h is not harmonic for the chain operator (residual {harm_resid:.2e})"
        )
    x, y_state = pooled_transitions(pe, lag=k)
    d = _eval_fn(h, y_state) - eigenvalue**k * _eval_fn(h, x)
    return _paired_bin_z(bins, x, d, min_count,
                         scale=float(np.max(np.abs(h.values))))


def conditional_expectation_check(pe: PathEnsemble, f: GridFunction, k: int,
                                  bins: Grid, min_count: int = 100) -> float:
    """Max z-score of the binned residual f(T_{n+k}) - (R^k f)(T_n), with R
    the chain's realized operator.  This is the k-step conditional
    expectation identity for arbitrary f, not only harmonic ones."""
    if k < 1 or k > pe.n_steps:
        raise ValueError("need 1 <= k <= n_steps")
    g = f
    for _ in range(k):
        g = chain_apply(pe.sampler, g)
    x, y_state = pooled_transitions(pe, lag=k)
    d = _eval_fn(f, y_state) - g.eval(x)
    return _paired_bin_z(bins, x, d, min_count,
                         scale=float(np.max(np.abs(f.values))))


# ---------------------------------------------------------------------------
# discrete chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionMatrixEstimate:
    states: np.ndarray
    counts: np.ndarray
    probabilities: np.ndarray
    row_present: np.ndarray

    def __post_init__(self):
        for key in ("states", "counts", "probabilities", "row_present"):
            a = np.asarray(getattr(self, key))
            a = a.copy()
            a.flags.writeable = False
            object.__setattr__(self, key, a)


def estimate_transition_matrix(pe: PathEnsemble, states) -> TransitionMatrixEstimate:
    """Row-normalized empirical transition counts over a declared state set."""
    states = np.asarray(states, dtype=float)
    m = states.size
    x, y = pooled_transitions(pe, lag=1)
    xi = _state_indices(x, states)
    yi = _state_indices(y, states)
    counts = np.bincount(xi * m + yi, minlength=m * m).reshape(m, m).astype(float)
    row_tot = counts.sum(axis=1)
    present = row_tot > 0
    probs = np.zeros_like(counts)
    probs[present] = counts[present] / row_tot[present, None]
    return TransitionMatrixEstimate(states=states, counts=counts,
                                    probabilities=probs, row_present=present)


def perron_harmonic_residual(est: TransitionMatrixEstimate) -> float:
    """Residual max|P h - h| for P's own right eigenvector at the eigenvalue
    nearest 1 (the discrete harmonic-function identity)."""
    P = est.probabilities
    vals, vecs = np.linalg.eig(P)
    i = int(np.argmin(np.abs(vals - 1.0)))
    h = np.real(vecs[:, i])
    scale = np.max(np.abs(h))
    if scale == 0:
        return 0.0
    h = h / scale
    return float(np.max(np.abs(P @ h - h)))
