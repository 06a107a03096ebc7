"""Named verification checks grouped into suites.

Each check computes one statistic and compares it against a declared
threshold; the CLI's ``verify`` command runs a suite and reports one
record per check.  All randomness is derived from the run's master seed
through fixed stream offsets, so a seed pins every statistic exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import chains, invariant, operators, schur, solenoid, wavelets
from .grids import (
    DiscreteMeasure,
    EmpiricalSample,
    Grid,
    GridFunction,
    arcsine_measure,
    arcsine_ppf,
    gauss_measure,
    gauss_ppf,
    ks_distance,
    ks_two_sample,
    stream_rng,
    uniform_measure,
    uniform_ppf,
)
from .operators import RadonNikodymWeight

__all__ = ["CheckResult", "SUITES", "run_suite", "logistic_separation_search"]


@dataclass
class CheckResult:
    name: str
    suite: str
    statistic: float
    threshold: float
    direction: str  # "<=" or ">="
    runtime_ms: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        if self.direction == "<=":
            return self.statistic <= self.threshold
        return self.statistic >= self.threshold


_REGISTRY: list = []


def _check(suite: str, name: str):
    def deco(fn: Callable):
        _REGISTRY.append((suite, name, fn))
        return fn

    return deco


def run_suite(suite: str, master_seed: int = 9001,
              inject_fault: Optional[str] = None) -> list:
    """Run every check of a suite ("all" runs the union, suite order)."""
    known = {s for s, _, _ in _REGISTRY}
    if suite != "all" and suite not in known:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(known)} or 'all'")
    results = []
    for s, name, fn in _REGISTRY:
        if suite != "all" and s != suite:
            continue
        t0 = time.perf_counter()
        stat, thresh, direction, detail = fn(master_seed, inject_fault)
        ms = (time.perf_counter() - t0) * 1000.0
        results.append(CheckResult(name=name, suite=s, statistic=float(stat),
                                   threshold=float(thresh), direction=direction,
                                   runtime_ms=ms, detail=detail))
    return results


def _trig_pair(grid: Grid, rng: np.random.Generator, deg: int = 3):
    def draw():
        a = rng.normal(size=deg) / np.arange(1, deg + 1) ** 2
        b = rng.normal(size=deg) / np.arange(1, deg + 1) ** 2

        def fn(x):
            out = np.zeros(np.shape(x))
            for k in range(deg):
                out = out + a[k] * np.cos(2 * np.pi * (k + 1) * x) \
                          + b[k] * np.sin(2 * np.pi * (k + 1) * x)
            return out / 3.0

        return GridFunction.from_callable(grid, fn)

    return draw(), draw()


# ---------------------------------------------------------------------------
# operators suite (includes the invariant-measure criteria)
# ---------------------------------------------------------------------------

@_check("operators", "gauss-invariant-density-l1")
def _gauss_density(seed, fault):
    g = Grid(0.0, 1.0, 512)
    m = invariant.build_ulam(operators.gauss_operator(K=10_000), g)
    res = invariant.power_iterate(m, tol=1e-12, max_iters=2000)
    l1 = float(np.abs(res.measure.weights - gauss_measure(g).weights).sum())
    return l1, 0.02, "<=", f"{res.iterations} iterations, residual {res.residual:.2e}"


@_check("operators", "gauss-ulam-column-sums")
def _gauss_colsums(seed, fault):
    g = Grid(0.0, 1.0, 512)
    cs = invariant.build_ulam(operators.gauss_operator(K=10_000), g).column_sums
    worst = float(np.max(np.abs(cs - 1.0)))
    return worst, 1e-3, "<=", f"column sums in [{cs.min():.6f}, {cs.max():.6f}]"


@_check("operators", "doubling-invariant-uniform-l1")
def _doubling_density(seed, fault):
    g = Grid(0.0, 1.0, 512)
    res = invariant.power_iterate(invariant.build_ulam(operators.doubling_system(g), g))
    l1 = float(np.abs(res.measure.weights - uniform_measure(g).weights).sum())
    return l1, 1e-6, "<=", ""


@_check("operators", "random-control-invariant-arcsine-l1")
def _rc_density(seed, fault):
    g = Grid(0.0, 1.0, 1024)
    res = invariant.power_iterate(
        invariant.build_ulam(operators.random_control_system(g), g), max_iters=3000)
    l1 = float(np.abs(res.measure.weights - arcsine_measure(g).weights).sum())
    return l1, 0.03, "<=", ""


@_check("operators", "arcsine-invariance-residuals")
def _arcsine_residuals(seed, fault):
    g = Grid(0.0, 1.0, 2048)
    rc = operators.random_control_system(g)
    fs = [GridFunction.constant(g, 1.0),
          GridFunction.from_callable(g, lambda x: x),
          GridFunction.from_callable(g, lambda x: x**2),
          GridFunction.from_callable(g, lambda x: np.cos(2 * np.pi * x))]
    res = invariant.verify_invariance(arcsine_measure(g), rc, fs)
    return max(res), 5e-4, "<=", "f in {1, x, x^2, cos 2pi x}"


@_check("operators", "gauss-lebesgue-invariance")
def _gauss_lebesgue(seed, fault):
    g = Grid(0.0, 1.0, 512)
    res = invariant.verify_invariance(
        uniform_measure(g), operators.gauss_operator(K=10_000),
        [GridFunction.from_callable(g, lambda x: x)])
    return res[0], 5e-4, "<=", ""


@_check("operators", "logistic-pushforward-arcsine-ks")
def _logistic_pushforward(seed, fault):
    rng = stream_rng(seed, 101)
    x = arcsine_ppf(rng.random(100_000))
    for _ in range(20):
        x = 4.0 * x * (1.0 - x)
    ks = ks_distance(EmpiricalSample(x), arcsine_measure(Grid(0.0, 1.0, 2048)))
    return ks, 0.02, "<=", "20 forward iterations of 10^5 arcsine points"


@_check("operators", "logistic-uniform-weight-separation")
def _logistic_separation(seed, fault):
    best_name, best = logistic_separation_search()
    detail = ("no separating test function exists: the uniform-weight "
              "backward move provably preserves the arcsine law "
              f"(largest residual {best:.2e} from {best_name})")
    return best, 0.01, ">=", detail


def logistic_separation_search(grid_n: int = 4096):
    """Search the candidate family for a function separating the arcsine
    measure from its image under the uniform-weight logistic operator.

    The search comes up empty: with x = sin^2(theta) the two inverse
    branches are sin^2(theta/2) and sin^2(pi/2 - theta/2), and an even
    mixture of theta/2 and pi/2 - theta/2 for theta uniform on (0, pi/2)
    is again uniform, so the move maps arcsine to arcsine exactly.
    """
    g = Grid(0.0, 1.0, grid_n)
    ls = operators.logistic_system(g)
    mu = arcsine_measure(g)
    cands = {
        "x": lambda x: x,
        "x^2": lambda x: x**2,
        "x^3": lambda x: x**3,
        "x^4": lambda x: x**4,
        "cos(pi x)": lambda x: np.cos(np.pi * x),
        "cos(2 pi x)": lambda x: np.cos(2 * np.pi * x),
        "exp(x)": lambda x: np.exp(x),
        "sqrt(x)": lambda x: np.sqrt(x),
        "|x - 0.7|": lambda x: np.abs(x - 0.7),
        "indicator[0,0.3]": lambda x: (x <= 0.3).astype(float),
    }
    best_name, best = "", -np.inf
    for name, fn in cands.items():
        r = invariant.verify_invariance(mu, ls, [GridFunction.from_callable(g, fn)])[0]
        if r > best:
            best_name, best = name, r
    return best_name, best


@_check("operators", "normalization-R1")
def _normalization(seed, fault):
    g = Grid(0.0, 1.0, 1024)
    gc = Grid(0.0, 1.0, 1024, "circle")
    ops = [operators.doubling_system(g),
           operators.parametric_system(g, 0.3),
           operators.random_control_system(g),
           operators.circle_filter_system(gc, wavelets.haar_filter())]
    if fault == "mis-normalized-filter":
        bad = wavelets.WaveletFilter(N=2, coeffs=np.array([0.8, 0.7]), name="bad")
        ops.append(operators.CircleFilterOperator(2, bad))
    worst = 0.0
    for op in ops:
        f1 = GridFunction.constant(getattr(op, "grid", gc), 1.0)
        r1 = operators.apply_operator(op, f1)
        worst = max(worst, float(np.max(np.abs(r1.values - 1.0))))
    return worst, 1e-10, "<=", "R1 = 1 on every normalized operator"


@_check("operators", "pullout-residual")
def _pullout(seed, fault):
    g = Grid(0.0, 1.0, 4096)
    rng = stream_rng(seed, 102)
    f = GridFunction.from_callable(g, lambda x: np.sin(2 * np.pi * x))
    ident = GridFunction.from_callable(g, lambda x: x)
    r_doub = operators.pullout_check(operators.doubling_system(g), f, ident)
    r_log = max(operators.pullout_check(operators.logistic_system(g), *_trig_pair(g, rng))
                for _ in range(3))
    return max(r_doub, r_log / 2.0), 5e-6, "<=", \
        f"doubling {r_doub:.2e}, logistic {r_log:.2e} (<= 1e-5)"


@_check("operators", "ruelle-adjoint-duality")
def _duality(seed, fault):
    g = Grid(0.0, 1.0, 1024, "circle")
    rng = stream_rng(seed, 103)
    op = operators.CircleFilterOperator(2, wavelets.haar_filter())
    worst = 0.0
    for _ in range(3):
        f, h = _trig_pair(g, rng)
        lhs = float(np.mean(operators.apply_ruelle_circle(op, f).values * h.values))
        rhs = float(np.mean(f.values * operators.apply_ruelle_adjoint(op, h).values))
        scale = max(np.max(np.abs(f.values)) * np.max(np.abs(h.values)), 1e-30)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst, 1e-9, "<=", ""


@_check("operators", "radon-nikodym-parametric")
def _rn_parametric(seed, fault):
    g = Grid(0.0, 1.0, 1000)
    W = operators.radon_nikodym(operators.parametric_system(g, 0.3), uniform_measure(g))
    exact = operators.parametric_weight(0.3)(g.nodes)
    return float(np.max(np.abs(W.W.values - exact))), 1e-10, "<=", \
        "u = 0.3, breakpoint on a cell edge"


@_check("operators", "positivity")
def _positivity(seed, fault):
    rng = stream_rng(seed, 104)
    g = Grid(0.0, 1.0, 512)
    gc = Grid(0.0, 1.0, 512, "circle")
    worst = 0.0
    for op, grid in ((operators.doubling_system(g), g),
                     (operators.logistic_system(g), g),
                     (operators.random_control_system(g), g),
                     (operators.gauss_operator(K=500), g),
                     (operators.circle_filter_system(gc, wavelets.haar_filter()), gc)):
        f = GridFunction(grid, rng.random(grid.n))
        worst = min(worst, float(np.min(operators.apply_operator(op, f).values)))
    return -worst, 0.0, "<=", "min node value of R f over nonnegative f"


@_check("operators", "hutchinson-cantor-moments")
def _cantor(seed, fault):
    g = Grid(0.0, 1.0, 2187)
    res = invariant.hutchinson_iterate(invariant.cantor_ifs(g), uniform_measure(g), 40)
    mean, var = invariant.measure_moments(res.measure)
    stat = max(abs(mean - 0.5), abs(var - 0.125))
    return stat, 1e-3, "<=", f"mean {mean:.6f}, variance {var:.6f}"


@_check("operators", "hutchinson-contraction-ratio")
def _cantor_ratio(seed, fault):
    g = Grid(0.0, 1.0, 2187)
    spike = np.zeros(g.n)
    spike[100] = 1.0
    cert = invariant.contraction_certificate(
        invariant.cantor_ifs(g), uniform_measure(g),
        DiscreteMeasure(g, spike, normalized=True))
    return cert.ratio, 1.0 / 3.0 + 2.0 / g.n, "<=", \
        f"alpha bound {cert.alpha_bound:.4f}"


# ---------------------------------------------------------------------------
# chains suite
# ---------------------------------------------------------------------------

def _doubling_sampler(seed, offset=0):
    g = Grid(0.0, 1.0, 512)
    return chains.branch_sampler(operators.doubling_system(g), uniform_ppf,
                                 master_seed=seed + offset)


@_check("chains", "kolmogorov-moment-doubling")
def _moment_doubling(seed, fault):
    gq = Grid(0.0, 1.0, 32768)
    op = operators.doubling_system(gq)
    one = GridFunction.constant(gq, 1.0)
    ident = GridFunction.from_callable(gq, lambda x: x)
    sq = GridFunction.from_callable(gq, lambda x: x**2)
    pe = chains.simulate_paths(_doubling_sampler(seed), 1_000_000, 2)
    worst = 0.0
    for fs_grid, fs_mc in (([ident, ident], [lambda x: x] * 2),
                           ([ident, sq, ident], [lambda x: x, lambda x: x**2, lambda x: x])):
        nested = chains.nested_operator_expectation(op, one, uniform_measure(gq), fs_grid)
        mom = chains.path_moment_mc(pe, fs_mc)
        worst = max(worst, abs(mom.mean - nested) / mom.std_error)
    return worst, 4.0, "<=", "products of up to 3 coordinate functions, 10^6 paths"


@_check("chains", "kolmogorov-moment-random-control")
def _moment_rc(seed, fault):
    gq = Grid(0.0, 1.0, 8192)
    op = operators.random_control_system(gq)
    one = GridFunction.constant(gq, 1.0)
    ident = GridFunction.from_callable(gq, lambda x: x)
    cosf = GridFunction.from_callable(gq, lambda x: np.cos(2 * np.pi * x))
    s = chains.controlled_sampler(op, arcsine_ppf, master_seed=seed + 1)
    pe = chains.simulate_paths(s, 1_000_000, 2)
    worst = 0.0
    for fs_grid, fs_mc in (([ident, ident], [lambda x: x] * 2),
                           ([ident, cosf, ident],
                            [lambda x: x, lambda x: np.cos(2 * np.pi * x), lambda x: x])):
        nested = chains.nested_operator_expectation(op, one, arcsine_measure(gq), fs_grid)
        mom = chains.path_moment_mc(pe, fs_mc)
        worst = max(worst, abs(mom.mean - nested) / mom.std_error)
    return worst, 4.0, "<=", ""


@_check("chains", "quasi-invariance-parametric")
def _quasi(seed, fault):
    worst = 0.0
    details = []
    for i, u in enumerate((0.3, 0.5, 0.7)):
        g = Grid(0.0, 1.0, 512)
        s = chains.branch_sampler(operators.parametric_system(g, u), uniform_ppf,
                                  master_seed=seed + 10 + i)
        pe = chains.simulate_paths(s, 1_000_000, 2)
        W = RadonNikodymWeight(GridFunction.from_callable(g, operators.parametric_weight(u)),
                               exact_fn=operators.parametric_weight(u))
        if u == 0.5:
            flat = float(np.max(np.abs(W.W.values - 1.0)))
            details.append(f"W(0.5) deviates from 1 by {flat:.1e}")
        res = chains.quasi_invariance_check(pe, W, chains.coordinate_functional(lambda x: x, 1))
        worst = max(worst, res.z)
        details.append(f"u={u}: z={res.z:.2f}")
    return worst, 4.0, "<=", "; ".join(details)


@_check("chains", "quasi-invariance-wrong-weight")
def _quasi_wrong(seed, fault):
    g = Grid(0.0, 1.0, 512)
    s = chains.branch_sampler(operators.parametric_system(g, 0.3), uniform_ppf,
                              master_seed=seed + 13)
    pe = chains.simulate_paths(s, 1_000_000, 2)
    W = RadonNikodymWeight(GridFunction.from_callable(g, operators.parametric_weight(0.7)),
                           exact_fn=operators.parametric_weight(0.7))
    res = chains.quasi_invariance_check(pe, W, chains.coordinate_functional(lambda x: x, 1))
    return res.z, 8.0, ">=", "swapped weight constants must be detected"


@_check("chains", "martingale-harmonic")
def _martingale(seed, fault):
    g = Grid(0.0, 1.0, 512)
    gc = Grid(0.0, 1.0, 4096, "circle")
    bins = Grid(0.0, 1.0, 32)
    one = GridFunction.constant(g, 1.0)
    systems = [
        ("doubling", chains.branch_sampler(operators.doubling_system(g), uniform_ppf,
                                           master_seed=seed + 20), one, g),
        ("parametric-0.3", chains.branch_sampler(operators.parametric_system(g, 0.3),
                                                 uniform_ppf, master_seed=seed + 21), one, g),
        ("random-control", chains.controlled_sampler(operators.random_control_system(g),
                                                     arcsine_ppf, master_seed=seed + 22), one, g),
        ("gauss-backward", chains.gauss_backward_sampler(operators.gauss_operator(K=10_000),
                                                         gauss_ppf, master_seed=seed + 23), one, g),
        ("haar-chain", chains.branch_sampler(
            operators.circle_filter_system(gc, wavelets.haar_filter()), uniform_ppf,
            master_seed=seed + 24), GridFunction.constant(gc, 1.0), gc),
    ]
    worst = 0.0
    for name, s, h, grid in systems:
        pe = chains.simulate_paths(s, 500_000, 2)
        for k in (1, 2):
            bins_here = bins if grid.domain_kind == "interval" else Grid(0, 1, 32, "circle")
            worst = max(worst, chains.martingale_check(pe, h, k, bins_here))
    return worst, 5.0, "<=", "h = 1 on every normalized system, k in {1, 2}"


@_check("chains", "martingale-gauss-density")
def _martingale_gauss(seed, fault):
    g = Grid(0.0, 1.0, 512)
    h = GridFunction.from_callable(g, operators.GaussOperator.density)
    s = chains.gauss_backward_sampler(operators.gauss_operator(K=10_000), gauss_ppf,
                                      master_seed=seed + 25)
    pe = chains.simulate_paths(s, 1_000_000, 2)
    worst = max(chains.conditional_expectation_check(pe, h, k, Grid(0.0, 1.0, 32))
                for k in (1, 2))
    return worst, 5.0, "<=", \
        "k-step conditional expectation of the stationary density"


@_check("chains", "martingale-eigenfunction-doubling")
def _martingale_eigen(seed, fault):
    g = Grid(0.0, 1.0, 512)
    b1 = GridFunction.from_callable(g, lambda x: x - 0.5)
    pe = chains.simulate_paths(_doubling_sampler(seed, 26), 1_000_000, 2)
    worst = max(chains.martingale_check(pe, b1, k, Grid(0.0, 1.0, 16), eigenvalue=0.5)
                for k in (1, 2))
    return worst, 4.0, "<=", "eigenpair (x - 1/2, 1/2) of the doubling operator"


@_check("chains", "markov-property-honest")
def _markov_honest(seed, fault):
    g = Grid(0.0, 1.0, 512)
    bins = Grid(0.0, 1.0, 8)
    samplers = [
        _doubling_sampler(seed, 30),
        chains.controlled_sampler(operators.random_control_system(g), arcsine_ppf,
                                  master_seed=seed + 31),
        chains.gauss_backward_sampler(operators.gauss_operator(K=10_000), gauss_ppf,
                                      master_seed=seed + 32),
    ]
    worst = 0.0
    for s in samplers:
        pe = chains.simulate_paths(s, 1_000_000, 3)
        worst = max(worst, chains.markov_property_check(pe, lambda x: x, 2, bins))
    return worst, 5.0, "<=", "10^6 paths per system"


@_check("chains", "markov-property-violation")
def _markov_violation(seed, fault):
    g = Grid(0.0, 1.0, 512)
    s = chains.MarkovSampler("controlled", operators.random_control_system(g),
                             arcsine_ppf, seed + 33, "rc-reused-noise",
                             reuse_driver_noise=True)
    pe = chains.simulate_paths(s, 1_000_000, 3)
    z = chains.markov_property_check(pe, lambda x: x, 2, Grid(0.0, 1.0, 8))
    return z, 8.0, ">=", "driver noise reused from the previous step"


@_check("chains", "solenoid-constraint")
def _solenoid_constraint(seed, fault):
    worst = 0.0
    g = Grid(0.0, 1.0, 512)
    for s in (_doubling_sampler(seed, 34),
              chains.gauss_backward_sampler(operators.gauss_operator(K=10_000), gauss_ppf,
                                            master_seed=seed + 35),
              chains.branch_sampler(operators.parametric_system(g, 0.7), uniform_ppf,
                                    master_seed=seed + 36)):
        pe = chains.simulate_paths(s, 50_000, 10)
        worst = max(worst, pe.solenoid_violation())
    return worst, 1e-10, "<=", "sigma(T_{k+1}) = T_k along every stored path"


@_check("chains", "stationarity-marginals")
def _stationarity(seed, fault):
    g = Grid(0.0, 1.0, 512)
    ref = arcsine_measure(Grid(0.0, 1.0, 2048))
    s = chains.controlled_sampler(operators.random_control_system(g), arcsine_ppf,
                                  master_seed=seed + 37)
    pe = chains.simulate_paths(s, 100_000, 25)
    worst = max(ks_distance(EmpiricalSample(pe.paths[:, k]), ref) for k in (1, 5, 25))
    refg = gauss_measure(Grid(0.0, 1.0, 2048))
    sg = chains.gauss_backward_sampler(operators.gauss_operator(K=10_000), gauss_ppf,
                                       master_seed=seed + 38)
    peg = chains.simulate_paths(sg, 100_000, 10)
    worst = max(worst, ks_distance(EmpiricalSample(peg.paths[:, 10]), refg))
    return worst, 0.02, "<=", "arcsine at steps {1,5,25}; gauss law at step 10"


@_check("chains", "conditional-expectation-closed-form")
def _conditional_closed(seed, fault):
    bins = Grid(0.0, 1.0, 32)
    pe = chains.simulate_paths(_doubling_sampler(seed, 39), 1_000_000, 1)
    est = chains.estimate_conditional(pe, lambda x: x, 0, bins)
    live = est.occupied & (est.std_errors > 0)
    z1 = np.max(np.abs(est.values[live] - (bins.nodes[live] / 2 + 0.25))
                / est.std_errors[live])
    g = Grid(0.0, 1.0, 512)
    s = chains.controlled_sampler(operators.random_control_system(g), arcsine_ppf,
                                  master_seed=seed + 40)
    pe2 = chains.simulate_paths(s, 1_000_000, 1)
    est2 = chains.estimate_conditional(pe2, lambda x: x, 0, bins)
    live2 = est2.occupied & (est2.std_errors > 0)
    z2 = np.max(np.abs(est2.values[live2] - (1 + 2 * bins.nodes[live2]) / 4)
                / est2.std_errors[live2])
    return max(float(z1), float(z2)), 5.0, "<=", \
        "R(id) closed forms for doubling and random control"


@_check("chains", "kolmogorov-consistency")
def _consistency(seed, fault):
    long_pe = chains.simulate_paths(_doubling_sampler(seed, 41), 100_000, 6)
    short_pe = chains.simulate_paths(_doubling_sampler(seed, 42), 100_000, 3)
    worst = max(ks_two_sample(long_pe.paths[:, k], short_pe.paths[:, k]) for k in range(4))
    # 4-sigma-level Kolmogorov quantile with a Bonferroni factor for the
    # max over 4 coordinates
    return worst, 2.4 * np.sqrt(2.0 / 100_000), "<=", \
        "prefix of a longer run matches a fresh shorter run in law"


@_check("chains", "reproducibility")
def _reproducibility(seed, fault):
    a = chains.simulate_paths(_doubling_sampler(seed, 43), 20_000, 8)
    b = chains.simulate_paths(_doubling_sampler(seed, 43), 20_000, 8)
    same = np.array_equal(a.paths, b.paths)
    return 0.0 if same else 1.0, 0.0, "<=", "bit-identical ensembles from one seed"


@_check("chains", "transition-matrix-2state")
def _transition(seed, fault):
    P = np.array([[0.9, 0.1], [0.5, 0.5]])
    fc = chains.FiniteChain(states=np.array([0.0, 1.0]), probabilities=P)
    s = chains.finite_chain_sampler(fc, [0.5, 0.5], master_seed=seed + 44)
    pe = chains.simulate_paths(s, 10_000, 100)
    est = chains.estimate_transition_matrix(pe, [0.0, 1.0])
    dev = float(np.max(np.abs(est.probabilities - P)))
    harm = chains.perron_harmonic_residual(est)
    return max(dev, harm * (0.005 / 1e-6)), 0.005, "<=", \
        f"entry deviation {dev:.4f}; harmonic residual {harm:.1e} (<= 1e-6)"


# ---------------------------------------------------------------------------
# solenoid suite
# ---------------------------------------------------------------------------

@_check("solenoid", "prefix-invariant")
def _prefix_invariant(seed, fault):
    gc = Grid(0.0, 1.0, 8192, "circle")
    s = chains.branch_sampler(operators.circle_filter_system(gc, wavelets.haar_filter()),
                              uniform_ppf, master_seed=seed + 50)
    pe = chains.simulate_paths(s, 20_000, 8)
    return pe.solenoid_violation(), 1e-12, "<=", "N t_{k+1} = t_k mod 1 along sampled paths"


@_check("solenoid", "shift-roundtrip")
def _shift_roundtrip(seed, fault):
    rng = stream_rng(seed, 51)
    p = solenoid.SolenoidPrefix(2, np.array([rng.random()]))
    h1 = wavelets.HarmonicSequence(coeffs=np.array([1.0]))
    for _ in range(6):
        p = solenoid.extend_prefix(p, wavelets.haar_filter(), h1, rng)
    q = solenoid.shift_inverse(solenoid.shift_hat(p))
    back = float(np.max(np.abs(q.angles - p.angles)))
    k = 3
    r = p
    for _ in range(k):
        r = solenoid.shift_hat(r)
    recover = float(abs(r.angles[k] - p.angles[0]))
    return max(back, recover), 0.0, "<=", "shift inverse and coordinate recovery exact"


@_check("solenoid", "pd-gram-minimum-eigenvalue")
def _pd_gram(seed, fault):
    rng = stream_rng(seed, 52)
    h_haar = wavelets.HarmonicSequence(coeffs=np.array([1.0]))
    h_box = wavelets.autocorrelation(wavelets.box_scaling_function(1, 8))
    worst = np.inf
    for filt, h in ((wavelets.haar_filter(), h_haar),
                    (wavelets.stretched_box_filter(1), h_box)):
        for _ in range(20):
            pts = [(int(rng.integers(-8, 9)), int(rng.integers(0, 4))) for _ in range(6)]
            G = solenoid.pd_gram(filt, h, pts, z_angle=float(rng.random()))
            worst = min(worst, float(np.linalg.eigvalsh(G).min()))
    return -worst, 1e-8, "<=", "20 random 6-point sets, haar and box filters"


@_check("solenoid", "pd-well-defined")
def _pd_well(seed, fault):
    rng = stream_rng(seed, 53)
    h1 = wavelets.HarmonicSequence(coeffs=np.array([1.0]))
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(-6, 7))
        k = int(rng.integers(0, 3))
        z = float(rng.random())
        a = solenoid.pd_value(wavelets.haar_filter(), h1, n, k, z)
        b = solenoid.pd_value(wavelets.haar_filter(), h1, 2 * n, k + 1, z)
        worst = max(worst, abs(a - b))
    return worst, 1e-9, "<=", "L(Nn/N^{k+1}) = L(n/N^k)"


@_check("solenoid", "coordinate-distribution-mass")
def _pi_k_mass(seed, fault):
    g = Grid(0.0, 1.0, 1024, "circle")
    h1 = wavelets.HarmonicSequence(coeffs=np.array([1.0]))
    h_box = wavelets.autocorrelation(wavelets.box_scaling_function(1, 8))
    worst = 0.0
    for filt, h in ((wavelets.haar_filter(), h1),
                    (wavelets.stretched_box_filter(1), h_box)):
        for k in range(6):
            mu = solenoid.pi_k_distribution(filt, h, k, g)
            worst = max(worst, abs(float(mu.weights.sum()) - 1.0))
    return worst, 1e-8, "<=", "total mass of |m^(k)|^2 h for k = 0..5"


@_check("solenoid", "coordinate-distribution-sampled")
def _pi_k_sampled(seed, fault):
    gc = Grid(0.0, 1.0, 8192, "circle")
    s = chains.branch_sampler(operators.circle_filter_system(gc, wavelets.haar_filter()),
                              uniform_ppf, master_seed=seed + 54)
    pe = chains.simulate_paths(s, 100_000, 3)
    h1 = wavelets.HarmonicSequence(coeffs=np.array([1.0]))
    mu3 = solenoid.pi_k_distribution(wavelets.haar_filter(), h1, 3, Grid(0, 1, 2048, "circle"))
    ks = ks_distance(EmpiricalSample(pe.paths[:, 3]), mu3)
    return ks, 0.02, "<=", "sampled third coordinate vs its exact density"


@_check("solenoid", "scaling-unitary")
def _scaling_unitary(seed, fault):
    g = Grid(0.0, 1.0, 512)
    s = chains.branch_sampler(operators.doubling_system(g), uniform_ppf,
                              master_seed=seed + 55)
    pe = chains.simulate_paths(s, 1_000_000, 2)
    Wone = RadonNikodymWeight(GridFunction.constant(g, 1.0),
                              exact_fn=lambda x: np.ones(np.shape(x)))
    res1 = solenoid.apply_scaling_U(
        pe, chains.coordinate_functional(lambda x: np.sin(2 * np.pi * x), 0), Wone)
    sp = chains.branch_sampler(operators.parametric_system(g, 0.3), uniform_ppf,
                               master_seed=seed + 56)
    pep = chains.simulate_paths(sp, 1_000_000, 2)
    W3 = RadonNikodymWeight(GridFunction.from_callable(g, operators.parametric_weight(0.3)),
                            exact_fn=operators.parametric_weight(0.3))
    res2 = solenoid.apply_scaling_U(pep, chains.coordinate_functional(lambda x: x, 1), W3)
    return max(res1.z, res2.z), 4.0, "<=", \
        f"doubling z={res1.z:.2f}, parametric z={res2.z:.2f}"


@_check("solenoid", "line-embedding")
def _line_embed(seed, fault):
    rng = stream_rng(seed, 57)
    worst = 0.0
    for _ in range(5):
        t = float(10.0 * (rng.random() - 0.5))
        p = solenoid.embed_line(2, t, 6)
        worst = max(worst, p.invariant_violation())
    zero = solenoid.embed_line(2, 0.0, 6)
    worst = max(worst, float(np.max(np.abs(zero.angles))))
    return worst, 1e-12, "<=", "gamma_N prefixes satisfy the solenoid constraint"


# ---------------------------------------------------------------------------
# wavelet suite
# ---------------------------------------------------------------------------

@_check("wavelet", "haar-orthonormality")
def _haar_h(seed, fault):
    phi = wavelets.cascade(wavelets.haar_filter(), J=10, iters=2)
    h = wavelets.autocorrelation(phi)
    g = Grid(0.0, 1.0, 1024, "circle")
    return float(np.max(np.abs(h.eval(g.nodes) - 1.0))), 1e-10, "<=", \
        "h of the Haar scaling function is the constant 1"


@_check("wavelet", "fejer-autocorrelation")
def _fejer(seed, fault):
    worst = 0.0
    for m in (1, 2, 3):
        h = wavelets.autocorrelation(wavelets.box_scaling_function(m, 8))
        L = 2 * m + 1
        expect = np.maximum(L - np.arange(len(h.coeffs)), 0) / L
        want = np.zeros(len(h.coeffs))
        want[: L] = expect[: L]
        worst = max(worst, float(np.max(np.abs(h.coeffs - want))))
    return worst, 1e-10, "<=", "r_n = (2m+1-|n|)/(2m+1) for m in {1,2,3}"


@_check("wavelet", "ruelle-fixed-point")
def _ruelle_fixed(seed, fault):
    worst = wavelets.verify_ruelle_fixed(wavelets.haar_filter(),
                                         wavelets.HarmonicSequence(np.array([1.0])))
    for m in (1, 2, 3):
        h = wavelets.autocorrelation(wavelets.box_scaling_function(m, 8))
        worst = max(worst, wavelets.verify_ruelle_fixed(wavelets.stretched_box_filter(m), h))
    return worst, 1e-8, "<=", "R h = h in coefficient arithmetic"


@_check("wavelet", "intertwining")
def _intertwine(seed, fault):
    rng = stream_rng(seed, 60)
    phi = wavelets.cascade(wavelets.haar_filter(), J=10, iters=3)
    worst = wavelets.intertwine_check(wavelets.haar_filter(), phi, {0: 1.0})
    xi = {int(k): float(rng.normal()) for k in range(8)}
    worst = max(worst, wavelets.intertwine_check(wavelets.haar_filter(), phi, xi))
    return worst, 1e-10, "<=", "K S = U K on the sample mesh"


@_check("wavelet", "cascade-contraction")
def _cascade_contract(seed, fault):
    phi = wavelets.cascade(wavelets.haar_filter(), J=10, iters=9)
    return phi.sup_delta, 1e-6, "<=", "sup distance of cascade iterates 8 and 9"


@_check("wavelet", "compact-support-autocorrelation")
def _compact_support(seed, fault):
    worst = 0.0
    for m in (1, 2):
        h = wavelets.autocorrelation(wavelets.box_scaling_function(m, 8))
        beyond = h.coeffs[2 * m + 1 :]
        if beyond.size:
            worst = max(worst, float(np.max(np.abs(beyond))))
    return worst, 1e-12, "<=", "no autocorrelation beyond the support width"


# ---------------------------------------------------------------------------
# schur suite
# ---------------------------------------------------------------------------

@_check("schur", "roundtrip")
def _schur_roundtrip(seed, fault):
    rng = stream_rng(seed, 70)
    worst = 0.0
    for _ in range(100):
        r = 0.9 * np.sqrt(rng.random(8))
        params = schur.SchurParams(r * np.exp(2j * np.pi * rng.random(8)))
        rec = schur.extract_params(schur.SchurEval.from_params(params, depth=24), 8)
        worst = max(worst, float(np.max(np.abs(rec.params - params.params))))
    return worst, 1e-8, "<=", "100 random length-8 sequences, radius <= 0.9"


@_check("schur", "blaschke-termination")
def _blaschke(seed, fault):
    rng = stream_rng(seed, 71)
    worst = 0.0
    for d in (1, 2, 3):
        zeros = 0.6 * (rng.random(d) - 0.5) + 0.3j * (rng.random(d) - 0.5)
        p = schur.extract_params(schur.blaschke_product(list(zeros)), 12)
        if not p.terminated or len(p) != d + 1:
            return 1.0, 1e-8, "<=", f"degree {d} failed to stop in {d + 1} steps"
        worst = max(worst, abs(abs(p.params[-1]) - 1.0))
    return worst, 1e-8, "<=", "degree d stops in d+1 steps at modulus 1"


@_check("schur", "contractivity-preservation")
def _contractivity(seed, fault):
    rng = stream_rng(seed, 72)
    worst = -np.inf
    for i in range(10):
        r = 0.8 * np.sqrt(rng.random(5))
        params = schur.SchurParams(r * np.exp(2j * np.pi * rng.random(5)))
        s = schur.SchurEval.from_params(params, depth=16)
        nxt = schur.schur_step(s).next
        worst = max(worst, schur.contractivity_defect(nxt, master_seed=seed + i,
                                                      radius=0.99))
    return worst, 1e-9, "<=", "|s_{n+1}| <= 1 at random points of radius 0.99"


@_check("schur", "move-matches-step")
def _move_step(seed, fault):
    rng = stream_rng(seed, 73)
    z = 0.7 * np.sqrt(rng.random(16)) * np.exp(2j * np.pi * rng.random(16))
    s = schur.SchurEval(num=[0.5, 0.1j], den=[1.0, -0.2])
    a = schur.schur_move(s, s.at0()).eval(z)
    b = schur.schur_step(s).next.eval(z)
    return float(np.max(np.abs(a - b))), 1e-10, "<=", "F(s, s(0)) equals the recursion step"


@_check("schur", "shift-invariance")
def _shift_invariance(seed, fault):
    nu = schur.uniform_disk_sampler(0.5)
    rng = stream_rng(seed, 74)
    draws = nu(rng, 3 * 100_000).reshape(100_000, 3)
    worst = max(ks_two_sample(draws[:, 0].real, draws[:, 1].real),
                ks_two_sample(draws[:, 0].imag, draws[:, 1].imag),
                ks_two_sample(np.abs(draws[:, 0]), np.abs(draws[:, 2])))
    mean0 = abs(draws[:, 0].mean())
    return max(worst, mean0 * (0.01 / (4 * 0.25 / np.sqrt(100_000)))), 0.01, "<=", \
        "coordinate laws of the parameter sequence agree under the shift"
