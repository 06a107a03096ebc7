import numpy as np
import pytest

from transferchain.grids import (
    DiscreteMeasure,
    EmpiricalSample,
    Grid,
    GridFunction,
    GridMismatchError,
    arcsine_measure,
    arcsine_ppf,
    char_function_bernoulli,
    gauss_measure,
    histogram,
    integrate,
    ks_distance,
    quantiles,
    sample_measure,
    stream_rng,
    uniform_measure,
    wasserstein1,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1.0, 0.0, 10)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 8, "weird")
    g = Grid(0.0, 1.0, 4)
    assert np.allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])


def test_gridfunction_finite_required():
    g = Grid(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        GridFunction(g, np.array([1.0, np.inf, 0.0, 0.0]))


def test_integrate_constant_and_mean():
    g = Grid(0.0, 1.0, 1000)
    one = GridFunction.constant(g, 1.0)
    ident = GridFunction.from_callable(g, lambda x: x)
    mu = uniform_measure(g)
    assert integrate(one, mu) == pytest.approx(1.0, abs=1e-14)
    assert integrate(ident, mu) == pytest.approx(0.5, abs=1e-6)


def test_integrate_arcsine_second_moment():
    g = Grid(0.0, 1.0, 2048)
    f = GridFunction.from_callable(g, lambda x: x**2)
    # Beta(1/2,1/2) second moment is 3/8
    assert integrate(f, arcsine_measure(g)) == pytest.approx(0.375, abs=2e-3)


def test_integrate_linearity():
    g = Grid(0.0, 1.0, 256)
    rng = stream_rng(0, 0)
    f = GridFunction(g, rng.normal(size=g.n))
    h = GridFunction(g, rng.normal(size=g.n))
    mu = DiscreteMeasure(g, rng.random(g.n), normalized=False)
    lhs = integrate(GridFunction(g, 2.5 * f.values - 1.25 * h.values), mu)
    rhs = 2.5 * integrate(f, mu) - 1.25 * integrate(h, mu)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_integrate_grid_mismatch():
    f = GridFunction.constant(Grid(0.0, 1.0, 8), 1.0)
    with pytest.raises(GridMismatchError):
        integrate(f, uniform_measure(Grid(0.0, 1.0, 16)))


def test_wasserstein_identity_and_point_masses():
    g = Grid(0.0, 1.0, 200)
    mu = arcsine_measure(g)
    assert wasserstein1(mu, mu) == 0.0
    d0 = np.zeros(g.n)
    d0[0] = 1.0
    d1 = np.zeros(g.n)
    d1[-1] = 1.0
    w = wasserstein1(DiscreteMeasure(g, d0), DiscreteMeasure(g, d1))
    # transport distance between the extreme cells: 1 up to one cell width
    assert abs(w - 1.0) <= 1.5 / g.n


def test_wasserstein_uniform_vs_midpoint_mass():
    g = Grid(0.0, 1.0, 1000)
    spike = np.zeros(g.n)
    spike[g.cell_index(0.5)] = 1.0
    w = wasserstein1(uniform_measure(g), DiscreteMeasure(g, spike))
    assert abs(w - 0.25) <= 1.0 / g.n


def test_wasserstein_metric_axioms():
    g = Grid(0.0, 1.0, 128)
    rng = stream_rng(1, 0)
    ms = []
    for _ in range(3):
        w = rng.random(g.n)
        ms.append(DiscreteMeasure(g, w / w.sum()))
    a, b, c = ms
    assert wasserstein1(a, b) == wasserstein1(b, a)
    assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12
    assert wasserstein1(a, a) == 0.0
    assert wasserstein1(a, b) > 0.0


def test_wasserstein_requires_normalized():
    g = Grid(0.0, 1.0, 16)
    half = DiscreteMeasure(g, np.full(g.n, 0.5 / g.n), normalized=False)
    with pytest.raises(ValueError):
        wasserstein1(uniform_measure(g), half)


def test_histogram_single_point():
    g = Grid(0.0, 1.0, 10)
    mu = histogram(EmpiricalSample(np.array([0.5])), g)
    assert mu.weights[g.cell_index(0.5)] == 1.0


def test_histogram_uniform_draws():
    g = Grid(0.0, 1.0, 512)
    rng = stream_rng(2, 0)
    mu = histogram(EmpiricalSample(rng.random(1_000_000)), g)
    assert wasserstein1(mu, uniform_measure(g)) <= 3e-3


def test_histogram_bernoulli_half_is_uniform():
    # (E_{1/2} + 1)/2 with E_a = sum w_k a^k has the uniform law
    rng = stream_rng(3, 0)
    n = 1_000_000
    x = np.zeros(n)
    for k in range(1, 54):
        x += np.where(rng.random(n) < 0.5, -1.0, 1.0) * 0.5**k
    g = Grid(0.0, 1.0, 512)
    mu = histogram(EmpiricalSample((x + 1.0) / 2.0), g)
    assert wasserstein1(mu, uniform_measure(g)) <= 3e-3


def test_histogram_empty_error():
    with pytest.raises(ValueError):
        histogram(EmpiricalSample(np.array([])), Grid(0.0, 1.0, 8))


def test_ks_quantile_sample():
    g = Grid(0.0, 1.0, 512)
    mu = arcsine_measure(g)
    m = 10_000
    s = EmpiricalSample(quantiles(mu, m))
    assert ks_distance(s, mu) <= 1.0 / m + 2.0 / g.n


def test_ks_matching_and_separating_laws():
    g = Grid(0.0, 1.0, 2048)
    mu = arcsine_measure(g)
    rng = stream_rng(4, 0)
    draws = arcsine_ppf(rng.random(100_000))
    assert ks_distance(EmpiricalSample(draws), mu) <= 0.01
    uniform_draws = rng.random(100_000)
    # CDF gap between uniform and arcsine peaks near 0.18
    assert ks_distance(EmpiricalSample(uniform_draws), mu) >= 0.1


def test_ks_decreases_with_sample_size():
    g = Grid(0.0, 1.0, 1024)
    mu = gauss_measure(g)
    medians = []
    for size in (10_000, 100_000, 1_000_000):
        vals = []
        for seed in (10, 11, 12):
            s = sample_measure(mu, size, master_seed=seed)
            vals.append(ks_distance(s, mu))
        medians.append(np.median(vals))
    assert medians[0] > medians[1] > medians[2]


def test_char_function_examples():
    assert char_function_bernoulli(0.3, 0.0, 5).value == 1.0
    res = char_function_bernoulli(0.5, 2 * np.pi, 40)
    # telescoping: prod cos(t/2^k) = sin(t)/(2^K sin(t/2^K)), zero at t = 2 pi
    assert abs(res.value) <= 1e-6
    assert res.tail_bound >= 0.0
    with pytest.raises(ValueError):
        char_function_bernoulli(1.5, 1.0, 3)


def test_char_function_vs_empirical():
    a, t, n = 0.4, 1.0, 1_000_000
    rng = stream_rng(5, 0)
    x = np.zeros(n)
    for k in range(1, 64):
        if a**k < 1e-18:
            break
        x += np.where(rng.random(n) < 0.5, -1.0, 1.0) * a**k
    emp = np.cos(t * x).mean()
    se = np.cos(t * x).std(ddof=1) / np.sqrt(n)
    assert abs(emp - char_function_bernoulli(a, t, 60).value) <= 4 * se


def test_circle_periodicity_exact():
    g = Grid(0.0, 1.0, 64, "circle")
    f = GridFunction(g, stream_rng(6, 0).normal(size=g.n))
    # dyadic points, so x + 1 is itself exactly representable
    x = np.arange(129) / 128.0
    assert np.array_equal(f.eval(x), f.eval(x + 1.0))
    assert np.array_equal(f.eval(x), f.eval(x - 1.0))


def test_stream_rng_reproducible_and_split():
    a = stream_rng(42, 7).random(5)
    b = stream_rng(42, 7).random(5)
    c = stream_rng(42, 8).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_measure_points_in_domain():
    g = Grid(0.0, 1.0, 64)
    s = sample_measure(arcsine_measure(g), 1000, master_seed=9, stream_id=3)
    assert s.seed_info == {"master_seed": 9, "stream_id": 3}
    assert np.all((s.points >= 0.0) & (s.points <= 1.0))


def test_normalized_measure_validation():
    g = Grid(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        DiscreteMeasure(g, np.full(8, 0.2), normalized=True)
    with pytest.raises(ValueError):
        DiscreteMeasure(g, -np.ones(8), normalized=False)
    mu = uniform_measure(g)
    assert mu.density == pytest.approx(np.ones(8))
