import numpy as np
import pytest
from scipy.stats import norm

from sharpcate.bounds import ArmProblem
from sharpcate.exceptions import NumericalError, ValidationError
from sharpcate.experiments import FIG1_GRID
from sharpcate.oracle import (PopulationProblem, population_bounds, population_cate_interval, population_curve,
                              simpson_weights, vertex_enumeration_bound)
from sharpcate.simulate import confounder_posterior, outcome_mean, population_problem, true_cate


def test_enumeration_example():
    prob = ArmProblem([0.0, 1.0, 2.0], [1.0] * 3, [3.0] * 3)
    assert vertex_enumeration_bound(prob, "upper") == pytest.approx(1.4, abs=1e-15)
    assert vertex_enumeration_bound(prob, "lower") == pytest.approx(0.6, abs=1e-15)


def test_enumeration_equal_box():
    rng = np.random.default_rng(0)
    y, a = np.sort(rng.normal(size=6)), rng.uniform(0.2, 2, 6)
    prob = ArmProblem(y, a, a)
    ref = np.dot(a, y) / a.sum()
    assert vertex_enumeration_bound(prob, "upper") == pytest.approx(ref, abs=1e-14)
    assert vertex_enumeration_bound(prob, "lower") == pytest.approx(ref, abs=1e-14)


def test_enumeration_size_limit():
    y = np.linspace(0, 1, 21)
    assert np.isfinite(vertex_enumeration_bound(ArmProblem(y[:20], np.ones(20), 2 * np.ones(20)), "upper"))
    with pytest.raises(ValidationError, match="m=21"):
        vertex_enumeration_bound(ArmProblem(y, np.ones(21), 2 * np.ones(21)), "upper")


def test_enumeration_direction():
    with pytest.raises(ValidationError):
        vertex_enumeration_bound(ArmProblem([0.0], [1.0], [1.0]), "middle")


def test_enumeration_order():
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = int(rng.integers(2, 8))
        y = np.sort(rng.normal(size=m))
        a = rng.uniform(0.1, 1, m)
        prob = ArmProblem(y, a, a * rng.uniform(1.1, 3, m))
        assert vertex_enumeration_bound(prob, "upper") > vertex_enumeration_bound(prob, "lower")
    flat = ArmProblem(np.zeros(4), np.ones(4), 3 * np.ones(4))
    assert vertex_enumeration_bound(flat, "upper") == vertex_enumeration_bound(flat, "lower")


def test_simpson_weights():
    w = simpson_weights(5, 0.0, 1.0)
    np.testing.assert_allclose(w, np.array([1, 4, 2, 4, 1]) / 12)
    x = np.linspace(0, 2, 11)
    assert np.dot(simpson_weights(11, 0, 2), x ** 3) == pytest.approx(4.0, abs=1e-13)
    with pytest.raises(ValidationError):
        simpson_weights(4, 0, 1)


@pytest.mark.parametrize("x", [-1.5, 0.0, 1.2])
@pytest.mark.parametrize("t", [0, 1])
def test_gamma_one_is_arm_mean(x, t):
    prob = population_problem("sin1d", 1.0, 1.0)
    q = confounder_posterior(x, t, 1.0)
    ref = q * outcome_mean(x, t, 1.0) + (1 - q) * outcome_mean(x, t, 0.0)
    lo, hi = population_bounds(prob, x, t)
    assert lo == pytest.approx(hi, abs=1e-12)
    assert lo == pytest.approx(ref, abs=1e-4)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 10.0])
def test_point_mass_like_density(gamma):
    y0, sd = 0.7, 1e-3
    prob = PopulationProblem(lambda x: 0.4, lambda y, x, t: 0.6 * norm.pdf(y, y0, sd),
                             (y0 - 8 * sd, y0 + 8 * sd), gamma, arm_mass=lambda x, t: 0.6)
    lo, hi = population_bounds(prob, 0.0, 0)
    assert abs(lo - y0) <= 1e-3 and abs(hi - y0) <= 1e-3


def test_mass_check():
    prob = PopulationProblem(lambda x: 0.5, lambda y, x, t: norm.pdf(y), (-8, 8), 2.0, arm_mass=lambda x, t: 0.5)
    with pytest.raises(NumericalError, match="integrates"):
        population_bounds(prob, 0.0, 1)


def test_golden_value():
    prob = population_problem("sin1d", 1.0, np.e)
    lo0, hi0 = population_bounds(prob, 0.0, 0)
    lo1, hi1 = population_bounds(prob, 0.0, 1)
    np.testing.assert_allclose([lo0, hi0, lo1, hi1], [-1.0129964, 0.9172965, -0.3679765, 1.0071828], atol=1e-5)


@pytest.mark.parametrize("x", [-1.7, 0.0, 0.9])
def test_grid_refinement(x):
    prob = population_problem("sin1d", 1.0, np.e)
    for t in (0, 1):
        coarse = population_bounds(prob, x, t, G=2001)
        fine = population_bounds(prob, x, t, G=4001)
        np.testing.assert_allclose(coarse, fine, atol=1e-4)


def test_gamma_one_recovers_true_cate_without_confounding():
    prob = population_problem("sin1d", 0.0, 1.0)
    grid = np.linspace(-2, 2, 17)
    lo, hi = population_curve(prob, grid)
    np.testing.assert_allclose(lo, true_cate("sin1d", grid), atol=1e-3)
    np.testing.assert_array_equal(lo, hi)
    assert population_cate_interval(prob, 0.0).tau_lo == pytest.approx(2.0, abs=1e-3)


def test_gamma_one_under_confounding_is_biased():
    lo, _ = population_curve(population_problem("sin1d", 1.0, 1.0), [0.0])
    assert abs(lo[0] - 2.0) > 0.5


def test_intervals_nest_and_contain_truth():
    g1 = population_curve(population_problem("sin1d", 1.0, 1.0), FIG1_GRID[::5])
    ge = population_curve(population_problem("sin1d", 1.0, np.e), FIG1_GRID)
    assert np.all(ge[0][::5] <= g1[0] + 1e-12) and np.all(ge[1][::5] >= g1[1] - 1e-12)
    tau = true_cate("sin1d", FIG1_GRID)
    assert np.all((ge[0] <= tau) & (tau <= ge[1]))
