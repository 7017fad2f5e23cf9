import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from sharpcate.data import ObsDataset
from sharpcate.exceptions import ValidationError
from sharpcate.kernels import (KernelSpec, boundary_normalizer, default_bandwidth_grid, kernel_weight,
                               kernel_weights, loocv_bandwidth)

DOM = [[-2.0, 2.0]]


def test_gaussian_at_zero_offset():
    assert kernel_weight(KernelSpec("gaussian", 1.0), [0.3, -1.0], [0.3, -1.0]) == 1.0


def test_uniform_outside_support():
    assert kernel_weight(KernelSpec("uniform", 1.0), [0.0, 0.6], [0.0, 0.0]) == 0.0
    assert kernel_weight(KernelSpec("uniform", 1.0), [0.0, 0.5], [0.0, 0.0]) == 1.0


def test_gaussian_value():
    assert kernel_weight(KernelSpec("gaussian", 2.0), [2.0], [0.0]) == pytest.approx(np.exp(-0.5), abs=1e-15)
    assert kernel_weight(KernelSpec("gaussian", 2.0), [2.0], [0.0]) == pytest.approx(0.60653, abs=1e-5)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        kernel_weight(KernelSpec("gaussian", 1.0), [0.0, 1.0], [0.0])


@pytest.mark.parametrize("kwargs", [dict(family="cosine"), dict(h=0.0), dict(h=[1.0, -1.0]),
                                    dict(domain=[[1.0, 0.0]])])
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        KernelSpec(**kwargs)


@pytest.mark.parametrize("xi,expected", [(0.0, 1.0), (-2.0, 0.5), (1.8, 0.7)])
def test_uniform_normalizer(xi, expected):
    spec = KernelSpec("uniform", 1.0, DOM)
    assert boundary_normalizer(spec, [[xi]])[0] == pytest.approx(expected, abs=1e-15)


def test_gaussian_normalizer_interior():
    value = boundary_normalizer(KernelSpec("gaussian", 1.0, DOM), [[0.0]])[0]
    assert value == pytest.approx(2.39258, abs=1e-5)


@pytest.mark.parametrize("h", [0.05, 0.3, 1.0, 4.0])
@pytest.mark.parametrize("xi", [-2.0, -1.3, 0.0, 1.99, 2.0])
def test_gaussian_normalizer_matches_quadrature(h, xi):
    spec = KernelSpec("gaussian", h, DOM)
    ref = quad(lambda t: np.exp(-0.5 * ((xi - t) / h) ** 2), -2, 2, epsabs=1e-13, epsrel=1e-13,
               points=[xi], limit=200)[0]
    assert boundary_normalizer(spec, [[xi]])[0] == pytest.approx(ref, rel=1e-9)


def test_normalizer_tail_precision():
    # both limits deep in one tail: erf differences would cancel to zero
    spec = KernelSpec("gaussian", 0.01, [[0.0, 1.0]])
    assert boundary_normalizer(spec, [[-0.08]])[0] > 0


def test_normalizer_needs_domain():
    with pytest.raises(ValidationError):
        boundary_normalizer(KernelSpec("gaussian", 1.0), [[0.0]])


@pytest.mark.parametrize("family", ["gaussian", "uniform"])
def test_normalized_mass_is_constant(family):
    spec = KernelSpec(family, 0.7, DOM)
    masses = []
    for xi in (-2.0, -1.75, 0.0, 0.9, 2.0):
        f = lambda x: kernel_weights(spec, np.array([[xi]]), [x])[0]
        brk = [xi - 0.35, xi + 0.35] if family == "uniform" else [xi]
        brk = [b for b in brk if -2 < b < 2]
        masses.append(quad(f, -2, 2, points=brk or None, epsabs=1e-12, epsrel=1e-12, limit=200)[0])
    np.testing.assert_allclose(masses, masses[0], atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.floats(0.05, 5), st.sampled_from(["gaussian", "uniform"]))
def test_weight_nonnegative_and_symmetric(xi, x, h, family):
    spec = KernelSpec(family, h)
    w = kernel_weight(spec, xi, x)
    assert w >= 0
    assert w == kernel_weight(spec, x, xi)


def test_per_dimension_bandwidth():
    spec = KernelSpec("gaussian", [1.0, 2.0])
    assert kernel_weight(spec, [1.0, 2.0], [0.0, 0.0]) == pytest.approx(np.exp(-1.0))


def test_default_grid():
    X = np.array([[0.0, 10.0], [2.0, 30.0]])
    H = default_bandwidth_grid(X)
    assert H.shape == (20, 2)
    np.testing.assert_allclose(H[0], [0.1, 1.0])
    np.testing.assert_allclose(H[-1], [2.0, 20.0])


def _naive_loo(X, Y, h, family="gaussian"):
    m = len(Y)
    err = 0.0
    for i in range(m):
        num = den = 0.0
        for j in range(m):
            if j == i:
                continue
            u = (X[j] - X[i]) / h
            k = np.exp(-0.5 * u * u) if family == "gaussian" else float(abs(u) <= 0.5)
            num += k * Y[j]
            den += k
        if den == 0:
            return np.inf
        err += (Y[i] - num / den) ** 2
    return err / m


def _arm_data(X, Y):
    n = len(Y)
    return ObsDataset(np.r_[X, [0.0]][:, None], np.r_[np.ones(n, int), 0], np.r_[Y, 0.0])


def test_loocv_matches_naive_double_loop():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, 40)
    Y = 3 * X + 1
    h, scores = loocv_bandwidth(_arm_data(X, Y), 1, [0.1, 10.0], return_scores=True)
    naive = [_naive_loo(X, Y, c) for c in (0.1, 10.0)]
    np.testing.assert_allclose(scores, naive, rtol=1e-10)
    assert h[0] == [0.1, 10.0][int(np.argmin(naive))]


def test_loocv_nonlinear_prefers_small_bandwidth():
    rng = np.random.default_rng(4)
    X = rng.uniform(-2, 2, 300)
    Y = np.sin(3 * X) + 0.1 * rng.normal(size=300)
    h = loocv_bandwidth(_arm_data(X, Y), 1, np.geomspace(0.02, 4, 15))
    assert 0.02 < h[0] < 0.5


def test_loocv_singleton():
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, 10)
    assert loocv_bandwidth(_arm_data(X, X ** 2), 1, [1.0])[0] == 1.0


def test_loocv_all_candidates_empty():
    X = np.array([0.0, 10.0, 20.0, 30.0])
    with pytest.raises(ValidationError, match="zero kernel mass"):
        loocv_bandwidth(_arm_data(X, X), 1, [0.5, 1.0], family="uniform")


def test_loocv_skips_empty_candidate():
    X = np.array([0.0, 1.0, 2.0, 3.0, 3.5])
    h, scores = loocv_bandwidth(_arm_data(X, X), 1, [0.5, 4.0], family="uniform", return_scores=True)
    assert np.isinf(scores[0]) and h[0] == 4.0


def test_loocv_ties_go_to_larger():
    X = np.linspace(-1, 1, 9)
    h = loocv_bandwidth(_arm_data(X, np.full(9, 2.0)), 1, [0.3, 0.6, 1.2])
    assert h[0] == 1.2


def test_loocv_needs_three_points():
    with pytest.raises(ValidationError):
        loocv_bandwidth(_arm_data(np.array([0.0, 1.0]), np.array([0.0, 1.0])), 1, [1.0])


@pytest.mark.parametrize("max_eval", [None, 25])
def test_loocv_permutation_invariant(max_eval):
    rng = np.random.default_rng(6)
    n = 120
    X = rng.uniform(-2, 2, (n, 1))
    T = rng.integers(0, 2, n)
    Y = np.sin(2 * X[:, 0]) + rng.normal(size=n)
    data = ObsDataset(X, T, Y)
    perm = rng.permutation(n)
    cands = np.geomspace(0.05, 2, 12)
    for t in (0, 1):
        a = loocv_bandwidth(data, t, cands, max_eval=max_eval)
        b = loocv_bandwidth(data.take(perm), t, cands, max_eval=max_eval)
        assert a[0] == b[0]


def test_loocv_shared_and_general_paths_agree():
    rng = np.random.default_rng(7)
    n = 150
    X = rng.uniform(-1, 1, (n, 2))
    Y = X[:, 0] ** 2 + rng.normal(size=n) * 0.1
    data = ObsDataset(X, np.ones(n, int) - (np.arange(n) == 0), Y)
    shared = np.geomspace(0.1, 1, 6)[:, None] * np.array([1.0, 2.0])
    general = shared.copy()
    general[:, 1] *= np.linspace(1, 1.5, 6)
    for H in (shared, general):
        for family in ("gaussian", "uniform"):
            h, scores = loocv_bandwidth(data, 1, H, family=family, domain=[[-1, 1], [-1, 1]], return_scores=True)
            mask = data.T == 1
            ref = []
            for c in H:
                spec = KernelSpec(family, c, [[-1, 1], [-1, 1]])
                Xa, Ya = X[mask], Y[mask]
                err = 0.0
                for i in range(len(Ya)):
                    w = kernel_weights(spec, Xa, Xa[i])
                    w[i] = 0.0
                    if w.sum() <= 0:
                        err = np.inf
                        break
                    err += (Ya[i] - w @ Ya / w.sum()) ** 2
                ref.append(err / len(Ya))
            np.testing.assert_allclose(scores, ref, rtol=1e-9)
