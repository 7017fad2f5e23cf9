import numpy as np
import pytest
from scipy.special import expit

from sharpcate.data import write_dataset_csv
from sharpcate.exceptions import ValidationError
from sharpcate.msm import bracket_arrays
from sharpcate.simulate import (DgpSpec, complete_e1, confounded_cate, confounding_term, generate, marginal_e1,
                                nominal_e1, true_cate)


def test_no_confounding_matches_nominal():
    data = generate(DgpSpec("sin1d", 0.0, 50000, 1))
    np.testing.assert_allclose(complete_e1(data.X[:, 0], data.truth.U, 0.0), data.e1_known, rtol=1e-14)
    x, T = data.X[:, 0], data.T
    edges = np.linspace(-2, 2, 9)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (x >= lo) & (x < hi)
        assert T[sel].mean() == pytest.approx(expit(0.75 * x[sel] + 0.5).mean(), abs=0.03)


def test_effect_at_zero():
    data = generate(DgpSpec("sin1d", 1.0, 200000, 2))
    sel = np.abs(data.X[:, 0]) < 0.02
    assert (data.truth.Y1 - data.truth.Y0)[sel].mean() == pytest.approx(2.0, abs=0.05)


@pytest.mark.parametrize("name", ["sin1d", "pcate3d", "appendix"])
def test_deterministic_csv(tmp_path, name):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_dataset_csv(generate(DgpSpec(name, 1.0, 300, 9)), a)
    write_dataset_csv(generate(DgpSpec(name, 1.0, 300, 9)), b)
    assert a.read_bytes() == b.read_bytes()
    write_dataset_csv(generate(DgpSpec(name, 1.0, 300, 10)), b)
    assert a.read_bytes() != b.read_bytes()


def test_true_cate_values():
    assert true_cate("sin1d", 0.0) == 2.0
    assert true_cate("sin1d", np.pi / 4) == pytest.approx(np.pi / 2 - 2, abs=1e-14)
    assert true_cate("sin1d", np.pi / 4) == pytest.approx(-0.42920, abs=1e-5)


def test_confounded_equals_true_without_confounding():
    x = np.linspace(-2, 2, 11)
    np.testing.assert_allclose(confounded_cate("sin1d", x, 0.0), true_cate("sin1d", x), atol=1e-14)


def test_confounding_term_sign_and_growth():
    t0, t15 = confounding_term("sin1d", 0.0, 1.0), confounding_term("sin1d", 1.5, 1.0)
    assert t0 < 0 and t15 < 0
    assert abs(t15) > abs(t0)
    x = np.linspace(0, 2, 21)
    assert np.all(np.diff(np.abs(confounding_term("sin1d", x, 1.0))) > 0)


def test_confounding_term_closed_form():
    from sharpcate.simulate import confounder_posterior
    x = np.linspace(-2, 2, 9)
    diff = confounder_posterior(x, 1, 1.0) - confounder_posterior(x, 0, 1.0)
    np.testing.assert_allclose(confounding_term("sin1d", x, 1.0), -2 * (2 + x) * diff, atol=1e-12)


def test_complete_propensity_on_bracket_edges():
    lgs = 1.0
    data = generate(DgpSpec("sin1d", lgs, 2000, 3))
    x, u = data.X[:, 0], data.truth.U
    w = 1 / complete_e1(x, u, lgs)
    alpha, beta = bracket_arrays(nominal_e1(x), np.exp(lgs))
    np.testing.assert_allclose(w, np.where(u == 1, alpha, beta), rtol=1e-12)
    tight_a, tight_b = bracket_arrays(nominal_e1(x), np.exp(lgs) * 0.9)
    assert np.any((w < tight_a) | (w > tight_b))


def test_arm_proportions():
    spec = DgpSpec("sin1d", 1.5, 20000, 4)
    data = generate(spec)
    p = complete_e1(data.X[:, 0], data.truth.U, spec.log_gamma_star)
    se = np.sqrt(np.sum(p * (1 - p))) / data.n
    assert abs(data.T.mean() - p.mean()) <= 3 * se
    assert marginal_e1(0.3, 1.5) == pytest.approx(0.5 * (complete_e1(0.3, 1, 1.5) + complete_e1(0.3, 0, 1.5)))


def test_pcate3d_shape_and_heterogeneity():
    data = generate(DgpSpec("pcate3d", 1.0, 5000, 5))
    assert data.d == 3 and np.all(np.abs(data.X) <= 1)
    np.testing.assert_allclose(data.truth.Y1 - data.truth.Y0, true_cate("pcate3d", data.X[:, 0]), atol=1e-12)
    np.testing.assert_allclose(data.e1_known, expit(data.X @ [0.75, -0.5, 0.5] + 0.5))


def test_appendix_generator():
    data = generate(DgpSpec("appendix", 1.0, 1000, 6))
    assert data.e1_known is None
    x, u = data.X[:, 0], data.truth.U
    np.testing.assert_allclose(data.truth.Y1 - data.truth.Y0, true_cate("appendix", x), atol=1e-12)
    with pytest.raises(ValidationError):
        nominal_e1(0.0, "appendix")
    assert complete_e1(0.0, 1.0, 0.0, "appendix") == pytest.approx(expit(1.5))


@pytest.mark.parametrize("kwargs", [dict(name="nope"), dict(log_gamma_star=-1.0), dict(n=0)])
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        DgpSpec(**kwargs)


def test_confounded_cate_rejects_3d():
    with pytest.raises(ValidationError):
        confounded_cate("pcate3d", 0.0, 1.0)
