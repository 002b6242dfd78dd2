import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.polynomial import polynomial

from oracles import central_difference
from vdff.errors import IllConditionedFit, Underdetermined
from vdff.polyfit import (
    ContrastCurveField,
    design_matrix,
    eval_curve,
    eval_curve_derivative,
    fit_curves,
    load_curves,
    save_curves,
)

X15 = np.arange(15) / 14


def poly_volume(rng, h=4, w=5, degree=8):
    coeffs = rng.normal(size=(h, w, degree + 1))
    samples = np.stack([polynomial.polyval(x, coeffs.transpose(2, 0, 1)) for x in X15])
    return coeffs, samples


def test_recovers_exact_polynomials(rng):
    coeffs, volume = poly_volume(rng)
    field = fit_curves(volume, X15)
    xs = np.linspace(0, 1, 23)
    for x in xs:
        want = polynomial.polyval(x, coeffs.transpose(2, 0, 1))
        np.testing.assert_allclose(field.value(np.full((4, 5), x)), want, atol=1e-6)


def test_constant_volume_gives_constant_curve():
    volume = np.full((15, 3, 3), 2.5)
    field = fit_curves(volume, X15)
    np.testing.assert_allclose(field.coeffs[..., 0], 2.5)
    assert np.abs(field.coeffs[..., 1:]).max() <= 1e-8
    assert eval_curve(field, 1, 2, 0.37) == pytest.approx(2.5)
    assert eval_curve_derivative(field, 0, 0, 0.6) == pytest.approx(0.0, abs=1e-8)


def test_noisy_bump_maximizer_near_center():
    rng = np.random.default_rng(7)
    center = 0.43
    samples = np.exp(-0.5 * ((X15 - center) / 0.12) ** 2) + 0.02 * rng.normal(size=15)
    field = fit_curves(samples[:, None, None], X15)
    grid = np.linspace(0, 1, 10001)
    maximizer = grid[np.argmax(eval_curve(field, 0, 0, grid))]
    assert abs(maximizer - center) <= 1 / 14


def test_residual_orthogonal_to_basis(rng):
    volume = rng.random((15, 3, 4))
    field = fit_curves(volume, X15)
    fitted = np.stack([field.value(np.full((3, 4), x)) for x in X15])
    residual = (volume - fitted).reshape(15, -1)
    normal = design_matrix(X15, 8).T @ residual
    assert np.abs(normal).max() <= 1e-8 * np.abs(volume).max()


def test_monomial_evaluation():
    coeffs = np.zeros((1, 1, 9))
    coeffs[0, 0, :3] = [1, 2, 3]
    field = ContrastCurveField(coeffs, "monomial")
    assert eval_curve(field, 0, 0, 0.5) == pytest.approx(2.75)
    coeffs = np.zeros((1, 1, 9))
    coeffs[0, 0, 1] = 1.0
    field = ContrastCurveField(coeffs, "monomial")
    for x in (-0.2, 0.0, 0.4, 1.3):
        assert eval_curve_derivative(field, 0, 0, x) == pytest.approx(1.0)


@pytest.mark.parametrize("basis", ["chebyshev", "monomial"])
def test_derivative_matches_finite_difference(basis):
    rng = np.random.default_rng(11)
    field = ContrastCurveField(rng.normal(size=(2, 2, 9)), basis)
    f = lambda x: eval_curve(field, 1, 0, x)
    fd = central_difference(f, 0.3, 1e-5)
    assert eval_curve_derivative(field, 1, 0, 0.3) == pytest.approx(fd, rel=1e-6)


def test_too_few_samples():
    with pytest.raises(Underdetermined):
        fit_curves(np.zeros((8, 2, 2)), np.arange(8) / 7, degree=8)


def test_ill_conditioned_design():
    positions = np.array([0.0, 1e-9, 2e-9, 1.0])
    with pytest.raises(IllConditionedFit):
        fit_curves(np.zeros((4, 2, 2)), positions, degree=3)


def test_save_and_load_roundtrip(tmp_path, rng):
    field = fit_curves(rng.random((15, 3, 4)), X15)
    save_curves(field, tmp_path / "c.bin")
    loaded = load_curves(tmp_path / "c.bin")
    assert loaded.basis == field.basis
    np.testing.assert_array_equal(loaded.coeffs, field.coeffs)
    raw = (tmp_path / "c.bin").read_bytes()
    assert raw[:8] == b"VDFFCCF1" and len(raw) == 36 + 3 * 4 * 9 * 8


def test_vectorized_value_matches_pointwise(rng):
    field = fit_curves(rng.random((15, 3, 4)), X15)
    x = rng.random((3, 4))
    v, dv = field.value(x), field.derivative(x)
    for i in range(3):
        for j in range(4):
            assert v[i, j] == pytest.approx(eval_curve(field, i, j, x[i, j]), abs=1e-12)
            assert dv[i, j] == pytest.approx(eval_curve_derivative(field, i, j, x[i, j]), abs=1e-10)


coeff_vectors = arrays(np.float64, 9, elements=st.floats(-10, 10))


@given(coeff_vectors, st.floats(0.05, 0.95), st.sampled_from([1e-4, 1e-5]))
def test_derivative_is_finite_difference_limit(coeffs, x, h):
    field = ContrastCurveField(coeffs.reshape(1, 1, 9))
    fd = central_difference(lambda t: eval_curve(field, 0, 0, t), x, h)
    # O(h^2) truncation plus round-off of the differenced values
    scale = np.abs(coeffs).sum() * 2 ** 8
    assert abs(eval_curve_derivative(field, 0, 0, x) - fd) <= scale * (h ** 2 * 1e3 + 1e-16 / h) + 1e-9


@given(arrays(np.float64, 5, elements=st.floats(-5, 5)), st.integers(0, 8))
def test_fit_exact_for_low_degree(coeffs, degree):
    coeffs = coeffs[: min(degree + 1, 5)]
    samples = polynomial.polyval(X15, coeffs)[:, None, None]
    field = fit_curves(samples, X15, degree=8)
    fitted = eval_curve(field, 0, 0, X15)
    np.testing.assert_allclose(fitted, samples[:, 0, 0], atol=1e-9 * (1 + np.abs(coeffs).sum()))


@given(st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3))
def test_fit_is_equivariant_to_scaling(c):
    volume = np.random.default_rng(5).random((15, 2, 3))
    np.testing.assert_allclose(fit_curves(c * volume, X15).coeffs, c * fit_curves(volume, X15).coeffs,
                               rtol=1e-10, atol=1e-12 * abs(c))
