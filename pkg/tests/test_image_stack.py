import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from oracles import correlate_row_loop, mean_filter_loop, median_filter_loop
from vdff.errors import (
    InvalidKernel,
    InvalidWindow,
    MismatchedStack,
    StackReadError,
    TooFewSlices,
)
from vdff.image_stack import (
    FocalStack,
    convolve_1d_axis,
    load_stack,
    mean_filter,
    median_filter,
    read_image,
    resolve_stack_paths,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
fields = arrays(np.float64, st.tuples(st.integers(3, 9), st.integers(3, 9)), elements=finite)
windows = st.sampled_from([1, 3, 5, 7])


def save_gray(path, data, mode="L"):
    if mode == "L":
        Image.fromarray(np.asarray(data, dtype=np.uint8)).save(path)
    else:
        Image.fromarray(np.asarray(data, dtype=np.uint16)).save(path)


# -- FocalStack and loading ----------------------------------------------------

def test_uniform_positions_for_fifteen_slices():
    stack = FocalStack(np.zeros((15, 4, 4, 1)))
    np.testing.assert_allclose(stack.positions, np.arange(15) / 14)
    assert stack.n_slices == 15


def test_black_frames_form_a_valid_stack(tmp_path):
    paths = []
    for k in range(3):
        p = tmp_path / f"f{k}.png"
        save_gray(p, np.zeros((5, 6)))
        paths.append(p)
    stack = load_stack(paths)
    assert stack.images.shape == (3, 5, 6, 1)
    assert np.all(stack.images == 0)


def test_two_files_are_too_few(tmp_path):
    paths = []
    for k in range(2):
        p = tmp_path / f"f{k}.png"
        save_gray(p, np.zeros((5, 5)))
        paths.append(p)
    with pytest.raises(TooFewSlices):
        load_stack(paths)


def test_mismatched_dimensions(tmp_path):
    for k, shape in enumerate([(5, 5), (5, 5), (5, 6)]):
        save_gray(tmp_path / f"f{k}.png", np.zeros(shape))
    with pytest.raises(MismatchedStack):
        load_stack(tmp_path)


def test_unreadable_file(tmp_path):
    for k in range(3):
        (tmp_path / f"f{k}.png").write_bytes(b"not an image")
    with pytest.raises(StackReadError):
        load_stack(tmp_path)


def test_missing_source():
    with pytest.raises(StackReadError):
        resolve_stack_paths("/nonexistent/stack")


def test_bit_depth_normalization(tmp_path):
    save_gray(tmp_path / "a.png", np.full((4, 4), 255))
    save_gray(tmp_path / "b.png", np.full((4, 4), 65535), mode="I;16")
    assert np.all(read_image(tmp_path / "a.png") == 1.0)
    assert np.all(read_image(tmp_path / "b.png") == 1.0)
    save_gray(tmp_path / "c.png", np.full((4, 4), 51))
    np.testing.assert_allclose(read_image(tmp_path / "c.png"), 0.2)


def test_directory_order_is_lexicographic_and_manifest_order_is_kept(tmp_path):
    for name, value in [("b.png", 20), ("a.png", 10), ("c.png", 30)]:
        save_gray(tmp_path / name, np.full((4, 4), value))
    by_dir = load_stack(tmp_path)
    np.testing.assert_allclose(by_dir.images[:, 0, 0, 0] * 255, [10, 20, 30])
    manifest = tmp_path / "order.txt"
    manifest.write_text("# front to back\nc.png\n\nb.png\na.png\n")
    by_manifest = load_stack(manifest)
    np.testing.assert_allclose(by_manifest.images[:, 0, 0, 0] * 255, [30, 20, 10])


def test_stack_validation():
    with pytest.raises(ValueError):
        FocalStack(np.full((3, 4, 4, 1), 1.5))
    with pytest.raises(ValueError):
        FocalStack(np.zeros((3, 4, 4, 1)), positions=[0.0, 0.7, 0.5])
    with pytest.raises(ValueError):
        FocalStack(np.zeros((3, 4, 4, 1)), positions=[0.1, 0.5, 1.0])
    with pytest.raises(MismatchedStack):
        FocalStack(np.zeros((3, 2, 4, 1)))


def test_stack_arrays_are_read_only():
    stack = FocalStack(np.zeros((3, 4, 4, 1)))
    with pytest.raises(ValueError):
        stack.images[0, 0, 0, 0] = 1.0


# -- filters --------------------------------------------------------------------

def test_mean_filter_row_index_field():
    field = np.repeat(np.arange(3.0)[:, None], 3, axis=1)
    assert mean_filter(field, 3)[1, 1] == pytest.approx(1.0)


def test_mean_filter_matches_loop(rng):
    field = rng.normal(size=(7, 9))
    for w in (1, 3, 5):
        np.testing.assert_allclose(mean_filter(field, w), mean_filter_loop(field, w), atol=1e-12)


def test_median_filter_matches_loop(rng):
    field = rng.normal(size=(7, 8))
    for w in (3, 5):
        np.testing.assert_array_equal(median_filter(field, w), median_filter_loop(field, w))


def test_median_removes_impulse():
    field = np.zeros((5, 5))
    field[2, 2] = 100.0
    assert median_filter(field, 3)[2, 2] == 0.0


@pytest.mark.parametrize("f", [mean_filter, median_filter])
def test_window_validation(f):
    for w in (0, -1, 2, 4):
        with pytest.raises(InvalidWindow):
            f(np.zeros((4, 4)), w)


@pytest.mark.parametrize("f", [mean_filter, median_filter])
def test_unit_window_is_identity(f, rng):
    field = rng.normal(size=(5, 6))
    np.testing.assert_array_equal(f(field, 1), field)


def test_second_difference_of_ramp():
    ramp = np.arange(5.0)[None, :]
    out = convolve_1d_axis(ramp, [1, -2, 1], "x")
    # replicate padding: interior vanishes, the edges see a one-sided step
    np.testing.assert_array_equal(out[0, 1:-1], 0.0)
    np.testing.assert_array_equal(out[0], correlate_row_loop(ramp[0], [1, -2, 1]))
    assert out[0, 0] == 1.0 and out[0, -1] == -1.0


def test_convolve_matches_loop_on_both_axes(rng):
    field = rng.normal(size=(6, 7))
    kernel = [0.5, -1.0, 2.0, 0.25, 1.0]
    along_x = np.array([correlate_row_loop(row, kernel) for row in field])
    along_y = np.array([correlate_row_loop(col, kernel) for col in field.T]).T
    np.testing.assert_allclose(convolve_1d_axis(field, kernel, "x"), along_x, atol=1e-12)
    np.testing.assert_allclose(convolve_1d_axis(field, kernel, "y"), along_y, atol=1e-12)


def test_convolve_identity_and_constant(rng):
    field = rng.normal(size=(4, 5))
    np.testing.assert_array_equal(convolve_1d_axis(field, [1.0], "y"), field)
    np.testing.assert_array_equal(convolve_1d_axis(np.full((4, 5), 3.0), [1, -2, 1], "x"), 0.0)


def test_even_kernel_rejected():
    with pytest.raises(InvalidKernel):
        convolve_1d_axis(np.zeros((4, 4)), [1.0, -1.0], "x")


# -- properties -----------------------------------------------------------------

@given(fields, windows, finite)
def test_filters_commute_with_constant_shift(field, w, c):
    np.testing.assert_allclose(mean_filter(field + c, w), mean_filter(field, w) + c, atol=1e-8)
    np.testing.assert_allclose(median_filter(field + c, w), median_filter(field, w) + c, atol=1e-8)


@given(fields, windows, st.floats(-10, 10), st.floats(-10, 10))
def test_mean_filter_is_linear(field, w, a, b):
    other = np.flip(field)
    lhs = mean_filter(a * field + b * other, w)
    rhs = a * mean_filter(field, w) + b * mean_filter(other, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * (1 + np.abs(field).max() * 20))


@given(fields, windows)
def test_filters_preserve_shape_and_finiteness(field, w):
    for f in (mean_filter, median_filter):
        out = f(field, w)
        assert out.shape == field.shape and np.all(np.isfinite(out))
    out = convolve_1d_axis(field, [1, -2, 1], "y")
    assert out.shape == field.shape and np.all(np.isfinite(out))


@given(st.integers(3, 8), st.integers(3, 8), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_second_difference_annihilates_affine_interior(h, w, a, b, c):
    ii, jj = np.mgrid[0:h, 0:w]
    field = a * ii + b * jj + c
    np.testing.assert_allclose(convolve_1d_axis(field, [1, -2, 1], "x")[:, 1:-1], 0.0, atol=1e-9)
    np.testing.assert_allclose(convolve_1d_axis(field, [1, -2, 1], "y")[1:-1, :], 0.0, atol=1e-9)
