"""Windowed-argmax depth from focus baselines."""
from __future__ import annotations

import numpy as np

from .contrast import filter_contrast, mlap
from .image_stack import FocalStack, median_filter

# named baseline configurations: (contrast window, median window)
PRESETS = {
    "mlap1": (9, None),
    "mlap2": (41, 11),
}


def argmax_index(volume: np.ndarray) -> np.ndarray:
    """Slice index of maximal contrast per pixel; ties go to the smallest index."""
    return np.argmax(np.asarray(volume), axis=0)


def argmax_depth(volume: np.ndarray, positions) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64)
    return positions[argmax_index(volume)]


def gaussian_3pt_refine(volume: np.ndarray, positions, kstar: np.ndarray | None = None) -> np.ndarray:
    """Subslice depth from a Gaussian (log-parabola) through the peak and its two neighbours.

    Pixels whose peak sits on the first or last slice, whose three stencil
    values are not all positive, or whose peak is not a strict local maximum
    keep the unrefined depth ``positions[kstar]``.
    """
    volume = np.asarray(volume, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    n_slices = volume.shape[0]
    if kstar is None:
        kstar = argmax_index(volume)
    depth = positions[kstar]

    k = np.clip(kstar, 1, n_slices - 2)
    c_prev = np.take_along_axis(volume, (k - 1)[np.newaxis], axis=0)[0]
    c_mid = np.take_along_axis(volume, k[np.newaxis], axis=0)[0]
    c_next = np.take_along_axis(volume, (k + 1)[np.newaxis], axis=0)[0]

    ok = (kstar >= 1) & (kstar <= n_slices - 2)
    ok &= (c_prev > 0) & (c_mid > 0) & (c_next > 0)
    ok &= (c_mid > c_prev) & (c_mid > c_next)

    # vertex of the parabola through (x_{k-1}, log c), (x_k, log c), (x_{k+1}, log c)
    x_prev, x_mid, x_next = positions[k - 1], positions[k], positions[k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        l_prev, l_mid, l_next = np.log(c_prev), np.log(c_mid), np.log(c_next)
        h_prev, h_next = x_mid - x_prev, x_mid - x_next
        num = h_prev ** 2 * (l_mid - l_next) - h_next ** 2 * (l_mid - l_prev)
        den = h_prev * (l_mid - l_next) - h_next * (l_mid - l_prev)
        shift = -0.5 * num / den
    ok &= np.isfinite(shift)
    return np.where(ok, depth + np.where(ok, shift, 0.0), depth)


def baseline_from_volume(volume: np.ndarray, positions, contrast_window: int = 9,
                         median_window: int | None = None) -> np.ndarray:
    filtered = filter_contrast(volume, contrast_window)
    depth = gaussian_3pt_refine(filtered, positions)
    if median_window is not None:
        depth = median_filter(depth, median_window)
    return depth


def baseline_pipeline(stack: FocalStack, contrast_window: int = 9,
                      median_window: int | None = None) -> np.ndarray:
    """MLAP, windowed mean filtering, refined argmax, optional median on the depth map."""
    return baseline_from_volume(mlap(stack), stack.positions, contrast_window, median_window)
