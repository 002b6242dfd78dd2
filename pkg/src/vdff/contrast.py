"""Modified-Laplacian (MLAP) contrast volume and its windowed filtering.

A contrast volume is a plain array of shape ``(S, H, W)``.
"""
from __future__ import annotations

import numpy as np

from .image_stack import FocalStack, convolve_1d_axis, mean_filter

SECOND_DIFFERENCE = np.array([1.0, -2.0, 1.0])


def mlap_image(image: np.ndarray) -> np.ndarray:
    """MLAP of one ``(H, W, C)`` image, summed over channels."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., np.newaxis]
    out = np.zeros(image.shape[:2])
    for ch in range(image.shape[2]):
        plane = image[..., ch]
        out += np.abs(convolve_1d_axis(plane, SECOND_DIFFERENCE, "x"))
        out += np.abs(convolve_1d_axis(plane, SECOND_DIFFERENCE, "y"))
    return out


def mlap(stack: FocalStack) -> np.ndarray:
    """Contrast volume ``(S, H, W)``: sum over channels of |d_xx I| + |d_yy I|."""
    return np.stack([mlap_image(im) for im in stack.images])


def filter_contrast(volume: np.ndarray, window: int) -> np.ndarray:
    """Mean-filter every slice of the volume independently."""
    return np.stack([mean_filter(sl, window) for sl in np.asarray(volume)])


def contrast_slice_image(volume: np.ndarray, k: int) -> np.ndarray:
    """Slice ``k`` min-max normalized to 8-bit grayscale, for inspection."""
    sl = np.asarray(volume[k], dtype=np.float64)
    lo, hi = sl.min(), sl.max()
    scaled = (sl - lo) / (hi - lo) if hi > lo else np.zeros_like(sl)
    return np.round(scaled * 255.0).astype(np.uint8)
