"""Focal stack container, image loading and the 2-D filtering primitives.

All filters use replicate (clamp-to-edge) padding so that image borders do
not produce artificial contrast.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import (
    InvalidKernel,
    InvalidWindow,
    MismatchedStack,
    StackReadError,
    TooFewSlices,
)

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm", ".tif", ".tiff")


@dataclass(frozen=True)
class FocalStack:
    """Co-registered images ordered front-to-back by focus setting.

    ``images`` has shape ``(S, H, W, C)`` with intensities in [0, 1];
    ``positions`` holds the normalized focus coordinate of every slice.
    """

    images: np.ndarray
    positions: np.ndarray = field(default=None)

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim == 3:
            images = images[..., np.newaxis]
        if images.ndim != 4:
            raise MismatchedStack(f"expected (S, H, W, C) images, got shape {images.shape}")
        n_slices, height, width, _ = images.shape
        if n_slices < 3:
            raise TooFewSlices(f"a focal stack needs at least 3 slices, got {n_slices}")
        if height < 3 or width < 3:
            raise MismatchedStack(f"images must be at least 3x3, got {height}x{width}")
        if not np.all(np.isfinite(images)):
            raise ValueError("image samples must be finite")
        if images.min() < 0.0 or images.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")

        if self.positions is None:
            positions = uniform_positions(n_slices)
        else:
            positions = np.asarray(self.positions, dtype=np.float64)
            if positions.shape != (n_slices,):
                raise MismatchedStack("one focus position per slice required")
            if np.any(np.diff(positions) <= 0):
                raise ValueError("focus positions must be strictly increasing")
            if positions[0] != 0.0 or positions[-1] != 1.0:
                raise ValueError("focus positions must start at 0 and end at 1")
        images.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "positions", positions)

    @property
    def n_slices(self) -> int:
        return self.images.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.images.shape[1:3]

    @property
    def channels(self) -> int:
        return self.images.shape[3]


def uniform_positions(n_slices: int) -> np.ndarray:
    return np.arange(n_slices, dtype=np.float64) / (n_slices - 1)


def read_image(path) -> np.ndarray:
    """Read one image file as a float array ``(H, W, C)`` scaled to [0, 1]."""
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("P", "PA", "LA", "RGBA", "CMYK", "YCbCr", "1"):
                im = im.convert("RGB" if mode not in ("LA", "1") else "L")
                mode = im.mode
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise StackReadError(f"cannot read image {path}: {exc}") from exc

    if mode.startswith("I;16") or mode == "I":
        data = arr.astype(np.float64) / 65535.0
    elif mode == "F":
        data = arr.astype(np.float64)
    elif arr.dtype == np.uint8:
        data = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        data = arr.astype(np.float64) / 65535.0
    else:
        data = arr.astype(np.float64)
    if data.ndim == 2:
        data = data[..., np.newaxis]
    return np.clip(data, 0.0, 1.0)


def resolve_stack_paths(source) -> list[Path]:
    """Expand a directory (lexicographic order) or a manifest file into image paths.

    A manifest lists one path per line; relative paths are resolved against
    the manifest's directory. Blank lines and ``#`` comments are ignored.
    """
    source = Path(source)
    if source.is_dir():
        paths = sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    elif source.is_file():
        paths = []
        for line in source.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            p = Path(line)
            paths.append(p if p.is_absolute() else source.parent / p)
    else:
        raise StackReadError(f"stack source {source} does not exist")
    return paths


def load_stack(paths: Sequence[os.PathLike] | os.PathLike, positions=None) -> FocalStack:
    """Load an ordered list of image files (or a directory / manifest) as a FocalStack."""
    if isinstance(paths, (str, os.PathLike)):
        paths = resolve_stack_paths(paths)
    paths = list(paths)
    if len(paths) < 3:
        raise TooFewSlices(f"a focal stack needs at least 3 images, got {len(paths)}")
    images = [read_image(p) for p in paths]
    first = images[0].shape
    for p, im in zip(paths, images):
        if im.shape != first:
            raise MismatchedStack(f"{p} has shape {im.shape}, expected {first}")
    return FocalStack(np.stack(images), positions)


def check_window(window: int) -> int:
    if int(window) != window or window < 1 or window % 2 == 0:
        raise InvalidWindow(f"window must be a positive odd integer, got {window}")
    return int(window)


def mean_filter(field: np.ndarray, window: int) -> np.ndarray:
    """Mean over a ``window x window`` neighbourhood, replicate padding."""
    window = check_window(window)
    field = np.asarray(field, dtype=np.float64)
    if window == 1:
        return field.copy()
    return ndimage.uniform_filter(field, size=window, mode="nearest")


def median_filter(field: np.ndarray, window: int) -> np.ndarray:
    window = check_window(window)
    field = np.asarray(field, dtype=np.float64)
    if window == 1:
        return field.copy()
    return ndimage.median_filter(field, size=window, mode="nearest")


def convolve_1d_axis(field: np.ndarray, kernel, axis: str) -> np.ndarray:
    """Correlate ``field`` with an odd-length 1-D kernel along ``axis``.

    ``axis`` is ``"x"`` (along columns) or ``"y"`` (along rows). The kernel is
    applied as a correlation, i.e. ``out[j] = sum_t kernel[t] * field[j + t - r]``.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.size % 2 == 0:
        raise InvalidKernel(f"kernel must be 1-D with odd length, got {kernel.shape}")
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    field = np.asarray(field, dtype=np.float64)
    return ndimage.correlate1d(field, kernel, axis=1 if axis == "x" else 0, mode="nearest")
