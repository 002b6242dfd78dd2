"""Synthetic focal stacks with known depth, and depth-map scoring.

A texture is blurred per pixel with a Gaussian whose width grows linearly
with the distance between the slice's focus position and the true depth,
then corrupted by intensity-dependent plus intensity-independent Gaussian
noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .errors import InvalidShape
from .image_stack import FocalStack, uniform_positions

SHAPES = ("cone", "plane", "cosine", "sphere")
# the TBB shipped here is too old for numba; prefer OpenMP for the render kernel
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

MIN_SIGMA = 0.3
TRUNCATE = 4.0


@dataclass(frozen=True)
class SceneSpec:
    shape: str = "cone"
    dims: tuple[int, int] = (128, 128)
    n_slices: int = 15
    noise_a: float = 1e-4
    noise_b: float = 1e-5
    psf_gain: float = 6.0
    seed: int = 0
    texture: np.ndarray | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidShape(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.n_slices < 3:
            raise ValueError("a scene needs at least 3 slices")
        if self.noise_a < 0 or self.noise_b < 0:
            raise ValueError("noise variances must be nonnegative")
        if not self.psf_gain > 0:
            raise ValueError("psf_gain must be positive")
        if self.texture is not None and np.asarray(self.texture).shape[:2] != tuple(self.dims):
            raise ValueError("texture dimensions must match dims")

    def seeds(self) -> list[np.random.SeedSequence]:
        """Independent streams: ``[texture, slice 0, ..., slice S-1]``."""
        return np.random.SeedSequence(self.seed).spawn(self.n_slices + 1)


def make_texture(dims, seed) -> np.ndarray:
    """Grayscale texture ``(H, W, 1)``: fine noise under a slowly varying amplitude.

    The amplitude has a floor of 0.1 so that some large patches carry only
    weak texture, where windowed estimators become unreliable.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(seed))
    h, w = dims
    fine = ndimage.gaussian_filter(rng.standard_normal((h, w)), 0.8, mode="reflect")
    fine /= fine.std()
    amplitude = ndimage.gaussian_filter(rng.standard_normal((h, w)), 10.0, mode="reflect")
    amplitude = np.clip(0.5 + 0.5 * amplitude / amplitude.std(), 0.1, 1.0)
    return np.clip(0.5 + 0.12 * amplitude * fine, 0.0, 1.0)[..., np.newaxis]


def make_depth(shape: str, dims) -> np.ndarray:
    """Ground-truth depth in [0, 1] for one of the benchmark shapes."""
    h, w = dims
    if h < 16 or w < 16:
        raise ValueError(f"scenes must be at least 16x16, got {h}x{w}")
    ii, jj = np.mgrid[0:h, 0:w].astype(np.float64)
    if shape == "cone":
        r = np.hypot(ii - h // 2, jj - w // 2)
        return np.clip(1.0 - r / (min(h, w) / 2.0), 0.0, 1.0)
    if shape == "plane":
        return 0.5 * (ii / (h - 1) + jj / (w - 1))
    if shape == "cosine":
        return 0.5 + 0.5 * np.cos(2.0 * np.pi * jj / (w - 1))
    if shape == "sphere":
        radius = min(h, w) / 2.0
        r2 = (ii - h // 2) ** 2 + (jj - w // 2) ** 2
        return np.sqrt(np.clip(radius ** 2 - r2, 0.0, None)) / radius
    raise InvalidShape(f"unknown shape {shape!r}; expected one of {SHAPES}")


@numba.njit(parallel=True, cache=True)
def _varying_gaussian_blur(image, sigma, min_sigma, truncate):
    h, w, c = image.shape
    out = np.empty_like(image)
    for i in numba.prange(h):
        for j in range(w):
            s = sigma[i, j]
            if s < min_sigma:
                for ch in range(c):
                    out[i, j, ch] = image[i, j, ch]
                continue
            r = int(math.ceil(truncate * s))
            weights = np.empty(2 * r + 1)
            for t in range(2 * r + 1):
                dt = t - r
                weights[t] = math.exp(-0.5 * dt * dt / (s * s))
            acc = np.zeros(c)
            total = 0.0
            for a in range(2 * r + 1):
                ii = min(max(i + a - r, 0), h - 1)
                wy = weights[a]
                for bb in range(2 * r + 1):
                    jj = min(max(j + bb - r, 0), w - 1)
                    wgt = wy * weights[bb]
                    total += wgt
                    for ch in range(c):
                        acc[ch] += wgt * image[ii, jj, ch]
            for ch in range(c):
                out[i, j, ch] = acc[ch] / total
    return out


def blur_slice(texture: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Per-pixel Gaussian blur (truncated at 4 sigma, unit sum, replicate border)."""
    texture = np.ascontiguousarray(texture, dtype=np.float64)
    if texture.ndim == 2:
        texture = texture[..., np.newaxis]
    return _varying_gaussian_blur(texture, np.ascontiguousarray(sigma, dtype=np.float64),
                                  MIN_SIGMA, TRUNCATE)


def render_stack(spec: SceneSpec, gt: np.ndarray | None = None) -> FocalStack:
    """Render the defocused, noisy focal stack of a scene."""
    seeds = spec.seeds()
    texture = spec.texture
    if texture is None:
        texture = make_texture(spec.dims, seeds[0])
    texture = np.asarray(texture, dtype=np.float64)
    if texture.ndim == 2:
        texture = texture[..., np.newaxis]
    if gt is None:
        gt = make_depth(spec.shape, spec.dims)

    positions = uniform_positions(spec.n_slices)
    slices = []
    for k, x in enumerate(positions):
        sl = blur_slice(texture, spec.psf_gain * np.abs(x - gt))
        if spec.noise_a > 0 or spec.noise_b > 0:
            rng = np.random.Generator(np.random.Philox(seeds[k + 1]))
            std = np.sqrt(spec.noise_a * sl + spec.noise_b)
            sl = sl + std * rng.standard_normal(sl.shape)
        slices.append(np.clip(sl, 0.0, 1.0))
    return FocalStack(np.stack(slices), positions)


def score(est: np.ndarray, gt: np.ndarray, n_slices: int | None = None,
          units: str = "slices") -> tuple[float, float]:
    """(MSE, RMSE) of a depth estimate; ``units="slices"`` scales errors by ``S - 1``."""
    est, gt = np.asarray(est, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    err = est - gt
    if units == "slices":
        if n_slices is None:
            raise ValueError("slice units need the slice count")
        err = err * (n_slices - 1)
    elif units != "normalized":
        raise ValueError(f"unknown units {units!r}")
    mse = float(np.mean(err ** 2))
    return mse, math.sqrt(mse)
