"""Per-pixel polynomial contrast curves.

Each pixel's contrast samples over the focus positions are approximated by a
least-squares polynomial (degree 8 by default). Fitting is done in a
Chebyshev basis on [0, 1] (through ``t = 2x - 1``) to keep the design matrix
well conditioned; one QR factorization is shared by all pixels.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev, polynomial
from scipy.linalg import solve_triangular

from .errors import IllConditionedFit, Underdetermined

BASES = ("chebyshev", "monomial")
DEFAULT_DEGREE = 8
MAX_CONDITION = 1e8

_MAGIC = b"VDFFCCF1"
_HEADER = struct.Struct("<8sIII16s")


@dataclass(frozen=True, eq=False)
class ContrastCurveField:
    """Polynomial contrast curve per pixel.

    ``coeffs`` has shape ``(H, W, degree + 1)``. With ``basis="chebyshev"``
    the polynomial at focus coordinate x is ``sum_n coeffs[n] T_n(2x - 1)``;
    with ``basis="monomial"`` it is ``sum_n coeffs[n] x**n``.
    """

    coeffs: np.ndarray
    basis: str = "chebyshev"

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 3:
            raise ValueError(f"coeffs must have shape (H, W, degree+1), got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_slope_cache", {})

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[:2]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    @cached_property
    def _derivative_coeffs(self) -> np.ndarray:
        if self.degree == 0:
            return np.zeros_like(self.coeffs)
        if self.basis == "chebyshev":
            # dT(2x-1)/dx picks up the factor 2 of the affine map
            return 2.0 * chebyshev.chebder(self.coeffs, axis=-1)
        return polynomial.polyder(self.coeffs, axis=-1)

    # coefficient planes (n, H, W) keep the per-term reads contiguous
    @cached_property
    def _planes(self) -> np.ndarray:
        return np.ascontiguousarray(np.moveaxis(self.coeffs, -1, 0))

    @cached_property
    def _derivative_planes(self) -> np.ndarray:
        return np.ascontiguousarray(np.moveaxis(self._derivative_coeffs, -1, 0))

    def value(self, x) -> np.ndarray:
        """Evaluate every pixel's curve at the matching entry of ``x`` (shape ``(H, W)``)."""
        return _evaluate_planes(self._planes, np.asarray(x, dtype=np.float64), self.basis)

    def derivative(self, x) -> np.ndarray:
        return _evaluate_planes(self._derivative_planes, np.asarray(x, dtype=np.float64), self.basis)

    def derivative_at(self, x: float) -> np.ndarray:
        """Every pixel's slope at one focus coordinate (cached per coordinate)."""
        x = float(x)
        if x not in self._slope_cache:
            self._slope_cache[x] = self.derivative(np.full(self.shape, x))
        return self._slope_cache[x]


def _evaluate_planes(planes, x, basis):
    if basis == "chebyshev":
        t = 2.0 * x - 1.0
        t2 = 2.0 * t
        b1 = np.zeros(np.broadcast_shapes(planes.shape[1:], t.shape))
        b2 = np.zeros_like(b1)
        for k in range(planes.shape[0] - 1, 0, -1):
            b1, b2 = planes[k] + t2 * b1 - b2, b1
        return planes[0] + t * b1 - b2
    out = np.zeros(np.broadcast_shapes(planes.shape[1:], x.shape))
    for k in range(planes.shape[0] - 1, -1, -1):
        out = out * x + planes[k]
    return out


def _evaluate(coeffs, x, basis):
    return _evaluate_planes(np.moveaxis(coeffs, -1, 0), x, basis)


def design_matrix(positions, degree: int) -> np.ndarray:
    """Chebyshev-Vandermonde matrix ``(S, degree + 1)`` for focus positions in [0, 1]."""
    return chebyshev.chebvander(2.0 * np.asarray(positions, dtype=np.float64) - 1.0, degree)


def fit_curves(volume: np.ndarray, positions, degree: int = DEFAULT_DEGREE,
               max_condition: float = MAX_CONDITION) -> ContrastCurveField:
    """Least-squares fit of a degree-``degree`` polynomial to every pixel's contrast samples.

    Parameters
    ----------
    volume : array ``(S, H, W)``
        Contrast samples.
    positions : array ``(S,)``
        Strictly increasing focus coordinates in [0, 1].
    degree : int
        Polynomial degree; requires ``S >= degree + 1``.
    max_condition : float
        Largest accepted 2-norm condition number of the design matrix.
    """
    volume = np.asarray(volume, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    n_slices = volume.shape[0]
    if positions.shape != (n_slices,):
        raise ValueError("one focus position per contrast slice required")
    if np.any(np.diff(positions) <= 0) or positions[0] < 0 or positions[-1] > 1:
        raise ValueError("positions must be strictly increasing within [0, 1]")
    if n_slices < degree + 1:
        raise Underdetermined(f"degree {degree} needs at least {degree + 1} samples, got {n_slices}")

    vander = design_matrix(positions, degree)
    cond = np.linalg.cond(vander)
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedFit(f"design matrix condition number {cond:.3g} exceeds {max_condition:.3g}")

    q, r = np.linalg.qr(vander)
    samples = volume.reshape(n_slices, -1)
    coeffs = solve_triangular(r, q.T @ samples)
    coeffs = coeffs.T.reshape(volume.shape[1], volume.shape[2], degree + 1)
    return ContrastCurveField(coeffs, "chebyshev")


def eval_curve(field: ContrastCurveField, i: int, j: int, x):
    """Contrast of pixel ``(i, j)`` at focus coordinate ``x`` (scalar or array)."""
    out = _evaluate(field.coeffs[i, j], np.asarray(x, dtype=np.float64), field.basis)
    return out if out.ndim else float(out)


def eval_curve_derivative(field: ContrastCurveField, i: int, j: int, x):
    out = _evaluate(field._derivative_coeffs[i, j], np.asarray(x, dtype=np.float64), field.basis)
    return out if out.ndim else float(out)


def save_curves(field: ContrastCurveField, path) -> None:
    """Binary dump: fixed header (magic, H, W, degree, basis tag) then row-major float64 coefficients."""
    h, w = field.shape
    header = _HEADER.pack(_MAGIC, h, w, field.degree, field.basis.encode("ascii"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<f8").tobytes())


def load_curves(path) -> ContrastCurveField:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, h, w, degree, tag = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path} is not a contrast curve dump")
    basis = tag.rstrip(b"\0").decode("ascii")
    coeffs = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return ContrastCurveField(coeffs.reshape(h, w, degree + 1).copy(), basis)
