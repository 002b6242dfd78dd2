"""Linearized ADMM for contrast-fidelity plus isotropic total variation.

Minimizes ``E(d) = -sum_ij c_ij(d_ij) + alpha * ||K d||_{2,1}`` where ``K`` is
the forward-difference gradient with Neumann boundary. With the splitting
``g = K d`` and scaled dual ``b`` one iteration reads

    d+ = (lam K^T K + I)^{-1} (lam K^T (g - b) + d - tau * grad D(d))
    g+ = shrink(K d+ + b, alpha * tau / lam)
    b+ = b + K d+ - g+

after which ``lam`` is multiplied by the growth factor and ``b`` divided by
it. Gradient fields are arrays of shape ``(2, H, W)`` holding ``(gx, gy)``.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import DivergenceDetected, HypothesisViolated, InvalidPenalty, InvalidThreshold

log = logging.getLogger(__name__)

LAMBDA_CAP = 1e6


# -- operators ---------------------------------------------------------------

def grad(d: np.ndarray) -> np.ndarray:
    """Forward differences; zero on the last column (x) and last row (y)."""
    d = np.asarray(d, dtype=np.float64)
    out = np.zeros((2,) + d.shape)
    out[0, :, :-1] = d[:, 1:] - d[:, :-1]
    out[1, :-1, :] = d[1:, :] - d[:-1, :]
    return out


def div(g: np.ndarray) -> np.ndarray:
    """Adjoint ``K^T`` of :func:`grad`, i.e. minus the discrete divergence.

    Satisfies ``<grad(d), g> == <d, div(g)>`` for all ``d`` and ``g``.
    """
    gx, gy = np.asarray(g[0], dtype=np.float64), np.asarray(g[1], dtype=np.float64)
    out = np.zeros(gx.shape)
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out


@lru_cache(maxsize=8)
def _laplacian_eigenvalues(n: int, m: int) -> np.ndarray:
    p = np.arange(n)[:, np.newaxis]
    q = np.arange(m)[np.newaxis, :]
    return 4.0 * np.sin(np.pi * p / (2 * n)) ** 2 + 4.0 * np.sin(np.pi * q / (2 * m)) ** 2


def dct_solve(rhs: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(lam K^T K + I) d = rhs`` with an orthonormal type-II DCT."""
    if not lam > 0:
        raise InvalidPenalty(f"penalty must be positive, got {lam}")
    rhs = np.asarray(rhs, dtype=np.float64)
    coeffs = fft.dctn(rhs, type=2, norm="ortho")
    coeffs /= 1.0 + lam * _laplacian_eigenvalues(*rhs.shape)
    return fft.idctn(coeffs, type=2, norm="ortho")


def shrink_iso(z: np.ndarray, threshold: float) -> np.ndarray:
    """Isotropic soft shrinkage: scale each ``(gx, gy)`` vector by ``max(|z| - t, 0) / |z|``."""
    if threshold < 0:
        raise InvalidThreshold(f"threshold must be nonnegative, got {threshold}")
    z = np.asarray(z, dtype=np.float64)
    norm = np.sqrt(z[0] ** 2 + z[1] ** 2)
    scale = np.zeros_like(norm)
    nz = norm > threshold
    scale[nz] = (norm[nz] - threshold) / norm[nz]
    return z * scale


# -- energies ----------------------------------------------------------------

BOUNDARY_MODES = ("clamp", "restoring")


def _clamp(d, clamp):
    return d if clamp is None else np.clip(d, clamp[0], clamp[1])


def tv_energy(d: np.ndarray) -> float:
    g = grad(d)
    return float(np.sum(np.sqrt(g[0] ** 2 + g[1] ** 2)))


def data_energy(d: np.ndarray, curves, clamp=(0.0, 1.0), boundary: str = "clamp") -> float:
    """``-sum c_ij(d_ij)`` with the curves evaluated at the clamped depth.

    With ``boundary="restoring"`` the term grows linearly outside the clamp
    range wherever the boundary slope points back inside, so that leaving
    the range never lowers the energy (see :func:`grad_data`).
    """
    d = np.asarray(d, dtype=np.float64)
    value = -np.sum(curves.value(_clamp(d, clamp)))
    if boundary == "restoring" and clamp is not None:
        lo, hi = clamp
        slope_lo = curves.derivative_at(lo)
        slope_hi = curves.derivative_at(hi)
        value += np.sum(np.maximum(slope_lo, 0.0) * np.maximum(lo - d, 0.0))
        value += np.sum(np.maximum(-slope_hi, 0.0) * np.maximum(d - hi, 0.0))
    elif boundary not in BOUNDARY_MODES:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return float(value)


def energy(d: np.ndarray, curves, alpha: float, clamp=(0.0, 1.0), boundary: str = "clamp") -> float:
    return data_energy(d, curves, clamp, boundary) + alpha * tv_energy(d)


def grad_data(d: np.ndarray, curves, clamp=(0.0, 1.0), boundary: str = "clamp") -> np.ndarray:
    """Gradient of the data term, evaluated at the clamped depth.

    ``boundary="clamp"`` extends the boundary gradient unchanged outside the
    range. ``boundary="restoring"`` keeps only the part that pushes the depth
    back into the range; otherwise a boundary slope pointing outward drives
    the iterate off to infinity.
    """
    d = np.asarray(d, dtype=np.float64)
    g = -curves.derivative(_clamp(d, clamp))
    if boundary == "restoring" and clamp is not None:
        g = np.where(d < clamp[0], np.minimum(g, 0.0), g)
        g = np.where(d > clamp[1], np.maximum(g, 0.0), g)
    elif boundary not in BOUNDARY_MODES:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return g


# -- solver ------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.25
    tau: float = 8.0
    lambda0: float = 1.0
    lambda_growth: float = 1.02
    iterations: int = 400
    clamp_range: tuple[float, float] | None = (0.0, 1.0)
    lambda_max: float = LAMBDA_CAP
    # iterate in units where the focus range [0, 1] spans [0, depth_scale]
    depth_scale: float = 400.0
    # rescale contrast so the 90th percentile of per-pixel ranges equals this; None keeps raw MLAP
    contrast_normalization: float | None = 80.0
    boundary: str = "restoring"
    # initialization: MLAP window for the argmax estimate, then a mean blur
    init_window: int = 15
    init_blur: int = 21

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.lambda0 > 0:
            raise InvalidPenalty(f"lambda0 must be positive, got {self.lambda0}")
        if not self.lambda_growth >= 1:
            raise ValueError(f"lambda_growth must be >= 1, got {self.lambda_growth}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations}")
        if not self.depth_scale > 0:
            raise ValueError(f"depth_scale must be positive, got {self.depth_scale}")
        if self.contrast_normalization is not None and not self.contrast_normalization > 0:
            raise ValueError("contrast_normalization must be positive or None")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        if self.clamp_range is not None and not self.clamp_range[0] < self.clamp_range[1]:
            raise ValueError(f"invalid clamp range {self.clamp_range}")
        for w in (self.init_window, self.init_blur):
            if w < 1 or w % 2 == 0:
                raise ValueError(f"initialization windows must be positive and odd, got {w}")


@dataclass(frozen=True)
class SolverState:
    d: np.ndarray
    g: np.ndarray
    b: np.ndarray
    lam: float
    k: int = 0

    def __post_init__(self):
        if self.g.shape != (2,) + self.d.shape or self.b.shape != self.g.shape:
            raise ValueError("d, g and b dimensions disagree")

    @classmethod
    def initial(cls, d0: np.ndarray, lam: float) -> "SolverState":
        d0 = np.asarray(d0, dtype=np.float64).copy()
        return cls(d0, grad(d0), np.zeros((2,) + d0.shape), float(lam), 0)


@dataclass
class Diagnostics:
    """Per-iteration records; row ``k`` describes the state after iteration ``k + 1``."""

    initial_energy: float = float("nan")
    energy: list = field(default_factory=list)
    iterate_change_sq: list = field(default_factory=list)
    split_residual_sq: list = field(default_factory=list)
    lam: list = field(default_factory=list)

    def record(self, e, change, split, lam):
        self.energy.append(e)
        self.iterate_change_sq.append(change)
        self.split_residual_sq.append(split)
        self.lam.append(lam)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {
            "energy": np.asarray(self.energy),
            "iterate_change_sq": np.asarray(self.iterate_change_sq),
            "split_residual_sq": np.asarray(self.split_residual_sq),
            "lambda": np.asarray(self.lam),
        }

    def decay_series(self) -> dict[str, np.ndarray]:
        """log10 of the energy gap to the lowest energy seen, the iterate change and the split residual."""
        a = self.as_arrays()
        energy = a["energy"]
        floor = np.finfo(float).eps * max(abs(self.initial_energy), 1.0)
        tiny = np.finfo(float).tiny
        return {
            "log10_energy_gap": np.log10(energy - energy.min() + floor),
            "log10_iterate_change": np.log10(np.maximum(a["iterate_change_sq"], tiny)),
            "log10_split_residual": np.log10(np.maximum(a["split_residual_sq"], tiny)),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "energy", "iterate_change_sq", "split_residual_sq", "lambda"])
            for k, row in enumerate(zip(self.energy, self.iterate_change_sq,
                                        self.split_residual_sq, self.lam), start=1):
                writer.writerow([k] + [repr(float(v)) for v in row])


def _check_finite(state: SolverState, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceDetected(f"non-finite iterate at iteration {state.k + 1}", state)


def solver_gradient(d: np.ndarray, curves, config: SolverConfig) -> np.ndarray:
    """Data-term gradient with respect to a depth in solver units."""
    scale = config.depth_scale
    return grad_data(d / scale, curves, config.clamp_range, config.boundary) / scale


def solver_energy(d: np.ndarray, curves, config: SolverConfig) -> float:
    """Energy of a depth in solver units (TV measured in solver units)."""
    return (data_energy(d / config.depth_scale, curves, config.clamp_range, config.boundary)
            + config.alpha * tv_energy(d))


def admm_step(state: SolverState, curves, config: SolverConfig) -> SolverState:
    """One linearized-ADMM iteration followed by the penalty update.

    ``state`` holds depths in solver units (``config.depth_scale`` times the
    normalized focus coordinate).
    """
    lam = state.lam
    grad_d = solver_gradient(state.d, curves, config)
    rhs = lam * div(state.g - state.b) + state.d - config.tau * grad_d
    d = dct_solve(rhs, lam)
    kd = grad(d)
    g = shrink_iso(kd + state.b, config.alpha * config.tau / lam)
    b = state.b + kd - g
    _check_finite(state, d, g, b)

    growth = config.lambda_growth if lam < config.lambda_max else 1.0
    return SolverState(d, g, b / growth, lam * growth, state.k + 1)


def run_admm(curves, d0: np.ndarray, config: SolverConfig, state: SolverState | None = None,
             callback=None) -> tuple[SolverState, Diagnostics]:
    """Iterate :func:`admm_step` ``config.iterations`` times.

    Starts from ``state`` if given, else from the normalized depth ``d0``.
    The returned state and all diagnostics are in solver units.
    """
    if state is None:
        state = SolverState.initial(np.asarray(d0, dtype=np.float64) * config.depth_scale,
                                    config.lambda0)
    diag = Diagnostics(initial_energy=solver_energy(state.d, curves, config))
    for _ in range(config.iterations):
        new = admm_step(state, curves, config)
        change = float(np.sum((new.d - state.d) ** 2) + np.sum((new.g - state.g) ** 2))
        split = float(np.sum((grad(new.d) - new.g) ** 2))
        diag.record(solver_energy(new.d, curves, config), change, split, state.lam)
        if callback is not None:
            callback(state, new)
        state = new
    return state, diag


def initial_depth(volume: np.ndarray, positions, config: SolverConfig) -> np.ndarray:
    """Refined argmax of the windowed MLAP volume, blurred with a mean filter."""
    from .classical import baseline_from_volume
    from .image_stack import mean_filter

    depth = baseline_from_volume(volume, positions, config.init_window, None)
    return mean_filter(depth, config.init_blur)


def contrast_scale(volume: np.ndarray, target: float | None) -> float:
    """Factor that maps the 90th percentile of per-pixel contrast ranges to ``target``."""
    if target is None:
        return 1.0
    volume = np.asarray(volume)
    spread = float(np.percentile(volume.max(axis=0) - volume.min(axis=0), 90))
    return target / spread if spread > 0 else 1.0


def prepare_curves(volume: np.ndarray, positions, config: SolverConfig, degree: int = 8):
    """Normalize the contrast volume and fit the per-pixel curves; returns ``(curves, factor)``."""
    from .polyfit import fit_curves

    factor = contrast_scale(volume, config.contrast_normalization)
    return fit_curves(np.asarray(volume) * factor, positions, degree), factor


def solve(source, config: SolverConfig = SolverConfig(), init: np.ndarray | None = None,
          degree: int = 8) -> tuple[np.ndarray, Diagnostics]:
    """Reconstruct a normalized depth map from a FocalStack or from fitted curves.

    From a stack, contrast is computed, normalized and fitted, and the
    initial depth is the blurred windowed-MLAP estimate. Curves are used
    as given and then ``init`` (normalized depth) is required. Returns the
    final depth clamped to ``config.clamp_range`` and the diagnostics.
    """
    from .contrast import mlap
    from .image_stack import FocalStack

    if isinstance(source, FocalStack):
        volume = mlap(source)
        curves, _ = prepare_curves(volume, source.positions, config, degree)
        if init is None:
            init = initial_depth(volume, source.positions, config)
    else:
        curves = source
        if init is None:
            raise ValueError("an initial depth map is required when solving from curves")
    state, diag = run_admm(curves, init, config)
    return _clamp(state.d / config.depth_scale, config.clamp_range), diag


# -- convex mode ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticCurves:
    """Concave parabolas ``c(x) = -curvature/2 * (x - center)**2`` per pixel."""

    center: np.ndarray
    curvature: np.ndarray

    def value(self, x):
        return -0.5 * self.curvature * (np.asarray(x) - self.center) ** 2

    def derivative(self, x):
        return -self.curvature * (np.asarray(x) - self.center)

    def derivative_at(self, x: float):
        return self.derivative(np.full(np.shape(self.center), float(x)))


@dataclass
class ConvexReport:
    """Rate quantities of a convex-mode run; index ``k - 1`` holds iteration ``k``."""

    bregman: np.ndarray
    split: np.ndarray
    reference: SolverState
    final: SolverState
    iterates: list

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, len(self.bregman) + 1)

    def scaled_bregman(self) -> np.ndarray:
        return self.k * self.bregman

    def scaled_split(self) -> np.ndarray:
        return self.k * self.split

    def slopes(self, k_min: int = 10, k_max: int | None = None) -> tuple[float, float]:
        """Least-squares slopes of ``log(k * value)`` against ``log k`` on ``[k_min, k_max]``."""
        return (loglog_slope(self.scaled_bregman(), k_min, k_max),
                loglog_slope(self.scaled_split(), k_min, k_max))


def loglog_slope(values, k_min: int = 10, k_max: int | None = None) -> float:
    values = np.asarray(values, dtype=np.float64)
    k = np.arange(1, len(values) + 1)
    k_max = len(values) if k_max is None else k_max
    sel = (k >= k_min) & (k <= k_max)
    y = np.log(np.maximum(values[sel], np.finfo(float).tiny))
    return float(np.polyfit(np.log(k[sel]), y, 1)[0])


def _r_subgradient(state: SolverState, config: SolverConfig) -> np.ndarray:
    # g-update optimality: alpha * tau * q = lam * b_new
    return state.lam * state.b / (config.alpha * config.tau)


def solve_convex_mode(curves: QuadraticCurves, config: SolverConfig, d0: np.ndarray | None = None,
                      state: SolverState | None = None, reference_factor: int = 10,
                      keep_iterates: bool = False) -> ConvexReport:
    """Run the iteration on a convex quadratic data term and measure the convergence rates.

    The reference solution comes from a run ``reference_factor`` times longer.
    Reported per iteration ``k``: ``S_D(d^k, d_ref) + alpha * S_R(g^k, K d_ref)``
    and ``||K d^{k+1} - g^k||^2``.
    """
    config = replace(config, lambda_growth=1.0, clamp_range=None, depth_scale=1.0)
    lipschitz = float(np.max(curves.curvature))
    if np.min(curves.curvature) < 0:
        raise ValueError("convex mode needs nonnegative curvature everywhere")
    # the symmetric Bregman distance of D is curvature * |d - v|^2, bounded by |d - v|^2 / (2 tau)
    if config.tau * lipschitz > 0.5:
        warnings.warn(f"tau * L = {config.tau * lipschitz:.3g} exceeds 1/2; "
                      "the convergence guarantee does not apply", HypothesisViolated, stacklevel=2)
    if state is None:
        if d0 is None:
            d0 = np.zeros(curves.center.shape)
        state = SolverState.initial(d0, config.lambda0)

    ref_config = replace(config, iterations=config.iterations * reference_factor)
    reference, _ = run_admm(curves, None, ref_config, state=state)
    d_ref, g_ref = reference.d, grad(reference.d)
    grad_ref = -curves.derivative(d_ref)
    q_ref = _r_subgradient(reference, config) if config.alpha > 0 else None

    bregman, split, iterates = [], [], []
    current = state
    for _ in range(config.iterations + 1):
        nxt = admm_step(current, curves, config)
        if current.k >= 1:
            s_d = float(np.sum((current.d - d_ref) * (-curves.derivative(current.d) - grad_ref)))
            s_r = 0.0
            if q_ref is not None:
                s_r = float(np.sum((current.g - g_ref) * (_r_subgradient(current, config) - q_ref)))
            bregman.append(s_d + config.alpha * s_r)
            split.append(float(np.sum((grad(nxt.d) - current.g) ** 2)))
            if keep_iterates:
                iterates.append(current.d)
        current = nxt
    return ConvexReport(np.asarray(bregman), np.asarray(split), reference, current, iterates)
