"""
Polar Averaging for bklab
Angular averaging of the main term, radial smoothing of profiles, frequency
averaging and the combined reconstruction
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config import config
from src.averaging.mollifier import MollifierSpec, mollify
from src.fields.field_core import Grid2, PolarTable, RadialProfile, ScalarField, to_polar
from src.oscillatory_engine import (
    AveragedChirpKernel, BesselKernel, EngineConfig, FreqAveragedBesselKernel,
    PhaseContext, ReconstructionEngine,
)
from src.phantoms.phantom_generator import rotate_field
from src.utils.errors import CoverageError
from src.utils.logger import setup_logger
from src.utils.parallel import ordered_map, pairwise_sum

logger = setup_logger(__name__)

ANGULAR_PATHS = ("fast", "reference")

# Frequency samples required inside [lambda, 2 lambda]
MIN_FREQ_SAMPLES = 32

# Number of radial smoothing steps after the angular mean
PIPELINE_STEPS = 3


@dataclass(frozen=True)
class AveragingParams:
    """Quadrature counts for the averaging procedures and the sigma search grid"""
    n_angles: int = field(default_factory=lambda: config.N_ANGLES)
    n_srad: int = field(default_factory=lambda: config.N_SRAD)
    freq_depth: int = field(default_factory=lambda: config.FREQ_DEPTH)
    sigma_grid: Optional[Tuple[float, ...]] = None
    n_radii: int = field(default_factory=lambda: config.N_RADII)
    angular_path: str = "fast"

    def __post_init__(self):
        if self.n_angles < 8 or self.n_angles % 2:
            raise ValueError(f"n_angles must be even and at least 8, got {self.n_angles}")
        if self.n_srad < 8:
            raise ValueError(f"n_srad must be at least 8, got {self.n_srad}")
        if self.freq_depth < 0:
            raise ValueError(f"freq_depth must be non-negative, got {self.freq_depth}")
        if self.n_radii < 2:
            raise ValueError(f"n_radii must be at least 2, got {self.n_radii}")
        if self.angular_path not in ANGULAR_PATHS:
            raise ValueError(f"Unknown angular path '{self.angular_path}', expected one of {ANGULAR_PATHS}")
        if self.sigma_grid is not None:
            grid = tuple(float(s) for s in self.sigma_grid)
            if not grid or min(grid) <= 0:
                raise ValueError("sigma_grid must be a nonempty list of positive widths")
            object.__setattr__(self, "sigma_grid", grid)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_angles": self.n_angles,
            "n_srad": self.n_srad,
            "freq_depth": self.freq_depth,
            "sigma_grid": list(self.sigma_grid) if self.sigma_grid is not None else None,
            "n_radii": self.n_radii,
            "angular_path": self.angular_path,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AveragingParams":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if known.get("sigma_grid") is not None:
            known["sigma_grid"] = tuple(known["sigma_grid"])
        return cls(**known)


def _max_offset_sq(q: ScalarField, out: Grid2) -> float:
    """Largest |z - x|^2 between a support point of q and a node of out"""
    rows, cols = np.nonzero(q.samples)
    if rows.size == 0:
        return 0.0
    g = q.grid
    zx = g.origin[0] + g.spacing * np.array([cols.min(), cols.max()])
    zy = g.origin[1] + g.spacing * np.array([rows.min(), rows.max()])
    xx = np.array([out.origin[0], out.origin[0] + out.extent[0]])
    xy = np.array([out.origin[1], out.origin[1] + out.extent[1]])
    dx = np.max(np.abs(zx[:, None] - xx[None, :]))
    dy = np.max(np.abs(zy[:, None] - xy[None, :]))
    return float(dx ** 2 + dy ** 2)


def angular_average_recon(q: ScalarField, lam: float, out: Grid2, p: AveragingParams,
                          cfg: Optional[EngineConfig] = None, path: Optional[str] = None) -> ScalarField:
    """
    Main term averaged over rotations of q about each output node

    The fast path convolves with the radial kernel (lambda/pi) J0(lambda |d|^2);
    the reference path convolves with the n_angles-point average of the
    rotated chirp.

    Args:
        q: Input potential
        lam: Frequency
        out: Output grid
        p: Averaging parameters (n_angles, angular_path)
        cfg: Engine configuration
        path: Override of p.angular_path

    Returns:
        ScalarField on out
    """
    engine = ReconstructionEngine(cfg)
    path = path or p.angular_path
    if path not in ANGULAR_PATHS:
        raise ValueError(f"Unknown angular path '{path}', expected one of {ANGULAR_PATHS}")
    try:
        qf = engine.prepare_input(q, lam)
        if path == "fast":
            kernel = BesselKernel(lam)
        else:
            reach = lam * _max_offset_sq(qf, out)
            if p.n_angles / 2 <= reach:
                logger.warning(f"{p.n_angles} angles under-resolve the rotated chirp at lambda={lam:g} "
                               f"(lambda*|d|^2 up to {reach:.1f}); expect quadrature error")
            kernel = AveragedChirpKernel(lam, p.n_angles, engine.cfg.threads)
        return engine.correlate(qf, kernel, out)
    except Exception as e:
        logger.error(f"Angular average ({path}) failed at lambda={lam:g}: {e}")
        raise


def angular_average_point(q: ScalarField, x: Tuple[float, float], lam: float, p: AveragingParams,
                          cfg: Optional[EngineConfig] = None) -> complex:
    """Mean over n_angles rotations theta_j of main_term_point(rotate_field(q, x, theta_j), x)"""
    engine = ReconstructionEngine(cfg)
    qf = engine.prepare_input(q, lam)
    ctx = PhaseContext(x, lam)
    thetas = 2.0 * np.pi * np.arange(p.n_angles) / p.n_angles
    values = ordered_map(lambda t: engine.point_on_input(rotate_field(qf, x, t), ctx), thetas, engine.cfg.threads)
    return complex(pairwise_sum(values) / p.n_angles)


def radialize(q: ScalarField, center: Tuple[float, float], p: AveragingParams) -> ScalarField:
    """Angular mean of q about center, spread back onto q's grid"""
    table = to_polar(q, center, p.n_radii, p.n_angles)
    return table.angular_mean().to_field(q.grid, center)


def radial_smooth(f: RadialProfile, p: AveragingParams) -> RadialProfile:
    """
    S_rad[f](r) = integral over s in [0, 1] of f(r (1 + s)^(-1/2))

    Trapezoid rule with n_srad nodes; f is sampled by linear interpolation in r.
    """
    s = np.linspace(0.0, 1.0, p.n_srad)
    weights = np.full(p.n_srad, 1.0 / (p.n_srad - 1))
    weights[[0, -1]] *= 0.5
    args = f.radii[:, None] / np.sqrt(1.0 + s)[None, :]
    values = np.sum(f.at(args) * weights[None, :], axis=1)
    return RadialProfile(f.r_max, values)


@dataclass(frozen=True)
class FrequencySeries:
    """Samples of a complex function of the frequency on an increasing lattice"""
    lambdas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if lambdas.size != values.size:
            raise ValueError(f"{lambdas.size} frequencies but {values.size} values")
        if lambdas.size < 2 or np.any(np.diff(lambdas) <= 0):
            raise ValueError("Frequency lattice must be strictly increasing with at least 2 samples")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, func: Callable[[float], complex], lambdas: Sequence[float],
               threads: Optional[int] = None) -> "FrequencySeries":
        lambdas = np.asarray(lambdas, dtype=float)
        return cls(lambdas, np.array(ordered_map(func, list(lambdas), threads), dtype=np.complex128))


def frequency_lattice(lam: float, count: int = 2 * MIN_FREQ_SAMPLES) -> np.ndarray:
    """Uniform lattice on [lambda, 2 lambda]"""
    return np.linspace(lam, 2.0 * lam, count)


def _interp(x: float, xs: np.ndarray, ys: np.ndarray) -> complex:
    return complex(np.interp(x, xs, ys.real), np.interp(x, xs, ys.imag))


def freq_average(F: FrequencySeries, lam: float) -> complex:
    """
    A_freq[F](lambda) = (1/lambda) integral of F over [lambda, 2 lambda]

    Trapezoid rule over the lattice points inside the window plus the
    linearly interpolated endpoints, exact for F linear in the frequency.

    Raises:
        CoverageError: lattice does not span the window with at least 32 samples
    """
    if not lam > 0:
        raise ValueError(f"Frequency must be positive, got {lam}")
    lo, hi = lam, 2.0 * lam
    tol = 1e-12 * hi
    lambdas, values = F.lambdas, F.values
    inside = (lambdas >= lo - tol) & (lambdas <= hi + tol)
    if lambdas[0] > lo + tol or lambdas[-1] < hi - tol or np.count_nonzero(inside) < MIN_FREQ_SAMPLES:
        raise CoverageError(
            f"Frequency lattice [{lambdas[0]:g}, {lambdas[-1]:g}] with {np.count_nonzero(inside)} samples "
            f"in the window does not cover [{lo:g}, {hi:g}] with {MIN_FREQ_SAMPLES} samples"
        )
    strict = (lambdas > lo + tol) & (lambdas < hi - tol)
    nodes = np.concatenate([[lo], lambdas[strict], [hi]])
    samples = np.concatenate([[_interp(lo, lambdas, values)], values[strict], [_interp(hi, lambdas, values)]])
    return complex(integrate.trapezoid(samples, nodes) / lam)


def v_pipeline(q: ScalarField, center: Tuple[float, float], p: AveragingParams,
               r_max: Optional[float] = None) -> List[RadialProfile]:
    """
    Angular mean V0 of q about center followed by V_j = S_rad[V_(j-1)], j = 1..3

    Returns:
        [V0, V1, V2, V3]
    """
    table: PolarTable = to_polar(q, center, p.n_radii, p.n_angles, r_max)
    profiles = [table.angular_mean()]
    for _ in range(PIPELINE_STEPS):
        profiles.append(radial_smooth(profiles[-1], p))
    return profiles


def combined_recon(q: ScalarField, lam: float, out: Grid2, p: AveragingParams, m: MollifierSpec,
                   cfg: Optional[EngineConfig] = None) -> ScalarField:
    """Mollifier applied after the angular average"""
    return mollify(angular_average_recon(q, lam, out, p, cfg), m)


def freq_average_recon(q: ScalarField, lam: float, out: Grid2, p: AveragingParams,
                       cfg: Optional[EngineConfig] = None) -> ScalarField:
    """
    A_freq^depth of the angular-averaged main term at lambda

    Evaluated as one convolution with the frequency-averaged Bessel kernel;
    the input is resolved for the largest frequency in the windows, lambda 2^depth.
    """
    engine = ReconstructionEngine(cfg)
    top = lam * 2.0 ** p.freq_depth
    try:
        qf = engine.prepare_input(q, top)
        return engine.correlate(qf, FreqAveragedBesselKernel(lam, p.freq_depth), out)
    except Exception as e:
        logger.error(f"Frequency-averaged reconstruction failed at lambda={lam:g}: {e}")
        raise


def freq_average_point(q: ScalarField, x: Tuple[float, float], lam: float,
                       cfg: Optional[EngineConfig] = None, count: int = 2 * MIN_FREQ_SAMPLES) -> complex:
    """A_freq of the plain main term at a single point, from a sampled frequency lattice"""
    engine = ReconstructionEngine(cfg)
    qf = engine.prepare_input(q, 2.0 * lam)
    series = FrequencySeries.sample(lambda t: engine.point_on_input(qf, PhaseContext(x, t)),
                                    frequency_lattice(lam, count), engine.cfg.threads)
    return freq_average(series, lam)
