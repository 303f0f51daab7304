"""
Mollifier averaging
Convolution with the normalized bump c exp(-1 / (1 - |x|^2)) scaled to width sigma
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import signal

from config import config
from src.fields.field_core import ScalarField
from src.utils.errors import MollifierError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

# Relative slack when comparing sigma to the grid spacing
_SPACING_TOL = 1e-9


@dataclass(frozen=True)
class MollifierSpec:
    """Standard bump mollifier of width sigma"""
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Mollifier width must be positive, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    def kernel(self, spacing: float) -> np.ndarray:
        """
        Bump sampled at lattice offsets with |d| < sigma, renormalized to unit sum

        At sigma equal to the spacing only the center offset survives and the
        kernel is the identity.
        """
        if self.sigma < spacing * (1.0 - _SPACING_TOL):
            raise MollifierError(f"Mollifier width {self.sigma:.6g} is below the grid spacing {spacing:.6g}")
        # largest lattice offset strictly inside the ball
        reach = max(0, int(np.ceil(self.sigma / spacing * (1.0 - _SPACING_TOL))) - 1)
        offsets = spacing * np.arange(-reach, reach + 1)
        r2 = (offsets[None, :] ** 2 + offsets[:, None] ** 2) / self.sigma ** 2
        inside = r2 < 1.0 - _SPACING_TOL
        bump = np.zeros_like(r2)
        bump[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return bump / bump.sum()


def mollify(f: ScalarField, m: MollifierSpec) -> ScalarField:
    """
    Convolve a field with the sampled mollifier

    Args:
        f: Field to smooth
        m: Mollifier width

    Returns:
        Field on the same grid; mass is preserved when f vanishes within sigma of the frame edge

    Raises:
        MollifierError: sigma below the grid spacing
    """
    kernel = m.kernel(f.grid.spacing)
    if kernel.shape == (1, 1):
        return f
    smoothed = signal.fftconvolve(f.samples, kernel, mode="same")
    logger.debug(f"Mollified {f.grid.nx}x{f.grid.ny} field with sigma={m.sigma:.4g} ({kernel.shape[0]}-point kernel)")
    return ScalarField(f.grid, smoothed)


def sigma_from_lambda(lam: float) -> float:
    """Mollifier width lambda^(-1/4)"""
    if not lam > 0:
        raise ValueError(f"Frequency must be positive, got {lam}")
    return lam ** -0.25


def default_sigma_grid(spacing: float, lam: float, count: Optional[int] = None) -> List[float]:
    """Log-spaced sigma values from the grid spacing (identity mollifier) up to 4 lambda^(-1/4)"""
    count = config.SIGMA_COUNT if count is None else count
    upper = 4.0 * sigma_from_lambda(lam)
    if upper <= spacing or count < 2:
        return [float(spacing)]
    return [float(s) for s in np.geomspace(spacing, upper, count)]
