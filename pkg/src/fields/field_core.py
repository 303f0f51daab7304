"""
Field Core for bklab
Sampled 2D fields, radial profiles, interpolation, polar resampling and
discrete homogeneous Sobolev norms
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.fft

from src.utils.errors import GridMismatchError
from src.utils.parallel import thread_count

# Relative tolerance used when comparing node positions of two grids
_NODE_TOL = 1e-9


@dataclass(frozen=True)
class Grid2:
    """Uniform lattice with equal spacing in both axes; node (i, j) sits at origin + spacing*(i, j)"""
    origin: Tuple[float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", float(self.spacing))
        if not self.spacing > 0:
            raise ValueError(f"Grid spacing must be positive, got {self.spacing}")
        if int(self.nx) < 2 or int(self.ny) < 2:
            raise ValueError(f"Grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def square(cls, half_width: float, n: int, center: Tuple[float, float] = (0.0, 0.0)) -> "Grid2":
        """n x n grid covering [c - half_width, c + half_width]^2 with nodes on the boundary"""
        spacing = 2.0 * half_width / (n - 1)
        return cls((center[0] - half_width, center[1] - half_width), spacing, n, n)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def extent(self) -> Tuple[float, float]:
        """Physical width and height"""
        return (self.spacing * (self.nx - 1), self.spacing * (self.ny - 1))

    @property
    def center(self) -> Tuple[float, float]:
        w, h = self.extent
        return (self.origin[0] + 0.5 * w, self.origin[1] + 0.5 * h)

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two (ny, nx) arrays"""
        return np.meshgrid(self.xs, self.ys, indexing="xy")

    def refine(self, factor: int) -> "Grid2":
        """Same frame, spacing divided by factor; old nodes stay nodes"""
        factor = int(factor)
        if factor < 1:
            raise ValueError(f"Refinement factor must be a positive integer, got {factor}")
        return Grid2(self.origin, self.spacing / factor,
                     (self.nx - 1) * factor + 1, (self.ny - 1) * factor + 1)

    def matches(self, other: "Grid2") -> bool:
        """Same nodes up to rounding"""
        tol = _NODE_TOL * self.spacing
        return (self.nx == other.nx and self.ny == other.ny
                and abs(self.spacing - other.spacing) <= tol
                and abs(self.origin[0] - other.origin[0]) <= tol
                and abs(self.origin[1] - other.origin[1]) <= tol)

    def lattice_offset(self, other: "Grid2") -> Optional[Tuple[int, float, float]]:
        """
        Relation of another grid to this lattice

        Returns:
            (stride, dx, dy) when other.spacing is an integer multiple of this
            spacing: other node (i, j) sits at this lattice point
            (stride*i + di, stride*j + dj) shifted by (dx, dy) with
            0 <= dx, dy < spacing. None when the spacings are incommensurate.
        """
        ratio = other.spacing / self.spacing
        stride = int(round(ratio))
        if stride < 1 or abs(ratio - stride) > _NODE_TOL * max(1.0, ratio):
            return None
        fx = (other.origin[0] - self.origin[0]) / self.spacing
        fy = (other.origin[1] - self.origin[1]) / self.spacing
        dx = (fx - np.floor(fx + _NODE_TOL)) * self.spacing
        dy = (fy - np.floor(fy + _NODE_TOL)) * self.spacing
        dx = 0.0 if abs(dx) <= _NODE_TOL * self.spacing else dx
        dy = 0.0 if abs(dy) <= _NODE_TOL * self.spacing else dy
        return stride, dx, dy

    def node_index(self, other: "Grid2") -> Optional[Tuple[int, int, int]]:
        """
        (i0, j0, stride) when every node of other is a node of this grid, else None
        """
        relation = self.lattice_offset(other)
        if relation is None:
            return None
        stride, dx, dy = relation
        if dx != 0.0 or dy != 0.0:
            return None
        i0 = int(round((other.origin[0] - self.origin[0]) / self.spacing))
        j0 = int(round((other.origin[1] - self.origin[1]) / self.spacing))
        if i0 < 0 or j0 < 0:
            return None
        if i0 + stride * (other.nx - 1) > self.nx - 1 or j0 + stride * (other.ny - 1) > self.ny - 1:
            return None
        return i0, j0, stride

    def covers(self, other: "Grid2") -> bool:
        """True when the frame of other lies inside this frame"""
        tol = _NODE_TOL * self.spacing
        w, h = self.extent
        ow, oh = other.extent
        return (other.origin[0] >= self.origin[0] - tol
                and other.origin[1] >= self.origin[1] - tol
                and other.origin[0] + ow <= self.origin[0] + w + tol
                and other.origin[1] + oh <= self.origin[1] + h + tol)


@dataclass(frozen=True)
class ScalarField:
    """Complex samples on a Grid2, stored row-major as an (ny, nx) array"""
    grid: Grid2
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.samples, dtype=np.complex128, copy=True)
        if data.ndim == 1:
            if data.size != self.grid.size:
                raise ValueError(f"Expected {self.grid.size} samples, got {data.size}")
            data = data.reshape(self.grid.shape)
        if data.shape != self.grid.shape:
            raise ValueError(f"Sample array shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("Field samples must be finite")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)

    @classmethod
    def zeros(cls, grid: Grid2) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: Grid2, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        """Evaluate func(X, Y) at the grid nodes"""
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1)

    @property
    def real(self) -> np.ndarray:
        return self.samples.real

    def with_samples(self, samples: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, samples)

    def _check_same_grid(self, other: "ScalarField"):
        if not self.grid.matches(other.grid):
            raise GridMismatchError(f"Fields live on different grids: {self.grid} vs {other.grid}")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_grid(other)
        return ScalarField(self.grid, self.samples + other.samples)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_grid(other)
        return ScalarField(self.grid, self.samples - other.samples)

    def __mul__(self, scalar: complex) -> "ScalarField":
        return ScalarField(self.grid, self.samples * complex(scalar))

    __rmul__ = __mul__

    def mass(self) -> complex:
        """Riemann sum of the samples times the cell area"""
        return complex(self.samples.sum() * self.grid.spacing ** 2)

    def support_half_width(self, center: Optional[Tuple[float, float]] = None) -> float:
        """Max-norm distance from center (default: frame center) to the farthest nonzero sample"""
        cx, cy = self.grid.center if center is None else center
        rows, cols = np.nonzero(self.samples)
        if rows.size == 0:
            return 0.0
        dx = np.abs(self.grid.origin[0] + self.grid.spacing * cols - cx)
        dy = np.abs(self.grid.origin[1] + self.grid.spacing * rows - cy)
        return float(max(dx.max(), dy.max()))


@dataclass(frozen=True)
class RadialProfile:
    """One-variable function sampled at r_k = k * r_max / (nr - 1)"""
    r_max: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.values, dtype=np.complex128, copy=True).reshape(-1)
        if not self.r_max > 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if data.size < 2:
            raise ValueError("A radial profile needs at least 2 samples")
        if not np.all(np.isfinite(data)):
            raise ValueError("Profile values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "values", data)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], r_max: float, nr: int) -> "RadialProfile":
        radii = np.linspace(0.0, r_max, nr)
        return cls(r_max, np.broadcast_to(func(radii), radii.shape))

    @property
    def nr(self) -> int:
        return self.values.size

    @property
    def dr(self) -> float:
        return self.r_max / (self.nr - 1)

    @property
    def radii(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.nr)

    def at(self, r: np.ndarray) -> np.ndarray:
        """Linear interpolation in r; zero beyond r_max"""
        r = np.asarray(r, dtype=float)
        radii = self.radii
        out = (np.interp(r, radii, self.values.real, right=0.0)
               + 1j * np.interp(r, radii, self.values.imag, right=0.0))
        return out

    def to_field(self, grid: Grid2, center: Tuple[float, float] = (0.0, 0.0)) -> ScalarField:
        """Radial 2D field z -> profile(|z - center|)"""
        X, Y = grid.mesh()
        return ScalarField(grid, self.at(np.hypot(X - center[0], Y - center[1])))


@dataclass(frozen=True)
class PolarTable:
    """Samples f(center + r_k (cos t_j, sin t_j)); values has shape (nr, ntheta)"""
    center: Tuple[float, float]
    r_max: float
    values: np.ndarray = field(repr=False)

    @property
    def radii(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.values.shape[0])

    @property
    def thetas(self) -> np.ndarray:
        ntheta = self.values.shape[1]
        return 2.0 * np.pi * np.arange(ntheta) / ntheta

    def angular_mean(self) -> RadialProfile:
        return RadialProfile(self.r_max, self.values.mean(axis=1))


def sample_points(f: ScalarField, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """
    Bilinear interpolation at arbitrary points, zero outside the grid hull

    Args:
        f: Sampled field
        px, py: Point coordinates (any matching shapes)

    Returns:
        Complex array shaped like px
    """
    g = f.grid
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    fx = (px - g.origin[0]) / g.spacing
    fy = (py - g.origin[1]) / g.spacing
    inside = (fx >= 0) & (fx <= g.nx - 1) & (fy >= 0) & (fy <= g.ny - 1)
    i0 = np.clip(np.floor(fx), 0, g.nx - 2).astype(np.intp)
    j0 = np.clip(np.floor(fy), 0, g.ny - 2).astype(np.intp)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    s = f.samples
    out = ((1 - tx) * (1 - ty) * s[j0, i0] + tx * (1 - ty) * s[j0, i0 + 1]
           + (1 - tx) * ty * s[j0 + 1, i0] + tx * ty * s[j0 + 1, i0 + 1])
    return np.where(inside, out, 0.0)


def sample_at(f: ScalarField, p: Tuple[float, float]) -> complex:
    """Bilinear value of f at a single point p (zero outside the grid hull)"""
    return complex(sample_points(f, np.array(p[0]), np.array(p[1])))


def resample(f: ScalarField, grid: Grid2) -> ScalarField:
    """Bilinear resampling of f onto another grid"""
    X, Y = grid.mesh()
    return ScalarField(grid, sample_points(f, X, Y))


def to_polar(f: ScalarField, center: Tuple[float, float], nr: int, ntheta: int,
             r_max: Optional[float] = None) -> PolarTable:
    """
    Resample a field on a polar lattice around center

    Args:
        f: Field to resample
        center: Polar origin
        nr: Radial samples, r_k = k * r_max / (nr - 1)
        ntheta: Angular samples, uniform on [0, 2*pi)
        r_max: Outer radius (defaults to the distance from center to the farthest frame corner)

    Returns:
        PolarTable with values of shape (nr, ntheta)
    """
    if nr < 2 or ntheta < 2:
        raise ValueError(f"Polar lattice needs nr, ntheta >= 2, got {nr}, {ntheta}")
    if r_max is None:
        g = f.grid
        w, h = g.extent
        corners_x = np.array([g.origin[0], g.origin[0] + w])
        corners_y = np.array([g.origin[1], g.origin[1] + h])
        r_max = float(np.max(np.hypot(*np.meshgrid(corners_x - center[0], corners_y - center[1]))))
    radii = np.linspace(0.0, r_max, nr)
    thetas = 2.0 * np.pi * np.arange(ntheta) / ntheta
    px = center[0] + radii[:, None] * np.cos(thetas)[None, :]
    py = center[1] + radii[:, None] * np.sin(thetas)[None, :]
    return PolarTable((float(center[0]), float(center[1])), float(r_max), sample_points(f, px, py))


def l2_norm(f: ScalarField) -> float:
    """Discrete L2 norm (sum |f|^2 h^2)^(1/2)"""
    return float(np.sqrt(np.sum(np.abs(f.samples) ** 2)) * f.grid.spacing)


def sobolev_norm(f: ScalarField, s: float) -> float:
    """
    Discrete homogeneous Sobolev norm from the DFT of the zero-padded samples

    The continuous transform is approximated by h^2 * DFT on a grid padded to
    twice the size in each axis, frequencies are the angular frequencies of
    that padded lattice, and the norm is
    ((2 pi)^-2 sum |xi|^(2s) |f_hat(xi)|^2 dxi)^(1/2). The xi = 0 bin carries
    no weight for s != 0; for s = 0 its weight is 1 and Parseval holds exactly.

    Args:
        f: Field, compactly supported well inside its grid
        s: Smoothness index in (-1, 3)

    Returns:
        Approximation of the H-dot^s norm
    """
    if not -1.0 < s < 3.0:
        raise ValueError(f"Sobolev index must lie in (-1, 3), got {s}")
    h = f.grid.spacing
    my, mx = 2 * f.grid.ny, 2 * f.grid.nx
    fhat = scipy.fft.fft2(f.samples, s=(my, mx), workers=thread_count()) * h * h
    kx = 2.0 * np.pi * np.fft.fftfreq(mx, d=h)
    ky = 2.0 * np.pi * np.fft.fftfreq(my, d=h)
    xi2 = ky[:, None] ** 2 + kx[None, :] ** 2
    if s == 0:
        weight = np.ones_like(xi2)
    else:
        weight = np.zeros_like(xi2)
        nonzero = xi2 > 0
        weight[nonzero] = xi2[nonzero] ** s
    dxi = (2.0 * np.pi / (mx * h)) * (2.0 * np.pi / (my * h))
    total = np.sum(weight * np.abs(fhat) ** 2) * dxi / (4.0 * np.pi ** 2)
    return float(np.sqrt(total))
