"""
Oscillatory Engine - main-term evaluation for bklab
Quadratic phases, the resolution rule and three engines (naive, separable,
spectral) for T^lambda[q](x) = (lambda/pi) * integral of exp(i lambda phi_x(z)) q(z) dz
"""
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import scipy.fft
from scipy import special

from config import config
from src.fields.field_core import Grid2, ScalarField, resample
from src.utils.errors import GridMismatchError, GridNestingError, ResolutionError
from src.utils.logger import setup_logger
from src.utils.parallel import chunk_ranges, ordered_map, pairwise_sum, thread_count

logger = setup_logger(__name__)

ENGINES = ("naive", "separable", "spectral")
SPECTRAL_KERNELS = ("sampled", "analytic")
SUMMATIONS = ("pairwise", "fsum")

# Input samples per phase period required at the edge of the support
SAMPLES_PER_PERIOD = 8

# Fixed chunk count for kernel averages, independent of the thread count
KERNEL_CHUNKS = 8

OffsetKernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EngineConfig:
    """
    Engine selection and quadrature settings

    refinement=None picks the smallest input refinement meeting the
    resolution rule; an explicit factor is checked against it.
    """
    engine: str = field(default_factory=lambda: config.ENGINE)
    refinement: Optional[int] = None
    summation: str = "pairwise"
    spectral_kernel: str = "sampled"
    padding: int = 2
    max_input_points: int = field(default_factory=lambda: config.MAX_INPUT_POINTS)
    threads: Optional[int] = None

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"Unknown engine '{self.engine}', expected one of {ENGINES}")
        if self.spectral_kernel not in SPECTRAL_KERNELS:
            raise ValueError(f"Unknown spectral kernel '{self.spectral_kernel}', expected one of {SPECTRAL_KERNELS}")
        if self.summation not in SUMMATIONS:
            raise ValueError(f"Unknown summation '{self.summation}', expected one of {SUMMATIONS}")
        if self.refinement is not None and int(self.refinement) < 1:
            raise ValueError(f"Refinement factor must be a positive integer, got {self.refinement}")
        if self.padding < 2:
            raise ValueError(f"Spectral padding factor must be at least 2, got {self.padding}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EngineConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class PhaseContext:
    """Reconstruction point x and frequency lam"""
    x: Tuple[float, float]
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Frequency must be positive, got {self.lam}")
        object.__setattr__(self, "x", (float(self.x[0]), float(self.x[1])))
        object.__setattr__(self, "lam", float(self.lam))


def complex_phase(ctx: PhaseContext, z) -> complex:
    """psi_x(z) = ((z1 - x1) + i (z2 - x2))^2 / 2"""
    d1 = np.asarray(z[0]) - ctx.x[0]
    d2 = np.asarray(z[1]) - ctx.x[1]
    value = 0.5 * (d1 + 1j * d2) ** 2
    return complex(value) if np.ndim(value) == 0 else value


def real_phase(ctx: PhaseContext, z) -> float:
    """phi_x(z) = (z1 - x1)^2 - (z2 - x2)^2, twice the real part of psi_x"""
    d1 = np.asarray(z[0]) - ctx.x[0]
    d2 = np.asarray(z[1]) - ctx.x[1]
    value = d1 ** 2 - d2 ** 2
    return float(value) if np.ndim(value) == 0 else value


def resolution_spacing(lam: float, half_width: float) -> float:
    """Largest input spacing giving SAMPLES_PER_PERIOD samples per period at the support edge"""
    return math.pi / (SAMPLES_PER_PERIOD * lam * half_width)


def trapezoid_weights(grid: Grid2) -> np.ndarray:
    """Tensor trapezoid weights: 1 inside, 1/2 on edges, 1/4 at corners"""
    wx = np.ones(grid.nx)
    wx[[0, -1]] = 0.5
    wy = np.ones(grid.ny)
    wy[[0, -1]] = 0.5
    return np.outer(wy, wx)


class ChirpKernel:
    """(lambda/pi) exp(i lambda (d1^2 - d2^2)) as a function of the offset d = z - x"""

    def __init__(self, lam: float):
        self.lam = float(lam)

    def __call__(self, ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        return (self.lam / np.pi) * np.exp(1j * self.lam * ox ** 2) * np.exp(-1j * self.lam * oy ** 2)

    def __repr__(self):
        return f"ChirpKernel(lam={self.lam:g})"


class BesselKernel:
    """Rotation average of the chirp: (lambda/pi) J0(lambda |d|^2)"""

    def __init__(self, lam: float):
        self.lam = float(lam)

    def __call__(self, ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        return (self.lam / np.pi) * special.j0(self.lam * (ox ** 2 + oy ** 2)) + 0j

    def __repr__(self):
        return f"BesselKernel(lam={self.lam:g})"


class AveragedChirpKernel:
    """
    Uniform n_angles-point average of the chirp rotated by theta_j = 2 pi j / n_angles

    Equals rotating the potential about each output node before applying the
    main term. The quadrature is accurate while n_angles / 2 exceeds
    lambda * |d|^2 over the offsets in use.
    """

    def __init__(self, lam: float, n_angles: int, threads: Optional[int] = None):
        self.lam = float(lam)
        self.n_angles = int(n_angles)
        self.threads = threads

    def __call__(self, ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        ox, oy = np.broadcast_arrays(ox, oy)
        hyperbolic = ox ** 2 - oy ** 2
        cross = 2.0 * ox * oy
        two_theta = 4.0 * np.pi * np.arange(self.n_angles) / self.n_angles

        def partial(indices: range) -> np.ndarray:
            acc = np.zeros(ox.shape, dtype=np.complex128)
            for j in indices:
                acc += np.exp(1j * self.lam * (hyperbolic * np.cos(two_theta[j]) + cross * np.sin(two_theta[j])))
            return acc

        parts = ordered_map(partial, chunk_ranges(self.n_angles, KERNEL_CHUNKS), self.threads)
        return (self.lam / np.pi) * pairwise_sum(parts) / self.n_angles

    def __repr__(self):
        return f"AveragedChirpKernel(lam={self.lam:g}, n_angles={self.n_angles})"


def log_product_density(depth: int, per_unit: int = 256) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature for log(U_1 * ... * U_depth), U_i independent and uniform on [1, 2]

    Each log U_i has density e^y on [0, ln 2], so the joint density is e^y
    with y the sum, and the density of the sum is e^y times ln2^(depth-1)
    times the Irwin-Hall density of y / ln 2. Nodes include the kinks at
    multiples of ln 2.

    Returns:
        (nodes, weights) with weights summing to 1
    """
    if depth < 1:
        return np.zeros(1), np.ones(1)
    a = math.log(2.0)
    nodes = np.linspace(0.0, depth * a, depth * per_unit + 1)
    x = nodes / a
    if depth == 1:
        irwin_hall = np.ones_like(x)
    else:
        irwin_hall = np.zeros_like(x)
        for k in range(depth + 1):
            irwin_hall += (-1) ** k * special.comb(depth, k) * np.where(x > k, x - k, 0.0) ** (depth - 1)
        irwin_hall = np.clip(irwin_hall / math.factorial(depth - 1), 0.0, None)
    weights = np.exp(nodes) * a ** (depth - 1) * irwin_hall
    weights[[0, -1]] *= 0.5
    return nodes, weights / weights.sum()


class FreqAveragedBesselKernel:
    """
    Bessel kernel averaged depth times over frequency windows [t, 2t]

    A_freq^depth of t -> (t/pi) J0(t |d|^2) evaluated at lambda, tabulated in
    rho = |d|^2 and interpolated linearly.
    """

    def __init__(self, lam: float, depth: int, min_table: int = 20000, max_table: int = 400000):
        self.lam = float(lam)
        self.depth = int(depth)
        self.min_table = min_table
        self.max_table = max_table

    def profile(self, rho: np.ndarray) -> np.ndarray:
        """Kernel as a function of rho = |d|^2, evaluated directly"""
        nodes, weights = log_product_density(self.depth)
        acc = np.zeros(np.shape(rho))
        for y, w in zip(nodes, weights):
            t = self.lam * math.exp(y)
            acc += w * (t / np.pi) * special.j0(t * rho)
        return acc

    def __call__(self, ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        rho = ox ** 2 + oy ** 2
        rho_max = float(np.max(rho)) if np.size(rho) else 0.0
        if rho_max == 0.0:
            return self.profile(rho) + 0j
        top = self.lam * 2.0 ** self.depth * rho_max
        n_table = int(min(self.max_table, max(self.min_table, math.ceil(12.0 * top))))
        table_rho = np.linspace(0.0, rho_max, n_table)
        table = self.profile(table_rho)
        return np.interp(rho, table_rho, table) + 0j

    def __repr__(self):
        return f"FreqAveragedBesselKernel(lam={self.lam:g}, depth={self.depth})"


class ReconstructionEngine:
    """
    Main-term evaluator
    Applies the resolution rule to the input and dispatches to the configured engine
    """

    def __init__(self, cfg: Optional[EngineConfig] = None):
        """
        Initialize the engine

        Args:
            cfg: Engine configuration (defaults from Config)
        """
        self.cfg = cfg or EngineConfig()

    def prepare_input(self, q: ScalarField, lam: float) -> ScalarField:
        """
        Refine q until its spacing satisfies the resolution rule at lam

        Args:
            q: Input potential
            lam: Frequency

        Returns:
            q itself or its bilinear upsampling

        Raises:
            ResolutionError: explicit refinement too coarse, or the required
                refinement exceeds the input point cap
        """
        half_width = q.support_half_width()
        h = q.grid.spacing
        if half_width == 0.0:
            return q
        required = resolution_spacing(lam, half_width)
        if self.cfg.refinement is None:
            factor = max(1, math.ceil(h / required - 1e-9))
        else:
            factor = int(self.cfg.refinement)
            if h / factor > required * (1.0 + 1e-9):
                raise ResolutionError(h / factor, required, lam)
        if factor == 1:
            return q
        fine = q.grid.refine(factor)
        if fine.size > self.cfg.max_input_points:
            logger.error(f"Refinement x{factor} needs {fine.size} input points, cap is {self.cfg.max_input_points}")
            raise ResolutionError(h, required, lam)
        if self.cfg.refinement is None:
            logger.warning(f"Input spacing {h:.4g} too coarse at lambda={lam:g}; "
                           f"refining x{factor} to {fine.nx}x{fine.ny} by bilinear interpolation")
        return resample(q, fine)

    def _sum(self, terms: np.ndarray) -> complex:
        if self.cfg.summation == "fsum":
            flat = terms.reshape(-1)
            return complex(math.fsum(flat.real), math.fsum(flat.imag))
        return complex(np.sum(terms))

    def _node_value(self, wq: np.ndarray, grid: Grid2, x: Tuple[float, float], lam: float) -> complex:
        # exp(i lam phi_x) split into its per-axis phase factors
        ex = np.exp(1j * lam * (grid.xs - x[0]) ** 2)
        ey = np.exp(-1j * lam * (grid.ys - x[1]) ** 2)
        total = self._sum(wq * ey[:, None] * ex[None, :])
        return lam / np.pi * grid.spacing ** 2 * total

    def point(self, q: ScalarField, ctx: PhaseContext) -> complex:
        """Trapezoid quadrature of the main term at a single point"""
        return self.point_on_input(self.prepare_input(q, ctx.lam), ctx)

    def point_on_input(self, qf: ScalarField, ctx: PhaseContext) -> complex:
        """Single-point quadrature on an input already prepared by prepare_input"""
        wq = trapezoid_weights(qf.grid) * qf.samples
        return self._node_value(wq, qf.grid, ctx.x, ctx.lam)

    def grid(self, q: ScalarField, lam: float, out: Grid2) -> ScalarField:
        """
        Main term at every node of an output grid

        Args:
            q: Input potential
            lam: Frequency
            out: Output grid inside the input frame

        Returns:
            ScalarField on out
        """
        if not lam > 0:
            raise ValueError(f"Frequency must be positive, got {lam}")
        if not q.grid.covers(out):
            raise GridMismatchError(f"Output grid {out} leaves the input frame {q.grid}")
        engine = self.cfg.engine
        start = time.perf_counter()
        try:
            if engine == "spectral" and self.cfg.spectral_kernel == "analytic":
                result = self._analytic(q, lam, out)
                n_in = q.grid.size
            else:
                qf = self.prepare_input(q, lam)
                n_in = qf.grid.size
                if engine == "naive":
                    result = self._naive(qf, lam, out)
                elif engine == "separable":
                    result = self._separable(qf, lam, out)
                else:
                    result = self.correlate(qf, ChirpKernel(lam), out)
            logger.info(f"Main term ({engine}) at lambda={lam:g}: {n_in} input -> {out.size} output points "
                        f"in {time.perf_counter() - start:.2f}s")
            return result
        except Exception as e:
            logger.error(f"Main term evaluation failed ({engine}, lambda={lam:g}): {e}")
            raise

    def _naive(self, qf: ScalarField, lam: float, out: Grid2) -> ScalarField:
        wq = trapezoid_weights(qf.grid) * qf.samples
        X, Y = out.mesh()
        xs, ys = X.reshape(-1), Y.reshape(-1)

        def run(indices: range):
            return [self._node_value(wq, qf.grid, (xs[i], ys[i]), lam) for i in indices]

        chunks = chunk_ranges(out.size, 4 * thread_count(self.cfg.threads))
        values = [v for part in ordered_map(run, chunks, self.cfg.threads) for v in part]
        return ScalarField(out, np.array(values, dtype=np.complex128).reshape(out.shape))

    def _separable(self, qf: ScalarField, lam: float, out: Grid2) -> ScalarField:
        g = qf.grid
        nesting = g.node_index(out)
        if nesting is None:
            raise GridNestingError(f"Separable engine needs output nodes on the input lattice: {out} vs {g}")
        i0, j0, stride = nesting
        h = g.spacing
        mx = np.arange(g.nx)[None, :] - (i0 + stride * np.arange(out.nx))[:, None]
        my = np.arange(g.ny)[None, :] - (j0 + stride * np.arange(out.ny))[:, None]
        ex = np.exp(1j * lam * (mx * h) ** 2)
        ey = np.exp(-1j * lam * (my * h) ** 2)
        wq = trapezoid_weights(g) * qf.samples

        # einsum without path optimization keeps the summation order fixed (no BLAS)
        def run(cols: range) -> np.ndarray:
            partial = np.einsum("kl,il->ki", wq, ex[cols.start:cols.stop], optimize=False)
            return np.einsum("jk,ki->ji", ey, partial, optimize=False)

        blocks = ordered_map(run, chunk_ranges(out.nx, thread_count(self.cfg.threads)), self.cfg.threads)
        total = np.concatenate(blocks, axis=1)
        return ScalarField(out, lam / np.pi * h * h * total)

    def correlate(self, q: ScalarField, kernel: OffsetKernel, out: Grid2, weighted: bool = True) -> ScalarField:
        """
        Lattice correlation sum_z K(z - x) w(z) q(z) h^2 at the nodes of out

        The kernel is sampled on the signed offset lattice and applied by a
        circular FFT on a grid padded to at least 2n - 1 per axis, so the
        result is the direct sum up to rounding. Output grids whose spacing is
        a multiple of the input spacing may be shifted by a sub-cell offset;
        other output grids are evaluated on the input lattice and interpolated.

        Args:
            q: Input samples
            kernel: Callable of the offsets (d1, d2) = z - x
            out: Output grid inside the input frame
            weighted: Apply trapezoid weights

        Returns:
            ScalarField on out
        """
        g = q.grid
        h = g.spacing
        relation = g.lattice_offset(out)
        if relation is None:
            logger.warning(f"Output spacing {out.spacing:.6g} is not a multiple of input spacing {h:.6g}; "
                           f"interpolating from the input lattice")
            target, stride, dx, dy = g, 1, 0.0, 0.0
        else:
            target = out
            stride, dx, dy = relation
        i0 = int(round((target.origin[0] - dx - g.origin[0]) / h))
        j0 = int(round((target.origin[1] - dy - g.origin[1]) / h))
        cols = i0 + stride * np.arange(target.nx)
        rows = j0 + stride * np.arange(target.ny)
        if cols[0] < 0 or rows[0] < 0 or cols[-1] > g.nx - 1 or rows[-1] > g.ny - 1:
            raise GridMismatchError(f"Output grid {out} leaves the input lattice {g}")

        wq = trapezoid_weights(g) * q.samples if weighted else np.asarray(q.samples)
        my = scipy.fft.next_fast_len(max(self.cfg.padding * g.ny, 2 * g.ny - 1))
        mx = scipy.fft.next_fast_len(max(self.cfg.padding * g.nx, 2 * g.nx - 1))
        py, valid_y = _signed_offsets(g.ny, my)
        px, valid_x = _signed_offsets(g.nx, mx)
        ox = (-px * h - dx)[None, :]
        oy = (-py * h - dy)[:, None]
        kern = np.where(valid_y[:, None] & valid_x[None, :], kernel(ox, oy), 0.0)

        workers = thread_count(self.cfg.threads)
        spectrum = scipy.fft.fft2(wq, s=(my, mx), workers=workers) * scipy.fft.fft2(kern, workers=workers)
        full = scipy.fft.ifft2(spectrum, workers=workers)[:g.ny, :g.nx]
        values = full[np.ix_(rows, cols)] * h * h
        result = ScalarField(target, values)
        return result if target is out else resample(result, out)

    def _analytic(self, q: ScalarField, lam: float, out: Grid2) -> ScalarField:
        g = q.grid
        my, mx = self.cfg.padding * g.ny, self.cfg.padding * g.nx
        kx = 2.0 * np.pi * np.fft.fftfreq(mx, d=g.spacing)
        ky = 2.0 * np.pi * np.fft.fftfreq(my, d=g.spacing)
        multiplier = np.exp(-1j * (kx[None, :] ** 2 - ky[:, None] ** 2) / (4.0 * lam))
        workers = thread_count(self.cfg.threads)
        spectrum = scipy.fft.fft2(q.samples, s=(my, mx), workers=workers) * multiplier
        full = ScalarField(g, scipy.fft.ifft2(spectrum, workers=workers)[:g.ny, :g.nx])
        nesting = g.node_index(out)
        if nesting is None:
            return resample(full, out)
        i0, j0, stride = nesting
        return ScalarField(out, full.samples[j0:j0 + stride * out.ny:stride, i0:i0 + stride * out.nx:stride])


def _signed_offsets(n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Signed offset carried by each index of a length-m circular buffer, and whether it is in range"""
    idx = np.arange(m)
    signed = np.where(idx < n, idx, idx - m)
    valid = (idx < n) | (idx > m - n)
    return signed, valid


def main_term_point(q: ScalarField, ctx: PhaseContext, cfg: Optional[EngineConfig] = None) -> complex:
    """T^lambda[q](x) by trapezoid quadrature"""
    return ReconstructionEngine(cfg).point(q, ctx)


def main_term_grid(q: ScalarField, lam: float, out: Grid2, cfg: Optional[EngineConfig] = None) -> ScalarField:
    """T^lambda[q] on every node of out with the configured engine"""
    return ReconstructionEngine(cfg).grid(q, lam, out)
