"""
Phantom Generator for bklab
Renders composite test potentials (rectangles, ovals, circle spirals,
geometric figures, Shepp-Logan) and analytic potentials on a Grid2
"""
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from config import config
from src.fields.field_core import Grid2, ScalarField, sample_points
from src.utils.errors import PhantomDomainError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

PRESET_DIR = Path(__file__).resolve().parent / "presets"

PHANTOM_KINDS = ("rectangles", "ovals", "circles_spiral", "geometric_figures",
                 "shepp_logan", "gaussian", "disc")
SHAPES = ("rectangle", "ellipse", "disc", "gaussian")

# Gaussians are cut to zero beyond this many widths (e^-36 < 1e-15)
GAUSSIAN_CUTOFF = 6.0

# Canonical ten-ellipse table: (x0, y0, a, b, angle in degrees, intensity)
SHEPP_LOGAN_TABLE = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
)


def _complex_from_json(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"Complex values are [re, im] pairs, got {value}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _complex_to_json(value: complex) -> Any:
    value = complex(value)
    return value.real if value.imag == 0 else [value.real, value.imag]


@dataclass(frozen=True)
class Primitive:
    """
    One building block of a phantom

    half_axes are the semi-axes for ellipses and rectangles, (r, r) for discs
    and the (x, y) widths for Gaussians; angle is counterclockwise in degrees.
    """
    shape: str
    center: Tuple[float, float]
    half_axes: Tuple[float, float]
    intensity: complex = 1.0
    angle: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"Unknown primitive shape '{self.shape}', expected one of {SHAPES}")
        a, b = float(self.half_axes[0]), float(self.half_axes[1])
        if not (a > 0 and b > 0):
            raise ValueError(f"Primitive half-axes must be positive, got {self.half_axes}")
        intensity = complex(self.intensity)
        if not np.isfinite(intensity):
            raise ValueError(f"Primitive intensity must be finite, got {self.intensity}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_axes", (a, b))
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "angle", float(self.angle))

    def reach(self) -> Tuple[float, float]:
        """Half-extents of the axis-aligned bounding box of the support"""
        a, b = self.half_axes
        t = np.radians(self.angle)
        c, s = abs(np.cos(t)), abs(np.sin(t))
        if self.shape == "rectangle":
            return (a * c + b * s, a * s + b * c)
        if self.shape == "gaussian":
            a, b = GAUSSIAN_CUTOFF * a, GAUSSIAN_CUTOFF * b
        return (float(np.sqrt((a * c) ** 2 + (b * s) ** 2)), float(np.sqrt((a * s) ** 2 + (b * c) ** 2)))

    def evaluate(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Real profile of the primitive (without intensity) at points X, Y"""
        t = np.radians(self.angle)
        dx, dy = X - self.center[0], Y - self.center[1]
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        a, b = self.half_axes
        if self.shape == "rectangle":
            return ((np.abs(u) < a) & (np.abs(v) < b)).astype(float)
        rho2 = (u / a) ** 2 + (v / b) ** 2
        if self.shape in ("ellipse", "disc"):
            return (rho2 < 1.0).astype(float)
        return np.where(rho2 <= GAUSSIAN_CUTOFF ** 2, np.exp(-rho2), 0.0)

    def area_integral(self) -> complex:
        """Exact integral of intensity times profile"""
        a, b = self.half_axes
        if self.shape == "rectangle":
            return self.intensity * 4.0 * a * b
        return self.intensity * np.pi * a * b

    def to_dict(self) -> Dict[str, Any]:
        return {
            "shape": self.shape,
            "center": list(self.center),
            "half_axes": list(self.half_axes),
            "angle": self.angle,
            "intensity": _complex_to_json(self.intensity),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Primitive":
        shape = data.get("shape")
        if shape == "disc" and "radius" in data:
            half_axes = (data["radius"], data["radius"])
        else:
            half_axes = tuple(data["half_axes"])
        return cls(
            shape=shape,
            center=tuple(data.get("center", (0.0, 0.0))),
            half_axes=half_axes,
            intensity=_complex_from_json(data.get("intensity", 1.0)),
            angle=float(data.get("angle", 0.0)),
        )


@dataclass(frozen=True)
class PhantomSpec:
    """Phantom of a given kind made of primitives inside the square (-half_width, half_width)^2"""
    kind: str
    primitives: Tuple[Primitive, ...] = field(default_factory=tuple)
    amplitude: complex = 1.0
    half_width: float = 1.0
    version: str = "1"
    name: str = ""

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise ValueError(f"Unknown phantom kind '{self.kind}', expected one of {PHANTOM_KINDS}")
        if not self.half_width > 0:
            raise ValueError(f"Domain half-width must be positive, got {self.half_width}")
        amplitude = complex(self.amplitude)
        if not np.isfinite(amplitude):
            raise ValueError("Phantom amplitude must be finite")
        object.__setattr__(self, "primitives", tuple(self.primitives))
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "half_width", float(self.half_width))
        if not self.name:
            object.__setattr__(self, "name", self.kind)
        if not self.primitives:
            raise ValueError(f"Phantom '{self.name}' has no primitives")
        self.validate_domain()

    def validate_domain(self):
        """Every primitive must stay strictly inside the open domain square"""
        for index, prim in enumerate(self.primitives):
            rx, ry = prim.reach()
            cx, cy = prim.center
            if max(abs(cx) + rx, abs(cy) + ry) >= self.half_width:
                raise PhantomDomainError(
                    f"Primitive {index} ({prim.shape} at {prim.center}) of phantom '{self.name}' "
                    f"leaves the domain square of half-width {self.half_width}"
                )

    @property
    def support_half_width(self) -> float:
        """Max-norm half-width of the union of primitive bounding boxes"""
        return max(max(abs(p.center[0]) + p.reach()[0], abs(p.center[1]) + p.reach()[1])
                   for p in self.primitives)

    def analytic_integral(self) -> complex:
        """Exact integral of the phantom (indicator primitives only)"""
        return self.amplitude * sum(p.area_integral() for p in self.primitives)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "version": self.version,
            "half_width": self.half_width,
            "amplitude": _complex_to_json(self.amplitude),
            "primitives": [p.to_dict() for p in self.primitives],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PhantomSpec":
        """
        Build a spec from its JSON form

        A {"preset": name} object loads a stored preset, optionally overriding
        its amplitude. shepp_logan without primitives uses the canonical table.
        """
        if "preset" in data:
            spec = load_preset(data["preset"])
            if "amplitude" in data:
                spec = PhantomSpec(spec.kind, spec.primitives, _complex_from_json(data["amplitude"]),
                                   spec.half_width, spec.version, spec.name)
            return spec
        kind = data.get("kind")
        amplitude = _complex_from_json(data.get("amplitude", 1.0))
        half_width = float(data.get("half_width", 1.0))
        if kind == "gaussian" and "primitives" not in data:
            return gaussian_spec(float(data.get("width", 1.0)), amplitude, half_width)
        if kind == "disc" and "primitives" not in data:
            return disc_spec(float(data.get("radius", 1.0)), tuple(data.get("center", (0.0, 0.0))),
                             amplitude, half_width)
        if kind == "shepp_logan" and "primitives" not in data:
            return shepp_logan_spec(amplitude, half_width)
        primitives = tuple(Primitive.from_dict(p) for p in data.get("primitives", []))
        return cls(kind, primitives, amplitude, half_width,
                   str(data.get("version", "1")), str(data.get("name", "")))


def gaussian_spec(width: float = 1.0, amplitude: complex = 1.0, half_width: float = 8.0) -> PhantomSpec:
    """Centered Gaussian amplitude * exp(-|z|^2 / width^2)"""
    prim = Primitive("gaussian", (0.0, 0.0), (width, width))
    return PhantomSpec("gaussian", (prim,), amplitude, half_width, name="gaussian")


def disc_spec(radius: float = 1.0, center: Tuple[float, float] = (0.0, 0.0),
              amplitude: complex = 1.0, half_width: float = 1.1) -> PhantomSpec:
    """Indicator of the open disc |z - center| < radius"""
    prim = Primitive("disc", center, (radius, radius))
    return PhantomSpec("disc", (prim,), amplitude, half_width, name="disc")


def shepp_logan_spec(amplitude: complex = 1.0, half_width: float = 1.0) -> PhantomSpec:
    """The canonical ten-ellipse Shepp-Logan head"""
    prims = tuple(Primitive("ellipse", (x0, y0), (a, b), rho, angle)
                  for x0, y0, a, b, angle, rho in SHEPP_LOGAN_TABLE)
    return PhantomSpec("shepp_logan", prims, amplitude, half_width, name="shepp_logan")


def render_phantom(spec: PhantomSpec, grid: Grid2) -> ScalarField:
    """
    Sample a phantom at the grid nodes

    Args:
        spec: Phantom description
        grid: Sampling grid, must cover the domain square

    Returns:
        ScalarField of summed primitive intensities
    """
    hw = spec.half_width
    tol = 1e-9 * grid.spacing
    w, h = grid.extent
    if (grid.origin[0] > -hw + tol or grid.origin[1] > -hw + tol
            or grid.origin[0] + w < hw - tol or grid.origin[1] + h < hw - tol):
        raise PhantomDomainError(
            f"Grid frame {grid.origin} + {grid.extent} does not cover the domain of '{spec.name}' "
            f"(half-width {hw})"
        )
    X, Y = grid.mesh()
    samples = np.zeros(grid.shape, dtype=np.complex128)
    for prim in spec.primitives:
        samples += prim.intensity * prim.evaluate(X, Y)
    return ScalarField(grid, spec.amplitude * samples)


def rotate_field(f: ScalarField, center: Tuple[float, float], theta: float) -> ScalarField:
    """
    Rotate a field about center: g(z) = f(center + R_theta (z - center))

    Args:
        f: Field to rotate
        center: Rotation center
        theta: Angle in radians

    Returns:
        Bilinearly resampled field on the same grid
    """
    if theta == 0.0:
        return f
    X, Y = f.grid.mesh()
    dx, dy = X - center[0], Y - center[1]
    c, s = np.cos(theta), np.sin(theta)
    px = center[0] + c * dx - s * dy
    py = center[1] + s * dx + c * dy
    return ScalarField(f.grid, sample_points(f, px, py))


def preset_path(name: str) -> Path:
    """Locate a preset JSON file, user directory first"""
    candidates = []
    if config.PRESET_DIR:
        candidates.append(Path(config.PRESET_DIR) / f"{name}.json")
    candidates.append(PRESET_DIR / f"{name}.json")
    for path in candidates:
        if path.exists():
            return path
    raise FileNotFoundError(f"No phantom preset named '{name}' (looked in {[str(p) for p in candidates]})")


def load_preset(name: str) -> PhantomSpec:
    """Load a versioned phantom preset by name"""
    path = preset_path(name)
    with open(path, "r") as fh:
        data = json.load(fh)
    spec = PhantomSpec.from_dict(data)
    logger.debug(f"Loaded phantom preset '{name}' v{spec.version} from {path}")
    return spec


def list_presets() -> List[str]:
    names = {p.stem for p in PRESET_DIR.glob("*.json")}
    if config.PRESET_DIR and os.path.isdir(config.PRESET_DIR):
        names.update(p.stem for p in Path(config.PRESET_DIR).glob("*.json"))
    return sorted(names)
