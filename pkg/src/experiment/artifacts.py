"""
Run artifacts: grayscale PGM images, error tables and the run manifest
"""
import hashlib
import io
import json
import platform
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy
import PIL
from PIL import Image

import src
from src.fields.field_core import ScalarField
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

MIDGRAY = 128


def auto_window(truth: ScalarField) -> Tuple[float, float]:
    """[min, max] of the real part of the true phantom, shared by every panel of a run"""
    real = truth.real
    return float(real.min()), float(real.max())


def quantize(f: ScalarField, window: Tuple[float, float]) -> np.ndarray:
    """
    Affine map of the real part onto 0..255, rounding half up

    Row 0 of the result is the top of the image (largest y). A degenerate
    window gives a mid-gray image.
    """
    lo, hi = window
    if not hi > lo:
        return np.full(f.grid.shape, MIDGRAY, dtype=np.uint8)
    scaled = (f.real - lo) / (hi - lo) * 255.0
    pixels = np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(pixels[::-1])


def render_pgm(f: ScalarField, window: Tuple[float, float]) -> bytes:
    """Binary PGM (P5, maxval 255) of the real part of f"""
    image = Image.fromarray(quantize(f, window))
    buffer = io.BytesIO()
    image.save(buffer, format="PPM")
    return buffer.getvalue()


def write_pgm(f: ScalarField, window: Tuple[float, float], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render_pgm(f, window))
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Pixel rows of a PGM file, top row first"""
    with Image.open(path) as image:
        return np.asarray(image.convert("L"))


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> Dict[str, str]:
    """Library versions recorded in every manifest"""
    return {
        "bklab": src.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pillow": PIL.__version__,
    }


def write_manifest(path: Union[str, Path], spec: Dict[str, Any], artifacts: Dict[str, str],
                   timings: Dict[str, float], extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write the run manifest

    Args:
        path: Manifest file
        spec: RunSpec echo
        artifacts: Relative artifact path -> SHA-256
        timings: Job label -> seconds
        extra: Additional top-level keys
    """
    path = Path(path)
    manifest = {
        "spec": spec,
        "versions": versions(),
        "artifacts": dict(sorted(artifacts.items())),
        "timings": {k: round(v, 4) for k, v in timings.items()},
    }
    manifest.update(extra or {})
    path.write_text(json.dumps(manifest, indent=2, sort_keys=False), encoding="utf-8")
    logger.info(f"Manifest written: {path}")
    return path
