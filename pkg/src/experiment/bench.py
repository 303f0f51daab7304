"""
Benchmark harness comparing the main-term engines on one Gaussian job
"""
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.fields.field_core import Grid2, ScalarField
from src.oscillatory_engine import ENGINES, EngineConfig, main_term_grid
from src.phantoms.phantom_generator import gaussian_spec, render_phantom
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

BENCH_COLUMNS = ["engine", "input_size", "output_size", "seconds", "extrapolated", "rows_timed",
                 "max_abs_diff", "speedup"]
PROBE_ROWS = 2


@dataclass
class BenchRow:
    """One engine timing; speedup is this engine's time over the spectral time"""
    engine: str
    input_size: int
    output_size: int
    seconds: float
    extrapolated: bool = False
    rows_timed: int = 0
    max_abs_diff: float = 0.0
    speedup: float = 1.0


@dataclass
class BenchReport:
    """Timings of every benchmarked engine against the spectral engine"""
    lam: float
    rows: List[BenchRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.rows], columns=BENCH_COLUMNS)

    def row(self, engine: str) -> Optional[BenchRow]:
        return next((r for r in self.rows if r.engine == engine), None)

    def format(self) -> str:
        frame = self.to_frame()
        return frame.to_string(index=False, float_format=lambda v: f"{v:.4g}")


def nested_input_size(input_size: int, output_size: int) -> int:
    """Smallest input size >= input_size whose lattice contains the output nodes"""
    stride = max(1, math.ceil((input_size - 1) / (output_size - 1)))
    return stride * (output_size - 1) + 1


def _timed(q: ScalarField, lam: float, out: Grid2, cfg: EngineConfig):
    start = time.perf_counter()
    result = main_term_grid(q, lam, out, cfg)
    return result, time.perf_counter() - start


def run_benchmark(input_size: int = 512, output_size: int = 64, lam: float = 10.0,
                  engines: Sequence[str] = ENGINES, width: float = 0.15,
                  time_budget: float = 60.0, threads: Optional[int] = None) -> BenchReport:
    """
    Time each engine on a centered Gaussian over [-1, 1]^2

    When a full engine run is projected to exceed time_budget, only the first
    output rows are evaluated and the time is extrapolated linearly in the
    row count; the row is flagged as extrapolated and its accuracy is measured
    on the timed rows.

    Args:
        input_size: Requested input points per axis (rounded up for nesting)
        output_size: Output points per axis
        lam: Frequency
        engines: Engines to time; the spectral engine is always the reference
        width: Gaussian width
        time_budget: Seconds allowed per engine before extrapolating
        threads: Worker cap

    Returns:
        BenchReport with one row per engine
    """
    for engine in engines:
        if engine not in ENGINES:
            raise ValueError(f"Unknown engine '{engine}', expected one of {ENGINES}")
    n_in = nested_input_size(input_size, output_size)
    if n_in != input_size:
        logger.info(f"Input size {input_size} adjusted to {n_in} so output nodes are input nodes")
    grid, out = Grid2.square(1.0, n_in), Grid2.square(1.0, output_size)
    q = render_phantom(gaussian_spec(width=width, half_width=1.0), grid)

    reference, ref_time = _timed(q, lam, out, EngineConfig(engine="spectral", refinement=1, threads=threads))
    report = BenchReport(lam)
    timings: Dict[str, float] = {}
    for engine in engines:
        cfg = EngineConfig(engine=engine, refinement=1, threads=threads)
        if engine == "spectral":
            report.rows.append(BenchRow(engine, n_in, output_size, ref_time, False, out.ny))
            timings[engine] = ref_time
            continue
        # Grid2 needs two rows, so the probe times a pair
        probe = Grid2(out.origin, out.spacing, out.nx, PROBE_ROWS)
        _, probe_time = _timed(q, lam, probe, cfg)
        row_time = probe_time / PROBE_ROWS
        projected = row_time * out.ny
        if projected <= time_budget:
            result, seconds = _timed(q, lam, out, cfg)
            diff = float(np.max(np.abs(result.samples - reference.samples)))
            row = BenchRow(engine, n_in, output_size, seconds, False, out.ny, diff)
        else:
            rows = max(PROBE_ROWS, min(out.ny, int(time_budget / max(row_time, 1e-9) / 4)))
            part = Grid2(out.origin, out.spacing, out.nx, rows)
            result, seconds = _timed(q, lam, part, cfg)
            diff = float(np.max(np.abs(result.samples - reference.samples[:rows])))
            seconds *= out.ny / rows
            logger.warning(f"{engine} engine extrapolated from {rows} of {out.ny} output rows: {seconds:.1f}s")
            row = BenchRow(engine, n_in, output_size, seconds, True, rows, diff)
        report.rows.append(row)
        timings[engine] = row.seconds
    for row in report.rows:
        row.speedup = row.seconds / ref_time if ref_time > 0 else float("inf")
    logger.info(f"Benchmark at lambda={lam:g}, {n_in}^2 -> {output_size}^2: "
                + ", ".join(f"{k}={v:.2f}s" for k, v in timings.items()))
    return report
