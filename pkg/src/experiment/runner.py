"""
Experiment Runner for bklab
Executes a RunSpec: reconstructions for every (lambda, method), the sigma
search, error tables, images, snapshots and the manifest
"""
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

from tqdm import tqdm

from src.averaging.mollifier import MollifierSpec, default_sigma_grid, mollify
from src.averaging.polar_averaging import angular_average_recon, freq_average_recon
from src.database.db_manager import ResultsStore
from src.experiment.artifacts import auto_window, file_digest, write_manifest, write_pgm
from src.experiment.run_spec import RunSpec
from src.fields.field_core import ScalarField
from src.fields.snapshot import write_snapshot
from src.oscillatory_engine import main_term_grid
from src.phantoms.phantom_generator import render_phantom
from src.utils.logger import setup_logger
from src.utils.parallel import ordered_map
from src.verify.metrics import ErrorReport, SIGMA_BASE, emit_error_table, l1_error, search_sigma

logger = setup_logger(__name__)

ERRORS_CSV = "errors.csv"
ERRORS_OMEGA_CSV = "errors_omega.csv"
TABLE_TXT = "table.txt"
MANIFEST_JSON = "manifest.json"
TRUTH_STEM = "truth"


@dataclass
class RunResult:
    """Everything a finished run produced"""
    spec: RunSpec
    output_dir: Path
    report: ErrorReport
    omega_report: ErrorReport
    table: str
    artifacts: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    run_id: Optional[int] = None


def artifact_stem(method: str, lam: float) -> str:
    return f"{method}_lam{lam:g}"


class ExperimentRunner:
    """
    Runs experiment specifications and writes their artifacts
    """

    def __init__(self, store: Optional[ResultsStore] = None, show_progress: bool = True,
                 progress_callback: Optional[Callable[[str, float], None]] = None):
        """
        Initialize the runner

        Args:
            store: Run history store; nothing is recorded when None
            show_progress: Display a tqdm progress bar
            progress_callback: Called with (job label, fraction done) after every job
        """
        self.store = store
        self.show_progress = show_progress
        self.progress_callback = progress_callback

    def _bases(self, spec: RunSpec, q: ScalarField, lam: float) -> Dict[str, Tuple[ScalarField, float]]:
        """Unmollified reconstructions needed at one frequency, with their timings"""
        out = spec.output_grid()
        cfg, p = spec.engine, spec.averaging
        needed = ["standard"]
        if any(m in spec.methods for m in ("angular", "combined")):
            needed.append("angular")
        if "freq" in spec.methods:
            needed.append("freq")
        builders = {
            "standard": lambda: main_term_grid(q, lam, out, cfg),
            "angular": lambda: angular_average_recon(q, lam, out, p, cfg),
            "freq": lambda: freq_average_recon(q, lam, out, p, cfg),
        }

        def build(name: str) -> Tuple[ScalarField, float]:
            start = time.perf_counter()
            recon = builders[name]()
            return recon, time.perf_counter() - start

        return dict(zip(needed, ordered_map(build, needed, cfg.threads)))

    def run(self, spec: RunSpec) -> RunResult:
        """
        Execute a run specification

        Args:
            spec: Experiment description

        Returns:
            RunResult with the error reports and artifact digests

        Raises:
            OSError: output directory not writable
        """
        out_dir = Path(spec.resolved_output_dir())
        start = time.perf_counter()
        logger.info(f"Run '{spec.name}': lambdas={list(spec.lambdas)} methods={list(spec.methods)} "
                    f"engine={spec.engine.engine} output={spec.output_size}^2")
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            result = self._execute(spec, out_dir)
        except Exception as e:
            logger.error(f"Run '{spec.name}' failed: {e}")
            if self.store is not None:
                self.store.record_run(spec.name, spec.spec_hash(), "failed",
                                      time.perf_counter() - start, str(out_dir), summary={"error": str(e)})
            raise
        duration = time.perf_counter() - start
        if self.store is not None:
            rows = [{**e.to_row(), "domain": "frame"} for e in result.report.entries]
            rows += [{**e.to_row(), "domain": "omega"} for e in result.omega_report.entries]
            result.run_id = self.store.record_run(spec.name, spec.spec_hash(), "completed", duration, str(out_dir),
                                                  rows, {"engine": spec.engine.engine, "rows": len(result.report)})
        logger.info(f"Run '{spec.name}' completed in {duration:.1f}s -> {out_dir}")
        return result

    def _execute(self, spec: RunSpec, out_dir: Path) -> RunResult:
        out = spec.output_grid()
        q = render_phantom(spec.phantom, spec.input_grid())
        truth = render_phantom(spec.phantom, out)
        window = auto_window(truth) if spec.window == "auto" else spec.window
        phantom = spec.phantom.name
        report, omega_report = ErrorReport(), ErrorReport()
        artifacts: Dict[str, str] = {}
        # the true potential is the first panel, on the shared window
        artifacts.update(self._write_fields(truth, window, out_dir, TRUTH_STEM, spec.snapshots))
        timings: Dict[str, float] = {}
        methods = ["standard"] + [m for m in spec.methods if m != "standard"]
        total = len(spec.lambdas) * len(methods)
        done = 0

        with tqdm(total=total, desc=spec.name, disable=not self.show_progress) as bar:
            for lam in spec.lambdas:
                bases = self._bases(spec, q, lam)
                sigmas = spec.averaging.sigma_grid or default_sigma_grid(out.spacing, lam)
                for method in methods:
                    label = artifact_stem(method, lam)
                    t0 = time.perf_counter()
                    sigma = None
                    if method in SIGMA_BASE:
                        base, base_time = bases[SIGMA_BASE[method]]
                        sigma, error = search_sigma(base, truth, sigmas, "frame", spec.engine.threads)
                        recon = mollify(base, MollifierSpec(sigma))
                    else:
                        recon, base_time = bases[method]
                        error = l1_error(recon, truth, "frame")
                    report.add(phantom, lam, method, error, sigma)
                    omega_report.add(phantom, lam, method, l1_error(recon, truth, "omega"), sigma)
                    timings[label] = base_time + time.perf_counter() - t0
                    if method in spec.methods:
                        artifacts.update(self._write_fields(recon, window, out_dir, label, spec.snapshots))
                    done += 1
                    bar.update(1)
                    if self.progress_callback:
                        self.progress_callback(label, done / total)

        csv_text, table = emit_error_table(report, str(out_dir / ERRORS_CSV))
        emit_error_table(omega_report, str(out_dir / ERRORS_OMEGA_CSV))
        (out_dir / TABLE_TXT).write_text(table + "\n", encoding="utf-8")
        for name in (ERRORS_CSV, ERRORS_OMEGA_CSV, TABLE_TXT):
            artifacts[name] = file_digest(out_dir / name)
        write_manifest(out_dir / MANIFEST_JSON, spec.to_dict(), artifacts, timings,
                       {"spec_hash": spec.spec_hash(), "window": list(window)})
        return RunResult(spec, out_dir, report, omega_report, table, artifacts, timings)

    def _write_fields(self, recon: ScalarField, window: Tuple[float, float], out_dir: Path, label: str,
                      snapshots: bool) -> Dict[str, str]:
        written = {}
        pgm = write_pgm(recon, window, out_dir / f"{label}.pgm")
        written[pgm.name] = file_digest(pgm)
        if snapshots:
            snap = write_snapshot(recon, out_dir / f"{label}.bkf")
            written[snap.name] = file_digest(snap)
        return written
