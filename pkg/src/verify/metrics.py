"""
Error Metrics for bklab
L1 errors against the true phantom, error-reduction accounting and the sigma search
"""
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.averaging.mollifier import MollifierSpec, mollify
from src.averaging.polar_averaging import AveragingParams, angular_average_recon
from src.fields.field_core import Grid2, ScalarField
from src.oscillatory_engine import EngineConfig, main_term_grid
from src.utils.errors import GridMismatchError
from src.utils.logger import setup_logger
from src.utils.parallel import ordered_map

logger = setup_logger(__name__)

METHODS = ("standard", "mollifier", "angular", "combined", "freq")
TABLE_METHODS = ("mollifier", "angular", "combined")
DOMAINS = ("frame", "omega")
CSV_COLUMNS = ["phantom", "lambda", "method", "l1_error", "reduction_pct", "sigma"]
CSV_FLOAT_FORMAT = "%.9g"

# Base reconstruction each sigma-searched method mollifies
SIGMA_BASE = {"mollifier": "standard", "combined": "angular"}

# Averaged methods checked by suite_property_violations
TREND_METHODS = ("angular", "combined")
COMBINED_SLACK_PCT = 1.0


def l1_error(recon: ScalarField, truth: ScalarField, domain: str = "frame") -> float:
    """
    Discrete L1 distance sum |recon - truth| h^2

    Args:
        recon: Reconstruction
        truth: True potential on the same grid
        domain: "frame" for every node, "omega" for the nodes where truth is nonzero

    Raises:
        GridMismatchError: the fields live on different grids
    """
    if not recon.grid.matches(truth.grid):
        raise GridMismatchError(f"Cannot compare fields on {recon.grid} and {truth.grid}")
    if domain not in DOMAINS:
        raise ValueError(f"Unknown error domain '{domain}', expected one of {DOMAINS}")
    diff = np.abs(recon.samples - truth.samples)
    if domain == "omega":
        diff = diff[truth.samples != 0]
    return float(np.sum(diff) * recon.grid.spacing ** 2)


def reduction_pct(error: float, standard: float) -> float:
    """Percentage decrease of error relative to the standard main term"""
    if standard == 0.0:
        return 0.0
    return 100.0 * (1.0 - error / standard)


@dataclass(frozen=True)
class ErrorEntry:
    """One row of the error table"""
    phantom: str
    lam: float
    method: str
    l1_error: float
    reduction_pct: float = 0.0
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown method '{self.method}', expected one of {METHODS}")
        if not self.l1_error >= 0:
            raise ValueError(f"L1 error must be nonnegative, got {self.l1_error}")

    def to_row(self) -> Dict:
        return {
            "phantom": self.phantom,
            "lambda": self.lam,
            "method": self.method,
            "l1_error": self.l1_error,
            "reduction_pct": self.reduction_pct,
            "sigma": self.sigma,
        }


@dataclass
class ErrorReport:
    """Error table for one or more phantoms and frequencies"""
    entries: List[ErrorEntry] = field(default_factory=list)

    def add(self, phantom: str, lam: float, method: str, l1: float, sigma: Optional[float] = None) -> ErrorEntry:
        """
        Append a row, computing its reduction against the standard row of the same (phantom, lambda)

        The standard row must be added first; standard rows carry 0%.
        """
        if method == "standard":
            entry = ErrorEntry(phantom, lam, method, l1, 0.0, sigma)
        else:
            base = self.standard_error(phantom, lam)
            pct = reduction_pct(l1, base) if base is not None else 0.0
            if base is None:
                logger.warning(f"No standard row for {phantom} at lambda={lam:g}; reduction left at 0%")
            entry = ErrorEntry(phantom, lam, method, l1, pct, sigma)
        self.entries.append(entry)
        return entry

    def standard_error(self, phantom: str, lam: float) -> Optional[float]:
        for entry in self.entries:
            if entry.method == "standard" and entry.phantom == phantom and entry.lam == lam:
                return entry.l1_error
        return None

    def extend(self, other: "ErrorReport"):
        self.entries.extend(other.entries)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_row() for e in self.entries], columns=CSV_COLUMNS)

    def __len__(self) -> int:
        return len(self.entries)


def suite_property_violations(report: ErrorReport, trend_phantoms: Sequence[str] = ("rectangles",),
                              slack: float = COMBINED_SLACK_PCT) -> List[str]:
    """
    Qualitative checks on a suite error report

    For every phantom the angular and combined reductions must be positive at
    its largest lambda and combined may trail angular by at most slack points
    at every lambda. For trend_phantoms both reductions must be non-decreasing
    in lambda.

    Returns:
        Human-readable violations, empty when all properties hold
    """
    reductions: Dict[str, Dict[str, Dict[float, float]]] = {}
    for entry in report.entries:
        if entry.method in TREND_METHODS:
            reductions.setdefault(entry.phantom, {}).setdefault(entry.method, {})[entry.lam] = entry.reduction_pct

    violations = []
    for phantom in sorted({e.phantom for e in report.entries}):
        methods = reductions.get(phantom, {})
        missing = [m for m in TREND_METHODS if m not in methods]
        if missing:
            violations.append(f"{phantom}: no rows for {missing}")
            continue
        angular, combined = methods["angular"], methods["combined"]
        for method, values in methods.items():
            top = max(values)
            if values[top] <= 0.0:
                violations.append(f"{phantom}: {method} reduction {values[top]:.2f}% at lambda={top:g} is not positive")
        for lam in sorted(angular):
            if lam in combined and combined[lam] < angular[lam] - slack:
                violations.append(f"{phantom}: combined {combined[lam]:.2f}% trails angular {angular[lam]:.2f}% "
                                  f"at lambda={lam:g}")
        if phantom not in trend_phantoms:
            continue
        for method, values in methods.items():
            lams = sorted(values)
            for lo, hi in zip(lams, lams[1:]):
                if values[hi] < values[lo]:
                    violations.append(f"{phantom}: {method} reduction drops from {values[lo]:.2f}% at "
                                      f"lambda={lo:g} to {values[hi]:.2f}% at lambda={hi:g}")
    return violations


def search_sigma(base: ScalarField, truth: ScalarField, sigma_grid: Sequence[float],
                 domain: str = "frame", threads: Optional[int] = None) -> Tuple[float, float]:
    """
    Exhaustive sigma search: mollify base with every width and keep the smallest error

    Ties go to the smaller sigma.

    Returns:
        (sigma, l1 error)
    """
    if not sigma_grid:
        raise ValueError("sigma_grid must not be empty")
    sigmas = sorted(float(s) for s in sigma_grid)
    errors = ordered_map(lambda s: l1_error(mollify(base, MollifierSpec(s)), truth, domain), sigmas, threads)
    best = int(np.argmin(errors))
    logger.debug(f"Sigma search over {len(sigmas)} widths: best sigma={sigmas[best]:.4g} error={errors[best]:.6g}")
    if len(sigmas) > 1 and best == len(sigmas) - 1:
        logger.warning(f"Best sigma {sigmas[best]:.4g} is the largest candidate; the search hit the top of its grid")
    return sigmas[best], float(errors[best])


def best_sigma(q: ScalarField, lam: float, out: Grid2, sigma_grid: Sequence[float], base: str,
               truth: ScalarField, p: Optional[AveragingParams] = None, cfg: Optional[EngineConfig] = None,
               phantom: str = "", domain: str = "frame") -> Tuple[float, ErrorEntry]:
    """
    Mollifier width that best reduces the L1 error of a base reconstruction

    Args:
        q: Input potential
        lam: Frequency
        out: Output grid, the grid of truth
        sigma_grid: Candidate widths, each at least out.spacing
        base: "standard" (mollifier method) or "angular" (combined method)
        truth: True potential on out
        p: Averaging parameters for the angular base
        cfg: Engine configuration
        phantom: Phantom id for the returned row
        domain: Error domain

    Returns:
        (sigma, row) where the row's reduction is taken against the standard main term
    """
    if base not in SIGMA_BASE.values():
        raise ValueError(f"Unknown sigma base '{base}', expected one of {tuple(SIGMA_BASE.values())}")
    threads = cfg.threads if cfg is not None else None
    standard = main_term_grid(q, lam, out, cfg)
    recon = standard if base == "standard" else angular_average_recon(q, lam, out, p or AveragingParams(), cfg)
    sigma, error = search_sigma(recon, truth, sigma_grid, domain, threads)
    method = "mollifier" if base == "standard" else "combined"
    pct = reduction_pct(error, l1_error(standard, truth, domain))
    return sigma, ErrorEntry(phantom, lam, method, error, pct, sigma)


def error_table_text(report: ErrorReport) -> str:
    """
    Reduction table with one row per (phantom, lambda) and one column per averaging method

    Methods without a row are left blank.
    """
    frame = report.to_frame()
    frame = frame[frame["method"].isin(TABLE_METHODS)]
    if frame.empty:
        return "phantom  lambda  " + "  ".join(TABLE_METHODS)
    order = report.to_frame()[["phantom", "lambda"]].drop_duplicates()
    table = frame.pivot_table(index=["phantom", "lambda"], columns="method", values="reduction_pct", aggfunc="first")
    table = table.reindex(columns=list(TABLE_METHODS))
    table = table.reindex(pd.MultiIndex.from_frame(order)).dropna(how="all")
    return table.to_string(na_rep="", float_format=lambda v: f"{v:.1f}%")


def emit_error_table(report: ErrorReport, csv_path: Optional[str] = None) -> Tuple[str, str]:
    """
    Serialize an error report

    Args:
        report: Rows to write
        csv_path: Also write the CSV here when given

    Returns:
        (CSV text, formatted reduction table)
    """
    buffer = io.StringIO()
    report.to_frame().to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    csv_text = buffer.getvalue()
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
        logger.info(f"Error table written: {csv_path} ({len(report)} rows)")
    return csv_text, error_table_text(report)
