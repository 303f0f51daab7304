"""
Numerical checks of the convergence and averaging properties behind the
reconstruction: decay rates, mollifier bounds, the frequency/radial
averaging identity and the agreement of engines and averaging paths.

Every check returns a CheckReport; none raises on failure.
"""
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from src.averaging.mollifier import MollifierSpec, default_sigma_grid, mollify
from src.averaging.polar_averaging import (
    AveragingParams, FrequencySeries, angular_average_recon, freq_average, frequency_lattice, radial_smooth,
)
from src.experiment.run_spec import DESK_SUITE, load_run_specs
from src.experiment.runner import ExperimentRunner
from src.fields.field_core import Grid2, RadialProfile, ScalarField, sobolev_norm
from src.oscillatory_engine import (
    ENGINES, EngineConfig, PhaseContext, main_term_grid, main_term_point, resolution_spacing,
)
from src.phantoms.phantom_generator import gaussian_spec, load_preset, render_phantom
from src.utils.logger import setup_logger
from src.utils.parallel import ordered_map
from src.verify.metrics import ErrorReport, suite_property_violations
from src.verify.oracles import gaussian_main_term, radial_main_term_at_center

logger = setup_logger(__name__)

SUITES = ("lemmas", "engines", "desk", "all")
DEFAULT_LADDER = (10.0, 20.0, 40.0, 80.0, 160.0)

# Slack added to every predicted decay exponent
SLOPE_TOLERANCE = 0.15


@dataclass
class CheckReport:
    """Outcome of one numerical check"""
    name: str
    passed: bool
    measured: Dict[str, Any] = field(default_factory=dict)
    note: str = ""
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "note": self.note, "seconds": round(self.seconds, 3)}

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.note}"


def _bump(power: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def func(x, y):
        return np.clip(1.0 - x ** 2 - y ** 2, 0.0, None) ** power
    return func


def fit_slope(lambdas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log error against log lambda"""
    slope, _ = np.polyfit(np.log(np.asarray(lambdas, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


def check_lemma_statphase(test: str = "gaussian", s_prime: Optional[float] = None,
                          lambdas: Sequence[float] = DEFAULT_LADDER, n: int = 257) -> CheckReport:
    """
    Decay of sup |T^lambda[q] - q| along a frequency ladder

    The main term is evaluated with the Fourier-multiplier engine, which is
    exact for the trigonometric interpolant of the samples at any lambda.
    PASS iff the fitted slope is at most (1 - s_prime) / 2 + SLOPE_TOLERANCE.

    Args:
        test: "gaussian" (s_prime defaults to 3), "bump" for (1 - |z|^2)_+^2 (s_prime 2) or "zero"
        s_prime: Smoothness index the prediction uses
        lambdas: Frequency ladder
        n: Grid points per axis
    """
    start = time.time()
    name = f"statphase[{test}]"
    if test == "gaussian":
        grid = Grid2.square(8.0, n)
        q = ScalarField.from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2)))
        s_prime = 3.0 if s_prime is None else s_prime
    elif test == "bump":
        grid = Grid2.square(2.0, n)
        q = ScalarField.from_function(grid, _bump(2.0))
        s_prime = 2.0 if s_prime is None else s_prime
    elif test == "zero":
        return CheckReport(name, True, {}, "zero potential, vacuous", time.time() - start)
    else:
        raise ValueError(f"Unknown stationary-phase test function '{test}'")
    cfg = EngineConfig(engine="spectral", spectral_kernel="analytic")
    errors = [float(np.max(np.abs(main_term_grid(q, lam, grid, cfg).samples - q.samples))) for lam in lambdas]
    slope = fit_slope(lambdas, errors)
    bound = (1.0 - s_prime) / 2.0 + SLOPE_TOLERANCE
    return CheckReport(name, slope <= bound,
                       {"lambdas": list(lambdas), "errors": errors, "slope": slope, "bound": bound},
                       f"slope {slope:.3f} vs bound {bound:.3f}", time.time() - start)


def _derivative(func: Callable[[np.ndarray], np.ndarray], k: int, step: float) -> Callable[[np.ndarray], np.ndarray]:
    if k == 0:
        return func
    return lambda t: (func(t + step) - func(t - step)) / (2.0 * step)


def srad_derivative_formula(f: Callable[[np.ndarray], np.ndarray], k: int, t: float, step: float = 1e-5) -> float:
    """
    Closed formula for the (k+1)-th derivative of g = S_rad[f] at t, k in {0, 1}

    g^(k+1)(t) = (2/t) f^(k)(t) - (2^(2-k/2)/t) f^(k)(t/sqrt 2)
                 + ((4-2k)/t) integral over s in [1/sqrt 2, 1] of f^(k)(t s) s^(k-3)
    """
    if k not in (0, 1):
        raise ValueError(f"Derivative order must be 0 or 1, got {k}")
    if t < 0.05:
        raise ValueError(f"The derivative formula is singular at t=0; got t={t}")
    fk = _derivative(f, k, step)
    tail, _ = integrate.quad(lambda s: float(fk(np.array(t * s))) * s ** (k - 3), 1.0 / math.sqrt(2.0), 1.0,
                             epsabs=1e-13, epsrel=1e-12)
    return float((2.0 / t) * fk(np.array(t)) - (2.0 ** (2.0 - k / 2.0) / t) * fk(np.array(t / math.sqrt(2.0)))
                 + ((4.0 - 2.0 * k) / t) * tail)


def check_lemma_freqavg_derivative(f: Callable[[np.ndarray], np.ndarray], k: int = 0, t: float = 1.0,
                                   n_srad: int = 512, nr: int = 40001, step: float = 1e-2,
                                   label: str = "f") -> CheckReport:
    """
    Finite differences of the computed S_rad[f] against the closed derivative formula

    PASS iff the relative error is at most 1e-3 (or both sides vanish to 1e-8).
    """
    start = time.time()
    rhs = srad_derivative_formula(f, k, t)
    profile = RadialProfile.from_function(f, 2.0 * t, nr)
    g = radial_smooth(profile, AveragingParams(n_srad=n_srad)).at(np.array([t - step, t, t + step])).real
    if k == 0:
        lhs = (g[2] - g[0]) / (2.0 * step)
    else:
        lhs = (g[2] - 2.0 * g[1] + g[0]) / step ** 2
    err = abs(lhs - rhs)
    passed = err <= 1e-3 * abs(rhs) or (abs(lhs) <= 1e-8 and abs(rhs) <= 1e-8)
    rel = err / abs(rhs) if rhs else err
    return CheckReport(f"freqavg_derivative[{label}, k={k}]", passed,
                       {"t": t, "finite_difference": float(lhs), "formula": rhs, "relative_error": float(rel)},
                       f"finite difference {lhs:.6g} vs formula {rhs:.6g}", time.time() - start)


def check_lemma_alambda(f: Callable[[np.ndarray], np.ndarray], r_max: float = 1.0,
                        lambdas: Sequence[float] = (10.0, 20.0, 40.0), tol: float = 1e-3,
                        refine: int = 1, label: str = "f") -> CheckReport:
    """
    Frequency average of t -> T^t[f](0) against T^lambda[S_rad f](0) for a radial f

    Both sides use Gauss-Legendre quadrature in r; the left side samples the
    frequency window on a uniform lattice, the right side smooths a finely
    sampled profile. refine multiplies every quadrature count.
    """
    start = time.time()
    nodes = 2000 * refine
    reach = r_max * math.sqrt(2.0)
    profile = RadialProfile.from_function(lambda r: np.where(r < r_max, f(np.minimum(r, r_max)), 0.0),
                                          reach, 8000 * refine + 1)
    smoothed = radial_smooth(profile, AveragingParams(n_srad=256 * refine))
    rows = []
    for lam in lambdas:
        series = FrequencySeries.sample(lambda t: radial_main_term_at_center(f, t, r_max, nodes),
                                        frequency_lattice(lam, 256 * refine))
        lhs = freq_average(series, lam)
        rhs = radial_main_term_at_center(smoothed.at, lam, reach, nodes)
        rows.append({"lambda": lam, "freq_average": lhs, "smoothed": rhs, "difference": abs(lhs - rhs)})
    worst = max(r["difference"] for r in rows)
    measured = {"rows": [{k: (str(v) if isinstance(v, complex) else v) for k, v in r.items()} for r in rows],
                "max_difference": worst}
    return CheckReport(f"alambda[{label}]", worst <= tol, measured,
                       f"max difference {worst:.3g} (tolerance {tol:g})", time.time() - start)


def check_lemma_holder(lam: float = 10.0, n: int = 401, half_width: float = 4.0) -> CheckReport:
    """sup |mollify(q, sigma) - q| <= sigma for the Lipschitz ridge max(0, 1 - |z1|), every default sigma"""
    start = time.time()
    grid = Grid2.square(half_width, n)
    ridge = ScalarField.from_function(grid, lambda x, y: np.maximum(0.0, 1.0 - np.abs(x)) + 0.0 * y)
    ratios = []
    for sigma in default_sigma_grid(grid.spacing, lam):
        margin = int(math.ceil(sigma / grid.spacing)) + 1
        if 2 * margin >= n:
            continue
        error = np.abs(mollify(ridge, MollifierSpec(sigma)).samples - ridge.samples)
        ratios.append((sigma, float(error[margin:-margin, margin:-margin].max()) / sigma))
    worst = max(r for _, r in ratios)
    return CheckReport("holder", worst <= 1.0, {"sigma_ratio": ratios, "max_ratio": worst},
                       f"max sup-error / sigma = {worst:.3f}", time.time() - start)


def lacunary_field(grid: Grid2, s: float = 0.5, octaves: int = 8) -> ScalarField:
    """Smooth cutoff times sum over k of 2^(-k s) cos(2^k z1), a function of Sobolev order s"""
    def func(x, y):
        series = sum(2.0 ** (-k * s) * np.cos(2.0 ** k * x) for k in range(1, octaves + 1))
        return _bump(4.0)(x, y) * series
    return ScalarField.from_function(grid, func)


def check_lemma_convolution_size(s: float = 0.5, s_prime: float = 2.0, n: int = 1025, octaves: int = 10,
                                 sigmas: Sequence[float] = (0.2, 0.1, 0.05, 0.025)) -> CheckReport:
    """
    |mollify(q, sigma)|_(H^s') grows like sigma^(s - s') for q of order s

    PASS iff sigma^(s' - s) times the norm changes by less than a factor 2
    between consecutive halvings of sigma.
    """
    start = time.time()
    grid = Grid2.square(1.0, n)
    q = lacunary_field(grid, s, octaves)
    scaled = [sobolev_norm(mollify(q, MollifierSpec(sig)), s_prime) * sig ** (s_prime - s) for sig in sigmas]
    ratios = [b / a for a, b in zip(scaled, scaled[1:])]
    passed = all(0.5 < r < 2.0 for r in ratios)
    return CheckReport("convolution_size", passed, {"sigmas": list(sigmas), "scaled_norms": scaled, "ratios": ratios},
                       f"consecutive ratios in [{min(ratios):.3f}, {max(ratios):.3f}]", time.time() - start)


def check_lemma_support(a: float = 0.5, b: float = 1.0, nr: int = 401, n_srad: int = 128) -> CheckReport:
    """S_rad of a profile supported in (a, b) vanishes outside (a, b sqrt 2) up to one radial cell"""
    start = time.time()
    r_max = 2.0 * b
    profile = RadialProfile.from_function(lambda r: ((r > a) & (r < b)).astype(float), r_max, nr)
    out = radial_smooth(profile, AveragingParams(n_srad=n_srad))
    r, dr = profile.radii, profile.dr
    nonzero = r[np.abs(out.values) > 0]
    lo, hi = float(nonzero.min()), float(nonzero.max())
    # linear interpolation widens the input support by one cell on each side
    passed = lo >= a - dr and hi <= b * math.sqrt(2.0) + 2.0 * dr
    return CheckReport("support", passed, {"support": [lo, hi], "bound": [a, b * math.sqrt(2.0)], "cell": dr},
                       f"support [{lo:.4f}, {hi:.4f}] vs ({a:g}, {b * math.sqrt(2.0):.4f})", time.time() - start)


def check_engine_agreement(lambdas: Sequence[float] = (10.0, 40.0), n_in: int = 253, n_out: int = 64,
                           width: float = 0.15, tol: float = 1e-3) -> CheckReport:
    """Naive, separable and spectral engines on one Gaussian job; PASS iff pairwise max-abs <= tol"""
    start = time.time()
    grid, out = Grid2.square(1.0, n_in), Grid2.square(1.0, n_out)
    q = render_phantom(gaussian_spec(width=width, half_width=1.0), grid)
    measured, worst = {}, 0.0
    for lam in lambdas:
        results = {e: main_term_grid(q, lam, out, EngineConfig(engine=e)).samples for e in ENGINES}
        for i, a in enumerate(ENGINES):
            for b in ENGINES[i + 1:]:
                diff = float(np.max(np.abs(results[a] - results[b])))
                measured[f"{a}-{b}@{lam:g}"] = diff
                worst = max(worst, diff)
    return CheckReport("engine_agreement", worst <= tol, measured,
                       f"max engine difference {worst:.3g}", time.time() - start)


def check_closed_form(lam: float = 10.0, tol: float = 1e-4) -> CheckReport:
    """main_term_point of the unit Gaussian at the origin against lam / sqrt(1 + lam^2)"""
    start = time.time()
    spec = gaussian_spec(width=1.0, half_width=8.0)
    n = int(math.ceil(2.0 * spec.half_width / resolution_spacing(lam, spec.support_half_width()))) + 1
    q = render_phantom(spec, Grid2.square(spec.half_width, n))
    value = main_term_point(q, PhaseContext((0.0, 0.0), lam), EngineConfig(refinement=1))
    exact = gaussian_main_term((0.0, 0.0), lam)
    diff = abs(value - exact)
    return CheckReport("closed_form", diff <= tol, {"value": str(value), "exact": str(exact), "difference": diff,
                                                    "grid": n},
                       f"|T - {exact.real:.6f}| = {diff:.3g}", time.time() - start)


def check_angular_paths(lam: float = 10.0, n_in: int = 253, n_out: int = 64, n_angles: int = 256,
                        tol: float = 1e-3) -> CheckReport:
    """Bessel-kernel angular average against the rotated-chirp quadrature on the rectangles phantom"""
    start = time.time()
    grid, out = Grid2.square(1.0, n_in), Grid2.square(1.0, n_out)
    q = render_phantom(load_preset("rectangles"), grid)
    p = AveragingParams(n_angles=n_angles)
    cfg = EngineConfig(refinement=1)
    fast = angular_average_recon(q, lam, out, p, cfg, path="fast")
    reference = angular_average_recon(q, lam, out, p, cfg, path="reference")
    diff = float(np.max(np.abs(fast.samples - reference.samples)))
    return CheckReport("angular_paths", diff <= tol, {"max_difference": diff},
                       f"fast vs reference {diff:.3g}", time.time() - start)


def check_desk_suite(suite_path: Optional[str] = None, threads: Optional[int] = None) -> CheckReport:
    """
    Run the desk suite and check its qualitative reduction properties

    PASS iff suite_property_violations finds nothing: positive angular and
    combined reductions at each phantom's largest lambda, combined within one
    point of angular, and a non-decreasing rectangles trend.
    """
    start = time.time()
    specs = load_run_specs(str(suite_path or DESK_SUITE))
    runner = ExperimentRunner(show_progress=False)
    report = ErrorReport()
    with tempfile.TemporaryDirectory() as temp_dir:
        for spec in specs:
            engine = replace(spec.engine, threads=threads) if threads else spec.engine
            spec = replace(spec, engine=engine, output_dir=os.path.join(temp_dir, spec.name))
            report.extend(runner.run(spec).report)
    violations = suite_property_violations(report)
    measured = {f"{e.phantom}@{e.lam:g}/{e.method}": round(e.reduction_pct, 2)
                for e in report.entries if e.method != "standard"}
    note = "; ".join(violations) if violations else f"{len(specs)} runs, {len(report)} rows, all properties hold"
    return CheckReport("desk_suite", not violations, measured, note, time.time() - start)


def _lemma_jobs() -> List[Callable[[], CheckReport]]:
    square = lambda t: t ** 2  # noqa: E731
    bump = lambda r: np.clip(1.0 - r ** 2, 0.0, None) ** 3  # noqa: E731
    return [
        lambda: check_lemma_statphase("gaussian"),
        lambda: check_lemma_statphase("bump"),
        lambda: check_lemma_statphase("zero"),
        lambda: check_lemma_freqavg_derivative(square, 0, label="t^2"),
        lambda: check_lemma_freqavg_derivative(square, 1, label="t^2"),
        lambda: check_lemma_freqavg_derivative(lambda t: np.full(np.shape(t), 1.0), 0, label="const"),
        lambda: check_lemma_alambda(bump, label="bump"),
        lambda: check_lemma_alambda(lambda r: np.ones(np.shape(r)), tol=1e-2, label="disc"),
        check_lemma_holder,
        check_lemma_convolution_size,
        check_lemma_support,
    ]


def _engine_jobs() -> List[Callable[[], CheckReport]]:
    return [check_engine_agreement, check_closed_form, check_angular_paths]


def run_checks(suite: str = "all", threads: Optional[int] = None) -> List[CheckReport]:
    """
    Run a verification suite

    Args:
        suite: "lemmas", "engines", "desk" or "all"
        threads: Concurrent checks

    Returns:
        One report per check, in a fixed order
    """
    if suite not in SUITES:
        raise ValueError(f"Unknown verification suite '{suite}', expected one of {SUITES}")
    jobs = []
    if suite in ("lemmas", "all"):
        jobs += _lemma_jobs()
    if suite in ("engines", "all"):
        jobs += _engine_jobs()
    if suite in ("desk", "all"):
        jobs.append(check_desk_suite)
    reports = ordered_map(lambda job: job(), jobs, threads)
    for report in reports:
        log = logger.info if report.passed else logger.warning
        log(report.summary())
    return reports
