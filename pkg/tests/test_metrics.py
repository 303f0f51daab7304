"""
Unit tests for error metrics and the numerical checks
"""
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from src.fields.field_core import Grid2, ScalarField
from src.phantoms.phantom_generator import gaussian_spec, render_phantom
from src.utils.errors import GridMismatchError
from src.verify.lemma_checks import (
    CheckReport, check_lemma_alambda, check_lemma_convolution_size, check_lemma_freqavg_derivative,
    check_desk_suite, check_lemma_holder, check_lemma_statphase, check_lemma_support, fit_slope, run_checks,
    srad_derivative_formula,
)
from src.verify.metrics import (
    CSV_COLUMNS, ErrorEntry, ErrorReport, best_sigma, emit_error_table, l1_error, reduction_pct, search_sigma,
    suite_property_violations,
)


def bump3(r):
    return np.clip(1.0 - r ** 2, 0.0, None) ** 3


class TestL1Error(unittest.TestCase):
    """Test cases for l1_error"""

    def setUp(self):
        """Set up test fixtures"""
        self.grid = Grid2.square(1.0, 41)
        X, Y = self.grid.mesh()
        self.truth = ScalarField(self.grid, np.where(X ** 2 + Y ** 2 < 0.5, 1.0 + 0.5j, 0.0))

    def test_identical(self):
        """Test identical fields have zero error"""
        self.assertEqual(l1_error(self.truth, self.truth), 0.0)

    def test_constant_offset(self):
        """Test a constant offset integrates over the frame"""
        c = 0.3 - 0.4j
        recon = self.truth.with_samples(self.truth.samples + c)
        area = self.grid.nx * self.grid.ny * self.grid.spacing ** 2
        self.assertAlmostEqual(l1_error(recon, self.truth), abs(c) * area, delta=1e-12)

    def test_homogeneity(self):
        """Test the error is homogeneous"""
        rng = np.random.default_rng(3)
        recon = self.truth.with_samples(rng.normal(size=self.grid.shape))
        self.assertAlmostEqual(l1_error(recon * 2, self.truth * 2), 2 * l1_error(recon, self.truth), delta=1e-12)

    def test_omega_domain(self):
        """Test the omega domain counts only the support"""
        recon = self.truth.with_samples(self.truth.samples + 1.0)
        inside = np.count_nonzero(self.truth.samples)
        self.assertAlmostEqual(l1_error(recon, self.truth, "omega"), inside * self.grid.spacing ** 2, delta=1e-12)
        with self.assertRaises(ValueError):
            l1_error(recon, self.truth, "disc")

    def test_grid_mismatch(self):
        """Test fields on different grids are rejected"""
        with self.assertRaises(GridMismatchError):
            l1_error(ScalarField.zeros(Grid2.square(1.0, 21)), self.truth)

    def test_reduction_scale_invariant(self):
        """Test reductions do not depend on the amplitude"""
        rng = np.random.default_rng(5)
        standard = self.truth.with_samples(self.truth.samples + rng.normal(size=self.grid.shape))
        averaged = self.truth.with_samples(self.truth.samples + 0.5 * rng.normal(size=self.grid.shape))
        scale = 1.5 - 2.0j
        plain = reduction_pct(l1_error(averaged, self.truth), l1_error(standard, self.truth))
        scaled = reduction_pct(l1_error(averaged * scale, self.truth * scale),
                               l1_error(standard * scale, self.truth * scale))
        self.assertAlmostEqual(plain, scaled, delta=1e-10)
        self.assertEqual(reduction_pct(1.0, 0.0), 0.0)


class TestErrorReport(unittest.TestCase):
    """Test cases for ErrorReport and the table writer"""

    def test_reductions(self):
        """Test reductions are taken against the standard row"""
        report = ErrorReport()
        report.add("ovals", 20.0, "standard", 0.8)
        angular = report.add("ovals", 20.0, "angular", 0.6)
        self.assertAlmostEqual(angular.reduction_pct, 25.0)
        self.assertEqual(report.entries[0].reduction_pct, 0.0)

    def test_entry_validation(self):
        """Test invalid entries are rejected"""
        with self.assertRaises(ValueError):
            ErrorEntry("ovals", 10.0, "median", 0.1)
        with self.assertRaises(ValueError):
            ErrorEntry("ovals", 10.0, "angular", -0.1)

    def test_empty_table(self):
        """Test an empty report writes only the header"""
        csv_text, _ = emit_error_table(ErrorReport())
        self.assertEqual(csv_text, ",".join(CSV_COLUMNS) + "\n")

    def test_single_row_table(self):
        """Test the table writer output for one phantom"""
        report = ErrorReport()
        report.add("rectangles", 10.0, "standard", 0.5)
        report.add("rectangles", 10.0, "angular", 0.4)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "errors.csv")
            csv_text, text = emit_error_table(report, path)
            with open(path, encoding="utf-8") as fh:
                self.assertEqual(fh.read(), csv_text)
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), CSV_COLUMNS)
        self.assertEqual(len(frame), 2)
        self.assertTrue(np.isnan(frame["sigma"][0]))
        body = text.splitlines()
        self.assertEqual(sum("rectangles" in line for line in body), 1)
        self.assertIn("20.0%", text)


class TestSigmaSearch(unittest.TestCase):
    """Test cases for the sigma search"""

    def setUp(self):
        """Set up test fixtures"""
        self.out = Grid2.square(1.0, 33)

    def test_singleton(self):
        """Test a single candidate is returned"""
        grid = Grid2.square(1.0, 41)
        truth = ScalarField.from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 0.1))
        sigma, _ = search_sigma(truth, truth, [0.2])
        self.assertEqual(sigma, 0.2)

    def test_exact_data_prefers_identity(self):
        """Test exact data selects the identity sigma"""
        grid = Grid2.square(1.0, 41)
        truth = ScalarField.from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 0.1))
        sigma, error = search_sigma(truth, truth, [0.2, grid.spacing, 0.1])
        self.assertEqual(sigma, grid.spacing)
        self.assertEqual(error, 0.0)

    def test_larger_grid_never_worse(self):
        """Test a larger grid never increases the error"""
        grid = Grid2.square(1.0, 41)
        rng = np.random.default_rng(9)
        truth = ScalarField.from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 0.1))
        noisy = truth.with_samples(truth.samples + 0.2 * rng.normal(size=grid.shape))
        _, small = search_sigma(noisy, truth, [0.1, 0.2])
        _, large = search_sigma(noisy, truth, [0.1, 0.2, 0.15, 0.3])
        self.assertLessEqual(large, small)

    def test_warns_at_top_of_grid(self):
        """Test a warning is logged when the largest sigma wins"""
        grid = Grid2.square(1.0, 41)
        truth = ScalarField.from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 0.5))
        i, j = np.indices(grid.shape)
        noisy = truth.with_samples(truth.samples + 0.5 * (-1.0) ** (i + j))
        with self.assertLogs("bklab.verify.metrics", level="WARNING") as logs:
            sigma, _ = search_sigma(noisy, truth, [grid.spacing, 2 * grid.spacing])
        self.assertEqual(sigma, 2 * grid.spacing)
        self.assertIn("largest candidate", logs.output[0])

    def test_best_sigma_mollifier(self):
        """Test the mollifier row of best_sigma"""
        grid = Grid2.square(1.0, 129)
        q = render_phantom(gaussian_spec(width=0.15, half_width=1.0), grid)
        truth = render_phantom(gaussian_spec(width=0.15, half_width=1.0), self.out)
        sigmas = [self.out.spacing, 2 * self.out.spacing, 4 * self.out.spacing]
        sigma, entry = best_sigma(q, 10.0, self.out, sigmas, "standard", truth, phantom="gaussian")
        self.assertIn(sigma, sigmas)
        self.assertEqual(entry.method, "mollifier")
        self.assertEqual(entry.sigma, sigma)
        self.assertGreaterEqual(entry.reduction_pct, 0.0)
        with self.assertRaises(ValueError):
            best_sigma(q, 10.0, self.out, sigmas, "freq", truth)


def suite_report(phantom: str, rows) -> ErrorReport:
    report = ErrorReport()
    for lam, (standard, angular, combined) in rows.items():
        report.add(phantom, lam, "standard", standard)
        report.add(phantom, lam, "angular", angular)
        report.add(phantom, lam, "combined", combined, sigma=0.1)
    return report


class TestSuiteProperties(unittest.TestCase):
    """Test cases for the qualitative suite checks"""

    def test_all_properties_hold(self):
        """Test a rising, positive report has no violations"""
        report = suite_report("rectangles", {10.0: (1.0, 0.8, 0.79), 15.0: (1.0, 0.7, 0.7), 30.0: (1.0, 0.6, 0.5)})
        self.assertEqual(suite_property_violations(report), [])

    def test_rectangles_dip(self):
        """Test a drop in the rectangles trend is reported"""
        rows = {10.0: (1.0, 0.6, 0.6), 20.0: (1.0, 0.7, 0.6), 30.0: (1.0, 0.5, 0.5)}
        violations = suite_property_violations(suite_report("rectangles", rows))
        self.assertEqual(len(violations), 1)
        self.assertIn("angular reduction drops", violations[0])
        self.assertIn("lambda=20", violations[0])

    def test_trend_only_for_listed_phantoms(self):
        """Test other phantoms may dip"""
        rows = {10.0: (1.0, 0.6, 0.6), 20.0: (1.0, 0.7, 0.6), 30.0: (1.0, 0.5, 0.5)}
        self.assertEqual(suite_property_violations(suite_report("ovals", rows)), [])

    def test_combined_trails_angular(self):
        """Test combined more than one point below angular is reported"""
        report = suite_report("ovals", {20.0: (1.0, 0.60, 0.615), 30.0: (1.0, 0.5, 0.5)})
        violations = suite_property_violations(report)
        self.assertEqual(len(violations), 1)
        self.assertIn("trails", violations[0])

    def test_nonpositive_at_largest_lambda(self):
        """Test reductions must be positive at the largest lambda"""
        report = suite_report("shepp_logan", {50.0: (1.0, 0.9, 0.9), 100.0: (1.0, 1.0, 1.0)})
        violations = suite_property_violations(report)
        self.assertEqual(len(violations), 2)
        self.assertTrue(all("not positive" in v for v in violations))

    def test_missing_method(self):
        """Test a phantom without averaged rows is reported"""
        report = ErrorReport()
        report.add("ovals", 20.0, "standard", 1.0)
        self.assertIn("no rows", suite_property_violations(report)[0])


class TestLemmaChecks(unittest.TestCase):
    """Test cases for the numerical checks"""

    def test_fit_slope(self):
        """Test the log-log slope fit"""
        lambdas = [10.0, 20.0, 40.0]
        self.assertAlmostEqual(fit_slope(lambdas, [3.0 / lam for lam in lambdas]), -1.0)

    def test_statphase_gaussian(self):
        """Test the stationary phase rate for a Gaussian"""
        report = check_lemma_statphase("gaussian")
        self.assertTrue(report.passed, report.note)
        self.assertLessEqual(report.measured["slope"], -0.85)

    def test_statphase_bump(self):
        """Test the stationary phase check for a bump"""
        report = check_lemma_statphase("bump")
        self.assertTrue(report.passed, report.note)

    def test_statphase_zero(self):
        """Test the zero potential passes and unknown inputs are rejected"""
        self.assertTrue(check_lemma_statphase("zero").passed)
        with self.assertRaises(ValueError):
            check_lemma_statphase("square")

    def test_derivative_formula_quadratic(self):
        """Test the derivative formula on t squared"""
        self.assertAlmostEqual(srad_derivative_formula(lambda t: t ** 2, 0, 1.0), 2 * np.log(2), places=8)
        self.assertAlmostEqual(srad_derivative_formula(lambda t: t ** 2, 1, 1.0), 2 * np.log(2), places=5)

    def test_derivative_formula_constant(self):
        """Test the derivative of a constant vanishes"""
        self.assertLess(abs(srad_derivative_formula(lambda t: np.ones(np.shape(t)), 0, 0.7)), 1e-12)

    def test_derivative_formula_near_zero(self):
        """Test the formula is rejected at zero"""
        with self.assertRaises(ValueError):
            srad_derivative_formula(lambda t: t ** 2, 0, 0.0)

    def test_freqavg_derivative(self):
        """Test the frequency average derivative check"""
        for k in (0, 1):
            report = check_lemma_freqavg_derivative(lambda t: t ** 2, k)
            self.assertTrue(report.passed, report.note)
        self.assertTrue(check_lemma_freqavg_derivative(lambda t: np.ones(np.shape(t)), 0).passed)

    def test_alambda(self):
        """Test the averaged kernel against the radial oracle"""
        report = check_lemma_alambda(bump3, label="bump")
        self.assertTrue(report.passed, report.note)
        self.assertTrue(check_lemma_alambda(bump3, refine=2).passed)
        self.assertTrue(check_lemma_alambda(lambda r: np.zeros(np.shape(r))).passed)
        self.assertTrue(check_lemma_alambda(lambda r: np.ones(np.shape(r)), tol=1e-2).passed)

    def test_holder(self):
        """Test the Holder bound check"""
        report = check_lemma_holder()
        self.assertTrue(report.passed, report.note)
        self.assertLessEqual(report.measured["max_ratio"], 1.0)

    def test_convolution_size(self):
        """Test the convolution size check"""
        report = check_lemma_convolution_size()
        self.assertTrue(report.passed, report.note)

    def test_support(self):
        """Test the support check stays inside the annulus"""
        report = check_lemma_support()
        self.assertTrue(report.passed, report.note)
        lo, hi = report.measured["support"]
        self.assertGreater(lo, 0.5)
        self.assertLess(hi, np.sqrt(2))

    def test_report_dict(self):
        """Test report serialization and summary"""
        report = CheckReport("demo", True, {"x": 1}, "ok", 0.12345)
        self.assertEqual(report.to_dict()["seconds"], 0.123)
        self.assertTrue(report.summary().startswith("[PASS]"))

    def test_desk_suite(self):
        """Test the desk suite reproduces the qualitative reduction table"""
        report = check_desk_suite()
        self.assertTrue(report.passed, report.note)
        self.assertEqual(len(report.measured), 15 * 3)
        self.assertGreater(report.measured["rectangles@30/combined"], report.measured["rectangles@10/combined"])

    def test_unknown_suite(self):
        """Test unknown suites are rejected"""
        with self.assertRaises(ValueError):
            run_checks("everything")


if __name__ == '__main__':
    unittest.main()
