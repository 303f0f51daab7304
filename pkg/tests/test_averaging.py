"""
Unit tests for mollifier, angular, radial and frequency averaging
"""
import unittest

import numpy as np

from src.averaging.mollifier import MollifierSpec, mollify, sigma_from_lambda, default_sigma_grid
from src.averaging.polar_averaging import (
    AveragingParams, FrequencySeries, angular_average_recon, angular_average_point,
    radial_smooth, radialize, freq_average, frequency_lattice, v_pipeline,
    combined_recon, freq_average_recon, freq_average_point,
)
from src.fields.field_core import Grid2, ScalarField, RadialProfile, sobolev_norm, l2_norm
from src.oscillatory_engine import EngineConfig, PhaseContext, main_term_grid, main_term_point
from src.phantoms.phantom_generator import (
    PhantomSpec, Primitive, render_phantom, load_preset, gaussian_spec,
)
from src.utils.errors import CoverageError, MollifierError


def narrow_gaussian(grid: Grid2, width: float = 0.15) -> ScalarField:
    return render_phantom(gaussian_spec(width=width, half_width=1.0), grid)


class TestMollifier(unittest.TestCase):
    """Test cases for mollify"""

    def setUp(self):
        """Set up test fixtures"""
        self.grid = Grid2.square(1.0, 101)

    def test_kernel_normalized(self):
        """Test the kernel is non-negative and sums to one"""
        kernel = MollifierSpec(0.1).kernel(self.grid.spacing)
        self.assertAlmostEqual(kernel.sum(), 1.0, delta=1e-12)
        self.assertTrue(np.all(kernel >= 0))
        self.assertEqual(kernel.shape, (9, 9))
        self.assertEqual(kernel[0, 0], 0.0)

    def test_sigma_below_spacing(self):
        """Test sigma below the grid spacing is rejected"""
        with self.assertRaises(MollifierError):
            mollify(ScalarField.zeros(self.grid), MollifierSpec(0.5 * self.grid.spacing))

    def test_sigma_at_spacing_is_identity(self):
        """Test sigma equal to the spacing returns the input"""
        f = narrow_gaussian(self.grid)
        self.assertIs(mollify(f, MollifierSpec(self.grid.spacing)), f)

    def test_constant_field(self):
        """Test a constant field is unchanged away from the border"""
        f = ScalarField(self.grid, np.full(self.grid.shape, 2.0 - 0.5j))
        smoothed = mollify(f, MollifierSpec(0.1)).samples
        np.testing.assert_allclose(smoothed[5:96, 5:96], 2.0 - 0.5j, rtol=0, atol=1e-12)

    def test_mass_preserved(self):
        """Test mollification preserves the integral"""
        f = narrow_gaussian(self.grid)
        smoothed = mollify(f, MollifierSpec(0.08))
        self.assertAlmostEqual(abs(smoothed.mass() / f.mass()), 1.0, delta=1e-10)

    def test_lipschitz_bound(self):
        """Test the error on a Lipschitz ridge is at most sigma"""
        grid = Grid2.square(4.0, 401)
        ridge = ScalarField.from_function(grid, lambda x, y: np.maximum(0.0, 1.0 - np.abs(x)) + 0 * y)
        for sigma in default_sigma_grid(grid.spacing, 10.0):
            error = np.abs(mollify(ridge, MollifierSpec(sigma)).samples - ridge.samples)
            margin = int(np.ceil(sigma / grid.spacing)) + 1
            self.assertLessEqual(error[margin:-margin, margin:-margin].max(), sigma)

    def test_sigma_from_lambda(self):
        """Test sigma defaults to lambda to the power -1/4"""
        self.assertEqual(sigma_from_lambda(1.0), 1.0)
        self.assertAlmostEqual(sigma_from_lambda(16.0), 0.5)
        self.assertAlmostEqual(sigma_from_lambda(10.0), 10 ** -0.25)
        with self.assertRaises(ValueError):
            sigma_from_lambda(0.0)

    def test_default_sigma_grid(self):
        """Test the default sigma grid is geometric and increasing"""
        grid = default_sigma_grid(0.01, 16.0, 16)
        self.assertEqual(len(grid), 16)
        self.assertAlmostEqual(grid[0], 0.01)
        self.assertAlmostEqual(grid[-1], 2.0)
        self.assertTrue(all(a < b for a, b in zip(grid, grid[1:])))

    def test_commutes_with_main_term(self):
        """Test mollification commutes with the main term"""
        grid = Grid2.square(1.0, 253)
        q = narrow_gaussian(grid)
        m = MollifierSpec(0.1)
        cfg = EngineConfig(engine="spectral", refinement=1)
        a = mollify(main_term_grid(q, 10.0, grid, cfg), m).samples
        b = main_term_grid(mollify(q, m), 10.0, grid, cfg).samples
        margin = int(np.ceil(0.1 / grid.spacing)) + 1
        inner = (slice(margin, -margin), slice(margin, -margin))
        self.assertLess(np.max(np.abs(a[inner] - b[inner])), 1e-9)


class TestAveragingParams(unittest.TestCase):
    """Test cases for AveragingParams"""

    def test_validation(self):
        """Test invalid averaging parameters are rejected"""
        with self.assertRaises(ValueError):
            AveragingParams(n_angles=9)
        with self.assertRaises(ValueError):
            AveragingParams(n_angles=4)
        with self.assertRaises(ValueError):
            AveragingParams(n_srad=4)
        with self.assertRaises(ValueError):
            AveragingParams(sigma_grid=(0.1, -1.0))

    def test_dict_round_trip(self):
        """Test parameters survive a dict round trip"""
        p = AveragingParams(n_angles=32, sigma_grid=(0.01, 0.1))
        self.assertEqual(AveragingParams.from_dict(p.to_dict()), p)


class TestRadialSmooth(unittest.TestCase):
    """Test cases for radial_smooth and the V pipeline"""

    def test_constant(self):
        """Test a constant profile is unchanged"""
        p = AveragingParams(n_srad=64)
        out = radial_smooth(RadialProfile(1.0, np.full(65, 3.0 + 1.0j)), p)
        np.testing.assert_allclose(out.values, 3.0 + 1.0j, rtol=1e-14)

    def test_quadratic(self):
        """Test r squared is scaled by log 2"""
        p = AveragingParams(n_srad=256)
        profile = RadialProfile.from_function(lambda r: r ** 2, 1.0, 1025)
        out = radial_smooth(profile, p)
        r = profile.radii
        mask = r >= 0.1
        np.testing.assert_allclose(out.values.real[mask], r[mask] ** 2 * np.log(2), rtol=1e-4)

    def test_support_growth(self):
        """Test the support grows by at most a factor of sqrt 2"""
        p = AveragingParams(n_srad=128)
        profile = RadialProfile.from_function(lambda r: ((r > 0.5) & (r < 1.0)).astype(float), 2.0, 401)
        out = radial_smooth(profile, p)
        r, dr = profile.radii, profile.dr
        outside = (r < 0.5 - dr) | (r > np.sqrt(2) + 2 * dr)
        self.assertFalse(np.any(out.values[outside]))
        self.assertTrue(np.any(out.values[(r > 0.6) & (r < 1.3)]))

    def test_positivity_and_linearity(self):
        """Test smoothing is positive and linear"""
        p = AveragingParams(n_srad=32)
        rng = np.random.default_rng(11)
        a = RadialProfile(1.0, rng.uniform(0, 1, 50))
        b = RadialProfile(1.0, rng.uniform(0, 1, 50))
        self.assertTrue(np.all(radial_smooth(a, p).values.real >= 0))
        combined = radial_smooth(RadialProfile(1.0, 2 * a.values - 3j * b.values), p).values
        separate = 2 * radial_smooth(a, p).values - 3j * radial_smooth(b, p).values
        np.testing.assert_allclose(combined, separate, atol=1e-14)

    def test_v_pipeline(self):
        """Test the V pipeline keeps a radial Gaussian and its center value"""
        grid = Grid2.square(1.0, 201)
        q = narrow_gaussian(grid, 0.1)
        p = AveragingParams(n_angles=32, n_srad=64, n_radii=257)
        profiles = v_pipeline(q, (0.0, 0.0), p, r_max=1.0)
        self.assertEqual(len(profiles), 4)
        r = profiles[0].radii
        np.testing.assert_allclose(profiles[0].values.real, np.exp(-(r / 0.1) ** 2), atol=5e-3)
        self.assertAlmostEqual(profiles[3].values[0], profiles[0].values[0], places=12)

    def test_v_pipeline_support(self):
        """Test the V pipeline stays inside the expected annulus"""
        grid = Grid2.square(1.0, 201)
        ring = ScalarField.from_function(
            grid, lambda x, y: ((np.hypot(x, y) > 0.1) & (np.hypot(x, y) < 0.3)).astype(float))
        p = AveragingParams(n_angles=64, n_srad=64, n_radii=201)
        profiles = v_pipeline(ring, (0.0, 0.0), p, r_max=1.0)
        r = profiles[0].radii
        outside = (r < 0.07) | (r > 0.33 * 2 ** 1.5)
        self.assertFalse(np.any(profiles[3].values[outside]))


class TestFreqAverage(unittest.TestCase):
    """Test cases for freq_average"""

    def test_constant(self):
        """Test a constant series averages to itself"""
        series = FrequencySeries(frequency_lattice(10.0), np.full(64, 1.5 - 2j))
        self.assertAlmostEqual(freq_average(series, 10.0), 1.5 - 2j, places=12)

    def test_linear_exact(self):
        """Test a linear series is averaged exactly"""
        lambdas = np.linspace(5.0, 30.0, 101)
        series = FrequencySeries(lambdas, lambdas.astype(complex))
        self.assertAlmostEqual(freq_average(series, 12.3).real / (1.5 * 12.3), 1.0, delta=1e-10)

    def test_coverage(self):
        """Test short or sparse frequency series are rejected"""
        with self.assertRaises(CoverageError):
            freq_average(FrequencySeries(np.linspace(10.0, 19.0, 64), np.ones(64)), 10.0)
        with self.assertRaises(CoverageError):
            freq_average(FrequencySeries(np.linspace(10.0, 20.0, 16), np.ones(16)), 10.0)

    def test_rejects_unsorted(self):
        """Test unsorted frequencies are rejected"""
        with self.assertRaises(ValueError):
            FrequencySeries(np.array([1.0, 3.0, 2.0]), np.ones(3))

    def test_point_against_closed_form(self):
        """Test the frequency average at the center against the closed form"""
        grid = Grid2.square(1.0, 253)
        q = narrow_gaussian(grid)
        lam, w2 = 10.0, 0.15 ** 2
        expected = (np.sqrt(1 + 4 * lam ** 2 * w2 ** 2) - np.sqrt(1 + lam ** 2 * w2 ** 2)) / (lam * w2)
        value = freq_average_point(q, (0.0, 0.0), lam)
        self.assertLess(abs(value - expected), 1e-5)


class TestAngularAverage(unittest.TestCase):
    """Test cases for angular_average_recon"""

    def test_zero(self):
        """Test a zero potential reconstructs to zero"""
        grid = Grid2.square(1.0, 129)
        result = angular_average_recon(ScalarField.zeros(grid), 10.0, Grid2.square(1.0, 33), AveragingParams())
        self.assertFalse(np.any(result.samples))

    def test_radial_potential_at_center(self):
        """Test averaging leaves a radial potential unchanged at its center"""
        grid = Grid2.square(1.0, 253)
        q = narrow_gaussian(grid)
        near_center = Grid2((grid.xs[124], grid.ys[124]), grid.spacing, 5, 5)
        recon = angular_average_recon(q, 10.0, near_center, AveragingParams())
        plain = main_term_point(q, PhaseContext((0.0, 0.0), 10.0))
        self.assertLess(abs(recon.samples[2, 2] - plain), 1e-6)

    def test_fast_matches_reference(self):
        """Test the fast path matches the rotation reference"""
        grid, out = Grid2.square(1.0, 253), Grid2.square(1.0, 64)
        q = render_phantom(load_preset("rectangles"), grid)
        cfg = EngineConfig(refinement=1)
        p = AveragingParams(n_angles=256)
        fast = angular_average_recon(q, 10.0, out, p, cfg, path="fast")
        reference = angular_average_recon(q, 10.0, out, p, cfg, path="reference")
        self.assertLess(np.max(np.abs(fast.samples - reference.samples)), 1e-3)

    def test_literal_rotation_average(self):
        """Test the kernel path matches a literal rotation average"""
        spec = PhantomSpec("gaussian", (Primitive("gaussian", (0.2, 0.1), (0.15, 0.15)),), half_width=1.5)
        grid = Grid2.square(1.5, 301)
        q = render_phantom(spec, grid)
        p = AveragingParams(n_angles=64)
        out = Grid2((-0.5, -0.5), grid.spacing, 101, 101)
        fast = angular_average_recon(q, 10.0, out, p)
        literal = angular_average_point(q, (0.0, 0.0), 10.0, p)
        self.assertLess(abs(fast.samples[50, 50] - literal), 2e-3)

    def test_combined(self):
        """Test combined rejects a small sigma and keeps zero at zero"""
        grid, out = Grid2.square(1.0, 129), Grid2.square(1.0, 33)
        p = AveragingParams()
        with self.assertRaises(MollifierError):
            combined_recon(narrow_gaussian(grid), 10.0, out, p, MollifierSpec(0.5 * out.spacing))
        zero = combined_recon(ScalarField.zeros(grid), 10.0, out, p, MollifierSpec(2 * out.spacing))
        self.assertFalse(np.any(zero.samples))

    def test_radialize_preserves_regularity(self):
        """Test radialization does not increase the norms"""
        spec = PhantomSpec("gaussian", (Primitive("gaussian", (0.2, 0.1), (0.2, 0.1), angle=30.0),), half_width=2.0)
        grid = Grid2.square(2.0, 256)
        q = render_phantom(spec, grid)
        radial = radialize(q, (0.0, 0.0), AveragingParams(n_angles=128, n_radii=512))
        self.assertLessEqual(sobolev_norm(radial, 1.0), sobolev_norm(q, 1.0) * 1.02)
        self.assertLessEqual(l2_norm(radial), l2_norm(q) * 1.02)


class TestFreqAverageRecon(unittest.TestCase):
    """Test cases for the frequency-averaged reconstruction"""

    def test_matches_sampled_average(self):
        """Test the reconstruction matches a sampled frequency average"""
        grid, out = Grid2.square(1.0, 129), Grid2.square(0.5, 17)
        q = narrow_gaussian(grid)
        p = AveragingParams(freq_depth=1)
        cfg = EngineConfig(engine="spectral")
        recon = freq_average_recon(q, 10.0, out, p, cfg)
        lattice = frequency_lattice(10.0, 64)
        stack = np.array([angular_average_recon(q, t, out, p, cfg).samples for t in lattice])
        expected = np.array([[freq_average(FrequencySeries(lattice, stack[:, j, i]), 10.0)
                              for i in range(out.nx)] for j in range(out.ny)])
        self.assertLess(np.max(np.abs(recon.samples - expected)), 2e-3)

    def test_depth_zero_is_angular(self):
        """Test depth zero reduces to the angular reconstruction"""
        grid, out = Grid2.square(1.0, 129), Grid2.square(1.0, 33)
        q = render_phantom(load_preset("ovals"), grid)
        p = AveragingParams(freq_depth=0)
        a = freq_average_recon(q, 5.0, out, p)
        b = angular_average_recon(q, 5.0, out, p)
        self.assertLess(np.max(np.abs(a.samples - b.samples)), 1e-5)


if __name__ == '__main__':
    unittest.main()
