import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from hypfield import verify as V
from hypfield.kernels import DiffGaussians, Exponential, mexican_hat_wbar
from hypfield.specfun import TruncationError


def ones(z):
    return np.ones(np.shape(z))


class TestDomains:
    def test_radii(self):
        assert_allclose(V.EuclideanBall(0.5).hyperbolic_radius, math.atanh(0.5))
        assert V.HyperbolicBall(0.7).hyperbolic_radius == 0.7
        assert V.HalfLine(3.0).hyperbolic_radius == 3.0


class TestDiskIntegral:
    @pytest.mark.parametrize(
        "scheme", [V.TensorGaussLegendre(32, 8), V.AdaptiveRadial(), V.MonteCarlo(200_000, seed=1)]
    )
    def test_ball_area(self, scheme):
        res = V.disk_integral(ones, V.QuadratureSpec(scheme, V.HyperbolicBall(0.7)))
        exact = math.pi * math.sinh(0.7) ** 2
        tol = 5 * res.error if isinstance(scheme, V.MonteCarlo) else 1e-10 * exact
        assert abs(res.value - exact) <= max(tol, 1e-12)

    def test_euclidean_ball_area(self):
        res = V.disk_integral(ones, V.QuadratureSpec(V.TensorGaussLegendre(32, 8), V.EuclideanBall(0.5)))
        assert_allclose(res.value, math.pi * 0.25 / 0.75, rtol=1e-12)

    def test_monte_carlo_seeded(self):
        spec = V.QuadratureSpec(V.MonteCarlo(10_000, seed=5), V.HyperbolicBall(0.5))
        f = lambda z: np.abs(z) ** 2
        assert V.disk_integral(f, spec) == V.disk_integral(f, spec)

    def test_monte_carlo_error_scales(self):
        f = lambda z: np.real(z) ** 2
        e1 = V.disk_integral(f, V.QuadratureSpec(V.MonteCarlo(10_000), V.HyperbolicBall(0.5))).error
        e2 = V.disk_integral(f, V.QuadratureSpec(V.MonteCarlo(160_000), V.HyperbolicBall(0.5))).error
        assert_allclose(e1 / e2, 4.0, rtol=0.1)

    def test_sampler_radius_distribution(self):
        rng = np.random.default_rng(0)
        z = V.sample_hyperbolic_ball(rng, 1.0, 200_000)
        r = np.arctanh(np.abs(z))
        # P(r < 0.5) = sinh^2(0.5) / sinh^2(1)
        assert_allclose((r < 0.5).mean(), math.sinh(0.5) ** 2 / math.sinh(1.0) ** 2, atol=3e-3)

    def test_kernel_integral_over_half_line(self):
        # arctanh |z| is ill-conditioned near the boundary, so stop at r = 2
        k = Exponential(0.2)
        res = V.disk_integral(lambda z: k(np.arctanh(np.abs(z))), V.QuadratureSpec(V.AdaptiveRadial(), V.HalfLine(2.0)))
        exact = math.pi * integrate.quad(lambda r: k(r) * math.sinh(2 * r), 0, 2.0, epsrel=1e-13)[0]
        assert_allclose(res.value, exact, rtol=1e-9)


class TestMexicanHatOracle:
    def test_log_factor(self):
        assert_allclose(V.log_factor(0.3), 1 / math.sqrt(2), rtol=1e-10)

    @pytest.mark.parametrize("args", [(0.1, 0.2, 1.0), (0.2, 0.5, 0.3), (0.5, 1.5, 0.8)])
    def test_closed_form(self, args):
        assert_allclose(mexican_hat_wbar(*args), V.mexican_hat_oracle(*args), rtol=1e-6)

    def test_equal_widths(self):
        assert V.mexican_hat_oracle(0.3, 0.3, 1.0) == 0.0

    def test_too_wide(self):
        with pytest.raises(TruncationError):
            V.mexican_hat_oracle(0.1, 2.5, 1.0)


class TestMOracle:
    @pytest.mark.parametrize("r", [0.0, 0.1, 0.3])
    def test_angular_matches_direct(self, r):
        k = Exponential(0.2)
        assert_allclose(V.m_oracle(k, r, 0.25), V.m_oracle(k, r, 0.25, theta=1.0, method="direct", tol=1e-9), rtol=1e-7)

    def test_center_is_radial_integral(self):
        k = DiffGaussians(0.1, 0.2, 1.0)
        res = V.disk_integral(lambda z: k(np.arctanh(np.abs(z))), V.QuadratureSpec(V.AdaptiveRadial(), V.HyperbolicBall(0.4)))
        assert_allclose(V.m_oracle(k, 0.0, 0.4), res.value, rtol=1e-9)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            V.m_oracle(Exponential(0.2), 0.1, 0.2, method="spectral")


class TestSuite:
    def test_convolution_eigenfunction(self):
        res = V.convolution_eigen_oracle(DiffGaussians(0.1, 0.2, 1.0), 2.0, [0.0, 0.3, -0.2 + 0.4j])
        assert res < 1e-6

    def test_all_rows_pass(self):
        rows = V.run_suite()
        assert len(rows) == 10
        failed = [r.check for r in rows if not r.passed]
        assert not failed

    def test_row_relative_error(self):
        row = V._row("x", 1.001, 1.0, 1e-2)
        assert_allclose(row.rel_err, 1e-3)
        assert row.passed
