import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from hypfield import bumps as B
from hypfield.field import GaussianBump
from hypfield.kernels import Exponential, Gabor
from hypfield.verify import m_oracle

# root of N(omega) = alpha kappa for the configuration below, from a
# brentq solve at xtol 1e-12
ROOT = 0.17793928819736993


@pytest.fixture(scope="module")
def cfg():
    return B.BumpConfig.gaussian(1.0, 0.04, Exponential(0.2), 0.04, 0.05)


@pytest.fixture(scope="module")
def solution(cfg):
    return B.bump_profile(cfg, ROOT)


class TestConfig:
    def test_convention_default(self, cfg):
        assert cfg.input.convention == "two_sigma_sq"
        assert_allclose(cfg.input.radial(0.05), 0.04 * math.exp(-0.5))

    def test_rejects_off_center_input(self):
        with pytest.raises(ValueError):
            B.BumpConfig(1.0, 0.04, Exponential(0.2), GaussianBump(0.04, 0.05, center=0.1))

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            B.BumpConfig.gaussian(0.0, 0.04, Exponential(0.2), 0.04, 0.05)


class TestM:
    def test_zero_width(self, cfg):
        assert B.m_of_r_omega(cfg, 0.3, 0.0) == 0.0
        assert B.m_diagonal(cfg, 0.0) == 0.0

    def test_vectorized(self, cfg):
        rs = np.array([0.0, 0.1, 0.3])
        vec = B.m_of_r_omega(cfg, rs, 0.2)
        assert_allclose(vec, [B.m_of_r_omega(cfg, r, 0.2) for r in rs], rtol=1e-14)

    @pytest.mark.parametrize("r", [0.0, 0.1, 0.25, 0.6])
    def test_against_quadrature(self, cfg, r):
        assert_allclose(B.m_of_r_omega(cfg, r, 0.25), m_oracle(cfg.kernel, r, 0.25), rtol=1e-4)

    def test_diagonal(self, cfg):
        assert_allclose(B.m_diagonal(cfg, 0.3), B.m_of_r_omega(cfg, 0.3, 0.3), rtol=1e-12)

    def test_negative_radius(self, cfg):
        with pytest.raises(ValueError):
            B.m_of_r_omega(cfg, -0.1, 0.2)

    def test_psi_at_zero_frequency(self):
        om = 0.4
        ref = math.pi * integrate.quad(lambda r: math.sinh(2 * r) * B.phi_mehler([0.0], r)[0], 0, om)[0]
        assert_allclose(B.psi_lambda(0.0, om), ref, rtol=1e-9)


class TestExistence:
    def test_root_satisfies_threshold(self, cfg):
        assert_allclose(B.n_of_omega(cfg, ROOT), 0.04, atol=1e-9)

    def test_curve_components(self, cfg):
        c = B.existence_curve(cfg, [0.1, 0.2])
        assert_allclose(c.N, c.M + c.I)
        assert_allclose(c.I, cfg.input.radial(np.array([0.1, 0.2])))

    def test_no_pulse(self):
        cfg = B.BumpConfig.gaussian(1.0, 5.0, Exponential(0.2), 0.04, 0.05)
        with pytest.raises(B.NoPulseError):
            B.solve_pulse_width(cfg, (0.01, 1.0), samples=20)

    def test_bad_bracket(self, cfg):
        with pytest.raises(ValueError):
            B.solve_pulse_width(cfg, (0.5, 0.1))

    def test_local_solve(self, cfg):
        roots = B.solve_pulse_width(cfg, (0.15, 0.2), samples=5)
        assert_allclose(roots, [ROOT], atol=1e-10)


class TestProfile:
    def test_threshold_at_boundary(self, cfg, solution):
        at = np.argmin(np.abs(solution.r - ROOT))
        assert_allclose(solution.V[at], cfg.kappa, atol=1e-9)
        assert np.all(np.diff(solution.V) < 0)

    def test_grid_clusters_near_edge(self):
        r = B.profile_grid(0.2, 400)
        assert np.any(np.isclose(r, 0.2, atol=0))
        assert np.sum(np.abs(r - 0.2) < 0.01) > 50
        assert r[0] == 0.0 and r[-1] == 3.0

    def test_spurious_width_rejected(self, cfg):
        with pytest.raises(B.BumpConsistencyError):
            B.bump_profile(cfg, 0.3, np.linspace(0, 1, 21))

    def test_derivative_decomposition(self, cfg, solution):
        h = 1e-5
        r = np.array([ROOT - h, ROOT + h])
        V = (B.m_of_r_omega(cfg, r, ROOT) + cfg.input.radial(r)) / cfg.alpha
        assert_allclose((V[0] - V[1]) / (2 * h), solution.V_prime_abs, rtol=1e-5)

    def test_w0_against_quadrature(self, cfg, solution):
        t = math.tanh(ROOT)

        def chord(p):
            s = math.sin(p)
            return math.atanh(2 * t * abs(s) / math.sqrt((1 - t * t) ** 2 + 4 * t * t * s * s))

        ref = math.sinh(2 * ROOT) * integrate.quad(lambda p: float(cfg.kernel(chord(p))), 0, math.pi, points=[math.pi / 2], epsrel=1e-12)[0]
        assert_allclose(solution.W0_omega, ref, rtol=1e-10)


class TestStability:
    @pytest.mark.parametrize("omega", [0.1, 0.3, 0.5])
    def test_n_prime_identity(self, cfg, omega):
        ident = B.w0_of_omega(cfg, omega) - B.mr_of_omega(cfg, omega) - B.d_of_omega(cfg, omega)
        assert_allclose(ident, B.n_prime_fd(cfg, omega), rtol=1e-4)

    def test_spectrum_is_real(self, cfg, solution):
        sp = B.stability_spectrum(cfg, solution, n_max=10)
        assert sp.sine_residual < 1e-12
        assert sp.full_circle_diff < 1e-10
        assert sp.essential == -cfg.alpha
        assert np.all(sp.beta[1:] <= sp.beta[0])

    def test_zero_mode_is_translation_of_n_prime(self, cfg, solution):
        # beta_0 + alpha = alpha W0 / (Mr + D)
        sp = B.stability_spectrum(cfg, solution, n_max=0)
        assert_allclose(sp.beta[0] + cfg.alpha, cfg.alpha * solution.W0_omega / (solution.Mr + solution.D_omega), rtol=1e-12)

    def test_verdict(self, cfg, solution):
        v = B.stability_check(cfg, solution)
        assert v.verdict == "unstable"
        assert v.stable is False
        assert_allclose(v.n_prime, v.n_prime_fd, rtol=1e-4)
        assert_allclose(v.margin, -v.n_prime)

    def test_gabor_kernel_moments_change_sign(self):
        cfg = B.BumpConfig.gaussian(1.0, 0.04, Gabor(0.2), 0.04, 0.05)
        c, s = B._boundary_moments(cfg.kernel, 0.5, np.arange(4))
        assert np.abs(s).max() < 1e-12
        assert c.min() < 0 < c.max()
