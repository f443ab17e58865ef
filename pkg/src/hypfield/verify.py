"""Brute-force oracles for the closed forms and spectral formulas.

Each oracle uses a different algorithm from the code path it checks: direct
quadrature on the disk against spectral formulas, a two-dimensional
quadrature over the tensor coordinates against the closed-form Mexican-hat
integral, and Möbius-centred quadrature against the eigenfunction property of
hyperbolic convolution.

Disk integrals are taken against ``dm = dz1 dz2 / (1 - |z|^2)^2``, which in
hyperbolic polar coordinates ``z = tanh(r) e^{i theta}`` reads
``1/2 sinh(2r) dr dtheta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from . import bumps, kernels, specfun
from .geometry import dist_disk_array


class ToleranceNotMetError(ArithmeticError):
    """An adaptive oracle could not reach the requested tolerance."""


# ---------------------------------------------------------------------------
# Quadrature specifications


@dataclass(frozen=True)
class TensorGaussLegendre:
    """Gauss-Legendre in ``r`` on ``panels`` panels times the periodic trapezoid rule in ``theta``."""

    n_r: int = 64
    n_theta: int = 256
    panels: int = 1

    def __post_init__(self):
        if min(self.n_r, self.n_theta, self.panels) <= 0:
            raise ValueError("node counts must be positive")


@dataclass(frozen=True)
class AdaptiveRadial:
    """Nested adaptive quadrature (``r`` outside, ``theta`` inside)."""

    tol: float = 1e-10

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class MonteCarlo:
    """Uniform sampling of the hyperbolic ball with a recorded master seed."""

    n_samples: int = 100_000
    seed: int = 0
    chunk: int = 50_000

    def __post_init__(self):
        if self.n_samples <= 1 or self.chunk <= 0:
            raise ValueError("Monte Carlo needs at least two samples")


@dataclass(frozen=True)
class EuclideanBall:
    a: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError("Euclidean radius must lie in (0, 1)")

    @property
    def hyperbolic_radius(self) -> float:
        return math.atanh(self.a)


@dataclass(frozen=True)
class HyperbolicBall:
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("hyperbolic radius must be positive")

    @property
    def hyperbolic_radius(self) -> float:
        return self.omega


@dataclass(frozen=True)
class HalfLine:
    """The whole disk truncated at hyperbolic radius ``r_max``."""

    r_max: float

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("truncation radius must be positive")

    @property
    def hyperbolic_radius(self) -> float:
        return self.r_max


@dataclass(frozen=True)
class QuadratureSpec:
    scheme: TensorGaussLegendre | AdaptiveRadial | MonteCarlo
    domain: EuclideanBall | HyperbolicBall | HalfLine


class QuadratureResult(NamedTuple):
    value: float | complex
    error: float  # standard error for Monte Carlo, estimate otherwise


# ---------------------------------------------------------------------------
# Disk integration


def _gl(lo: float, hi: float, n: int, panels: int = 1):
    x, w = special.roots_legendre(n)
    h = (hi - lo) / panels
    left = lo + h * np.arange(panels)
    return (left[:, None] + 0.5 * h * (x + 1.0)).ravel(), np.tile(0.5 * h * w, panels)


def sample_hyperbolic_ball(rng: np.random.Generator, omega: float, n: int) -> np.ndarray:
    """``n`` points uniform for ``dm`` on ``B_h(0, omega)``.

    The radial density ``sinh(2r) / (cosh(2 omega) - 1)`` has CDF
    ``sinh^2 r / sinh^2 omega``; inverting it gives
    ``r = arcsinh(sqrt(U) sinh omega)`` with ``U`` uniform on ``[0, 1)``.
    """
    u = rng.random(n)
    r = np.arcsinh(np.sqrt(u) * math.sinh(omega))
    theta = 2.0 * np.pi * rng.random(n)
    return np.tanh(r) * np.exp(1j * theta)


def disk_integral(f: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec) -> QuadratureResult:
    """``int f(z) dm(z)`` over the domain of ``spec``.

    ``f`` maps an array of complex points to real or complex values.
    """
    R = spec.domain.hyperbolic_radius
    sch = spec.scheme
    if isinstance(sch, TensorGaussLegendre):
        r, wr = _gl(0.0, R, sch.n_r, sch.panels)
        th = 2.0 * np.pi * np.arange(sch.n_theta) / sch.n_theta
        z = np.tanh(r)[:, None] * np.exp(1j * th)[None, :]
        vals = np.asarray(f(z))
        radial = (vals.sum(axis=1) * (2.0 * np.pi / sch.n_theta)) * 0.5 * np.sinh(2.0 * r)
        return QuadratureResult(radial @ wr, math.nan)
    if isinstance(sch, AdaptiveRadial):

        def inner(r, part):
            def g(t):
                v = f(np.array([math.tanh(r) * complex(math.cos(t), math.sin(t))]))[0]
                return float(np.real(v) if part == 0 else np.imag(v))

            val, _ = integrate.quad(g, 0.0, 2.0 * np.pi, epsabs=0.0, epsrel=sch.tol, limit=200)
            return 0.5 * math.sinh(2.0 * r) * val

        out = []
        err = 0.0
        probe = np.asarray(f(np.array([0.5 * math.tanh(R) + 0j])))
        parts = (0, 1) if np.iscomplexobj(probe) else (0,)
        for part in parts:
            val, e = integrate.quad(inner, 0.0, R, args=(part,), epsabs=0.0, epsrel=sch.tol, limit=200)
            out.append(val)
            err = max(err, e)
        if err > 10 * sch.tol * max(1.0, abs(out[0])):
            raise ToleranceNotMetError(f"adaptive quadrature error estimate {err:.2e}")
        value = out[0] if len(out) == 1 else complex(out[0], out[1])
        return QuadratureResult(value, err)
    if isinstance(sch, MonteCarlo):
        area = math.pi * math.sinh(R) ** 2
        children = np.random.SeedSequence(sch.seed).spawn(math.ceil(sch.n_samples / sch.chunk))
        s1 = 0.0
        s2 = 0.0
        left = sch.n_samples
        for child in children:
            m = min(sch.chunk, left)
            left -= m
            vals = np.real(np.asarray(f(sample_hyperbolic_ball(np.random.default_rng(child), R, m))))
            s1 += float(vals.sum())
            s2 += float((vals * vals).sum())
        n = sch.n_samples
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
        return QuadratureResult(area * mean, area * math.sqrt(var / n))
    raise TypeError(f"unknown quadrature scheme {sch!r}")


# ---------------------------------------------------------------------------
# Mexican hat


def log_factor(sigma: float) -> float:
    """``int_0^inf (2 pi sigma^2)^{-1/2} exp(-(log D)^2 / sigma^2) dD / D`` by quadrature (equals ``1/sqrt 2``)."""
    c = 1.0 / math.sqrt(2.0 * math.pi * sigma * sigma)
    val, _ = integrate.quad(
        lambda d: c * math.exp(-math.log(d) ** 2 / sigma**2) / d, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400
    )
    val2, _ = integrate.quad(
        lambda d: c * math.exp(-math.log(d) ** 2 / sigma**2) / d, 1.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=400
    )
    return val + val2


def _gaussian_tensor_integral(sigma: float) -> float:
    """``int_R dL int_D g(sqrt(2 L^2 + d^2)) dm`` for one Gaussian of the 3D Mexican hat."""
    if sigma > 2.0:
        raise specfun.TruncationError(f"sigma={sigma} is too wide for the truncated oracle (limit 2)")
    g = kernels.MexicanHat3D(sigma, sigma, 0.0)
    # exp(-L^2 / sigma^2) < e^{-49} beyond |L| = 7 sigma; the radial weight
    # exp(-r^2 / 2 sigma^2) sinh 2r peaks at r = 2 sigma^2 with width sigma
    L_max = 7.0 * sigma
    r_max = 2.0 * sigma * sigma + 12.0 * sigma
    val, _ = integrate.nquad(
        lambda r, L: math.pi * math.sinh(2.0 * r) * float(g.eval_tensor(L, r)),
        [(0.0, r_max), (-L_max, L_max)],
        opts={"epsabs": 0.0, "epsrel": 1e-10, "limit": 200},
    )
    return val


def mexican_hat_oracle(sigma1: float, sigma2: float, A: float) -> float:
    """Integral of the Mexican hat over the tensor space by two-dimensional quadrature.

    With ``L = log Delta`` the measure is ``dL dm(z)`` and the tensor distance
    to the identity is ``sqrt(2 L^2 + d(z, O)^2)``; the double integral over
    ``(L, r)`` is done by adaptive quadrature for each Gaussian separately.
    """
    kernels._check_dog_params(sigma1, sigma2, A, "Mexican hat")
    if sigma1 == sigma2 and A == 1.0:
        return 0.0
    return _gaussian_tensor_integral(sigma1) - A * _gaussian_tensor_integral(sigma2)


# ---------------------------------------------------------------------------
# M(r, omega)


def m_oracle(kernel, r: float, omega: float, *, theta: float = 0.0, method: str = "angular", tol: float = 1e-11) -> float:
    """``int_{B_h(0, omega)} w(d(z, z')) dm(z')`` with ``z = tanh(r) e^{i theta}``.

    ``method="angular"`` integrates ``w(rho) Theta(rho) sinh(2 rho) / 2`` over
    the distance ``rho`` from ``z``, where ``Theta(rho)`` is the angle of the
    circle of radius ``rho`` about ``z`` lying inside the ball, read off the
    hyperbolic law of cosines
    ``cosh 2d = cosh 2r cosh 2rho - sinh 2r sinh 2rho cos phi``.
    ``method="direct"`` integrates over the ball in polar coordinates about
    the origin; it is slower but uses ``theta`` and no trigonometric identity.
    """
    if omega <= 0:
        return 0.0
    if r < 0:
        raise ValueError("r must be non-negative")
    if method == "direct":
        z = math.tanh(r) * complex(math.cos(theta), math.sin(theta))

        def inner(rp):
            def g(tp):
                zp = math.tanh(rp) * complex(math.cos(tp), math.sin(tp))
                return float(kernel(float(dist_disk_array(z, zp))))

            pts = [theta % (2 * math.pi)] if abs(rp - r) < 0.5 else None
            val, _ = integrate.quad(g, 0.0, 2.0 * math.pi, points=pts, epsabs=0.0, epsrel=tol, limit=400)
            return 0.5 * math.sinh(2.0 * rp) * val

        pts = [r] if 0 < r < omega else None
        val, _ = integrate.quad(inner, 0.0, omega, points=pts, epsabs=0.0, epsrel=tol, limit=400)
        return val
    if method != "angular":
        raise ValueError(f"unknown method {method!r}")
    if r == 0.0:
        val, _ = integrate.quad(
            lambda p: kernel(p) * math.sinh(2.0 * p), 0.0, omega, epsabs=0.0, epsrel=tol, limit=400
        )
        return math.pi * val
    c2r, s2r, c2w = math.cosh(2 * r), math.sinh(2 * r), math.cosh(2 * omega)

    def angle(p):
        c = (c2r * math.cosh(2 * p) - c2w) / (s2r * math.sinh(2 * p))
        return 2.0 * math.acos(min(1.0, max(-1.0, c)))

    lo, hi = abs(r - omega), r + omega
    total = 0.0
    if r < omega:
        # the circle about z stays inside the ball while rho <= omega - r
        val, _ = integrate.quad(lambda p: kernel(p) * math.sinh(2 * p), 0.0, lo, epsabs=0.0, epsrel=tol, limit=400)
        total += math.pi * val
    pts = [s for s in getattr(kernel, "sign_changes", lambda: [])() if lo < s < hi] or None
    val, _ = integrate.quad(
        lambda p: 0.5 * kernel(p) * angle(p) * math.sinh(2 * p), lo, hi, points=pts, epsabs=0.0, epsrel=tol, limit=400
    )
    return total + val


# ---------------------------------------------------------------------------
# Eigenfunction property of hyperbolic convolution


def _phi_spline(lam: float, r_hi: float, n: int = 4001) -> CubicSpline:
    rs = np.linspace(0.0, r_hi, n)
    vals = np.array([specfun.phi_mehler([lam], x)[0] for x in rs])
    return CubicSpline(rs, vals)


def convolution_eigen_oracle(kernel, lam: float, testpoints, *, n_rho: int = 24, n_phi: int = 128) -> float:
    """Max relative residual of ``(w * Phi_lambda)(z) = W(lambda) Phi_lambda(z)`` over ``testpoints``.

    The convolution at ``z`` is integrated in geodesic polar coordinates about
    ``z``: ``z' = g_z(tanh(rho) e^{i phi})`` with the Möbius map
    ``g_z(u) = (u + z) / (1 + conj(z) u)``, so that ``d(z, z') = rho``.  The
    radial rule has ``n_rho`` Gauss-Legendre nodes per unit of ``rho`` on
    ``[0, r_max]``; the angular rule is the ``n_phi``-point trapezoid rule.
    """
    pts = [complex(p.z if hasattr(p, "z") else p) for p in testpoints]
    r_max = kernel.r_max if hasattr(kernel, "r_max") else 10.0
    # distances from the origin reach at most r_max + max |z|
    r_hi = r_max + max(math.atanh(abs(p)) for p in pts) + 0.1
    spline = _phi_spline(lam, r_hi)
    wt = float(specfun.radial_fourier(kernel, [lam], r_max=r_max)[0])
    panels = max(1, math.ceil(r_max))
    rho, wr = _gl(0.0, r_max, n_rho, panels)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    u = np.tanh(rho)[:, None] * np.exp(1j * phi)[None, :]
    radial_w = np.asarray(kernel(rho)) * 0.5 * np.sinh(2.0 * rho) * wr * (2.0 * np.pi / n_phi)
    worst = 0.0
    for z in pts:
        zp = (u + z) / (1.0 + np.conj(z) * u)
        d0 = np.arctanh(np.minimum(np.abs(zp), 1.0 - 1e-16))
        lhs = float(radial_w @ spline(d0).sum(axis=1))
        rhs = wt * float(spline(math.atanh(abs(z))))
        if lhs == 0.0 and rhs == 0.0:
            continue
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return worst


# ---------------------------------------------------------------------------
# Suite


@dataclass(frozen=True)
class CheckRow:
    check: str
    main_value: float
    oracle_value: float
    rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.rel_err <= self.tol)


def _row(name, main, oracle, tol, *, absolute=False) -> CheckRow:
    err = abs(main - oracle)
    if not absolute:
        err /= max(abs(oracle), 1e-300)
    return CheckRow(name, float(main), float(oracle), float(err), float(tol))


def run_suite() -> list[CheckRow]:
    """Run every oracle comparison and return one row per check."""
    rows = []
    rows.append(_row("mexican_hat_wbar", kernels.mexican_hat_wbar(0.1, 0.2, 1.0), mexican_hat_oracle(0.1, 0.2, 1.0), 1e-4))
    rows.append(_row("log_factor", log_factor(0.3), 1.0 / math.sqrt(2.0), 1e-8))
    area = disk_integral(lambda z: np.ones(np.shape(z)), QuadratureSpec(TensorGaussLegendre(32, 8), HyperbolicBall(0.7)))
    rows.append(_row("ball_area", area.value, math.pi * math.sinh(0.7) ** 2, 1e-12))
    dog = kernels.DiffGaussians(0.1, 0.2, 1.0)
    xi0 = kernels.xi_invariance(dog, 0j)
    rows.append(_row("xi_invariance", kernels.xi_invariance(dog, 0.4 + 0.3j), xi0, 1e-3))
    for lam, r in [(2.0, 1.0), (10.0, 2.5)]:
        rows.append(
            _row(
                f"phi_series_vs_boundary(lam={lam:g},r={r:g})",
                specfun.spherical_phi(lam, r, "series"),
                specfun.phi_boundary(lam, r),
                1e-8,
                absolute=True,
            )
        )
    lam, om = 2.0, 0.5
    closed = math.pi * (math.sinh(om) * math.cosh(om)) ** 2 * specfun.spherical_phi_ab(lam, 1, 1, om)
    direct = disk_integral(
        lambda z: ((1 - np.abs(z) ** 2) / np.abs(z - 1) ** 2) ** (0.5 * (1 + 1j * lam)),
        QuadratureSpec(TensorGaussLegendre(48, 512), HyperbolicBall(om)),
    )
    rows.append(_row("psi_closed_form", closed, direct.value.real, 1e-6))
    expo = kernels.Exponential(0.2)
    cfg = bumps.BumpConfig.gaussian(1.0, 0.04, expo, 0.04, 0.05)
    rows.append(_row("m_spectral(r=0.1,omega=0.18)", bumps.m_of_r_omega(cfg, 0.1, 0.18), m_oracle(expo, 0.1, 0.18), 1e-3))
    res = convolution_eigen_oracle(expo, 0.7, [0.0, 0.2, 0.3j, -0.4 + 0.1j, 0.5])
    rows.append(CheckRow("convolution_eigen(lam=0.7)", res, 0.0, res, 1e-3))
    om = 0.3
    ident = bumps.w0_of_omega(cfg, om) - bumps.mr_of_omega(cfg, om) - bumps.d_of_omega(cfg, om)
    rows.append(_row("n_prime_identity(omega=0.3)", ident, bumps.n_prime_fd(cfg, om), 1e-4))
    return rows
