"""Stationary pulses (bumps) in the high-gain limit.

With ``S = H(. - kappa)`` a radially symmetric stationary state that exceeds
``kappa`` exactly on the hyperbolic ball ``B_h(0, omega)`` satisfies

    alpha V(r) = M(r, omega) + I(r),   M(r, omega) = int_{B_h(0, omega)} w(d(z, z')) dm(z'),

where ``z`` is any point at distance ``r`` from the origin.  The spectral form

    M(r, omega) = (1/4pi) int_R W(lambda) Phi_lambda(r) Psi_lambda(omega) lambda tanh(pi lambda/2) d lambda,

with ``Psi_lambda(omega) = pi sinh^2 omega cosh^2 omega Phi^{(1,1)}_lambda(omega)``, is evaluated on a
:class:`~hypfield.specfun.SpectralGrid`.  A pulse of width ``omega`` exists
when ``N(omega) = M(omega, omega) + I(omega)`` equals ``alpha kappa``.

Linear stability reduces to the sign of ``N'(omega) = W0(omega) - Mr(omega) - D(omega)``
with

* ``W0(omega) = sinh(2 omega) int_0^pi w(d(omega, theta)) d theta``, the kernel
  integrated over the pulse boundary as seen from a boundary point,
* ``Mr(omega) = -dM/dr(omega, omega)``,
* ``D(omega) = |I'(omega)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .field import GaussianBump
from .kernels import RadialKernel
from .specfun import SpectralGrid, phi11_mehler, phi_mehler, phi_psi_mehler, plancherel, psi_mehler


class NoPulseError(ArithmeticError):
    """``N(omega) - alpha kappa`` has no sign change on the bracket."""


class BumpConsistencyError(ArithmeticError):
    """The profile does not cross the threshold exactly once at ``omega``."""


#: ``|N'(omega)|`` below this value gives an indeterminate stability verdict.
N_PRIME_FLOOR = 1e-8


@dataclass(frozen=True)
class BumpConfig:
    """Parameters of the pulse problem.

    ``input`` is radial about the origin; the default width convention is
    ``I(r) = I0 exp(-r^2 / (2 sigma^2))``.
    """

    alpha: float
    kappa: float
    kernel: RadialKernel
    input: GaussianBump
    spectral: SpectralGrid = field(default_factory=SpectralGrid)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.input.center != 0:
            raise ValueError("the pulse construction needs an input centered at the origin")

    @classmethod
    def gaussian(cls, alpha, kappa, kernel, I0, sigma, *, convention="two_sigma_sq", spectral=None):
        spectral = SpectralGrid() if spectral is None else spectral
        return cls(alpha, kappa, kernel, GaussianBump(I0, sigma, convention), spectral)

    @property
    def spectrum(self) -> np.ndarray:
        return self.kernel.spectrum(self.spectral)


def _spectral_weight(cfg: BumpConfig) -> np.ndarray:
    lam = cfg.spectral.nodes
    return cfg.spectrum * plancherel(lam)


# ---------------------------------------------------------------------------
# M(r, omega) and the existence curve


def psi_lambda(lam, omega: float):
    """``Psi_lambda(omega) = int_{B_h(0, omega)} e^{(i lambda + 1)<z, 1>} dm(z)``, a real number."""
    lam_arr = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
    out = psi_mehler(lam_arr, omega)
    return float(out[0]) if np.ndim(lam) == 0 else out


def m_of_r_omega(cfg: BumpConfig, r, omega: float):
    """``M(r, omega)`` by the spectral formula; vectorized over ``r``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rs < 0):
        raise ValueError("r must be non-negative")
    if omega == 0:
        out = np.zeros_like(rs)
    else:
        lam = cfg.spectral.nodes
        base = _spectral_weight(cfg) * psi_mehler(lam, omega)
        out = np.array(
            [cfg.spectral.integrate_even(base * phi_mehler(lam, x), check=True) for x in rs]
        ) / (4.0 * np.pi)
    return float(out[0]) if np.ndim(r) == 0 else out


def m_diagonal(cfg: BumpConfig, omega: float) -> float:
    """``M(omega, omega)``, the value of ``M`` on the pulse boundary."""
    if omega <= 0:
        return 0.0
    phi, psi = phi_psi_mehler(cfg.spectral.nodes, omega)
    return cfg.spectral.integrate_even(_spectral_weight(cfg) * phi * psi, check=True) / (4.0 * np.pi)


def n_of_omega(cfg: BumpConfig, omega: float) -> float:
    """``N(omega) = M(omega, omega) + I(omega)``."""
    return m_diagonal(cfg, omega) + float(cfg.input.radial(omega))


@dataclass(frozen=True)
class ExistenceCurve:
    omega: np.ndarray
    N: np.ndarray
    M: np.ndarray
    I: np.ndarray


def existence_curve(cfg: BumpConfig, omegas) -> ExistenceCurve:
    omegas = np.asarray(omegas, dtype=float)
    M = np.array([m_diagonal(cfg, w) for w in omegas])
    I = np.asarray(cfg.input.radial(omegas), dtype=float)
    return ExistenceCurve(omegas, M + I, M, I)


def solve_pulse_width(
    cfg: BumpConfig,
    bracket: tuple[float, float] = (1e-3, 3.0),
    *,
    samples: int = 600,
    ftol: float = 1e-8,
) -> list[float]:
    """All roots of ``N(omega) = alpha kappa`` in ``bracket``, in increasing order.

    ``N`` is sampled on ``samples`` equally spaced widths and each sign change
    is refined by Brent's method.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    target = cfg.alpha * cfg.kappa
    ws = np.linspace(lo, hi, samples)
    g = np.array([n_of_omega(cfg, w) for w in ws]) - target
    roots = []
    for i in range(samples - 1):
        if g[i] == 0.0:
            roots.append(float(ws[i]))
        elif g[i] * g[i + 1] < 0:
            root = optimize.brentq(lambda w: n_of_omega(cfg, w) - target, ws[i], ws[i + 1], xtol=1e-12)
            roots.append(float(root))
    if g[-1] == 0.0:
        roots.append(float(ws[-1]))
    if not roots:
        raise NoPulseError(
            f"N(omega) - alpha kappa keeps one sign on [{lo}, {hi}] "
            f"(range {g.min() + target:.4g} .. {g.max() + target:.4g} against {target:.4g})"
        )
    for w in roots:
        resid = abs(n_of_omega(cfg, w) - target)
        if resid >= ftol:
            raise ArithmeticError(f"root {w} leaves |N - alpha kappa| = {resid:.2e}")
    return roots


# ---------------------------------------------------------------------------
# Quantities at the pulse boundary


def mr_of_omega(cfg: BumpConfig, omega: float) -> float:
    """``Mr(omega) = (1/64) sinh(2 omega)^3 int_R W (1 + lambda^2) (Phi^{(1,1)}_lambda(omega))^2 lambda tanh d lambda``."""
    lam = cfg.spectral.nodes
    p11 = phi11_mehler(lam, omega)
    integrand = _spectral_weight(cfg) * (1.0 + lam * lam) * p11 * p11
    return math.sinh(2.0 * omega) ** 3 / 64.0 * cfg.spectral.integrate_even(integrand, check=True)


def _boundary_chord(omega: float, phi):
    """Hyperbolic distance between ``tanh(omega)`` and ``tanh(omega) e^{2 i phi}``."""
    t = math.tanh(omega)
    s = np.sin(phi)
    return np.arctanh(2.0 * t * np.abs(s) / np.sqrt((1.0 - t * t) ** 2 + 4.0 * t * t * s * s))


def _gl(lo: float, hi: float, n: int):
    x, w = special.roots_legendre(n)
    return lo + 0.5 * (hi - lo) * (x + 1.0), 0.5 * (hi - lo) * w


def _boundary_moments(kernel, omega: float, ns, n_nodes: int = 256):
    """``int_0^pi w(chord) cos(2 n phi) d phi`` and the matching sine integrals."""
    phi, wphi = _gl(0.0, math.pi, n_nodes)
    wv = kernel(_boundary_chord(omega, phi)) * wphi
    ns = np.asarray(ns)
    return np.cos(2.0 * np.outer(ns, phi)) @ wv, np.sin(2.0 * np.outer(ns, phi)) @ wv


def w0_of_omega(cfg: BumpConfig, omega: float, *, n_nodes: int = 256) -> float:
    """``W0(omega) = sinh(2 omega) int_0^pi w(chord(omega, phi)) d phi``."""
    c, _ = _boundary_moments(cfg.kernel, omega, [0], n_nodes)
    return math.sinh(2.0 * omega) * float(c[0])


def d_of_omega(cfg: BumpConfig, omega: float) -> float:
    """``D(omega) = |I'(omega)|``."""
    return abs(float(cfg.input.radial_derivative(omega)))


# ---------------------------------------------------------------------------
# Profile and stability


@dataclass(frozen=True)
class BumpSolution:
    omega: float
    r: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    Mr: float
    W0_omega: float
    D_omega: float
    V_prime_abs: float  # (Mr + D) / alpha
    spectrum: np.ndarray | None = field(default=None, repr=False)


def profile_grid(omega: float, n: int = 400) -> np.ndarray:
    """``n`` radii on ``[0, max(5 omega, 3)]``, clustered geometrically around ``omega``."""
    r_end = max(5.0 * omega, 3.0)
    n_near = n // 4
    n_far = n - 2 * n_near - 1
    offsets = omega * np.geomspace(1e-6, 0.5, n_near)
    pts = np.concatenate([np.linspace(0.0, r_end, n_far), omega - offsets, omega + offsets, [omega]])
    pts = np.unique(np.clip(pts, 0.0, r_end))
    return pts


def bump_profile(cfg: BumpConfig, omega: float, rgrid=None, *, tol: float = 1e-6) -> BumpSolution:
    """Radial profile ``V(r) = (M(r, omega) + I(r)) / alpha`` with threshold checks.

    Raises :class:`BumpConsistencyError` unless ``|V(omega) - kappa| < tol``,
    ``V > kappa`` on ``[0, omega)`` and ``V < kappa`` on ``(omega, r_end]``.
    """
    r = profile_grid(omega) if rgrid is None else np.asarray(rgrid, dtype=float)
    if not np.any(np.isclose(r, omega, rtol=0, atol=1e-14)):
        r = np.unique(np.append(r, omega))
    V = (m_of_r_omega(cfg, r, omega) + cfg.input.radial(r)) / cfg.alpha
    at = int(np.argmin(np.abs(r - omega)))
    if abs(V[at] - cfg.kappa) >= tol:
        raise BumpConsistencyError(f"V(omega) = {V[at]:.10g} differs from kappa = {cfg.kappa}")
    inner, outer = r < omega, r > omega
    if np.any(V[inner] <= cfg.kappa) or np.any(V[outer] >= cfg.kappa):
        raise BumpConsistencyError(
            f"profile for omega={omega} crosses the threshold away from r = omega (spurious root)"
        )
    mr = mr_of_omega(cfg, omega)
    w0 = w0_of_omega(cfg, omega)
    d = d_of_omega(cfg, omega)
    return BumpSolution(omega, r, V, mr, w0, d, (mr + d) / cfg.alpha)


@dataclass(frozen=True)
class StabilitySpectrum:
    n: np.ndarray
    beta: np.ndarray
    essential: float
    sine_residual: float
    full_circle_diff: float


def stability_spectrum(cfg: BumpConfig, sol: BumpSolution, n_max: int = 16) -> StabilitySpectrum:
    """``beta_n = -alpha + sinh(2 omega) / |V'(omega)| int_0^pi w(chord) cos(2 n phi) d phi``.

    ``|V'(omega)| = (Mr + D) / alpha``.  The same values are recomputed from the
    full-circle form ``(sinh 2 omega / 2|V'|) int_0^{2 pi} w e^{-i n theta} d theta``;
    the largest difference is reported with the largest sine integral, which
    must vanish for real ``beta_n``.
    """
    omega = sol.omega
    vp = sol.V_prime_abs
    ns = np.arange(n_max + 1)
    c, s = _boundary_moments(cfg.kernel, omega, ns)
    scale = math.sinh(2.0 * omega) / vp
    beta = -cfg.alpha + scale * c
    # full-circle form, chord written through theta = 2 phi
    th, wth = _gl(0.0, 2.0 * math.pi, 512)
    t = math.tanh(omega)
    chord = np.arctanh(np.sqrt(2 * t * t * (1 - np.cos(th)) / (1 + t**4 - 2 * t * t * np.cos(th))))
    wv = cfg.kernel(chord) * wth
    full = np.exp(-1j * np.outer(ns, th)) @ wv
    beta_full = -cfg.alpha + 0.5 * scale * full
    diff = float(np.max(np.abs(beta_full - beta)))
    return StabilitySpectrum(ns, beta, -cfg.alpha, float(np.max(np.abs(scale * s))), diff)


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str  # "stable", "unstable" or "indeterminate"
    margin: float  # D - (W0 - Mr); positive means stable
    n_prime: float  # W0 - Mr - D
    n_prime_fd: float  # central difference of N

    @property
    def stable(self) -> bool | None:
        return {"stable": True, "unstable": False}.get(self.verdict)


def n_prime_fd(cfg: BumpConfig, omega: float, h: float = 1e-4) -> float:
    return (n_of_omega(cfg, omega + h) - n_of_omega(cfg, omega - h)) / (2.0 * h)


def stability_check(cfg: BumpConfig, sol: BumpSolution, *, h: float = 1e-4) -> StabilityVerdict:
    """Reduced stability condition ``D > W0 - Mr``, cross-checked against the sign of ``N'``."""
    n_prime = sol.W0_omega - sol.Mr - sol.D_omega
    fd = n_prime_fd(cfg, sol.omega, h)
    if abs(n_prime) < N_PRIME_FLOOR or abs(fd) < N_PRIME_FLOOR:
        verdict = "indeterminate"
    elif np.sign(fd) != np.sign(n_prime):
        raise ArithmeticError(
            f"N'(omega) from the decomposition ({n_prime:.3e}) and by differences ({fd:.3e}) disagree in sign"
        )
    else:
        verdict = "stable" if n_prime < 0 else "unstable"
    return StabilityVerdict(verdict, -n_prime, n_prime, fd)
