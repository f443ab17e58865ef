"""Stationary solutions: the homogeneous scalar equation, contraction
certificates, Picard iteration and a posteriori checks along trajectories.

The nonlinear operator is ``G_mu(V) = int w(d(z, z')) S(mu V(z')) dm(z')``;
stationary states solve ``alpha V = G_mu(V) + I``.  ``G_mu`` is Lipschitz with
constant ``mu S'_m W0`` where ``W0`` is the L1 norm of the kernel, so the
stationary problem is a contraction whenever ``mu S'_m W0 < alpha``.

The firing rate may carry its own gain (``Sigmoid(10)``) or have unit gain with
``mu`` applied outside (``Sigmoid(1)`` with ``mu=10``).  Certificates always
use the composite slope ``mu * rate.slope_max``, so both write-ups give the
same margin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .field import FieldGrid, IntegratorOptions, KernelMatrix, dopri45
from .kernels import RadialKernel


class PicardDivergenceError(RuntimeError):
    """The Picard residual grew for too many consecutive iterations."""


class PicardNotConvergedError(RuntimeError):
    """Picard iteration hit the iteration cap before reaching the tolerance."""


class UncertifiedWarning(UserWarning):
    """Picard iteration was attempted outside the certified contraction regime."""


#: Consecutive residual increases tolerated before declaring divergence.
DIVERGENCE_PATIENCE = 10


# ---------------------------------------------------------------------------
# Homogeneous (space-independent) solutions


@dataclass(frozen=True)
class ScalarTrajectory:
    times: np.ndarray
    values: np.ndarray


def _as_time_function(I) -> Callable[[float], float]:
    if callable(I):
        return I
    c = float(I)
    return lambda t: c


def solve_homogeneous(
    alpha: float,
    wbar: float,
    S,
    I,
    V0: float,
    T: float,
    *,
    mu: float = 1.0,
    t_eval=None,
    options: IntegratorOptions = IntegratorOptions(rtol=1e-10, atol=1e-12),
) -> ScalarTrajectory:
    """Integrate ``V' = -alpha V + wbar S(mu V) + I(t)`` on ``[0, T]``.

    ``I`` is a constant or a function of time.  ``t_eval`` defaults to 101
    equally spaced times.
    """
    I_fn = _as_time_function(I)
    times = np.linspace(0.0, T, 101) if t_eval is None else np.asarray(t_eval, dtype=float)

    def f(t, y):
        return -alpha * y + wbar * S(mu * y) + I_fn(t)

    states, _ = dopri45(f, np.array([float(V0)]), 0.0, times, options)
    return ScalarTrajectory(times, states[:, 0])


def homogeneous_fixed_point(alpha: float, wbar: float, S, I0: float, *, mu: float = 1.0) -> float:
    """Root of ``alpha V = wbar S(mu V) + I0`` by bracketed root finding.

    Every root lies in ``|V| <= (|wbar| sup|S| + |I0|) / alpha``.  The root is
    unique when ``mu |wbar| S'_m < alpha``; otherwise the lowest root found on a
    scan of the bracket is returned.
    """
    bound = (abs(wbar) * S.sup_abs + abs(I0)) / alpha + 1.0

    def g(v):
        return alpha * v - wbar * float(S(mu * v)) - I0

    xs = np.linspace(-bound, bound, 4001)
    gs = np.array([g(x) for x in xs])
    idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) <= 0)[0]
    if idx.size == 0:
        raise RuntimeError("no fixed point found in the a priori bracket")
    i = idx[0]
    if gs[i] == 0.0:
        return float(xs[i])
    return float(optimize.brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))


# ---------------------------------------------------------------------------
# Contraction certificate


@dataclass(frozen=True)
class ContractionCertificate:
    """``margin = alpha - mu * s_prime_max * w0``; contraction holds iff ``margin > 0``."""

    mu: float
    s_prime_max: float
    w0: float
    alpha: float
    margin: float
    convention: str = ""
    w0_source: str = ""

    @property
    def contracts(self) -> bool:
        return self.margin > 0

    @property
    def lipschitz_ratio(self) -> float:
        """``mu S'_m W0 / alpha``: the contraction factor of the Picard map."""
        return self.mu * self.s_prime_max * self.w0 / self.alpha

    @property
    def mu_threshold(self) -> float:
        """Gain at which the margin vanishes."""
        if self.s_prime_max * self.w0 == 0:
            return math.inf
        return self.alpha / (self.s_prime_max * self.w0)


def contraction_certificate(mu: float, S, kernel, alpha: float) -> ContractionCertificate:
    """Certificate for the gain ``mu`` applied to the firing rate ``S``.

    ``kernel`` is a :class:`RadialKernel` (continuum, ``W0`` is its L1 norm on
    the disk) or a :class:`KernelMatrix` (discrete, ``W0`` is the max absolute
    row sum of the weighted matrix).  ``s_prime_max`` is ``sup|S'|`` of the rate
    as configured, so the composite slope is ``mu * s_prime_max``.
    """
    if mu < 0:
        raise ValueError("gain mu must be non-negative")
    if isinstance(kernel, KernelMatrix):
        w0, source = kernel.discrete_l1(), "discrete row sum"
    elif isinstance(kernel, RadialKernel):
        w0, source = kernel.l1_norm, "disk L1 norm"
    else:
        w0, source = float(kernel), "given"
    sp = float(S.slope_max)
    lip = 0.0 if mu == 0 else mu * sp * w0
    conv = f"S(mu V) with {type(S).__name__}(mu={getattr(S, 'mu', None)}), composite slope mu*{sp:g}"
    return ContractionCertificate(float(mu), sp, float(w0), float(alpha), float(alpha - lip), conv, source)


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass(frozen=True)
class PicardResult:
    grid: FieldGrid
    values: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    residuals: np.ndarray = field(repr=False)
    rate: float
    certificate: ContractionCertificate

    @property
    def certified(self) -> bool:
        return self.certificate.contracts


def picard_stationary(
    kmat: KernelMatrix,
    S,
    mu: float,
    alpha: float,
    inp=None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    V0=None,
) -> PicardResult:
    """Solve ``alpha V = G_mu(V) + I`` on the grid by ``V <- (G_mu(V) + I) / alpha``.

    ``inp`` is a node vector or ``None`` for zero input.  The residual
    ``||alpha V - G_mu(V) - I||_inf`` is monitored; it must fall below ``tol``.
    Outside the certified regime an :class:`UncertifiedWarning` is issued and
    the iteration proceeds with a divergence guard.
    """
    cert = contraction_certificate(mu, S, kmat, alpha)
    if not cert.contracts:
        warnings.warn(
            f"contraction margin {cert.margin:.3g} <= 0; Picard iteration is uncertified",
            UncertifiedWarning,
            stacklevel=2,
        )
    A = kmat.weighted
    n = kmat.grid.n_nodes
    I = np.zeros(n) if inp is None else np.asarray(inp, dtype=float)
    V = np.zeros(n) if V0 is None else np.array(V0, dtype=float)
    G = A @ S(mu * V)
    res = [float(np.abs(alpha * V - G - I).max())]
    growing = 0
    it = 0
    while res[-1] >= tol:
        if it >= max_iter:
            raise PicardNotConvergedError(f"residual {res[-1]:.3e} after {it} iterations")
        V = (G + I) / alpha
        G = A @ S(mu * V)
        res.append(float(np.abs(alpha * V - G - I).max()))
        it += 1
        if not math.isfinite(res[-1]):
            raise PicardDivergenceError(f"non-finite residual at iteration {it}")
        growing = growing + 1 if res[-1] > res[-2] else 0
        if growing >= DIVERGENCE_PATIENCE:
            raise PicardDivergenceError(
                f"residual grew for {growing} consecutive iterations (now {res[-1]:.3e})"
            )
    residuals = np.array(res)
    return PicardResult(kmat.grid, V, it, res[-1], residuals, _observed_rate(residuals), cert)


def _observed_rate(residuals: np.ndarray) -> float:
    """Largest ratio of successive residuals over the tail of the run (0 if too short)."""
    r = residuals[residuals > 0]
    if r.size < 3:
        return 0.0
    ratios = r[1:] / r[:-1]
    return float(ratios[-min(20, ratios.size):].max())


# ---------------------------------------------------------------------------
# A posteriori checks along trajectories


@dataclass(frozen=True)
class StabilityReport:
    times: np.ndarray
    deviations: np.ndarray
    envelope: np.ndarray
    inside: np.ndarray
    fitted_rate: float
    predicted_rate: float

    @property
    def all_inside(self) -> bool:
        return bool(self.inside.all())


def verify_stability_rate(
    traj, stationary, cert: ContractionCertificate, *, rtol: float = 1e-3, floor: float = 1e-8
) -> StabilityReport:
    """Compare ``||V(t) - V*||_inf`` against ``e^{-margin t} ||V(0) - V*||_inf``.

    A snapshot passes if its deviation is within ``(1 + rtol)`` of the envelope
    or below ``floor``, the absolute noise level of the time integrator.  The
    fitted rate is the least-squares slope of the log deviation over snapshots
    above the floor.
    """
    V_star = np.asarray(getattr(stationary, "values", stationary), dtype=float)
    times = np.asarray(traj.times, dtype=float)
    dev = np.abs(traj.values - V_star[None, :]).max(axis=1)
    env = np.exp(-cert.margin * (times - times[0])) * dev[0]
    inside = (dev <= env * (1.0 + rtol)) | (dev <= floor)
    mask = dev > floor
    if mask.sum() >= 2:
        slope = float(np.polyfit(times[mask], np.log(dev[mask]), 1)[0])
    else:
        slope = -math.inf if dev[0] > 0 else 0.0
    return StabilityReport(times, dev, env, inside, slope, -cert.margin)


def attracting_radius(w0: float, S, alpha: float, input_sup: float) -> float:
    """``rho = (2/alpha) (S^m W0 + sup_t ||I(t)||_inf)``; ``S^m = sup|S|`` (gain-independent)."""
    return 2.0 / alpha * (S.sup_abs * w0 + input_sup)


def norm_bound(t, V0_norm: float, w0: float, S, alpha: float, input_sup: float):
    """``e^{-alpha t} ||V0|| + (rho/2)(1 - e^{-alpha t})``, a bound on ``||V(t)||_inf``."""
    t = np.asarray(t, dtype=float)
    half_rho = 0.5 * attracting_radius(w0, S, alpha, input_sup)
    return np.exp(-alpha * t) * V0_norm + half_rho * (1.0 - np.exp(-alpha * t))


def entry_time_bound(V0_norm: float, rho: float, alpha: float) -> float:
    """Upper bound on the first time the state enters ``B_rho`` from ``||V0|| >= rho``."""
    if V0_norm < rho:
        return 0.0
    return math.log((2.0 * V0_norm - rho) / rho) / alpha


def first_entry_time(step_times, step_norms, rho: float) -> float:
    """First recorded time with ``||V|| < rho`` (linear interpolation between steps)."""
    t = np.asarray(step_times)
    n = np.asarray(step_norms)
    inside = np.nonzero(n < rho)[0]
    if inside.size == 0:
        return math.inf
    k = inside[0]
    if k == 0:
        return float(t[0])
    # crossing between steps k-1 and k
    frac = (n[k - 1] - rho) / (n[k - 1] - n[k])
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))
