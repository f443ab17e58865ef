"""Radial connectivity kernels on the Poincaré disk.

A kernel is a profile ``w(r)`` of the hyperbolic distance ``r``.  Admissible
kernels must be integrable against the measure ``dm = 1/2 sinh(2r) dr dtheta``,
which grows like ``e^{2r}``; parameters that violate this are rejected at
construction.

Families: :class:`Exponential`, :class:`Gabor`, :class:`DiffGaussians` and
:class:`MexicanHat3D` (the difference of Gaussians in the three-dimensional
tensor distance, with widths ``2 sigma^2`` in the exponent).
"""

from __future__ import annotations

import math
import threading
from dataclasses import MISSING, dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from . import geometry
from .specfun import SpectralGrid, erf, radial_fourier

#: ``|w(r)| sinh(2r)`` must fall below this value at the truncation radius.
TAIL_TOL = 1e-12
_SCAN_STEP = 0.01
_SCAN_LIMIT = 400.0
_CACHE_LOCK = threading.Lock()


class KernelAdmissibilityError(ValueError):
    """Kernel parameters violate an admissibility condition."""


class RadialKernel:
    """Base class.  Subclasses are frozen dataclasses implementing :meth:`_profile`."""

    family = "abstract"

    def _profile(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(self._profile(np.abs(r)))
        return float(out) if out.ndim == 0 else out

    def eval(self, r):
        if np.any(np.asarray(r) < 0):
            raise ValueError("kernel is evaluated at non-negative distances")
        return self(r)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def scaled(self, c: float) -> "ScaledKernel":
        return ScaledKernel(self, float(c))

    # -- truncation -----------------------------------------------------
    @cached_property
    def r_max(self) -> float:
        """Radius beyond which ``|w(r)| sinh(2r) < TAIL_TOL`` on a fine scan."""
        r = np.arange(0.0, _SCAN_LIMIT, _SCAN_STEP)
        w = np.abs(self(r))
        with np.errstate(over="ignore", invalid="ignore"):
            mag = np.where(w == 0.0, 0.0, w * np.sinh(2.0 * r))
        above = np.nonzero(~(mag < TAIL_TOL))[0]
        if above.size == 0:
            return 1.0
        last = above[-1]
        if last >= r.size - 2:
            raise KernelAdmissibilityError(
                f"{self!r}: |w(r)| sinh(2r) does not decay (integrability against the disk measure fails)"
            )
        return float(r[last] + 2 * _SCAN_STEP)

    def sign_changes(self) -> list[float]:
        """Approximate locations of sign changes of ``w`` on ``(0, r_max)``."""
        r = np.linspace(0.0, self.r_max, 20001)
        v = self(r)
        idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
        return [float(0.5 * (r[i] + r[i + 1])) for i in idx]

    # -- cached integrals ------------------------------------------------
    @cached_property
    def l1_norm(self) -> float:
        """``int_D |w(d(z, 0))| dm(z) = pi int_0^inf |w(r)| sinh(2r) dr``."""
        pts = self.sign_changes()
        val, err = integrate.quad(
            lambda r: abs(self(r)) * math.sinh(2.0 * r),
            0.0,
            self.r_max,
            points=pts or None,
            limit=500,
            epsabs=0.0,
            epsrel=1e-12,
        )
        return math.pi * val

    @cached_property
    def integral(self) -> float:
        """Signed integral ``int_D w(d(z, 0)) dm(z)``."""
        pts = self.sign_changes()
        val, _ = integrate.quad(
            lambda r: self(r) * math.sinh(2.0 * r),
            0.0,
            self.r_max,
            points=pts or None,
            limit=500,
            epsabs=0.0,
            epsrel=1e-12,
        )
        return math.pi * val

    def spectrum(self, grid: SpectralGrid) -> np.ndarray:
        """Radial Fourier transform sampled on the nodes of ``grid`` (cached per grid)."""
        with _CACHE_LOCK:
            cache = self.__dict__.setdefault("_spectra", {})
            cached = cache.get(grid)
        if cached is not None:
            return cached
        vals = radial_fourier(self, grid.nodes, r_max=self.r_max)
        vals.setflags(write=False)
        with _CACHE_LOCK:
            return cache.setdefault(grid, vals)


@dataclass(frozen=True)
class Exponential(RadialKernel):
    """``w(r) = exp(-r / b)``; integrable against ``sinh(2r)`` only for ``b < 1/2``.

    ``truncated=True`` waives the integrability check for use on a bounded ball
    only (field simulations).  Whole-disk quantities such as :attr:`r_max`,
    :attr:`l1_norm` and :meth:`spectrum` still fail for ``b >= 1/2``.
    """

    b: float
    truncated: bool = False
    family = "exponential"

    def __post_init__(self):
        if not (self.b > 0):
            raise KernelAdmissibilityError(f"exponential kernel needs b > 0, got b={self.b}")
        if not (self.b < 0.5) and not self.truncated:
            raise KernelAdmissibilityError(
                f"exponential kernel with b={self.b} is not integrable: "
                "a bounded L1 norm on the disk requires b < 0.5"
            )

    def _profile(self, r):
        return np.exp(-r / self.b)


@dataclass(frozen=True)
class Gabor(RadialKernel):
    """``w(r) = b^{-1/2} (1 - 2 r^2 / b^2) exp(-r^2 / b)``, kept unnormalized."""

    b: float
    family = "gabor"

    def __post_init__(self):
        if not (self.b > 0):
            raise KernelAdmissibilityError(f"Gabor kernel needs b > 0, got b={self.b}")

    def _profile(self, r):
        return (1.0 - 2.0 * r * r / self.b**2) * np.exp(-r * r / self.b) / math.sqrt(self.b)


def _check_dog_params(sigma1, sigma2, A, name):
    if not (0.0 < sigma1 <= sigma2):
        raise KernelAdmissibilityError(f"{name} needs 0 < sigma1 <= sigma2, got ({sigma1}, {sigma2})")
    if not (0.0 <= A <= 1.0):
        raise KernelAdmissibilityError(f"{name} needs 0 <= A <= 1, got A={A}")


@dataclass(frozen=True)
class DiffGaussians(RadialKernel):
    """``w(r) = g(r; sigma1) - A g(r; sigma2)`` with ``g(r; s) = exp(-r^2/s^2) / sqrt(2 pi s^2)``."""

    sigma1: float
    sigma2: float
    A: float
    family = "dog"

    def __post_init__(self):
        _check_dog_params(self.sigma1, self.sigma2, self.A, "difference of Gaussians")

    def _profile(self, r):
        s1, s2 = self.sigma1, self.sigma2
        return np.exp(-r * r / s1**2) / math.sqrt(2 * math.pi * s1**2) - self.A * np.exp(
            -r * r / s2**2
        ) / math.sqrt(2 * math.pi * s2**2)


@dataclass(frozen=True)
class MexicanHat3D(RadialKernel):
    """Mexican hat as a function of the tensor distance ``x``.

    ``w(x) = g(x; sigma1) - A g(x; sigma2)`` with
    ``g(x; s) = exp(-x^2 / (2 s^2)) / sqrt(2 pi s^2)``.  On the semi-homogeneous
    slice (equal determinants) ``x`` is the disk distance.
    """

    sigma1: float
    sigma2: float
    A: float
    family = "mexican_hat"

    def __post_init__(self):
        _check_dog_params(self.sigma1, self.sigma2, self.A, "Mexican hat")

    def _profile(self, r):
        s1, s2 = self.sigma1, self.sigma2
        return np.exp(-r * r / (2 * s1**2)) / math.sqrt(2 * math.pi * s1**2) - self.A * np.exp(
            -r * r / (2 * s2**2)
        ) / math.sqrt(2 * math.pi * s2**2)

    def eval_tensor(self, log_ratio, d2):
        """Value at log-determinant difference ``log_ratio`` and disk distance ``d2``."""
        x = np.sqrt(2.0 * np.asarray(log_ratio) ** 2 + np.asarray(d2) ** 2)
        return self(x)


@dataclass(frozen=True)
class ScaledKernel(RadialKernel):
    """``c * base(r)``."""

    base: RadialKernel
    c: float
    family = "scaled"

    def _profile(self, r):
        return self.c * self.base(r)

    @cached_property
    def r_max(self) -> float:
        return self.base.r_max


FAMILIES = {
    "exponential": Exponential,
    "gabor": Gabor,
    "dog": DiffGaussians,
    "mexican_hat": MexicanHat3D,
}


def make_kernel(family: str, **params) -> RadialKernel:
    """Construct a kernel from a family name and the parameters it takes."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise KernelAdmissibilityError(
            f"unknown kernel family {family!r}; expected one of {sorted(FAMILIES)}"
        ) from None
    fields = cls.__dataclass_fields__
    unknown = sorted(set(params) - set(fields))
    if unknown:
        raise KernelAdmissibilityError(f"kernel {family!r} does not take parameters {unknown}")
    missing = [n for n, f in fields.items() if n not in params and f.default is MISSING]
    if missing:
        raise KernelAdmissibilityError(f"kernel {family!r} needs parameters {missing}")
    kwargs = {}
    for n, v in params.items():
        kwargs[n] = bool(v) if isinstance(fields[n].default, bool) else float(v)
    return cls(**kwargs)


def mexican_hat_wbar(sigma1: float, sigma2: float, A: float) -> float:
    """Closed-form integral of the Mexican hat over the tensor space.

    ``(pi^{3/2}/2) (sigma1 e^{2 sigma1^2} erf(sqrt2 sigma1) - A sigma2 e^{2 sigma2^2} erf(sqrt2 sigma2))``.
    """
    _check_dog_params(sigma1, sigma2, A, "Mexican hat")

    def term(s):
        return s * math.exp(2.0 * s * s) * erf(math.sqrt(2.0) * s)

    return 0.5 * math.pi**1.5 * (term(sigma1) - A * term(sigma2))


def xi_invariance(kernel, p, *, n_phi: int = 256, rtol: float = 1e-10) -> float:
    """``Xi(p) = int_D w(d(p, z')) dm(z')`` by quadrature in Euclidean polar coordinates about ``p``.

    With ``z' = p + rho e^{i phi}`` the measure is ``rho d rho d phi / (1 - |z'|^2)^2``.
    For each ray the radial integral runs up to the Euclidean radius where the
    hyperbolic distance from ``p`` reaches the kernel's truncation radius; the
    angular integral uses the periodic trapezoid rule.
    """
    z0 = p.z if isinstance(p, geometry.DiskPoint) else complex(p)
    if abs(z0) >= 1:
        raise geometry.GeometryError(f"point {z0} is not inside the unit disk")
    r_cut = kernel.r_max
    t = math.tanh(r_cut)
    pts = kernel.sign_changes()
    total = 0.0
    for phi in 2.0 * math.pi * np.arange(n_phi) / n_phi:
        e = complex(math.cos(phi), math.sin(phi))
        # points at hyperbolic distance r_cut from p along the ray: solve |(z'-p)/(1-conj(p)z')| = t
        # for z' = p + rho e, i.e. rho = t |1 - conj(p) z'|; a quadratic in rho
        a2 = 1.0 - t * t * abs(z0.conjugate() * e) ** 2
        b1 = 2.0 * t * t * (z0.conjugate() * e * (1.0 - abs(z0) ** 2)).real
        c0 = -(t * t) * (1.0 - abs(z0) ** 2) ** 2
        rho_max = (-b1 + math.sqrt(b1 * b1 - 4 * a2 * c0)) / (2 * a2)

        def f(rho):
            z = z0 + rho * e
            d = geometry.dist_disk_array(z0, z)
            return float(kernel(d)) * rho / (1.0 - abs(z) ** 2) ** 2

        # sign changes of w sit at fixed hyperbolic radii; map them to Euclidean ones
        bps = []
        for rs in pts:
            ts = math.tanh(rs)
            c = -(ts * ts) * (1.0 - abs(z0) ** 2) ** 2
            a = 1.0 - ts * ts * abs(z0.conjugate() * e) ** 2
            b = 2.0 * ts * ts * (z0.conjugate() * e * (1.0 - abs(z0) ** 2)).real
            bps.append((-b + math.sqrt(b * b - 4 * a * c)) / (2 * a))
        val, _ = integrate.quad(f, 0.0, rho_max, points=bps or None, limit=400, epsabs=0.0, epsrel=rtol)
        total += val
    return total * 2.0 * math.pi / n_phi
