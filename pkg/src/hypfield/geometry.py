"""Poincaré-disk and SPD(2) geometry.

Points of the open unit disk are stored in Cartesian components.  Polar and
horocyclic coordinates are derived views computed on demand.  Structure
tensors (2x2 symmetric positive-definite matrices) are foliated as
``(z, Delta)`` with ``Delta = sqrt(det T)`` and ``z`` a point of the disk.

Isometries are elements of SU(1,1) acting by Möbius transformations
``z -> (alpha z + beta) / (conj(beta) z + conj(alpha))``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

#: Largest argument passed to ``arctanh`` before clamping.
ARCTANH_CLAMP = 1.0 - 1e-15


class GeometryError(ValueError):
    """Raised when a point or matrix lies outside the domain of an operation."""


class NearBoundaryWarning(RuntimeWarning):
    """Emitted when a distance argument had to be clamped near the boundary."""


@dataclass(frozen=True)
class DiskPoint:
    """A point ``z = z1 + i z2`` of the open unit disk."""

    z1: float
    z2: float

    def __post_init__(self):
        if not (math.isfinite(self.z1) and math.isfinite(self.z2)):
            raise GeometryError(f"non-finite disk point ({self.z1}, {self.z2})")
        if self.z1 * self.z1 + self.z2 * self.z2 >= 1.0:
            raise GeometryError(f"point ({self.z1}, {self.z2}) is not inside the unit disk")

    @classmethod
    def from_complex(cls, z: complex) -> "DiskPoint":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.z1, self.z2)

    @property
    def abs2(self) -> float:
        return self.z1 * self.z1 + self.z2 * self.z2


ORIGIN = DiskPoint(0.0, 0.0)


@dataclass(frozen=True)
class StructureTensor:
    """Symmetric matrix ``[[x1, x3], [x3, x2]]``, required to be positive definite."""

    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        vals = (self.x1, self.x2, self.x3)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError(f"non-finite tensor entries {vals}")
        if self.x1 <= 0 or self.x1 * self.x2 - self.x3 * self.x3 <= 0:
            raise GeometryError(f"tensor {vals} is not symmetric positive-definite")

    @classmethod
    def from_matrix(cls, m) -> "StructureTensor":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2) or not math.isclose(m[0, 1], m[1, 0], rel_tol=1e-12, abs_tol=1e-15):
            raise GeometryError("expected a symmetric 2x2 matrix")
        return cls(float(m[0, 0]), float(m[1, 1]), float(m[0, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.x1, self.x3], [self.x3, self.x2]])

    @property
    def det(self) -> float:
        return self.x1 * self.x2 - self.x3 * self.x3


@dataclass(frozen=True)
class SU11Element:
    """Element ``[[alpha, beta], [conj(beta), conj(alpha)]]`` of SU(1,1)."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        a = complex(self.alpha)
        b = complex(self.beta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        det = abs(a) ** 2 - abs(b) ** 2
        if not math.isfinite(det) or abs(det - 1.0) > 1e-12 * max(1.0, abs(a) ** 2):
            raise GeometryError(f"|alpha|^2 - |beta|^2 = {det!r}, expected 1")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.alpha, self.beta], [self.beta.conjugate(), self.alpha.conjugate()]]
        )

    def __matmul__(self, other: "SU11Element") -> "SU11Element":
        a = self.alpha * other.alpha + self.beta * other.beta.conjugate()
        b = self.alpha * other.beta + self.beta * other.alpha.conjugate()
        return SU11Element(a, b)

    def inverse(self) -> "SU11Element":
        return SU11Element(self.alpha.conjugate(), -self.beta)


IDENTITY = SU11Element(1.0, 0.0)


@dataclass(frozen=True)
class IwasawaFactors:
    """Parameters of the factorization ``g = rot_phi a_r n_s``."""

    phi: float
    r: float
    s: float


def _as_complex(p) -> complex:
    if isinstance(p, DiskPoint):
        return p.z
    z = complex(p)
    if abs(z) >= 1.0:
        raise GeometryError(f"point {z} is not inside the unit disk")
    return z


def _clamped_arctanh(x):
    x = np.asarray(x, dtype=float)
    if np.any(x > ARCTANH_CLAMP):
        warnings.warn(
            "distance argument clamped near the disk boundary; precision is lost",
            NearBoundaryWarning,
            stacklevel=3,
        )
        x = np.minimum(x, ARCTANH_CLAMP)
    return np.arctanh(x)


def dist_disk(p, q) -> float:
    """Hyperbolic distance ``arctanh(|z - z'| / |1 - conj(z) z'|)``."""
    z = _as_complex(p)
    w = _as_complex(q)
    return float(_clamped_arctanh(abs(z - w) / abs(1.0 - z.conjugate() * w)))


def dist_disk_array(z, w) -> np.ndarray:
    """Vectorized distance between broadcastable arrays of complex points.

    No domain check is performed; callers pass points already known to lie in
    the disk.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return _clamped_arctanh(np.abs(z - w) / np.abs(1.0 - np.conj(z) * w))


def dist_polar(r1, r2, theta) -> np.ndarray:
    """Distance between ``tanh(r1)`` and ``tanh(r2) e^{i theta}`` by hyperbolic trigonometry.

    Uses ``arctanh(sqrt(F))`` with
    ``F = (t1^2 + t2^2 - 2 t1 t2 cos theta) / (1 + t1^2 t2^2 - 2 t1 t2 cos theta)``
    and ``t_k = tanh(r_k)``; no Möbius map is involved.
    """
    t1 = np.tanh(np.asarray(r1, dtype=float))
    t2 = np.tanh(np.asarray(r2, dtype=float))
    c = np.cos(theta)
    num = t1 * t1 + t2 * t2 - 2.0 * t1 * t2 * c
    den = 1.0 + (t1 * t2) ** 2 - 2.0 * t1 * t2 * c
    return _clamped_arctanh(np.sqrt(np.maximum(num, 0.0) / den))


def coords_from_spd(T: StructureTensor) -> tuple[DiskPoint, float]:
    """Split an SPD matrix into its disk point ``z`` and ``Delta = sqrt(det T)``.

    With ``xt = T / Delta`` the normalized entries satisfy
    ``xt1 = ((1+z1)^2 + z2^2)/(1-|z|^2)``, ``xt2 = ((1-z1)^2 + z2^2)/(1-|z|^2)`` and
    ``xt3 = 2 z2/(1-|z|^2)``.  Since ``xt1 + xt2 = 2(1+|z|^2)/(1-|z|^2)``, these
    invert to ``z1 = (xt1 - xt2)/(xt1 + xt2 + 2)`` and ``z2 = 2 xt3/(xt1 + xt2 + 2)``.
    """
    if not isinstance(T, StructureTensor):
        T = StructureTensor.from_matrix(T)
    delta = math.sqrt(T.det)
    a, b, c = T.x1 / delta, T.x2 / delta, T.x3 / delta
    s = a + b + 2.0
    return DiskPoint((a - b) / s, 2.0 * c / s), delta


def spd_from_coords(p: DiskPoint, delta: float) -> StructureTensor:
    """Inverse of :func:`coords_from_spd`."""
    if delta <= 0 or not math.isfinite(delta):
        raise GeometryError(f"Delta must be positive, got {delta}")
    z = _as_complex(p)
    z1, z2 = z.real, z.imag
    d = 1.0 - (z1 * z1 + z2 * z2)
    x1 = ((1.0 + z1) ** 2 + z2 * z2) / d
    x2 = ((1.0 - z1) ** 2 + z2 * z2) / d
    x3 = 2.0 * z2 / d
    return StructureTensor(delta * x1, delta * x2, delta * x3)


def dist_tensor(S: StructureTensor, T: StructureTensor) -> float:
    """Distance ``sqrt(2 (log Delta - log Delta')^2 + d2(z, z')^2)`` on SPD(2)."""
    p, dp = coords_from_spd(S)
    q, dq = coords_from_spd(T)
    d2 = dist_disk(p, q)
    return math.sqrt(2.0 * (math.log(dp) - math.log(dq)) ** 2 + d2 * d2)


def volume_density(p, delta: float) -> float:
    """Density ``8 sqrt(2) / (Delta (1 - |z|^2)^2)`` of the volume in ``(Delta, z1, z2)``."""
    z = _as_complex(p)
    if delta <= 0:
        raise GeometryError(f"Delta must be positive, got {delta}")
    return 8.0 * math.sqrt(2.0) / (delta * (1.0 - abs(z) ** 2) ** 2)


def mobius_apply(g: SU11Element, p):
    """Apply the isometry ``g`` to a point; returns the same type as ``p``."""
    z = _as_complex(p)
    w = (g.alpha * z + g.beta) / (g.beta.conjugate() * z + g.alpha.conjugate())
    if isinstance(p, DiskPoint):
        return DiskPoint.from_complex(w)
    return w


def subgroup_element(kind: str, t: float) -> SU11Element:
    """One-parameter subgroup elements.

    ``K``: rotation ``rot_t`` with ``alpha = e^{i t/2}``;
    ``A``: translation ``a_t`` with ``alpha = cosh t``, ``beta = sinh t``;
    ``N``: horocyclic ``n_t`` with ``alpha = 1 + i t``, ``beta = -i t``.
    """
    kind = kind.upper()
    if kind == "K":
        return SU11Element(cmath.exp(0.5j * t), 0.0)
    if kind == "A":
        return SU11Element(math.cosh(t), math.sinh(t))
    if kind == "N":
        return SU11Element(complex(1.0, t), complex(0.0, -t))
    raise ValueError(f"unknown subgroup kind {kind!r}; expected K, A or N")


def iwasawa_compose(f: IwasawaFactors) -> SU11Element:
    return subgroup_element("K", f.phi) @ subgroup_element("A", f.r) @ subgroup_element("N", f.s)


def iwasawa_decompose(g: SU11Element, *, residual_tol: float = 1e-9) -> IwasawaFactors:
    """Factor ``g = rot_phi a_r n_s`` in closed form.

    The product ``a_r n_s`` has ``alpha + beta = e^r``, so for ``g`` one has
    ``alpha + beta = e^{i phi/2} e^r``.  This fixes ``r`` and ``phi``; then
    ``s = Im(e^{-i phi/2} alpha) e^{-r}``.  Because the rotation subgroup is
    parametrized through ``e^{i phi/2}``, ``phi`` is returned in ``[0, 4 pi)``
    so that the recomposition is exact entrywise (``-I`` needs ``phi = 2 pi``).
    """
    u = g.alpha + g.beta
    r = math.log(abs(u))
    phi = (2.0 * cmath.phase(u)) % (4.0 * math.pi)
    if phi >= 4.0 * math.pi:  # a tiny negative phase rounds up to 4 pi
        phi = 0.0
    half = cmath.exp(-0.5j * phi)
    s = (half * g.alpha).imag * math.exp(-r)
    out = IwasawaFactors(phi, r, s)
    h = iwasawa_compose(out)
    resid = max(abs(h.alpha - g.alpha), abs(h.beta - g.beta))
    if resid > residual_tol * max(1.0, abs(g.alpha)):
        raise ArithmeticError(f"Iwasawa recomposition residual {resid:.3e} exceeds tolerance")
    return out


def to_polar(p) -> tuple[float, float]:
    """Hyperbolic polar coordinates ``(r, theta)`` with ``z = tanh(r) e^{i theta}``.

    ``theta`` lies in ``[0, 2 pi)`` and is ``0`` at the origin.
    """
    z = _as_complex(p)
    rho = abs(z)
    if rho == 0.0:
        return 0.0, 0.0
    theta = cmath.phase(z) % (2.0 * math.pi)
    return float(_clamped_arctanh(rho)), 0.0 if theta >= 2.0 * math.pi else theta


def from_polar(r: float, theta: float) -> DiskPoint:
    return DiskPoint.from_complex(math.tanh(r) * cmath.exp(1j * theta))


def horocyclic_inner(p, b: complex) -> float:
    """``<z, b> = 1/2 log((1 - |z|^2) / |z - b|^2)`` for ``b`` on the unit circle."""
    z = _as_complex(p)
    b = complex(b)
    if abs(abs(b) - 1.0) > 1e-12:
        raise GeometryError(f"boundary point {b} is not on the unit circle")
    return 0.5 * math.log((1.0 - abs(z) ** 2) / abs(z - b) ** 2)


def from_horocyclic(s: float, r: float) -> DiskPoint:
    """The point ``n_s a_r . O``."""
    g = subgroup_element("N", s) @ subgroup_element("A", r)
    return mobius_apply(g, ORIGIN)


def to_horocyclic(p, *, residual_tol: float = 1e-8) -> tuple[float, float]:
    """Inverse of :func:`from_horocyclic`, returning ``(s, r)``.

    ``r`` is the horocyclic inner product with ``b = 1``.  With ``w = tanh r``,
    ``n_s . w = (w + i s (w - 1)) / (1 + i s (w - 1))``; equating this to ``z``
    is linear in ``s`` and gives ``s = (z - w) / (i (w - 1 - z w + z))``.
    """
    z = _as_complex(p)
    r = horocyclic_inner(z, 1.0)
    w = math.tanh(r)
    den = 1j * (w - 1.0 - z * w + z)
    s = 0.0 if abs(z - w) == 0.0 else ((z - w) / den).real
    back = from_horocyclic(s, r).z
    resid = abs(back - z)
    if not math.isfinite(resid) or resid > residual_tol:
        raise ArithmeticError(
            f"horocyclic inversion residual {resid:.3e} at z={z}; point too close to the boundary"
        )
    return s, r
