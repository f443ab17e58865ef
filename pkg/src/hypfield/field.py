"""Discretized semi-homogeneous neural field on a Euclidean ball of the disk.

The ball ``B(0, a)`` is sampled on the polar grid ``r_i = (i-1) a/N``,
``theta_j = (j-1) 2pi/M`` for ``i = 1..N+1`` and ``j = 1..M+1``.  The
column ``j = M+1`` duplicates ``theta = 0`` and the ring ``r = a`` carries a
full rectangle weight; both are kept so that the discrete sum is the plain
rectangular rule over ``[0, a] x [0, 2pi]``.  Nodes are flattened in row-major
order, index ``i (M+1) + j`` with zero-based ``i, j``.

The semi-discrete system is

    dV_ij/dt = -alpha V_ij + h1 h2 sum_kl W_ij,kl S(V_kl) + I_ij(t),

with ``W_ij,kl = w(d(z_ij, z_kl)) r_k / (1 - r_k^2)^2``.  It is integrated by
an embedded Dormand-Prince 5(4) pair with PI step-size control.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .geometry import dist_disk_array
from .kernels import RadialKernel


class FieldError(RuntimeError):
    """Numerical failure during a field computation."""


class StepUnderflowError(FieldError):
    """The adaptive step size fell below the allowed minimum."""


class MemoryBudgetError(FieldError):
    """The dense kernel matrix would exceed the configured node cap."""


# ---------------------------------------------------------------------------
# Firing rates


@dataclass(frozen=True)
class Sigmoid:
    """``S(x) = 1 / (1 + exp(-mu x))``."""

    mu: float = 1.0
    kind = "sigmoid"

    def __call__(self, x):
        return expit(self.mu * np.asarray(x, dtype=float))

    @property
    def sup_abs(self) -> float:
        return 1.0

    @property
    def slope_max(self) -> float:
        return self.mu / 4.0


@dataclass(frozen=True)
class ShiftedSigmoid:
    """``S(x) = 1 / (1 + exp(-mu x)) - 1/2``, which vanishes at the origin."""

    mu: float = 1.0
    kind = "shifted_sigmoid"

    def __call__(self, x):
        return expit(self.mu * np.asarray(x, dtype=float)) - 0.5

    @property
    def sup_abs(self) -> float:
        return 0.5

    @property
    def slope_max(self) -> float:
        return self.mu / 4.0


@dataclass(frozen=True)
class Heaviside:
    """``H(x - kappa)`` with ``H(0) = 1``; the high-gain limit of the sigmoid."""

    kappa: float = 0.0
    kind = "heaviside"

    def __call__(self, x):
        return (np.asarray(x, dtype=float) >= self.kappa).astype(float)

    @property
    def sup_abs(self) -> float:
        return 1.0

    @property
    def slope_max(self) -> float:
        return math.inf


FiringRate = Sigmoid | ShiftedSigmoid | Heaviside


# ---------------------------------------------------------------------------
# Grid and kernel matrix


@dataclass(frozen=True)
class FieldGrid:
    a: float
    N: int
    M: int

    def __post_init__(self):
        if not (0.0 < self.a < 1.0):
            raise ValueError(f"grid radius a must lie in (0, 1), got {self.a}")
        if int(self.N) != self.N or int(self.M) != self.M or self.N < 2 or self.M < 4:
            raise ValueError(f"grid needs integers N >= 2 and M >= 4, got N={self.N}, M={self.M}")

    @property
    def h1(self) -> float:
        return self.a / self.N

    @property
    def h2(self) -> float:
        return 2.0 * math.pi / self.M

    @property
    def r(self) -> np.ndarray:
        return self.h1 * np.arange(self.N + 1)

    @property
    def theta(self) -> np.ndarray:
        return self.h2 * np.arange(self.M + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N + 1, self.M + 1)

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) * (self.M + 1)

    @property
    def q(self) -> np.ndarray:
        """Quadrature factor ``r / (1 - r^2)^2`` per radius."""
        r = self.r
        return r / (1.0 - r * r) ** 2

    def node_r(self) -> np.ndarray:
        return np.repeat(self.r, self.M + 1)

    def node_theta(self) -> np.ndarray:
        return np.tile(self.theta, self.N + 1)

    def node_z(self) -> np.ndarray:
        return self.node_r() * np.exp(1j * self.node_theta())

    def node_q(self) -> np.ndarray:
        return np.repeat(self.q, self.M + 1)

    def index(self, i: int, j: int) -> int:
        return i * (self.M + 1) + j


def build_grid(a: float = 0.5, N: int = 40, M: int = 40) -> FieldGrid:
    return FieldGrid(float(a), int(N), int(M))


DEFAULT_MAX_NODES = 12_000


ANGULAR_RULES = ("rectangular", "periodic")


@dataclass(frozen=True)
class KernelMatrix:
    """Dense matrix ``W_ij,kl = w(d(z_ij, z_kl)) q_k`` together with its grid.

    With ``angular_rule="rectangular"`` every column carries its full weight, so
    the seam ``theta = 0 = 2pi`` is counted twice.  ``"periodic"`` zeroes the
    duplicate column ``l = M+1``; the scheme is then exactly equivariant under
    rotations by multiples of ``h2``.
    """

    grid: FieldGrid
    matrix: np.ndarray = field(repr=False)
    angular_rule: str = "rectangular"

    @property
    def weighted(self) -> np.ndarray:
        """``h1 h2 W``, the matrix applied to ``S(V)`` in the right-hand side."""
        return self.grid.h1 * self.grid.h2 * self.matrix

    def discrete_l1(self) -> float:
        """Max row sum of ``h1 h2 |W|``: the discrete counterpart of the kernel's L1 norm."""
        return float(self.grid.h1 * self.grid.h2 * np.abs(self.matrix).sum(axis=1).max())


def assemble_kernel_matrix(
    grid: FieldGrid,
    kernel: RadialKernel,
    *,
    max_nodes: int = DEFAULT_MAX_NODES,
    angular_rule: str = "rectangular",
) -> KernelMatrix:
    if angular_rule not in ANGULAR_RULES:
        raise ValueError(f"unknown angular rule {angular_rule!r}; use one of {ANGULAR_RULES}")
    n = grid.n_nodes
    if n > max_nodes:
        raise MemoryBudgetError(
            f"{n} grid nodes exceed the cap of {max_nodes} (dense matrix of {n * n * 8 / 1e6:.0f} MB)"
        )
    z = grid.node_z()
    q = grid.node_q()
    if angular_rule == "periodic":
        q = q.reshape(grid.shape).copy()
        q[:, -1] = 0.0
        q = q.ravel()
    mat = np.empty((n, n))
    # assemble in row blocks to bound the size of complex temporaries
    for lo in range(0, n, 512):
        d = dist_disk_array(z[lo : lo + 512, None], z[None, :])
        mat[lo : lo + 512] = kernel(d) * q[None, :]
    mat.setflags(write=False)
    return KernelMatrix(grid, mat, angular_rule)


# ---------------------------------------------------------------------------
# External inputs


@dataclass(frozen=True)
class ZeroInput:
    kind = "zero"
    is_static = True

    def __call__(self, z, t: float = 0.0):
        return np.zeros(np.shape(z))

    @property
    def sup(self) -> float:
        return 0.0


def _gauss_denominator(sigma: float, convention: str) -> float:
    if convention == "sigma_sq":
        return sigma * sigma
    if convention == "two_sigma_sq":
        return 2.0 * sigma * sigma
    raise ValueError(f"unknown Gaussian width convention {convention!r}; use sigma_sq or two_sigma_sq")


@dataclass(frozen=True)
class GaussianBump:
    """``I(z) = I0 exp(-d(z, center)^2 / D)`` with ``D = sigma^2`` or ``2 sigma^2``."""

    I0: float
    sigma: float
    convention: str = "sigma_sq"
    center: complex = 0j
    kind = "gaussian"
    is_static = True

    def __post_init__(self):
        if self.I0 < 0 or not self.sigma > 0:
            raise ValueError("Gaussian input needs I0 >= 0 and sigma > 0")
        _gauss_denominator(self.sigma, self.convention)
        if abs(self.center) >= 1:
            raise ValueError("input center must lie inside the disk")

    def __call__(self, z, t: float = 0.0):
        d = dist_disk_array(z, self.center)
        return self.I0 * np.exp(-(d**2) / _gauss_denominator(self.sigma, self.convention))

    def radial(self, r):
        """Value at hyperbolic distance ``r`` from the center."""
        r = np.asarray(r, dtype=float)
        return self.I0 * np.exp(-(r**2) / _gauss_denominator(self.sigma, self.convention))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        den = _gauss_denominator(self.sigma, self.convention)
        return -2.0 * r / den * self.radial(r)

    @property
    def sup(self) -> float:
        return self.I0


@dataclass(frozen=True)
class RotatingBump:
    """Gaussian bump whose center ``r0 e^{i Omega0 t}`` turns around the origin."""

    I0: float
    sigma: float
    r0: float
    Omega0: float
    convention: str = "sigma_sq"
    kind = "rotating"
    is_static = False

    def __post_init__(self):
        if self.I0 < 0 or not self.sigma > 0:
            raise ValueError("rotating input needs I0 >= 0 and sigma > 0")
        if not (0.0 <= self.r0 < 1.0):
            raise ValueError("rotating input radius r0 must lie in [0, 1)")
        _gauss_denominator(self.sigma, self.convention)

    def center(self, t: float) -> complex:
        return self.r0 * complex(math.cos(self.Omega0 * t), math.sin(self.Omega0 * t))

    def __call__(self, z, t: float = 0.0):
        d = dist_disk_array(z, self.center(t))
        return self.I0 * np.exp(-(d**2) / _gauss_denominator(self.sigma, self.convention))

    @property
    def sup(self) -> float:
        return self.I0


ExternalInput = ZeroInput | GaussianBump | RotatingBump


# ---------------------------------------------------------------------------
# Right-hand side


class FieldRHS:
    """Callable ``f(t, V)`` for the discretized field, with cached static input."""

    def __init__(self, kmat: KernelMatrix, rate, alpha: float, inp=None):
        self.kmat = kmat
        self.rate = rate
        self.alpha = float(alpha)
        self.input = inp if inp is not None else ZeroInput()
        self._A = kmat.weighted
        self._z = kmat.grid.node_z()
        self._static = self.input(self._z, 0.0) if self.input.is_static else None

    def input_at(self, t: float) -> np.ndarray:
        if self._static is not None:
            return self._static
        return self.input(self._z, t)

    def __call__(self, t: float, V: np.ndarray) -> np.ndarray:
        out = -self.alpha * V + self._A @ self.rate(V) + self.input_at(t)
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise FieldError(f"non-finite right-hand side at node {bad}, t={t}")
        return out


def rhs(V, kmat: KernelMatrix, rate, inp, t: float, alpha: float) -> np.ndarray:
    """One evaluation of the semi-discrete right-hand side."""
    return FieldRHS(kmat, rate, alpha, inp)(t, np.asarray(V, dtype=float))


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th- and 4th-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    h_min: float = math.inf
    h_max: float = 0.0


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-6
    atol: float = 1e-8
    h0: float | None = None
    h_min: float = 1e-12
    fixed_step: float | None = None
    safety: float = 0.9
    max_steps: int = 10_000_000


def _initial_step(f, t0, y0, f0, order, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def dopri45(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t0: float,
    t_out: Sequence[float],
    options: IntegratorOptions = IntegratorOptions(),
    on_step: Callable[[float, np.ndarray], None] | None = None,
):
    """Integrate ``y' = f(t, y)`` and return the states at the times ``t_out``.

    Steps are shortened to land exactly on every output time.  With
    ``options.fixed_step`` set, the step size is constant (apart from those
    landings) and no error control is applied.  ``on_step(t, y)`` is called
    after every accepted step.

    Returns ``(states, stats)`` with ``states`` of shape ``(len(t_out), n)``.
    """
    y = np.array(y0, dtype=float, copy=True)
    t = float(t0)
    t_out = np.asarray(t_out, dtype=float)
    if np.any(np.diff(t_out) < 0) or (t_out.size and t_out[0] < t0):
        raise ValueError("output times must be sorted and not precede t0")
    stats = StepStats()
    states = np.empty((t_out.size, y.size))
    k = np.empty((7, y.size))
    fy = f(t, y)
    stats.evaluations += 1
    opts = options
    if opts.fixed_step is not None:
        h = float(opts.fixed_step)
    elif opts.h0 is not None:
        h = float(opts.h0)
    else:
        h = _initial_step(f, t, y, fy, 5, opts.rtol, opts.atol)
        stats.evaluations += 1
    err_prev = 1.0
    out_i = 0
    while out_i < t_out.size and t_out[out_i] <= t:
        states[out_i] = y
        out_i += 1
    steps = 0
    while out_i < t_out.size:
        target = t_out[out_i]
        landing = t + h >= target - 1e-12 * max(1.0, abs(target))
        h_try = target - t if landing else h
        k[0] = fy
        for s in range(1, 7):
            ys = y + h_try * (np.asarray(_A[s]) @ k[:s])
            k[s] = f(t + _C[s] * h_try, ys)
        stats.evaluations += 6
        y_new = ys  # stage 7 is evaluated at the 5th-order solution (FSAL)
        if opts.fixed_step is not None:
            err = 0.0
        else:
            scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(h_try * (_E @ k)) / scale))
        if err <= 1.0:
            t = target if landing else t + h_try
            y = y_new
            fy = k[6].copy()
            stats.accepted += 1
            stats.h_min = min(stats.h_min, h_try)
            stats.h_max = max(stats.h_max, h_try)
            if on_step is not None:
                on_step(t, y)
            while out_i < t_out.size and t_out[out_i] <= t + 1e-12 * max(1.0, abs(t)):
                states[out_i] = y
                out_i += 1
            if opts.fixed_step is None:
                fac = opts.safety * max(err, 1e-10) ** (-0.7 / 5) * err_prev ** (0.4 / 5)
                fac = min(5.0, max(0.2, fac))
                h_next = h_try * fac
                # a shortened landing step says nothing about the natural step
                h = max(h, h_next) if landing else h_next
                err_prev = max(err, 1e-4)
        else:
            stats.rejected += 1
            h = h_try * max(0.2, opts.safety * err ** (-1.0 / 5))
        if opts.fixed_step is None and h < opts.h_min:
            raise StepUnderflowError(f"step size {h:.3e} below {opts.h_min:.1e} at t={t}")
        steps += 1
        if steps > opts.max_steps:
            raise FieldError(f"exceeded {opts.max_steps} integration steps at t={t}")
    return states, stats


# ---------------------------------------------------------------------------
# Simulation driver


@dataclass(frozen=True)
class SimulationConfig:
    grid: FieldGrid
    kernel: RadialKernel
    rate: object
    alpha: float
    input: object = ZeroInput()
    T: float = 2500.0
    snapshots: tuple[float, ...] | None = None
    init: str = "zero"
    noise_amplitude: float = 0.01
    seed: int = 0
    integrator: IntegratorOptions = IntegratorOptions()
    record_steps: bool = False
    max_nodes: int = DEFAULT_MAX_NODES
    angular_rule: str = "rectangular"

    def snapshot_times(self) -> np.ndarray:
        if self.snapshots is None:
            return self.T * np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        return np.asarray(sorted(self.snapshots), dtype=float)


@dataclass(frozen=True)
class Trajectory:
    grid: FieldGrid
    times: np.ndarray
    values: np.ndarray
    step_times: np.ndarray | None = None
    step_norms: np.ndarray | None = None
    stats: StepStats | None = None
    wall_time: float = 0.0
    V0: np.ndarray | None = None

    def snapshot(self, k: int) -> np.ndarray:
        """Values of snapshot ``k`` as an ``(N+1, M+1)`` array."""
        return self.values[k].reshape(self.grid.shape)

    def sup_norms(self) -> np.ndarray:
        return np.abs(self.values).max(axis=1)


def initial_state(cfg: SimulationConfig) -> np.ndarray:
    n = cfg.grid.n_nodes
    if cfg.init == "zero":
        return np.zeros(n)
    if cfg.init == "noise":
        rng = np.random.default_rng(cfg.seed)
        return rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude, n)
    raise ValueError(f"unknown initial condition {cfg.init!r}; use zero or noise")


def simulate(cfg: SimulationConfig, *, kmat: KernelMatrix | None = None, V0=None) -> Trajectory:
    """Integrate the field from ``V0`` (or the configured initial condition) to ``cfg.T``."""
    start = _time.perf_counter()
    if kmat is None:
        kmat = assemble_kernel_matrix(
            cfg.grid, cfg.kernel, max_nodes=cfg.max_nodes, angular_rule=cfg.angular_rule
        )
    f = FieldRHS(kmat, cfg.rate, cfg.alpha, cfg.input)
    y0 = initial_state(cfg) if V0 is None else np.array(V0, dtype=float)
    if y0.shape != (cfg.grid.n_nodes,):
        raise ValueError(f"initial state has shape {y0.shape}, expected ({cfg.grid.n_nodes},)")
    times = cfg.snapshot_times()
    if times.size and times[-1] > cfg.T:
        raise ValueError("snapshot times exceed the final time T")
    step_t: list[float] = []
    step_n: list[float] = []
    hook = None
    if cfg.record_steps:
        step_t.append(0.0)
        step_n.append(float(np.abs(y0).max()))

        def hook(t, y):
            step_t.append(t)
            step_n.append(float(np.abs(y).max()))

    states, stats = dopri45(f, y0, 0.0, times, cfg.integrator, on_step=hook)
    return Trajectory(
        grid=cfg.grid,
        times=times,
        values=states,
        step_times=np.array(step_t) if cfg.record_steps else None,
        step_norms=np.array(step_n) if cfg.record_steps else None,
        stats=stats,
        wall_time=_time.perf_counter() - start,
        V0=y0,
    )


# ---------------------------------------------------------------------------
# Snapshot analysis


def _periodic_view(grid: FieldGrid, V) -> np.ndarray:
    """``(N+1, M)`` array without the seam column; the center ring is averaged."""
    A = np.array(np.asarray(V, dtype=float).reshape(grid.shape)[:, :-1])
    A[0, :] = A[0, :].mean()
    return A


def local_maxima(grid: FieldGrid, V, frac: float = 0.5) -> list[tuple[int, int]]:
    """Strict local maxima of a snapshot that exceed ``frac`` times its global maximum.

    Neighbourhoods are the 3x3 blocks of the polar grid with ``theta`` periodic;
    the center counts once and its neighbours are the first ring.  Returns
    0-based ``(i, j)`` indices (``(0, 0)`` for the center).
    """
    A = _periodic_view(grid, V)
    level = frac * A.max()
    peaks = []
    if A[0, 0] > level and A[0, 0] > A[1].max():
        peaks.append((0, 0))
    padded = np.vstack([A, np.full((1, A.shape[1]), -np.inf)])
    inner = A[1:]
    best = np.full(inner.shape, -np.inf)
    for di in (-1, 0, 1):
        rows = padded[np.arange(1, A.shape[0]) + di]
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            best = np.maximum(best, np.roll(rows, -dj, axis=1))
    for i, j in zip(*np.nonzero((inner > best) & (inner > level))):
        peaks.append((int(i) + 1, int(j)))
    return peaks


def center_of_mass(grid: FieldGrid, V) -> complex:
    """``sum q V z / sum q V`` over the grid, the seam column excluded.

    ``V`` is used as a signed density; pass a difference of states to locate
    the activity evoked by an input.
    """
    A = _periodic_view(grid, V)
    z = grid.node_z().reshape(grid.shape)[:, :-1]
    w = grid.q[:, None] * A
    total = w.sum()
    if total == 0:
        raise ValueError("center of mass of a zero density")
    return complex((w * z).sum() / total)
