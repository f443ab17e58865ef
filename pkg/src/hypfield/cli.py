"""Command-line front end.

    hypfield <command> [--preset NAME] [--config FILE] [--set key=value]... [--out DIR]

Configuration is a flat ``key = value`` grammar with dotted keys; ``#`` starts
a comment.  Sources are applied in order: defaults, preset, config file,
``--set`` overrides.  Every run writes a CSV file and a ``.meta`` sidecar that
lists all keys in the same grammar, so ``--config run.meta`` repeats the run.

Exit status is 0 on success, 1 on numerical failure (or a failing check in
``verify``) and 2 on configuration errors.  Failures print one ``error:`` line
to standard error.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import bumps, field, kernels, specfun, stationary, verify

COMMANDS = ("simulate", "stationary", "homogeneous", "bump-curve", "bump-profile", "bump-stability", "verify")


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


# ---------------------------------------------------------------------------
# Schema


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text: str):
    t = text.strip().lower()
    return None if t in ("", "none") else float(t)


def _float_list(text: str) -> tuple[float, ...]:
    t = text.strip()
    return () if t.lower() in ("", "none") else tuple(float(x) for x in t.split(","))


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return t

    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    default: str
    doc: str


SCHEMA: dict[str, Key] = {
    "threads": Key(int, "0", "BLAS threads; 0 defers to HYPFIELD_THREADS, then the library default"),
    "seed": Key(int, "0", "seed of the noise initial condition"),
    "output.name": Key(str, "", "basename of the output files (default: the command)"),
    "grid.a": Key(float, "0.5", "Euclidean radius of the simulated ball"),
    "grid.N": Key(int, "40", "radial intervals"),
    "grid.M": Key(int, "40", "angular intervals"),
    "grid.angular_rule": Key(_choice(*field.ANGULAR_RULES), "rectangular", "weight of the duplicated seam column"),
    "grid.max_nodes": Key(int, str(field.DEFAULT_MAX_NODES), "cap on grid nodes for the dense kernel matrix"),
    "kernel.family": Key(_choice(*kernels.FAMILIES), "exponential", "connectivity family"),
    "kernel.b": Key(_opt_float, "0.2", "width (exponential, gabor)"),
    "kernel.sigma1": Key(_opt_float, "none", "inner width (dog, mexican_hat)"),
    "kernel.sigma2": Key(_opt_float, "none", "outer width (dog, mexican_hat)"),
    "kernel.A": Key(_opt_float, "none", "surround weight (dog, mexican_hat)"),
    "kernel.truncated": Key(_bool, "false", "exponential only: allow b >= 1/2 on the bounded ball"),
    "rate.kind": Key(_choice("sigmoid", "shifted_sigmoid", "heaviside"), "sigmoid", "firing-rate function"),
    "rate.mu": Key(float, "10", "sigmoid slope"),
    "rate.kappa": Key(float, "0", "Heaviside threshold"),
    "model.alpha": Key(float, "0.1", "decay rate"),
    "input.kind": Key(_choice("zero", "gaussian", "rotating"), "zero", "external input"),
    "input.I0": Key(float, "0.1", "input amplitude"),
    "input.sigma": Key(float, "0.05", "input width"),
    "input.convention": Key(_choice("sigma_sq", "two_sigma_sq"), "sigma_sq", "Gaussian denominator"),
    "input.r0": Key(float, "0.4", "radius of the rotating input centre"),
    "input.Omega0": Key(float, "0.01", "angular velocity of the rotating input"),
    "init.kind": Key(_choice("zero", "noise"), "zero", "initial condition"),
    "init.amplitude": Key(float, "0.01", "half-width of the uniform noise"),
    "time.T": Key(float, "2500", "final time"),
    "time.snapshots": Key(_float_list, "none", "comma-separated output times (default 0, T/4, T/2, 3T/4, T)"),
    "integrator.rtol": Key(float, "1e-6", "relative tolerance"),
    "integrator.atol": Key(float, "1e-8", "absolute tolerance"),
    "integrator.fixed_step": Key(_opt_float, "none", "constant step size (disables error control)"),
    "stationary.mu": Key(float, "1", "gain applied as S(mu V)"),
    "stationary.tol": Key(float, "1e-10", "residual tolerance"),
    "stationary.max_iter": Key(int, "100000", "iteration cap"),
    "homogeneous.wbar": Key(_opt_float, "none", "kernel integral; default computed from the kernel"),
    "homogeneous.V0": Key(float, "0", "initial value"),
    "homogeneous.samples": Key(int, "101", "output samples on [0, T]"),
    "bump.kappa": Key(float, "0.04", "threshold of the Heaviside rate"),
    "bump.omega": Key(_opt_float, "none", "pulse width; default solves N(omega) = alpha kappa"),
    "bump.root": Key(int, "0", "index of the root used when several exist"),
    "bump.omega_min": Key(float, "0.001", "lower end of the root scan"),
    "bump.omega_max": Key(float, "3", "upper end of the root scan"),
    "bump.samples": Key(int, "600", "samples of the root scan"),
    "bump.curve_points": Key(int, "200", "omega samples of the existence curve"),
    "bump.I0_values": Key(_float_list, "none", "input amplitudes swept by bump-curve (default input.I0)"),
    "bump.n_max": Key(int, "16", "highest angular mode of the stability spectrum"),
    "spectral.lambda_max": Key(float, "320", "spectral cutoff"),
    "spectral.nodes_per_panel": Key(int, "10", "Gauss-Legendre nodes per unit panel"),
    "spectral.tail_correction": Key(_bool, "true", "extrapolate the spectral cutoff"),
}


# ---------------------------------------------------------------------------
# Parsing


def parse_lines(lines, source: str) -> dict[str, str]:
    """Parse ``key = value`` lines into raw strings, checking key names."""
    out: dict[str, str] = {}
    for no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {line.strip()!r}")
        key, value = (p.strip() for p in text.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        out[key] = value
    return out


def preset_names() -> list[str]:
    root = resources.files("hypfield") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str) -> dict[str, str]:
    path = resources.files("hypfield") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_lines(path.read_text(encoding="utf-8").splitlines(), f"preset {name}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    raw: dict  # key -> text, fully materialized
    values: dict  # key -> parsed value

    def __getitem__(self, key):
        return self.values[key]


def parse_config(command: str, *, preset=None, config_file=None, overrides=()) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    raw = {k: v.default for k, v in SCHEMA.items()}
    if preset:
        raw.update(load_preset(preset))
    if config_file:
        try:
            text = Path(config_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_file}: {exc.strerror}") from None
        raw.update(parse_lines(text.splitlines(), str(config_file)))
    for k, item in enumerate(overrides, start=1):
        raw.update(parse_lines([item], f"--set #{k}"))
    values = {}
    for key, text in raw.items():
        try:
            values[key] = SCHEMA[key].parse(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return RunConfig(command, raw, values)


# ---------------------------------------------------------------------------
# Object construction (configuration errors surface here)


def build_kernel(cfg: RunConfig):
    family = cfg["kernel.family"]
    cls = kernels.FAMILIES[family]
    params = {}
    for name in cls.__dataclass_fields__:
        key = f"kernel.{name}"
        if cfg[key] is not None:
            params[name] = cfg[key]
    if family != "exponential":
        if cfg["kernel.truncated"]:
            raise ConfigError("kernel.truncated applies to the exponential family only")
        params.pop("truncated", None)
    return kernels.make_kernel(family, **params)


def build_rate(cfg: RunConfig):
    kind = cfg["rate.kind"]
    if kind == "sigmoid":
        return field.Sigmoid(cfg["rate.mu"])
    if kind == "shifted_sigmoid":
        return field.ShiftedSigmoid(cfg["rate.mu"])
    return field.Heaviside(cfg["rate.kappa"])


def build_input(cfg: RunConfig):
    kind = cfg["input.kind"]
    if kind == "zero":
        return field.ZeroInput()
    if kind == "gaussian":
        return field.GaussianBump(cfg["input.I0"], cfg["input.sigma"], cfg["input.convention"])
    return field.RotatingBump(
        cfg["input.I0"], cfg["input.sigma"], cfg["input.r0"], cfg["input.Omega0"], cfg["input.convention"]
    )


def build_grid(cfg: RunConfig):
    return field.build_grid(cfg["grid.a"], cfg["grid.N"], cfg["grid.M"])


def build_simulation(cfg: RunConfig) -> field.SimulationConfig:
    snaps = cfg["time.snapshots"] or None
    return field.SimulationConfig(
        grid=build_grid(cfg),
        kernel=build_kernel(cfg),
        rate=build_rate(cfg),
        alpha=cfg["model.alpha"],
        input=build_input(cfg),
        T=cfg["time.T"],
        snapshots=snaps,
        init=cfg["init.kind"],
        noise_amplitude=cfg["init.amplitude"],
        seed=cfg["seed"],
        integrator=field.IntegratorOptions(
            rtol=cfg["integrator.rtol"], atol=cfg["integrator.atol"], fixed_step=cfg["integrator.fixed_step"]
        ),
        max_nodes=cfg["grid.max_nodes"],
        angular_rule=cfg["grid.angular_rule"],
    )


def build_bump(cfg: RunConfig, I0: float | None = None) -> bumps.BumpConfig:
    grid = specfun.SpectralGrid(
        lambda_max=cfg["spectral.lambda_max"],
        nodes_per_panel=cfg["spectral.nodes_per_panel"],
        tail_correction=cfg["spectral.tail_correction"],
    )
    amp = cfg["input.I0"] if I0 is None else I0
    return bumps.BumpConfig.gaussian(
        cfg["model.alpha"],
        cfg["bump.kappa"],
        build_kernel(cfg),
        amp,
        cfg["input.sigma"],
        convention=cfg["input.convention"],
        spectral=grid,
    )


# ---------------------------------------------------------------------------
# Output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_meta(path: Path, cfg: RunConfig, info: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# hypfield {cfg.command}\n")
        for k, v in info.items():
            fh.write(f"# {k}: {fmt(v) if not isinstance(v, str) else v}\n")
        for key in SCHEMA:
            fh.write(f"{key} = {cfg.raw[key]}\n")


def trajectory_rows(grid: field.FieldGrid, times, values):
    r = grid.r
    th = grid.theta
    N1, M1 = grid.shape
    for t, V in zip(times, values):
        V = V.reshape(grid.shape)
        for i in range(N1):
            for j in range(M1):
                yield (t, i + 1, j + 1, r[i], th[j], V[i, j])


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg: RunConfig):
    sim = build_simulation(cfg)
    tr = field.simulate(sim)
    info = {
        "grid_nodes": sim.grid.n_nodes,
        "steps_accepted": tr.stats.accepted,
        "steps_rejected": tr.stats.rejected,
        "wall_time_s": f"{tr.wall_time:.3f}",
    }
    return ("t", "i", "j", "r", "theta", "V"), trajectory_rows(sim.grid, tr.times, tr.values), info


def cmd_stationary(cfg: RunConfig):
    sim = build_simulation(cfg)
    kmat = field.assemble_kernel_matrix(sim.grid, sim.kernel, max_nodes=sim.max_nodes, angular_rule=sim.angular_rule)
    inp = sim.input(sim.grid.node_z(), 0.0)
    res = stationary.picard_stationary(
        kmat, sim.rate, cfg["stationary.mu"], sim.alpha, inp, tol=cfg["stationary.tol"], max_iter=cfg["stationary.max_iter"]
    )
    info = {
        "iterations": res.iterations,
        "residual": res.residual,
        "contraction_margin": res.certificate.margin,
        "certified": res.certified,
        "observed_rate": res.rate,
    }
    return ("t", "i", "j", "r", "theta", "V"), trajectory_rows(sim.grid, [math.inf], [res.values]), info


def cmd_homogeneous(cfg: RunConfig):
    rate = build_rate(cfg)
    wbar = cfg["homogeneous.wbar"]
    if wbar is None:
        k = build_kernel(cfg)
        if isinstance(k, kernels.MexicanHat3D):
            wbar = kernels.mexican_hat_wbar(k.sigma1, k.sigma2, k.A)
        else:
            wbar = k.integral
    I0 = 0.0 if cfg["input.kind"] == "zero" else cfg["input.I0"]
    if cfg["input.kind"] == "rotating":
        raise ConfigError("homogeneous runs take a constant input (input.kind = zero or gaussian)")
    times = np.linspace(0.0, cfg["time.T"], cfg["homogeneous.samples"])
    tr = stationary.solve_homogeneous(
        cfg["model.alpha"], wbar, rate, I0, cfg["homogeneous.V0"], cfg["time.T"], mu=cfg["stationary.mu"], t_eval=times
    )
    return ("t", "V"), zip(tr.times, tr.values), {"wbar": wbar, "input": I0}


def _pulse_width(cfg: RunConfig, bc: bumps.BumpConfig) -> float:
    if cfg["bump.omega"] is not None:
        return cfg["bump.omega"]
    roots = bumps.solve_pulse_width(bc, (cfg["bump.omega_min"], cfg["bump.omega_max"]), samples=cfg["bump.samples"])
    k = cfg["bump.root"]
    if not 0 <= k < len(roots):
        raise ConfigError(f"bump.root={k} but only {len(roots)} root(s) exist: {roots}")
    return roots[k]


def cmd_bump_curve(cfg: RunConfig):
    amps = cfg["bump.I0_values"] or (cfg["input.I0"],)
    omegas = np.linspace(cfg["bump.omega_min"], cfg["bump.omega_max"], cfg["bump.curve_points"])
    tables = []
    for amp in amps:
        curve = bumps.existence_curve(build_bump(cfg, amp), omegas)
        tables.append((amp, list(zip(curve.omega, curve.N, curve.M, curve.I))))
    return ("omega", "N", "M", "I"), tables, {"I0_values": ",".join(fmt(a) for a in amps)}


def cmd_bump_profile(cfg: RunConfig):
    bc = build_bump(cfg)
    omega = _pulse_width(cfg, bc)
    sol = bumps.bump_profile(bc, omega)
    info = {"omega": omega, "Mr": sol.Mr, "W0_omega": sol.W0_omega, "D_omega": sol.D_omega}
    return ("r", "V"), zip(sol.r, sol.V), info


def cmd_bump_stability(cfg: RunConfig):
    bc = build_bump(cfg)
    omega = _pulse_width(cfg, bc)
    sol = bumps.bump_profile(bc, omega)
    spec = bumps.stability_spectrum(bc, sol, cfg["bump.n_max"])
    verdict = bumps.stability_check(bc, sol)
    info = {
        "omega": omega,
        "verdict": verdict.verdict,
        "margin": verdict.margin,
        "n_prime": verdict.n_prime,
        "n_prime_fd": verdict.n_prime_fd,
        "essential_spectrum": spec.essential,
    }
    print(f"verdict: {verdict.verdict} omega={fmt(omega)} margin={fmt(verdict.margin)}")
    return ("n", "beta_n"), zip(spec.n, spec.beta), info


def cmd_verify(cfg: RunConfig):
    rows = verify.run_suite()
    width = max(len(r.check) for r in rows)
    for r in rows:
        print(f"{r.check:<{width}}  rel_err={r.rel_err:.2e}  tol={r.tol:.0e}  {'PASS' if r.passed else 'FAIL'}")
    failed = [r.check for r in rows if not r.passed]
    table = [(r.check, r.main_value, r.oracle_value, r.rel_err, r.tol, r.passed) for r in rows]
    return ("check", "main_value", "oracle_value", "rel_err", "tol", "pass"), table, {"failed": ",".join(failed) or "none"}


HANDLERS = {
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "homogeneous": cmd_homogeneous,
    "bump-curve": cmd_bump_curve,
    "bump-profile": cmd_bump_profile,
    "bump-stability": cmd_bump_stability,
    "verify": cmd_verify,
}

#: exceptions raised while building model objects from a configuration
_CONFIG_ERRORS = (ConfigError, kernels.KernelAdmissibilityError, ValueError, TypeError)
#: exceptions raised by the numerics
_NUMERIC_ERRORS = (ArithmeticError, RuntimeError, field.FieldError, stationary.PicardDivergenceError)


@contextlib.contextmanager
def _thread_limit(n: int):
    if n <= 0:
        env = os.environ.get("HYPFIELD_THREADS", "").strip()
        n = int(env) if env.isdigit() else 0
    if n <= 0:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


def run(cfg: RunConfig, out_dir: Path) -> int:
    """Execute ``cfg`` and write its artifacts into ``out_dir``; return the exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    name = cfg["output.name"] or cfg.command
    start = time.perf_counter()
    with _thread_limit(cfg["threads"]):
        header, rows, info = HANDLERS[cfg.command](cfg)
        if cfg.command == "bump-curve":
            tables = rows
            for amp, table in tables:
                stem = name if len(tables) == 1 else f"{name}-I0_{float(amp)!r}"
                write_csv(out_dir / f"{stem}.csv", header, table)
        else:
            write_csv(out_dir / f"{name}.csv", header, rows)
    info = dict(info)
    info.setdefault("wall_time_s", f"{time.perf_counter() - start:.3f}")
    write_meta(out_dir / f"{name}.meta", cfg, info)
    if cfg.command == "verify" and info["failed"] != "none":
        print(f"error: oracle checks failed: {info['failed']}", file=sys.stderr)
        return 1
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypfield", description="Neural fields on the Poincaré disk.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--preset", help=f"named parameter set ({', '.join(preset_names())})")
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = parse_config(args.command, preset=args.preset, config_file=args.config, overrides=args.overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, Path(args.out))
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except _CONFIG_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
