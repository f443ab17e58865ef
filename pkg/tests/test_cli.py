import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hypfield import cli, field, kernels

SMALL = ["grid.N=4", "grid.M=6", "time.T=2", "kernel.family=gabor", "kernel.b=0.2"]


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def sets(items):
    out = []
    for item in items:
        out += ["--set", item]
    return out


class TestParsing:
    def test_defaults_cover_schema(self):
        cfg = cli.parse_config("simulate")
        assert set(cfg.values) == set(cli.SCHEMA)
        assert cfg["grid.N"] == 40
        assert cfg["time.snapshots"] == ()

    def test_comments_and_blank_lines(self):
        raw = cli.parse_lines(["# header", "", "grid.N = 8  # radial", "kernel.family=dog"], "x")
        assert raw == {"grid.N": "8", "kernel.family": "dog"}

    def test_unknown_key_reports_line(self):
        with pytest.raises(cli.ConfigError, match=r"x:2: unknown key 'grid.Q'"):
            cli.parse_lines(["grid.N = 8", "grid.Q = 1"], "x")

    def test_missing_equals(self):
        with pytest.raises(cli.ConfigError, match="x:1"):
            cli.parse_lines(["grid.N 8"], "x")

    def test_bad_value(self):
        with pytest.raises(cli.ConfigError, match="grid.N"):
            cli.parse_config("simulate", overrides=["grid.N=many"])

    def test_bad_choice(self):
        with pytest.raises(cli.ConfigError, match="expected one of"):
            cli.parse_config("simulate", overrides=["rate.kind=relu"])

    def test_precedence(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("grid.N = 12\nmodel.alpha = 0.5\n")
        cfg = cli.parse_config("simulate", preset="fig5d", config_file=f, overrides=["grid.N=16"])
        assert cfg["grid.N"] == 16
        assert cfg["model.alpha"] == 0.5
        assert cfg["kernel.family"] == "gabor"

    def test_unknown_preset(self):
        with pytest.raises(cli.ConfigError, match="available"):
            cli.parse_config("simulate", preset="fig99")

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(cli.ConfigError, match="cannot read"):
            cli.parse_config("simulate", config_file=tmp_path / "absent.cfg")

    @pytest.mark.parametrize("text,value", [("true", True), ("No", False), ("1", True)])
    def test_bool(self, text, value):
        assert cli._bool(text) is value

    def test_float_list(self):
        assert cli._float_list("0, 0.02,0.04") == (0.0, 0.02, 0.04)


class TestPresets:
    @pytest.mark.parametrize("name", cli.preset_names())
    def test_every_preset_builds(self, name):
        cfg = cli.parse_config("simulate", preset=name)
        kernel = cli.build_kernel(cfg)
        assert isinstance(kernel, kernels.RadialKernel)
        cli.build_rate(cfg)
        cli.build_input(cfg)

    def test_expected_presets(self):
        names = set(cli.preset_names())
        assert {"fig2", "fig3a", "fig4", "fig5a", "fig5d", "fig6a", "fig8a"} <= names

    def test_gabor_presets_widths(self):
        widths = [cli.build_kernel(cli.parse_config("simulate", preset=f"fig5{c}")).b for c in "abcdef"]
        assert widths == [0.4, 0.35, 0.3, 0.2, 0.1, 0.07]

    def test_wide_exponential_needs_opt_in(self):
        cfg = cli.parse_config("simulate", preset="fig3a", overrides=["kernel.truncated=false"])
        with pytest.raises(kernels.KernelAdmissibilityError):
            cli.build_kernel(cfg)

    def test_truncated_only_for_exponential(self):
        cfg = cli.parse_config("simulate", overrides=["kernel.family=gabor", "kernel.truncated=true"])
        with pytest.raises(cli.ConfigError):
            cli.build_kernel(cfg)


class TestFormatting:
    @pytest.mark.parametrize("value,text", [(0.1, "0.10000000000000001"), (3, "3"), (True, "true"), (math.inf, "inf"), ("x", "x")])
    def test_fmt(self, value, text):
        assert cli.fmt(value) == text

    def test_fmt_roundtrip(self):
        x = 1 / 3
        assert float(cli.fmt(x)) == x


class TestCommands:
    def test_simulate(self, tmp_path, capsys):
        assert run(tmp_path, "simulate", *sets(SMALL + ["init.kind=noise", "seed=2"])) == 0
        rows = read_csv(tmp_path / "simulate.csv")
        assert rows[0] == ["t", "i", "j", "r", "theta", "V"]
        assert len(rows) == 1 + 5 * 5 * 7
        first = rows[1]
        assert first[1:3] == ["1", "1"]
        meta = (tmp_path / "simulate.meta").read_text()
        assert "seed = 2" in meta

    def test_meta_reproduces_run(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a, "simulate", *sets(SMALL + ["init.kind=noise", "seed=5"])) == 0
        assert run(b, "simulate", "--config", str(a / "simulate.meta")) == 0
        assert (a / "simulate.csv").read_text() == (b / "simulate.csv").read_text()

    def test_stationary(self, tmp_path):
        args = SMALL + ["rate.kind=shifted_sigmoid", "rate.mu=1", "stationary.mu=0.2", "model.alpha=1", "input.kind=gaussian", "output.name=st"]
        assert run(tmp_path, "stationary", *sets(args)) == 0
        rows = read_csv(tmp_path / "st.csv")
        assert rows[1][0] == "inf"
        assert "# certified: true" in (tmp_path / "st.meta").read_text()

    def test_homogeneous_mexican_hat(self, tmp_path):
        args = ["kernel.family=mexican_hat", "kernel.b=none", "kernel.sigma1=0.1", "kernel.sigma2=0.2", "kernel.A=1",
                "rate.mu=1", "input.kind=gaussian", "input.I0=0.05", "time.T=500"]
        assert run(tmp_path, "homogeneous", *sets(args)) == 0
        rows = read_csv(tmp_path / "homogeneous.csv")
        assert_allclose(float(rows[-1][1]), -0.15669074411623382, rtol=1e-8)

    def test_bump_curve_one_file_per_amplitude(self, tmp_path):
        args = ["bump.I0_values=0,0.04", "bump.curve_points=3", "bump.omega_min=0.1", "bump.omega_max=0.3",
                "model.alpha=1"]
        assert run(tmp_path, "bump-curve", *sets(args)) == 0
        assert sorted(p.name for p in tmp_path.glob("*.csv")) == ["bump-curve-I0_0.0.csv", "bump-curve-I0_0.04.csv"]
        rows = read_csv(tmp_path / "bump-curve-I0_0.0.csv")
        assert rows[0] == ["omega", "N", "M", "I"]
        assert all(float(r[3]) == 0.0 for r in rows[1:])

    def test_bump_stability_prints_verdict(self, tmp_path, capsys):
        args = ["bump.omega=0.17793928819736993", "model.alpha=1", "input.I0=0.04", "input.convention=two_sigma_sq"]
        assert run(tmp_path, "bump-stability", *sets(args)) == 0
        out = capsys.readouterr().out
        assert out.startswith("verdict: unstable")
        assert "# verdict: unstable" in (tmp_path / "bump-stability.meta").read_text()

    def test_no_pulse_is_numeric_failure(self, tmp_path, capsys):
        args = ["bump.kappa=5", "bump.samples=10", "bump.omega_max=0.5"]
        assert run(tmp_path, "bump-profile", *sets(args)) == 1
        assert "NoPulseError" in capsys.readouterr().err

    def test_config_errors_exit_2(self, tmp_path, capsys):
        assert run(tmp_path, "simulate", "--set", "kernel.b=0.9") == 2
        assert run(tmp_path, "simulate", "--set", "grid.Z=1") == 2
        err = capsys.readouterr().err
        assert err.count("error:") == 2

    def test_bad_command(self, capsys):
        assert cli.main(["dance"]) == 2

    def test_thread_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HYPFIELD_THREADS", "1")
        assert run(tmp_path, "simulate", *sets(SMALL)) == 0


class TestBuilders:
    def test_simulation_config(self):
        cfg = cli.parse_config("simulate", preset="fig4")
        sim = cli.build_simulation(cfg)
        assert isinstance(sim.input, field.RotatingBump)
        assert sim.input.r0 == 0.4 and sim.input.Omega0 == 0.01
        assert_allclose(sim.snapshot_times(), [100, 150, 200, 250])

    def test_bump_config(self):
        cfg = cli.parse_config("bump-profile", preset="fig6a")
        bc = cli.build_bump(cfg)
        assert bc.input.convention == "two_sigma_sq"
        assert (bc.alpha, bc.kappa, bc.input.I0, bc.input.sigma) == (1.0, 0.04, 0.04, 0.05)
        assert bc.kernel == kernels.Exponential(0.2)

    def test_trajectory_rows(self):
        g = field.build_grid(0.5, 2, 4)
        rows = list(cli.trajectory_rows(g, [0.0], [np.arange(g.n_nodes, dtype=float)]))
        assert rows[-1] == (0.0, 3, 5, 0.5, 2 * math.pi, g.n_nodes - 1)
