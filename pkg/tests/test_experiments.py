import math

import numpy as np
import pytest
from click.testing import CliRunner

from mzcg.cli import main
from mzcg.config import ConfigError, resolve
from mzcg.csvio import format_value, read_csv, write_csv
from mzcg.experiments import time_to_half
from mzcg.kernel import fit_decay_rate


def run_cli(args):
    return CliRunner().invoke(main, args)


class TestConfigResolution:
    def test_defaults_are_concrete(self):
        cfg = resolve("kernel")
        assert cfg["x0"] == pytest.approx(math.pi / 10.0)
        assert cfg["dt"] == pytest.approx(1e-4 / 20.0)
        assert cfg["experiment"] == "kernel"

    def test_desk_scale_overlay(self):
        cfg = resolve("mean-trajectory", desk_scale=True)
        assert cfg["dt"] == 1e-4
        assert cfg["n_samples"] == 200
        assert cfg["desk_scale"] is True

    def test_full_scale_defaults(self):
        mt = resolve("mean-trajectory")
        assert mt["dt"] == 1e-5 and mt["t_final"] == 80.0
        ens = resolve("ensemble")
        assert ens["beta_list"] == (1.0, 10.0, 100.0)
        assert ens["n_samples"] == 500
        assert ens["t_final"] == 320.0 and ens["dt"] == 1e-5
        assert ens["x0"] == pytest.approx(math.pi / 20.0)
        assert resolve("kernel-matrix")["n_samples"] == 2000
        assert resolve("kernel")["n_samples"] == 2000

    def test_file_overrides_defaults_and_set_overrides_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("omega = 4.0  # wavenumber\ntau=0.2\n\n# comment line\n")
        cfg = resolve("kernel", config_path=path, set_pairs=("omega=6.5",))
        assert cfg["tau"] == 0.2
        assert cfg["omega"] == 6.5
        assert cfg["x0"] == pytest.approx(math.pi / 6.5)

    def test_seed_flag_wins(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("master_seed=5\n")
        cfg = resolve("kernel", config_path=path, set_pairs=("master_seed=6",), seed=7)
        assert cfg["master_seed"] == 7

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            resolve("kernel", set_pairs=("gamma=1.0",))

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            resolve("kernel", set_pairs=("n_samples=many",))

    def test_invalid_model_kind_rejected(self):
        with pytest.raises(ConfigError, match="model kind"):
            resolve("mean-trajectory", set_pairs=("models=markov",))

    def test_positivity_enforced(self):
        with pytest.raises(ConfigError):
            resolve("kernel", set_pairs=("lambda=-2",))

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            resolve("kernel", config_path=tmp_path / "absent.cfg")


class TestCsvIO:
    def test_float_roundtrip_is_exact(self, tmp_path):
        values = np.array([math.pi, 1.0 / 3.0, 1e-300, -0.0, 8020.0])
        path = tmp_path / "t.csv"
        write_csv(path, [("a", 1)], ["v"], [values])
        _, header, data = read_csv(path)
        assert header == ["v"]
        assert np.array_equal(data[:, 0], values)

    def test_padding_becomes_nan(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, [], ["a", "b"], [[1.0, 2.0, 3.0], [4.0]])
        _, _, data = read_csv(path)
        assert np.isnan(data[1:, 1]).all()
        assert data[0, 1] == 4.0

    def test_format_inf(self):
        assert format_value(math.inf) == "inf"
        assert format_value(-math.inf) == "-inf"
        assert format_value(True) == "true"


class TestLandscape:
    def test_grid_and_origin_row(self, tmp_path):
        out = tmp_path / "land.csv"
        res = run_cli(["landscape", "--out", str(out), "--set", "grid_points=21"])
        assert res.exit_code == 0
        meta, header, data = read_csv(out)
        assert header == ["x", "y", "V"]
        assert data.shape == (21 * 21, 3)
        origin = data[(data[:, 0] == 0.0) & (data[:, 1] == 0.0)]
        assert origin.shape[0] == 1 and origin[0, 2] == 0.0
        assert meta["grid_points"] == "21"
        assert "threads" not in meta and "out" not in meta

    def test_alternate_parameter_case(self, tmp_path):
        out = tmp_path / "land.csv"
        res = run_cli(["landscape", "--out", str(out), "--set", "grid_points=5",
                       "--set", "omega=4", "--set", "tau=0.2"])
        assert res.exit_code == 0
        meta, _, _ = read_csv(out)
        assert meta["omega"] == "4" and meta["tau"] == "0.20000000000000001"


class TestKernelExperiment:
    def test_columns_and_recomputable_summary(self, tmp_path):
        out = tmp_path / "k.csv"
        res = run_cli(["kernel", "--out", str(out), "--set", "n_samples=200",
                       "--set", "n_lags=24"])
        assert res.exit_code == 0
        meta, header, data = read_csv(out)
        assert header == ["s", "empirical", "stderr", "approx"]
        # approx column at s=0 equals the closed-form amplitude 8000
        assert data[0, 3] == pytest.approx(8000.0)
        # the summary is recomputable from the body alone
        rate = 20.0 * (1.0 + 4.0 * 100.0)
        refit = fit_decay_rate(data[:, 0], data[:, 1], s_max=2.0 / rate)
        assert refit == pytest.approx(float(meta["fitted_decay_rate"]), rel=1e-12)
        assert float(meta["theoretical_decay_rate"]) == -rate


class TestKernelMatrixExperiment:
    def test_two_conditioning_files(self, tmp_path):
        out = tmp_path / "m.csv"
        res = run_cli(["kernel-matrix", "--out", str(out), "--set", "n_samples=128",
                       "--set", "n_lags=12"])
        assert res.exit_code == 0
        for label in ("cos1", "cos0"):
            meta, header, data = read_csv(tmp_path / f"m_{label}.csv")
            assert header == ["s", "m11", "m12", "m21", "m22", "log_abs_m12"]
            with np.errstate(divide="ignore"):
                expected = np.log(np.abs(data[:, 2]))
            assert np.allclose(data[:, 5], expected, equal_nan=True)


class TestMeanTrajectoryExperiment:
    def test_blowup_truncation_and_exit_code(self, tmp_path):
        out = tmp_path / "mt.csv"
        res = run_cli([
            "mean-trajectory", "--out", str(out),
            "--set", "dt=0.001", "--set", "t_final=0.5",
            "--set", "n_samples=8", "--set", "record_stride=1",
        ])
        assert res.exit_code == 3  # naive-memory diverges and is truncated
        meta, header, data = read_csv(out)
        assert header[:3] == ["t", "full_mean", "full_stderr"]
        assert "naive-memory" in header
        assert "blowup_naive-memory_step" in meta
        naive = data[:, header.index("naive-memory")]
        assert np.isnan(naive[-1])  # truncated tail is blank
        # memory-free column relaxes like exp(-mu t): time-to-half ~ ln2/mu
        mf = data[:, header.index("memory-free")]
        assert time_to_half(data[:, 0], mf) == pytest.approx(math.log(2.0) / 2.0, rel=0.02)

    def test_without_naive_model_exits_clean(self, tmp_path):
        out = tmp_path / "mt.csv"
        res = run_cli([
            "mean-trajectory", "--out", str(out),
            "--set", "dt=0.001", "--set", "t_final=0.2", "--set", "n_samples=4",
            "--set", "models=memory-corrected,memory-free",
        ])
        assert res.exit_code == 0
        meta, header, _ = read_csv(out)
        assert header == ["t", "full_mean", "full_stderr", "memory-corrected", "memory-free"]
        assert not any(k.startswith("blowup") for k in meta)


class TestEnsembleExperiment:
    def test_per_beta_files_and_columns(self, tmp_path):
        out = tmp_path / "ens.csv"
        res = run_cli([
            "ensemble", "--out", str(out),
            "--set", "dt=0.001", "--set", "t_final=0.2",
            "--set", "n_samples=4", "--set", "beta_list=1,10",
        ])
        assert res.exit_code == 0
        for beta in ("1", "10"):
            meta, header, data = read_csv(tmp_path / f"ens_beta{beta}.csv")
            assert header == ["t", "full_mean", "full_stderr", "approx_mean",
                              "approx_stderr", "nomem_mean", "nomem_stderr"]
            assert meta["beta"] == beta
            assert data[0, 1] == data[0, 3] == data[0, 5]  # common start


class TestStationaryExperiment:
    def test_histogram_normalisation(self, tmp_path):
        out = tmp_path / "st.csv"
        res = run_cli([
            "stationary", "--out", str(out),
            "--set", "n_samples=16", "--set", "t_main=0.3", "--set", "t_resid=0.05",
        ])
        assert res.exit_code == 0
        meta, header, data = read_csv(out)
        assert header == ["bin_center", "x_density", "gaussian_density"]
        width = data[1, 0] - data[0, 0]
        assert (data[:, 1] * width).sum() == pytest.approx(1.0, abs=0.02)
        assert float(meta["x_variance_target"]) == pytest.approx(0.5)


class TestCLIContract:
    def test_kernel_rerun_byte_identical(self, tmp_path):
        args = ["kernel", "--set", "n_samples=64", "--set", "n_lags=8", "--seed", "9"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(args + ["--out", str(a)]).exit_code == 0
        assert run_cli(args + ["--out", str(b)]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_key_is_config_error(self, tmp_path):
        res = run_cli(["kernel", "--out", str(tmp_path / "k.csv"), "--set", "nope=1"])
        assert res.exit_code == 2

    def test_bad_config_file_is_config_error(self, tmp_path):
        res = run_cli(["kernel", "--config", str(tmp_path / "absent.cfg")])
        assert res.exit_code == 2

    def test_reruns_are_byte_identical(self, tmp_path):
        args = ["mean-trajectory", "--set", "dt=0.001", "--set", "t_final=0.05",
                "--set", "n_samples=600", "--set", "models=memory-free", "--seed", "3"]
        a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert run_cli(args + ["--out", str(a), "--threads", "1"]).exit_code == 0
        assert run_cli(args + ["--out", str(b), "--threads", "1"]).exit_code == 0
        assert run_cli(args + ["--out", str(c), "--threads", "3"]).exit_code == 0
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()

    def test_thermostatted_threads_byte_identical(self, tmp_path):
        args = ["ensemble", "--set", "dt=0.001", "--set", "t_final=0.05",
                "--set", "n_samples=300", "--set", "beta_list=1"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(args + ["--out", str(a), "--threads", "1"]).exit_code == 0
        assert run_cli(args + ["--out", str(b), "--threads", "4"]).exit_code == 0
        assert (tmp_path / "a_beta1.csv").read_bytes() == (tmp_path / "b_beta1.csv").read_bytes()
