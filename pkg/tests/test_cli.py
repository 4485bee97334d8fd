import json

import pytest

from mlmcfv.cli import main, parse_levels, resolve_config, build_parser
from mlmcfv.errors import ConfigError


def _run(*args):
    return main(["run", *args])


def test_parse_levels_forms():
    assert parse_levels("3") == (3,)
    assert parse_levels("1..4") == (1, 2, 3, 4)
    assert parse_levels("1,2,5") == (1, 2, 5)
    with pytest.raises(ConfigError):
        parse_levels("4..1")
    with pytest.raises(ConfigError):
        parse_levels("a..b")


def test_defaults_resolve():
    args = build_parser().parse_args(["run", "--mode", "table"])
    config = resolve_config(args)
    assert config.levels == (1, 2, 3, 4, 5, 6)
    assert config.experiment == "exp1"
    assert config.lam == 0.2 and config.t_end == 0.2


def test_single_sample_writes_profile(tmp_path):
    rc = _run(
        "--experiment", "exp1", "--mode", "single_sample",
        "--xi", "-0.3", "--dx-exp", "5", "-o", str(tmp_path),
    )
    assert rc == 0
    csv = tmp_path / "exp1_single_sample_-0.3.csv"
    assert csv.exists()
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "x_center,value"
    assert len(lines) == 1 + 64
    man = json.loads((tmp_path / "exp1_single_sample_manifest.json").read_text())
    assert man["config"]["dx_exp"] == 5
    assert man["cell_updates"] == 64 * 32


def test_single_sample_xi_dimension_checked(tmp_path):
    rc = _run(
        "--experiment", "exp2", "--mode", "single_sample",
        "--xi", "-0.3", "-o", str(tmp_path),
    )
    assert rc == 1


def test_mc_mode(tmp_path):
    rc = _run(
        "--mode", "mc", "--samples", "5", "--dx-exp", "4",
        "--seed", "3", "-o", str(tmp_path),
    )
    assert rc == 0
    lines = (tmp_path / "exp1_mc_mean_std.csv").read_text().strip().splitlines()
    assert lines[0] == "x_center,mean,std"
    assert len(lines) == 1 + 1024


def test_mlmc_mode_and_reproducibility(tmp_path):
    for sub, workers in (("a", "1"), ("b", "4")):
        rc = _run(
            "--mode", "mlmc", "--levels", "2", "--dx0-exp", "4",
            "--workers", workers, "-o", str(tmp_path / sub),
        )
        assert rc == 0
    a = (tmp_path / "a" / "exp1_mlmc_L2_mean_std.csv").read_bytes()
    b = (tmp_path / "b" / "exp1_mlmc_L2_mean_std.csv").read_bytes()
    assert a == b


def test_reference_mode_uses_cache(tmp_path):
    args = (
        "--mode", "reference", "--experiment", "exp2", "--nodes", "3",
        "--dx-star-exp", "5", "--cache-dir", str(tmp_path / "cache"),
        "-o", str(tmp_path),
    )
    assert _run(*args) == 0
    assert len(list((tmp_path / "cache").glob("reference_*.npz"))) == 1
    man = json.loads((tmp_path / "exp2_reference_manifest.json").read_text())
    assert man["reference"]["nodes"] == [3, 3]
    assert _run(*args) == 0  # second run served from cache


def test_table_mode(tmp_path):
    rc = _run(
        "--mode", "table", "--levels", "1..2", "--replicas", "2",
        "--nodes", "4", "--dx-star-exp", "6",
        "--cache-dir", str(tmp_path / "cache"), "-o", str(tmp_path),
    )
    assert rc == 0
    lines = (tmp_path / "exp1_table.csv").read_text().strip().splitlines()
    assert lines[0] == "L,dxL,rms_percent,runtime_s,cell_updates"
    assert len(lines) == 3
    man = json.loads((tmp_path / "exp1_table_manifest.json").read_text())
    assert "ooc_dx" in man["fits"]
    assert man["samples_per_level"]["1"] == [59, 13]


def test_config_file_with_cli_override(tmp_path):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text(
        "[run]\nmode = mc\nsamples = 4\nseed = 9\n\n"
        "[solver]\ndx_exp = 4\nlam = 0.2\n"
    )
    rc = _run("--config", str(cfgfile), "--samples", "6", "-o", str(tmp_path))
    assert rc == 0
    man = json.loads((tmp_path / "exp1_mc_manifest.json").read_text())
    assert man["config"]["samples"] == 6  # CLI wins
    assert man["config"]["master_seed"] == 9  # file value kept


def test_config_file_rejects_unknown_keys(tmp_path):
    cfgfile = tmp_path / "bad.ini"
    cfgfile.write_text("[run]\nbogus = 1\n")
    assert _run("--config", str(cfgfile), "-o", str(tmp_path)) == 1


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MLMCFV_OUTPUT_DIR", str(tmp_path / "from_env"))
    rc = _run("--mode", "single_sample", "--xi", "0.1", "--dx-exp", "4")
    assert rc == 0
    assert (tmp_path / "from_env" / "exp1_single_sample_0.1.csv").exists()


def test_exit_code_config_error(tmp_path):
    assert _run("--mode", "nonsense", "-o", str(tmp_path)) == 1
    assert _run("--levels", "x", "-o", str(tmp_path)) == 1


def test_exit_code_numerical_error(tmp_path):
    # lam = 0.6 violates the CFL bound for the two-phase flux
    rc = _run(
        "--mode", "single_sample", "--xi", "0.0", "--dx-exp", "4",
        "--lam", "0.6", "-o", str(tmp_path),
    )
    assert rc == 2


def test_byte_identical_reruns(tmp_path):
    outs = []
    for sub in ("r1", "r2"):
        rc = _run(
            "--mode", "mc", "--samples", "8", "--dx-exp", "5",
            "--seed", "21", "-o", str(tmp_path / sub),
        )
        assert rc == 0
        outs.append((tmp_path / sub / "exp1_mc_mean_std.csv").read_bytes())
    assert outs[0] == outs[1]
