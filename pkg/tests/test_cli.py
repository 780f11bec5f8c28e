import io
import json
import math
import os
import shutil
from tempfile import mkdtemp

import pandas as pd
import pytest

from rcbound import __version__
from rcbound.cli import EXIT_ERROR, EXIT_OK, run
from rcbound.ensemble import exact_ensemble_error
from rcbound.exponents import er
from rcbound.utils.parsing.channel import PresetParser
from tests._channels import uniform

LAW = "tests/data/laws/lattice.json"


@pytest.fixture
def work_dir() -> str:
    path = mkdtemp()
    yield path
    shutil.rmtree(path)


def _stdout_table(capsys: pytest.CaptureFixture) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(capsys.readouterr().out))


def test_analyze_reports_singular_erasure_channel(capsys: pytest.CaptureFixture) -> None:
    assert run(["analyze", "--channel", "bec:0.5"]) == EXIT_OK
    report = dict(_stdout_table(capsys).itertuples(index=False))
    assert report["verdict_uniform"] == "singular"
    assert float(report["capacity"]) == pytest.approx(0.5 * math.log(2.0), abs=1e-9)
    assert float(report["r_cr_uniform"]) == pytest.approx(math.log(2.0) / 3, abs=1e-12)


def test_exponents_table(capsys: pytest.CaptureFixture) -> None:
    assert run(["exponents", "--channel", "bsc:0.1", "--rates", "0.1,0.2,0.32"]) == EXIT_OK
    table = _stdout_table(capsys)
    assert list(table.columns) == ["rate", "E_r", "rho_star_R", "rho_bar_star_R", "E_SP", "singular_at_rate"]
    assert table["E_r"].iloc[2] == pytest.approx(er(0.32, PresetParser.parse("bsc:0.1"))[0], abs=1e-9)
    assert (table["E_SP"] >= table["E_r"] - 1e-9).all()
    assert not table["singular_at_rate"].any()
    # subgradients are reported above the critical rate of the channel only
    assert table["rho_star_R"].isna().tolist() == [True, False, False]


def test_verify_passes_on_symmetric_channel(capsys: pytest.CaptureFixture) -> None:
    assert run(["verify", "--channel", "bsc:0.1", "--rate", "0.3"]) == EXIT_OK
    table = _stdout_table(capsys)
    assert table["residual"].max() <= 1e-8


def test_bound_with_sidecar(capsys: pytest.CaptureFixture, work_dir: str) -> None:
    sidecar = os.path.join(work_dir, "constants.json")
    assert run(["bound", "--channel", "bec:0.5", "--rate", "0.3", "--n", "4:40:4", "--sidecar", sidecar]) == EXIT_OK
    table = _stdout_table(capsys)
    assert table["N"].tolist() == list(range(4, 41, 4))
    assert (table["prefactor_power"] == -0.5).all()
    channel = PresetParser.parse("bec:0.5")
    exact = exact_ensemble_error(channel, uniform(channel), 40, 0.3).p_e_avg
    assert exact <= table["bound"].iloc[-1]

    with open(sidecar, encoding="utf-8") as f:
        constants = json.load(f)
    assert constants["prefactor_power"] == -0.5
    assert constants["c1"] > 0
    assert constants["c2"] > 0


def test_bound_over_several_rates_prefixes_constants(capsys: pytest.CaptureFixture, work_dir: str) -> None:
    sidecar = os.path.join(work_dir, "constants.json")
    assert run(["bound", "--channel", "bec:0.5", "--rate", "0.15,0.3", "--n", "10", "--sidecar", sidecar]) == EXIT_OK
    table = _stdout_table(capsys)
    # the lower rate is below R_cr, where the pre-factor power vanishes
    assert table["prefactor_power"].tolist() == [0.0, -0.5]
    with open(sidecar, encoding="utf-8") as f:
        constants = json.load(f)
    assert "0.29999999999999999.c1" in constants
    assert "0.14999999999999999.eo_1" in constants


def test_bound_in_bits(capsys: pytest.CaptureFixture) -> None:
    rate_in_bits = 0.45
    assert run(["bound", "--channel", "bec:0.5", "--rate", str(rate_in_bits), "--bits", "--n", "8"]) == EXIT_OK
    table = _stdout_table(capsys)
    assert table["rate"].iloc[0] == pytest.approx(rate_in_bits * math.log(2.0))


def test_bound_hdf5_output(work_dir: str) -> None:
    csv_path = os.path.join(work_dir, "bound.csv")
    hdf5_path = os.path.join(work_dir, "tables.hdf5")
    assert run(["bound", "--channel", "bec:0.5", "--rate", "0.3", "--n", "4:12:4", "-o", csv_path, "--hdf5", hdf5_path]) == EXIT_OK
    pd.testing.assert_frame_equal(pd.read_hdf(hdf5_path, key="bound"), pd.read_csv(csv_path), check_exact=True)


def test_repeated_runs_are_byte_identical(work_dir: str) -> None:
    outputs = []
    for i in range(2):
        path = os.path.join(work_dir, f"run{i}.csv")
        assert run(["bound", "--channel", "bsc:0.1", "--rate", "0.32", "--n", "100:500:100", "-o", path]) == EXIT_OK
        with open(path, "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]


def test_concentration_bound_dominates_exact_tail(capsys: pytest.CaptureFixture, work_dir: str) -> None:
    sidecar = os.path.join(work_dir, "constants.json")
    assert run(["concentration", "--law", LAW, "--q", "0.8", "--n", "1:20", "--sidecar", sidecar]) == EXIT_OK
    table = _stdout_table(capsys)
    assert list(table.columns) == ["N", "exact_tail", "bound", "ratio"]
    assert (table["ratio"] <= 1.0 + 1e-12).all()
    with open(sidecar, encoding="utf-8") as f:
        assert set(json.load(f)) == {"eta", "rate", "m3", "var", "constant"}


def test_ensemble_then_regress(work_dir: str, capsys: pytest.CaptureFixture) -> None:
    ensemble_path = os.path.join(work_dir, "ensemble.csv")
    assert run(["ensemble", "--channel", "bec:0.5", "--rate", "0.3", "--n", "8:40:4", "-o", ensemble_path]) == EXIT_OK
    ensemble = pd.read_csv(ensemble_path)
    assert list(ensemble.columns) == ["N", "M", "p_e", "ci", "method"]
    assert (ensemble["method"] == "exact").all()

    exponent, _ = er(0.3, PresetParser.parse("bec:0.5"))
    assert run(["regress", ensemble_path, "--exponent", str(exponent)]) == EXIT_OK
    fit = _stdout_table(capsys)
    assert fit["slope"].iloc[0] == pytest.approx(-0.5, abs=0.15)
    assert fit["points"].iloc[0] == len(ensemble)


def test_monte_carlo_ensemble_is_seeded(capsys: pytest.CaptureFixture) -> None:
    argv = ["ensemble", "--channel", "bsc:0.1", "--rate", "0.2", "--n", "6", "--method", "mc", "--trials", "1000", "--seed", "3"]
    assert run(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert run(argv) == EXIT_OK
    assert capsys.readouterr().out == first


@pytest.mark.parametrize(
    "argv",
    [
        ["transmit", "--channel", "bsc:0.1"],
        ["analyze", "--channel", "gaussian:0.1"],
        ["analyze", "--channel", "bsc:1.5"],
        ["bound", "--channel", "bsc:0.1", "--rate", "0.32"],
        ["bound", "--channel", "bsc:0.1", "--rate", "0.32", "--n", "0:10"],
        ["bound", "--channel", "bec:0.5", "--rate", "0.3", "--n", "10", "--esseen-c", "0"],
        ["bound", "--channel", "bsc:0.1", "--rate", "0.05", "--n", "10"],
        ["ensemble", "--channel", "bsc:0.1", "--rate", "0.2", "--n", "4", "--q", "auto"],
        ["regress", "tests/data/laws/missing.csv", "--exponent", "0.1"],
    ],
)
def test_invalid_invocations_exit_with_error(argv: list[str], capsys: pytest.CaptureFixture) -> None:
    assert run(argv) == EXIT_ERROR
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "error: " in captured.err


def test_failed_run_leaves_no_output(work_dir: str) -> None:
    path = os.path.join(work_dir, "bound.csv")
    assert run(["bound", "--channel", "bsc:0.1", "--rate", "0.05", "--n", "10", "-o", path]) == EXIT_ERROR
    assert not os.path.exists(path)


def test_version(capsys: pytest.CaptureFixture) -> None:
    assert run(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out
