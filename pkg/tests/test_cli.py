import json

import numpy as np
import pytest

from cbjj import io
from cbjj.cli import EXIT_CODES, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    doc = json.loads(err.strip().splitlines()[-1])
    assert set(doc) == {"error", "message"}
    return doc


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text('[levels]\nbiases = [0.0, 0.9]\nn_points = 20001\n'
                    '[sweep]\nn_points = 201\n'
                    '[switch]\nn_trials = 60\nbins = 30\n'
                    'langevin_start_current = "0.85 uA"\n')
    return path


def test_levels(capsys, tmp_path, small_cfg):
    code, out, _ = run(capsys, "levels", "--config", small_cfg, "--out", tmp_path / "o")
    assert code == 0
    table = io.read_levels(tmp_path / "o" / "levels.csv")
    assert [r.bias_ratio for r in table.rows] == [0.0, 0.9]
    conv = json.loads((tmp_path / "o" / "levels_convergence.json").read_text())
    assert len(conv["biases"]) == 2 and "provenance" in conv


def test_empty_bias_list_gives_header_only(capsys, tmp_path):
    cfg = tmp_path / "e.toml"
    cfg.write_text("[levels]\nbiases = []\n")
    code, _, _ = run(capsys, "--config", cfg, "levels", "--out", tmp_path)
    assert code == 0
    body = [ln for ln in (tmp_path / "levels.csv").read_text().splitlines() if not ln.startswith("#")]
    assert body == [",".join(io.LEVEL_HEADER)]


@pytest.mark.parametrize("kind", ["boson", "fermion"])
def test_spectrum_then_fit_round_trip(capsys, tmp_path, small_cfg, kind):
    assert run(capsys, "spectrum", "--kind", kind, "--config", small_cfg, "--out", tmp_path)[0] == 0
    data = tmp_path / f"spectrum_{kind}.csv"
    code, out, _ = run(capsys, "fit", "--target", kind, "--data", data, "--out", tmp_path,
                       "--config", small_cfg)
    assert code == 0, out
    fit = json.loads((tmp_path / f"fit_{kind}.json").read_text())
    assert fit["provenance"]["target"] == kind
    if kind == "boson":
        key, ghz = "omega_p", 2.595
    else:
        key, ghz = "omega_01", 2.42
    assert fit["converged"]
    assert fit["parameters"][key]["value"] == pytest.approx(2 * np.pi * ghz * 1e9, rel=1e-6)


def test_rates_histogram_fit_recovers_ic(capsys, tmp_path, small_cfg):
    assert run(capsys, "switch", "--method", "rates", "--config", small_cfg, "--out", tmp_path)[0] == 0
    summary = json.loads((tmp_path / "switch_rates_summary.json").read_text())
    assert summary["provenance"]["method"] == "rates"
    code, _, err = run(capsys, "fit", "--target", "switching", "--data", tmp_path / "switch_rates.csv",
                       "--config", small_cfg, "--out", tmp_path)
    assert code == 0, err
    fit = json.loads((tmp_path / "fit_switching.json").read_text())
    assert fit["parameters"]["critical_current"]["value"] == pytest.approx(0.979e-6, rel=0.05)


def test_langevin_requires_seed(capsys, tmp_path, small_cfg):
    code, out, err = run(capsys, "switch", "--method", "langevin", "--config", small_cfg, "--out", tmp_path)
    assert code == EXIT_CODES["usage"]
    assert error_of(err)["error"] == "usage"
    assert out == ""


def test_langevin_byte_identical(capsys, tmp_path, small_cfg):
    texts = []
    for d in ("a", "b"):
        code, _, err = run(capsys, "--seed", 11, "switch", "--method", "langevin", "--config", small_cfg,
                           "--out", tmp_path / d)
        assert code == 0, err
        texts.append((tmp_path / d / "switch_langevin.csv").read_bytes())
    assert texts[0] == texts[1]
    assert b"# seed: 11" in texts[0]


def test_single_trial(capsys, tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text('seed = 1\n[switch]\nn_trials = 1\nbins = 10\nlangevin_start_current = "0.9 uA"\n')
    code, _, err = run(capsys, "switch", "--method", "langevin", "--config", cfg, "--out", tmp_path)
    assert code == 0, err
    hist = io.read_histogram(tmp_path / "switch_langevin.csv")
    assert hist.n_total == 1 and int(np.sum(hist.counts)) == 1


def test_malformed_csv_reports_line(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("freq_GHz,transmission,phase_rad\n2.5,0.1,0\n2.6,nan?,0\n")
    code, _, err = run(capsys, "fit", "--target", "boson", "--data", bad, "--out", tmp_path)
    assert code == EXIT_CODES["parse"]
    doc = error_of(err)
    assert doc["error"] == "parse" and "line 3" in doc["message"]


def test_missing_data_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "fit", "--target", "boson", "--data", tmp_path / "nope.csv", "--out", tmp_path)
    assert code == EXIT_CODES["io"]
    assert error_of(err)["error"] == "io"


def test_bad_config_is_config_error(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[junction]\ncritical_curent = \"1 uA\"\n")
    code, _, err = run(capsys, "levels", "--config", cfg, "--out", tmp_path)
    assert code == EXIT_CODES["config"]
    assert "critical_curent" in error_of(err)["message"]


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == EXIT_CODES["usage"]
    assert run(capsys, "spectrum", "--kind", "photon")[0] == EXIT_CODES["usage"]
    assert run(capsys, "--threads", 0, "show-config")[0] == EXIT_CODES["usage"]


def test_show_config_round_trips(capsys, tmp_path):
    code, out, _ = run(capsys, "show-config", "--seed", 5)
    assert code == 0
    from cbjj import config
    cfg = config.loads(out)
    assert cfg.seed == 5
    assert config.equivalent(cfg, config.loads(config.dumps(cfg)))
