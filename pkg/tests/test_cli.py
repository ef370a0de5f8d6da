import json

import pytest

from koranyi.cli import build_parser, config_from_args, main
from koranyi.experiments.config import ConfigError


def _cfg(argv):
    return config_from_args(build_parser().parse_args(argv))


def test_flags_map_to_config():
    c = _cfg(["green-check", "--n", "3", "--samples", "1e4", "--epsilon", "1e-3", "--seed", "7"])
    assert c.param("n_list") == [3] and c.param("ball_samples") == 10_000
    assert c.quadrature.epsilon == 1e-3 and c.quadrature.seed == 7
    c = _cfg(["sharpness", "--samples", "500"])
    assert c.quadrature.samples == 500 and c.n == 2
    assert _cfg(["bellman", "--q-list", "2,10"]).param("q_list") == [2.0, 10.0]
    assert _cfg(["a2-compare", "--alpha-list", "0.2 0.4"]).param("alpha_fractions") == [0.2, 0.4]


def test_flag_for_wrong_experiment():
    with pytest.raises(ConfigError, match="only applies"):
        _cfg(["cap-measure", "--q-list", "2"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["cap-measure", "--samples", "1.5"])


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["sharpness", "--n", "1"]) == 2
    p = tmp_path / "bad.yaml"
    p.write_text("experiments:\n  - experiment: nope\n")
    assert main(["run", "--config", str(p)]) == 2
    assert "bad.yaml:2:" in capsys.readouterr().err


def test_report_and_figure(tmp_path, capsys):
    out = tmp_path / "cap.json"
    assert main(["cap-measure", "--samples", "5000", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["experiment"] == "cap-measure" and d["passed"]
    assert out.with_suffix(".png").stat().st_size > 1000
    assert "1/1 experiments passed" in capsys.readouterr().err


def test_no_figures_and_csv(tmp_path):
    out = tmp_path / "cap.csv"
    assert main(["cap-measure", "--samples", "5000", "--out", str(out), "--no-figures"]) == 0
    assert out.read_text().startswith("experiment,")
    assert not out.with_suffix(".png").exists()


def test_table_to_stdout(capsys):
    assert main(["cap-measure", "--samples", "5000", "--n", "3"]) == 0
    assert "cap-measure" in capsys.readouterr().out


def test_run_config(tmp_path):
    out = tmp_path / "a.json"
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"experiments:\n  - experiment: cap-measure\n    params: {{mc_samples: 2000}}\n    output: {out}\n")
    assert main(["run", "--config", str(cfg), "--workers", "2"]) == 0
    assert out.exists() and out.with_suffix(".png").exists()
