from __future__ import annotations

import json
import os

import pytest

from heavytail_rmt.cli import main
from heavytail_rmt.config import ConfigError, ExperimentConfig, emit_report, load_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimate_dual_large(capsys):
    code, out, _ = run(capsys, "estimate", "--route", "cauchy_dual", "--m", "1000", "--n", "1000",
                       "--t", "1", "--replicas", "10000", "--seed", "7")
    d = json.loads(out)
    assert code == 0
    assert abs(d["mean_re"] - 0.5291) < 0.02
    assert d["seed"] == 7 and d["replicas"] == 10000 and d["route"] == "cauchy_dual"


def test_estimate_t_zero(capsys):
    code, out, _ = run(capsys, "estimate", "--route", "cauchy_dual", "--m", "20", "--n", "20",
                       "--t", "0", "--replicas", "50", "--seed", "1")
    d = json.loads(out)
    assert (d["mean_re"], d["stderr"]) == (1.0, 0.0)


def test_lemma1_example(capsys):
    code, out, _ = run(capsys, "lemma1", "--m", "3", "--n", "2", "--z", "1.5")
    assert code == 0 and json.loads(out)["max_residual"] < 1e-10


def test_lemma1_grid(capsys):
    code, out, _ = run(capsys, "lemma1")
    assert code == 0 and len(json.loads(out)["rows"]) == 63


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "estimate", "foo": 1}))
    code, _, err = run(capsys, "estimate", "--config", str(cfg))
    assert code == 2 and "foo" in err
    with pytest.raises(ConfigError, match="foo"):
        load_config(cfg)


def test_unknown_param_key_and_malformed(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "estimate", "params": {"bar": 1}}))
    with pytest.raises(ConfigError, match="params.bar"):
        load_config(cfg)
    cfg.write_text("{\"subcommand\": ")
    code, _, err = run(capsys, "estimate", "--config", str(cfg))
    assert code == 2 and "c.json:1" in err


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(subcommand="estimate", seed=9, replicas=100, route="cauchy_dual",
                           params={"m": 10, "n": 10, "t": 1.0})
    path = tmp_path / "r.json"
    emit_report({"x": 1}, path, "json", cfg)
    assert load_config(path) == cfg
    csv_path = tmp_path / "r.csv"
    emit_report([{"a": 1, "b": 2}], csv_path, "csv", cfg)
    assert load_config(csv_path) == cfg
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_report_embeds_seed_version_params(tmp_path, capsys):
    out = tmp_path / "est.json"
    code, _, _ = run(capsys, "estimate", "--route", "cauchy_dual", "--m", "5", "--n", "5", "--t", "1",
                     "--replicas", "100", "--seed", "3", "--out", str(out))
    doc = json.loads(out.read_text())
    assert code == 0 and doc["seed"] == 3 and doc["version"]
    assert doc["config"]["params"] == {"m": 5, "n": 5, "t": 1.0}
    # a report reproduces itself
    code, again, _ = run(capsys, "estimate", "--config", str(out))
    assert json.loads(again) == doc["results"]


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "estimate", "route": "cauchy_dual", "seed": 1,
                               "replicas": 50, "params": {"m": 5, "n": 5, "t": 1.0}}))
    _, out, _ = run(capsys, "estimate", "--config", str(cfg), "--seed", "2", "--t", "0")
    d = json.loads(out)
    assert d["seed"] == 2 and d["mean_re"] == 1.0


def test_unwritable_output_exits_2(capsys):
    code, _, err = run(capsys, "estimate", "--route", "constant", "--replicas", "2",
                       "--out", "/nonexistent-dir/x.json")
    assert code == 2 and "cannot write" in err


def test_tail_csv_header(tmp_path, capsys):
    out = tmp_path / "tail.csv"
    code, text, _ = run(capsys, "tail", "--m", "8", "--n", "8", "--replicas", "100", "--x-grid", "1,4",
                        "--format", "csv", "--out", str(out))
    body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert code == 0 and body[0] == "x,empirical_tail,stderr,reference,empirical_C"
    assert len(body) == 3


def test_compare_exit_codes(capsys):
    code, out, _ = run(capsys, "compare", "--route", "complex_dual", "--m", "2", "--n", "1", "--t", "0.8",
                       "--reference", "wishart_complex", "--replicas", "20000", "--seed", "3")
    assert code == 0 and json.loads(out)["pass"]
    code, out, _ = run(capsys, "compare", "--route", "constant", "--reference", "0.7", "--replicas", "10")
    assert code == 1


def test_compare_two_routes(capsys):
    code, out, _ = run(capsys, "compare", "--route", "direct", "--route-b", "rademacher_dual", "--kind",
                       "rademacher", "--m", "2", "--n", "2", "--t", "1", "--replicas", "20000")
    assert code == 0


def test_poisson_and_points(capsys):
    code, out, _ = run(capsys, "poisson", "--cutoff", "1e-4", "--replicas", "500", "--z", "1")
    d = json.loads(out)
    assert code == 0 and d["z_score"] < 4
    code, out, _ = run(capsys, "poisson", "--cutoff", "1e-1", "--replicas", "3", "--points")
    assert "replica_id,point" in out.splitlines()


@pytest.mark.parametrize("argv,key", [
    (["--op", "real", "--n", "2", "--m", "3", "--t", "0.8"], "value"),
    (["--op", "complex", "--n", "1", "--m", "1", "--t", "1"], "value"),
    (["--op", "saddle", "--t", "1"], "value"),
    (["--op", "steepest_descent", "--n", "100", "--t", "1"], "log_value"),
    (["--op", "mp_log", "--t", "1"], "value"),
    (["--op", "mp_density", "--x", "1", "--gamma", "2"], "value"),
    (["--op", "mp_normalization", "--gamma", "2"], "value"),
    (["--op", "bessel_kernel", "--x", "1", "--y", "2"], "value"),
])
def test_wishart_ops(capsys, argv, key):
    code, out, _ = run(capsys, "wishart", *argv)
    d = json.loads(out)
    assert code == 0 and key in d and "params" in d and "err_bound" in d


def test_wishart_e_times_E1(capsys):
    _, out, _ = run(capsys, "wishart", "--op", "complex", "--n", "1", "--m", "1", "--t", "1")
    assert json.loads(out)["value"] == pytest.approx(0.596347362323194, rel=1e-13)


def test_bad_subcommand_and_invalid_spec(capsys):
    assert main(["frobnicate"]) == 2
    code, _, err = run(capsys, "estimate", "--route", "direct", "--m", "2", "--n", "3", "--t", "1",
                       "--replicas", "10")
    assert code == 2 and "m >= n" in err


def test_verify_all_subset(capsys):
    code, out, _ = run(capsys, "verify-all", "--only", "6,7,14")
    assert code == 0
    assert out.count("[PASS]") == 3
