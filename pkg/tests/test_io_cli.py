import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2pbw import cli
from p2pbw.config import build_config, load_config_file
from p2pbw.exceptions import ConfigError, DataError
from p2pbw.io import read_series_csv, read_trace_csv, to_jsonable, write_columns_csv, write_json, write_trace_csv
from p2pbw.ou import Trace


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(open(path).read())


# -- io ----------------------------------------------------------------------------


@given(values=st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=2, max_size=50),
       dt=st.sampled_from([0.01, 0.1, 0.5, 1.0]))
def test_trace_csv_round_trip_is_exact(tmp_path_factory, values, dt):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace_csv(path, Trace(dt, values))
    back = read_trace_csv(path)
    assert back.values.tolist() == [float(v) for v in values]
    assert back.dt == pytest.approx(dt)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    write_trace_csv(tmp_path / "a.csv", Trace(1.0, [1.0, 2.0]))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv"]


def test_reader_errors_name_the_line(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,value\n0,1\n1,2\n2,oops\n")
    with pytest.raises(DataError, match=r"bad.csv:4"):
        read_series_csv(bad)
    bad.write_text("t,v\n0,1\n")
    with pytest.raises(DataError, match=r":1: expected header"):
        read_series_csv(bad)
    bad.write_text("time,value\n0,1\n1,2,3\n")
    with pytest.raises(DataError, match=r":3: expected 2 fields"):
        read_series_csv(bad)
    bad.write_text("time,value\n0,1\n1,2\n5,3\n")
    with pytest.raises(DataError, match="uniformly"):
        read_trace_csv(bad)
    with pytest.raises(DataError):
        read_series_csv(tmp_path / "missing.csv")


def test_json_conversion():
    assert to_jsonable({"a": np.float64(math.nan), "b": np.arange(2), "c": (np.bool_(True),)}) == {
        "a": None, "b": [0, 1], "c": [True]}


def test_write_json_sorted(tmp_path):
    write_json(tmp_path / "x.json", {"b": 1, "a": math.inf})
    assert (tmp_path / "x.json").read_text() == '{\n  "a": null,\n  "b": 1\n}\n'


def test_columns_allow_blank_cells(tmp_path):
    write_columns_csv(tmp_path / "c.csv", ("x", "y"), ([1.0, 2.0], np.array([None, 3.0], dtype=object)))
    assert (tmp_path / "c.csv").read_text() == "x,y\n1.0,\n2.0,3.0\n"


# -- config -------------------------------------------------------------------------------


def test_unknown_fields_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        build_config("generate", {"seed": 1, "bogus": 2})
    with pytest.raises(ConfigError, match="model"):
        build_config("generate", {"seed": 1, "model": {"nn": 2}})


def test_numeric_fields_range_checked():
    config = build_config("generate", {"seed": 1, "model": {"n": 0.5}})
    with pytest.raises(ConfigError):
        config.individual_spec()
    config = build_config("generate", {"seed": 1, "grid": {"dt": -1}})
    with pytest.raises(ConfigError):
        config.individual_spec()


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        build_config("estimate", {"schema_version": 2, "trace": "x"})


def test_config_file_command_mismatch(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"command": "queue"}')
    with pytest.raises(ConfigError):
        load_config_file(path, "generate")
    path.write_text("{not json")
    with pytest.raises(ConfigError, match=":1:"):
        load_config_file(path, "generate")


# -- generate ------------------------------------------------------------------------------


def test_generate_zero_volatility(workdir):
    assert run("generate", "--seed", 1, "--count", 25, "--sigma", 0, "-o", "bw.csv") == 0
    trace = read_trace_csv("bw.csv")
    assert len(trace) == 25 and not np.any(trace.values)
    meta = load("bw.meta.json")
    assert meta["seed"] == 1 and meta["config"]["model"]["sigma"] == 0
    assert meta["schema_version"] == 1 and meta["library_version"]
    assert meta["files"] == ["bw.csv"]


def test_generate_is_reproducible(workdir):
    for name in ("a", "b"):
        assert run("--seed", 7, "generate", "--count", 500, "-o", f"{name}.csv") == 0
    assert open("a.csv", "rb").read() == open("b.csv", "rb").read()
    meta_a, meta_b = load("a.meta.json"), load("b.meta.json")
    for meta in (meta_a, meta_b):
        meta.pop("generated_at"), meta.pop("files"), meta["config"].pop("output")
    assert meta_a == meta_b


def test_generate_aggregate_with_components(workdir):
    assert run("generate", "--seed", 3, "--mode", "aggregate", "--components", 3, "--count", 100,
               "--write-components", "-o", "agg.csv") == 0
    total = read_trace_csv("agg.csv").values
    parts = [read_trace_csv(f"agg_component{i}.csv").values for i in range(3)]
    np.testing.assert_allclose(total, sum(parts), rtol=1e-15)


def test_generate_multiservice_from_config(workdir):
    (workdir / "ms.json").write_text(json.dumps({
        "command": "generate", "seed": 5, "mode": "multiservice", "output": "ms.csv",
        "grid": {"dt": 0.1, "count": 50},
        "services": {"audio": {"n": 2.8}, "video": {"sigma": 2.0}},
    }))
    assert run("generate", "--config", "ms.json") == 0
    assert len(read_trace_csv("ms_audio.csv")) == 50
    assert len(read_trace_csv("ms_video.csv")) == 50


def test_flags_override_config(workdir):
    (workdir / "g.json").write_text(json.dumps({"seed": 5, "grid": {"count": 50, "dt": 0.1}}))
    assert run("generate", "--config", "g.json", "--count", 20, "--seed", 6) == 0
    assert len(read_trace_csv("bandwidth.csv")) == 20
    meta = load("bandwidth.meta.json")
    assert meta["seed"] == 6 and meta["config"]["grid"] == {"count": 20, "dt": 0.1}


@pytest.mark.parametrize("argv", [
    ["generate", "--count", 10],  # no seed
    ["generate", "--seed", 1, "--epsilon", 0.9],
    ["generate", "--seed", 1, "--config", "missing.json"],
    ["generate", "--seed", 1, "--mode", "bogus"],
    ["estimate"],
])
def test_config_errors_exit_1(workdir, argv, capsys):
    with pytest.raises(SystemExit) as info:
        code = run(*argv)
        raise SystemExit(code)
    assert info.value.code == 1
    assert "error" in capsys.readouterr().err


# -- estimate -------------------------------------------------------------------------------


def test_estimate_round_trip(workdir):
    assert run("generate", "--seed", 11, "--count", 100_000, "--dt", 0.1, "--gamma", 1, "--sigma", 0.5,
               "--n", 3, "--write-factors", "-o", "bw.csv") == 0
    assert run("estimate", "--trace", "bw.ou.csv", "--traffic", "bw.traffic.csv", "--cutoff", 1, "-o", "e.json") == 0
    report = load("e.json")
    exact = report["ou"]["exact_mle"]
    assert exact["gamma_hat"] == pytest.approx(1.0, rel=0.05)
    assert exact["sigma_hat"] == pytest.approx(0.5, rel=0.02)
    assert abs(report["n"]["n_hat"] - 3.0) <= 0.05
    assert set(report["ou"]) >= {"exact_mle", "paper_literal", "ar1_oracle", "deviations"}
    assert report["ou"]["ar1_oracle"]["method"] == "ar1_oracle"
    assert abs(report["ou"]["deviations"]["ar1_oracle_vs_exact_mle"]["gamma"]) < 1e-3
    assert report["ou"]["paper_literal"]["diagnostics"]["reason"]
    assert report["schema_version"] == 1


def test_estimate_traffic_only(workdir):
    write_trace_csv("t.csv", Trace(1.0, 1.0 + np.random.default_rng(0).pareto(2.0, 2000)))
    assert run("estimate", "--traffic", "t.csv", "--cutoff", 1, "-o", "e.json") == 0
    report = load("e.json")
    assert report["ou"] is None and report["ou_absent"] is True
    assert report["n"]["n_hat"] == pytest.approx(3.0, abs=0.2)


def test_estimate_corrupted_csv(workdir, capsys):
    (workdir / "bad.csv").write_text("time,value\n0,1\n0.1,2\n0.2,x\n")
    assert run("estimate", "--trace", "bad.csv") == 2
    assert "bad.csv:4" in capsys.readouterr().err


def test_estimate_degenerate_trace(workdir, capsys):
    write_trace_csv("z.csv", Trace(0.1, np.zeros(50)))
    assert run("estimate", "--trace", "z.csv") == 2
    assert "EstimationDegenerate" in capsys.readouterr().err


def test_estimate_boundary_exits_3(workdir):
    write_trace_csv("alt.csv", Trace(0.1, np.tile([1.0, -1.0], 50)))
    assert run("estimate", "--trace", "alt.csv", "-o", "e.json") == 3
    assert load("e.json")["ou"]["exact_mle"]["converged"] is False


# -- analyze ----------------------------------------------------------------------------------


def test_analyze_white_noise(workdir):
    write_trace_csv("w.csv", Trace(1.0, np.random.default_rng(4).standard_normal(20_000)))
    assert run("analyze", "w.csv", "--max-lag", 200, "-o", "a.json") == 0
    report = load("a.json")
    assert report["lrd"]["verdict"] is False
    assert report["sample_moments"]["variance"] == pytest.approx(1.0, rel=0.05)
    for suffix in (".acv.csv", ".partial_sums.csv", ".loglog.csv"):
        assert (workdir / f"a{suffix}").exists()


def test_analyze_lrd_acv_input(workdir):
    k = np.arange(0, 200, dtype=float)
    acv = np.concatenate([[3.0], acv_values(k[1:])])
    write_columns_csv("acv.csv", ("lag", "value"), (k, acv))
    assert run("analyze", "acv.csv", "--input-kind", "acv", "-o", "a.json") == 0
    report = load("a.json")
    assert report["lrd"]["verdict"] is True
    assert report["hurst"] == pytest.approx(0.8, rel=1e-3)


def acv_values(k):
    return 1.5 * k ** (2 * (0.8 - 1)) + 0.7 * np.exp(-0.3 * k)


def test_analyze_constant_trace(workdir):
    write_trace_csv("c.csv", Trace(1.0, np.full(400, 2.0)))
    assert run("analyze", "c.csv", "--max-lag", 40, "-o", "a.json") == 0
    report = load("a.json")
    assert report["sample_moments"]["variance"] == 0.0
    assert any("degenerate" in w for w in report["warnings"])


def test_analyze_with_model_moments(workdir):
    write_trace_csv("w.csv", Trace(1.0, np.random.default_rng(4).standard_normal(400)))
    (workdir / "an.json").write_text(json.dumps({"model": {"n": 3.5, "gamma": 0.5, "sigma": 2.0, "kprime": 0.1}}))
    assert run("analyze", "w.csv", "--config", "an.json", "--max-lag", 40, "-o", "a.json") == 0
    paper = load("a.json")["paper_moments"]
    assert paper["mean"] == pytest.approx(0.5 * 2.5 / 1.5 + 0.2)


def test_analyze_lag_too_large(workdir, capsys):
    write_trace_csv("s.csv", Trace(1.0, np.arange(40.0)))
    assert run("analyze", "s.csv", "--max-lag", 10) == 1
    assert "max_lag" in capsys.readouterr().err


# -- queue --------------------------------------------------------------------------------------


def test_queue_underload_with_model(workdir):
    write_trace_csv("arr.csv", Trace(1.0, np.full(1000, 0.5)))
    assert run("queue", "arr.csv", "--service-rate", 1, "--hurst", 0.75, "--download-rate", 2,
               "--upload-rate", 4, "--var-b", 2, "--var-s", 1, "-o", "q.json",
               "--config", write_cfg(workdir, {"model": {"n": 2.5, "sigma": 0.0}})) == 0
    report = load("q.json")
    assert all(p == 0 for p in report["probabilities"])
    assert report["model_probabilities"] and report["queue_params"]["m"] == 0.5
    assert any("theta > 0" in n for n in report["notes"])


def write_cfg(workdir, data, name="cfg.json"):
    (workdir / name).write_text(json.dumps(data))
    return name


def test_queue_half_hurst_axis_is_x(workdir):
    write_trace_csv("arr.csv", Trace(1.0, np.random.default_rng(1).exponential(0.8, 5000)))
    assert run("queue", "arr.csv", "--service-rate", 1, "--hurst", 0.5, "-o", "q.json") == 0
    x, x_pow = np.loadtxt("q.tail.csv", delimiter=",", skiprows=1, usecols=(0, 3), unpack=True)
    np.testing.assert_array_equal(x, x_pow)


def test_queue_unstable(workdir, capsys):
    write_trace_csv("arr.csv", Trace(1.0, np.ones(10)))
    assert run("queue", "arr.csv", "--utilization", 1.5, "--hurst", 0.75) == 1
    assert "unstable" in capsys.readouterr().err
    cfg = write_cfg(workdir, {"model": {"n": 2.5}})
    assert run("queue", "arr.csv", "--service-rate", 2, "--hurst", 0.75, "--download-rate", 1,
               "--upload-rate", 1, "--var-b", 1, "--config", cfg) == 1


def test_queue_inline_generation(workdir):
    cfg = write_cfg(workdir, {
        "seed": 2024, "utilization": 0.8, "model": {"n": 2.5},
        "generate": {"grid": {"dt": 0.01, "count": 50_000}, "model": {"n": 2.5}},
    })
    assert run("queue", "--config", cfg, "-o", "q.json") == 0
    report = load("q.json")
    assert report["hurst"] == 0.75
    assert report["utilization"] == pytest.approx(0.8)
    assert report["regression_slope"] < 0 and 0 <= report["regression_r2"] <= 1


@pytest.mark.slow
def test_queue_end_to_end_long_range_dependent_input(workdir):
    from _fgn import fgn

    arrivals = np.maximum(1.0 + 0.3 * fgn(1_000_000, 0.75, np.random.default_rng(7)), 0.0)
    write_trace_csv("fgn.csv", Trace(1.0, arrivals))
    assert run("queue", "fgn.csv", "--utilization", 0.8, "--hurst", 0.75, "-o", "q.json") == 0
    report = load("q.json")
    assert report["regression_slope"] < 0 and report["regression_r2"] > 0.95
