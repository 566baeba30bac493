import json
import subprocess
import sys

import pytest

from arofraud import cli
from arofraud.cli import main

SMALL = ["--train-legit", "674", "--train-fraud", "26", "--test-legit", "289", "--test-fraud", "11"]
TIMING = {"train_time_s", "test_time_s"}


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", "--splits", "3", "--seed", "42", "--out", str(out), *SMALL]) == 0
    return out


def test_generate_writes_two_files_per_split(data_dir):
    names = sorted(files(data_dir))
    assert names == sorted(f"split{i}_{p}.csv" for i in (1, 2, 3) for p in ("train", "test"))


def test_generate_nine_splits_default_count(tmp_path):
    assert main(["generate", "--splits", "9", "--seed", "42", "--out", str(tmp_path), "--feature-count", "2", *SMALL]) == 0
    assert len(files(tmp_path)) == 18


def test_generate_is_byte_identical(tmp_path, data_dir):
    assert main(["generate", "--splits", "3", "--seed", "42", "--out", str(tmp_path), *SMALL]) == 0
    assert files(tmp_path) == files(data_dir)


def test_splits_zero_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--splits", "0", "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert "--splits" in capsys.readouterr().err


def test_train_missing_file_leaves_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["train", "--train", str(tmp_path / "missing.csv"), "--out", str(out)]) != 0
    assert "missing.csv" in capsys.readouterr().err
    assert not out.exists()


def test_train_malformed_file_reports_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("f1,label\n1,0\nx,1\n")
    assert main(["train", "--train", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "row 3" in capsys.readouterr().err


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("trained")
    argv = ["train", "--train", str(data_dir / "split1_train.csv"), "--cut-point", "0.1754", "--out", str(out)]
    assert main(argv) == 0
    return out


def test_train_outputs(trained_dir):
    assert set(files(trained_dir)) == {"aro_detectors.txt", "ais_detectors.txt", "train_report.json"}
    rep = json.loads((trained_dir / "train_report.json").read_text())
    aro, ais = rep["algorithms"]["aro"], rep["algorithms"]["ais"]
    assert aro["cut_point"] == 0.1754 and aro["reached_cut_point"] == [True]
    assert aro["detector_count"] == aro["accepted_buds"] + 1
    assert ais["iterations"] == 150 and ais["cut_point"] is None
    assert aro["train_time_s"] >= 0


def test_train_is_deterministic(tmp_path, data_dir, trained_dir):
    argv = ["train", "--train", str(data_dir / "split1_train.csv"), "--cut-point", "0.1754", "--out", str(tmp_path)]
    assert main(argv) == 0
    a, b = files(tmp_path), files(trained_dir)
    for name in ("aro_detectors.txt", "ais_detectors.txt"):
        assert a[name] == b[name]
    assert strip_timing(json.loads(a["train_report.json"])) == strip_timing(json.loads(b["train_report.json"]))


def test_evaluate(tmp_path, data_dir, trained_dir):
    argv = [
        "evaluate", "--detectors", str(trained_dir / "aro_detectors.txt"), str(trained_dir / "ais_detectors.txt"),
        "--test", str(data_dir / "split1_test.csv"), "--train", str(data_dir / "split1_train.csv"),
        "--train-report", str(trained_dir / "train_report.json"), "--out", str(tmp_path),
    ]
    assert main(argv) == 0
    got = files(tmp_path)
    assert set(got) == {"aro_metrics.json", "aro_roc.csv", "ais_metrics.json", "ais_roc.csv"}
    for alg in ("aro", "ais"):
        doc = json.loads(got[f"{alg}_metrics.json"])
        cm = doc["confusion"]
        assert cm["tp"] + cm["fn"] == 11 and cm["tn"] + cm["fp"] == 289
        assert doc["sensitivity"] == cm["tp"] / 11
        assert doc["specificity"] == cm["tn"] / 289
        assert doc["cost"] == 100 * cm["fn"] + 10 * cm["fp"] + cm["tp"]
        assert 0.0 <= doc["auc"] <= 1.0 and doc["train_time_s"] >= 0
        assert got[f"{alg}_roc.csv"].startswith(b"fpr,tpr\n0,0\n")
    again = tmp_path / "again"
    assert main(argv[:-1] + [str(again)]) == 0
    for name in ("aro_roc.csv", "ais_roc.csv"):
        assert files(again)[name] == got[name]


def test_evaluate_threshold_monotone(tmp_path, data_dir, trained_dir):
    tn = []
    for i, thr in enumerate(("0.1", "0.2", "0.3", "0.5")):
        out = tmp_path / str(i)
        argv = ["evaluate", "--detectors", str(trained_dir / "aro_detectors.txt"),
                "--test", str(data_dir / "split1_test.csv"), "--threshold", thr, "--out", str(out)]
        assert main(argv) == 0
        tn.append(json.loads((out / "aro_metrics.json").read_text())["confusion"]["tn"])
    assert tn == sorted(tn)


def test_evaluate_feature_mismatch(tmp_path, trained_dir):
    test = tmp_path / "t.csv"
    test.write_text("f1,label\n0.5,0\n0.7,1\n")
    argv = ["evaluate", "--detectors", str(trained_dir / "aro_detectors.txt"), "--test", str(test),
            "--threshold", "0.2", "--out", str(tmp_path / "o")]
    assert main(argv) == 1
    assert not (tmp_path / "o").exists()


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("bench")
    assert main(["benchmark", "--data", str(data_dir), "--repeats", "2", "--ais-iterations", "30", "--out", str(out)]) == 0
    return out


def test_benchmark_report_shape(bench_dir):
    rep = json.loads((bench_dir / "benchmark_report.json").read_text())
    assert rep["schema"] == "arofraud-benchmark v1"
    assert [r["split_id"] for r in rep["splits"]] == [1, 2, 3]
    for alg in ("aro", "ais"):
        for m, avg in rep["averages"][alg].items():
            vals = [r[alg]["best"][m] for r in rep["splits"] if r[alg]["best"][m] is not None]
            assert avg == pytest.approx(sum(vals) / len(vals), abs=1e-12)
        for r in rep["splits"]:
            assert len(r[alg]["runs"]) == 2
            assert r[alg]["best"]["cost"] == min(x["cost"] for x in r[alg]["runs"])
    table = (bench_dir / "benchmark_table.csv").read_text().splitlines()
    assert len(table) == 1 + 3 + 1 and table[-1].startswith("average,")


def test_stats_recompute_equals_embedded(tmp_path, bench_dir):
    assert main(["stats", "--report", str(bench_dir / "benchmark_report.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((bench_dir / "benchmark_report.json").read_text())
    assert json.loads((tmp_path / "stats.json").read_text()) == rep["tests"]
    kw = rep["tests"]["kruskal_wallis"]["aro"]["cost"]
    assert kw["df"] == 2


def test_benchmark_deterministic_apart_from_timing(tmp_path, data_dir, bench_dir):
    assert main(["benchmark", "--data", str(data_dir), "--repeats", "2", "--ais-iterations", "30", "--out", str(tmp_path)]) == 0
    a = json.loads((tmp_path / "benchmark_report.json").read_text())
    b = json.loads((bench_dir / "benchmark_report.json").read_text())
    assert strip_timing(a["splits"]) == strip_timing(b["splits"])
    assert strip_timing(a["tests"]) == strip_timing(b["tests"])


def test_benchmark_parallel_matches_serial(tmp_path, data_dir, bench_dir):
    argv = ["benchmark", "--data", str(data_dir), "--repeats", "2", "--ais-iterations", "30",
            "--parallelism", "2", "--out", str(tmp_path)]
    assert main(argv) == 0
    a = json.loads((tmp_path / "benchmark_report.json").read_text())
    b = json.loads((bench_dir / "benchmark_report.json").read_text())
    assert strip_timing(a["splits"]) == strip_timing(b["splits"])


def test_stats_rejects_malformed_report(tmp_path):
    bad = tmp_path / "r.json"
    bad.write_text('{"schema": "other"}')
    assert main(["stats", "--report", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"splits": 2, "seed": 5, "feature-count": 3, "train_legit": 674, "train_fraud": 26,
                               "test_legit": 289, "test_fraud": 11}))
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["generate", "--config", str(cfg), "--out", str(a)]) == 0
    assert len(files(a)) == 4
    assert (a / "split1_train.csv").read_text().splitlines()[0] == "f1,f2,f3,label"
    # the flag overrides the config value
    assert main(["generate", "--config", str(cfg), "--splits", "1", "--out", str(b)]) == 0
    assert len(files(b)) == 2
    assert files(b)["split1_train.csv"] == files(a)["split1_train.csv"]
    assert main(["generate", "--config", str(cfg), "--seed", "6", "--out", str(c)]) == 0
    assert files(c)["split1_train.csv"] != files(a)["split1_train.csv"]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"nonsense": 1}')
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--config", str(cfg), "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_mid_run_failure_leaves_no_partial_files(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = cli.write_csv

    def flaky(ds, fh):
        calls["n"] += 1
        if calls["n"] == 4:
            raise OSError("disk full")
        real(ds, fh)

    monkeypatch.setattr(cli, "write_csv", flaky)
    out = tmp_path / "out"
    with pytest.raises(OSError):
        main(["generate", "--splits", "3", "--out", str(out), *SMALL])
    assert calls["n"] == 4
    assert not out.exists()

    existing = tmp_path / "existing"
    existing.mkdir()
    (existing / "keep.txt").write_text("x")
    calls["n"] = 0
    with pytest.raises(OSError):
        main(["generate", "--splits", "3", "--out", str(existing), *SMALL])
    assert sorted(p.name for p in existing.iterdir()) == ["keep.txt"]


def test_benchmark_split_failure_names_split(tmp_path, data_dir, capsys):
    broken = tmp_path / "data"
    broken.mkdir()
    for p in data_dir.iterdir():
        (broken / p.name).write_bytes(p.read_bytes())
    # a split without fraud cannot be trained
    lines = (broken / "split2_train.csv").read_text().splitlines()
    (broken / "split2_train.csv").write_text("\n".join(l for l in lines if not l.endswith(",1")) + "\n")
    out = tmp_path / "out"
    assert main(["benchmark", "--data", str(broken), "--repeats", "1", "--out", str(out)]) == 1
    assert "split 2" in capsys.readouterr().err
    assert not out.exists()


def test_module_entry_point_and_log_env(tmp_path):
    env_out = tmp_path / "g"
    proc = subprocess.run(
        [sys.executable, "-m", "arofraud.cli", "generate", "--splits", "1", "--out", str(env_out), *SMALL],
        capture_output=True, text=True, env={"ARO_BENCH_LOG": "INFO", "PATH": ""},
    )
    assert proc.returncode == 0, proc.stderr
    assert "wrote 1 splits" in proc.stderr
