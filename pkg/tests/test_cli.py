import hashlib
import json

import numpy as np
import pandas as pd
import pytest

from psvm import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_gen_writes_two_identical_files(tmp_path, capsys):
    for sub in ("a", "b"):
        code, _, _ = run(capsys, "gen", "--preset", "jcc2", "--seed", 7, "-o", tmp_path / sub)
        assert code == 0
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["data.csv", "schema.json"]
    for name in ("data.csv", "schema.json"):
        assert _sha(tmp_path / "a" / name) == _sha(tmp_path / "b" / name)


def test_gen_invalid_spec_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--L", 0, "-o", tmp_path)
    assert code == 2 and "L must be" in err


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert run(capsys, "gen")[0] == 0
    assert (tmp_path / "env" / "data.csv").exists()


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--data", "x", "--schema", "y", "--algo", "forest"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2


@pytest.fixture
def jcc_files(tmp_path, capsys):
    run(capsys, "gen", "--preset", "jcc2", "--seed", 1, "-o", tmp_path)
    return tmp_path


def test_train_slsvm_and_jcc_reports(jcc_files, capsys):
    d, s = jcc_files / "data.csv", jcc_files / "schema.json"
    code, out, _ = run(capsys, "train", "--data", d, "--schema", s, "--algo", "slsvm", "--T", 0.7,
                       "-o", jcc_files / "s.json")
    assert code == 0 and "objective:" in out
    doc = json.loads((jcc_files / "s.json").read_text())
    assert sum(abs(v) for v in doc["clusters"][0]["beta"].values()) <= 0.7 + 1e-6
    code, out, _ = run(capsys, "train", "--data", d, "--schema", s, "--algo", "jcc", "--L", 2, "--T", 5,
                       "-o", jcc_files / "j.json")
    assert code == 0
    purity = float(out.split("purity:")[1].split()[0])
    assert purity >= 0.95
    code, out, _ = run(capsys, "train", "--data", d, "--schema", s, "--algo", "l2lr", "-o", jcc_files / "l.json")
    assert code == 0 and "gradient converged" in out


def test_eval_perfect_model_and_target_rate(jcc_files, capsys):
    d, s = jcc_files / "data.csv", jcc_files / "schema.json"
    run(capsys, "train", "--data", d, "--schema", s, "--algo", "jcc", "--T", 5, "-o", jcc_files / "j.json")
    code, _, _ = run(capsys, "eval", "--models", jcc_files / "j.json", "--data", d, "--schema", s,
                     "--target-rate", 0.0585, "-o", jcc_files / "m.json")
    assert code == 0
    m = json.loads((jcc_files / "m.json").read_text())
    entry = m["models"][0]
    assert entry["auc"] == 1.0
    assert abs(entry["rate_before"] - 0.0585) <= 1 / m["n_samples"]
    assert entry["threshold_source"] == "evaluation data"
    assert entry["roc"][0]["threshold"] is None


def test_eval_single_class_exit_3(jcc_files, capsys):
    df = pd.read_csv(jcc_files / "data.csv")
    df[df.label == 1].to_csv(jcc_files / "pos.csv", index=False)
    run(capsys, "train", "--data", jcc_files / "data.csv", "--schema", jcc_files / "schema.json",
        "--algo", "slsvm", "-o", jcc_files / "s.json")
    code, _, err = run(capsys, "eval", "--models", jcc_files / "s.json", "--data", jcc_files / "pos.csv",
                       "--schema", jcc_files / "schema.json")
    assert code == 3 and "both classes" in err
    code, _, _ = run(capsys, "train", "--data", jcc_files / "pos.csv", "--schema", jcc_files / "schema.json",
                     "--algo", "jcc", "-o", jcc_files / "x.json")
    assert code == 3


def test_prescribe_without_controllable_exit_2(jcc_files, capsys):
    d, s = jcc_files / "data.csv", jcc_files / "schema.json"
    run(capsys, "train", "--data", d, "--schema", s, "--algo", "slsvm", "-o", jcc_files / "s.json")
    code, _, err = run(capsys, "prescribe", "--model", jcc_files / "s.json", "--data", d, "--schema", s,
                       "--tau", 0)
    assert code == 2 and "controllable" in err


def test_missing_file_exit_3(tmp_path, capsys):
    code, _, _ = run(capsys, "train", "--data", tmp_path / "nope.csv", "--schema", tmp_path / "nope.json",
                     "--algo", "slsvm")
    assert code == 3


@pytest.fixture(scope="module")
def hct_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("hct")
    assert cli.main(["gen", "--preset", "hct", "--n", "1500", "--seed", "2", "-o", str(root / "raw")]) == 0
    assert cli.main(["preprocess", "--data", str(root / "raw/data.csv"), "--schema", str(root / "raw/schema.json"),
                     "--seed", "2", "-o", str(root / "proc")]) == 0
    p = root / "proc"
    for algo in ("slsvm", "l2lr"):
        assert cli.main(["train", "--data", str(p / "train.csv"), "--schema", str(p / "pipeline.json"),
                         "--algo", algo, "--T", "5", "--calibrate-data", str(p / "validation.csv"),
                         "--target-rate", "0.06", "-o", str(root / f"{algo}.json")]) == 0
    return root


def test_preprocess_outputs(hct_files):
    p = hct_files / "proc"
    pipe = json.loads((p / "pipeline.json").read_text())
    assert pipe["kind"] == "pipeline" and pipe["format_version"] == 1
    sizes = [len(pd.read_csv(p / f"{n}.csv")) for n in ("train", "validation", "test")]
    assert sizes == [900, 300, 300]
    test = pd.read_csv(p / "test.csv")
    assert "sex" in test.columns and set(test["readmit"]) == {-1, 1}


@pytest.mark.parametrize("p", [1, 2])
def test_prescribe_flips_rows(hct_files, capsys, p):
    root = hct_files
    out = root / f"presc{p}.csv"
    code, _, _ = run(capsys, "prescribe", "--model", root / "slsvm.json", "--data", root / "proc/test.csv",
                     "--schema", root / "proc/pipeline.json", "--lambda", 100, "--p", p, "-o", out)
    assert code == 0
    df = pd.read_csv(out)
    assert df["flipped"].sum() > 0
    assert list(df.columns[:5]) == ["patient_index", "cluster", "flipped", "xi", "change_cost"]
    assert (df["HCT_after"] >= df["HCT_before"] - 1e-9).all()   # increase-only default for HCT
    assert (df["HCT_after"] <= 60 + 1e-9).all()


def test_prescribe_lambda_zero_identity(hct_files, capsys):
    root = hct_files
    out = root / "zero.csv"
    assert run(capsys, "prescribe", "--model", root / "slsvm.json", "--data", root / "proc/test.csv",
               "--schema", root / "proc/pipeline.json", "--lambda", 0, "-o", out)[0] == 0
    df = pd.read_csv(out)
    assert len(df) > 0 and (df["change_cost"] == 0).all()
    np.testing.assert_array_equal(df["HCT_after"], df["HCT_before"])


def test_prescribe_treatment_and_cross_eval(hct_files, capsys):
    root = hct_files
    code, _, _ = run(capsys, "prescribe", "--model", root / "slsvm.json", "--data", root / "proc/test.csv",
                     "--schema", root / "proc/pipeline.json", "--lambda", 100, "--treatment", "hct",
                     "-o", root / "t.csv", "--after-data", root / "after.csv")
    assert code == 0
    df = pd.read_csv(root / "t.csv")
    assert ((df["baseline_bags"] + df["bags"]) <= 3).all()
    np.testing.assert_allclose(df["HCT_treated"], df["HCT_before"] + 3 * df["bags"], atol=1e-9)
    code, _, _ = run(capsys, "eval", "--models", root / "slsvm.json", root / "l2lr.json",
                     "--data", root / "proc/test.csv", "--schema", root / "proc/pipeline.json",
                     "--after-data", root / "after.csv", "--rank-features", "-o", root / "m.json")
    assert code == 0
    m = json.loads((root / "m.json").read_text())
    assert [r["method"] for r in m["rate_table"]] == ["slsvm", "l2lr"]
    assert all(set(r) == {"method", "prescriptive_rate", "baseline_rate"} for r in m["rate_table"])
    assert all(r["prescriptive_rate"] < r["baseline_rate"] for r in m["rate_table"])
    assert m["feature_ranking"][0]["feature"] == "HCT"


def test_prescribe_needs_threshold(hct_files, capsys, tmp_path):
    doc = json.loads((hct_files / "slsvm.json").read_text())
    doc["threshold"] = None
    (tmp_path / "m.json").write_text(json.dumps(doc))
    code, _, err = run(capsys, "prescribe", "--model", tmp_path / "m.json", "--data",
                       hct_files / "proc/test.csv", "--schema", hct_files / "proc/pipeline.json")
    assert code == 2 and "--tau" in err
