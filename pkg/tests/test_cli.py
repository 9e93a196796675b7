import json
from pathlib import Path

import numpy as np
from click.testing import CliRunner

from fairlog.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_hoeffding_prints_bound_and_note():
    result = invoke("hoeffding", "--eps", "0.1", "--gamma", "0.95")
    assert result.exit_code == 0
    assert "n >= 185" in result.output
    assert "184" in result.output


def test_hoeffding_other_values_no_note():
    result = invoke("hoeffding", "--eps", "0.5", "--gamma", "0.5")
    assert result.exit_code == 0
    assert "n >= 3" in result.output
    assert "184" not in result.output


def test_infer_example1_mary():
    result = invoke("infer", "--program", FIXTURES / "example1.pl")
    assert result.exit_code == 0
    assert "= 0.9" in result.output


def test_infer_query_override_and_grads():
    result = invoke(
        "infer", "--program", FIXTURES / "example1.pl", "--query", "gets_loan(john)", "--grad"
    )
    assert result.exit_code == 0
    assert "= 1" in result.output


def test_infer_with_params_and_nn():
    result = invoke(
        "infer",
        "--program",
        FIXTURES / "listing1.pl",
        "--params",
        json.dumps({"p1": 0.2, "p2": 0.0, "p3": 0.1, "p4": 0.0}),
        "--nn",
        "h=0.7",
        "--nn",
        "a=1",
    )
    assert result.exit_code == 0
    # 0.7 * 0.8 + 0.3 * 0.1 = 0.59
    assert "0.59" in result.output


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    r1 = invoke("gen", "--out", a, "--rows", 100, "--seed", 5, "--beta-label", "0.2")
    r2 = invoke("gen", "--out", b, "--rows", 100, "--seed", 5, "--beta-label", "0.2")
    assert r1.exit_code == 0 and r2.exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.manifest.json").exists()


def test_gen_from_manifest_config_is_deterministic(tmp_path):
    config = {"n_rows": 80, "seed": 9, "beta_label": 0.4, "p_noise_y": 0.1}
    config_path = tmp_path / "gen.json"
    config_path.write_text(json.dumps(config))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke("gen", "--config", config_path, "--out", a).exit_code == 0
    assert invoke("gen", "--config", config_path, "--out", b).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_train_eval_roundtrip(tmp_path):
    data = tmp_path / "data.csv"
    ckpt = tmp_path / "model.npz"
    assert invoke("gen", "--out", data, "--rows", 300, "--seed", 2, "--beta-label", "0.3").exit_code == 0
    result = invoke(
        "train", "--data", data, "--method", "ours", "--scenario", "label",
        "--beta-hat", "0.3", "--epochs", 2, "--checkpoint", ckpt,
    )
    assert result.exit_code == 0, result.output
    assert ckpt.exists()
    result = invoke("eval", "--checkpoint", ckpt, "--data", data, "--view", "test_unbiased")
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert 0.0 <= report["accuracy"] <= 1.0


def test_estimate_params_cli(tmp_path):
    paired = tmp_path / "paired.csv"
    rng = np.random.default_rng(0)
    with paired.open("w") as handle:
        handle.write("a,v,v_t\n")
        for _ in range(500):
            a = rng.integers(0, 2)
            v = rng.integers(0, 2)
            v_t = v if not (a and v and rng.random() < 0.3) else 0
            handle.write(f"{a},{v},{v_t}\n")
    result = invoke("estimate-params", "--paired", paired)
    assert result.exit_code == 0, result.output
    values = json.loads(result.output)["values"]
    assert values["neg_sensitive"] > 0.15
    assert values["neg_other"] == 0.0


def test_sweep_cli(tmp_path):
    config = {
        "scenario": "label",
        "beta_grid": [0.3],
        "methods": ["upper", "lower"],
        "folds": 2,
        "seeds": [0],
        "gen": {"n_rows": 200},
        "train": {"epochs": 2, "batch_size": 32},
        "hidden": [8],
        "out_dir": str(tmp_path / "out"),
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    result = invoke("sweep", "--config", config_path)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "results.csv").exists()


def test_usage_errors_exit_one():
    assert invoke("hoeffding", "--eps", "0.1").exit_code == 1
    assert invoke("train", "--data", "/nonexistent.csv", "--checkpoint", "x").exit_code == 1


def test_backend_command():
    result = invoke("backend")
    assert result.exit_code == 0
    assert result.output.strip() in ("cython", "python")
