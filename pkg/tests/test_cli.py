import json

import numpy as np
import pytest

from pareto_fuse.cli import EXIT_CONFIG, EXIT_MISSING, main

SMALL_CONFIG = {
    "schema_version": 1,
    "seed": 7,
    "datagen": {"n_users": 60, "n_items": 40, "latent_dim": 4,
                "n_train": 3000, "n_valid": 800, "n_eval": 800},
    "ranking": {"pretrain_steps": 150},
    "batch_size": 32,
    "ippo": {"rounds": 3, "steps_per_round": 30},
    "formula": {
        "multiplicative": [["ctr", "alpha"], ["lvtr", "beta"]],
        "additive": [["evtr", "gamma"]],
        "bounds": {"alpha": [0.0, 4.0], "beta": [0.0, 4.0],
                   "gamma": [0.0, 4.0]},
        "budget": 16,
    },
}

PIPELINE = ["generate", "train-ranking", "run-ippo", "tune-formula",
            "evaluate", "calibrate", "report"]


def write_config(path, out_dir, **overrides):
    doc = {**SMALL_CONFIG, "output_dir": str(out_dir), **overrides}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "config.json", root / "run")
    for command in PIPELINE:
        assert main([command, "--config", str(cfg)]) == 0, command
    return root / "run", cfg


def test_all_artifacts_exist(pipeline_dir):
    out, _ = pipeline_dir
    expected = [
        "train.jsonl", "valid.jsonl", "eval.jsonl",
        "ranking_snapshot.json", "ranking_curve.jsonl",
        "pantheon_initial_snapshot.json", "ippo_trail.jsonl",
        "ranking_final_snapshot.json", "pantheon_snapshot.json",
        "formula_params.json", "formula_trace.jsonl",
        "evaluation.json", "calibration.json", "calibrated_scores.jsonl",
        "report.json", "report.csv", "gauc_bars.svg",
        "weight_trajectory.svg", "tau_table.svg",
    ]
    for name in expected:
        assert (out / name).exists(), name


def test_split_sizes_and_disjoint_ordinals(pipeline_dir):
    out, _ = pipeline_dir
    ordinals = {}
    for name, n in (("train", 3000), ("valid", 800), ("eval", 800)):
        lines = (out / f"{name}.jsonl").read_text().splitlines()
        assert len(lines) == n
        ordinals[name] = {json.loads(l)["ordinal"] for l in lines}
    assert not ordinals["train"] & ordinals["valid"]
    assert not ordinals["valid"] & ordinals["eval"]


def test_evaluation_document_structure(pipeline_dir):
    out, _ = pipeline_dir
    doc = json.loads((out / "evaluation.json").read_text())
    names = doc["objectives"]
    assert len(names) == 7
    for row in ("ranking", "formula", "pantheon", "improvement"):
        assert set(doc["rows"][row]) == set(names)
    for n in names:
        assert 0.0 <= doc["rows"]["pantheon"][n] <= 1.0
        assert -1.0 <= doc["kendall_tau"]["pantheon"][n] <= 1.0
    assert abs(doc["average_improvement"]
               - np.mean(list(doc["rows"]["improvement"].values()))) < 1e-12
    assert set(doc["weights"]) == set(names)
    assert sum(doc["weights"].values()) == pytest.approx(1.0, abs=1e-9)


def test_ippo_trail_is_valid_jsonl(pipeline_dir):
    out, _ = pipeline_dir
    trail = [json.loads(l) for l in (out / "ippo_trail.jsonl").read_text().splitlines()]
    assert len(trail) == 3
    for rec in trail:
        assert rec["action"]["kind"] in ("replace_base", "adjust_weight")
        assert rec["reward"] in (0, 1)
        assert sum(rec["weights"].values()) == pytest.approx(1.0, abs=1e-9)


def test_snapshot_headers_record_weights(pipeline_dir):
    out, _ = pipeline_dir
    doc = json.loads((out / "pantheon_snapshot.json").read_text())
    assert doc["component"] == "pantheon"
    assert sum(doc["header"]["weights"].values()) == pytest.approx(1.0, abs=1e-9)
    initial = json.loads((out / "pantheon_initial_snapshot.json").read_text())
    from pareto_fuse.ippo import IppoConfig
    from pareto_fuse.datagen import ObjectiveSet
    expected = IppoConfig().initial_weight_vector(ObjectiveSet()).to_dict()
    for name, w in initial["header"]["weights"].items():
        assert w == pytest.approx(expected[name], abs=1e-12)


def test_calibrated_scores_clipped_to_unit_interval(pipeline_dir):
    out, _ = pipeline_dir
    rows = [json.loads(l)
            for l in (out / "calibrated_scores.jsonl").read_text().splitlines()]
    assert len(rows) == 800
    for rec in rows:
        assert 0.0 < rec["calibrated"] < 1.0


def test_report_rerun_is_byte_identical(pipeline_dir):
    out, cfg = pipeline_dir
    names = ["report.json", "report.csv", "gauc_bars.svg",
             "weight_trajectory.svg", "tau_table.svg"]
    before = {n: (out / n).read_bytes() for n in names}
    assert main(["report", "--config", str(cfg)]) == 0
    for n in names:
        assert (out / n).read_bytes() == before[n], n


def test_generate_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run",
                       datagen={"n_users": 30, "n_items": 20, "latent_dim": 4,
                                "n_train": 200, "n_valid": 50, "n_eval": 50})
    assert main(["generate", "--config", str(cfg)]) == 0
    before = (tmp_path / "run" / "train.jsonl").read_bytes()
    assert main(["generate", "--config", str(cfg)]) == 0
    assert (tmp_path / "run" / "train.jsonl").read_bytes() == before


def test_seed_override_changes_stream(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run",
                       datagen={"n_users": 30, "n_items": 20, "latent_dim": 4,
                                "n_train": 200, "n_valid": 50, "n_eval": 50})
    assert main(["generate", "--config", str(cfg)]) == 0
    before = (tmp_path / "run" / "train.jsonl").read_bytes()
    assert main(["generate", "--config", str(cfg), "--seed", "99"]) == 0
    assert (tmp_path / "run" / "train.jsonl").read_bytes() != before


def test_missing_config_file_exit_code(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_invalid_json_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["generate", "--config", str(p)]) == EXIT_CONFIG


def test_bad_schema_version_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run",
                       schema_version=99)
    assert main(["generate", "--config", str(cfg)]) == EXIT_CONFIG


def test_mismatched_dims_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run",
                       pantheon={"feature_dim": 5})
    assert main(["generate", "--config", str(cfg)]) == EXIT_CONFIG


def test_missing_artifact_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run")
    assert main(["train-ranking", "--config", str(cfg)]) == EXIT_MISSING
    assert main(["evaluate", "--config", str(cfg)]) == EXIT_MISSING
    assert main(["report", "--config", str(cfg)]) == EXIT_MISSING


def test_out_override_redirects_artifacts(tmp_path):
    cfg = write_config(tmp_path / "c.json", tmp_path / "run",
                       datagen={"n_users": 30, "n_items": 20, "latent_dim": 4,
                                "n_train": 200, "n_valid": 50, "n_eval": 50})
    other = tmp_path / "elsewhere"
    assert main(["generate", "--config", str(cfg), "--out", str(other)]) == 0
    assert (other / "train.jsonl").exists()
    assert not (tmp_path / "run" / "train.jsonl").exists()
