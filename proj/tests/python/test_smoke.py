import json

import numpy as np
import pytest

import hiclr


def tiny_config(tmp_path, **train):
    cfg = hiclr.benchmark_config()
    cfg["dataset"]["synth"]["sequences_per_class"] = 8
    cfg["dataset"]["test_fraction"] = 0.25
    cfg["train"].update({"epochs": 1, "batch_size": 16, "queue_size": 64}, **train)
    cfg["output_dir"] = str(tmp_path / "run")
    return cfg


def test_config_roundtrip_and_validation():
    cfg = hiclr.default_config()
    assert hiclr.resolve_config(cfg) == cfg
    cfg["train"]["sim"] = "dot"
    with pytest.raises(hiclr.HiclrError, match="similarity"):
        hiclr.resolve_config(cfg)
    with pytest.raises(hiclr.HiclrError, match="unknown key"):
        hiclr.resolve_config({"trian": {}})


def test_synth_writes_one_file_per_split(tmp_path):
    paths = hiclr.synth(tmp_path / "d", {"class_count": 8, "sequences_per_class": 10}, test_fraction=0)
    assert [p.endswith("train.bin") for p in paths] == [True]
    again = hiclr.synth(tmp_path / "e", {"class_count": 8, "sequences_per_class": 10}, test_fraction=0)
    assert open(paths[0], "rb").read() == open(again[0], "rb").read()


def test_load_data_shapes():
    cfg = hiclr.benchmark_config()
    (xtr, ytr), (xte, yte) = hiclr.load_data(cfg)
    assert xtr.shape[0] == 800 and xte.shape[0] == 200
    assert xtr.shape[1:] == (3, 64, 11, 1)
    assert sorted(set(ytr.tolist())) == list(range(8))


def test_pretrain_then_knn(tmp_path):
    cfg = tiny_config(tmp_path)
    runs = hiclr.pretrain(cfg)
    assert runs[0]["stream"] == "joint" and runs[0]["steps"] == 3
    assert np.isfinite(runs[0]["final_loss"])
    reports = hiclr.evaluate(cfg, run_dir=cfg["output_dir"])
    assert len(reports) == 1 and 0.0 <= reports[0]["top1_accuracy"] <= 1.0
    assert reports == hiclr.evaluate(cfg, run_dir=cfg["output_dir"])
    with open(tmp_path / "run" / "joint" / "log.jsonl") as f:
        lines = [json.loads(l) for l in f]
    assert [l["step"] for l in lines] == [0, 1, 2]
    assert all(l["objective"] == "hiclr" for l in lines)
    assert hiclr.plot([tmp_path / "run"], tmp_path / "loss.svg").endswith("loss.svg")


def test_baseline_tag(tmp_path):
    cfg = tiny_config(tmp_path, arrangement=["BA"], lambda_h=0.0)
    hiclr.pretrain(cfg)
    with open(tmp_path / "run" / "joint" / "log.jsonl") as f:
        assert all(json.loads(l)["objective"] == "skeletonclr" for l in f)


def test_losses_against_numpy():
    rng = np.random.default_rng(0)
    unit = lambda x: x / np.linalg.norm(x, axis=-1, keepdims=True)
    z, zk = unit(rng.normal(size=8)), unit(rng.normal(size=8))
    neg = unit(rng.normal(size=(16, 8)))
    tau = 0.2
    logits = np.concatenate([[z @ zk], neg @ z]) / tau
    expected = -logits[0] + np.log(np.exp(logits).sum())
    assert hiclr.info_nce(z, zk, neg, tau) == pytest.approx(expected, abs=1e-9)
    p = np.exp(logits - logits.max())
    np.testing.assert_allclose(hiclr.conditional_distribution(z, zk, neg, tau), p / p.sum(), atol=1e-12)
    value, per_branch, grads = hiclr.hierarchical_loss([z, z], zk, neg, tau, "kl")
    assert value == pytest.approx(0.0, abs=1e-12) and len(grads) == 2
