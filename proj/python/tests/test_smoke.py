"""End-to-end smoke tests for the retfuse extension module."""

import math

import numpy as np
import pytest

import retfuse


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return retfuse.generate_dataset(str(out), patients=20, exams=1, side=32, seed=5)


@pytest.fixture(scope="session")
def toy_config(dataset, tmp_path_factory):
    cfg = retfuse.default_config()
    cfg.update(
        {
            "model.dim": "32",
            "vision.image_side": "32",
            "vision.patch_size": "16",
            "vision.backbone_depth": "2",
            "vision.backbone_hidden": "32",
            "vision.backbone_heads": "4",
            "vision.freeze_depth": "1",
            "text.max_tokens": "24",
            "text.kept_tokens": "8",
            "text.backbone_hidden": "32",
            "text.backbone_depth": "2",
            "text.backbone_heads": "4",
            "text.freeze_depth": "1",
            "structured.hidden1": "32",
            "structured.hidden2": "32",
            "fusion.layers": "2",
            "fusion.heads": "4",
            "decoder.image_side": "32",
            "decoder.image_base_channels": "8",
            "train.batch_size": "8",
            "train.max_epochs": "2",
            "data.manifest": dataset["manifest"],
            "data.templates": dataset["templates"],
            "data.out": str(tmp_path_factory.mktemp("run")),
        }
    )
    return cfg


def test_default_config_round_trip_keys():
    cfg = retfuse.default_config()
    assert "model.dim" in cfg and "train.learning_rate" in cfg
    assert all(isinstance(k, str) and isinstance(v, str) for k, v in cfg.items())


def test_generate_dataset_is_seeded(dataset, tmp_path):
    again = retfuse.generate_dataset(str(tmp_path), patients=20, exams=1, side=32, seed=5)
    with open(dataset["manifest"]) as a, open(again["manifest"]) as b:
        assert a.read() == b.read()


def test_note_generation_covers_labels():
    names = retfuse.label_vocabulary()
    none = {n: False for n in names}
    assert retfuse.generate_note(none)  # no-findings sentence
    one = dict(none, **{names[0]: True})
    assert retfuse.generate_note(one) != retfuse.generate_note(none)


def test_tokenize_round_trip():
    vocab = retfuse.build_vocab(["mild edema noted", "no findings"])
    ids, mask = retfuse.tokenize("mild edema", vocab, 10)
    assert len(ids) == len(mask) == 10
    assert sum(mask) >= 3  # cls + 2 words (+ sep)
    assert mask[: sum(mask)] == [1] * sum(mask)


def test_patient_split_is_disjoint(dataset):
    split = retfuse.patient_split(dataset["manifest"], seed=3)
    assert set(split.values()) == {"train", "val", "test"}
    counts = {s: list(split.values()).count(s) for s in ("train", "val", "test")}
    assert counts["train"] == 16 and counts["val"] == 2 and counts["test"] == 2


def test_recall_at_k_identity():
    embs = np.eye(4)
    assert retfuse.recall_at_k(embs, embs, [0, 1, 2, 3], 1) == 100.0


def test_contrastive_loss_aligned_below_shuffled():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 16))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    aligned = retfuse.contrastive_loss(a, a, 0.07)
    shuffled = retfuse.contrastive_loss(a, np.roll(a, 1, axis=0), 0.07)
    assert aligned < shuffled


def test_loss_weights_softmax():
    w = retfuse.loss_weights([0.0] * 6, [True] * 6)
    assert all(math.isclose(x, 1 / 6, rel_tol=1e-6) for x in w)
    w = retfuse.loss_weights([0.0] * 6, [True, False, False, False, False, True])
    assert math.isclose(w[0], 0.5, rel_tol=1e-6) and w[1] == 0.0


def test_train_and_evaluate(toy_config, dataset):
    result = retfuse.train(toy_config)
    assert result["stopped_epoch"] >= 1
    assert result["train_samples"] == 16

    report = retfuse.evaluate(result["checkpoint"], dataset["manifest"])
    assert report["retrieval"]["protocol"] == "paired"
    assert report["retrieval"]["gallery_size"] == 2
    assert 0.0 <= report["classification"]["sdrg_accuracy"] <= 100.0
    assert len(report["classification"]["confusion_sdrg"]) == 5

    zs = retfuse.evaluate(result["checkpoint"], dataset["manifest"], zero_shot=True)
    assert zs["retrieval"]["zero_shot"] is True
    assert zs["retrieval"]["gallery_size"] == 20
