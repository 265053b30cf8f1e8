from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import dcnn

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_conv2d_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    y = dcnn.conv2d(x, w, "valid")
    expect = np.zeros((3, 3, 3))
    for o in range(3):
        for i in range(3):
            for j in range(3):
                expect[o, i, j] = np.sum(w[o] * x[:, i : i + 3, j : j + 3])
    np.testing.assert_allclose(y, expect, rtol=1e-12, atol=1e-12)


def test_double_conv_paths_agree():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 7, 7))
    meta = rng.standard_normal((3, 2, 4, 4))
    a = dcnn.double_conv(x, meta, 3, 2, path="reference")
    b = dcnn.double_conv(x, meta, 3, 2, path="twostep")
    assert a.shape == (3, 7, 7)
    assert np.array_equal(a, b)
    f = dcnn.double_conv(x.astype(np.float32), meta.astype(np.float32), 3, 1)
    assert f.dtype == np.float32 and f.shape == (12, 7, 7)


def test_plain_reduction_and_concat():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 6, 6))
    meta = rng.standard_normal((2, 2, 3, 3))
    assert np.array_equal(dcnn.double_conv(x, meta, 3, 1), dcnn.conv2d(x, meta, "same"))
    meta = rng.standard_normal((2, 2, 5, 5))
    bank = dcnn.expand_meta_filters(meta, 3)
    assert bank.shape == (18, 2, 3, 3)
    assert np.array_equal(dcnn.double_conv(x, meta, 3, 1), dcnn.conv2d(x, bank, "same"))


def test_variants_and_multiplier():
    assert dcnn.classify_variant(3, 3, 1) == "PlainCNN"
    assert dcnn.classify_variant(4, 3, 1) == "ConcatDCNN"
    assert dcnn.classify_variant(4, 3, 2) == "MaxoutDCNN"
    assert dcnn.concat_channel_multiplier(6, 3) == 4
    with pytest.raises(dcnn.SpecError):
        dcnn.double_conv(np.zeros((1, 5, 5)), np.zeros((1, 1, 5, 5)), 3, 2)


def test_correlation():
    a = np.zeros((1, 3, 3))
    b = np.zeros((1, 3, 3))
    a[0, 1, 1] = 1
    b[0, 1, 2] = 1
    assert dcnn.translation_correlation(a, b, 1) == 1.0
    bank = np.random.default_rng(3).standard_normal((4, 2, 3, 3))
    stats = dcnn.avg_max_translation_correlation(bank, 1)
    assert -1 <= stats["mean"] <= 1 and len(stats["maxima"]) == 4
    base = dcnn.gaussian_baseline([4, 2, 3, 3], 1, 0)
    assert base == dcnn.gaussian_baseline([4, 2, 3, 3], 1, 0)


def test_arch_notation():
    cnn = dcnn.load_config(CONFIGS / "cnn.cfg")
    dc = dcnn.load_config(CONFIGS / "dcnn.cfg")
    assert dcnn.relative_params(dc, cnn) == Fraction(16, 9)
    assert dc.layer_sizes() == [128] * 8
    assert dcnn.parse_config(dc.render_config()) == dc
    with pytest.raises(dcnn.ParseError) as info:
        dcnn.parse_network(["DC-128-3-4-2"], [3, 32, 32])
    assert info.value.column == 8


def test_train_eval_analyze(tmp_path):
    arch = dcnn.load_config(CONFIGS / "toy_maxout_dcnn.cfg")
    data = "synthetic:per_class=20,test_per_class=10"
    rows = dcnn.train(arch, tmp_path, data=data, seed=1, epochs=2, batch_size=10,
                      record_time=False)
    assert [r["epoch"] for r in rows] == [1, 2]
    assert (tmp_path / "metrics.csv").read_text().startswith("epoch,train_loss")
    err = dcnn.evaluate_checkpoint(tmp_path / "checkpoint")
    assert 0 <= err <= 1
    records, warnings, csv = dcnn.analyze_checkpoint(tmp_path / "checkpoint", 1)
    assert len(records) == 2 and not warnings
    assert csv.startswith("layer,N,k,")
    with pytest.raises(dcnn.IoError):
        dcnn.evaluate_checkpoint(tmp_path / "missing")
