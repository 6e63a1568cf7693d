import math

import numpy as np
import pytest

import agcn


def small_config(**overrides):
    c = agcn.SyntheticConfig()
    c.class_count = 4
    c.task_count = 2
    c.train_per_task = 80
    c.test_per_task = 40
    c.feature_dim = 6
    c.target = agcn.benchmark_target(4, 2, 0.05, 0.5)
    c.seed = 3
    for k, v in overrides.items():
        setattr(c, k, v)
    return c


def test_losses_hand_values():
    value, grad = agcn.cls_loss([1, 0], [0.5, 0.5])
    assert value == pytest.approx(2 * math.log(2))
    assert grad == pytest.approx([-2.0, 2.0])
    value, _ = agcn.dst_loss([0.5], [0.5])
    assert value == pytest.approx(math.log(2))
    value, grad = agcn.gph_loss(np.zeros((1, 2)), np.array([[3.0, 4.0]]))
    assert value == 25.0
    np.testing.assert_array_equal(grad, [[6.0, 8.0]])


def test_domain_errors_surface_as_python_exceptions():
    with pytest.raises(agcn.DomainError):
        agcn.cls_loss([1], [1.5])
    with pytest.raises(agcn.Error):
        agcn.gph_loss(np.zeros((2, 2)), np.zeros((1, 2)))


def test_acm_matches_numpy_counts():
    rng = np.random.default_rng(5)
    y = (rng.random((200, 4)) < 0.4).astype(float)
    stats = agcn.LabelStats(4, 0)
    for chunk in np.array_split(y, 7):
        stats.observe_batch(chunk)
    b = agcn.new_new_block(stats)
    counts = y.T @ y
    expected = np.where(np.diag(counts)[None, :] > 0, counts / np.maximum(np.diag(counts), 1), 0.0)
    np.fill_diagonal(expected, 1.0)
    np.testing.assert_allclose(b, expected, rtol=0, atol=1e-15)
    assert stats.examples_seen == 200
    assert stats.class_count(2) == int(y[:, 2].sum())
    with pytest.raises(IndexError):
        stats.class_count(4)

    a = agcn.assemble_from_stats(None, stats)
    assert a.boundary == 0
    np.testing.assert_array_equal(a.raw, b)
    np.testing.assert_allclose(a.row_normalized().sum(axis=1), 1.0)
    back = agcn.CorrelationMatrix.from_json(a.to_json(["a", "b", "c", "d"], 1))
    np.testing.assert_array_equal(back.raw, a.raw)


def test_metrics_hand_values():
    r = agcn.evaluate(np.array([[0.9, 0.1], [0.8, 0.6]]), np.array([[1.0, 0.0], [1.0, 1.0]]), 0.7)
    assert r["OP"] == 1.0
    assert r["OR"] == pytest.approx(2 / 3)
    assert r["OF1"] == pytest.approx(0.8)
    assert r["CF1"] == pytest.approx(0.5)
    assert agcn.average_precision([0.9, 0.8, 0.7], [True, False, True]) == pytest.approx(5 / 6)
    assert agcn.forgetting({(1, 1): 0.8, (2, 1): 0.5, (2, 2): 0.7}, 2) == pytest.approx(0.3)


def test_split_toy_corpus():
    examples = [
        agcn.Example("a", [0.0], [0]),
        agcn.Example("ab", [0.0], [0, 1]),
        agcn.Example("ac", [0.0], [0, 2]),
        agcn.Example("c", [0.0], [2]),
    ]
    tasks, counts = agcn.split_dataset(examples, [[0, 1], [2]])
    assert counts == [(2, 0), (1, 1)]
    assert sum(len(t.train) for t in tasks) == 4


def test_generator_is_deterministic_and_validated():
    streams = agcn.generate_synthetic(small_config())
    assert [s.task_id for s in streams] == [1, 2]
    assert streams == agcn.generate_synthetic(small_config())
    agcn.validate_streams(streams)
    with pytest.raises(agcn.ConfigError):
        agcn.generate_synthetic(small_config(target=agcn.benchmark_target(4, 2, 0.95, 0.01)))


def test_training_run_end_to_end():
    streams = agcn.generate_synthetic(small_config())
    cfg = agcn.TrainConfig()
    cfg.set("feature_dim", "8")
    cfg.set("backbone_hidden", "12")
    cfg.set("learning_rate", "0.01")
    cfg.batch_size = 8
    result = agcn.run(streams, cfg)
    assert 0.0 <= result.final_map <= 1.0
    assert result.examples_seen == 160
    assert result.max_touches == 1
    assert len(result.acms) == 2
    assert result.acms[1].boundary == 2
    assert result.metrics_csv.splitlines()[0] == "after_task,eval_task,mAP,CF1,OF1"
    assert result.forgetting("mAP", 2) == pytest.approx(
        result.map_table[(1, 1)] - result.map_table[(2, 1)]
    )
    again = agcn.run(streams, cfg)
    assert again.losses_csv == result.losses_csv

    cfg.mode = "finetune"
    assert cfg.mode == "finetune"
    with pytest.raises(agcn.ConfigError):
        cfg.mode = "sideways"


def test_benchmark_preset_shapes():
    data, train = agcn.benchmark_preset(0)
    assert (data.class_count, data.task_count, data.feature_dim) == (12, 4, 32)
    assert (data.train_per_task, data.test_per_task) == (1000, 400)
    assert train.mode == "agcn"
