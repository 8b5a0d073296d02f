import collections
import json

import numpy as np
import pytest

from pareto_fuse.datagen import (Batch, DEFAULT_TARGET_RATES, ImpressionLog,
                                 ObjectiveSet, check_funnel, generate_universe,
                                 read_jsonl, stream_impressions, write_jsonl)
from pareto_fuse.errors import ConfigurationError


def test_objective_set_rejects_duplicates():
    with pytest.raises(ConfigurationError):
        ObjectiveSet(names=("ctr", "ctr"))


def test_objective_set_rejects_cycles():
    with pytest.raises(ConfigurationError):
        ObjectiveSet(names=("a", "b"), funnel_edges=(("a", "b"), ("b", "a")))


def test_universe_deterministic_in_seed():
    a = generate_universe(5, 50, 30, 4)
    b = generate_universe(5, 50, 30, 4)
    for ua, ub in zip(a.users, b.users):
        assert np.array_equal(ua.latent, ub.latent)
        assert ua.activity == ub.activity
    for name in a.objectives.names:
        assert np.array_equal(a.affinity[name], b.affinity[name])
        assert a.bias[name] == b.bias[name]


def test_saturated_negative_bias_kills_positives():
    uni = generate_universe(6, 100, 60, 4)
    uni.bias["wtr"] = -50.0
    logs = stream_impressions(uni, 7, 5000)
    assert sum(l.labels["wtr"] for l in logs) == 0


def test_empirical_rates_near_targets(small_universe):
    logs = stream_impressions(small_universe, 31, 100000)
    batch = Batch.from_logs(logs, small_universe.objectives)
    rates = batch.labels.mean(axis=0)
    for name, rate in zip(small_universe.objectives.names, rates):
        target = DEFAULT_TARGET_RATES[name]
        assert abs(rate - target) / target < 0.20, (name, rate, target)


def test_positive_density_spread_at_least_5x(small_stream):
    rates = small_stream.labels.mean(axis=0)
    assert rates.max() / rates.min() >= 5.0


def test_stream_empty():
    uni = generate_universe(6, 10, 10, 4)
    assert stream_impressions(uni, 1, 0) == []


def test_funnel_invariant_every_record(small_universe):
    logs = stream_impressions(small_universe, 17, 3000)
    for log in logs:
        assert check_funnel(log.labels, small_universe.objectives)
        if log.labels["ctr"] == 0:
            assert log.labels["inlvtr"] == 0 and log.labels["inevtr"] == 0


def test_exposure_heterogeneity(small_universe):
    logs = stream_impressions(small_universe, 23, 50000)
    counts = collections.Counter(l.user_id for l in logs)
    c = np.array(list(counts.values()), dtype=float)
    assert c.std() / c.mean() > 0.3


def test_stream_reproducible_bytes(small_universe, tmp_path):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(stream_impressions(small_universe, 77, 500), p1)
    write_jsonl(stream_impressions(small_universe, 77, 500), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_jsonl_roundtrip(small_universe, tmp_path):
    logs = stream_impressions(small_universe, 78, 50)
    path = tmp_path / "s.jsonl"
    write_jsonl(logs, path)
    back = read_jsonl(path)
    assert len(back) == 50
    for a, b in zip(logs, back):
        assert a.user_id == b.user_id and a.item_id == b.item_id
        assert a.labels == b.labels and a.ordinal == b.ordinal
        assert np.array_equal(a.dense_features, b.dense_features)
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"user_id", "item_id", "features", "labels", "ordinal"}


def test_ordinals_monotone(small_stream):
    assert np.array_equal(np.diff(small_stream.ordinals), np.ones(len(small_stream) - 1))


def test_invalid_counts_rejected():
    with pytest.raises(ConfigurationError):
        generate_universe(1, 0, 10, 4)
