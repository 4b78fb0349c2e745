import numpy as np
import pytest

from nle_adapt import pipeline
from nle_adapt.exceptions import PreconditionError
from nle_adapt.synth import (
    DEFAULT_BAYES_ERROR,
    Dataset,
    DomainShiftSpec,
    estimate_bayes_error,
    generate,
    generate_paired,
    generate_source_holdout,
    invert_shift,
)

SMALL = dict(source_per_class=300, adapt_per_class=50, test_per_class=200)


def test_label_balance():
    spec = DomainShiftSpec(seed=1, **SMALL)
    src, adapt, test = generate(spec)
    assert src.class_counts(10).tolist() == [300] * 10
    assert adapt.class_counts(10).tolist() == [50] * 10
    assert test.class_counts(10).tolist() == [200] * 10


def test_same_seed_bit_identical():
    a = generate(DomainShiftSpec(seed=4, **SMALL))
    b = generate(DomainShiftSpec(seed=4, **SMALL))
    for x, y in zip(a, b):
        assert np.array_equal(x.features, y.features)
        assert np.array_equal(x.labels, y.labels)


def test_different_seeds_differ():
    a = generate(DomainShiftSpec(seed=4, **SMALL))[0]
    b = generate(DomainShiftSpec(seed=5, **SMALL))[0]
    assert not np.array_equal(a.features, b.features)


def test_inverse_shift_recovers_class_means():
    spec = DomainShiftSpec(seed=0, scale=1.3, rotation_deg=35.0)
    src, adapt, test = generate(spec)
    back = invert_shift(spec, test.features)
    for c in range(spec.num_classes):
        tgt_mean = back[test.labels == c].mean(axis=0)
        src_mean = src.features[src.labels == c].mean(axis=0)
        se = spec.sigma * np.sqrt(1 / spec.test_per_class + 1 / spec.source_per_class)
        assert np.all(np.abs(tgt_mean - src_mean) <= 3 * se + 1e-12)


def test_domains_are_unpaired():
    spec = DomainShiftSpec(seed=3, **SMALL)
    src, adapt, _ = generate(spec)
    back = invert_shift(spec, adapt.features)
    d = np.min(((back[:, None, :] - src.features[None, :, :]) ** 2).sum(axis=2), axis=1)
    assert np.all(d > 1e-12)


def test_paired_rows_align():
    spec = DomainShiftSpec(seed=3, **SMALL)
    s, t = generate_paired(spec)
    assert len(s) == len(t)
    np.testing.assert_allclose(invert_shift(spec, t.features), s.features, atol=1e-12)


def test_holdout_is_fresh():
    spec = DomainShiftSpec(seed=3, **SMALL)
    assert not np.array_equal(generate_source_holdout(spec).features[:5],
                              generate(spec)[0].features[:5])


@pytest.mark.parametrize("bad", [
    dict(num_classes=1), dict(feature_dim=0), dict(sigma=0.0), dict(scale=-1.0),
    dict(source_per_class=0), dict(class_means=[[0.0]]), dict(translation=[1.0]),
])
def test_invalid_spec(bad):
    with pytest.raises(PreconditionError):
        DomainShiftSpec(**bad)


def test_csv_round_trip(tmp_path):
    spec = DomainShiftSpec(seed=0, **SMALL)
    src = generate(spec)[0]
    src.to_csv(tmp_path / "source.csv", spec)
    back = Dataset.from_csv(tmp_path / "source.csv")
    assert np.array_equal(back.features, src.features)
    assert np.array_equal(back.labels, src.labels)
    assert back.domain_tag == "source"
    header = (tmp_path / "source.csv").read_text().splitlines()[0]
    assert header == ",".join([f"f{j}" for j in range(8)] + ["label"])
    import json
    side = json.loads((tmp_path / "source.csv.json").read_text())
    assert DomainShiftSpec(**side["spec"]) == spec


class TestBayesError:
    def test_identical_classes(self):
        spec = DomainShiftSpec(num_classes=2, feature_dim=3, class_means=np.zeros((2, 3)))
        err, se = estimate_bayes_error(spec, 40_000)
        assert abs(err - 0.5) <= 0.01
        assert se > 0

    def test_far_apart_classes(self):
        means = np.zeros((2, 3))
        means[1, 0] = 100.0
        err, _ = estimate_bayes_error(DomainShiftSpec(num_classes=2, feature_dim=3,
                                                      class_means=means), 20_000)
        assert err <= 0.001

    def test_default_task_constant(self):
        err, se = estimate_bayes_error(DomainShiftSpec(), 200_000, seed=1)
        assert abs(err - DEFAULT_BAYES_ERROR) <= 3 * se + 1e-4
        assert err < 0.03

    def test_needs_enough_samples(self):
        with pytest.raises(PreconditionError):
            estimate_bayes_error(DomainShiftSpec(), 100)


@pytest.mark.slow
def test_null_shift_keeps_error():
    """Source model's target error tracks its source error when nothing shifts."""
    gaps = []
    for seed in range(10):
        spec = DomainShiftSpec(seed=seed).identity()
        src, _, test = generate(spec)
        net = pipeline.train_source(src, pipeline.default_source_config(seed))
        gaps.append(pipeline.evaluate(net, test).error_rate
                    - pipeline.evaluate(net, generate_source_holdout(spec)).error_rate)
    assert abs(np.mean(gaps)) <= 0.02


@pytest.mark.slow
def test_default_shift_hurts_unadapted_model():
    gaps = []
    for seed in range(10):
        spec = DomainShiftSpec(seed=seed)
        src, _, test = generate(spec)
        net = pipeline.train_source(src, pipeline.default_source_config(seed))
        gaps.append(pipeline.evaluate(net, test).error_rate
                    - pipeline.evaluate(net, generate_source_holdout(spec)).error_rate)
    assert np.mean(gaps) >= 0.05
