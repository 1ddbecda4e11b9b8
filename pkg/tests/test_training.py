"""SGD trainer: determinism, reductions, noise injection, telemetry."""

import dataclasses
import math

import numpy as np
import pytest

from maxentlab.core import LinearSoftmaxModel
from maxentlab.datasets import LabeledDataset
from maxentlab.errors import DivergenceError, DomainError, ShapeError, ValidationError
from maxentlab.mixtures import GaussianMixture, sample
from maxentlab.training import (
    LrSchedule,
    TrainConfig,
    evaluate,
    gamma_sweep,
    init_model,
    inject_label_noise,
    train,
)


def blobs(separation=3.0, count=100, seed=1, var=0.1):
    mix = GaussianMixture.from_components(
        [
            (0.5, [separation, 0.0], var * np.eye(2)),
            (0.5, [-separation, 0.0], var * np.eye(2)),
        ]
    )
    return sample(mix, count, seed=seed)


def quick_cfg(**kw):
    base = dict(
        gamma=0.0,
        objective="maxent",
        lr=LrSchedule("constant", 0.1),
        epochs=20,
        seed=1,
        batch_size=32,
    )
    base.update(kw)
    return TrainConfig(**base)


class TestLrSchedule:
    def test_constant(self):
        assert LrSchedule("constant", 0.2).value(7, 100) == 0.2

    def test_step(self):
        sched = LrSchedule("step", 1.0, factor=0.5, interval=10)
        assert sched.value(0, 100) == 1.0
        assert sched.value(9, 100) == 1.0
        assert sched.value(10, 100) == 0.5
        assert sched.value(25, 100) == 0.25

    def test_linear(self):
        sched = LrSchedule("linear", 1.0)
        assert sched.value(0, 10) == 1.0
        assert sched.value(5, 10) == pytest.approx(0.5)
        assert sched.value(9, 10) == pytest.approx(0.1)


class TestInitModel:
    def test_zero_scale_gives_zero_weights(self):
        model = init_model(5, 10, 10, 0.0, seed=3)
        assert not model.weights.any()
        assert model.feature_map is None

    def test_deterministic(self):
        a = init_model(5, 10, 10, 0.01, seed=3)
        b = init_model(5, 10, 10, 0.01, seed=3)
        assert a.weights.tobytes() == b.weights.tobytes()

    def test_norm_bound_from_support(self):
        model = init_model(5, 10, 10, 0.01, seed=3)
        assert model.w_l2() <= 0.01 * math.sqrt(50)

    def test_identity_feature_map_when_square(self):
        model = init_model(4, 6, 6, 0.01, seed=0, with_feature_map=True)
        np.testing.assert_array_equal(model.feature_map, np.eye(6))

    def test_rectangular_feature_map(self):
        model = init_model(4, 3, 8, 0.05, seed=0)
        assert model.feature_map.shape == (3, 8)
        assert np.abs(model.feature_map).max() <= 0.05

    def test_bad_dims(self):
        with pytest.raises(ShapeError):
            init_model(1, 4, 4, 0.0, seed=0)


class TestInjectLabelNoise:
    def test_zero_fraction_identity(self, rng):
        ds = LabeledDataset(rng.normal(size=(50, 2)), rng.integers(0, 5, 50))
        out = inject_label_noise(ds, 0.0, seed=1)
        np.testing.assert_array_equal(out.labels, ds.labels)
        assert not out.noise_mask.any()

    def test_exact_count(self, rng):
        ds = LabeledDataset(rng.normal(size=(100, 2)), rng.integers(0, 5, 100))
        out = inject_label_noise(ds, 0.25, seed=1)
        assert out.noise_mask.sum() == 25

    def test_full_fraction_distinct_labels_all_move(self, rng):
        for trial in range(20):
            n = int(rng.integers(2, 40))
            perm = rng.permutation(n)
            ds = LabeledDataset(rng.normal(size=(n, 2)), perm)
            out = inject_label_noise(ds, 1.0, seed=trial)
            assert (out.labels != ds.labels).all()
            assert out.noise_mask.all()

    def test_preserves_multiset(self, rng):
        ds = LabeledDataset(rng.normal(size=(60, 2)), rng.integers(0, 5, 60))
        out = inject_label_noise(ds, 0.5, seed=2)
        assert sorted(out.labels.tolist()) == sorted(ds.labels.tolist())

    def test_deterministic(self, rng):
        ds = LabeledDataset(rng.normal(size=(60, 2)), rng.integers(0, 5, 60))
        a = inject_label_noise(ds, 0.4, seed=9)
        b = inject_label_noise(ds, 0.4, seed=9)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.noise_mask, b.noise_mask)

    def test_input_untouched(self, rng):
        ds = LabeledDataset(rng.normal(size=(30, 2)), rng.integers(0, 5, 30))
        before = ds.labels.copy()
        inject_label_noise(ds, 1.0, seed=0)
        np.testing.assert_array_equal(ds.labels, before)

    def test_fraction_domain(self, rng):
        ds = LabeledDataset(rng.normal(size=(4, 2)), rng.integers(0, 2, 4))
        with pytest.raises(DomainError):
            inject_label_noise(ds, 1.5, seed=0)


class TestTrain:
    def test_zero_epochs_no_op(self):
        ds = blobs()
        model = init_model(2, 2, 2, 0.01, seed=5)
        trained, history = train(model, ds, None, quick_cfg(epochs=0))
        assert trained.weights.tobytes() == model.weights.tobytes()
        assert len(history.records) == 1

    def test_separable_blobs_reach_full_accuracy(self):
        ds = blobs()
        cfg = quick_cfg(epochs=200, lr=LrSchedule("constant", 0.1))
        trained, _ = train(init_model(2, 2, 2, 0.0, seed=1), ds, None, cfg)
        assert evaluate(trained, ds).accuracy == 1.0

    def test_entropy_strictly_higher_with_gamma(self):
        # gamma = 1 run ends with strictly greater train entropy, every seed
        for seed in range(1, 7):
            ds = blobs(seed=seed)
            model = init_model(2, 2, 2, 0.0, seed=seed)
            cfg0 = quick_cfg(epochs=200, seed=seed)
            cfg1 = quick_cfg(epochs=200, seed=seed, gamma=1.0)
            _, h0 = train(model, ds, None, cfg0)
            _, h1 = train(model, ds, None, cfg1)
            assert h1.final.train_entropy > h0.final.train_entropy

    def test_bitwise_deterministic(self):
        ds = blobs()
        val = blobs(seed=2)
        cfg = quick_cfg(epochs=30)
        a, ha = train(init_model(2, 2, 2, 0.01, seed=4), ds, val, cfg)
        b, hb = train(init_model(2, 2, 2, 0.01, seed=4), ds, val, cfg)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert ha.records == hb.records

    def test_gamma_zero_equals_ce_bitwise(self):
        ds = blobs()
        model = init_model(2, 2, 2, 0.01, seed=4)
        m1, h1 = train(model, ds, None, quick_cfg(epochs=40, gamma=0.0, objective="maxent"))
        m2, h2 = train(model, ds, None, quick_cfg(epochs=40, gamma=0.0, objective="ce"))
        assert m1.weights.tobytes() == m2.weights.tobytes()
        assert h1.records == h2.records

    def test_weight_decay_geometric_on_zero_features(self):
        # zero features give zero gradient, so only decay acts on W
        n, lr, lam = 3, 0.1, 0.5
        ds = LabeledDataset(np.zeros((8, n)), np.zeros(8, dtype=int))
        w0 = np.full((2, n), 2.0)
        cfg = quick_cfg(epochs=1, batch_size=8, lr=LrSchedule("constant", lr), weight_decay=lam)
        trained, _ = train(LinearSoftmaxModel(w0.copy()), ds, None, cfg)
        np.testing.assert_allclose(trained.weights, w0 * (1 - lr * lam), rtol=1e-12)

    def test_history_record_count_and_epoch_zero(self):
        ds = blobs()
        cfg = quick_cfg(epochs=7)
        model = init_model(2, 2, 2, 0.0, seed=1)
        _, history = train(model, ds, ds, cfg)
        assert len(history.records) == 8
        first = history.records[0]
        assert first.epoch == 0
        assert first.w_l2 == 0.0
        assert first.train_ce == pytest.approx(math.log(2))

    def test_empty_val_leaves_fields_absent(self):
        ds = blobs()
        _, history = train(init_model(2, 2, 2, 0.0, seed=1), ds, None, quick_cfg(epochs=2))
        assert history.final.val_ce is None and history.final.val_accuracy is None

    def test_divergence_reports_epoch_and_batch(self):
        # an lr near float max overflows the weights within a few updates
        ds = blobs()
        cfg = quick_cfg(epochs=50, lr=LrSchedule("constant", 1e308))
        with np.errstate(over="ignore"), pytest.raises(DivergenceError) as err:
            train(init_model(2, 2, 2, 0.01, seed=1), ds, None, cfg)
        assert err.value.epoch is not None and err.value.batch is not None

    def test_incomplete_final_batch_used(self):
        # 10 samples at batch 8: second batch has 2 rows and still updates
        ds = blobs(count=10)
        cfg = quick_cfg(epochs=1, batch_size=8)
        model = init_model(2, 2, 2, 0.0, seed=1)
        trained, _ = train(model, ds, None, cfg)
        assert trained.weights.any()

    def test_invalid_config_rejected(self):
        with pytest.raises(ValidationError):
            quick_cfg(objective="banana").validated()
        with pytest.raises(ValidationError):
            quick_cfg(gamma=-0.5).validated()


class TestEvaluate:
    def test_uniform_model_predicts_class_zero(self, rng):
        ds = LabeledDataset(rng.normal(size=(200, 3)), rng.integers(0, 4, 200))
        rep = evaluate(LinearSoftmaxModel(np.zeros((4, 3))), ds)
        assert rep.accuracy == pytest.approx((ds.labels == 0).mean())
        assert rep.top_prob_mean == pytest.approx(0.25)

    def test_saturated_model(self):
        # rows +-(10, 0) give a logit gap of at least 40 on the blob data
        ds = blobs()
        model = LinearSoftmaxModel(np.array([[10.0, 0.0], [-10.0, 0.0]]))
        rep = evaluate(model, ds)
        assert rep.accuracy == 1.0
        assert rep.top_prob_mean >= 1 - 1e-6

    def test_matches_per_sample_loop(self, rng):
        from maxentlab.core import entropy, predict_proba

        model = LinearSoftmaxModel(rng.normal(size=(4, 3)))
        ds = LabeledDataset(rng.normal(size=(50, 3)), rng.integers(0, 4, 50))
        rep = evaluate(model, ds)
        probs = [predict_proba(model, x) for x in ds.features]
        assert rep.accuracy == pytest.approx(
            np.mean([int(np.argmax(p) == y) for p, y in zip(probs, ds.labels)])
        )
        assert rep.mean_ce == pytest.approx(
            np.mean([-math.log(p[y]) for p, y in zip(probs, ds.labels)]), rel=1e-12
        )
        assert rep.mean_entropy == pytest.approx(
            np.mean([entropy(p) for p in probs]), rel=1e-12
        )
        assert rep.top_prob_mean == pytest.approx(np.mean([p.max() for p in probs]), rel=1e-12)
        assert rep.top_prob_histogram.sum() == 50


class TestGammaSweep:
    def test_single_gamma_equals_plain_ce(self):
        tr, va = blobs(seed=1), blobs(seed=2)
        cfg = quick_cfg(epochs=30)
        rows = gamma_sweep(tr, va, cfg, [0.0])
        trained, _ = train(init_model(2, 2, 2, 0.0, seed=1), tr, va, cfg)
        rep = evaluate(trained, va)
        assert rows[0].gamma == 0.0
        assert rows[0].val_accuracy == rep.accuracy
        assert rows[0].w_l2 == trained.w_l2()

    def test_duplicate_gammas_identical(self):
        tr, va = blobs(seed=1), blobs(seed=2)
        rows = gamma_sweep(tr, va, quick_cfg(epochs=15), [0.5, 0.5])
        assert rows[0] == dataclasses.replace(rows[1])

    def test_empty_gamma_list(self):
        tr, va = blobs(seed=1), blobs(seed=2)
        with pytest.raises(DomainError):
            gamma_sweep(tr, va, quick_cfg(), [])

    def test_divergence_tagged_with_gamma(self):
        tr, va = blobs(seed=1), blobs(seed=2)
        cfg = quick_cfg(epochs=50, lr=LrSchedule("constant", 1e308), init_scale=0.01)
        with np.errstate(over="ignore"), pytest.raises(DivergenceError) as err:
            gamma_sweep(tr, va, cfg, [0.25])
        assert "gamma=0.25" in str(err.value)
