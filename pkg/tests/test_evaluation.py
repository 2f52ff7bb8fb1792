import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohgram.errors import ChanceIsCertainty, EmptyManifest, MissingClass, NonFiniteLoss, TooFewSubjects
from cohgram.evaluation import (
    EvaluationReport,
    Hyper,
    SplitPlan,
    cohens_kappa,
    evaluate,
    make_splits,
    train_baseline,
)


def manifest(n, n_subjects=5):
    return [{"subject_id": f"s{i % n_subjects:02d}", "label": i % 3, "file": f"{i}.bin"} for i in range(n)]


def separable(rng, per_class=10, d=20):
    centers = 4.0 * np.eye(3, d)
    x = np.vstack([centers[c] + 0.3 * rng.standard_normal((per_class, d)) for c in range(3)])
    y = np.repeat(np.arange(3), per_class)
    return x, y


class TestKappa:
    def test_reported_values(self):
        assert cohens_kappa(71.6, 33.33) == pytest.approx(0.574, abs=0.001)
        assert cohens_kappa(93.1, 33.33) == pytest.approx(0.897, abs=0.001)

    def test_fixed_points(self):
        assert cohens_kappa(33.33, 33.33) == 0.0
        assert cohens_kappa(100.0, 33.33) == 1.0

    def test_certain_chance(self):
        with pytest.raises(ChanceIsCertainty):
            cohens_kappa(50.0, 100.0)

    @given(p_cl=st.floats(0, 100), p_ch=st.floats(0, 99.9))
    def test_bounds(self, p_cl, p_ch):
        k = cohens_kappa(p_cl, p_ch)
        assert -p_ch / (100 - p_ch) - 1e-12 <= k <= 1 + 1e-12
        assert cohens_kappa(p_ch, p_ch) == 0.0


class TestSplits:
    def test_loso_fifteen_subjects(self):
        m = manifest(90, 15)
        plan = make_splits(m, "loso")
        assert len(plan.folds) == 15
        for (train, test), subj in zip(plan.folds, sorted({e["subject_id"] for e in m})):
            assert {m[i]["subject_id"] for i in test} == {subj}
            assert not ({m[i]["subject_id"] for i in train} & {subj})

    @pytest.mark.parametrize("n, sizes", [(100, [10] * 10), (101, [10] * 9 + [11])])
    def test_kfold_sizes(self, n, sizes):
        plan = make_splits(manifest(n), "kfold", seed=3, k=10)
        assert sorted(len(te) for _, te in plan.folds) == sorted(sizes)

    def test_kfold_stratified(self):
        plan = make_splits(manifest(90), "kfold", seed=1, k=10)
        for _, test in plan.folds:
            assert sorted(np.bincount([i % 3 for i in test], minlength=3)) == [3, 3, 3]

    def test_deterministic(self):
        m = manifest(57)
        assert make_splits(m, "kfold", 9).to_dict() == make_splits(m, "kfold", 9).to_dict()
        assert make_splits(m, "kfold", 9).to_dict() != make_splits(m, "kfold", 10).to_dict()

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(10, 200), k=st.integers(2, 10), seed=st.integers(0, 1000), subjects=st.integers(2, 9))
    def test_partition_property(self, n, k, seed, subjects):
        m = manifest(n, subjects)
        for plan in (make_splits(m, "kfold", seed, k), make_splits(m, "loso", seed)):
            tests = [i for _, te in plan.folds for i in te]
            assert sorted(tests) == list(range(n))
            for train, test in plan.folds:
                assert sorted(train + test) == list(range(n))
            if plan.scheme == "kfold":
                sizes = [len(te) for _, te in plan.folds]
                assert max(sizes) - min(sizes) <= 1

    def test_errors(self):
        with pytest.raises(TooFewSubjects):
            make_splits(manifest(9, 1), "loso")
        with pytest.raises(EmptyManifest):
            make_splits([], "kfold")

    def test_failed_entries_skipped(self):
        m = manifest(20) + [{"subject_id": "x", "label": 0, "status": "failed"}]
        assert len(make_splits({"entries": m}, "loso").folds) == 5


class TestBaseline:
    def test_separable_training_accuracy(self, rng):
        x, y = separable(rng)
        model = train_baseline(x, y)
        assert np.mean(model.predict(x) == y) >= 0.99

    def test_loss_non_increasing(self, rng):
        x, y = separable(rng)
        x = x + rng.standard_normal(x.shape)  # overlapping classes
        hist = train_baseline(x, y, Hyper(epochs=200)).loss_history
        assert np.all(np.diff(hist) <= 1e-12)

    def test_one_example_per_class(self, rng):
        x = rng.standard_normal((3, 50))
        y = np.array([0, 1, 2])
        assert np.array_equal(train_baseline(x, y).predict(x), y)

    def test_heavy_regularisation(self, rng):
        x, y = separable(rng)
        model = train_baseline(x, y, Hyper(l2=1e9))
        assert np.linalg.norm(model.weights[:, :-1]) < 1e-3
        np.testing.assert_allclose(model.predict_proba(x), 1 / 3, atol=1e-3)

    def test_missing_class(self, rng):
        with pytest.raises(MissingClass):
            train_baseline(rng.standard_normal((4, 3)), [0, 1, 0, 1])

    def test_blowup(self, rng):
        x, y = separable(rng)
        with pytest.raises(NonFiniteLoss):
            train_baseline(x, y, Hyper(learning_rate=1e150, epochs=50))

    def test_deterministic(self, rng):
        x, y = separable(rng)
        assert np.array_equal(train_baseline(x, y, seed=4).weights, train_baseline(x, y, seed=4).weights)


class TestEvaluate:
    def test_separable_loso(self, rng):
        x, y = separable(rng, per_class=15)
        m = [{"subject_id": f"s{i % 5}", "label": int(c)} for i, c in enumerate(y)]
        report = evaluate(make_splits(m, "loso"), x, y)
        assert report.mean_accuracy >= 90
        assert np.array(report.confusion).sum(axis=1).tolist() == np.bincount(y).tolist()

    def test_degenerate_plan(self, rng):
        x, y = separable(rng)
        x = x + 2 * rng.standard_normal(x.shape)
        idx = list(range(len(y)))
        report = evaluate(SplitPlan("custom", [(idx, idx)]), x, y, seed=0)
        train_acc = 100 * np.mean(train_baseline(x, y, seed=0).predict(x) == y)
        assert report.per_fold_accuracy == [pytest.approx(train_acc)]

    def test_report_self_consistency(self, rng):
        x, y = separable(rng)
        x = x + 3 * rng.standard_normal(x.shape)
        m = [{"subject_id": f"s{i % 6}", "label": int(c)} for i, c in enumerate(y)]
        r = evaluate(make_splits(m, "loso"), x, y)
        acc = np.array(r.per_fold_accuracy)
        assert r.mean_accuracy == pytest.approx(acc.mean(), abs=1e-9)
        assert r.std_accuracy == pytest.approx(acc.std(ddof=0), abs=1e-9)
        assert r.kappa == pytest.approx(cohens_kappa(acc.mean(), 33.33), abs=1e-9)
        back = json.loads(r.to_json())
        assert EvaluationReport(**back) == r
