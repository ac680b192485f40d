"""Kernel SVM against scikit-learn's reference solver, plus the voting
and baseline machinery."""

import json

import numpy as np
import pytest
from sklearn.svm import SVC

from htim.errors import DataError, NumericError
from htim.svm import (KernelConfig, MajorityBaseline, Prediction,
                      RandomBaseline, load_model, majority_vote,
                      model_from_json_dict, model_to_json_dict, predict,
                      predict_many, rbf_matrix, save_model, train_svm)


def _blobs(rng, n_per, centers, spread=0.6):
    xs, ys = [], []
    for label, c in centers.items():
        xs.append(rng.normal(0, spread, size=(n_per, len(c))) + np.array(c))
        ys += [label] * n_per
    return np.vstack(xs), ys


class TestBinaryAgainstSklearn:
    @pytest.mark.parametrize("c_val,gamma", [(1.0, "scale"), (0.5, 0.8),
                                             (10.0, 0.1)])
    def test_decision_function_matches(self, c_val, gamma):
        rng = np.random.default_rng(42)
        x, y = _blobs(rng, 25, {"a": (0, 0), "b": (2.0, 1.0)}, spread=1.0)
        cfg = KernelConfig(c=c_val, gamma=gamma, tol=1e-8)
        model = train_svm(x, y, cfg)
        ref = SVC(C=c_val, gamma=gamma, tol=1e-8)
        ref.fit(x, y)
        grid = rng.normal(0.5, 1.5, size=(40, 2))
        mine = model.machines[0].decision(model._prep(grid),
                                          model.gamma_value)
        theirs = ref.decision_function(grid)
        # sklearn votes for classes_[1] on positive decisions; machine 0
        # votes for its pos class: align orientation before comparing
        if model.machines[0].pos == ref.classes_[0]:
            mine = -mine
        np.testing.assert_allclose(mine, theirs, atol=2e-4)

    def test_duals_respect_box(self):
        rng = np.random.default_rng(7)
        x, y = _blobs(rng, 30, {"a": (0, 0), "b": (1.0, 0.5)}, spread=1.2)
        c_val = 2.5
        model = train_svm(x, y, KernelConfig(c=c_val, tol=1e-8))
        for m in model.machines:
            alphas = np.abs(m.coef)
            assert np.all(alphas > 0)  # zeros are pruned from the sv set
            assert np.all(alphas <= c_val + 1e-9)

    def test_xor_needs_rbf_and_gets_it(self):
        rng = np.random.default_rng(3)
        pts, labels = [], []
        for sx in (-1, 1):
            for sy in (-1, 1):
                cluster = rng.normal(0, 0.15, size=(20, 2)) + [sx, sy]
                pts.append(cluster)
                labels += ["odd" if sx * sy < 0 else "even"] * 20
        x = np.vstack(pts)
        model = train_svm(x, labels, KernelConfig())
        preds = [p.label for p in predict_many(model, x)]
        assert preds == labels


class TestMulticlass:
    def test_ovo_machine_count_and_separable_accuracy(self):
        rng = np.random.default_rng(11)
        x, y = _blobs(rng, 20, {"a": (0, 0), "b": (4, 0), "c": (0, 4),
                                "d": (4, 4)}, spread=0.4)
        model = train_svm(x, y, KernelConfig())
        assert len(model.machines) == 6  # 4 choose 2
        preds = [p.label for p in predict_many(model, x)]
        assert preds == y

    def test_ovr_machine_count(self):
        rng = np.random.default_rng(12)
        x, y = _blobs(rng, 15, {"a": (0, 0), "b": (4, 0), "c": (0, 4)},
                      spread=0.4)
        model = train_svm(x, y, KernelConfig(multiclass="ovr"))
        assert len(model.machines) == 3
        assert all(m.neg == "(rest)" for m in model.machines)
        preds = [p.label for p in predict_many(model, x)]
        assert preds == y

    def test_permutation_invariance_is_exact(self):
        rng = np.random.default_rng(13)
        x, y = _blobs(rng, 18, {"a": (0, 0), "b": (2.5, 1), "c": (1, 3)},
                      spread=0.9)
        model_a = train_svm(x, y, KernelConfig())
        perm = rng.permutation(len(y))
        model_b = train_svm(x[perm], [y[int(i)] for i in perm],
                            KernelConfig())
        probe = rng.normal(1.0, 1.5, size=(30, 2))
        pa = predict_many(model_a, probe)
        pb = predict_many(model_b, probe)
        for a, b in zip(pa, pb):
            assert a.label == b.label
            assert a.votes == b.votes
            assert a.margins == b.margins  # byte-identical floats

    def test_standardize_changes_geometry_not_api(self):
        rng = np.random.default_rng(14)
        x, y = _blobs(rng, 20, {"a": (0, 0), "b": (0.003, 0)},
                      spread=0.001)
        x[:, 1] *= 1000.0  # wildly different column scales
        plain = train_svm(x, y, KernelConfig())
        scaled = train_svm(x, y, KernelConfig(standardize=True))
        acc = lambda m: np.mean([p.label == t
                                 for p, t in zip(predict_many(m, x), y)])
        assert acc(scaled) >= acc(plain)
        assert scaled.feature_mean is not None

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            train_svm(np.zeros((4, 2)), ["a"] * 4, KernelConfig())

    def test_nonfinite_rejected(self):
        x = np.zeros((4, 2))
        x[1, 1] = np.nan
        with pytest.raises(NumericError):
            train_svm(x, ["a", "a", "b", "b"], KernelConfig())


class TestPersistence:
    def test_json_round_trip_identical_predictions(self, tmp_path):
        rng = np.random.default_rng(15)
        x, y = _blobs(rng, 12, {"a": (0, 0), "b": (3, 0), "c": (0, 3)})
        model = train_svm(x, y, KernelConfig(standardize=True))
        path = tmp_path / "model.json"
        save_model(model, path)
        clone = load_model(path)
        probe = rng.normal(1, 2, size=(25, 2))
        for a, b in zip(predict_many(model, probe),
                        predict_many(clone, probe)):
            assert a.label == b.label and a.margins == b.margins

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(16)
        x, y = _blobs(rng, 10, {"a": (0, 0), "b": (3, 0)})
        model = train_svm(x, y, KernelConfig())
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_guard(self):
        rng = np.random.default_rng(17)
        x, y = _blobs(rng, 8, {"a": (0, 0), "b": (2, 0)})
        payload = model_to_json_dict(train_svm(x, y, KernelConfig()))
        assert payload["format"] == "htim-svm"
        bad = dict(payload)
        bad["version"] = 99
        with pytest.raises(DataError):
            model_from_json_dict(bad)


class TestVoting:
    def test_majority_vote_counts(self):
        preds = [Prediction("a", margins={"a": 1.0, "b": 0.1}),
                 Prediction("a", margins={"a": 0.5, "b": 0.2}),
                 Prediction("b", margins={"a": 0.1, "b": 2.0})]
        assert majority_vote(preds) == "a"

    def test_majority_vote_tie_uses_mean_margin(self):
        preds = [Prediction("a", margins={"a": 0.2, "b": 0.0}),
                 Prediction("b", margins={"a": 0.0, "b": 3.0})]
        assert majority_vote(preds) == "b"

    def test_majority_vote_full_tie_lexicographic(self):
        preds = [Prediction("b", margins={"a": 1.0, "b": 1.0}),
                 Prediction("a", margins={"a": 1.0, "b": 1.0})]
        assert majority_vote(preds) == "a"

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            majority_vote([])


class TestBaselines:
    def test_majority_baseline_modal_class(self):
        clf = MajorityBaseline()
        clf.fit(np.zeros((5, 1)), ["a", "b", "b", "b", "a"])
        preds = clf.predict_many(np.zeros((3, 1)))
        assert [p.label for p in preds] == ["b", "b", "b"]

    def test_majority_baseline_tie_lexicographic(self):
        clf = MajorityBaseline()
        clf.fit(np.zeros((4, 1)), ["d", "c", "c", "d"])
        assert clf.predict_many(np.zeros((1, 1)))[0].label == "c"

    def test_random_baseline_seeded_and_uniformish(self):
        clf = RandomBaseline(seed=5)
        clf.fit(np.zeros((4, 1)), ["a", "b", "a", "b"])
        got1 = [p.label for p in clf.predict_many(np.zeros((1000, 1)))]
        clf2 = RandomBaseline(seed=5)
        clf2.fit(np.zeros((4, 1)), ["a", "b", "a", "b"])
        got2 = [p.label for p in clf2.predict_many(np.zeros((1000, 1)))]
        assert got1 == got2
        share = got1.count("a") / len(got1)
        assert 0.45 < share < 0.55


class TestKernelMatrix:
    def test_rbf_matches_direct_formula(self):
        rng = np.random.default_rng(18)
        a = rng.normal(size=(6, 3))
        b = rng.normal(size=(4, 3))
        gamma = 0.37
        k = rbf_matrix(a, b, gamma)
        for i in range(6):
            for j in range(4):
                d2 = float(np.sum((a[i] - b[j]) ** 2))
                assert k[i, j] == pytest.approx(np.exp(-gamma * d2),
                                                rel=1e-12)

    def test_gamma_scale_matches_sklearn(self):
        rng = np.random.default_rng(19)
        x, y = _blobs(rng, 20, {"a": (0, 0), "b": (2, 2)}, spread=1.3)
        model = train_svm(x, y, KernelConfig(gamma="scale"))
        ref = SVC(gamma="scale")
        ref.fit(x, y)
        assert model.gamma_value == pytest.approx(ref._gamma, rel=1e-9)
