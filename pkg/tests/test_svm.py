import numpy as np
import pytest

from graphofuse.errors import DimensionMismatch, NonFiniteInput, SingleClassInput
from graphofuse.models.standardize import Standardizer
from graphofuse.models.svm import (
    SMO_TOL,
    _kernel_matrix,
    _smo_solve,
    dual_objective,
    encode_labels,
    fit_platt,
    predict_proba_svm,
    probability_pair,
    train_svm,
)
from oracles import dual_objective_ref, pgd_dual_solve


def separable_blobs(seed, n_per_class=10, gap=4.0):
    rng = np.random.default_rng(seed)
    td = rng.normal(0.0, 1.0, size=(n_per_class, 2))
    dyg = rng.normal(gap, 1.0, size=(n_per_class, 2))
    X = np.vstack([td, dyg])
    y = ["TD"] * n_per_class + ["DYG"] * n_per_class
    return X, y


class TestSmoAgainstOracle:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("kernel,gamma", [("linear", 0.0), ("rbf", 0.5)])
    def test_dual_objective_matches_pgd(self, seed, kernel, gamma):
        X, y = separable_blobs(seed)
        yv = encode_labels(y)
        Z = Standardizer.fit(X).transform(X)
        K = _kernel_matrix(kernel, gamma, Z, Z)
        C = 10.0
        alpha, _, violation = _smo_solve(K, yv, C)
        alpha_ref = pgd_dual_solve(K, yv, C)
        smo_obj = dual_objective(K, yv, alpha)
        ref_obj = dual_objective_ref(K, yv, alpha_ref)
        assert violation <= SMO_TOL
        assert smo_obj == pytest.approx(ref_obj, abs=1e-4)
        assert smo_obj >= ref_obj - 1e-4  # SMO is at least as optimal

    def test_dual_feasibility(self):
        X, y = separable_blobs(3)
        model = train_svm(X, y, {"kernel": "rbf", "gamma": 0.5, "C": 10.0}, seed=0)
        assert np.all(np.abs(model.dual_coefs) <= model.C + 1e-9)

    def test_overlapping_classes_small_c(self):
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(0.0, 2.0, size=(12, 2)), rng.normal(1.0, 2.0, size=(12, 2))])
        y = ["TD"] * 12 + ["DYG"] * 12
        model = train_svm(X, y, {"kernel": "rbf", "gamma": 0.5, "C": 0.1}, seed=0)
        assert model.kkt_violation <= SMO_TOL
        assert np.all(np.abs(model.dual_coefs) <= 0.1 + 1e-12)

    def test_grouped_platt_folds(self):
        rng = np.random.default_rng(6)
        X = np.vstack([rng.normal(0.0, 1.0, size=(12, 2)), rng.normal(4.0, 1.0, size=(12, 2))])
        y = ["TD"] * 12 + ["DYG"] * 12
        groups = [f"subj{i // 4}" for i in range(24)]  # 4 rows per subject
        m1 = train_svm(X, y, {"kernel": "linear", "C": 1.0}, seed=3, groups=groups)
        m2 = train_svm(X, y, {"kernel": "linear", "C": 1.0}, seed=3, groups=groups)
        assert (m1.platt_a, m1.platt_b) == (m2.platt_a, m2.platt_b)
        assert m1.platt_a > 0


class TestTwoPointFixture:
    def test_boundary_and_support_vectors(self):
        X = np.array([[-1.0], [1.0]])
        model = train_svm(X, ["TD", "DYG"], {"kernel": "linear", "C": 10.0}, seed=0)
        assert abs(model.bias) <= 1e-3  # boundary at 0 (standardized space is symmetric)
        assert len(model.dual_coefs) == 2  # both points are support vectors
        assert model.decision_value(np.array([0.0])) == pytest.approx(0.0, abs=1e-3)

    def test_platt_antisymmetry(self):
        X = np.array([[-1.0], [1.0]])
        model = train_svm(X, ["TD", "DYG"], {"kernel": "linear", "C": 10.0}, seed=0)
        p_pos = model.predict_proba(np.array([1.0])).p_dyg
        p_neg = model.predict_proba(np.array([-1.0])).p_dyg
        assert p_pos + p_neg == pytest.approx(1.0, abs=1e-6)


class TestXor:
    def test_rbf_separates_xor(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = ["TD", "TD", "DYG", "DYG"]
        model = train_svm(X, y, {"kernel": "rbf", "gamma": 1.0, "C": 10.0}, seed=0)
        predictions = [model.predict_proba(x).label() for x in X]
        assert predictions == y


class TestSeparableTrainingAccuracy:
    @pytest.mark.parametrize("kernel,hp", [
        ("linear", {"kernel": "linear", "C": 10.0}),
        ("rbf", {"kernel": "rbf", "gamma": 0.5, "C": 10.0}),
    ])
    def test_100_percent_on_train(self, kernel, hp):
        X, y = separable_blobs(5)
        model = train_svm(X, y, hp, seed=0)
        assert all(model.predict_proba(x).label() == t for x, t in zip(X, y))


class TestPlatt:
    def test_sigmoid_at_zero(self):
        a, b = 2.0, 0.0
        X, y = separable_blobs(1)
        model = train_svm(X, y, {"kernel": "linear", "C": 1.0}, seed=0)
        patched = type(model)(**{**model.__dict__, "platt_a": a, "platt_b": b})
        x_on_boundary = None
        # construct an input with f(x) = 0 by bisection along the class axis
        lo, hi = np.array([0.0, 0.0]), np.array([4.0, 4.0])
        for _ in range(80):
            mid = (lo + hi) / 2
            if patched.decision_value(mid) < 0:
                lo = mid
            else:
                hi = mid
        x_on_boundary = (lo + hi) / 2
        pair = patched.predict_proba(x_on_boundary)
        assert pair.p_dyg == pytest.approx(0.5, abs=1e-6)
        assert pair.p_td == pytest.approx(0.5, abs=1e-6)

    def test_monotone_in_decision_value(self):
        X, y = separable_blobs(2)
        model = train_svm(X, y, {"kernel": "linear", "C": 10.0}, seed=0)
        xs = [np.array([t, t]) for t in np.linspace(-2, 6, 30)]
        pairs = sorted((model.decision_value(x), model.predict_proba(x).p_dyg) for x in xs)
        probs = [p for _, p in pairs]
        assert all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))

    def test_fit_platt_symmetric_two_point(self):
        a, b = fit_platt(np.array([-1.0, 1.0]), np.array([-1.0, 1.0]))
        assert a == pytest.approx(np.log(2.0), abs=1e-4)
        assert b == pytest.approx(0.0, abs=1e-6)


class TestErrors:
    def test_single_class(self):
        with pytest.raises(SingleClassInput):
            train_svm(np.array([[0.0], [1.0]]), ["TD", "TD"], {"kernel": "linear"}, seed=0)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            train_svm(np.array([[0.0], [np.nan]]), ["TD", "DYG"], {"kernel": "linear"}, seed=0)

    def test_dimension_mismatch(self):
        X, y = separable_blobs(0)
        model = train_svm(X, y, {"kernel": "linear", "C": 1.0}, seed=0)
        with pytest.raises(DimensionMismatch):
            predict_proba_svm(model, np.array([1.0, 2.0, 3.0]))


class TestProbabilityPair:
    def test_normalized_and_tie_to_dyg(self):
        pair = probability_pair(0.5)
        assert pair.label() == "DYG"
        assert probability_pair(0.25).label() == "TD"
        with pytest.raises(ValueError):
            from graphofuse.models.svm import ProbabilityPair
            ProbabilityPair(p_td=0.7, p_dyg=0.7)
