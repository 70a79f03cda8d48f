import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from frictiondiag.classifier import (
    AnomalyModels,
    ClassifierConfig,
    HistogramConfig,
    LinearSvmModel,
    ProcessedDataset,
    ProcessedEntry,
    anomaly_features,
    anomaly_labels,
    bin_sweep,
    classify,
    fit_models,
    histogram_features,
    svm_objective,
    train_all,
    train_svm,
)
from frictiondiag.core import AnomalyStatus, ValidationError

finite = st.floats(-10, 10, allow_nan=False)


def primal_optimum(X, y, reg):
    """Hinge SVM primal with slack variables, solved by SLSQP."""
    n, d = X.shape

    def obj(v):
        return 0.5 * reg * v[:d] @ v[:d] + v[d + 1:].mean()

    cons = [{"type": "ineq", "fun": lambda v: v[d + 1:]},
            {"type": "ineq", "fun": lambda v: v[d + 1:] - 1.0 + y * (X @ v[:d] + v[d])}]
    res = optimize.minimize(obj, np.zeros(d + 1 + n), constraints=cons, method="SLSQP",
                            options={"maxiter": 500, "ftol": 1e-12})
    return res.fun


class TestHistogram:
    def test_one_hot(self):
        z = histogram_features([0.35], None, HistogramConfig(10, 0.0, 1.0))
        assert z.tolist() == [0, 0, 0, 1, 0, 0, 0, 0, 0, 0]

    def test_empty(self):
        assert np.all(histogram_features([], None, HistogramConfig(7)) == 0.0)

    def test_edges_clamped(self):
        z = histogram_features([-3.0, 5.0, 1.0], None, HistogramConfig(4, 0.0, 1.0))
        np.testing.assert_allclose(z, [1 / 3, 0, 0, 2 / 3])

    def test_uniform_sample(self):
        f = np.random.default_rng(0).uniform(0, 1, 20_000)
        z = histogram_features(f, None, HistogramConfig(10))
        assert np.all(np.abs(z - 0.1) < 0.02)

    def test_config_filter(self):
        z = histogram_features([0.05, 0.95], [1, 2], HistogramConfig(2, 0, 1, {2}))
        assert z.tolist() == [0.0, 1.0]
        with pytest.raises(ValidationError):
            histogram_features([0.05], None, HistogramConfig(2, 0, 1, {2}))

    @given(st.lists(finite, min_size=1, max_size=50), st.integers(1, 60))
    def test_normalized(self, f, nb):
        z = histogram_features(f, None, HistogramConfig(nb, -5.0, 5.0))
        assert z.sum() == pytest.approx(1.0, abs=1e-12) and np.all(z >= 0)

    @given(st.lists(finite, min_size=1, max_size=50), st.randoms(use_true_random=False))
    def test_order_invariant(self, f, rnd):
        g = list(f)
        rnd.shuffle(g)
        cfg = HistogramConfig(13, -5.0, 5.0)
        np.testing.assert_array_equal(histogram_features(f, None, cfg), histogram_features(g, None, cfg))


class TestClassify:
    def test_example(self):
        m = LinearSvmModel([1.0], -0.5)
        assert classify([0.7], m) is True
        assert classify([0.3], m) is False

    def test_zero_vector_takes_bias_sign(self):
        assert classify([0.0, 0.0], LinearSvmModel([3.0, -1.0], 0.2)) is True
        assert classify([0.0, 0.0], LinearSvmModel([3.0, -1.0], -0.2)) is False

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension mismatch"):
            classify([1.0, 2.0], LinearSvmModel([1.0], 0.0))

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3), finite,
           st.floats(1e-3, 1e3))
    def test_positive_scaling_invariant(self, z, w, b, c):
        m = LinearSvmModel(w, b)
        scaled = LinearSvmModel(c * np.asarray(w), c * b)
        if abs(float(np.dot(z, w)) + b) > 1e-9:
            assert classify(z, m) == classify(z, scaled)

    def test_round_trip(self):
        m = LinearSvmModel([1.0, 2.0], 0.5)
        m2 = LinearSvmModel.from_dict(m.to_dict())
        assert np.array_equal(m2.w, m.w) and m2.b == m.b


class TestTrainSvm:
    def test_one_dimensional(self):
        X = np.r_[np.linspace(0, 1, 30), np.linspace(2, 3, 30)][:, None]
        y = np.r_[-np.ones(30), np.ones(30)]
        m = train_svm(X, y)
        assert np.all(np.sign(m.decision(X)) == y)
        assert -m.b / m.w[0] == pytest.approx(1.5, abs=0.1)

    def test_blobs_separated(self):
        rng = np.random.default_rng(0)
        X = np.r_[rng.normal(-2, 0.5, (50, 2)), rng.normal(2, 0.5, (50, 2))]
        y = np.r_[-np.ones(50), np.ones(50)]
        m = train_svm(X, y, seed=3)
        assert np.mean(np.sign(m.decision(X)) == y) == 1.0

    @pytest.mark.parametrize("reg", [1e-1, 1e-2])
    def test_near_primal_optimum(self, reg):
        rng = np.random.default_rng(1)
        X = np.r_[rng.normal(-0.5, 1.0, (30, 2)), rng.normal(0.5, 1.0, (30, 2))]
        y = np.r_[-np.ones(30), np.ones(30)]
        m = train_svm(X, y, reg, epochs=500, standardize=False)
        opt = primal_optimum(X, y, reg)
        assert svm_objective(m, X, y, reg) <= opt * 1.02 + 1e-4

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 3))
        y = np.where(X[:, 0] > 0, 1.0, -1.0)
        a, b = train_svm(X, y, seed=9), train_svm(X, y, seed=9)
        assert np.array_equal(a.w, b.w) and a.b == b.b

    def test_single_class(self):
        with pytest.raises(ValidationError, match="single-class"):
            train_svm(np.ones((5, 1)), np.ones(5))

    def test_bad_labels(self):
        with pytest.raises(ValidationError):
            train_svm(np.ones((2, 1)), [0, 1])


def synthetic_entries(n, seed):
    """Processed entries with well separated dry anomalies."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        dry = i % 4 == 1
        visc = i % 4 == 2
        fss = i % 4 == 3
        F1 = tuple(rng.uniform(0.6, 0.62, 4)) if fss else tuple(rng.choice([0.0, 0.3], 4) + rng.uniform(0, 0.02, 4))
        F2 = tuple(rng.uniform(0, 0.5, 3))
        out.append(ProcessedEntry(1.0 + 1.5 * dry + rng.normal(0, 0.05), 1.0 + 0.2 * visc + rng.normal(0, 0.01),
                                  (((1,) * 4, F1), ((1,) * 3, F2)),
                                  AnomalyStatus(dry, visc, (fss, False))))
    return out


class TestModels:
    def test_fit_and_predict(self):
        entries = synthetic_entries(80, 0)
        entries += [ProcessedEntry(1.0, 1.0, (((1,), (0.0,)), ((1,), (0.6,))), AnomalyStatus(False, False, (False, True)))] * 4
        models = fit_models(entries, ClassifierConfig(n_bins=20))
        correct = [models.predict(e.f_bar_d, e.f_v, e.per_fss).to_vector()[0] == int(e.status.theta_d)
                   for e in entries]
        assert all(correct)

    def test_per_anomaly_independence(self):
        entries = synthetic_entries(80, 1)
        entries += [ProcessedEntry(1.0, 1.0, (((1,), (0.0,)), ((1,), (0.6,))), AnomalyStatus(False, False, (False, True)))] * 4
        base = fit_models(entries)
        # perturb only the viscous feature and its labels
        rng = np.random.default_rng(0)
        changed = [ProcessedEntry(e.f_bar_d, float(rng.normal()), e.per_fss,
                                  AnomalyStatus(e.status.theta_d, bool(i % 2), e.status.theta_s))
                   for i, e in enumerate(entries)]
        other = fit_models(changed)
        assert base.dry.to_dict() == other.dry.to_dict()
        assert [m.to_dict() for m in base.fss] == [m.to_dict() for m in other.fss]
        assert base.viscous.to_dict() != other.viscous.to_dict()

    def test_round_trip(self):
        entries = synthetic_entries(40, 2) + [ProcessedEntry(1.0, 1.0, (((1,), (0.0,)), ((1,), (0.6,))),
                                                             AnomalyStatus(False, False, (False, True)))]
        m = fit_models(entries)
        assert AnomalyModels.from_dict(m.to_dict()).to_dict() == m.to_dict()

    def test_single_class_dataset(self):
        entries = [ProcessedEntry(1.0, 1.0, (((1,), (0.0,)),), AnomalyStatus.nominal(1))] * 10
        with pytest.raises(ValidationError, match="single-class"):
            train_all(ProcessedDataset(entries), n_repeats=1)

    def test_features_and_labels(self):
        entries = synthetic_entries(8, 3)
        assert anomaly_features(entries, 0).shape == (8, 1)
        assert anomaly_labels(entries, 0).tolist() == [-1, 1, -1, -1] * 2


class TestOnSimulatedData:
    def test_dry_separation(self, small_processed):
        _, report = train_all(small_processed, n_repeats=3, seed=0)
        assert report.detection()["dry"] == 1.0

    def test_train_loss_monotone_in_bins(self, small_processed):
        rows = bin_sweep(small_processed, 0, [5, 10, 20, 40, 80], seed=0)
        train = [r[1] for r in rows]
        assert all(b <= a + 0.02 for a, b in zip(train, train[1:]))
