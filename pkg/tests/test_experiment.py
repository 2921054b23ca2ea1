import numpy as np
import pytest

from cfjoint import Hyperparams, TrialDataset
from cfjoint.experiment import (DEFAULT_GRID, METHODS, SplitConfig, grid_search, hyperparam_grid,
                                run_benchmark, select_best, simulate_trial_split)
from cfjoint.ingest import Dataset
from cfjoint.synthetic import make_dual_label


def tagged_dataset(n=400, d=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = np.hstack([rng.standard_normal((n, d)), np.ones((n, 1))])
    treated = rng.random(n) < 0.4
    w = rng.standard_normal(d + 1)
    y = X @ w + treated * (X @ (0.3 * w)) + noise * rng.standard_normal(n)
    return Dataset(X=X, y=y, feature_names=[f"f{i}" for i in range(d)] + ["intercept"],
                   ids=np.array([str(i) for i in range(n)], dtype=object),
                   source_rows=np.arange(n), treated=treated,
                   group=np.array([f"g{i % 10}" for i in range(n)], dtype=object),
                   frequency=np.arange(1.0, n + 1))


class TestSplit:
    def test_deterministic(self):
        ds = tagged_dataset()
        cfg = SplitConfig(subpop="group_subset", fraction=0.3)
        a, b = simulate_trial_split(ds, cfg, 3), simulate_trial_split(ds, cfg, 3)
        for k in ("control_idx", "treatment_idx", "test_idx", "benchmark_idx"):
            np.testing.assert_array_equal(getattr(a, k), getattr(b, k))
        c = simulate_trial_split(ds, cfg, 4)
        assert not np.array_equal(a.treatment_idx, c.treatment_idx)

    @pytest.mark.parametrize("subpop", ["random_fraction", "group_subset", "frequency_quantile"])
    def test_no_leakage_condition_tagged(self, subpop):
        ds = tagged_dataset()
        s = simulate_trial_split(ds, SplitConfig(subpop=subpop, fraction=0.5, discard=0.2), 1)
        assert not set(s.test_idx) & set(s.treatment_idx)
        assert not set(s.test_idx) & set(s.benchmark_idx)
        assert not set(s.test_idx) & set(s.control_idx)
        assert ds.treated[s.treatment_idx].all() and ds.treated[s.test_idx].all()
        assert not ds.treated[s.control_idx].any()
        assert set(s.treatment_idx) <= set(s.benchmark_idx)
        assert s.subpopulation[s.treatment_idx].all()

    def test_no_leakage_dual_label(self):
        ds = make_dual_label(n=300, d=5)
        s = simulate_trial_split(ds, SplitConfig(subpop="frequency_quantile", tau=0.5,
                                                 train_fraction=0.5), 0)
        assert not set(s.test_idx) & set(s.control_idx)
        assert set(s.treatment_idx) <= set(s.control_idx)
        np.testing.assert_array_equal(s.data.y_treatment, ds.y_treatment[s.treatment_idx])
        np.testing.assert_array_equal(s.data.y_control, ds.y[s.control_idx])

    def test_frequency_quantile_rows(self):
        ds = tagged_dataset(n=100)
        s = simulate_trial_split(ds, SplitConfig(subpop="frequency_quantile", tau=0.75), 0)
        # the 0.75 quantile of 1..100 is 75.25, so rows 76..100 qualify
        np.testing.assert_array_equal(np.flatnonzero(s.subpopulation), np.arange(75, 100))

    def test_discard_fraction(self):
        ds = tagged_dataset(n=1000)
        full = simulate_trial_split(ds, SplitConfig(), 0)
        half = simulate_trial_split(ds, SplitConfig(discard=0.5), 0)
        assert half.treatment_idx.size == full.treatment_idx.size - round(0.5 * full.treatment_idx.size)

    def test_ratio_parsing_and_validation(self):
        assert SplitConfig.from_dict({"train_test_ratio": [1, 3]}).train_fraction == 0.25
        with pytest.raises(ValueError):
            SplitConfig.from_dict({"bogus": 1})
        with pytest.raises(ValueError):
            SplitConfig(subpop="other")
        with pytest.raises(ValueError):
            SplitConfig(discard=1.0)


class TestGridSearch:
    def test_order(self):
        pts = hyperparam_grid({"gamma": [0.5, 0.1], "lambda": [1.0, 0.1], "eta": [2.0, 1.0]})
        keys = [(h.eta, h.lam, h.gamma) for h in pts]
        assert keys == sorted(keys) and len(pts) == 8

    def test_singleton_grid(self):
        rng = np.random.default_rng(0)
        data = TrialDataset(rng.standard_normal((30, 2)), rng.standard_normal(30),
                            rng.standard_normal((10, 2)), rng.standard_normal(10))
        hp = grid_search(data, {"gamma": [0.3], "lambda": [0.2], "eta": [4.0]})
        assert hp == Hyperparams(0.3, 0.2, 4.0)

    def test_ties_go_to_first(self):
        calls = []

        def fit(train, cand):
            calls.append(cand)
            from cfjoint import JointLinearModel
            return JointLinearModel(w_t=[0.0])

        X, y = np.ones((3, 1)), np.zeros(3)
        assert select_best(["a", "b", "c"], fit, None, X, y) == "a"
        assert calls == ["a", "b", "c"]

    def test_picks_validation_minimizer(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal(3)
        Xc, Xt = rng.standard_normal((200, 3)), rng.standard_normal((40, 3))
        data = TrialDataset(Xc, Xc @ w, Xt, Xt @ w)
        hp = grid_search(data, {"gamma": [0.5], "lambda": [1e-6, 100.0], "eta": [1.0]})
        assert hp.lam == 1e-6


class TestBenchmark:
    def test_noiseless_recovery(self):
        ds = tagged_dataset(n=600)
        cfg = SplitConfig(subpop="random_fraction", fraction=0.8, replications=2)
        table = run_benchmark(ds, cfg, DEFAULT_GRID)
        assert table.value("regression", "delta") >= 0.99
        assert table.value("regression", "benchmark") >= 0.99
        assert set(table.rows[0]["values"]) == set(METHODS)

    def test_reproducible(self):
        ds = tagged_dataset(n=300, noise=0.5)
        cfg = SplitConfig(fraction=0.5, replications=2, seed=5)
        tasks = [{"kind": "regression"}, {"kind": "classification", "quantile": 0.5}]
        a = run_benchmark(ds, cfg, tasks=tasks).as_dict()
        b = run_benchmark(ds, cfg, tasks=tasks).as_dict()
        assert a == b
        assert [r["seed"] for r in a["replications"]] == [5, 6]

    def test_threads_do_not_change_results(self, monkeypatch):
        ds = tagged_dataset(n=300, noise=0.5)
        cfg = SplitConfig(fraction=0.5, replications=3)
        serial = run_benchmark(ds, cfg).as_dict()
        monkeypatch.setenv("CF_JOINT_THREADS", "3")
        assert run_benchmark(ds, cfg).as_dict() == serial

    def test_effect_tasks_on_dual_label(self):
        ds = make_dual_label(n=300, d=5)
        cfg = SplitConfig(subpop="frequency_quantile", tau=0.5, train_fraction=0.5,
                          replications=1)
        table = run_benchmark(ds, cfg, tasks=[{"kind": "effect"}, {"kind": "mean_effect"}])
        assert table.value("mean_effect", "delta") >= 0
        assert "effect" in table.format()

    def test_housing_counts(self):
        from cfjoint.protocols import load_protocol
        ds = load_protocol("housing").load()
        assert int((~ds.treated).sum()) == 20_699
        assert int(ds.treated.sum()) == 914

