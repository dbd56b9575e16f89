import numpy as np
import pytest

from lldpm.synth import IndependentConfig, Scenario, changepoints_of, gen_ar1, gen_independent, preprocess


class TestIndependent:
    @pytest.mark.parametrize("seed", range(10))
    def test_eight_changepoints(self, seed):
        Y, sc = gen_independent(20, 100, seed)
        assert len(sc.true_changepoints) == 8
        assert (Y.n, Y.T) == (20, 100)
        assert min(sc.params["block_lengths"]) >= 5 and sum(sc.params["block_lengths"]) == 100

    def test_grid_sizes(self):
        for n in (20, 50, 100):
            Y, sc = gen_independent(n, 100, 1)
            assert Y.n == n and len(sc.true_changepoints) == 8

    def test_block_structure(self):
        _, sc = gen_independent(20, 100, 3)
        ks = [p.k for p in sc.true_partitions]
        cps = sorted(sc.true_changepoints)
        starts = [1] + cps
        layout_k = [ks[s - 1] for s in starts]
        assert layout_k == [3, 3, 2] * 3
        # first and fourth blocks share a layout
        assert sc.true_partitions[starts[0] - 1] == sc.true_partitions[starts[3] - 1]

    def test_deterministic_and_seed_dependent(self):
        a = gen_independent(20, 100, 5)
        b = gen_independent(20, 100, 5)
        c = gen_independent(20, 100, 6)
        np.testing.assert_array_equal(a[0].values, b[0].values)
        assert a[1].params["block_lengths"] != c[1].params["block_lengths"]

    def test_noise_scale(self):
        Y, sc = gen_independent(30, 60, 2, IndependentConfig(noise_var=0.01))
        resid = []
        for t, p in enumerate(sc.true_partitions):
            y = Y.values[:, t]
            lab = p.as_array()
            resid.extend(y - np.array([y[lab == j].mean() for j in range(p.k)])[lab])
        assert 0.005 < np.var(resid) < 0.012

    def test_short_horizon_and_errors(self):
        _, sc = gen_independent(6, 9, 0)
        assert len(sc.true_changepoints) == 8
        with pytest.raises(ValueError):
            gen_independent(5, 100, 0)
        with pytest.raises(ValueError):
            gen_independent(20, 8, 0)


class TestAr1:
    def test_two_cluster_times(self):
        _, sc = gen_ar1(20, 30, 0.5, 0)
        two = [t + 1 for t, p in enumerate(sc.true_partitions) if p.k == 2]
        assert two == [5, 9, 10, 15, 18, 20, 25, 27, 30]
        assert sorted(p.sizes for p in sc.true_partitions if p.k == 2)[0] in ((6, 14), (14, 6), (10, 10))
        sizes = {t + 1: sorted(p.sizes) for t, p in enumerate(sc.true_partitions) if p.k == 2}
        assert sizes[5] == [10, 10] and sizes[9] == [6, 14] and sizes[27] == [6, 14]

    def test_lambda_zero_is_iid_around_levels(self):
        Y, sc = gen_ar1(2000, 3, 0.0, 1)
        assert abs(Y.values[:, 0].mean()) < 0.1 and abs(Y.values[:, 0].var() - 1) < 0.1

    def test_variance_bound(self):
        Y, _ = gen_ar1(4000, 4, 0.9, 2)
        # one-cluster times 1..4 with zero level: pure accumulated noise
        expected = sum(0.81**k for k in range(4))
        assert abs(Y.values[:, 3].var() / expected - 1) < 0.08
        assert Y.values[:, 3].var() < 1 / (1 - 0.81)

    def test_changepoints_consistent(self):
        _, sc = gen_ar1(20, 30, 0.9, 3)
        assert sc.true_changepoints == changepoints_of(sc.true_partitions)
        assert 5 in sc.true_changepoints and 6 in sc.true_changepoints

    @pytest.mark.parametrize("lam", [-0.1, 1.0])
    def test_bad_lambda(self, lam):
        with pytest.raises(ValueError):
            gen_ar1(lam=lam)


class TestScenario:
    def test_roundtrip(self):
        _, sc = gen_independent(10, 30, 4)
        assert Scenario.from_dict(sc.to_dict()) == sc

    def test_inconsistent_rejected(self):
        _, sc = gen_ar1(8, 10, 0.5, 0)
        with pytest.raises(ValueError):
            Scenario(sc.n, sc.T, sc.true_partitions, frozenset({2}), {}, 0)


class TestPreprocess:
    def test_moving_average(self):
        # length 3 -> MA length 2 -> offset 1 keeps one point; check via stride 1, offset 0
        x = np.array([[1.0, 3.0, 5.0, 9.0]])
        out = preprocess(x, stride=1, offset=0)
        root = np.sqrt([2.0, 4.0, 7.0])
        np.testing.assert_allclose(out.values[0], (root - root.mean()) / root.std(ddof=1))

    def test_downsampling_length(self):
        assert preprocess(np.abs(np.random.default_rng(0).normal(size=(2, 11)))).T == 2
        assert preprocess(np.abs(np.random.default_rng(1).normal(size=(3, 1745)))).T == 349

    def test_standardized(self):
        out = preprocess(np.abs(np.random.default_rng(2).normal(size=(4, 300))))
        np.testing.assert_allclose(out.values.mean(axis=1), 0, atol=1e-12)
        np.testing.assert_allclose(out.values.var(axis=1, ddof=1), 1, atol=1e-12)

    def test_negative_reported(self):
        x = np.ones((2, 20))
        x[1, 6:8] = -5
        with pytest.raises(ValueError, match="unit 1, time 1"):
            preprocess(x)
