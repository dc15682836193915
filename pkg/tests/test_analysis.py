import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from autorank_lora import (
    DomainError,
    ShapeError,
    SphereExperiment,
    SpectrumTrace,
    effective_rank,
    recovery_error,
    sphere_ratio_experiment,
)
from autorank_lora.analysis import chi_mean, numerical_rank, predicted_mean_ratio, sphere_grid


class TestEffectiveRank:
    def test_single_direction(self):
        assert effective_rank(np.diag([1.0, 0.0, 0.0]), 0.99) == 1

    def test_two_equal(self):
        assert effective_rank(np.diag([1.0, 1.0]), 0.75) == 2

    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_identity_full_energy(self, n):
        assert effective_rank(np.eye(n), 1.0) == n

    def test_zero_matrix(self):
        assert effective_rank(np.zeros((4, 3)), 0.5) == 0

    def test_domain(self):
        with pytest.raises(DomainError):
            effective_rank(np.eye(2), 0.0)

    @settings(max_examples=60, deadline=None)
    @given(m=st.integers(1, 12), n=st.integers(1, 12), r=st.integers(0, 12), seed=st.integers(0, 1000))
    def test_full_energy_is_numerical_rank(self, m, n, r, seed):
        r = min(r, m, n)
        gen = np.random.default_rng(seed)
        mat = gen.standard_normal((m, r)) @ gen.standard_normal((r, n))
        assert effective_rank(mat, 1.0) == numerical_rank(mat) == r

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 1000), e1=st.floats(0.01, 1.0), e2=st.floats(0.01, 1.0))
    def test_monotone_in_energy(self, seed, e1, e2):
        mat = np.random.default_rng(seed).standard_normal((8, 6))
        lo, hi = sorted((e1, e2))
        assert effective_rank(mat, lo) <= effective_rank(mat, hi)


class TestRecoveryError:
    def test_exact(self):
        t = np.arange(6.0).reshape(2, 3)
        assert recovery_error(t, t) == 0.0

    def test_zero_learned(self):
        assert recovery_error(np.zeros((2, 2)), np.eye(2)) == 1.0

    def test_doubled(self):
        t = np.random.default_rng(0).standard_normal((3, 4))
        assert math.isclose(recovery_error(2 * t, t), 1.0, rel_tol=1e-12)

    def test_shape(self):
        with pytest.raises(ShapeError):
            recovery_error(np.zeros((2, 2)), np.zeros((2, 3)))


@pytest.mark.parametrize("dof", [1, 2, 4, 16, 64, 1000])
def test_chi_mean_against_scipy(dof):
    assert math.isclose(chi_mean(dof), stats.chi(dof).mean(), rel_tol=1e-10)


class TestSphere:
    def test_single_sample_ratio_is_one(self):
        s = sphere_ratio_experiment(SphereExperiment(7, 1, 50, seed=2))
        np.testing.assert_allclose(s.ratios, 1.0, rtol=0, atol=4 * np.finfo(float).eps)

    def test_mean_matches_chi_prediction(self):
        s = sphere_ratio_experiment(SphereExperiment(16, 64, 2000, seed=0))
        assert abs(s.mean - predicted_mean_ratio(16, 64)) <= 0.1 * predicted_mean_ratio(16, 64)

    def test_doubling_samples(self):
        a = sphere_ratio_experiment(SphereExperiment(16, 64, 2000, seed=1))
        b = sphere_ratio_experiment(SphereExperiment(16, 128, 2000, seed=1))
        assert abs(b.mean / a.mean - 1 / math.sqrt(2)) <= 0.1 / math.sqrt(2)

    def test_exact_second_moment(self):
        # E||sum of lam unit vectors||^2 = lam, so E[ratio^2] = 1/lam for every R
        for R in (2, 8, 32):
            s = sphere_ratio_experiment(SphereExperiment(R, 16, 4000, seed=R))
            assert abs(np.mean(s.ratios**2) - 1 / 16) <= 0.05 / 16

    def test_deterministic_and_chunk_independent(self, monkeypatch):
        import autorank_lora.analysis as analysis

        a = sphere_ratio_experiment(SphereExperiment(4, 8, 300, seed=5))
        monkeypatch.setattr(analysis, "_CHUNK_ELEMENTS", 32 * 7)
        b = sphere_ratio_experiment(SphereExperiment(4, 8, 300, seed=5))
        assert a.ratios.tobytes() == b.ratios.tobytes()

    def test_validation(self):
        with pytest.raises(DomainError):
            SphereExperiment(4, 8, 0)

    def test_grid_keys(self):
        grid = sphere_grid([2, 3], [4], 10)
        assert sorted(grid) == [(2, 4), (3, 4)]


def test_spectrum_trace_csv_round_trip():
    trace = SpectrumTrace([(10, {"0.up": np.array([2.0, 1.0])}), (20, {"0.up": np.array([3.0, 0.5])})])
    again = SpectrumTrace.from_csv(trace.to_csv())
    assert [e for e, _ in again.entries] == [10, 20]
    assert np.array_equal(again.entries[1][1]["0.up"], [3.0, 0.5])
