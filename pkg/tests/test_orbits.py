import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asclt_lab.orbits import (
    GridMismatch, IndexRule, OrbitStats, batch_means_variance, cumulative_sums, geometric_grid,
    random_index_sums, replica_rng, run_orbit, run_replicas, sums_at, tight_maxima_profile,
)
from asclt_lab.renorm import RenormSeq
from asclt_lab.systems import DoublingMap, FourierSum, HeavyTail, IidUniform, LocallyConstant

DOUBLING = DoublingMap()
COS = FourierSum(((1, 1.0),))
SQRT = RenormSeq(0.5)


class Normal:
    """i.i.d. N(0,1) summands through the uniform coordinate."""

    def evaluate(self, coords, system=None):
        from scipy.special import ndtri
        return ndtri(np.clip(coords, 1e-300, 1 - 1e-16))


def test_zero_and_one():
    st0 = run_orbit(DOUBLING, LocallyConstant.constant(0.0), 1000, replica_rng(0, 0), keep_trajectory=True)
    assert st0.birkhoff == 0 and st0.running_max == 0 and np.all(st0.trajectory == 0)
    st1 = run_orbit(DOUBLING, LocallyConstant.constant(1.0), 1000, replica_rng(0, 0), keep_trajectory=True)
    np.testing.assert_array_equal(st1.trajectory, np.arange(1, 1001))
    assert st1.birkhoff == 1000 and st1.step_count == 1000


@pytest.mark.slow
def test_doubling_variance():
    n = 1 << 14
    reps = run_replicas(DOUBLING, COS, n, 10_000, base_seed=11, checkpoint_grid=[n])
    s = sums_at(reps, n) / math.sqrt(n)
    assert s.var() == pytest.approx(0.5, abs=0.02)


def test_tight_profile_zero():
    reps = run_replicas(DOUBLING, LocallyConstant.constant(0.0), 100, 20, 0)
    prof = tight_maxima_profile(reps, SQRT, [0.5, 1.0])
    assert np.all(prof[:, 2] == 0)


def test_tight_profile_gaussian():
    grid = [100, 1000, 10_000]
    reps = run_replicas(IidUniform(), Normal(), 10_000, 10_000, 3, checkpoint_grid=grid)
    prof = tight_maxima_profile(reps, SQRT, [10.0])
    assert np.all(prof[:, 2] <= 0.01)
    # some c in the grid gives a profile below 0.05 everywhere
    prof = tight_maxima_profile(reps, SQRT, [1.0, 2.0, 3.0, 4.0])
    ok = [np.all(prof[prof[:, 1] == c, 2] <= 0.05) for c in (1.0, 2.0, 3.0, 4.0)]
    assert any(ok)


def test_tight_profile_cauchy_grows():
    grid = [100, 1000, 10_000]
    reps = run_replicas(IidUniform(), HeavyTail(1.0, 1.0, 1.0), 10_000, 2000, 4, checkpoint_grid=grid)
    # P(|f| > x) = 2/x, so the profile is about 2 sqrt(n) / c before saturating
    p = tight_maxima_profile(reps, SQRT, [1000.0])[:, 2]
    assert p[0] < p[1] < p[2]
    assert p[2] > 0.1


def test_grid_mismatch():
    a = run_replicas(DOUBLING, COS, 100, 1, 0, checkpoint_grid=[10, 100])
    b = run_replicas(DOUBLING, COS, 100, 1, 1, checkpoint_grid=[50, 100])
    with pytest.raises(GridMismatch):
        tight_maxima_profile(a + b, SQRT, [1.0])
    with pytest.raises(GridMismatch):
        sums_at(a, 20)


def test_random_index_exact_matches_run_orbit():
    n = 500
    res = random_index_sums(DOUBLING, COS, IndexRule("exact"), n, 5, RenormSeq(0.5), base_seed=9)
    ref = sums_at(run_replicas(DOUBLING, COS, n, 5, 9, checkpoint_grid=[n]), n) / math.sqrt(n)
    np.testing.assert_allclose(res.sample, ref, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(res.sample, res.exact_sample)
    zero = random_index_sums(DOUBLING, COS, IndexRule("perturbed", LocallyConstant.constant(0.0)), n, 5,
                             RenormSeq(0.5), base_seed=9)
    np.testing.assert_array_equal(zero.sample, res.sample)
    assert np.all(zero.ratio == 1.0)


def test_random_index_ratio_near_one():
    res = random_index_sums(DOUBLING, COS, IndexRule("perturbed", COS), 1 << 12, 50, SQRT, base_seed=2)
    assert np.all(np.abs(res.ratio - 1) <= 1 / 64 + 1e-12)


def test_geometric_grid():
    g = geometric_grid(1000)
    assert g[0] == 1 and g[-1] == 1000 and np.all(np.diff(g) > 0)
    big = g[g >= 32]
    assert np.all(big[1:] / big[:-1] <= 2 ** 0.25 * 1.05)


def test_replica_rng_deterministic():
    assert replica_rng(3, 4).random() == replica_rng(3, 4).random()
    assert replica_rng(3, 4).random() != replica_rng(3, 5).random()


def test_threads_do_not_change_results():
    a = run_replicas(DOUBLING, COS, 2000, 6, 5, threads=1)
    b = run_replicas(DOUBLING, COS, 2000, 6, 5, threads=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.checkpoints, y.checkpoints)


def test_batch_means_doubling():
    s2, se = batch_means_variance(DOUBLING, COS, n_total=1 << 20, batch=1 << 10)
    assert abs(s2 - 0.5) <= 4 * se


def test_run_orbit_rejects_bad_input():
    with pytest.raises(ValueError):
        run_orbit(DOUBLING, COS, 0, replica_rng(0, 0))
    with pytest.raises(ValueError):
        run_orbit(DOUBLING, COS, 10, replica_rng(0, 0), checkpoint_grid=[11])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 3000))
def test_checkpoint_invariants(seed, n):
    s = run_orbit(DOUBLING, COS, n, replica_rng(seed, 0))
    cp = s.checkpoints
    assert np.all(np.diff(cp[:, 2]) >= 0)
    assert np.all(np.abs(cp[:, 1]) <= cp[:, 2] + 1e-12)
    assert cp[-1, 0] == n


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_compensated_sum_exact(seed):
    vals = np.random.default_rng(seed).standard_normal(1000) * 10.0 ** np.random.default_rng(seed).integers(-8, 8, 1000)
    sums, _ = cumulative_sums(vals)
    exact = float(sum(Fraction(v) for v in vals))
    assert abs(sums[-1] - exact) <= 1e-9 * len(vals) * np.abs(vals).max()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 400), m=st.integers(1, 400))
def test_shift_identity(seed, n, m):
    # S_{n+m} f(x) = S_n f(x) + S_m f(T^n x), with T^n x given by the shifted symbols
    bits = np.random.default_rng(seed).integers(0, 2, n + m + 200)
    whole = run_orbit(DOUBLING, COS, n + m, replica_rng(seed, 1), start=bits, keep_trajectory=True)
    tail = run_orbit(DOUBLING, COS, m, replica_rng(seed, 2), start=bits[n:])
    assert whole.birkhoff == pytest.approx(whole.trajectory[n - 1] + tail.birkhoff, abs=1e-9 * (n + m))
