import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asclt_lab.inducing import (
    CapExceeded, InducedSystem, ReturnSet, asclt_lift_experiment, block_bootstrap_stderr, induce_step,
    induced_orbit, kac_check, lift_experiment, lift_ks, return_time_law, return_times, tail_slope,
)
from asclt_lab.laws import Dirac0, Gaussian
from asclt_lab.orbits import cumulative_sums, replica_rng
from asclt_lab.renorm import RenormSeq
from asclt_lab.systems import (
    BernoulliShift, DoublingMap, FourierSum, LocallyConstant, LsvMap, SymbolPoint, orbit_blocks,
)

DOUBLING = DoublingMap()
COS = FourierSum(((1, 1.0),))
SQRT = RenormSeq(0.5)
UPPER = InducedSystem(DOUBLING, ReturnSet.dyadic(0.5, 1.0))
QUARTER = InducedSystem(DOUBLING, ReturnSet.dyadic(0.0, 0.25))


def test_return_set_construction():
    assert ReturnSet.dyadic(0.5, 1.0) == ReturnSet(((1,),), 1)
    assert ReturnSet.dyadic(0.0, 0.25) == ReturnSet(((0, 0),), 2)
    assert ReturnSet.dyadic(0.0, 1.0).is_whole
    assert ReturnSet.from_dict({"interval": [0.25, 0.75]}).words == ((0, 1), (1, 0))
    assert ReturnSet.from_dict({"cells": [1]}) == ReturnSet.cells([1])
    with pytest.raises(ValueError):
        ReturnSet.dyadic(0.0, 1 / 3)
    assert UPPER.m_Y == 0.5 and QUARTER.m_Y == 0.25


def test_induce_step_whole_space():
    ind = InducedSystem(DOUBLING, ReturnSet.whole())
    y = SymbolPoint.from_symbols([1, 0, 1] + [0] * 70)
    nxt, phi, fy, m = induce_step(ind, COS, y)
    f0 = math.cos(2 * math.pi * DOUBLING.coordinate(y))
    assert phi == 1 and fy == pytest.approx(f0) and m == pytest.approx(abs(f0))
    assert nxt.offset == 1


def test_induce_step_next_one_bit():
    y = SymbolPoint.from_symbols([1, 0, 0, 1, 1] + [0] * 70)
    nxt, phi, fy, m = induce_step(UPPER, COS, y)
    assert phi == 3
    pts = [DOUBLING.coordinate(y.shifted(j)) for j in range(3)]
    vals = np.cos(2 * np.pi * np.array(pts))
    assert fy == pytest.approx(vals.sum())
    assert m == pytest.approx(np.abs(np.cumsum(vals)).max())
    with pytest.raises(ValueError):
        induce_step(UPPER, COS, SymbolPoint.from_symbols([0] * 80))


def test_cap_exceeded():
    ind = InducedSystem(DOUBLING, ReturnSet.dyadic(0.5, 1.0), cap=5)
    y = SymbolPoint.from_symbols([1] + [0] * 80)
    with pytest.raises(CapExceeded):
        induce_step(ind, COS, y)


def test_return_law_geometric():
    phi = return_times(UPPER, replica_rng(1, 0), 1_000_000)
    law = return_time_law(phi, 10)
    exact = 2.0 ** -law[:, 0]
    assert np.all(np.abs(law[:, 1] - exact) <= 0.01)
    assert np.all(np.abs(law[:, 1] / exact - 1)[:6] <= 0.01)


def test_kac_records():
    whole = kac_check(InducedSystem(DOUBLING, ReturnSet.whole()), 1000)
    assert whole.product == 1.0 and whole.mean_phi == 1.0
    up = kac_check(UPPER, 200_000, base_seed=2)
    assert up.passes and abs(up.mean_phi - 2) <= 0.02
    q = kac_check(QUARTER, 200_000, base_seed=3)
    assert q.passes and abs(q.mean_phi / 4 - 1) <= 0.02
    with pytest.raises(ValueError):
        kac_check(UPPER, 10)


def test_kac_bernoulli_cells():
    b = BernoulliShift((0.2, 0.3, 0.5))
    rec = kac_check(InducedSystem(b, ReturnSet.cells([0])), 100_000, base_seed=4)
    assert rec.passes and abs(rec.mean_phi - 5) <= 0.1


def test_lsv_return_tail():
    alpha = 0.3
    ind = InducedSystem(LsvMap(alpha), ReturnSet.cells([1]))
    phi = return_times(ind, replica_rng(5, 0), 2_000_000)
    assert tail_slope(phi, 10, 1000) == pytest.approx(-1 / alpha, rel=0.1)
    rec = kac_check(ind, 200_000, base_seed=6)
    assert rec.passes


def test_bootstrap_iid():
    x = np.random.default_rng(0).standard_normal(100_000)
    se = block_bootstrap_stderr(x, np.random.default_rng(1))
    assert se == pytest.approx(1 / math.sqrt(len(x)), rel=0.2)


def _reference(ind, seed, n_ret, length):
    rng = replica_rng(seed, 0)
    start = ind.start(rng)
    coords = np.concatenate(list(orbit_blocks(ind.base, rng, length, 4096, start=start)))
    return coords


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n_ret=st.integers(1, 300), which=st.sampled_from(["upper", "quarter"]))
def test_excursion_identities(seed, n_ret, which):
    ind = UPPER if which == "upper" else QUARTER
    exc = induced_orbit(ind, COS, replica_rng(seed, 0), n_ret)
    coords = _reference(ind, seed, n_ret, int(exc.phi.sum()) + 8)
    f = COS.evaluate(coords)
    sums, _ = cumulative_sums(f)
    t = exc.return_times
    # return indices are exactly the visits to Y
    visits = np.nonzero(ind.Y.mask(DOUBLING.cell_of_coord(coords)))[0]
    assert visits[0] == 0
    np.testing.assert_array_equal(visits[1:n_ret + 1], t)
    # telescoping of f_Y
    np.testing.assert_allclose(exc.induced_sums(), sums[t - 1], atol=1e-9 * t.max())
    # M is dominated by the excursion sum of |f|
    edges = np.concatenate([[0], t])
    absum = np.array([np.abs(f[a:b]).sum() for a, b in zip(edges[:-1], edges[1:])])
    assert np.all(exc.M <= absum + 1e-12)
    assert np.all(exc.M >= np.abs(exc.f_Y) - 1e-12)


def test_lift_whole_space_coincides():
    ind = InducedSystem(DOUBLING, ReturnSet.whole())
    res = lift_experiment(ind, COS, SQRT, 512, 20, base_seed=7)
    np.testing.assert_allclose(res.induced, res.direct, atol=1e-12)


def test_lift_doubling_small():
    res = lift_experiment(UPPER, COS, SQRT, 1 << 12, 2000, base_seed=8)
    ks_i, ks_d = lift_ks(res, Gaussian(0.5))
    assert ks_i <= 0.05 and ks_d <= 0.05
    assert res.condition_grid.shape[1] == 3 and np.all(res.condition_grid[:, 2] >= 0)
    prof = res.induced_profile
    for k in np.unique(prof[:, 0]):
        p = prof[prof[:, 0] == k, 2]
        assert np.all(np.diff(p) <= 0)


def test_asclt_lift_trivial_cases():
    ind = InducedSystem(DOUBLING, ReturnSet.whole())
    res = asclt_lift_experiment(ind, COS, SQRT, 20_000, [0, 1], Gaussian(0.5), base_seed=9)
    np.testing.assert_allclose(res.ks_induced, res.ks_direct, atol=1e-12)
    zero = asclt_lift_experiment(UPPER, LocallyConstant.constant(0.0), SQRT, 5000, [0], Dirac0())
    assert zero.ks_induced[0] == 0.0 and zero.ks_direct[0] == 0.0
