import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asclt_lab.renorm import NoBracket, RenormSeq, SlowVar, bn_residual, solve_bn


def test_eval_sqrt():
    assert RenormSeq(0.5)(4) == pytest.approx(2.0, rel=1e-15)


def test_eval_two_thirds():
    assert RenormSeq(2 / 3)(8) == pytest.approx(4.0, rel=1e-14)


def test_eval_with_log():
    # sqrt(e^2) * log(e^2) = e * 2
    assert RenormSeq(0.5, SlowVar.log_power(1.0))(math.e**2) == pytest.approx(2 * math.e, rel=1e-14)


def test_solve_constant_slow_part():
    assert solve_bn(1.5, SlowVar(), 1000) == pytest.approx(100.0, rel=1e-12)
    assert solve_bn(2.0, SlowVar(), 10_000) == pytest.approx(100.0, rel=1e-12)


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_solve_log_slow_part_against_bisection():
    n = 1e6
    x = solve_bn(1.5, SlowVar.log_power(1.0), n)
    oracle = math.exp(_bisect(lambda lx: math.log(n) + math.log(lx) - 1.5 * lx, 5.0, 40.0))
    assert x == pytest.approx(oracle, rel=1e-10)
    assert bn_residual(1.5, SlowVar.log_power(1.0), n, x) <= 1e-10


def test_no_bracket_for_pathological_table():
    # L so large across the whole range that n L(x) > x^p everywhere below the cap
    slow = SlowVar.table([1.0, 1e30], [1e80, 1e80])
    with pytest.raises(NoBracket):
        solve_bn(1.5, slow, 10.0)


def test_slowvar_positive_and_round_trip():
    for s in (SlowVar.constant(3.0), SlowVar.log_power(-2.0), SlowVar.table([1, 10, 100], [1, 2, 3])):
        x = np.geomspace(1e-3, 1e12, 50)
        assert np.all(s(x) > 0)
        assert SlowVar.from_dict(s.to_dict()) == s
    seq = RenormSeq(0.7, SlowVar.log_power(0.5))
    assert RenormSeq.from_dict(seq.to_dict()) == seq


def test_bad_inputs():
    with pytest.raises(ValueError):
        SlowVar.constant(0.0)
    with pytest.raises(ValueError):
        SlowVar.table([2, 1], [1, 1])
    with pytest.raises(ValueError):
        RenormSeq(0.0)
    with pytest.raises(ValueError):
        solve_bn(2.5, SlowVar(), 10)


@given(exponent=st.floats(-3, 3), lam=st.sampled_from([2.0, 10.0]), x=st.floats(1e6, 1e15))
def test_slow_variation_ratio(exponent, lam, x):
    s = SlowVar.log_power(exponent)
    exact = (1 + math.log(lam) / math.log(x)) ** exponent
    assert s(lam * x) / s(x) == pytest.approx(exact, rel=1e-12)
    assert SlowVar.constant(2.5)(lam * x) / SlowVar.constant(2.5)(x) == 1.0
    # the 1% band is reached once log x >= |exponent| log(lam) / log(1.01) or so
    x0 = math.exp(abs(exponent) * math.log(lam) / math.log(1.01)) if exponent else 1e6
    if x >= x0:
        assert abs(s(lam * x) / s(x) - 1) <= 0.01


def test_slow_variation_small_exponent_band():
    s = SlowVar.log_power(1e-3)
    for x in np.geomspace(1e6, 1e15, 20):
        for lam in (2.0, 10.0):
            assert abs(s(lam * x) / s(x) - 1) <= 0.01


@given(d=st.floats(0.05, 2.0), exponent=st.floats(-2, 2))
def test_eventually_monotone(d, exponent):
    seq = RenormSeq(d, SlowVar.log_power(exponent))
    n0 = seq.monotone_from(1e9)
    grid = np.unique(np.round(np.geomspace(n0, 1e9, 500)))
    assert np.all(np.diff(seq(grid)) >= 0)
    assert seq(1e9) > seq(n0) or n0 >= 1e9


@settings(max_examples=60)
@given(p=st.floats(1.01, 2.0), exponent=st.floats(-2, 2), n=st.floats(2.0, 1e9))
def test_solve_bn_residual(p, exponent, n):
    slow = SlowVar.log_power(exponent)
    x = solve_bn(p, slow, n)
    assert bn_residual(p, slow, n, x) <= 1e-10
