import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from packconv.companding import (
    compand,
    estimate_stats,
    from_integers,
    inverse_compand,
    round_half_away,
)
from packconv.precision import measured_snr_db

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False,
                   allow_subnormal=False).map(lambda v: v if abs(v) > 1e-290 else 0.0)


@pytest.mark.parametrize("x, want", [
    (0.5, 1.0), (-0.5, -1.0), (1.5, 2.0), (-2.5, -3.0), (0.49999999999999994, 0.0),
    (2.4, 2.0), (-2.6, -3.0), (0.0, 0.0),
])
def test_round_half_away(x, want):
    assert round_half_away(x) == want


def test_compand_exact_multiples():
    q = compand([1.0, -0.5, 0.25], 4)
    assert q.samples.tolist() == [4, -2, 1]
    assert q.c == 4 and q.peak == 1.0


def test_compand_all_zero_block():
    q = compand([0.0, 0.0], 16)
    assert q.samples.tolist() == [0, 0]
    assert q.c == 1 and q.peak == 0


def test_compand_rounding_ties():
    q = compand([0.3, -0.3, 0.15], 8)
    assert q.c == pytest.approx(8 / 0.3)
    # 0.15 * 8/0.3 = 4 up to rounding of the factor
    assert q.samples.tolist() == [8, -8, 4]


@pytest.mark.parametrize("vals, cs, ck, want", [
    ([8.0], 2, 4, [1.0]),
    ([0.0, -16.0], 1, 1, [0.0, -16.0]),
])
def test_inverse_compand(vals, cs, ck, want):
    assert np.asarray(inverse_compand(vals, cs, ck)).tolist() == want


@pytest.mark.parametrize("cs, ck", [(0, 1), (1, -2)])
def test_inverse_compand_rejects_nonpositive(cs, ck):
    with pytest.raises(ValueError):
        inverse_compand([1.0], cs, ck)


def test_compand_rejects_bad_q():
    with pytest.raises(ValueError):
        compand([1.0], 0)


def test_from_integers_checks_range():
    q = from_integers([3, -2, 1])
    assert q.q == 3 and q.c == 1
    with pytest.raises(ValueError):
        from_integers([5], 4)
    with pytest.raises(ValueError):
        from_integers([1.5])


@pytest.mark.parametrize("x, sigma, peak", [
    ([1, -1, 1, -1], 1.0, 1.0),
    ([0, 0, 0, 0], 0.0, 0.0),
])
def test_estimate_stats(x, sigma, peak):
    s = estimate_stats(x)
    assert s.sigma == sigma and s.peak == peak


def test_estimate_stats_uniform():
    x = np.random.default_rng(3).uniform(-128, 128, 10**6)
    assert estimate_stats(x).sigma == pytest.approx(128 / math.sqrt(3), abs=0.2)


@given(arrays(np.float64, st.integers(1, 64), elements=finite), st.integers(1, 2**15))
def test_quantization_bound(x, Q):
    q = compand(x, Q)
    assert np.all(np.abs(q.samples) <= Q)
    if q.peak > 0:
        assert np.all(np.abs(q.c * x - q.samples) <= 0.5 * (1 + 1e-12))
        assert np.max(np.abs(q.samples)) == Q


@given(arrays(np.float64, st.integers(2, 64), elements=finite))
def test_stats_sigma_below_peak(x):
    s = estimate_stats(x)
    assert s.sigma <= s.peak * (1 + 1e-12)


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 1000))
def test_inverse_compand_within_half_step(seed, Q):
    x = np.random.default_rng(seed).normal(size=16)
    q = compand(x, Q)
    back = inverse_compand(q.samples, q.c, 1.0)
    assert np.all(np.abs(back - x) <= 0.5 / q.c * (1 + 1e-9))


def test_subnormal_peak_rejected():
    with pytest.raises(ValueError):
        compand([1e-320], 16)


def test_fidelity_nondecreasing_in_q():
    rng = np.random.default_rng(11)
    violations = 0
    trials = 120
    for _ in range(trials):
        s = rng.normal(size=64)
        k = rng.normal(size=9)
        ref = np.convolve(s, k)
        snrs = []
        for Q in (4, 8, 16, 32, 64):
            qs, qk = compand(s, Q), compand(k, Q)
            out = inverse_compand(np.convolve(qs.samples, qk.samples), qs.c, qk.c)
            snrs.append(measured_snr_db(ref, out))
        violations += sum(b < a for a, b in zip(snrs, snrs[1:]))
    assert violations <= 0.02 * trials * 4
