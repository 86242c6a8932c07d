import math
from fractions import Fraction

import numpy as np
import pytest

from fedzkp.bounds import (
    SecurityParams,
    advantage_bound,
    compute_err_n,
    convergence_exponent,
    detection_rate_floor,
    near_collision_prob,
)


def ball_oracle(n, t):
    # brute force: count strings within distance t of zero
    return sum(1 for x in range(2**n) if x.bit_count() <= t)


def test_near_collision_prob_exact_values():
    assert near_collision_prob(12, 12) == 1
    assert near_collision_prob(12, 0) == Fraction(1, 4096)
    assert near_collision_prob(12, 2) == Fraction(79, 4096)
    with pytest.raises(ValueError):
        near_collision_prob(12, 13)
    with pytest.raises(ValueError):
        near_collision_prob(12, -1)


def test_near_collision_prob_against_enumeration():
    for n_prime in range(11):
        assert near_collision_prob(10, n_prime) == Fraction(ball_oracle(10, n_prime), 1024)


def test_near_collision_monte_carlo():
    # n=16: empirical frequency within 3 standard errors of the exact value
    rng = np.random.default_rng(42)
    draws = rng.integers(0, 2**16, size=1_000_000, dtype=np.uint32)
    target = int(rng.integers(0, 2**16))
    xored = (draws ^ target).astype(np.uint16)
    dist = np.unpackbits(xored.view(np.uint8)).reshape(-1, 16).sum(axis=1)
    for n_prime in (1, 2, 3, 4):
        p = float(near_collision_prob(16, n_prime))
        freq = float(np.mean(dist <= n_prime))
        se = math.sqrt(p * (1 - p) / 1_000_000)
        assert abs(freq - p) <= 3 * se


def test_compute_err_n_trivial_anchors():
    assert compute_err_n(4, 1) == 2
    assert compute_err_n(10, 1) == 5
    assert compute_err_n(12, Fraction(1, 4096)) == 0
    with pytest.raises(ValueError):
        compute_err_n(12, Fraction(1, 8192))  # below 2^-n
    with pytest.raises(ValueError):
        compute_err_n(12, Fraction(10, 4096))  # falls in an odd-sum gap
    with pytest.raises(ValueError):
        compute_err_n(12, 0)
    with pytest.raises(ValueError):
        compute_err_n(5, 1)  # odd n cannot bracket p_r = 1


def test_compute_err_n_bracketing_inversion():
    # oracle: choose t, sample a target inside its bracket, invert
    import random

    picker = random.Random(1)  # stdlib randint handles arbitrary-size brackets
    for n in (8, 16, 33, 64, 129):
        for t in range(1, n // 2):
            lo = sum(math.comb(n, i) for i in range(2 * t))  # S(2t-1)
            hi = lo + math.comb(n, 2 * t)
            target = picker.randint(lo + 1, hi)
            assert compute_err_n(n, Fraction(target, 2**n)) == t


def test_compute_err_n_reference_setting():
    # frozen by the big-integer oracle; the crude entropy estimate says 150+-3
    assert compute_err_n(1024, Fraction(1, 2**128)) == 153


def test_detection_rate_floor():
    assert detection_rate_floor(64, 0) == 1
    assert detection_rate_floor(64, 64) == 0
    assert detection_rate_floor(1024, 153) == Fraction(871, 1024)
    with pytest.raises(ValueError):
        detection_rate_floor(64, 65)


def test_advantage_bound_exact():
    assert advantage_bound(5, 0, 64, 3, 10) == 0
    assert advantage_bound(0, 7, 64, 3, 10) == 7 * Fraction(2, 3) ** 10
    assert advantage_bound(1, 1, 12, 1, 1) == Fraction(79, 4096) + Fraction(2, 3)
    assert advantage_bound(1, 1, 12, 1, 1) == Fraction(8429, 12288)
    with pytest.raises(ValueError):
        advantage_bound(-1, 1, 12, 1, 1)


def test_advantage_bound_saturates_ball():
    # 2*err_n past n must clamp to the whole space, not overshoot
    assert advantage_bound(1, 1, 8, 8, 0) == Fraction(1, 1) + 1


def test_convergence_exponent_reference_points():
    c1 = convergence_exponent(10_000, 0.025)
    c2 = convergence_exponent(10_000, 0.075)
    assert abs(c1 - 0.713) <= 0.005
    assert abs(c2 - 0.39) <= 0.005
    # frozen values from the exact big-integer oracle
    assert c1 == pytest.approx(0.7141724325131251, rel=1e-12)
    assert c2 == pytest.approx(0.39078009042956874, rel=1e-12)
    # float and exact-rational spellings of the fraction must agree
    assert convergence_exponent(10_000, 0.075) == convergence_exponent(10_000, Fraction(3, 40))


def test_convergence_exponent_monotone_and_validated():
    # stay below frac = 0.25 so 2*floor(frac*n) keeps the ball subexponential
    # and the exponent comfortably above float resolution
    vals = [convergence_exponent(2000, f) for f in (0.01, 0.05, 0.1, 0.15, 0.2)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0
    with pytest.raises(ValueError):
        convergence_exponent(100, 0.5)
    with pytest.raises(ValueError):
        convergence_exponent(100, 0)


def test_security_params_derive():
    sp = SecurityParams.derive(1024)
    assert sp.err_n == 153
    assert sp.r_n == Fraction(871, 1024)
    assert sp.p_r == Fraction(1, 2**128)
    small = SecurityParams.derive(12, Fraction(1, 4096))
    assert small.err_n == 0 and small.r_n == 1
