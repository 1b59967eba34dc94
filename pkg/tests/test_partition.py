import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_partition
from xxz111 import _logpoly, onedim, partition
from xxz111.lattice import Volume, build_stick, disk_base, triangle_base
from xxz111.partition import (ActivityWindow, HypothesisError, activity_bounds, grand_partition,
                              partition_polynomial, partition_polynomial_from_levels)


def test_rational_matches_enumeration_triangle():
    v = Volume(triangle_base(), 2)
    p = partition_polynomial(v, "3/10", rational=True)
    assert list(p.exact) == enumerate_partition(v.levels, Fraction(3, 10))
    assert p.exact[0] == 1


def test_stick_L2_closed_form():
    q = Fraction(1, 2)
    p = partition_polynomial(build_stick(2), q, rational=True)
    assert p.exact[1] == q ** -2 + 1 + q ** 2
    assert p.exact[3] == 1


@settings(max_examples=40, deadline=None)
@given(levels=st.lists(st.integers(-6, 6), min_size=1, max_size=12),
       num=st.integers(1, 9))
def test_rational_product_vs_enumeration(levels, num):
    q = Fraction(num, 10)
    p = partition_polynomial_from_levels(levels, q, rational=True)
    assert list(p.exact) == enumerate_partition(levels, q)


@settings(max_examples=40, deadline=None)
@given(levels=st.lists(st.integers(-30, 30), min_size=1, max_size=40),
       q=st.floats(0.05, 0.95))
def test_log_coefficients_vs_rational(levels, q):
    qf = Fraction(q)
    exact = partition_polynomial_from_levels(levels, qf, rational=True).exact
    p = partition_polynomial_from_levels(levels, q)
    ref = np.array([math.log(c) for c in exact])
    assert np.allclose(p.log_coeffs, ref, rtol=1e-11, atol=1e-10)


@pytest.mark.parametrize("mu", [-3.2, -0.5, 0.0, 0.37, 2.0])
def test_generating_function_matches_product(mu):
    v = Volume(disk_base(2.0), 6)
    for q in (0.2, 0.5, 0.8):
        p = partition_polynomial(v, q)
        a, b = p.log_generating(mu), grand_partition(v, q, mu)
        assert abs(a - b) <= 1e-10 * abs(b)


def test_large_volume_no_overflow():
    v = Volume(disk_base(6.0), 40)
    p = partition_polynomial(v, 0.1)
    assert np.all(np.isfinite(p.log_coeffs))
    # sum of level weights is zero: c_N = 1 up to accumulated rounding
    assert p.log(0) == 0.0 and abs(p.log(len(v))) < 1e-9


def test_logsumexp_and_products():
    assert _logpoly.logsumexp([-np.inf, -np.inf]) == -np.inf
    assert abs(_logpoly.logsumexp([0.0, 0.0]) - math.log(2)) < 1e-15
    lm, ph = _logpoly.complex_product([0.0, 0.0], [0.0, math.pi])
    # (1 + z)(1 - z) = 1 - z^2: middle coefficient is an exact zero
    assert lm[1] == -np.inf or math.exp(lm[1]) < 1e-15
    assert abs(math.exp(lm[2]) - 1) < 1e-15 and abs(abs(ph[2]) - math.pi) < 1e-12


def test_phase_polynomial_zero_phase_is_partition():
    v = Volume(triangle_base(), 4)
    pp = partition.phase_polynomial(v, 0.4, np.zeros(len(v)))
    z = partition_polynomial(v, 0.4)
    assert np.allclose(pp.log_coeffs, z.log_coeffs, atol=1e-12)
    assert np.allclose(pp.phases, 0, atol=1e-12)


def test_phase_polynomial_support_check():
    v = Volume(triangle_base(), 2)
    sub = v.sub_cylinder([0])
    phi = np.zeros(len(v))
    phi[v.site_indices_of(sub)] = 0.3
    partition.phase_polynomial(v, 0.5, phi, support=sub)
    phi[-1] = 0.1
    with pytest.raises(ValueError):
        partition.phase_polynomial(v, 0.5, phi, support=sub)


def test_ratio_constant():
    assert partition.ratio_constant(1.0, 100.0, 0.5) == pytest.approx(1.2 / 0.8)
    with pytest.raises(HypothesisError):
        partition.ratio_constant(10.0, 4.0, 0.5)


def _stick_levels(A, L):
    return np.tile(np.arange(-L // 2, L // 2 + 1), A)


@pytest.mark.parametrize("A", [36, 100])
def test_general_bracket_contains_ratio(A):
    q, L, A0 = 0.5, 8, 1.0
    p = partition_polynomial_from_levels(_stick_levels(A, L), q)
    n = A * (L + 1) // 2
    K = int(0.5 * A0 * math.sqrt(A))
    for k in range(-K, K + 1):
        ex = partition.activity_ratio(p, n, k)
        b = activity_bounds(ActivityWindow(q, L, A, A0, k, 0.0), n, "general")
        assert b.lower <= ex <= b.upper


def test_auto_form_selection():
    q, L, A = 0.5, 8, 100
    n = A * (L + 1) // 2
    assert activity_bounds(ActivityWindow(q, L, A, 1.0, 2, 0.0), n).form == "rat1"
    from xxz111.ensembles import solve_mu
    mu = solve_mu((n - 2) / (A * (L + 1)), L, q)
    assert activity_bounds(ActivityWindow(q, L, A, 1.0, 2, mu), n).form == "rat2"
    assert activity_bounds(ActivityWindow(q, L, A, 1.0, 2, 0.01), n).form == "general"


def test_swapped_second_form_is_empty_for_large_shift():
    q, L, A = 0.5, 8, 100
    from xxz111.ensembles import solve_mu
    n = A * (L + 1) // 2
    k = 5
    mu = solve_mu((n - k) / (A * (L + 1)), L, q)
    b = activity_bounds(ActivityWindow(q, L, A, 1.0, k, mu), n, "rat2-swapped")
    assert b.lower > b.upper
    s = activity_bounds(ActivityWindow(q, L, A, 1.0, k, mu), n, "rat2")
    assert s.lower <= s.upper


def test_window_hypotheses():
    with pytest.raises(HypothesisError):
        ActivityWindow(0.5, 8, 100, 1.0, 6, 0.0)
    w = ActivityWindow(0.5, 8, 100, 1.0, 1, 0.0)
    with pytest.raises(HypothesisError):
        activity_bounds(w, 450 + 6)
    with pytest.raises(HypothesisError):
        activity_bounds(w, 450, "rat2")
    assert w.sigma2 == pytest.approx(onedim.variance(8, 0.0, 0.5))


def test_xi_factor_near_one():
    q, L = 0.5, 8
    v = Volume(np.array([[0, 0, 0]] + [[i, -i, 0] for i in range(1, 200)]), L)
    v0 = v.sub_cylinder([0])
    n = len(v) // 2
    xi = partition.xi_factor(v, v0, n, q)
    assert abs(xi - 1) < 0.05


def test_invalid_q():
    with pytest.raises(ValueError):
        partition_polynomial(build_stick(2), 1.0)
    with pytest.raises(ValueError):
        partition_polynomial_from_levels(np.arange(30), 0.5, rational=True)
