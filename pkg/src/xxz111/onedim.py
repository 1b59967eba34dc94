"""Grand-canonical statistics of a single 111 stick.

A stick with levels ``-L/2 .. L/2`` at chemical potential ``mu`` is a
product of independent Bernoulli sites with occupation probability
``1 / (1 + exp(a (l - mu)))``, ``a = 2|ln q|``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, log_expit

DEFAULT_TOL = 1e-14


def activity(q: float) -> float:
    """``a = 2|ln q|``."""
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    return 2.0 * abs(math.log(q))


def _levels(L: int) -> np.ndarray:
    if L < 0 or L % 2:
        raise ValueError(f"L must be a non-negative even integer, got {L!r}")
    return np.arange(-L // 2, L // 2 + 1, dtype=float)


def occupation(l, mu: float, q: float):
    """Grand-canonical occupation probability of a site at level ``l``."""
    return expit(-activity(q) * (np.asarray(l, dtype=float) - mu))


def _sech2_quarter(x):
    # 1/(4 cosh^2(x/2)) = p(1-p) for p = expit(x), computed without overflow
    return np.exp(log_expit(x) + log_expit(-x))


def mean_N(L: int, mu: float, q: float) -> float:
    """Mean particle number of a stick, ``sum_l (1 - tanh(a(l - mu)/2)) / 2``."""
    return float(np.sum(occupation(_levels(L), mu, q)))


def F_L(mu: float, q: float, L: int) -> float:
    """Deviation of ``mean_N`` from the linear profile ``mu + (L+1)/2``."""
    return mean_N(L, mu, q) - (mu + (L + 1) / 2)


def _lmax(a: float, tol: float) -> int:
    return int(math.ceil(-math.log(tol) / a)) + 2


def F_inf(mu: float, q: float, tol: float = DEFAULT_TOL) -> float:
    """Infinite-stick limit of :func:`F_L`, periodic with period 1.

    With ``m = mu - floor(mu)``::

        F = -m + tanh(a m / 2) / 2 + sum_{l>=1} [f(l - m) - f(l + m)]

    where ``f(t) = 1 / (1 + exp(a t))``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = activity(q)
    m = mu - math.floor(mu)
    l = np.arange(1, _lmax(a, tol) + 1, dtype=float)
    tail = expit(-a * (l - m)) - expit(-a * (l + m))
    return -m + 0.5 * math.tanh(a * m / 2) + float(np.sum(tail[::-1]))


def F_tail_bound(mu: float, q: float, L: int) -> float:
    """Bound on ``|F_inf(mu) - F_L(mu)|`` for ``|mu| <= L/2``.

    The difference is ``sum_{j>=1} [f(L/2 + j - |mu|) - f(L/2 + j + |mu|)]``
    with ``f`` decreasing; comparing each sum with an integral gives
    ``(1/a) ln[(1 + e^(-a(L/2 - |mu|))) / (1 + e^(-a(L/2 + |mu| + 1)))]``.
    """
    a = activity(q)
    num = math.log1p(math.exp(-a * (L / 2 - abs(mu))))
    den = math.log1p(math.exp(-a * (L / 2 + abs(mu) + 1)))
    return (num - den) / a


def F_tail_bound_half_rate(mu: float, q: float, L: int) -> float:
    """The half-rate variant ``(1/a) ln[(1 + e^(-a(L/2-mu)/2)) / (1 + e^(-a(L/2+mu)/2))]``.

    Kept for comparison; it is violated for ``q`` near 1 and short sticks.
    """
    a = activity(q)
    num = math.log1p(math.exp(-a / 2 * (L / 2 - mu)))
    den = math.log1p(math.exp(-a / 2 * (L / 2 + mu)))
    return (num - den) / a


def variance(L: int, mu: float, q: float) -> float:
    """Particle-number variance ``sigma^2(mu, L)`` of a stick."""
    a = activity(q)
    return float(np.sum(_sech2_quarter(a * (_levels(L) - mu))))


def variance_inf(mu: float, q: float, tol: float = DEFAULT_TOL) -> float:
    """``sigma^2(mu)``, the infinite-stick variance; period 1 in ``mu``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = activity(q)
    m = mu - math.floor(mu)
    n = _lmax(a, tol)
    l = np.arange(-n, n + 2, dtype=float)
    return float(np.sum(np.sort(_sech2_quarter(a * (l - m)))))


def variance_bounds(q: float) -> tuple[float, float]:
    q2 = q * q
    return 0.25 * q2 / (1 - q2), (1 + q2) / (1 - q2)


def variance_tail_bound(mu: float, q: float, L: int) -> float:
    """Bound on ``|sigma^2(mu) - sigma^2(mu, L)|``: ``2 q^(2(L/2 - |mu|)) / (1 - q^2)``."""
    return 2 * q ** (2 * (L / 2 - abs(mu))) / (1 - q * q)


def delta_of_mu(mu: float) -> float:
    """Distance from ``mu`` to the nearest integer."""
    return abs(mu - round(mu))


def _filling_excess(mu: float, q: float) -> float:
    # per-stick particle excess over the sharp cut at the nearest half-integer
    return mu + F_inf(mu, q)


def nu_of_mu(mu: float, q: float) -> float:
    """Filling factor of the interface plane at chemical potential ``mu``."""
    x = _filling_excess(mu, q) - 0.5
    return x - math.floor(x)


def mu_of_nu(nu: float, q: float, tol: float = 1e-13) -> float:
    """Inverse of :func:`nu_of_mu` on the period ``mu in [-1/2, 1/2)``.

    Raises
    ------
    ArithmeticError
        If the forward map is not monotone on the period for this ``q``.
    """
    if not 0 <= nu < 1:
        raise ValueError(f"nu must lie in [0, 1), got {nu!r}")
    grid = np.linspace(-0.5, 0.5, 201)
    g = np.array([_filling_excess(m, q) for m in grid])
    if np.any(np.diff(g) < 0):
        raise ArithmeticError(f"filling map is not monotone for q={q}")
    target = nu - 0.5
    # integer and half-integer mu are fixed points of the map; return them exactly
    for anchor in (-0.5, 0.0):
        if abs(_filling_excess(anchor, q) - target) <= 1e-14:
            return anchor
    lo, hi = -0.5, 0.5
    if target <= _filling_excess(lo, q):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _filling_excess(mid, q) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def delta_of_nu(nu: float, q: float) -> float:
    return delta_of_mu(mu_of_nu(nu, q))


def exp_moment(L: int, mu: float, q: float, A: int = 1, sign: int = 1) -> float:
    """Exact ``<q^(2 s |N - <N>|)>`` for ``A`` independent sticks, ``s = sign``.

    Evaluated from the stick partition polynomial; ``sign=+1`` is the
    quantity bounded by ``4 q^-2`` per stick, ``sign=-1`` the moment used in
    the Chebyshev step of the ensemble comparison.
    """
    from .partition import partition_polynomial_from_levels

    levels = np.tile(_levels(L).astype(int), A)
    poly = partition_polynomial_from_levels(levels, q)
    lnq = math.log(q)
    n = np.arange(len(levels) + 1)
    logp = poly.log_coeffs - 2 * mu * lnq * n
    logp = logp - np.logaddexp.reduce(logp)
    mean = A * mean_N(L, mu, q)
    return float(np.sum(np.exp(logp + 2 * sign * lnq * np.abs(n - mean))))


def exp_moment_bound(q: float, A: int = 1) -> float:
    """``4 q^-2`` for one stick and ``2^(A+1) q^(-2A)`` for ``A`` sticks."""
    if A == 1:
        return 4 / q ** 2
    return 2 ** (A + 1) * q ** (-2 * A)
