"""Canonical partition polynomials and the activity sandwich.

``Z(Lambda, n)`` is the coefficient of ``z**n`` in ``prod_x (1 + q^(2 l(x)) z)``;
the grand-canonical partition function is the same product at
``z = q^(-2 mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _logpoly, onedim
from .lattice import Volume

RATIONAL_MAX_SITES = 24


def _as_levels(v) -> np.ndarray:
    if isinstance(v, Volume):
        return np.asarray(v.levels, dtype=np.int64)
    return np.asarray(v, dtype=np.int64).ravel()


def _check_q(q) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")


@dataclass(frozen=True, eq=False)
class PartitionPolynomial:
    """Coefficients ``c_n``, ``n = 0..N``, of a product of site factors.

    Attributes
    ----------
    levels : ndarray
        Level of every site that contributed a factor.
    q : float or Fraction
    log_coeffs : ndarray
        ``log|c_n|``; ``-inf`` marks an exact zero.
    phases : ndarray or None
        ``arg c_n`` for the phase-twisted variant, ``None`` when real.
    exact : tuple of Fraction or None
        Exact coefficients (rational mode only).
    """

    levels: np.ndarray
    q: float
    log_coeffs: np.ndarray
    phases: np.ndarray | None = None
    exact: tuple | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.levels)

    @property
    def is_complex(self) -> bool:
        return self.phases is not None

    def log(self, n: int) -> float:
        """``log|c_n|``; ``-inf`` outside ``0..N``."""
        if 0 <= n <= self.size:
            return float(self.log_coeffs[n])
        return -math.inf

    def value(self, n: int):
        """``c_n`` as float/complex (may overflow for large volumes)."""
        mag = math.exp(self.log(n))
        if self.phases is None:
            return mag
        return mag * complex(math.cos(self.phases[n]), math.sin(self.phases[n]))

    def values(self) -> np.ndarray:
        mag = np.exp(self.log_coeffs)
        if self.phases is None:
            return mag
        return mag * np.exp(1j * self.phases)

    def log_generating(self, mu: float) -> float:
        """``log sum_n |c_n| q^(-2 mu n)`` evaluated from the coefficients."""
        n = np.arange(self.size + 1)
        return _logpoly.logsumexp(self.log_coeffs - 2 * mu * math.log(self.q) * n)


def partition_polynomial_from_levels(levels, q, rational: bool = False) -> PartitionPolynomial:
    """Partition polynomial of a multiset of site levels.

    Sites are folded in plane by plane from the lowest level up.
    """
    _check_q(q)
    levels = np.sort(_as_levels(levels), kind="stable")
    exact = None
    if rational:
        if len(levels) > RATIONAL_MAX_SITES:
            raise ValueError(f"rational mode is limited to {RATIONAL_MAX_SITES} sites")
        qf = Fraction(q)
        exact = tuple(_logpoly.exact_product([qf ** (2 * int(l)) for l in levels]))
        log_coeffs = np.array([math.log(c) if c else -math.inf for c in exact])
        return PartitionPolynomial(levels, qf, log_coeffs, None, exact)
    log_w = 2.0 * levels * math.log(q)
    return PartitionPolynomial(levels, float(q), _logpoly.real_product(log_w))


def partition_polynomial(v: Volume, q, rational: bool = False) -> PartitionPolynomial:
    """``Z(v, n)`` for every ``n``.

    Parameters
    ----------
    v : Volume
    q : float, or Fraction/str in rational mode
    rational : bool
        Exact arithmetic (at most 24 sites).
    """
    if rational and isinstance(q, str):
        q = Fraction(q)
    return partition_polynomial_from_levels(v.levels, q, rational=rational)


def grand_partition(v, q: float, mu: float) -> float:
    """``log prod_x (1 + q^(2 (l(x) - mu)))`` in closed form."""
    _check_q(q)
    lv = _as_levels(v).astype(float)
    return float(np.sum(np.logaddexp(0.0, 2.0 * (lv - mu) * math.log(q))))


def activity_ratio(p: PartitionPolynomial, n: int, k: int) -> float:
    """``log Z(n) - log Z(n - k)``."""
    if not (0 <= n <= p.size and 0 <= n - k <= p.size):
        raise ValueError(f"indices n={n}, n-k={n - k} outside 0..{p.size}")
    return p.log(n) - p.log(n - k)


class HypothesisError(ValueError):
    """Raised when the assumptions behind an analytic bound fail."""


def ratio_constant(A0: float, A: float, sigma2: float) -> float:
    """``C(A0, A) = (1 + A0/(sigma^2 sqrt A)) / (1 - A0/(sigma^2 sqrt A))``."""
    t = A0 / (sigma2 * math.sqrt(A))
    if t >= 1:
        raise HypothesisError(f"C({A0}, {A}) undefined: A0/(sigma^2 sqrt A) = {t:.3g} >= 1")
    return (1 + t) / (1 - t)


@dataclass(frozen=True)
class ActivityWindow:
    """Parameters of the activity bounds for ``Z(n)/Z(n-k)`` on ``A`` sticks of length ``L``."""

    q: float
    L: int
    A: int
    A0: float
    k: int
    mu: float
    a: float = field(init=False)
    sigma2: float = field(init=False)
    mean: float = field(init=False)
    C: float = field(init=False)
    C_half: float = field(init=False)

    def __post_init__(self):
        _check_q(self.q)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("a", onedim.activity(self.q))
        set_("sigma2", onedim.variance(self.L, self.mu, self.q))
        set_("mean", onedim.mean_N(self.L, self.mu, self.q))
        if abs(self.k) > 0.5 * self.A0 * math.sqrt(self.A) * (1 + 1e-12):
            raise HypothesisError(f"|k|={abs(self.k)} exceeds A0 sqrt(A)/2")
        set_("C", ratio_constant(self.A0, self.A, self.sigma2))
        set_("C_half", ratio_constant(self.A0 / 2, self.A, self.sigma2))


@dataclass(frozen=True)
class ActivityBracket:
    """Bracket ``lower <= log(Z(n)/Z(n-k)) <= upper`` and the form that produced it."""

    lower: float
    upper: float
    form: str


def activity_bounds(w: ActivityWindow, n: int, form: str = "auto",
                    mu_tol: float = 1e-9) -> ActivityBracket:
    """Two-sided bound on ``log Z(n)/Z(n-k)``.

    ``form`` is ``"general"`` (constant ``C(A0, A)``), ``"rat1"`` (``mu``
    solves ``<N> = n/A``), ``"rat2"`` (``mu`` solves ``<N> = (n-k)/A``), or
    ``"auto"`` to pick the sharpest applicable one.  The special forms bound
    ``q^(-2 k mu) Z(n)/Z(n-k)``; they are shifted back here so that every
    bracket refers to the same quantity.

    ``"rat2-swapped"`` puts the larger ``rat2`` exponent at the lower end,
    which leaves the bracket empty once ``k^2/A`` is moderately large;
    ``"rat2"`` orders them.
    """
    A, k, q = w.A, w.k, w.q
    if not (0 <= n <= A * (w.L + 1) and 0 <= n - k <= A * (w.L + 1)):
        raise ValueError(f"n={n}, k={k} out of range for |Lambda|={A * (w.L + 1)}")
    if abs(n - A * w.mean) > 0.5 * w.A0 * math.sqrt(A) * (1 + 1e-12):
        raise HypothesisError(f"|n - A<N>| = {abs(n - A * w.mean):.3g} exceeds A0 sqrt(A)/2")
    lnq = math.log(q)
    on_n = abs(n / A - w.mean) < mu_tol
    on_nk = abs((n - k) / A - w.mean) < mu_tol
    if form == "auto":
        form = "rat1" if on_n else "rat2" if on_nk else "general"
    if form == "general":
        expo = k * (2 * n / A - 2 * w.mean + 2 * w.mu * w.a * w.sigma2 - k / A) / (w.a * w.sigma2)
        centre = expo * lnq
        logC = math.log(w.C)
        return ActivityBracket(centre - logC, centre + logC, form)
    q2 = q * q
    lo_exp = k * k * (1 - q2) / (2 * w.a * (1 + q2) * A)
    hi_exp = 2 * k * k * (1 - q2) / (w.a * q2 * A)
    logC = math.log(w.C_half)
    shift = 2 * k * w.mu * lnq
    if form == "rat1":
        if not on_n:
            raise HypothesisError("rat1 needs mu solving <N> = n/A")
        lower, upper = -lo_exp * lnq - logC, -hi_exp * lnq + logC
    elif form in ("rat2", "rat2-swapped"):
        if not on_nk:
            raise HypothesisError("rat2 needs mu solving <N> = (n-k)/A")
        if form == "rat2":
            lower, upper = hi_exp * lnq - logC, lo_exp * lnq + logC
        else:
            lower, upper = lo_exp * lnq - logC, hi_exp * lnq + logC
    else:
        raise ValueError(f"unknown form {form!r}")
    return ActivityBracket(lower + shift, upper + shift, form)


def xi_factor(v: Volume, v0: Volume, n: int, q: float, mu: float | None = None) -> float:
    """``Z(v, n) q^(-2 mu rho |v0|) / (Z(v \\ v0, floor(rho |v0^c|)) Z_GC(v0, mu))``.

    ``rho = n/|v|``; ``mu`` defaults to the stick solution of
    ``<N> = rho (L + 1)``.
    """
    from .ensembles import solve_mu

    if v0.L != v.L:
        raise ValueError("volumes must share the stick length")
    idx0 = v.site_indices_of(v0)
    if len(idx0) == len(v):
        raise ValueError("subvolume must be a proper subset")
    rho = n / len(v)
    if mu is None:
        mu = solve_mu(rho, v.L, q)
    comp = np.delete(np.asarray(v.levels), idx0)
    m = math.floor(rho * len(comp))
    zc = partition_polynomial_from_levels(comp, q)
    z = partition_polynomial(v, q)
    log_xi = (z.log(n) - 2 * mu * rho * len(v0) * math.log(q)
              - zc.log(m) - grand_partition(v0, q, mu))
    return math.exp(log_xi)


def phase_polynomial(v: Volume, q: float, phi, support: Volume | None = None) -> PartitionPolynomial:
    """Coefficients of ``prod_x (1 + e^(i phi(x)) q^(2 l(x)) z)``.

    Coefficient ``n`` equals ``<psi_0(n)| T(phi) |psi_0(n)>``.  ``phi`` is a
    per-site array (or anything with ``values(volume)``); if ``support`` is
    given, ``phi`` must vanish outside it.
    """
    _check_q(q)
    phi = _site_phases(v, phi)
    if support is not None:
        outside = np.ones(len(v), dtype=bool)
        outside[v.site_indices_of(support)] = False
        if np.any(phi[outside] != 0):
            raise ValueError("phase field is not supported inside the given subvolume")
    order = np.argsort(v.levels, kind="stable")
    lv = np.asarray(v.levels)[order]
    lm, ph = _logpoly.complex_product(2.0 * lv * math.log(q), phi[order])
    return PartitionPolynomial(lv, float(q), lm, ph)


def _site_phases(v: Volume, phi) -> np.ndarray:
    if hasattr(phi, "values") and not isinstance(phi, np.ndarray):
        phi = phi.values(v)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0:
        phi = np.full(len(v), float(phi))
    if phi.shape != (len(v),):
        raise ValueError(f"phase array has shape {phi.shape}, expected ({len(v)},)")
    return phi
