"""Canonical and grand-canonical expectations of gauge-invariant observables.

An :class:`Observable` lives on a small cylinder ``Lambda_0`` and is stored
as one dense block per particle-number sector of ``Lambda_0``; anything
with matrix elements between sectors (``S^+``, ``S^x``, ...) is rejected.
Canonical expectations on a large ``Lambda`` reduce to sector expectations
on ``Lambda_0`` weighted by ``Z(Lambda \\ Lambda_0, n - n0) Z(Lambda_0, n0) / Z(Lambda, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect

from . import onedim
from ._logpoly import logsumexp
from .lattice import Volume
from .partition import (HypothesisError, partition_polynomial,
                        partition_polynomial_from_levels)
from .spin_exact import SectorBasis, ground_state

MAX_SUPPORT = 12


def _full_index(masks: np.ndarray, N: int) -> np.ndarray:
    # sector masks put site i on bit i; the tensor-product basis puts it on bit N-1-i
    out = np.zeros_like(masks)
    for i in range(N):
        out |= ((masks >> i) & 1) << (N - 1 - i)
    return out


@dataclass(frozen=True, eq=False)
class Observable:
    """Gauge-invariant operator on ``support``, one block per sector ``n0``."""

    support: Volume
    blocks: tuple
    name: str = "X"

    def __post_init__(self):
        N = len(self.support)
        if N > MAX_SUPPORT:
            raise ValueError(f"observable support has {N} sites, limit is {MAX_SUPPORT}")
        if len(self.blocks) != N + 1:
            raise ValueError(f"expected {N + 1} sector blocks, got {len(self.blocks)}")
        for n0, b in enumerate(self.blocks):
            d = math.comb(N, n0)
            if np.shape(b) != (d, d):
                raise ValueError(f"block {n0} has shape {np.shape(b)}, expected ({d}, {d})")

    @classmethod
    def from_diagonal(cls, support: Volume, f, name: str = "X") -> "Observable":
        """Diagonal observable with value ``f(occupations)`` on each configuration."""
        blocks = []
        for n0 in range(len(support) + 1):
            occ = SectorBasis(support, n0).occupations()
            blocks.append(np.diag(np.asarray(f(occ))))
        return cls(support, tuple(blocks), name)

    @classmethod
    def identity(cls, support: Volume) -> "Observable":
        return cls.from_diagonal(support, lambda occ: np.ones(len(occ)), "identity")

    @classmethod
    def occupation(cls, support: Volume, site) -> "Observable":
        """Particle number (down spin indicator) at ``site`` (coordinates or index)."""
        i = _site_index(support, site)
        return cls.from_diagonal(support, lambda occ: occ[:, i].astype(float), f"occ[{i}]")

    @classmethod
    def bond_occupancy(cls, support: Volume, bond) -> "Observable":
        """``Y_b``: indicator that exactly one end of ``bond = (x0, x1)`` is occupied."""
        i, j = (_site_index(support, x) for x in bond)
        return cls.from_diagonal(support, lambda occ: (occ[:, i] != occ[:, j]).astype(float),
                                 f"Y[{i},{j}]")

    @classmethod
    def twist(cls, support: Volume, phi) -> "Observable":
        """``T(phi) = prod_x exp(i phi(x) alpha(x))``, diagonal and unitary."""
        phi = np.asarray(phi, dtype=float)
        return cls.from_diagonal(support, lambda occ: np.exp(1j * (occ @ phi)), "twist")

    @classmethod
    def from_full_matrix(cls, support: Volume, M, atol: float = 1e-12, name: str = "X") -> "Observable":
        """Split a ``2^N x 2^N`` matrix into sector blocks.

        The tensor-product basis orders site 0 as the most significant
        factor with ``(up, down)`` on each site.  Raises ``ValueError`` when
        ``M`` couples different particle numbers.
        """
        N = len(support)
        M = np.asarray(M)
        if M.shape != (2 ** N, 2 ** N):
            raise ValueError(f"matrix shape {M.shape} does not match 2^{N}")
        pop = np.array([bin(k).count("1") for k in range(2 ** N)])
        leak = np.abs(M[pop[:, None] != pop[None, :]])
        if leak.size and leak.max() > atol:
            raise ValueError(f"operator is not gauge invariant: inter-sector element {leak.max():.3g}")
        blocks = []
        for n0 in range(N + 1):
            idx = _full_index(SectorBasis(support, n0).masks, N)
            blocks.append(M[np.ix_(idx, idx)])
        return cls(support, tuple(blocks), name)

    def to_full_matrix(self) -> np.ndarray:
        N = len(self.support)
        dtype = np.result_type(*self.blocks)
        M = np.zeros((2 ** N, 2 ** N), dtype=dtype)
        for n0, b in enumerate(self.blocks):
            idx = _full_index(SectorBasis(self.support, n0).masks, N)
            M[np.ix_(idx, idx)] = b
        return M

    @property
    def is_real(self) -> bool:
        return all(np.isrealobj(b) for b in self.blocks)

    def sector_expectations(self, q: float) -> np.ndarray:
        """``<X>_{Lambda_0, n0}`` in the ground state of each sector."""
        vals = []
        for n0, b in enumerate(self.blocks):
            psi = ground_state(self.support, n0, q).vector
            vals.append(psi @ (b @ psi))
        out = np.array(vals)
        return out.real if self.is_real else out

    def gs_norm(self, q: float) -> float:
        """``||X||_gs = max_n0 |<X>_{Lambda_0, n0}|``."""
        return float(np.max(np.abs(self.sector_expectations(q))))


def _site_index(support: Volume, site) -> int:
    if np.ndim(site) == 0:
        i = int(site)
        if not 0 <= i < len(support):
            raise ValueError(f"site index {i} outside the support")
        return i
    try:
        return support.index(site)
    except KeyError:
        raise ValueError(f"site {tuple(site)} is not in the observable's support") from None


def _mix(weights_log: np.ndarray, values: np.ndarray):
    w = np.exp(weights_log - logsumexp(weights_log))
    return w @ values


def canonical_weights(v: Volume, n: int, support: Volume, q: float) -> np.ndarray:
    """Distribution of the particle number inside ``support`` in the state ``psi(v, n)``."""
    if not 0 <= n <= len(v):
        raise ValueError(f"n={n} outside 0..{len(v)}")
    idx0 = v.site_indices_of(support)
    comp = np.delete(np.asarray(v.levels), idx0)
    zc = partition_polynomial_from_levels(comp, q)
    z0 = partition_polynomial(support, q)
    z = partition_polynomial(v, q)
    n0 = np.arange(len(support) + 1)
    logw = np.array([zc.log(n - k) for k in n0]) + z0.log_coeffs - z.log(n)
    return np.exp(logw)


def canonical_expect(v: Volume, n: int, X: Observable, q: float):
    """``<X>_{Lambda, n}`` for ``X`` supported inside ``v``."""
    w = canonical_weights(v, n, X.support, q)
    return w @ X.sector_expectations(q)


def grand_canonical_expect(v0: Volume, mu: float, X: Observable, q: float):
    """``<X>^GC_{Lambda_0, mu}``.

    The grand-canonical state is a product over sites, so any sites of
    ``v0`` outside the support of ``X`` drop out.
    """
    if not v0.contains_volume(X.support):
        raise ValueError("observable support is not contained in the volume")
    z0 = partition_polynomial(X.support, q)
    n0 = np.arange(len(X.support) + 1)
    logw = z0.log_coeffs - 2 * mu * math.log(q) * n0
    return _mix(logw, X.sector_expectations(q))


def thermo_limit_expect(X: Observable, mu: float, q: float):
    """``<X>`` in the infinite-volume product state, built on the full Hilbert space of the support.

    Each site carries ``(|up> + q^(l - mu) |down>) / norm``; no sector
    decomposition is used, which makes this an independent evaluation.
    """
    lv = np.asarray(X.support.levels, dtype=float)
    amp = np.exp((lv - mu) * math.log(q))
    state = np.ones(1)
    for t in amp:
        state = np.kron(state, np.array([1.0, t]) / math.hypot(1.0, t))
    val = state @ (X.to_full_matrix() @ state)
    return val.real if X.is_real else val


def solve_mu(rho: float, L: int, q: float, tol: float = 1e-12) -> float:
    """``mu`` with ``<N>_{stick, mu} = rho (L + 1)``; exactly ``0`` at ``rho = 1/2``."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho!r}")
    target = rho * (L + 1)
    if 2 * target == L + 1:
        return 0.0
    f = lambda m: onedim.mean_N(L, m, q) - target  # noqa: E731
    a = onedim.activity(q)
    lo, hi = -L / 2 - 1.0, L / 2 + 1.0
    while f(lo) > 0:
        lo -= max(1.0, 10 / a)
    while f(hi) < 0:
        hi += max(1.0, 10 / a)
    mu = bisect(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    if abs(f(mu)) > tol * max(1.0, target):
        raise ArithmeticError(f"solve_mu residual {abs(f(mu)):.3g} above {tol}")
    return float(mu)


@dataclass(frozen=True)
class EquivalenceCertificate:
    """Constants bounding ``|<X>_{Lambda,n} - <X>^GC_{Lambda_0,mu}| / ||X||_gs``.

    ``eps`` is the closed form of the theorem statement, which equals
    ``C1 + C2``; ``eps_proof = 2 C1 + 2 C2`` is what the triangle-inequality
    argument yields; ``eps_full_base`` replaces ``A - A0`` by ``A`` inside
    the second term.
    """

    A: int
    A0: int
    L: int
    q: float
    mu: float
    rho: float
    C1: float
    C2: float
    eps: float
    eps_proof: float
    eps_full_base: float


def certificate(A: int, A0: int, L: int, q: float, rho: float = 0.5,
                mu: float | None = None) -> EquivalenceCertificate:
    a = onedim.activity(q)
    m = A - A0
    if m <= 1:
        raise HypothesisError("need A - A0 > 1")
    den = q * q * math.sqrt(m) - 2 * A0
    if den <= 0:
        raise HypothesisError(f"q^2 (A-A0)^(1/2) = {q * q * math.sqrt(m):.3g} must exceed 2 A0 = {2 * A0}")
    lg = math.log(m)
    C1 = (2 + (1 + a * a) * A0 ** 2 + 0.5 * lg ** 2) / m
    C2 = 4 * A0 / den
    eps = (lg ** 2 + 2 * (1 + a * a) * A0 ** 2 + 4) / (2 * m) + 4 * A0 / den
    den_full = q * q * math.sqrt(A) - 2 * A0
    eps_full = (lg ** 2 + 2 * (1 + a * a) * A0 ** 2 + 4) / (2 * m) + 4 * A0 / den_full
    if mu is None:
        mu = solve_mu(rho, L, q)
    return EquivalenceCertificate(A, A0, L, q, mu, rho, C1, C2, eps, 2 * C1 + 2 * C2, eps_full)


class EquivalenceResult(NamedTuple):
    measured: float
    certificate: EquivalenceCertificate
    passed: bool
    canonical: float
    grand_canonical: float
    gs_norm: float


def equivalence_check(v: Volume, v0: Volume, n: int, X: Observable, q: float) -> EquivalenceResult:
    """Compare ``<X>_{v, n}`` with ``<X>^GC_{v0, mu}`` against the certificate."""
    if v.L != v0.L:
        raise ValueError("volumes must share the stick length")
    if not v.contains_volume(v0):
        raise ValueError("Lambda_0 is not contained in Lambda")
    if not v0.contains_volume(X.support):
        raise ValueError("observable support is not contained in Lambda_0")
    rho = n / len(v)
    mu = solve_mu(rho, v.L, q)
    cert = certificate(v.A, v0.A, v.L, q, rho, mu)
    c = canonical_expect(v, n, X, q)
    g = grand_canonical_expect(v0, mu, X, q)
    measured = float(abs(c - g))
    norm = X.gs_norm(q)
    return EquivalenceResult(measured, cert, measured <= cert.eps * norm, c, g, norm)
