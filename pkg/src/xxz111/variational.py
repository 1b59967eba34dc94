"""Twisted trial states and the variational bound on the interface gap.

The trial state is ``T(phi) psi_0`` with ``phi(x) = (S/R) f(y(x))``, where
``y`` are the rescaled transverse coordinates and ``f`` a radial profile on
the unit disk vanishing on its boundary.  Exact energies and overlaps come
from partition polynomials; the analytic bounds are closed-form in a few
norms of ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize, special

from .lattice import VORONOI_RADIUS, Volume, project
from .partition import (HypothesisError, partition_polynomial,
                        partition_polynomial_from_levels, phase_polynomial)

ROUNDED_ROOT = 2.406
HEADLINE_CONSTANT = 100.0


def z0(tol: float = 1e-12) -> float:
    """First positive zero of ``J0``, by bisection on ``[2, 3]``."""
    return float(optimize.bisect(special.j0, 2.0, 3.0, xtol=tol))


@dataclass(frozen=True)
class RadialProfile:
    """``f(r)`` on the unit disk with the derivatives needed for the norms.

    ``df_over_r`` is ``f'(r)/r`` supplied separately so that it is finite
    at ``r = 0``.
    """

    name: str
    f: Callable
    df: Callable
    d2f: Callable
    df_over_r: Callable
    scale: float = 1.0

    def scaled(self, c: float) -> "RadialProfile":
        return RadialProfile(self.name, self.f, self.df, self.d2f, self.df_over_r, self.scale * c)

    def __call__(self, y) -> np.ndarray:
        """Profile value at points ``y`` of shape ``(..., 2)``; zero outside the disk."""
        r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return np.where(r <= 1.0, self.scale * self.f(np.minimum(r, 1.0)), 0.0)

    def gradient(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        g = self.scale * self.df_over_r(np.minimum(r, 1.0))
        return np.where((r <= 1.0)[..., None], g[..., None] * y, 0.0)


def bessel_profile() -> RadialProfile:
    """``J0(z0 r)``, the first Dirichlet eigenfunction of the unit disk."""
    k = z0()

    def j1_over_x(x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x == 0, 1.0, x)
        return np.where(x == 0, 0.5, special.j1(safe) / safe)

    return RadialProfile(
        "bessel",
        f=lambda r: special.j0(k * np.asarray(r)),
        df=lambda r: -k * special.j1(k * np.asarray(r)),
        d2f=lambda r: -k * k * (special.j0(k * np.asarray(r)) - j1_over_x(k * np.asarray(r))),
        df_over_r=lambda r: -k * k * j1_over_x(k * np.asarray(r)),
    )


def parabolic_profile() -> RadialProfile:
    """``1 - r^2``; Rayleigh quotient exactly 6."""
    return RadialProfile(
        "parabola",
        f=lambda r: 1 - np.asarray(r) ** 2,
        df=lambda r: -2 * np.asarray(r, dtype=float),
        d2f=lambda r: np.full(np.shape(r), -2.0),
        df_over_r=lambda r: np.full(np.shape(r), -2.0),
    )


@dataclass(frozen=True)
class ProfileNorms:
    """Norms of a profile on the unit disk ``Omega``, ``m(Omega) = pi``.

    ``sup_d1`` and ``sup_d2`` are maxima of the largest Cartesian component
    of the gradient and Hessian; ``sup_grad`` is the maximum of ``|grad f|``.
    """

    l2_grad: float
    l2: float
    sup_d1: float
    sup_d2: float
    sup: float
    sup_grad: float

    @classmethod
    def rounded(cls) -> "ProfileNorms":
        """Bessel constants rounded to two decimals, with ``sup_grad = sup_d1``."""
        return cls(1.56, 0.27, 1.40, 2.90, 1.0, 1.40)


def _radial_integral(g: Callable) -> float:
    # (1/pi) * int_disk g dA = 2 int_0^1 g(r) r dr
    val, err = integrate.quad(lambda r: 2 * r * float(g(r)), 0.0, 1.0,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-9:
        raise ArithmeticError(f"radial quadrature did not converge (error {err:.2e})")
    return val


def _radial_max(g: Callable, n: int = 4001) -> float:
    r = np.linspace(0.0, 1.0, n)
    v = np.abs(g(r))
    k = int(np.argmax(v))
    lo, hi = r[max(k - 1, 0)], r[min(k + 1, n - 1)]
    res = optimize.minimize_scalar(lambda t: -abs(float(g(np.array([t]))[0])),
                                   bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return float(max(v[k], -res.fun))


def profile_norms(p: RadialProfile) -> ProfileNorms:
    c = p.scale
    l2_grad = c * c * _radial_integral(lambda r: p.df(r) ** 2)
    l2 = c * c * _radial_integral(lambda r: p.f(r) ** 2)
    sup_d1 = abs(c) * _radial_max(p.df)

    def hess_max(r):
        # Cartesian Hessian entries of a radial function are bounded by
        # |f''|, |f'/r| (diagonal) and |f'' - f'/r| / 2 (off-diagonal)
        a, b = p.d2f(r), p.df_over_r(r)
        return np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(a - b) / 2)

    sup_d2 = abs(c) * _radial_max(hess_max)
    sup = abs(c) * _radial_max(p.f)
    return ProfileNorms(l2_grad, l2, sup_d1, sup_d2, sup, sup_d1)


def rayleigh(p: RadialProfile) -> float:
    """``||grad f||^2 / ||f||^2`` on the unit disk."""
    return _radial_integral(lambda r: p.df(r) ** 2) / _radial_integral(lambda r: p.f(r) ** 2)


@dataclass(frozen=True)
class PhaseField:
    """``phi(x) = (S/R) f(y(x))`` on the sites of ``support`` (all sites if ``None``).

    ``y(x)`` is the transverse projection divided by ``R``, so ``phi`` is
    unchanged by ``x -> x + (1, 1, 1)``.
    """

    profile: RadialProfile
    R: float
    S: float
    support: Volume | None = None

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")

    def values(self, v: Volume) -> np.ndarray:
        phi = (self.S / self.R) * self.profile(project(v.sites) / self.R)
        if self.support is not None:
            mask = np.zeros(len(v), dtype=bool)
            mask[v.site_indices_of(self.support)] = True
            phi = np.where(mask, phi, 0.0)
        return phi

    @property
    def sup(self) -> float:
        return abs(self.S / self.R) * profile_norms(self.profile).sup


def _phases(v: Volume, phi) -> np.ndarray:
    if isinstance(phi, PhaseField):
        return phi.values(v)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0:
        phi = np.full(len(v), float(phi))
    if phi.shape != (len(v),):
        raise ValueError(f"phase array has shape {phi.shape}, expected ({len(v)},)")
    return phi


def _check_field_support(v: Volume, phi) -> None:
    if isinstance(phi, PhaseField) and phi.support is not None and not v.contains_volume(phi.support):
        raise ValueError("phase field support is not contained in the volume")


def pq_table(v: Volume, q: float) -> np.ndarray:
    """``P(l)`` for every sector at once, shape ``(|v| + 1, L)``; see :func:`pq_profile`."""
    z = partition_polynomial(v, q)
    lv = np.asarray(v.levels)
    lnq = math.log(q)
    out = np.zeros((len(v) + 1, v.L))
    n = np.arange(1, len(v) + 1)
    for j, l in enumerate(range(-v.L // 2, v.L // 2)):
        rest = np.delete(lv, [int(np.nonzero(lv == l)[0][0]), int(np.nonzero(lv == l + 1)[0][0])])
        zr = partition_polynomial_from_levels(rest, q)
        log_zb = np.logaddexp(2 * l * lnq, 2 * (l + 1) * lnq)
        log_zr = np.array([zr.log(k - 1) for k in n])
        out[1:, j] = np.exp(log_zr + log_zb - z.log_coeffs[1:])
    return out


def pq_profile(v: Volume, n: int, q: float) -> np.ndarray:
    """``P(l) = Z(v \\ b, n-1) Z(b, 1) / Z(v, n)`` for ``l = -L/2 .. L/2 - 1``.

    Depends on the bond only through the level ``l`` of its lower end.
    """
    if not 0 <= n <= len(v):
        raise ValueError(f"n={n} outside 0..{len(v)}")
    return pq_table(v, q)[n]


def pq_sum_bound(q: float) -> float:
    return 2 * (1 + q * q) / (1 - q * q)


def bond_twists(v: Volume, phi) -> np.ndarray:
    """``1 - cos(phi(x1) - phi(x0))`` for every bond, as ``2 sin^2(d/2)``."""
    p = _phases(v, phi)
    b = v.bond_indices
    return 2 * np.sin(0.5 * (p[b[:, 1]] - p[b[:, 0]])) ** 2


def energy_exact(v: Volume, n: int, q: float, phi) -> float:
    """``<psi|H|psi> / ||psi||^2`` for ``psi = T(phi) psi_0(v, n)``."""
    _check_field_support(v, phi)
    P = pq_profile(v, n, q)
    tw = bond_twists(v, phi)
    lv = np.asarray(v.levels)[v.bond_indices[:, 0]]
    per_bond = P[lv + v.L // 2] * tw
    return float(2 / (q + 1 / q) ** 2 * math.fsum(per_bond))


def energy_bound(norms: ProfileNorms, A_R: int, R: float, S: float, q: float) -> float:
    """``2 (1+q^2)/(1-q^2) (A_R S^2 / R^4 ||grad f||^2 + 6 A_R S^2 R^-5 sup_d2 sup_d1)``."""
    if R < 1:
        raise ValueError("R must be at least 1")
    main = A_R * S * S / R ** 4 * norms.l2_grad
    corr = 6 * A_R * S * S / R ** 5 * norms.sup_d2 * norms.sup_d1
    return pq_sum_bound(q) * (main + corr)


def overlap_exact(v: Volume, n: int, q: float, phi) -> complex:
    """``<psi_0|T(phi)|psi_0> / ||psi_0||^2`` in the ``n``-particle sector."""
    _check_field_support(v, phi)
    pp = phase_polynomial(v, q, _phases(v, phi))
    z = partition_polynomial(v, q)
    return complex(math.exp(pp.log(n) - z.log(n)) * np.exp(1j * pp.phases[n]))


def log_overlap_modsq_exact(v: Volume, n: int, q: float, phi) -> float:
    pp = phase_polynomial(v, q, _phases(v, phi))
    z = partition_polynomial(v, q)
    return 2 * (pp.log(n) - z.log(n))


def overlap_gc(v: Volume, mu: float, q: float, phi) -> complex:
    """``prod_x (1 + e^{i phi} w_x) / (1 + w_x)`` with ``w_x = q^(2(l - mu))``."""
    p = _phases(v, phi)
    lw = 2 * (np.asarray(v.levels, dtype=float) - mu) * math.log(q)
    # (1 + e^{ip} w) / (1 + w) = 1 - s + s e^{ip} with s = w / (1 + w)
    s = np.exp(lw - np.logaddexp(0.0, lw))
    log_mod2 = np.log1p(-4 * s * (1 - s) * np.sin(p / 2) ** 2)
    arg = np.arctan2(s * np.sin(p), 1 - s + s * np.cos(p))
    return complex(np.exp(0.5 * math.fsum(log_mod2) + 1j * math.fsum(arg)))


def log_overlap_gc_modsq(v: Volume, mu: float, q: float, phi) -> float:
    """``ln |<T(phi)>_GC|^2`` in the ``1 - (1 - tanh^2)(1 - cos)/2`` product form."""
    p = _phases(v, phi)
    a = 2 * abs(math.log(q))
    sech2 = 1 - np.tanh(a * (np.asarray(v.levels, dtype=float) - mu) / 2) ** 2
    one_minus_cos = 2 * np.sin(p / 2) ** 2
    return float(math.fsum(np.log1p(-0.5 * sech2 * one_minus_cos)))


class OverlapBound(NamedTuple):
    log_bound: float
    bracket: float
    path: str


def _voronoi_term(norms: ProfileNorms, path: str) -> float:
    if path == "componentwise":
        return math.sqrt(6) * norms.sup_d1 * norms.sup
    if path == "geometric":
        return VORONOI_RADIUS * norms.sup_grad * norms.sup
    raise ValueError(f"unknown path {path!r}")


def overlap_bound(norms: ProfileNorms, A_R: int, R: float, S: float, q: float,
                  delta: float, path: str = "componentwise") -> OverlapBound:
    """Upper bound on ``ln |<T(phi)>_GC|^2``.

    ``-q^(2 delta) A_R S^2 / (4 R^2) [l2 - c/R - S^2 sup^4 / (12 R^2)]`` with
    ``c = sqrt(6) sup_d1 sup`` (``path="componentwise"``) or
    ``c = sqrt(2/3) sup_grad sup`` (``path="geometric"``).
    """
    bracket = norms.l2 - _voronoi_term(norms, path) / R - S * S * norms.sup ** 4 / (12 * R * R)
    if bracket <= 0:
        raise HypothesisError(f"denominator bracket {bracket:.3g} <= 0 at R={R}")
    return OverlapBound(-q ** (2 * delta) * A_R * S * S / (4 * R * R) * bracket, bracket, path)


@dataclass(frozen=True)
class GapBoundReport:
    q: float
    delta: float
    R: float
    path: str
    numerator: float
    denominator: float
    assembled: float
    headline: float
    headline_holds: bool
    S: float | None = None
    exact: float | None = None


def headline_bound(q: float, delta: float, R: float) -> float:
    return HEADLINE_CONSTANT * q ** (2 * (1 - delta)) / ((1 - q * q) * R * R)


def gap_bound(q: float, delta: float, R: float, norms: ProfileNorms | None = None,
              path: str = "componentwise") -> GapBoundReport:
    """Linearized gap bound assembled from the energy and overlap bounds.

    ``16 q^(2(1-delta)) / ((1-q^2) R^2) * (l2_grad + 6 sup_d2 sup_d1 / R) / (l2 - c / R)``
    with ``c`` as in :func:`overlap_bound`.
    """
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    if R <= 0:
        raise ValueError("R must be positive")
    if norms is None:
        norms = profile_norms(bessel_profile())
    num = norms.l2_grad + 6 / R * norms.sup_d2 * norms.sup_d1
    den = norms.l2 - _voronoi_term(norms, path) / R
    if den <= 0:
        raise HypothesisError(f"denominator {den:.3g} <= 0 at R={R}")
    pref = 16 * q ** (2 * (1 - delta)) / ((1 - q * q) * R * R)
    assembled = pref * num / den
    head = headline_bound(q, delta, R)
    return GapBoundReport(q, delta, R, path, num, den, assembled, head, assembled <= head)


def headline_crossover(norms: ProfileNorms | None = None, path: str = "componentwise") -> float:
    """Smallest ``R`` beyond which the assembled bound stays below the headline.

    The ratio assembled/headline does not depend on ``q`` or ``delta``.
    """
    if norms is None:
        norms = profile_norms(bessel_profile())
    c = _voronoi_term(norms, path)
    b = 6 * norms.sup_d2 * norms.sup_d1
    # 16 (l2_grad + b/R) = 100 (l2 - c/R)  =>  R = (16 b + 100 c) / (100 l2 - 16 l2_grad)
    lim = HEADLINE_CONSTANT * norms.l2 - 16 * norms.l2_grad
    if lim <= 0:
        return math.inf
    return (16 * b + HEADLINE_CONSTANT * c) / lim


def gap_bound_limit(q: float, delta: float, norms: ProfileNorms | None = None) -> float:
    """``lim R^2 * assembled`` as ``R -> infinity``."""
    if norms is None:
        norms = profile_norms(bessel_profile())
    return 16 * q ** (2 * (1 - delta)) / (1 - q * q) * norms.l2_grad / norms.l2


def variational_gap_exact(v: Volume, n: int, q: float, phi) -> float:
    """``E(psi) / (1 - |<psi_0|psi>|^2 / (||psi_0||^2 ||psi||^2))``."""
    p = _phases(v, phi)
    if np.ptp(p) == 0:
        raise ValueError("constant phase field: the trial state is proportional to psi_0")
    e = energy_exact(v, n, q, p)
    lm2 = log_overlap_modsq_exact(v, n, q, p)
    den = -math.expm1(lm2)
    if den <= 0:
        raise ValueError("trial state is numerically parallel to psi_0")
    return e / den


class VoronoiCheck(NamedTuple):
    lhs: float
    rhs: float
    passed: bool
    site_mean: float
    cell_mean: float


def _cell_offsets() -> np.ndarray:
    # hexagonal Voronoi cell of the projected lattice: vertices at the
    # circumcentres of the six triangles around the origin
    nb = project(np.array([[1, -1, 0], [1, 0, -1], [0, 1, -1],
                           [-1, 1, 0], [-1, 0, 1], [0, -1, 1]]))
    ang = np.arctan2(nb[:, 1], nb[:, 0])
    nb = nb[np.argsort(ang)]
    return (nb + np.roll(nb, -1, axis=0)) / 3.0


def _triangle_rule(order: int):
    # collapsed Gauss-Legendre on the reference triangle (0,0), (1,0), (0,1)
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    s = u
    t = v * (1 - u)
    wt = wu * wv * (1 - u)
    return np.stack([s.ravel(), t.ravel()], axis=1), wt.ravel()


def voronoi_check(f: Callable, base, scale: float = 1.0, grad_sup: float | None = None,
                  order: int = 8) -> VoronoiCheck:
    """Compare the site average of ``f(y / scale)`` with its average over the union of cells.

    ``base`` is a set of level-0 sites; cells are the hexagonal Voronoi cells
    of their projections.  ``rhs = sqrt(2/3) / scale * sup |grad f|``; when
    ``grad_sup`` is not given it is estimated by central differences at
    the quadrature nodes and sites.
    """
    pts = project(np.asarray(base, dtype=float).reshape(-1, 3))
    hexv = _cell_offsets()
    ref, w = _triangle_rule(order)
    nodes, weights = [], []
    for k in range(6):
        a, b = hexv[k], hexv[(k + 1) % 6]
        tri = ref[:, :1] * a + ref[:, 1:] * b
        area = 0.5 * abs(a[0] * b[1] - a[1] * b[0])
        nodes.append(tri)
        weights.append(w * 2 * area)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    cell_area = weights.sum()
    all_nodes = (pts[:, None, :] + nodes[None, :, :]) / scale
    vals = np.asarray(f(all_nodes.reshape(-1, 2))).reshape(len(pts), -1)
    cell_mean = float((vals @ weights).sum() / (len(pts) * cell_area))
    site_mean = float(np.mean(f(pts / scale)))
    if grad_sup is None:
        h = 1e-6
        y = np.concatenate([all_nodes.reshape(-1, 2), pts / scale])
        gx = (f(y + [h, 0]) - f(y - [h, 0])) / (2 * h)
        gy = (f(y + [0, h]) - f(y - [0, h])) / (2 * h)
        grad_sup = float(np.max(np.hypot(gx, gy)))
    lhs = abs(site_mean - cell_mean)
    rhs = VORONOI_RADIUS / scale * grad_sup
    return VoronoiCheck(lhs, rhs, lhs <= rhs, site_mean, cell_mean)


def variational_sweep(radii, L: int, q: float, S: float, profile: RadialProfile | None = None):
    """Exact quotient and assembled bound on disk cylinders ``Lambda_R = Lambda``.

    Yields ``(R, A, n, mu, delta, exact, assembled_or_None)``.
    """
    from .ensembles import solve_mu
    from .lattice import disk_base
    from .onedim import delta_of_mu

    profile = profile or bessel_profile()
    norms = profile_norms(profile)
    for R in radii:
        v = Volume(disk_base(R), L)
        n = len(v) // 2
        mu = solve_mu(n / len(v), L, q)
        d = delta_of_mu(mu)
        field = PhaseField(profile, R, S)
        exact = variational_gap_exact(v, n, q, field)
        try:
            bound = gap_bound(q, d, R, norms).assembled
        except HypothesisError:
            bound = None
        yield R, v.A, n, mu, d, exact, bound

