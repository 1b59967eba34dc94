import math

import numpy as np
import pytest
from scipy import special

from xxz111 import ensembles, spin_exact
from xxz111 import variational as va
from xxz111.ensembles import Observable
from xxz111.lattice import Volume, build_stick, compact_base, disk_base, project, triangle_base
from xxz111.partition import HypothesisError


@pytest.fixture(scope="module")
def norms():
    return va.profile_norms(va.bessel_profile())


def test_z0_against_scipy():
    assert abs(va.z0() - special.jn_zeros(0, 1)[0]) < 1e-11
    assert abs(va.z0() - va.ROUNDED_ROOT) < 2e-3


def test_bessel_norms_closed_forms(norms):
    # on a zero of J0: int_0^1 J0(z r)^2 r dr = J1(z)^2 / 2
    z = special.jn_zeros(0, 1)[0]
    j1 = special.j1(z)
    assert abs(norms.l2 - j1 ** 2) < 1e-9
    assert abs(norms.l2_grad - z * z * j1 ** 2) < 1e-9
    # |J1| peaks at the first zero of J1' (inside the disk after scaling)
    x1 = special.jnp_zeros(1, 1)[0]
    assert abs(norms.sup_d1 - z * special.j1(x1)) < 1e-8
    # the Hessian peaks at the centre where both radial and angular terms equal z^2/2
    assert abs(norms.sup_d2 - z * z / 2) < 1e-8
    assert abs(norms.sup - 1) < 1e-12
    assert abs(norms.sup_grad - norms.sup_d1) < 1e-8


def test_frozen_bessel_values(norms):
    assert abs(norms.l2_grad - 1.55865) < 1e-5
    assert abs(norms.l2 - 0.269514) < 1e-6
    assert abs(norms.sup_d1 - 1.39928) < 1e-5
    assert abs(norms.sup_d2 - 2.89159) < 1e-5


def test_rayleigh_quotients():
    z = special.jn_zeros(0, 1)[0]
    assert abs(va.rayleigh(va.bessel_profile()) - z * z) < 1e-9
    assert abs(va.rayleigh(va.parabolic_profile()) - 6) < 1e-10
    pn = va.profile_norms(va.parabolic_profile())
    assert abs(pn.l2 - 1 / 3) < 1e-10 and abs(pn.l2_grad - 2) < 1e-10
    assert abs(pn.sup_d1 - 2) < 1e-8 and abs(pn.sup_d2 - 2) < 1e-8


def test_scaled_profile():
    p = va.bessel_profile().scaled(2.0)
    assert abs(p(np.zeros(2)) - 2.0) < 1e-14
    assert p(np.array([1.1, 0.0])) == 0.0


def test_phase_field_geometry():
    R, S = 3.0, 0.2
    f = va.PhaseField(va.bessel_profile(), R, S)
    v = Volume(disk_base(4.0), 4)
    phi = f.values(v)
    # sites three levels apart on a stick differ by (1,1,1) and share phi
    assert np.allclose(phi[v.stick_indices(5)[[0, 3]]], phi[v.stick_indices(5)[0]], atol=1e-15)
    direct = (S / R) * va.bessel_profile()(project(v.sites + 1) / R)
    assert np.allclose(phi, direct, atol=1e-15)
    # unit steps along a stick move the projection, so phi is not constant there
    assert np.ptp(phi[v.stick_indices(5)]) > 1e-3
    assert np.max(np.abs(phi)) <= S / R * (1 + 1e-12)
    assert np.all(phi[np.linalg.norm(v.transverse(R), axis=1) > 1] == 0)


def test_phase_field_support():
    v = Volume(disk_base(3.0), 2)
    sub = v.sub_cylinder(range(7))
    f = va.PhaseField(va.bessel_profile(), 3.0, 0.5, support=sub)
    phi = f.values(v)
    mask = np.zeros(len(v), bool)
    mask[v.site_indices_of(sub)] = True
    assert np.all(phi[~mask] == 0) and np.any(phi[mask] != 0)
    with pytest.raises(ValueError):
        va.energy_exact(Volume(disk_base(1.2), 2), 1, 0.5, f)


def _sector_oracle(v, n, q, phi):
    # twist the explicit ground state and use the sparse sector Hamiltonian
    gs = spin_exact.ground_state(v, n, q)
    occ = gs.basis.occupations()
    psi = np.exp(1j * (occ @ phi)) * gs.vector
    H = spin_exact.hamiltonian(v, n, q).matrix
    e = float(np.real(np.vdot(psi, H @ psi)))
    ov = complex(np.vdot(gs.vector, psi))
    return e, ov


@pytest.mark.parametrize("v,n", [(Volume(triangle_base(), 2), 4), (build_stick(8), 3),
                                 (Volume(disk_base(1.5), 2), 10)])
def test_energy_and_overlap_against_sector_oracle(v, n):
    rng = np.random.default_rng(len(v) + n)
    phi = rng.uniform(-1.5, 1.5, len(v))
    for q in (0.3, 0.6):
        e, ov = _sector_oracle(v, n, q, phi)
        assert abs(va.energy_exact(v, n, q, phi) - e) < 1e-12
        assert abs(va.overlap_exact(v, n, q, phi) - ov) < 1e-12
        assert abs(va.log_overlap_modsq_exact(v, n, q, phi) - math.log(abs(ov) ** 2)) < 1e-10


def test_pq_profile_formula():
    # P(l) from its definition: sum over configurations with one particle on the bond
    v = build_stick(4)
    q = 0.5
    for n in (1, 2, 3):
        gs = spin_exact.ground_state(v, n, q)
        occ = gs.basis.occupations()
        w = gs.vector ** 2
        P = va.pq_profile(v, n, q)
        for k, l in enumerate(range(-2, 2)):
            i, j = l + 2, l + 3
            ref = w[occ[:, i] != occ[:, j]].sum()
            assert abs(P[k] - ref) < 1e-13
    assert np.array_equal(va.pq_table(v, q)[2], va.pq_profile(v, 2, q))


def test_energy_is_pq_weighted_twist_sum():
    v = Volume(compact_base(3), 4)
    q, n = 0.5, 6
    phi = np.linspace(0, 1, len(v))
    P = va.pq_profile(v, n, q)
    b = v.bond_indices
    ref = sum(P[v.levels[i] + 2] * (1 - math.cos(phi[j] - phi[i])) for i, j in b)
    assert abs(va.energy_exact(v, n, q, phi) - 2 * ref / (q + 1 / q) ** 2) < 1e-14


@pytest.mark.parametrize("mu", [0.0, 0.3])
def test_gc_overlap_paths(mu):
    v = Volume(triangle_base(), 2)
    sup = v.sub_cylinder([0, 1])
    rng = np.random.default_rng(2)
    phi = rng.uniform(-2, 2, len(sup))
    X = Observable.twist(sup, phi)
    ref = ensembles.thermo_limit_expect(X, mu, 0.5)
    assert abs(va.overlap_gc(sup, mu, 0.5, phi) - ref) < 1e-13
    assert abs(va.log_overlap_gc_modsq(sup, mu, 0.5, phi) - math.log(abs(ref) ** 2)) < 1e-12


def test_energy_bound_holds(norms):
    q, S = 0.5, 0.3
    for R in (2.0, 3.0, 4.0):
        v = Volume(disk_base(R), 4)
        f = va.PhaseField(va.bessel_profile(), R, S)
        e = va.energy_exact(v, len(v) // 2, q, f)
        assert e <= va.energy_bound(norms, v.A, R, S, q)


@pytest.mark.parametrize("R", [80.0, 120.0])
@pytest.mark.parametrize("q", [0.3, 0.6])
def test_gc_overlap_bound(norms, R, q):
    S = 1.0
    v = Volume(disk_base(R), 8)
    f = va.PhaseField(va.bessel_profile(), R, S)
    exact = va.log_overlap_gc_modsq(v, 0.0, q, f)
    for path in ("componentwise", "geometric"):
        b = va.overlap_bound(norms, v.A, R, S, q, 0.0, path)
        assert exact <= b.log_bound


def test_overlap_bound_hypothesis(norms):
    with pytest.raises(HypothesisError):
        va.overlap_bound(norms, 7, 2.0, 0.1, 0.5, 0.0)


def test_headline_comparison(norms):
    r = va.gap_bound(0.5, 0.0, 71.0, norms)
    assert abs(r.assembled - 0.009094) < 1e-5
    assert abs(r.headline - 100 * 0.25 / (0.75 * 71 ** 2)) < 1e-15
    assert not r.headline_holds
    assert abs(va.headline_crossover(norms) - 363.23) < 0.05
    assert abs(va.headline_crossover(norms, "geometric") - 249.7) < 0.1
    assert va.gap_bound(0.5, 0.0, 364.0, norms).headline_holds
    assert not va.gap_bound(0.5, 0.0, 363.0, norms).headline_holds


def test_ratio_independent_of_q_delta(norms):
    ratios = {va.gap_bound(q, d, 150.0, norms).assembled / va.headline_bound(q, d, 150.0)
              for q in (0.1, 0.5, 0.9) for d in (0.0, 0.25, 0.5)}
    assert max(ratios) - min(ratios) < 1e-12


def test_gap_bound_limit(norms):
    lim = va.gap_bound_limit(0.4, 0.1, norms)
    R = 1e7
    assert abs(R * R * va.gap_bound(0.4, 0.1, R, norms).assembled / lim - 1) < 1e-5
    assert abs(lim / (16 * 0.4 ** 1.8 / (1 - 0.16)) - va.z0() ** 2) < 1e-6


def test_gap_bound_hypothesis(norms):
    with pytest.raises(HypothesisError):
        va.gap_bound(0.5, 0.0, 5.0, norms)
    assert va.gap_bound(0.5, 0.0, 5.0, norms, "geometric").assembled > 0


def test_variational_above_gap():
    rng = np.random.default_rng(9)
    for v in (build_stick(6), Volume(triangle_base(), 2)):
        for n in range(1, len(v)):
            phi = rng.uniform(-1, 1, len(v))
            g = spin_exact.sector_gap(v, n, 0.5)
            assert va.variational_gap_exact(v, n, 0.5, phi) >= g * (1 - 1e-9)


def test_constant_phase_rejected():
    with pytest.raises(ValueError):
        va.variational_gap_exact(build_stick(4), 2, 0.5, 0.3)


def test_cell_geometry():
    hexv = va._cell_offsets()
    assert np.allclose(np.linalg.norm(hexv, axis=1), math.sqrt(2 / 3))
    x, y = hexv[:, 0], hexv[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert abs(area - math.sqrt(3)) < 1e-12


def test_voronoi_check():
    base = disk_base(6.0)
    r = va.voronoi_check(lambda y: np.ones(len(y)), base)
    assert r.lhs < 1e-14
    r = va.voronoi_check(lambda y: y[:, 0] + 2 * y[:, 1], base, grad_sup=math.sqrt(5))
    assert r.lhs < 1e-12
    g = lambda y: np.exp(-np.sum(y ** 2, axis=-1) / 0.5)  # noqa: E731
    r = va.voronoi_check(g, base, scale=6.0)
    assert r.passed and abs(r.lhs - 0.00238) < 1e-4


def test_sweep_frozen_values():
    rows = list(va.variational_sweep([2, 3], 8, 0.5, 0.01))
    assert abs(rows[0][5] - 0.8487) < 1e-4 and abs(rows[1][5] - 0.4567) < 1e-4
    assert rows[0][1] == 7 and rows[1][1] == 19
    assert rows[0][6] is None
