import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xxz111 import lattice
from xxz111.lattice import (Bond, TransverseCoord, Volume, build_stick, disk_base,
                            level, project, stick_site, triangle_base)


def test_stick_site_levels_and_steps():
    for l in range(-10, 11):
        assert level(stick_site(l)) == l
        d = stick_site(l + 1) - stick_site(l)
        assert np.abs(d).sum() == 1 and d.sum() == 1


def test_triangle_volume_counts():
    v = Volume(triangle_base(), 2)
    assert len(v) == 9
    assert len(v.plane_sites(1)) == 3
    assert build_stick(4).plane_sites(0).shape == (1, 3)


def test_single_site_base_matches_stick():
    v = Volume(np.zeros((1, 3), dtype=int), 6)
    s = build_stick(6)
    assert np.array_equal(v.sites, s.sites)
    assert np.array_equal(v.bond_indices, s.bond_indices)


def test_levels_symmetric_about_zero():
    for v in (build_stick(8), Volume(triangle_base(), 4), Volume(disk_base(2.5), 2)):
        for stick in v.sticks():
            assert stick.A == 1
            assert sum(level(x) for x in stick.sites) == 0
        assert np.array_equal(v.levels, [level(x) for x in v.sites])


def _scan_bonds(v):
    # O(N^2) scan: oriented nearest neighbours one level apart
    s = v.sites
    out = set()
    for i in range(len(s)):
        for j in range(len(s)):
            d = s[j] - s[i]
            if np.abs(d).sum() == 1 and d.sum() == 1:
                out.add((i, j))
    return out


@pytest.mark.parametrize("v", [Volume(triangle_base(), 2), Volume(disk_base(2.0), 2), build_stick(6),
                               Volume(disk_base(1.5), 4)])
def test_bonds_against_pair_scan(v):
    got = {tuple(b) for b in v.bond_indices.tolist()}
    assert got == _scan_bonds(v)
    by_level = sum((v.bonds_by_level(l) for l in range(-v.L // 2, v.L // 2)), [])
    assert len(by_level) == len(got)
    for l in range(-v.L // 2, v.L // 2):
        assert all(b.level == l for b in v.bonds_by_level(l))
    for b in v.bonds:
        assert level(b.x1) == level(b.x0) + 1


def test_out_of_range_levels_raise():
    v = build_stick(4)
    with pytest.raises(ValueError):
        v.plane_sites(3)
    with pytest.raises(ValueError):
        v.bonds_by_level(2)


def test_bond_rejects_wrong_orientation():
    with pytest.raises(ValueError):
        Bond((0, 0, 0), (-1, 0, 0))
    with pytest.raises(ValueError):
        Bond((0, 0, 0), (1, 1, 0))


def test_bad_volumes_rejected():
    with pytest.raises(ValueError):
        Volume(np.array([[1, 0, 0]]), 2)
    with pytest.raises(ValueError):
        Volume(np.zeros((1, 3)), 3)
    with pytest.raises(ValueError):
        Volume(np.zeros((2, 3)), 2)


def test_disk_small_radius_is_origin():
    assert disk_base(1e-6).tolist() == [[0, 0, 0]]
    assert len(disk_base(1.2)) == 1
    assert len(disk_base(1.5)) == 7


def _disk_scan(R):
    # exhaustive scan of level-0 sites with coordinates bounded by 4R
    b = int(4 * R)
    n = 0
    for x1 in range(-b, b + 1):
        for x2 in range(-b, b + 1):
            x3 = -x1 - x2
            if abs(x3) > b:
                continue
            y = TransverseCoord.of((x1, x2, x3), R)
            n += y.y1 ** 2 + y.y2 ** 2 <= 1 + 1e-12
    return n


@pytest.mark.parametrize("R", [2.0, 3.3, 5.0])
def test_disk_count_scan(R):
    assert len(disk_base(R)) == _disk_scan(R)


def test_disk_density():
    R = 40.0
    A = len(disk_base(R))
    assert abs(A / (math.pi * R * R / lattice.CELL_AREA) - 1) < 0.01


def test_transverse_invariant_under_diagonal_shift():
    rng = np.random.default_rng(3)
    x = rng.integers(-20, 20, size=(50, 3))
    assert np.allclose(project(x), project(x + 1), atol=1e-12)


def test_voronoi_circumradius_geometric():
    assert abs(lattice.voronoi_circumradius() - math.sqrt(2 / 3)) < 1e-12


def test_text_roundtrip():
    v = Volume(disk_base(2.2), 4)
    w = Volume.from_text("# comment\n" + v.to_text())
    assert np.array_equal(np.sort(v.sites, axis=0), np.sort(w.sites, axis=0))
    assert len(w) == len(v)
    with pytest.raises(ValueError):
        Volume.from_text("0 0 0\n1 0 0\n")


def test_degree_balance_interior():
    v = Volume(disk_base(3.0), 6)
    imb = v.degree_imbalance()
    inner = v.interior_mask()
    assert inner.any()
    assert np.all(imb[inner] == 0)


@settings(max_examples=30, deadline=None)
@given(A=st.integers(1, 30), L=st.sampled_from([0, 2, 4, 6]))
def test_compact_base_properties(A, L):
    v = Volume(lattice.compact_base(A), L)
    assert v.A == A and len(v) == A * (L + 1)
    assert tuple(v.base[0]) == (0, 0, 0)
    sub = v.sub_cylinder(range(min(A, 3)))
    assert v.contains_volume(sub)
    idx = v.site_indices_of(sub)
    assert np.array_equal(v.sites[idx], sub.sites)


def test_volume_from_spec():
    assert len(lattice.volume_from_spec("triangle", 2)) == 9
    assert len(lattice.volume_from_spec("disk", 2, radius=1.5)) == 21
    assert len(lattice.volume_from_spec("stick", 4)) == 5
    with pytest.raises(ValueError):
        lattice.volume_from_spec("disk", 2)
    with pytest.raises(ValueError):
        lattice.volume_from_spec("hexagon", 2)
