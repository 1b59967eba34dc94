"""Cylindrical 111 volumes in Z^3.

A volume is a base set of sites in the ``l(x) = 0`` plane translated along
the finite stick through the origin.  Sites are stored plane-major: the site
with base index ``g`` at level ``l`` has index ``(l + L/2) * A + g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

E1 = np.array([1, 0, 0])
E2 = np.array([0, 1, 0])
E3 = np.array([0, 0, 1])
UNIT_STEPS = (E1, E2, E3)

# orthonormal basis of the plane perpendicular to (1, 1, 1)
_U1 = np.array([2.0, -1.0, -1.0]) / math.sqrt(6.0)
_U2 = np.array([0.0, 1.0, -1.0]) / math.sqrt(2.0)

# nearest projected-neighbour distance is sqrt(2); the hexagonal Voronoi
# cell of that triangular lattice has circumradius sqrt(2/3)
VORONOI_RADIUS = math.sqrt(2.0 / 3.0)
CELL_AREA = math.sqrt(3.0)


def level(x) -> int:
    """Signed distance ``x1 + x2 + x3`` of a lattice site from the origin."""
    return int(x[0]) + int(x[1]) + int(x[2])


def project(x) -> np.ndarray:
    """Unscaled transverse coordinates of sites, shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    return np.stack([x @ _U1, x @ _U2], axis=-1)


@dataclass(frozen=True)
class TransverseCoord:
    y1: float
    y2: float
    R: float

    @classmethod
    def of(cls, x, R: float = 1.0) -> "TransverseCoord":
        x1, x2, x3 = (int(c) for c in x)
        return cls(
            (2 * x1 - x2 - x3) / (math.sqrt(6.0) * R),
            (x2 - x3) / (math.sqrt(2.0) * R),
            R,
        )

    @property
    def radius(self) -> float:
        return math.hypot(self.y1, self.y2)


def stick_site(l: int) -> np.ndarray:
    """Site of the infinite stick through the origin at level ``l``.

    Going up the stick adds e1, e2, e3, e1, ...; going down subtracts
    e3, e2, e1, e3, ...
    """
    x = np.zeros(3, dtype=np.int64)
    if l >= 0:
        full, rest = divmod(l, 3)
        x += full
        x[:rest] += 1
    else:
        full, rest = divmod(-l, 3)
        x -= full
        if rest:
            x[3 - rest:] -= 1
    return x


def _check_length(L) -> int:
    if int(L) != L or L < 0 or int(L) % 2:
        raise ValueError(f"stick length L must be a non-negative even integer, got {L!r}")
    return int(L)


@dataclass(frozen=True)
class Bond:
    """Oriented nearest-neighbour pair with ``level(x1) == level(x0) + 1``."""

    x0: tuple
    x1: tuple

    def __post_init__(self):
        d = np.subtract(self.x1, self.x0)
        if np.abs(d).sum() != 1 or d.sum() != 1:
            raise ValueError(f"not an oriented bond: {self.x0} -> {self.x1}")

    @property
    def level(self) -> int:
        return level(self.x0)


@dataclass(frozen=True, eq=False)
class Volume:
    """Cylindrical region ``{g + s : g in base, s in stick, |l(s)| <= L/2}``.

    Parameters
    ----------
    base : array of shape (A, 3)
        Distinct sites with level 0.
    L : int
        Even stick length; the volume has ``(L + 1) * A`` sites.
    """

    base: np.ndarray
    L: int
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.int64).reshape(-1, 3)
        if len(base) == 0:
            raise ValueError("base must be non-empty")
        bad = base.sum(axis=1) != 0
        if bad.any():
            raise ValueError(f"base site {tuple(base[bad][0])} does not have level 0")
        if len({tuple(g) for g in base}) != len(base):
            raise ValueError("base sites must be distinct")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "L", _check_length(self.L))
        base.setflags(write=False)
        index = {tuple(int(c) for c in x): i for i, x in enumerate(self.sites)}
        object.__setattr__(self, "_index", index)

    @property
    def A(self) -> int:
        return len(self.base)

    @property
    def levels_range(self) -> range:
        return range(-self.L // 2, self.L // 2 + 1)

    def __len__(self) -> int:
        return (self.L + 1) * self.A

    @cached_property
    def sites(self) -> np.ndarray:
        offsets = np.array([stick_site(l) for l in self.levels_range])
        s = (offsets[:, None, :] + self.base[None, :, :]).reshape(-1, 3)
        s.setflags(write=False)
        return s

    @cached_property
    def levels(self) -> np.ndarray:
        lv = np.repeat(np.arange(-self.L // 2, self.L // 2 + 1), self.A)
        lv.setflags(write=False)
        return lv

    def index(self, x) -> int:
        """Index of site ``x``; raises ``KeyError`` if it is not in the volume."""
        return self._index[tuple(int(c) for c in x)]

    def __contains__(self, x) -> bool:
        return tuple(int(c) for c in x) in self._index

    @cached_property
    def bond_indices(self) -> np.ndarray:
        """Index pairs ``(i0, i1)`` of all oriented bonds inside the volume."""
        pairs = []
        for i, x in enumerate(self.sites):
            for e in UNIT_STEPS:
                j = self._index.get(tuple(int(c) for c in x + e))
                if j is not None:
                    pairs.append((i, j))
        arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @property
    def bonds(self) -> list[Bond]:
        return [Bond(tuple(self.sites[i]), tuple(self.sites[j])) for i, j in self.bond_indices]

    def _check_level(self, l: int, top: int) -> None:
        if not -self.L // 2 <= l <= top:
            raise ValueError(f"level {l} outside [{-self.L // 2}, {top}]")

    def plane_indices(self, l: int) -> np.ndarray:
        self._check_level(l, self.L // 2)
        start = (l + self.L // 2) * self.A
        return np.arange(start, start + self.A)

    def plane_sites(self, l: int) -> np.ndarray:
        return self.sites[self.plane_indices(l)]

    def bonds_by_level(self, l: int) -> list[Bond]:
        """Bonds whose lower end sits at level ``l``."""
        self._check_level(l, self.L // 2 - 1)
        b = self.bond_indices
        sel = b[self.levels[b[:, 0]] == l]
        return [Bond(tuple(self.sites[i]), tuple(self.sites[j])) for i, j in sel]

    def stick_indices(self, g: int) -> np.ndarray:
        return np.arange(self.L + 1) * self.A + g

    def sticks(self) -> list["Volume"]:
        return [Volume(self.base[g:g + 1], self.L) for g in range(self.A)]

    def sub_cylinder(self, base_indices: Sequence[int]) -> "Volume":
        return Volume(self.base[list(base_indices)], self.L)

    def site_indices_of(self, other: "Volume") -> np.ndarray:
        """Indices in ``self`` of every site of ``other`` (in ``other``'s order)."""
        try:
            return np.array([self.index(x) for x in other.sites], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"site {exc.args[0]} is not contained in the volume") from None

    def contains_volume(self, other: "Volume") -> bool:
        return all(tuple(int(c) for c in x) in self._index for x in other.sites)

    def transverse(self, R: float = 1.0) -> np.ndarray:
        """Rescaled transverse coordinates of every site, shape ``(N, 2)``."""
        return project(self.sites) / R

    def degree_imbalance(self) -> np.ndarray:
        """Per-site (incoming - outgoing) bond count inside the volume."""
        d = np.zeros(len(self), dtype=np.int64)
        np.add.at(d, self.bond_indices[:, 1], 1)
        np.add.at(d, self.bond_indices[:, 0], -1)
        return d

    def interior_mask(self) -> np.ndarray:
        """Sites all six of whose lattice neighbours lie in the volume."""
        mask = np.ones(len(self), dtype=bool)
        for i, x in enumerate(self.sites):
            for e in UNIT_STEPS:
                if (tuple(int(c) for c in x + e) not in self._index
                        or tuple(int(c) for c in x - e) not in self._index):
                    mask[i] = False
                    break
        return mask

    def to_text(self) -> str:
        return "".join(f"{x[0]} {x[1]} {x[2]}\n" for x in self.sites)

    @classmethod
    def from_text(cls, text: str) -> "Volume":
        rows = [line.split() for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
        return cls.from_sites(np.array(rows, dtype=np.int64))

    @classmethod
    def from_sites(cls, sites) -> "Volume":
        """Rebuild a volume from its site list, checking it is cylindrical."""
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 3)
        lv = sites.sum(axis=1)
        top, bottom = lv.max(), lv.min()
        if top != -bottom:
            raise ValueError("levels are not symmetric about 0")
        base = sites[lv == 0]
        vol = cls(base, int(2 * top))
        if {tuple(x) for x in sites} != set(vol._index) or len(sites) != len(vol):
            raise ValueError("site set is not a 111 cylinder")
        return vol


def build_stick(L: int) -> Volume:
    return Volume(np.zeros((1, 3), dtype=np.int64), L)


def build_cylinder(base, L: int) -> Volume:
    return Volume(base, L)


TRIANGLE_BASE = np.array([[0, 0, 0], [1, -1, 0], [1, 0, -1]])


def triangle_base() -> np.ndarray:
    return TRIANGLE_BASE.copy()


def _level0_within(bound: int):
    r = np.arange(-bound, bound + 1)
    x1, x2 = np.meshgrid(r, r, indexing="ij")
    x1, x2 = x1.ravel(), x2.ravel()
    pts = np.stack([x1, x2, -x1 - x2], axis=1)
    return pts[np.abs(pts[:, 2]) <= bound]


def disk_base(R: float) -> np.ndarray:
    """Level-0 sites whose rescaled transverse radius is at most 1.

    On the ``l = 0`` plane the squared transverse distance equals the
    integer ``|x|^2``, so the closed-disk test is exact.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    pts = _level0_within(int(math.ceil(R)))
    norm2 = (pts ** 2).sum(axis=1)
    pts = pts[norm2 <= R * R]
    return _sorted_base(pts)


def _sorted_base(pts: np.ndarray) -> np.ndarray:
    p = project(pts)
    order = np.lexsort((np.arctan2(p[:, 1], p[:, 0]).round(12), (pts ** 2).sum(axis=1)))
    return pts[order]


def compact_base(A: int) -> np.ndarray:
    """The ``A`` level-0 sites closest to the origin (ties by angle).

    Partition functions depend only on the level multiset, so any base of
    the right size serves when only ``A`` matters; this one is roughly a
    disk and always contains the origin first.
    """
    if A < 1:
        raise ValueError("A must be positive")
    bound = int(math.ceil(math.sqrt(A))) + 2
    return _sorted_base(_level0_within(bound))[:A]


def voronoi_circumradius() -> float:
    """Circumradius of the projected lattice's Voronoi cell, computed geometrically."""
    from scipy.spatial import Voronoi

    pts = project(_level0_within(4))
    vor = Voronoi(pts)
    centre = int(np.argmin((pts ** 2).sum(axis=1)))
    region = vor.regions[vor.point_region[centre]]
    verts = vor.vertices[region]
    return float(np.sqrt((verts ** 2).sum(axis=1)).max())


def volume_from_spec(base: str = "triangle", L: int = 2, radius: float | None = None,
                     A: int | None = None) -> Volume:
    """Volume from the CLI vocabulary ``--base triangle|disk|stick|compact``."""
    if base == "triangle":
        return Volume(triangle_base(), L)
    if base == "disk":
        if radius is None:
            raise ValueError("disk base needs a radius")
        return Volume(disk_base(radius), L)
    if base == "stick":
        return build_stick(L)
    if base == "compact":
        if A is None:
            raise ValueError("compact base needs A")
        return Volume(compact_base(A), L)
    raise ValueError(f"unknown base {base!r}")


def sites_to_set(sites: Iterable) -> set:
    return {tuple(int(c) for c in x) for x in sites}
