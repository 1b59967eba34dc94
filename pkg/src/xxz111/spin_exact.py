"""Exact sector computations for the XXZ Hamiltonian on small volumes.

Configurations are bitmasks with bit ``i`` set when site ``i`` of the
volume carries a down spin (a particle).  Within a sector the masks are
kept in increasing integer order, which is colexicographic order on the
sorted lists of occupied sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .lattice import Volume

DEFAULT_MAX_DIM = 2_000_000
DENSE_MAX_DIM = 4_000
MAX_SITES = 62

# single-site spin operators, basis (up, down)
SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])


class BudgetError(MemoryError):
    """Sector dimension exceeds the configured budget."""


class ConvergenceError(ArithmeticError):
    """Iterative eigensolver did not reach the requested residual."""

    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


def _check_q(q: float) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")


@lru_cache(maxsize=64)
def _colex_masks(N: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    if n > N:
        return np.zeros(0, dtype=np.int64)
    # the top occupied site t runs upward; masks below 2^t come first
    parts = [_colex_masks(t, n - 1) | np.int64(1 << t) for t in range(n - 1, N)]
    out = np.concatenate(parts)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """All configurations of ``volume`` with ``n`` particles, colex-ordered."""

    volume: Volume
    n: int
    masks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = len(self.volume)
        if N > MAX_SITES:
            raise ValueError(f"bitmask basis supports at most {MAX_SITES} sites, got {N}")
        if not 0 <= self.n <= N:
            raise ValueError(f"n={self.n} outside 0..{N}")
        object.__setattr__(self, "masks", _colex_masks(N, self.n))

    @property
    def dim(self) -> int:
        return len(self.masks)

    def __len__(self) -> int:
        return self.dim

    def index(self, masks) -> np.ndarray:
        """Positions of the given masks (which must belong to the sector)."""
        return np.searchsorted(self.masks, masks)

    def occupations(self) -> np.ndarray:
        """``(dim, N)`` 0/1 array of the configurations."""
        bits = np.arange(len(self.volume), dtype=np.int64)
        return ((self.masks[:, None] >> bits[None, :]) & 1).astype(np.int8)

    def level_sums(self) -> np.ndarray:
        """``sum_x l(x) alpha(x)`` for every configuration."""
        s = np.zeros(self.dim, dtype=np.int64)
        for i, l in enumerate(self.volume.levels):
            if l:
                s += ((self.masks >> i) & 1) * int(l)
        return s


def sector_dim(v: Volume, n: int) -> int:
    return math.comb(len(v), n)


def bond_projector(q: float) -> np.ndarray:
    """4x4 matrix of ``h`` on the pair basis (uu, ud, du, dd) for ``(x0, x1)``."""
    _check_q(q)
    xi = np.array([0.0, -1.0, q, 0.0]) / math.sqrt(1 + q * q)
    return np.outer(xi, xi)


def anisotropy(q: float) -> float:
    """``Delta = (q + 1/q) / 2``."""
    return 0.5 * (q + 1 / q)


def boundary_constant(q: float) -> float:
    """``A(Delta) = sqrt(1 - 1/Delta^2) / 2``, equal to ``(1 - q^2) / (2 (1 + q^2))``."""
    d = anisotropy(q)
    return 0.5 * math.sqrt(1 - 1 / d ** 2)


def explicit_bond_hamiltonian(q: float, boundary_coefficient: float = -1.0) -> np.ndarray:
    """Spin-operator form of one bond term on the pair basis (uu, ud, du, dd).

    ``-(Sx Sx + Sy Sy)/Delta - Sz Sz + 1/4 + c A(Delta) (Sz_1 - Sz_0)`` with
    spin-1/2 operators and ``c = boundary_coefficient``.  Only ``c = -1``
    reproduces :func:`bond_projector`.
    """
    _check_q(q)
    d = anisotropy(q)
    I2 = np.eye(2)
    kron = np.kron
    h = -(kron(SX, SX) + kron(SY, SY)).real / d - kron(SZ, SZ) + 0.25 * np.eye(4)
    h = h + boundary_coefficient * boundary_constant(q) * (kron(I2, SZ) - kron(SZ, I2))
    return h.real


def _pair_terms(basis: SectorBasis, i: int, j: int):
    """Index pairs (a, b): ``a`` has a particle at ``i`` only, ``b`` at ``j`` only."""
    m = basis.masks
    bi, bj = np.int64(1 << i), np.int64(1 << j)
    sel = ((m & bi) != 0) & ((m & bj) == 0)
    a = np.nonzero(sel)[0]
    b = basis.index(m[a] ^ (bi | bj))
    return a, b


@dataclass(frozen=True, eq=False)
class SectorOperator:
    basis: SectorBasis
    matrix: sp.csr_matrix
    q: float

    @property
    def dim(self) -> int:
        return self.basis.dim


def _basis(v: Volume, n: int, max_dim: int) -> SectorBasis:
    d = sector_dim(v, n)
    if d > max_dim:
        raise BudgetError(f"sector dimension {d} exceeds budget {max_dim}")
    return SectorBasis(v, n)


def hamiltonian(v: Volume, n: int, q: float, max_dim: int = DEFAULT_MAX_DIM) -> SectorOperator:
    """Sparse ``H`` restricted to the ``n``-particle sector, sum of bond projectors."""
    _check_q(q)
    basis = _basis(v, n, max_dim)
    s = 1 + q * q
    d_lo, d_hi, off = q * q / s, 1 / s, -q / s
    rows, cols, vals = [], [], []
    diag = np.zeros(basis.dim)
    for i, j in v.bond_indices:
        # a: particle on the lower end x0 (du), b: particle on x1 (ud)
        a, b = _pair_terms(basis, int(i), int(j))
        diag[a] += d_lo
        diag[b] += d_hi
        rows += [a, b]
        cols += [b, a]
        vals += [np.full(len(a), off)] * 2
    idx = np.arange(basis.dim)
    rows = np.concatenate(rows + [idx])
    cols = np.concatenate(cols + [idx])
    vals = np.concatenate(vals + [diag])
    H = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    H.sum_duplicates()
    return SectorOperator(basis, H, q)


@dataclass(frozen=True, eq=False)
class GroundState:
    """``psi_0(n)`` stored as a unit vector plus ``log ||psi_0||^2``.

    ``vector * exp(log_norm2 / 2)`` gives the coefficients ``prod q^(l alpha)``.
    """

    basis: SectorBasis
    q: float
    vector: np.ndarray
    log_norm2: float

    def log_coefficients(self) -> np.ndarray:
        return self.basis.level_sums() * math.log(self.q)

    def coefficients(self) -> np.ndarray:
        return self.vector * math.exp(0.5 * self.log_norm2)


def ground_state(v: Volume, n: int, q: float, max_dim: int = DEFAULT_MAX_DIM) -> GroundState:
    _check_q(q)
    basis = _basis(v, n, max_dim)
    logc = basis.level_sums() * math.log(q)
    top = logc.max()
    w = np.exp(logc - top)
    nrm = float(np.linalg.norm(w))
    return GroundState(basis, float(q), w / nrm, 2 * (top + math.log(nrm)))


def bond_residuals(v: Volume, n: int, q: float, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """``||h_b psi_0|| / ||psi_0||`` for every bond ``b``."""
    gs = ground_state(v, n, q, max_dim)
    psi = gs.vector
    out = np.zeros(len(v.bond_indices))
    for k, (i, j) in enumerate(v.bond_indices):
        a, b = _pair_terms(gs.basis, int(i), int(j))
        overlap = (q * psi[a] - psi[b]) / math.sqrt(1 + q * q)
        out[k] = math.sqrt(float(np.dot(overlap, overlap)))
    return out


def kernel_residual(v: Volume, n: int, q: float, max_dim: int = DEFAULT_MAX_DIM) -> float:
    """``||H psi_0|| / ||psi_0||`` in the ``n``-particle sector."""
    op = hamiltonian(v, n, q, max_dim)
    gs = ground_state(v, n, q, max_dim)
    return float(np.linalg.norm(op.matrix @ gs.vector))


def sector_gap(v: Volume, n: int, q: float, max_dim: int = DEFAULT_MAX_DIM,
               dense_max: int = DENSE_MAX_DIM, tol: float = 1e-10) -> float:
    """Smallest nonzero eigenvalue of ``H`` in the ``n``-particle sector.

    The kernel is one-dimensional and spanned by the explicit ground
    state; the iterative path lifts it out of the way by adding
    ``c |psi_0><psi_0|`` with ``c`` at least the number of bonds.
    """
    op = hamiltonian(v, n, q, max_dim)
    if op.dim < 2:
        raise ValueError(f"sector n={n} is one-dimensional and has no gap")
    if op.dim <= dense_max:
        ev = scipy.linalg.eigvalsh(op.matrix.toarray(), subset_by_index=[0, 1])
        return float(ev[1])
    psi = ground_state(v, n, q, max_dim).vector
    c = float(len(v.bond_indices)) + 1.0
    H = op.matrix

    def mv(x):
        x = np.ravel(x)
        return H @ x + c * psi * np.dot(psi, x)

    lin = LinearOperator(H.shape, matvec=mv, dtype=float)
    rng = np.random.default_rng(0)
    vals, vecs = eigsh(lin, k=1, which="SA", tol=tol * 1e-2, v0=rng.standard_normal(op.dim))
    lam, vec = float(vals[0]), vecs[:, 0]
    res = float(np.linalg.norm(mv(vec) - lam * vec))
    if res > max(tol, tol * abs(lam)) * 1e2:
        raise ConvergenceError("eigsh did not converge", res)
    return lam


def full_operator(ops: dict[int, np.ndarray], N: int) -> np.ndarray:
    """Dense tensor product on ``N`` sites with ``ops[i]`` on site ``i``.

    Site 0 is the most significant factor, so basis index bit ``N-1-i``
    corresponds to site ``i``.
    """
    out = np.ones((1, 1))
    for i in range(N):
        out = np.kron(out, ops.get(i, np.eye(2)))
    return out


def full_hamiltonian(v: Volume, q: float, boundary_coefficient: float | None = None) -> np.ndarray:
    """Dense ``H`` on the whole ``2^N`` space (small volumes only).

    With ``boundary_coefficient=None`` every bond contributes the projector;
    otherwise the spin-operator form with that coefficient is used.
    """
    N = len(v)
    if N > 12:
        raise ValueError("full Hilbert space limited to 12 sites")
    h = bond_projector(q) if boundary_coefficient is None else \
        explicit_bond_hamiltonian(q, boundary_coefficient)
    H = np.zeros((2 ** N, 2 ** N))
    for i, j in v.bond_indices:
        H += _embed_pair(h, int(i), int(j), N)
    return H


def _embed_pair(h: np.ndarray, i: int, j: int, N: int) -> np.ndarray:
    # reshape to a 2N-index tensor and contract the pair (i, j)
    t = h.reshape(2, 2, 2, 2)
    D = 2 ** N
    out = np.zeros((D, D))
    eye = np.eye(D).reshape([2] * N + [D])
    moved = np.moveaxis(eye, (i, j), (0, 1))
    res = np.tensordot(t, moved, axes=([2, 3], [0, 1]))
    res = np.moveaxis(res, (0, 1), (i, j))
    out[:] = res.reshape(D, D)
    return out
