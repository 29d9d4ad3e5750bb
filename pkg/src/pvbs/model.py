"""Model parameters, Fock bases, and sparse Hamiltonian assembly.

Conventions
-----------
* Site ordinal ``i`` of a :class:`~pvbs.lattice.LatticeRegion` is bit ``i`` of a
  configuration integer (1 = occupied).
* The two-site bond basis is ``(|00>, |01>, |10>, |11>)`` with the site ``x``
  listed first and ``x + e_k`` second. Since sites are sorted
  lexicographically, ``x`` always has the lower ordinal.
* Multi-species configurations are base-``(n+1)`` integers, digit ``i`` being
  the state (0 = empty, 1..n = species) at site ordinal ``i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .lattice import LatticeRegion

__all__ = [
    "ModelParams",
    "SectorBasis",
    "SparseOperator",
    "FULL_SPACE_MAX_SITES",
    "MULTISPECIES_MAX_DIM",
    "bond_coefficients",
    "bond_matrix",
    "multispecies_bond_matrix",
    "assemble_full",
    "assemble_sector",
    "one_particle_matrix",
    "assemble_multispecies",
    "popcount",
]

FULL_SPACE_MAX_SITES = 22
MULTISPECIES_MAX_DIM = 3**12
_BIT_LIMIT = 62


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the PVBS / XXZ-type model.

    Parameters
    ----------
    lam : tuple of float
        Positive couplings, one per lattice direction.
    delta : float
        Anisotropy; the ``|11><11|`` weight is ``1 + delta``.
    species : int
        Number of particle species ``n``.
    multi_lam : tuple of tuples, optional
        ``n x d`` couplings ``lambda_(i,k)`` for ``species > 1``. Defaults to
        ``lam`` repeated for every species.
    """

    lam: tuple[float, ...]
    delta: float = 0.0
    species: int = 1
    multi_lam: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "delta", float(self.delta))
        if len(lam) == 0:
            raise ValidationError("lam must have at least one entry")
        if not all(math.isfinite(v) and v > 0 for v in lam):
            raise ValidationError(f"all couplings must be positive and finite, got {lam}")
        if not math.isfinite(self.delta):
            raise ValidationError("delta must be finite")
        if int(self.species) != self.species or self.species < 1:
            raise ValidationError("species must be a positive integer")
        object.__setattr__(self, "species", int(self.species))
        if self.multi_lam is None:
            ml = tuple(lam for _ in range(self.species))
        else:
            ml = tuple(tuple(float(v) for v in row) for row in self.multi_lam)
        if len(ml) != self.species or any(len(row) != len(lam) for row in ml):
            raise ValidationError("multi_lam must be species x d")
        if not all(math.isfinite(v) and v > 0 for row in ml for v in row):
            raise ValidationError("all multi-species couplings must be positive")
        object.__setattr__(self, "multi_lam", ml)

    @property
    def d(self) -> int:
        return len(self.lam)

    def require_ground_state_regime(self):
        if self.delta <= -1:
            raise ValidationError(f"ground-state claims need delta > -1, got {self.delta}")

    def to_dict(self) -> dict:
        out = {"lam": list(self.lam), "delta": self.delta, "species": self.species}
        if self.species > 1:
            out["multi_lam"] = [list(r) for r in self.multi_lam]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(lam=tuple(data["lam"]), delta=data.get("delta", 0.0),
                   species=data.get("species", 1), multi_lam=data.get("multi_lam"))


def popcount(a: np.ndarray) -> np.ndarray:
    """Number of set bits of each entry of a nonnegative int64 array."""
    a = np.asarray(a, dtype=np.uint64)
    return np.bitwise_count(a).astype(np.int64)


class SectorBasis:
    """Occupation-number basis, full or at fixed particle number.

    Configurations are sorted ascending by integer value, so for ``N=None``
    (full space) the rank of a pattern is the pattern itself.

    Parameters
    ----------
    n_sites : int
    N : int or None
        Particle number, or ``None`` for the full ``2**n_sites`` space.
    """

    def __init__(self, n_sites: int, N: int | None = None):
        if n_sites < 1:
            raise ValidationError("basis needs at least one site")
        if N is not None and not 0 <= N <= n_sites:
            raise ValidationError(f"particle number {N} outside [0, {n_sites}]")
        self.n_sites = int(n_sites)
        self.N = N
        if N == 1 and n_sites > _BIT_LIMIT:
            # rank == site ordinal; patterns kept as Python ints
            self.configs = np.array([1 << i for i in range(n_sites)], dtype=object)
        elif n_sites > _BIT_LIMIT:
            raise ValidationError(f"bit-encoded bases support at most {_BIT_LIMIT} sites")
        elif N is None:
            self.configs = np.arange(1 << n_sites, dtype=np.int64)
        else:
            self.configs = _combination_patterns(n_sites, N)

    @property
    def dim(self) -> int:
        return len(self.configs)

    @property
    def is_full(self) -> bool:
        return self.N is None

    def rank(self, patterns) -> np.ndarray:
        """Ranks of the given patterns; raises if any pattern is absent."""
        if self.configs.dtype == object:
            arr = np.atleast_1d(np.asarray(patterns, dtype=object))
            out = np.empty(len(arr), dtype=np.int64)
            for j, p in enumerate(arr):
                p = int(p)
                if p <= 0 or p & (p - 1):
                    raise KeyError(p)
                out[j] = p.bit_length() - 1
            return out
        arr = np.atleast_1d(np.asarray(patterns, dtype=np.int64))
        idx = np.searchsorted(self.configs, arr)
        bad = (idx >= len(self.configs)) | (self.configs[np.minimum(idx, len(self.configs) - 1)] != arr)
        if np.any(bad):
            raise KeyError(arr[bad][:3].tolist())
        return idx

    def __repr__(self) -> str:
        tag = "FULL" if self.N is None else f"N={self.N}"
        return f"SectorBasis(n_sites={self.n_sites}, {tag}, dim={self.dim})"


def _combination_patterns(n: int, N: int) -> np.ndarray:
    count = math.comb(n, N)
    out = np.empty(count, dtype=np.int64)
    for j, combo in enumerate(combinations(range(n), N)):
        v = 0
        for i in combo:
            v |= 1 << i
        out[j] = v
    out.sort()
    return out


@dataclass(frozen=True)
class SparseOperator:
    """Real symmetric operator in CSR storage with canonical entry order."""

    matrix: sp.csr_matrix
    basis: object = field(default=None, compare=False)

    @classmethod
    def from_triplets(cls, rows, cols, vals, dim: int, basis=None) -> "SparseOperator":
        m = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls(m, basis)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    __matmul__ = matvec

    def norm1(self) -> float:
        """Maximum absolute column sum."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(abs(self.matrix).sum(axis=0).max())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_symmetric(self, tol: float = 0.0) -> bool:
        diff = self.matrix - self.matrix.T
        return diff.nnz == 0 or float(abs(diff).max()) <= tol

    def restrict(self, index: np.ndarray) -> "SparseOperator":
        """Principal submatrix on the given row/column indices."""
        return SparseOperator(self.matrix[index][:, index].tocsr())

    def write_triplets(self, path: str | Path):
        """Write ``row col value`` lines, values with 17 significant digits."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# dim {self.dim} nnz {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v:.17g}\n")

    @classmethod
    def read_triplets(cls, path: str | Path) -> "SparseOperator":
        dim = None
        rows, cols, vals = [], [], []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                tok = line.split()
                if "dim" in tok:
                    dim = int(tok[tok.index("dim") + 1])
                continue
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
        if dim is None:
            raise ValidationError(f"{path}: missing dim header")
        return cls.from_triplets(rows, cols, vals, dim)


def _check_axis(axis: int, params: ModelParams):
    if not 0 <= axis < params.d:
        raise ValidationError(f"axis {axis} out of range for d={params.d}")


def bond_coefficients(axis: int, params: ModelParams) -> tuple[float, float, float, float]:
    """``(left, right, hop, both)`` matrix elements of the bond term.

    ``left`` is the diagonal weight with only ``x`` occupied, ``right`` with
    only ``x + e_k`` occupied, ``hop`` the off-diagonal between them and
    ``both`` the weight of ``|11>``.
    """
    _check_axis(axis, params)
    lam = params.lam[axis]
    norm = 1.0 + lam * lam
    return lam * lam / norm, 1.0 / norm, -lam / norm, 1.0 + params.delta


def bond_matrix(axis: int, params: ModelParams) -> np.ndarray:
    """The 4x4 bond term ``(1+delta)|11><11| + |phi_k><phi_k|``.

    ``phi_k`` is the normalized ``|01> - lam_k |10>``. ``axis`` is 0-based.
    """
    left, right, hop, both = bond_coefficients(axis, params)
    h = np.zeros((4, 4))
    h[1, 1] = right
    h[2, 2] = left
    h[1, 2] = h[2, 1] = hop
    h[3, 3] = both
    return h


def _check_single_species(params: ModelParams):
    if params.species != 1:
        raise ValidationError("this assembly path is single-species only; use assemble_multispecies")


def _check_dim(region: LatticeRegion, params: ModelParams):
    if region.d != params.d:
        raise ValidationError(f"region dimension {region.d} != parameter dimension {params.d}")


def _assemble_bits(region: LatticeRegion, params: ModelParams, basis: SectorBasis) -> SparseOperator:
    configs = basis.configs
    dim = basis.dim
    diag = np.zeros(dim)
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], []
    for a, b, k in zip(region.edge_src.tolist(), region.edge_dst.tolist(), region.edge_axis.tolist()):
        left, right, hop, both = bond_coefficients(k, params)
        na = (configs >> a) & 1
        nb = (configs >> b) & 1
        diag += np.where(na & nb, both, 0.0)
        diag += np.where(na & (1 - nb), left, 0.0)
        diag += np.where((1 - na) & nb, right, 0.0)
        movers = np.nonzero(na ^ nb)[0]
        if len(movers):
            flipped = configs[movers] ^ ((1 << a) | (1 << b))
            rows.append(movers)
            cols.append(basis.rank(flipped) if not basis.is_full else flipped)
            vals.append(np.full(len(movers), hop))
    vals.insert(0, diag)
    return SparseOperator.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                        np.concatenate(vals), dim, basis)


def assemble_full(region: LatticeRegion, params: ModelParams,
                  max_sites: int = FULL_SPACE_MAX_SITES) -> SparseOperator:
    """Hamiltonian on the full ``2**|region|`` space.

    Raises
    ------
    ValidationError
        If the region has more than ``max_sites`` sites or ``params`` is
        multi-species.
    """
    _check_single_species(params)
    _check_dim(region, params)
    if region.n_sites > max_sites:
        raise ValidationError(f"full space on {region.n_sites} sites exceeds cap of {max_sites}")
    if not region.connected:
        warnings.warn("assembling on a disconnected region", RuntimeWarning, stacklevel=2)
    return _assemble_bits(region, params, SectorBasis(region.n_sites))


def assemble_sector(region: LatticeRegion, params: ModelParams, N: int) -> SparseOperator:
    """Hamiltonian restricted to the ``N``-particle sector, built directly."""
    _check_single_species(params)
    _check_dim(region, params)
    if not 0 <= N <= region.n_sites:
        raise ValidationError(f"particle number {N} outside [0, {region.n_sites}]")
    if N == 1:
        op = one_particle_matrix(region, params)
        return SparseOperator(op.matrix, SectorBasis(region.n_sites, 1))
    return _assemble_bits(region, params, SectorBasis(region.n_sites, N))


def one_particle_matrix(region: LatticeRegion, params: ModelParams) -> SparseOperator:
    """``|region| x |region|`` one-particle block, indexed by site ordinal."""
    _check_single_species(params)
    _check_dim(region, params)
    lam = np.asarray(params.lam)[region.edge_axis]
    norm = 1.0 + lam * lam
    src, dst = region.edge_src, region.edge_dst
    n = region.n_sites
    diag = (np.bincount(src, weights=lam * lam / norm, minlength=n)
            + np.bincount(dst, weights=1.0 / norm, minlength=n))
    hop = -lam / norm
    rows = np.concatenate([np.arange(n), src, dst])
    cols = np.concatenate([np.arange(n), dst, src])
    vals = np.concatenate([diag, hop, hop])
    return SparseOperator.from_triplets(rows, cols, vals, n)


def multispecies_bond_matrix(axis: int, params: ModelParams) -> np.ndarray:
    """``(n+1)^2`` square bond term for ``n`` species along ``axis``.

    Two-site basis index is ``s_x * (n+1) + s_y`` with ``s`` in ``0..n``.
    """
    _check_axis(axis, params)
    n = params.species
    q = n + 1
    lam = [1.0] + [params.multi_lam[i][axis] for i in range(n)]
    h = np.zeros((q * q, q * q))

    def add(vec):
        vec = vec / np.linalg.norm(vec)
        h[:] += np.outer(vec, vec)

    for i in range(1, q):
        v = np.zeros(q * q)
        v[0 * q + i] = 1.0
        v[i * q + 0] = -lam[i]
        add(v)
    for i in range(1, q):
        for j in range(i, q):
            v = np.zeros(q * q)
            if i == j:
                v[i * q + i] = 1.0
            else:
                v[i * q + j] = lam[i]
                v[j * q + i] = -lam[j]
            add(v)
    if params.delta != 0.0:
        for i in range(1, q):
            h[i * q + i, i * q + i] += params.delta
    return h


def assemble_multispecies(region: LatticeRegion, params: ModelParams,
                          max_dim: int = MULTISPECIES_MAX_DIM) -> SparseOperator:
    """Full-space Hamiltonian with ``params.species`` particle species.

    With one species this reproduces :func:`assemble_full` entry by entry.
    """
    _check_dim(region, params)
    q = params.species + 1
    n = region.n_sites
    dim = q**n
    if dim > max_dim:
        raise ValidationError(f"multi-species dimension {dim} exceeds cap of {max_dim}")
    states = np.arange(dim, dtype=np.int64)
    digits = np.empty((n, dim), dtype=np.int64)
    rem = states.copy()
    for i in range(n):
        digits[i] = rem % q
        rem //= q
    powers = q ** np.arange(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    bond_cache = {}
    for a, b, k in zip(region.edge_src.tolist(), region.edge_dst.tolist(), region.edge_axis.tolist()):
        if k not in bond_cache:
            bond_cache[k] = multispecies_bond_matrix(k, params)
        hb = bond_cache[k]
        local = digits[a] * q + digits[b]
        rest = states - digits[a] * powers[a] - digits[b] * powers[b]
        for out_local in range(q * q):
            coeff = hb[out_local, local]
            mask = coeff != 0.0
            if not np.any(mask):
                continue
            sa, sb = divmod(out_local, q)
            rows.append(rest[mask] + sa * powers[a] + sb * powers[b])
            cols.append(states[mask])
            vals.append(coeff[mask])
    if not rows:
        return SparseOperator(sp.csr_matrix((dim, dim)))
    return SparseOperator.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                        np.concatenate(vals), dim)
