"""Analytic zero-energy states and their normalization constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .lattice import LatticeRegion
from .model import ModelParams, SectorBasis, bond_coefficients, _check_dim

__all__ = [
    "StateVector",
    "NormalizationTable",
    "geometric_sum",
    "log_weights",
    "normalization_C",
    "normalization_table",
    "one_particle_amplitudes",
    "vacuum_vector",
    "one_particle_ground_state",
    "multispecies_ground_state",
    "kernel_basis",
    "bond_residuals",
    "KERNEL_THRESHOLD",
    "zero_threshold",
]

KERNEL_THRESHOLD = 1e-10
_LOG_MAX = 700.0


def zero_threshold(norm1: float) -> float:
    """Eigenvalues below this count as zero for an operator of 1-norm ``norm1``."""
    return KERNEL_THRESHOLD * (1.0 + norm1)


@dataclass(frozen=True)
class StateVector:
    """Dense amplitudes over a :class:`SectorBasis` (or a multi-species space)."""

    basis: SectorBasis | None
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.basis is not None and len(self.amplitudes) != self.basis.dim:
            raise ValidationError("amplitude length does not match basis dimension")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def dot(self, other: "StateVector") -> float:
        return float(self.amplitudes @ other.amplitudes)

    def write_pairs(self, path: str | Path, cutoff: float = 0.0):
        """Write ``pattern amplitude`` lines for entries with ``|amp| > cutoff``."""
        configs = self.basis.configs if self.basis is not None else np.arange(len(self.amplitudes))
        with open(path, "w") as fh:
            for c, a in zip(configs, self.amplitudes):
                if abs(a) > cutoff:
                    fh.write(f"{int(c)} {a:.17g}\n")


def geometric_sum(lam: float, m: int) -> float:
    """``c(lam, m) = sum_{i=0}^{m} lam**(2 i)``."""
    if m < 0:
        return 0.0
    q = lam * lam
    if q == 1.0:
        return float(m + 1)
    return (1.0 - q ** (m + 1)) / (1.0 - q)


def log_weights(region: LatticeRegion, params: ModelParams) -> np.ndarray:
    """``log(lambda^x)`` for each site, in site order."""
    _check_dim(region, params)
    return region.coords @ np.log(np.asarray(params.lam))


def _logsumexp2(logw: np.ndarray) -> tuple[float, float]:
    top = float(np.max(2 * logw))
    return top, float(np.sum(np.exp(2 * logw - top)))


def log_normalization_C(region: LatticeRegion, params: ModelParams) -> float:
    top, s = _logsumexp2(log_weights(region, params))
    return top + math.log(s)


def normalization_C(region: LatticeRegion, params: ModelParams) -> float:
    """``C(region) = sum_x lambda^(2x)``.

    Raises
    ------
    OverflowError
        If the value is not representable as a float.
    """
    logC = log_normalization_C(region, params)
    if logC > _LOG_MAX:
        raise OverflowError(f"C(region) = exp({logC:.1f}) overflows; use log_normalization_C")
    return math.exp(logC)


@dataclass(frozen=True)
class NormalizationTable:
    """Per-axis geometric sums of a box and their product."""

    C_value: float
    factors: tuple[float, ...]


def normalization_table(lo: Sequence[int], hi: Sequence[int], params: ModelParams) -> NormalizationTable:
    """Factorized ``C`` of the box ``prod_k [lo_k, hi_k]``."""
    factors = []
    for k, (a, b) in enumerate(zip(lo, hi)):
        lam = params.lam[k]
        factors.append(lam ** (2 * a) * geometric_sum(lam, b - a))
    return NormalizationTable(float(np.prod(factors)), tuple(factors))


def one_particle_amplitudes(region: LatticeRegion, params: ModelParams) -> np.ndarray:
    """Normalized ``lambda^x / sqrt(C)``, computed relative to the largest weight."""
    logw = log_weights(region, params)
    w = np.exp(logw - logw.max())
    return w / np.linalg.norm(w)


def _resolve_basis(region: LatticeRegion, basis: SectorBasis | None, default_N) -> SectorBasis:
    if basis is None:
        return SectorBasis(region.n_sites, default_N)
    if basis.n_sites != region.n_sites:
        raise ValidationError("basis does not match region size")
    return basis


def vacuum_vector(region: LatticeRegion, basis: SectorBasis | None = None) -> StateVector:
    """The empty configuration, in the full space or the ``N=0`` sector."""
    basis = _resolve_basis(region, basis, None)
    if basis.N not in (None, 0):
        raise ValidationError("vacuum lives in the full space or the N=0 sector")
    amp = np.zeros(basis.dim)
    amp[basis.rank(0)[0]] = 1.0
    return StateVector(basis, amp)


def one_particle_ground_state(region: LatticeRegion, params: ModelParams,
                              basis: SectorBasis | None = None) -> StateVector:
    """Unit vector with amplitude ``lambda^x / sqrt(C)`` on each one-particle state."""
    if not region.connected:
        raise ValidationError("the one-particle ground state is unique only on connected regions")
    basis = _resolve_basis(region, basis, 1)
    if basis.N not in (None, 1):
        raise ValidationError("one-particle state lives in the full space or the N=1 sector")
    a = one_particle_amplitudes(region, params)
    if basis.N == 1:
        return StateVector(basis, a)
    amp = np.zeros(basis.dim)
    amp[basis.rank(np.left_shift(1, np.arange(region.n_sites, dtype=np.int64)))] = a
    return StateVector(basis, amp)


def kernel_basis(region: LatticeRegion, params: ModelParams,
                 basis: SectorBasis | None = None) -> tuple[StateVector, StateVector]:
    """Orthonormal pair ``(psi_0, psi_1)`` spanning the zero-energy space."""
    if params.species != 1:
        raise ValidationError("kernel_basis is single-species; see multispecies_ground_state")
    params.require_ground_state_regime()
    basis = _resolve_basis(region, basis, None)
    if not basis.is_full:
        raise ValidationError("the kernel pair spans two sectors; pass a full basis")
    return vacuum_vector(region, basis), one_particle_ground_state(region, params, basis)


def multispecies_ground_state(region: LatticeRegion, params: ModelParams,
                              M: Iterable[int]) -> StateVector:
    """Normalized zero-energy state with one particle of each species in ``M``.

    Species are labelled ``1..n``. The state is the sum over placements of the
    particles at distinct sites, weighted by ``prod_j lambda_(i_j)^(y_j)``, in
    the base-``(n+1)`` full space of :func:`~pvbs.model.assemble_multispecies`.
    """
    _check_dim(region, params)
    n = params.species
    M = sorted(set(int(i) for i in M))
    if any(not 1 <= i <= n for i in M):
        raise ValidationError(f"species labels must lie in 1..{n}")
    if len(M) > region.n_sites:
        raise ValidationError("more species than sites")
    q = n + 1
    dim = q**region.n_sites
    coords = region.coords
    logl = np.log(np.asarray(params.multi_lam))
    site_logw = {i: coords @ logl[i - 1] for i in M}
    amp = np.zeros(dim)
    terms = []
    for placement in itertools.permutations(range(region.n_sites), len(M)):
        idx = 0
        logw = 0.0
        for species, site in zip(M, placement):
            idx += species * q**site
            logw += site_logw[species][site]
        terms.append((idx, logw))
    if not terms:
        amp[0] = 1.0
        return StateVector(None, amp)
    idxs = np.array([t[0] for t in terms], dtype=np.int64)
    logs = np.array([t[1] for t in terms])
    np.add.at(amp, idxs, np.exp(logs - logs.max()))
    return StateVector(None, amp / np.linalg.norm(amp))


def bond_residuals(region: LatticeRegion, params: ModelParams, state: StateVector) -> np.ndarray:
    """``||h_e psi||`` for every oriented edge ``e`` of the region.

    Works for one-particle states indexed by site (any region size) and for
    states in a bit-encoded sector or full basis.
    """
    basis = state.basis
    amp = state.amplitudes
    if basis is None:
        raise ValidationError("bond residuals need a single-species basis")
    out = np.empty(region.n_edges)
    if basis.N == 1:
        lam = np.asarray(params.lam)[region.edge_axis]
        norm = 1.0 + lam * lam
        # h_e psi on the pair (x, x+e_k) is proportional to phi_k; its norm is
        # |a_{x+e_k} - lam a_x| / sqrt(1 + lam^2)
        return np.abs(amp[region.edge_dst] - lam * amp[region.edge_src]) / np.sqrt(norm)
    configs = basis.configs
    for e, (a, b, k) in enumerate(zip(region.edge_src.tolist(), region.edge_dst.tolist(),
                                      region.edge_axis.tolist())):
        left, right, hop, both = bond_coefficients(k, params)
        na = (configs >> a) & 1
        nb = (configs >> b) & 1
        both_idx = np.nonzero(na & nb)[0]
        lo = np.nonzero(na & (1 - nb))[0]            # particle on x
        partner = basis.rank(configs[lo] ^ ((1 << a) | (1 << b)))  # moved to x + e_k
        on_x = left * amp[lo] + hop * amp[partner]
        on_y = hop * amp[lo] + right * amp[partner]
        total = np.sum((both * amp[both_idx]) ** 2) + np.sum(on_x**2) + np.sum(on_y**2)
        out[e] = math.sqrt(total)
    return out
