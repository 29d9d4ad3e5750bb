"""Lowest eigenpairs of sparse symmetric operators and finite-volume gaps.

The eigensolver is a Lanczos iteration with full reorthogonalization that
works in the orthogonal complement of a user-supplied deflation space.
Eigenpairs are found one at a time; each converged vector is locked into the
deflation space before the next run, so degenerate eigenvalues are returned
with their multiplicity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, ValidationError
from .groundstate import StateVector, kernel_basis, one_particle_ground_state, zero_threshold
from .lattice import LatticeRegion
from .model import (
    FULL_SPACE_MAX_SITES,
    ModelParams,
    SectorBasis,
    SparseOperator,
    assemble_full,
    assemble_sector,
    one_particle_matrix,
)

__all__ = [
    "SpectralReport",
    "FiniteGap",
    "lanczos_lowest",
    "lowest_eigenpairs",
    "dense_spectrum",
    "finite_gap",
    "one_particle_spectrum",
]

DENSE_MAX_DIM = 4096


@dataclass
class SpectralReport:
    """Lowest eigenvalues of an operator with convergence diagnostics."""

    eigenvalues: list[float]
    residual_norms: list[float]
    kernel_dim: int
    gap: float | None
    threshold: float
    iterations: int
    tol: float
    seed: int
    n_deflated: int = 0
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("eigenvectors")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)


def _as_array(v) -> np.ndarray:
    return np.asarray(v.amplitudes if isinstance(v, StateVector) else v, dtype=float)


def _project_out(w: np.ndarray, Q: np.ndarray | None) -> np.ndarray:
    if Q is None or Q.shape[1] == 0:
        return w
    # two passes: classical Gram-Schmidt loses orthogonality in one
    for _ in range(2):
        w = w - Q @ (Q.T @ w)
    return w


def lanczos_lowest(matvec, start: np.ndarray, deflate: np.ndarray | None, tol: float,
                   max_iter: int, check_every: int = 8):
    """Lowest eigenpair of a symmetric operator on the complement of ``deflate``.

    Parameters
    ----------
    matvec : callable
    start : ndarray
        Start vector; projected against ``deflate`` before use.
    deflate : (dim, m) ndarray with orthonormal columns, or None
    tol : float
        Absolute residual tolerance ``||A v - theta v||``.
    max_iter : int
        Maximum Krylov dimension.

    Returns
    -------
    theta, vec, residual, iterations
        ``residual`` is recomputed from an explicit matvec.
    """
    dim = len(start)
    v = _project_out(np.asarray(start, dtype=float), deflate)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValidationError("start vector lies in the deflation space")
    max_iter = min(max_iter, dim - (0 if deflate is None else deflate.shape[1]))
    V = np.empty((dim, min(max_iter, 32) + 1))
    V[:, 0] = v / nv
    alpha, beta = [], []
    m = 0
    for j in range(max_iter):
        w = matvec(V[:, j])
        a = float(V[:, j] @ w)
        alpha.append(a)
        # full reorthogonalization against deflation space and Krylov basis;
        # near an invariant subspace rounding otherwise leaks the deflated
        # directions back in
        for _ in range(2):
            w = _project_out(w, deflate)
            w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        b = float(np.linalg.norm(w))
        m = j + 1
        breakdown = b <= 1e-13 * max(1.0, abs(a))
        if breakdown or m % check_every == 0 or m == max_iter:
            evals, evecs = sla.eigh_tridiagonal(np.array(alpha), np.array(beta))
            s = evecs[:, 0]
            if breakdown or abs(b * s[-1]) <= 0.1 * tol or m == max_iter:
                break
        beta.append(b)
        if j + 1 >= V.shape[1]:
            grown = np.empty((dim, min(2 * V.shape[1], max_iter + 1)))
            grown[:, : V.shape[1]] = V
            V = grown
        V[:, j + 1] = w / b
    evals, evecs = sla.eigh_tridiagonal(np.array(alpha), np.array(beta[: m - 1]))
    vec = V[:, :m] @ evecs[:, 0]
    vec = _project_out(vec, deflate)
    vec /= np.linalg.norm(vec)
    Av = matvec(vec)
    theta = float(vec @ Av)
    res = float(np.linalg.norm(_project_out(Av, deflate) - theta * vec))
    return theta, vec, res, m


def lowest_eigenpairs(op: SparseOperator, count: int = 1, tol: float = 1e-10, seed: int = 0,
                      deflate: Sequence = (), max_iter: int = 300, max_restarts: int = 20,
                      keep_vectors: bool = False) -> SpectralReport:
    """``count`` smallest eigenvalues of ``op`` orthogonal to ``deflate``.

    Each eigenpair satisfies ``||H v - theta v|| <= tol * ||H||_1``.

    Raises
    ------
    ConvergenceError
        If an eigenpair misses the tolerance after ``max_restarts`` restarts of
        ``max_iter`` Lanczos steps each.
    """
    dim = op.dim
    Q = np.column_stack([_as_array(v) for v in deflate]) if len(deflate) else np.zeros((dim, 0))
    if Q.shape[0] != dim:
        raise ValidationError("deflation vectors do not match operator dimension")
    if Q.shape[1] and not np.allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-10):
        raise ValidationError("deflation vectors must be orthonormal")
    n_defl = Q.shape[1]
    if count < 1 or count > dim - n_defl:
        raise ValidationError(f"cannot extract {count} eigenpairs from a {dim - n_defl}-dim space")
    norm1 = op.norm1()
    abs_tol = tol * max(norm1, 1.0)
    rng = np.random.default_rng(seed)
    vals, resids, vecs = [], [], []
    total_iter = 0
    for _ in range(count):
        start = rng.standard_normal(dim)
        for _restart in range(max_restarts + 1):
            theta, vec, res, it = lanczos_lowest(op.matvec, start, Q, abs_tol, max_iter)
            total_iter += it
            if res <= abs_tol:
                break
            start = vec
        else:
            raise ConvergenceError(
                f"Lanczos stalled after {total_iter} steps and {max_restarts} restarts: "
                f"residual {res:.3e} > {abs_tol:.3e}")
        vals.append(theta)
        resids.append(res)
        vecs.append(vec)
        Q = np.column_stack([Q, _project_out(vec, Q) / np.linalg.norm(_project_out(vec, Q))])
    order = np.argsort(vals, kind="stable")
    vals = [vals[i] for i in order]
    resids = [resids[i] for i in order]
    thr = zero_threshold(norm1)
    kernel = sum(1 for v in vals if abs(v) < thr)
    above = [v for v in vals if v >= thr]
    return SpectralReport(
        eigenvalues=vals,
        residual_norms=resids,
        kernel_dim=kernel,
        gap=above[0] if above else None,
        threshold=thr,
        iterations=total_iter,
        tol=tol,
        seed=seed,
        n_deflated=n_defl,
        eigenvectors=np.column_stack([vecs[i] for i in order]) if keep_vectors else None,
    )


def dense_spectrum(op: SparseOperator) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs by dense diagonalization; for small operators only."""
    if op.dim > DENSE_MAX_DIM:
        raise ValidationError(f"dense diagonalization capped at dimension {DENSE_MAX_DIM}")
    return np.linalg.eigh(op.toarray())


@dataclass
class FiniteGap:
    """Smallest nonzero eigenvalue of a finite-volume Hamiltonian.

    In sector mode ``partial`` is True: the value is the minimum over the
    listed sectors only and therefore an upper bound on the true gap.
    """

    value: float
    mode: str
    partial: bool
    sectors: dict[int, float] = field(default_factory=dict)
    iterations: int = 0

    def __float__(self) -> float:
        return self.value


def finite_gap(region: LatticeRegion, params: ModelParams, mode: str = "full", max_N: int = 2,
               tol: float = 1e-10, seed: int = 0,
               max_sites: int = FULL_SPACE_MAX_SITES) -> FiniteGap:
    """Spectral gap above the two-dimensional zero-energy space.

    Parameters
    ----------
    mode : {"full", "sectors"}
        ``full`` deflates ``(psi_0, psi_1)`` from the full-space Hamiltonian.
        ``sectors`` takes the second eigenvalue of the one-particle block and
        the lowest eigenvalue of each ``N``-particle block for ``2 <= N <= max_N``.
    """
    if not region.connected:
        raise ValidationError("gap computation requires a connected region")
    if mode == "full":
        op = assemble_full(region, params, max_sites=max_sites)
        basis = SectorBasis(region.n_sites)
        psi0, psi1 = kernel_basis(region, params, basis)
        rep = lowest_eigenpairs(op, 1, tol=tol, seed=seed, deflate=[psi0, psi1])
        return FiniteGap(rep.eigenvalues[0], "full", False, iterations=rep.iterations)
    if mode != "sectors":
        raise ValidationError(f"unknown gap mode {mode!r}")
    if not 1 <= max_N <= region.n_sites:
        raise ValidationError(f"max_N must lie in [1, {region.n_sites}]")
    sectors = {}
    iters = 0
    if region.n_sites > 1:
        op1 = assemble_sector(region, params, 1)
        psi1 = one_particle_ground_state(region, params, op1.basis)
        rep = lowest_eigenpairs(op1, 1, tol=tol, seed=seed, deflate=[psi1])
        sectors[1] = rep.eigenvalues[0]
        iters += rep.iterations
    for N in range(2, max_N + 1):
        rep = lowest_eigenpairs(assemble_sector(region, params, N), 1, tol=tol, seed=seed)
        sectors[N] = rep.eigenvalues[0]
        iters += rep.iterations
    if not sectors:
        raise ValidationError("a single site has no excitations")
    return FiniteGap(min(sectors.values()), "sectors", True, sectors, iters)


def one_particle_spectrum(region: LatticeRegion, params: ModelParams, count: int,
                          tol: float = 1e-10, seed: int = 0) -> SpectralReport:
    """Smallest ``count`` eigenvalues of the one-particle block."""
    if not region.connected:
        raise ValidationError("one-particle spectrum requires a connected region")
    return lowest_eigenpairs(one_particle_matrix(region, params), count, tol=tol, seed=seed)
