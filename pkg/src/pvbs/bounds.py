"""Analytic gap bounds and the finite computations behind them.

Lower bound: the martingale estimate built from the unit-hypercube gap and the
per-direction overlap factors ``epsilon(lambda_k)``. Upper bounds: Rayleigh
quotients of one-particle probe states on a centered box and on the diamond
``D_L``, each evaluated both as a sparse quadratic form and in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConsistencyError, ValidationError
from .groundstate import geometric_sum, one_particle_amplitudes
from .lattice import LatticeRegion, diamond_sites, enlarge, make_box, make_centered_box
from .model import ModelParams, popcount, one_particle_matrix
from .spectra import finite_gap

__all__ = [
    "GapBounds",
    "epsilon",
    "gamma_unit_hypercube",
    "martingale_lower_bound",
    "bulk_upper_bound",
    "gap_bounds",
    "ProbeEnergy",
    "rectangle_probe_energy",
    "rectangle_probe_closed_form",
    "Condition3Result",
    "slab_condition3_bound",
    "condition3_analytic_bound",
    "ground_projector",
    "DiamondProbe",
    "diamond_probe_energy",
    "diamond_probe_closed_form",
    "diamond_closed_bound",
    "PROBE_RTOL",
]

PROBE_RTOL = 1e-10
HYPERCUBE_MAX_D = 4


def epsilon(lam: float) -> float:
    """Overlap factor: ``lam/sqrt(1+lam^2)`` below 1, ``1/sqrt(1+lam^2)`` above.

    At ``lam == 1`` both branches give ``1/sqrt(2)``.
    """
    if not lam > 0:
        raise ValidationError(f"epsilon needs lam > 0, got {lam}")
    return min(lam, 1.0) / math.sqrt(1.0 + lam * lam)


def _hypercube_params(params: ModelParams) -> ModelParams:
    if params.d > HYPERCUBE_MAX_D:
        raise ValidationError(f"unit hypercube in d={params.d} exceeds the 2^16 full-space cap")
    return params


def gamma_unit_hypercube(params: ModelParams, tol: float = 1e-12, seed: int = 0) -> float:
    """Gap of the Hamiltonian on ``[0, 1]^d`` by exact diagonalization."""
    _hypercube_params(params)
    return finite_gap(make_box((1,) * params.d), params, tol=tol, seed=seed).value


def martingale_lower_bound(params: ModelParams, gamma_Bd: float | None = None) -> float:
    """``gamma(B_d) / 2^d * prod_k (1 - sqrt(2) epsilon(lam_k))^2``."""
    factors = [(1.0 - math.sqrt(2.0) * epsilon(l)) ** 2 for l in params.lam]
    if any(f == 0.0 for f in factors) or any(l == 1.0 for l in params.lam):
        return 0.0
    if gamma_Bd is None:
        gamma_Bd = gamma_unit_hypercube(params)
    return gamma_Bd / 2**params.d * math.prod(factors)


def bulk_upper_bound(params: ModelParams) -> float:
    """``sum_{k: lam_k != 1} (1 - lam_k)^2 / (1 + lam_k^2)``."""
    return sum((1.0 - l) ** 2 / (1.0 + l * l) for l in params.lam if l != 1.0)


@dataclass
class GapBounds:
    lower: float
    upper: float
    gamma_Bd: float
    epsilon_factors: tuple[float, ...]
    lower_trivial: bool
    gapless_upper: bool


def gap_bounds(params: ModelParams, seed: int = 0) -> GapBounds:
    """Both analytic bounds for ``params`` on Z^d-like volumes."""
    g = gamma_unit_hypercube(params, seed=seed)
    lower = martingale_lower_bound(params, g)
    upper = bulk_upper_bound(params)
    return GapBounds(
        lower=lower,
        upper=upper,
        gamma_Bd=g,
        epsilon_factors=tuple(epsilon(l) for l in params.lam),
        lower_trivial=any(l == 1.0 for l in params.lam),
        gapless_upper=all(l == 1.0 for l in params.lam),
    )


# -- rectangle probe -------------------------------------------------------


@dataclass
class ProbeEnergy:
    """Normalized Rayleigh quotient split into bond classes.

    ``bulk`` collects bonds with both ends in the box, ``boundary`` bonds with
    exactly one end inside. Both are divided by ``||phi||^2``.
    """

    quotient: float
    bulk: float
    boundary: float
    norm2: float
    closed_quotient: float
    closed_bulk: float
    closed_boundary: float

    def __iter__(self):
        return iter((self.quotient, self.bulk, self.boundary))


def _check_z(z: Sequence[float], d: int) -> tuple[float, ...]:
    z = tuple(float(v) for v in z)
    if len(z) != d:
        raise ValidationError(f"z needs {d} components")
    if any(v == 0.0 for v in z):
        raise ValidationError("z components must be nonzero")
    return z


def _power_sum(r: float, lo: int, hi: int) -> float:
    """``sum_{a=lo}^{hi} r^a`` for ``r > 0``."""
    if hi < lo:
        return 0.0
    if r == 1.0:
        return float(hi - lo + 1)
    return (r**lo - r ** (hi + 1)) / (1.0 - r)


def rectangle_probe_closed_form(N: Sequence[int], params: ModelParams,
                                z: Sequence[float]) -> tuple[float, float, float]:
    """Closed-form ``(bulk, boundary, norm2)`` for ``phi = sum_x z^x xi_x`` on ``prod [-N_k, N_k]``.

    Unnormalized. Bulk bonds along ``k`` carry ``(z_k - lam_k)^2/(1+lam_k^2)``
    times ``|z|^{2x}`` summed over ``x_k`` in ``[-N_k, N_k - 1]``; the two
    boundary layers give ``(lam_k^2 |z_k|^{2N_k} + |z_k|^{-2N_k}) / (1+lam_k^2)``
    times the transverse sums.
    """
    d = params.d
    z = _check_z(z, d)
    r = [v * v for v in z]
    full = [_power_sum(r[k], -N[k], N[k]) for k in range(d)]
    norm2 = math.prod(full)
    bulk = boundary = 0.0
    for k in range(d):
        lam = params.lam[k]
        trans = math.prod(full[i] for i in range(d) if i != k)
        bulk += (z[k] - lam) ** 2 / (1 + lam * lam) * _power_sum(r[k], -N[k], N[k] - 1) * trans
        boundary += (lam * lam * r[k] ** N[k] + r[k] ** (-N[k])) / (1 + lam * lam) * trans
    return bulk, boundary, norm2


def rectangle_probe_energy(N: Sequence[int], params: ModelParams, z: Sequence[float],
                           rtol: float = PROBE_RTOL) -> ProbeEnergy:
    """Energy of the plane-wave-like probe on the centered box ``prod [-N_k, N_k]``.

    The quadratic form uses the one-particle Hamiltonian of the box enlarged
    by one layer, so bonds leaving the box are included. The closed form of
    :func:`rectangle_probe_closed_form` must agree to ``rtol``.

    Raises
    ------
    ConsistencyError
        If the two evaluations disagree.
    """
    N = tuple(int(n) for n in N)
    if len(N) != params.d:
        raise ValidationError("N must have one entry per direction")
    z = _check_z(z, params.d)
    box = make_centered_box(N)
    ext = enlarge(box.sites, 1)
    coords = ext.coords
    inside = np.all(np.abs(coords) <= np.asarray(N), axis=1)
    phi = np.where(inside, np.prod(np.asarray(z) ** coords, axis=1), 0.0)
    H = one_particle_matrix(ext, params)
    norm2 = float(phi @ phi)

    # split bond energies by whether both ends are inside
    lam = np.asarray(params.lam)[ext.edge_axis]
    src, dst = ext.edge_src, ext.edge_dst
    bond = (phi[dst] - lam * phi[src]) ** 2 / (1 + lam * lam)
    both = inside[src] & inside[dst]
    bulk_q = float(bond[both].sum())
    boundary_q = float(bond[~both].sum())
    total_q = float(phi @ H.matvec(phi))
    if not math.isclose(total_q, bulk_q + boundary_q, rel_tol=1e-12, abs_tol=1e-300):
        raise ConsistencyError("bond decomposition does not reproduce the quadratic form")

    bulk_c, boundary_c, norm2_c = rectangle_probe_closed_form(N, params, z)
    for name, a, b in (("bulk", bulk_q, bulk_c), ("boundary", boundary_q, boundary_c),
                       ("norm", norm2, norm2_c)):
        if not math.isclose(a, b, rel_tol=rtol, abs_tol=rtol * norm2):
            raise ConsistencyError(f"rectangle probe {name}: quadratic form {a!r} vs closed form {b!r}")
    return ProbeEnergy(
        quotient=total_q / norm2,
        bulk=bulk_q / norm2,
        boundary=boundary_q / norm2,
        norm2=norm2,
        closed_quotient=(bulk_c + boundary_c) / norm2_c,
        closed_bulk=bulk_c / norm2_c,
        closed_boundary=boundary_c / norm2_c,
    )


# -- condition 3 on slabs --------------------------------------------------


def ground_projector(region: LatticeRegion, params: ModelParams, sub_mask: int,
                     configs: np.ndarray) -> sp.csr_matrix:
    """Projector ``G_X (x) 1`` on the span of the given bit patterns.

    ``X`` is the set of region sites whose bits are set in ``sub_mask``;
    ``G_X`` projects onto ``span(psi_0^X, psi_1^X)``. ``configs`` must be
    sorted and closed under the moves the projector generates (e.g. all
    patterns with at most ``k`` particles).
    """
    X = [i for i in range(region.n_sites) if (sub_mask >> i) & 1]
    sub = region.subregion(region.sites[i] for i in X)
    amps = one_particle_amplitudes(sub, params)
    # sub.sites is sorted like the parent, so amps[j] belongs to X[j]
    bits = np.array([1 << i for i in X], dtype=np.int64)
    inner = configs & sub_mask
    outer = configs & ~np.int64(sub_mask)
    n_in = popcount(inner)
    rows, cols, vals = [], [], []
    col = 0
    pos = {int(c): j for j, c in enumerate(configs)}
    for o in np.unique(outer[n_in <= 1]).tolist():
        # psi_0^X (x) |o>
        j0 = pos.get(o)
        if j0 is not None:
            rows.append(j0)
            cols.append(col)
            vals.append(1.0)
            col += 1
        # psi_1^X (x) |o>
        idx = [pos.get(o | int(b)) for b in bits]
        if all(i is not None for i in idx):
            rows.extend(idx)
            cols.extend([col] * len(idx))
            vals.extend(amps.tolist())
            col += 1
    B = sp.csr_matrix((vals, (rows, cols)), shape=(len(configs), col))
    return (B @ B.T).tocsr()


def condition3_analytic_bound(lam_d: float, n: int) -> float:
    """``lam^2 c(lam, n-1) / ((1 + lam^2) c(lam, n))``."""
    return lam_d**2 * geometric_sum(lam_d, n - 1) / ((1 + lam_d**2) * geometric_sum(lam_d, n))


@dataclass
class Condition3Result:
    numeric_sup: float
    analytic_bound: float
    epsilon_sq: float
    dimension: int
    orthogonality_residual: float


def _patterns_upto(n_sites: int, kmax: int) -> np.ndarray:
    from itertools import combinations

    out = []
    for k in range(kmax + 1):
        for combo in combinations(range(n_sites), k):
            out.append(sum(1 << i for i in combo))
    return np.array(sorted(out), dtype=np.int64)


def slab_condition3_bound(params: ModelParams, cross_section: Sequence[int], n: int) -> Condition3Result:
    """Largest overlap of ``G_{top two layers}`` on ``G_{Lambda_n} - G_{Lambda_{n+1}}``.

    ``Lambda_m = T x [0, m]`` where ``T = prod_k [0, N_k]`` is the cross-section
    over the first ``d - 1`` axes and the last axis is the growth direction.
    The candidate vectors are parametrized by ``a_x`` (vacuum below, one
    particle at ``(x, n+1)``) and ``b_x`` (``psi_1`` below, one particle at
    ``(x, n+1)``), with the ``psi_1 (x) vacuum`` coefficient fixed by
    orthogonality to ``psi_1^{Lambda_{n+1}}``. The supremum of
    ``||G psi||^2 / ||psi||^2`` is the top eigenvalue of the induced
    generalized eigenproblem.
    """
    N = tuple(int(v) for v in cross_section)
    if len(N) != params.d - 1:
        raise ValidationError(f"cross-section needs {params.d - 1} entries")
    if n < 1:
        raise ValidationError("slab height n must be >= 1")
    lam_d = params.lam[-1]
    region = make_box(N + (n + 1,))
    if region.n_sites > 62:
        raise ValidationError("slab region too large for bit-encoded patterns")
    sites = region.sites
    idx = region.index_of
    T = list(make_box(N).sites) if N else [()]

    lower = sum(1 << idx[p] for p in sites if p[-1] <= n)
    slab = sum(1 << idx[p] for p in sites if p[-1] >= n)
    full = (1 << region.n_sites) - 1
    configs = _patterns_upto(region.n_sites, 2)
    pos = {int(c): j for j, c in enumerate(configs)}

    lower_region = region.subregion(p for p in sites if p[-1] <= n)
    psi1_lower = one_particle_amplitudes(lower_region, params)
    lower_bits = [1 << idx[p] for p in lower_region.sites]

    def embed_psi1_times(top_bit: int) -> np.ndarray:
        v = np.zeros(len(configs))
        for b, a in zip(lower_bits, psi1_lower):
            v[pos[b | top_bit]] += a
        return v

    def basis_vec(pattern: int) -> np.ndarray:
        v = np.zeros(len(configs))
        v[pos[pattern]] = 1.0
        return v

    top_bits = [1 << idx[x + (n + 1,)] for x in T]
    # C(T) c(lam_d, n) without overflow: ratio of weights relative to psi_1
    cT = math.prod(geometric_sum(params.lam[k], N[k]) for k in range(params.d - 1))
    weights_top = np.array([math.prod(params.lam[k] ** x[k] for k in range(params.d - 1)) * lam_d ** (n + 1)
                            for x in T])
    b0_coeff = -weights_top / math.sqrt(cT * geometric_sum(lam_d, n))

    psi1_vac = embed_psi1_times(0)
    cols = []
    for j, tb in enumerate(top_bits):
        cols.append(basis_vec(tb) + b0_coeff[j] * psi1_vac)          # a_x
    for tb in top_bits:
        cols.append(embed_psi1_times(tb))                            # b_x
    L = np.column_stack(cols)

    G_next = ground_projector(region, params, full, configs)
    G_lower = ground_projector(region, params, lower, configs)
    G_slab = ground_projector(region, params, slab, configs)
    orth = float(np.abs(G_next @ L).max())
    in_lower = float(np.abs(G_lower @ L - L).max())
    if orth > 1e-12 or in_lower > 1e-12:
        raise ConsistencyError(
            f"slab vectors violate the constraints: |G_(n+1) psi| = {orth:.2e}, "
            f"|G_n psi - psi| = {in_lower:.2e}")
    gram = L.T @ L
    numer = L.T @ (G_slab @ L)
    numer = 0.5 * (numer + numer.T)
    top = float(sla.eigh(numer, gram, eigvals_only=True)[-1])
    lam_eps = epsilon(lam_d)
    return Condition3Result(
        numeric_sup=top,
        analytic_bound=condition3_analytic_bound(lam_d, n),
        epsilon_sq=lam_eps**2,
        dimension=L.shape[1],
        orthogonality_residual=orth,
    )


# -- diamond probe ---------------------------------------------------------


@dataclass
class DiamondProbe:
    quotient: float
    closed_bound: float
    closed_quotient: float
    numerator: float
    norm2: float


def _check_diamond(L: int, lam: float):
    if L < 2 or L % 2 or (L // 2) % 2 == 0:
        raise ValidationError(f"diamond probe needs L = 2k with k odd, got L={L}")
    if not 0 < lam < 1:
        raise ValidationError(f"diamond probe needs 0 < lam < 1, got {lam}")


def diamond_closed_bound(L: int, lam: float) -> float:
    """``2(1 - cos(2 pi/L)) + 2 lam^{2L+2}/(1+lam^2)``."""
    _check_diamond(L, lam)
    return 2 * (1 - math.cos(2 * math.pi / L)) + 2 * lam ** (2 * L + 2) / (1 + lam * lam)


def diamond_probe_closed_form(L: int, lam: float) -> tuple[float, float]:
    """Exact ``(numerator, norm2)`` of the diamond probe from its class sums."""
    _check_diamond(L, lam)
    k = 2 * math.pi / L
    half = L // 2
    s_int = 0.0
    s_opp = 0.0
    for x, y in diamond_sites(L):
        w = math.sin(k * (x - y)) ** 2
        if x + y == L:
            s_opp += w
        elif 0 < x + y < L and abs(x - y) < half:
            s_int += lam ** (2 * (x + y)) * w
    q = lam * lam
    numer = (2 * (1 - math.cos(k)) * (s_int + (q + lam ** (2 * L)) / (1 + q) * s_opp)
             + 2 * lam ** (2 * L + 2) / (1 + q) * s_opp)
    norm2 = s_int + (1 + lam ** (2 * L)) * s_opp
    return numer, norm2


def diamond_probe_energy(L: int, lam: float, rtol: float = PROBE_RTOL) -> DiamondProbe:
    """Rayleigh quotient of ``sum lam^{x+y} sin(2 pi (x-y) / L) xi_(x,y)`` over ``D_L``.

    The energy is the one-particle quadratic form on the padded diamond
    ``{0 <= x+y <= L+1, |x-y| <= L/2+1}``.

    Raises
    ------
    ConsistencyError
        If the quadratic form and the closed form disagree, or the quotient
        exceeds ``2(1 - cos(2 pi/L)) + 2 lam^{2L+2}/(1+lam^2)``.
    """
    _check_diamond(L, lam)
    params = ModelParams((lam, lam))
    padded = LatticeRegion(diamond_sites(L, pad=1))
    k = 2 * math.pi / L
    half = L // 2
    c = padded.coords
    s, t = c.sum(axis=1), c[:, 0] - c[:, 1]
    inside = (s <= L) & (np.abs(t) <= half)
    phi = np.where(inside, lam**s.astype(float) * np.sin(k * t), 0.0)
    H = one_particle_matrix(padded, params)
    numer = float(phi @ H.matvec(phi))
    norm2 = float(phi @ phi)
    numer_c, norm2_c = diamond_probe_closed_form(L, lam)
    if not (math.isclose(numer, numer_c, rel_tol=rtol) and math.isclose(norm2, norm2_c, rel_tol=rtol)):
        raise ConsistencyError(
            f"diamond probe L={L}: quadratic form ({numer!r}, {norm2!r}) vs closed form ({numer_c!r}, {norm2_c!r})")
    bound = diamond_closed_bound(L, lam)
    quotient = numer / norm2
    if quotient > bound + 1e-12:
        raise ConsistencyError(f"diamond quotient {quotient!r} exceeds closed bound {bound!r}")
    return DiamondProbe(quotient, bound, numer_c / norm2_c, numer, norm2)
