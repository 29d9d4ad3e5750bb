"""Thermodynamic-limit diagnostics computed from finite volumes.

Scenario classification follows the normalization ``C(Lambda_n)`` along an
increasing family of regions: a finite limit means the one-particle state
survives as a bound state, divergence means it dissolves. The local
topological order check reduces the ground-space projector on ``X^(l)`` to a
2x2 problem.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .bounds import martingale_lower_bound
from .errors import ValidationError
from .groundstate import geometric_sum, log_weights
from .lattice import LatticeRegion, enlarge, make_box, make_centered_box, make_diamond
from .model import ModelParams, one_particle_matrix
from .spectra import SpectralReport, lowest_eigenpairs

__all__ = [
    "FAMILY_KINDS",
    "RegionFamily",
    "ScenarioVerdict",
    "classify_scenario",
    "one_particle_weight_in_window",
    "ltqo_f",
    "random_hermitian",
    "site_operator",
    "LTQOResult",
    "ltqo_verify",
    "BulkProjectedGap",
    "bulk_projected_gap",
]

FAMILY_KINDS = ("boxes_to_Zd", "boxes_to_quadrant", "diamonds_to_halfplane", "custom")


def _logsumexp(v: np.ndarray) -> float:
    top = float(v.max())
    return top + math.log(float(np.exp(v - top).sum()))


def _log_C(region: LatticeRegion, params: ModelParams) -> float:
    return _logsumexp(2 * log_weights(region, params))


@dataclass
class RegionFamily:
    """An increasing sequence ``Lambda_1 ⊂ Lambda_2 ⊂ ...``.

    Built-in kinds: ``boxes_to_Zd`` gives ``[-n, n]^d``, ``boxes_to_quadrant``
    gives ``[0, n]^d`` and ``diamonds_to_halfplane`` gives ``D_{4n+2}``.
    ``custom`` takes an explicit list of regions.
    """

    kind: str
    params: ModelParams
    regions: list[LatticeRegion] | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValidationError(f"unknown family kind {self.kind!r}")
        if self.kind == "custom":
            if not self.regions:
                raise ValidationError("custom family needs a region list")
            for a, b in zip(self.regions, self.regions[1:]):
                if not set(a.sites) <= set(b.sites):
                    raise ValidationError("custom family must be increasing")
            if any(not r.connected for r in self.regions):
                raise ValidationError("custom family regions must be connected")
        if self.kind == "diamonds_to_halfplane" and self.params.d != 2:
            raise ValidationError("diamond family is two-dimensional")

    @property
    def n_available(self) -> int | None:
        return len(self.regions) if self.kind == "custom" else None

    def region(self, n: int) -> LatticeRegion:
        """``Lambda_n`` for ``n >= 1``."""
        d = self.params.d
        if self.kind == "boxes_to_Zd":
            return make_centered_box((n,) * d)
        if self.kind == "boxes_to_quadrant":
            return make_box((n,) * d)
        if self.kind == "diamonds_to_halfplane":
            return make_diamond(4 * n + 2).region
        return self.regions[n - 1]

    def log_C(self, n: int) -> float:
        """``log C(Lambda_n)``, factorized for boxes."""
        if self.kind in ("boxes_to_Zd", "boxes_to_quadrant"):
            lo = -n if self.kind == "boxes_to_Zd" else 0
            total = 0.0
            for lam in self.params.lam:
                # sum_{a=lo}^{n} lam^(2a) = lam^(2 lo) c(lam, n - lo), stably
                q = lam * lam
                if q > 1.0:
                    total += 2 * n * math.log(lam) + math.log(geometric_sum(1 / lam, n - lo))
                else:
                    total += 2 * lo * math.log(lam) + math.log(geometric_sum(lam, n - lo))
            return total
        return _log_C(self.region(n), self.params)

    def analytic_limit(self) -> tuple[str, float | None] | None:
        """``(scenario, limit)`` where the geometry decides it, else None."""
        lam = self.params.lam
        if self.kind == "boxes_to_quadrant":
            if all(l < 1 for l in lam):
                return "II", math.prod(1 / (1 - l * l) for l in lam)
            return "I", None
        if self.kind == "boxes_to_Zd":
            # every direction is unbounded both ways
            return "I", None
        if self.kind == "diamonds_to_halfplane":
            # x + y = 0 holds ~L/2 sites of weight 1; x + y = L holds as many of weight lam^(2L)
            return "I", None
        return None


@dataclass
class ScenarioVerdict:
    scenario: str                    # "I", "II" or "UNDECIDED"
    C_sequence: list[float]
    limit_estimate: float | str | None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


_NOISE = 1e-14


def _numeric_signature(logC: list[float], tol: float) -> tuple[str, dict]:
    # increments relative to C_n; ratios of absolute increments, in log space,
    # using only increments above the rounding floor of the sums
    rel_inc = [-math.expm1(a - b) for a, b in zip(logC, logC[1:])]
    ratios = []
    prev = None
    for i, r in enumerate(rel_inc):
        if r <= _NOISE:
            continue
        if prev is not None:
            ratios.append(math.exp(logC[i + 1] - logC[prev + 1]) * r / rel_inc[prev])
        prev = i
    tail = ratios[-3:]
    diag = {"relative_increments": rel_inc, "increment_ratios": ratios}
    if len(tail) >= 2 and rel_inc[-1] < tol and all(r < 1 - tol for r in tail):
        return "II", diag
    if len(tail) >= 2 and rel_inc[-1] >= tol and all(r >= 1 - 1e-12 for r in tail):
        return "I", diag
    return "UNDECIDED", diag


def classify_scenario(family: RegionFamily, n_max: int = 40, tol: float = 1e-9) -> ScenarioVerdict:
    """Decide whether ``C(Lambda_n)`` converges (II) or diverges (I).

    The numeric signature needs the last relative increment below ``tol`` and
    geometric decay of increments (II), or non-decreasing increments (I).
    Built-in families carry an analytic criterion that overrides an
    inconclusive signature; a conflict between the two is recorded in
    ``diagnostics``. A custom family with an inconclusive signature is
    ``UNDECIDED``.
    """
    if n_max < 4:
        raise ValidationError("n_max must be at least 4")
    if family.n_available is not None and n_max > family.n_available:
        raise ValidationError(f"custom family has only {family.n_available} regions")
    logC = [family.log_C(n) for n in range(1, n_max + 1)]
    C_seq = [math.exp(v) if v < 700 else math.inf for v in logC]
    numeric, diag = _numeric_signature(logC, tol)
    diag["numeric_verdict"] = numeric
    diag["log_C_sequence"] = logC
    analytic = family.analytic_limit()
    if analytic is not None:
        scenario, limit = analytic
        diag["analytic_verdict"] = scenario
        diag["analytic_limit"] = limit
        diag["agree"] = numeric == scenario
    else:
        scenario = numeric
        limit = None
    if scenario == "II":
        ratio = diag["increment_ratios"][-1] if diag["increment_ratios"] else 0.0
        tail = C_seq[-1] - C_seq[-2]
        estimate = C_seq[-1] + (tail * ratio / (1 - ratio) if 0 < ratio < 1 else 0.0)
        diag["tail_extrapolated"] = estimate
        limit_estimate: float | str | None = limit if limit is not None else estimate
    elif scenario == "I":
        limit_estimate = "DIVERGES"
    else:
        limit_estimate = None
    return ScenarioVerdict(scenario, C_seq, limit_estimate, diag)


def one_particle_weight_in_window(region: LatticeRegion, params: ModelParams,
                                  window: Sequence[Sequence[int]]) -> float:
    """Probability ``sum_{x in X} lambda^(2x) / C(region)`` of finding the particle in ``X``."""
    X = [tuple(p) for p in window]
    if not X:
        return 0.0
    sub = region.subregion(X)
    return math.exp(min(0.0, _log_C(sub, params) - _log_C(region, params)))


def ltqo_f(X: Sequence[Sequence[int]], l: int, ambient: LatticeRegion, params: ModelParams) -> float:
    """``2 sqrt(C(X) / C(X^(l)))`` with ``X^(l)`` taken inside ``ambient``."""
    Xr = ambient.subregion(X)
    Xl = enlarge(Xr.sites, l, ambient)
    return 2.0 * math.exp(0.5 * (_log_C(Xr, params) - _log_C(Xl, params)))


def random_hermitian(dim: int, seed: int) -> np.ndarray:
    """Complex Hermitian matrix with Gaussian entries."""
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (R + R.conj().T)


def site_operator(n_sites: int, site: int, op: np.ndarray) -> np.ndarray:
    """Embed a 2x2 ``op`` at ``site`` in the bit-ordered basis of ``n_sites`` sites."""
    if not 0 <= site < n_sites:
        raise ValidationError("site ordinal out of range")
    # bit i <-> site i, so the highest site is the leftmost Kronecker factor
    return np.kron(np.kron(np.eye(2 ** (n_sites - 1 - site)), op), np.eye(2**site))


@dataclass
class LTQOResult:
    lhs: float
    rhs: float
    f: float
    norm_A: float
    c: float
    M: np.ndarray = field(repr=False)
    seed: int | None = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def ltqo_verify(box: LatticeRegion, X: Sequence[Sequence[int]], l: int, params: ModelParams,
                A: np.ndarray | None = None, seed: int = 0) -> LTQOResult:
    """Compare ``||G A G - c(A) G||`` with ``||A|| f(l)`` on ``G = G_{X^(l)}``.

    Parameters
    ----------
    box : LatticeRegion
        Ambient region; ``X^(l)`` is cut to it.
    X : sequence of sites
        Support of ``A``, ordered like the region (bit ``i`` = ``i``-th site of ``X``).
    A : (2^|X|, 2^|X|) Hermitian array, optional
        Drawn by :func:`random_hermitian` with ``seed`` when omitted.

    Notes
    -----
    With ``Y = X^(l)`` and ``r = C(X)/C(Y)`` the one-particle state splits as
    ``psi_1^Y = sqrt(r) psi_1^X (x) vac + (vac on X) (x) (rest)``, so
    ``M_00 = <vac|A|vac>``, ``M_01 = sqrt(r) <vac|A|psi_1^X>`` and
    ``M_11 = r <psi_1^X|A|psi_1^X> + (1 - r) <vac|A|vac>``.
    """
    Xr = box.subregion(X)
    n = Xr.n_sites
    dim = 2**n
    if A is None:
        A = random_hermitian(dim, seed)
    else:
        A = np.asarray(A)
        seed = None
    if A.shape != (dim, dim):
        raise ValidationError(f"observable must be {dim}x{dim} for |X| = {n}")
    if not np.allclose(A, A.conj().T, atol=1e-12):
        raise ValidationError("observable must be Hermitian")
    Y = enlarge(Xr.sites, l, box)
    logw = log_weights(Xr, params)
    r = math.exp(_log_C(Xr, params) - _log_C(Y, params))
    w = np.exp(logw - logw.max())
    psi1 = np.zeros(dim)
    psi1[1 << np.arange(n)] = w / np.linalg.norm(w)
    a00 = A[0, 0]
    a01 = A[0, :] @ psi1
    a11 = psi1 @ A @ psi1
    M = np.array([[a00, math.sqrt(r) * a01],
                  [math.sqrt(r) * np.conj(a01), r * a11 + (1 - r) * a00]])
    c = float(np.real(M[0, 0] + M[1, 1]) / 2)
    M = M - c * np.eye(2)
    lhs = float(np.linalg.norm(M, 2))
    f = 2.0 * math.sqrt(r)
    norm_A = float(np.linalg.norm(A, 2))
    return LTQOResult(lhs, norm_A * f, f, norm_A, c, M, seed)


@dataclass
class BulkProjectedGap:
    """Exploratory: lowest one-particle energies away from the slanted edge."""

    L: int
    lam: float
    margin: int
    n_sites: int
    lowest: float
    report: SpectralReport
    martingale_lower_bound: float

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "report"}
        out["report"] = self.report.to_dict()
        return out


def bulk_projected_gap(L: int, lam: float, margin: int, count: int = 2, tol: float = 1e-10,
                       seed: int = 0) -> BulkProjectedGap:
    """One-particle block on ``D_L`` restricted to sites with ``x + y >= margin``.

    The restriction is the principal submatrix on the kept sites, so bonds
    to removed sites still contribute their diagonal part. ``margin = 0`` is
    the unrestricted block, whose lowest eigenvalue is the zero of ``psi_1``;
    ``lowest`` then reports the first nonzero eigenvalue.
    """
    if not 0 < lam < 1:
        raise ValidationError("bulk projected gap needs 0 < lam < 1")
    if margin < 0:
        raise ValidationError("margin must be nonnegative")
    D = make_diamond(L, k_odd_check=False).region
    params = ModelParams((lam, lam))
    H = one_particle_matrix(D, params)
    keep = np.nonzero(D.coords.sum(axis=1) >= margin)[0]
    if len(keep) == 0:
        raise ValidationError(f"margin {margin} leaves no sites in D_{L}")
    op = H.restrict(keep) if margin > 0 else H
    count = min(count, op.dim)
    rep = lowest_eigenpairs(op, count, tol=tol, seed=seed)
    lowest = rep.eigenvalues[0] if margin > 0 else (rep.gap if rep.gap is not None else math.nan)
    return BulkProjectedGap(L, lam, margin, op.dim, lowest, rep, martingale_lower_bound(params))
