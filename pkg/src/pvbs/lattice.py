"""Finite regions of the hypercubic lattice Z^d.

A region is an immutable, lexicographically ordered set of sites together with
its oriented nearest-neighbour edges ``(x, x + e_k)``. Site ordinals fixed here
are the bit positions used by every basis downstream.
"""

from __future__ import annotations

import hashlib
import itertools
from collections import deque
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "LatticeRegion",
    "DiamondRegion",
    "DIAMOND_CLASSES",
    "make_box",
    "make_centered_box",
    "make_diamond",
    "enlarge",
    "is_connected",
    "load_sites",
    "format_sites",
]

Point = tuple[int, ...]

DIAMOND_CLASSES = ("int", "edge", "opp", "uside", "lside")


class LatticeRegion:
    """A finite subset of Z^d with derived edge lists.

    Parameters
    ----------
    sites : iterable of int tuples
        Lattice points. All must share the same dimension ``d >= 1``.

    Attributes
    ----------
    d : int
        Dimension.
    sites : tuple of tuples
        Sites in lexicographic order.
    index_of : dict
        Site -> ordinal.
    edge_src, edge_dst, edge_axis : ndarray of int
        Oriented edges: ``sites[edge_dst[e]] == sites[edge_src[e]] + e_{edge_axis[e]}``.
        Axes are 0-based.
    connected : bool
        Whether the nearest-neighbour graph is connected.
    """

    __slots__ = ("d", "sites", "index_of", "edge_src", "edge_dst", "edge_axis",
                 "connected", "_coords")

    def __init__(self, sites: Iterable[Sequence[int]]):
        pts = [tuple(int(c) for c in s) for s in sites]
        if not pts:
            raise ValidationError("a region needs at least one site")
        d = len(pts[0])
        if d < 1:
            raise ValidationError("dimension must be at least 1")
        if any(len(p) != d for p in pts):
            raise ValidationError("inconsistent site dimensions")
        if len(set(pts)) != len(pts):
            raise ValidationError("duplicate sites")
        pts.sort()
        self.d = d
        self.sites: tuple[Point, ...] = tuple(pts)
        self.index_of: dict[Point, int] = {p: i for i, p in enumerate(pts)}
        self._coords = np.array(pts, dtype=np.int64).reshape(len(pts), d)

        src, dst, axis = [], [], []
        for k in range(d):
            for i, p in enumerate(pts):
                q = p[:k] + (p[k] + 1,) + p[k + 1:]
                j = self.index_of.get(q)
                if j is not None:
                    src.append(i)
                    dst.append(j)
                    axis.append(k)
        self.edge_src = np.array(src, dtype=np.int64)
        self.edge_dst = np.array(dst, dtype=np.int64)
        self.edge_axis = np.array(axis, dtype=np.int64)
        self.connected = _bfs_connected(self)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    @property
    def coords(self) -> np.ndarray:
        """``(n_sites, d)`` integer array of coordinates (read-only view)."""
        view = self._coords.view()
        view.flags.writeable = False
        return view

    @property
    def edges(self) -> list[tuple[int, int]]:
        """List of ``(site ordinal, axis)`` pairs."""
        return list(zip(self.edge_src.tolist(), self.edge_axis.tolist()))

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, p) -> bool:
        return tuple(p) in self.index_of

    def __iter__(self):
        return iter(self.sites)

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticeRegion) and self.sites == other.sites

    def __hash__(self) -> int:
        return hash(self.sites)

    def __repr__(self) -> str:
        return f"LatticeRegion(d={self.d}, n_sites={self.n_sites}, n_edges={self.n_edges})"

    def subregion(self, sites: Iterable[Sequence[int]]) -> "LatticeRegion":
        """Region on a subset of these sites; raises if any site is foreign."""
        pts = [tuple(s) for s in sites]
        missing = [p for p in pts if p not in self.index_of]
        if missing:
            raise ValidationError(f"sites not in region: {missing[:3]}")
        return LatticeRegion(pts)

    def translated(self, shift: Sequence[int]) -> "LatticeRegion":
        return LatticeRegion(tuple(a + b for a, b in zip(p, shift)) for p in self.sites)

    def content_hash(self) -> str:
        """SHA-256 of the canonical site-list text."""
        return hashlib.sha256(format_sites(self).encode()).hexdigest()


def _bfs_connected(region: LatticeRegion) -> bool:
    n = region.n_sites
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in zip(region.edge_src.tolist(), region.edge_dst.tolist()):
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if not seen[b]:
                seen[b] = True
                count += 1
                queue.append(b)
    return count == n


def is_connected(region: LatticeRegion) -> bool:
    """True iff the nearest-neighbour graph on the region's sites is connected."""
    return region.connected


def make_box(N: Sequence[int]) -> LatticeRegion:
    """The box ``[0, N_1] x ... x [0, N_d]``."""
    N = tuple(int(n) for n in N)
    if len(N) == 0:
        raise ValidationError("box needs d >= 1")
    if any(n < 0 for n in N):
        raise ValidationError("box extents must be nonnegative")
    return LatticeRegion(itertools.product(*(range(n + 1) for n in N)))


def make_centered_box(N: Sequence[int]) -> LatticeRegion:
    """The box ``[-N_1, N_1] x ... x [-N_d, N_d]``."""
    N = tuple(int(n) for n in N)
    if len(N) == 0:
        raise ValidationError("box needs d >= 1")
    if any(n < 0 for n in N):
        raise ValidationError("box extents must be nonnegative")
    return LatticeRegion(itertools.product(*(range(-n, n + 1) for n in N)))


class DiamondRegion:
    """The tilted square ``D_L = {(x, y): 0 <= x+y <= L, |x-y| <= L/2}``.

    ``classification`` maps every site to one of ``DIAMOND_CLASSES``: ``edge``
    (x+y = 0), ``opp`` (x+y = L), ``uside`` (x-y = -L/2), ``lside``
    (x-y = L/2), or ``int``. When L/2 is odd the four boundary lines share no
    lattice point; otherwise corners go to the first matching class in the
    order edge, opp, uside, lside.
    """

    __slots__ = ("L", "region", "classification")

    def __init__(self, L: int, region: LatticeRegion, classification: dict[Point, str]):
        self.L = L
        self.region = region
        self.classification = classification

    def sites_of(self, cls: str) -> list[Point]:
        if cls not in DIAMOND_CLASSES:
            raise ValidationError(f"unknown class {cls!r}")
        return [p for p in self.region.sites if self.classification[p] == cls]

    def __repr__(self) -> str:
        return f"DiamondRegion(L={self.L}, n_sites={self.region.n_sites})"


def diamond_sites(L: int, pad: int = 0) -> list[Point]:
    """Sites with ``0 <= x+y <= L+pad`` and ``|x-y| <= L/2 + pad``."""
    half = L // 2
    out = []
    for s in range(0, L + pad + 1):
        for t in range(-(half + pad), half + pad + 1):
            if (s + t) % 2 == 0:
                out.append(((s + t) // 2, (s - t) // 2))
    return out


def make_diamond(L: int, k_odd_check: bool = True) -> DiamondRegion:
    """Build ``D_L`` and classify its sites.

    Raises
    ------
    ValidationError
        If ``L`` is odd or < 2, or ``k_odd_check`` is set and ``L/2`` is even.
    """
    L = int(L)
    if L < 2 or L % 2:
        raise ValidationError(f"diamond size must be even and >= 2, got {L}")
    half = L // 2
    if k_odd_check and half % 2 == 0:
        raise ValidationError(f"L/2 must be odd, got L={L}")
    region = LatticeRegion(diamond_sites(L))
    classes = {}
    for x, y in region.sites:
        if x + y == 0:
            c = "edge"
        elif x + y == L:
            c = "opp"
        elif x - y == -half:
            c = "uside"
        elif x - y == half:
            c = "lside"
        else:
            c = "int"
        classes[(x, y)] = c
    return DiamondRegion(L, region, classes)


def enlarge(X: Iterable[Sequence[int]], l: int, ambient: LatticeRegion | None = None) -> LatticeRegion:
    """All points within l1 distance ``l`` of ``X``, intersected with ``ambient``.

    Distance is the graph distance of Z^d, not of the ambient region. With
    ``ambient=None`` the full lattice is used.
    """
    pts = {tuple(p) for p in X}
    if not pts:
        raise ValidationError("X must be nonempty")
    if l < 0:
        raise ValidationError("l must be nonnegative")
    if ambient is not None:
        missing = [p for p in pts if p not in ambient.index_of]
        if missing:
            raise ValidationError(f"X not contained in ambient region: {sorted(missing)[:3]}")
    d = len(next(iter(pts)))
    steps = []
    for k in range(d):
        for sgn in (1, -1):
            e = [0] * d
            e[k] = sgn
            steps.append(tuple(e))
    ball = set(pts)
    frontier = set(pts)
    for _ in range(l):
        nxt = set()
        for p in frontier:
            for e in steps:
                q = tuple(a + b for a, b in zip(p, e))
                if q not in ball:
                    nxt.add(q)
        ball |= nxt
        frontier = nxt
    if ambient is not None:
        ball = {p for p in ball if p in ambient.index_of}
    return LatticeRegion(ball)


def format_sites(region: LatticeRegion) -> str:
    return "".join(" ".join(str(c) for c in p) + "\n" for p in region.sites)


def load_sites(path: str | Path) -> LatticeRegion:
    """Read a site-list file.

    One site per line as whitespace-separated integers; blank lines and lines
    starting with ``#`` are skipped. The dimension is taken from the first
    site line.
    """
    pts = []
    d = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            p = tuple(int(tok) for tok in line.split())
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: non-integer coordinate") from exc
        if d is None:
            d = len(p)
        elif len(p) != d:
            raise ValidationError(f"{path}:{lineno}: expected {d} coordinates, got {len(p)}")
        pts.append(p)
    if len(set(pts)) != len(pts):
        raise ValidationError(f"{path}: duplicate sites")
    return LatticeRegion(pts)
