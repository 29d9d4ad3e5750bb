"""Independent reference computations used by the tests.

Nothing here calls the package's assembly or eigensolver code: Hamiltonians
are built entry by entry from the two-site projectors, edges by a double
loop over sites, and spectra by dense ``numpy.linalg.eigh``.
"""

import itertools
import math

import numpy as np


def brute_edges(sites):
    """Oriented edges ``(i, j, k)`` with ``sites[j] = sites[i] + e_k``, by double loop."""
    out = []
    for i, p in enumerate(sites):
        for j, q in enumerate(sites):
            diff = [b - a for a, b in zip(p, q)]
            if sorted(diff) == [0] * (len(p) - 1) + [1]:
                out.append((i, j, diff.index(1)))
    return sorted(out, key=lambda t: (t[2], t[0]))


def two_site_term(lam, delta=0.0):
    """``(1 + delta)|11><11| + |phi><phi|`` with ``phi = (|01> - lam|10>)/sqrt(1+lam^2)``."""
    phi = np.array([0.0, 1.0, -lam, 0.0]) / math.sqrt(1 + lam * lam)
    e11 = np.array([0.0, 0.0, 0.0, 1.0])
    return (1 + delta) * np.outer(e11, e11) + np.outer(phi, phi)


def dense_hamiltonian(sites, lam, delta=0.0):
    """Full-space matrix with site ordinal ``i`` on bit ``i``, built config by config."""
    sites = sorted(tuple(s) for s in sites)
    n = len(sites)
    dim = 2**n
    H = np.zeros((dim, dim))
    for a, b, k in brute_edges(sites):
        h = two_site_term(lam[k], delta)
        for c in range(dim):
            na, nb = (c >> a) & 1, (c >> b) & 1
            col = 2 * na + nb
            rest = c & ~((1 << a) | (1 << b))
            for row in range(4):
                if h[row, col] != 0.0:
                    c2 = rest | ((row >> 1) << a) | ((row & 1) << b)
                    H[c2, c] += h[row, col]
    return H


def dense_one_particle(sites, lam):
    """One-particle block from the two-site projector restricted to one particle."""
    sites = sorted(tuple(s) for s in sites)
    H = np.zeros((len(sites), len(sites)))
    for a, b, k in brute_edges(sites):
        l = lam[k]
        H[a, a] += l * l / (1 + l * l)
        H[b, b] += 1 / (1 + l * l)
        H[a, b] -= l / (1 + l * l)
        H[b, a] -= l / (1 + l * l)
    return H


def chain_spectrum(m, lam):
    """Dense one-particle spectrum of the chain ``[0, m]``."""
    return np.linalg.eigvalsh(dense_one_particle([(x,) for x in range(m + 1)], (lam,)))


def ground_pair(sites, lam):
    """``(psi_0, psi_1)`` in the full space by direct substitution."""
    sites = sorted(tuple(s) for s in sites)
    n = len(sites)
    psi0 = np.zeros(2**n)
    psi0[0] = 1.0
    psi1 = np.zeros(2**n)
    for i, p in enumerate(sites):
        psi1[1 << i] = math.prod(l**x for l, x in zip(lam, p))
    return psi0, psi1 / np.linalg.norm(psi1)


def subspace_angle(A, B):
    """Largest principal angle between column spans (orthonormal inputs).

    Taken from the sine, ``||(1 - A A^T) B||_2``; the arccos of the cosines
    cannot resolve angles below about 1.5e-8.
    """
    s = np.linalg.norm(B - A @ (A.T @ B), 2)
    return float(np.arcsin(min(s, 1.0)))


def l_shape(n_arm=2):
    """Five-site L: a vertical arm of ``n_arm`` above a horizontal arm."""
    return [(0, 0), (1, 0), (2, 0), (0, 1), (0, 2)][: 1 + 2 * n_arm]


def ball_enumerate(X, l, ambient):
    """``{y in ambient : min_x |x - y|_1 <= l}`` by scanning the ambient set."""
    return sorted(y for y in ambient
                  if min(sum(abs(a - b) for a, b in zip(x, y)) for x in X) <= l)


def diamond_enumerate(L):
    half = L // 2
    return sorted((x, y) for x in range(-L, 2 * L) for y in range(-L, 2 * L)
                  if 0 <= x + y <= L and abs(x - y) <= half)


def multispecies_dense(sites, multi_lam, delta=0.0):
    """Dense n-species Hamiltonian, base ``n+1`` digits per site, from the bond vectors."""
    sites = sorted(tuple(s) for s in sites)
    n = len(multi_lam)
    q = n + 1
    N = len(sites)
    dim = q**N
    H = np.zeros((dim, dim))
    for a, b, k in brute_edges(sites):
        lam = [multi_lam[i][k] for i in range(n)]
        h = np.zeros((q * q, q * q))

        def ket(i, j):
            v = np.zeros(q * q)
            v[i * q + j] = 1.0
            return v

        for i in range(1, q):
            phi = ket(0, i) - lam[i - 1] * ket(i, 0)
            h += np.outer(phi, phi) / (phi @ phi)
            h += (1 + delta) * np.outer(ket(i, i), ket(i, i))
            for j in range(i + 1, q):
                phi = lam[i - 1] * ket(i, j) - lam[j - 1] * ket(j, i)
                h += np.outer(phi, phi) / (phi @ phi)
        for c in range(dim):
            da, db = (c // q**a) % q, (c // q**b) % q
            col = da * q + db
            rest = c - da * q**a - db * q**b
            for row in range(q * q):
                if h[row, col] != 0.0:
                    H[rest + (row // q) * q**a + (row % q) * q**b, c] += h[row, col]
    return H


def all_subsets(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def ground_projector_dense(all_sites, X, lam):
    """``G_X (x) 1`` on the full space of ``all_sites`` by explicit outer products."""
    n = len(all_sites)
    dim = 2**n
    idx = [all_sites.index(s) for s in X]
    mask = sum(1 << i for i in idx)
    amps = np.array([math.prod(l**x for l, x in zip(lam, s)) for s in X])
    amps /= np.linalg.norm(amps)
    G = np.zeros((dim, dim))
    for o in range(dim):
        if o & mask:
            continue
        G[o, o] += 1.0
        v = np.zeros(dim)
        for i, a in zip(idx, amps):
            v[o | (1 << i)] = a
        G += np.outer(v, v)
    return G


def condition3_sup_dense(lam, cross_section, n):
    """``sup ||G_slab psi||^2`` over the full range of ``G_{Lambda_n} - G_{Lambda_{n+1}}``."""
    T = list(itertools.product(*(range(k + 1) for k in cross_section)))
    sites = sorted(t + (h,) for t in T for h in range(n + 2))
    Gn = ground_projector_dense(sites, [s for s in sites if s[-1] <= n], lam)
    Gn1 = ground_projector_dense(sites, sites, lam)
    Gs = ground_projector_dense(sites, [s for s in sites if s[-1] >= n], lam)
    w, V = np.linalg.eigh(Gn - Gn1)
    B = V[:, w > 0.5]
    return float(np.linalg.eigvalsh(B.T @ Gs @ B).max())
