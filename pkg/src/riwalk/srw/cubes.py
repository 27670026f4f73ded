"""Exact exit distributions of SRW from lattice cubes, for walk-on-cubes jumps.

For the cube ``{|z_i| <= k}`` the walk started at the centre leaves through
each of the six faces with probability 1/6, and the exit point on a face
``z_1 = k+1`` has law ``6 G_k(0, (k, a, b))`` where ``G_k`` is the Green's
function killed outside the cube.  ``G_k`` is diagonalised by the sine basis
``sin(m pi (z + k + 1) / (2k + 2))``, which gives the face law in O(k^3).
"""

from __future__ import annotations

import functools
from collections import namedtuple

import numpy as np

CUBE_SIZES = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64)

CubeTables = namedtuple("CubeTables", ["sizes", "offsets", "prob", "alias", "pick"])


def face_exit_distribution(k: int) -> np.ndarray:
    """Probability of leaving the cube through ``(k+1, a, b)``, given the face ``z_1 = k+1``.

    Returned as a ``(2k+1, 2k+1)`` array indexed by ``(a + k, b + k)``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return np.ones((1, 1))
    N = 2 * k + 2
    m = np.arange(1, 2 * k + 2)
    z = np.arange(-k, k + 1)
    c = np.cos(m * np.pi / N)
    psi0 = np.sin(m * np.pi / 2.0)
    psik = np.sin(m * np.pi * (2 * k + 1) / N)
    denom = 1.0 - (c[:, None, None] + c[None, :, None] + c[None, None, :]) / 3.0
    S = np.einsum("i,ijk->jk", psi0 * psik, 1.0 / denom)
    V = psi0[None, :] * np.sin(np.outer(z + k + 1, m) * np.pi / N)
    G = V @ S @ V.T / (k + 1) ** 3
    H = np.clip(G, 0.0, None)
    return H / H.sum()


def face_exit_mass(k: int) -> float:
    """Unnormalised mass of one face; equals 1/6 exactly in exact arithmetic."""
    N = 2 * k + 2
    m = np.arange(1, 2 * k + 2)
    z = np.arange(-k, k + 1)
    c = np.cos(m * np.pi / N)
    psi0 = np.sin(m * np.pi / 2.0)
    psik = np.sin(m * np.pi * (2 * k + 1) / N)
    denom = 1.0 - (c[:, None, None] + c[None, :, None] + c[None, None, :]) / 3.0
    S = np.einsum("i,ijk->jk", psi0 * psik, 1.0 / denom)
    V = psi0[None, :] * np.sin(np.outer(z + k + 1, m) * np.pi / N)
    return float((V @ S @ V.T).sum() / (k + 1) ** 3 / 6.0)


def alias_table(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker alias table: draw ``i`` uniform, keep it w.p. ``prob[i]`` else take ``alias[i]``."""
    p = np.asarray(p, dtype=np.float64)
    n = len(p)
    scaled = p * n / p.sum()
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    return prob, alias


@functools.lru_cache(maxsize=1)
def cube_tables() -> CubeTables:
    sizes = np.array(CUBE_SIZES, dtype=np.int64)
    probs, aliases, offsets, pos = [], [], [0], 0
    for k in CUBE_SIZES:
        pr, al = alias_table(face_exit_distribution(k).reshape(-1))
        probs.append(pr)
        aliases.append(al)
        pos += pr.size
        offsets.append(pos)
    kmax = CUBE_SIZES[-1]
    # pick[c] = largest cube with k <= c - 1, or -1 for a single step
    pick = np.full(kmax + 2, -1, dtype=np.int64)
    for c in range(kmax + 2):
        ok = [i for i, k in enumerate(CUBE_SIZES) if k <= c - 1]
        pick[c] = ok[-1] if ok else -1
    return CubeTables(sizes, np.array(offsets, dtype=np.int64), np.concatenate(probs),
                      np.concatenate(aliases), pick)
