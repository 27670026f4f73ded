"""One-dimensional walks, coordinate decimation, and the quiver-tube excursion kernels."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _ruin(a, reps, gen):
    """Walks from 1 absorbed at {0, a}: (wins, sum of win durations, sum of squared durations)."""
    wins = 0
    s1 = 0.0
    s2 = 0.0
    bits = np.uint64(0)
    nbits = 0
    for _ in range(reps):
        x = 1
        k = 0
        while x != 0 and x != a:
            if nbits == 0:
                bits = np.uint64(gen.random() * 4503599627370496.0)  # 52 fair bits
                nbits = 52
            x += 1 if (bits & np.uint64(1)) else -1
            bits >>= np.uint64(1)
            nbits -= 1
            k += 1
        if x == a:
            wins += 1
            s1 += k
            s2 += float(k) * k
    return wins, s1, s2


@njit(**_JIT)
def _decimate(n_steps, coord, gen, out):
    """Successive moves of one coordinate of a 3-d SRW run for ``n_steps`` steps."""
    m = 0
    for _ in range(n_steps):
        r = int(gen.random() * 6)
        if (r >> 1) == coord:
            out[m] = -1 if r & 1 else 1
            m += 1
    return m


@njit(**_JIT)
def _tube_walk(labels, strides, start, target, gen, reps, theta, ratio, tilt, max_steps):
    """Walk in a box-shaped tube with e1-tilt ``theta`` and transverse cosine weighting.

    ``labels`` marks the absorbing set (nonzero) on a grid whose axis 0 is e1.
    ``ratio[j, s]`` gives the transverse step weight cos(a (c+s))/cos(a c) at
    transverse grid index ``j`` for ``s = +1`` (index 0) and ``-1``
    (index 1).  With ``tilt`` False the walk is the plain SRW.  Returns the
    number of walks whose absorbing site is ``target`` and the number that
    ran out of steps.
    """
    hits = 0
    cens = 0
    e = math.exp(theta)
    ie = 1.0 / e
    w = np.empty(6)
    for _ in range(reps):
        f = start
        done = False
        for _k in range(max_steps):
            if tilt:
                # transverse coordinates recovered from the flat index
                c2 = (f % strides[0]) // strides[1]
                c3 = f % strides[1]
                w[0] = e
                w[1] = ie
                w[2] = ratio[c2, 0]
                w[3] = ratio[c2, 1]
                w[4] = ratio[c3, 0]
                w[5] = ratio[c3, 1]
                tot = w[0] + w[1] + w[2] + w[3] + w[4] + w[5]
                u = gen.random() * tot
                r = 0
                acc = w[0]
                while u >= acc and r < 5:
                    r += 1
                    acc += w[r]
            else:
                r = int(gen.random() * 6)
            s = strides[r >> 1]
            f += -s if r & 1 else s
            if labels[f] != 0:
                if f == target:
                    hits += 1
                done = True
                break
        if not done:
            cens += 1
    return hits, cens
