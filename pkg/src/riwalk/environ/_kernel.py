"""Compiled quenched walk on an occupancy grid."""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)

# stop codes
STOPPED = 1  # reached a stop region
WINDOW = 2  # reached the window's inner boundary (censored)
BUDGET = 3  # ran out of steps (censored)
ISOLATED = 4  # no occupied neighbour

WINDOW_BIT = 62
N_BITS = 63


@njit(**_JIT)
def quenched_walk(occ, labels, shape, periodic, beta, start, stop_bits, watch_bit, max_steps, gen,
                  ck_times, ck_pos, first_hit, visits, departures):
    """Walk with weights (beta, 1, 1, 1, 1, 1) towards the occupied (+e1, -e1, +e2, -e2, +e3, -e3) neighbours.

    ``occ`` and ``labels`` (int64 bitmasks) are C-ordered 3-d grids; ``start`` holds grid
    coordinates.  Without ``periodic`` the grid must carry a vacant border
    layer.  Bit ``b`` of ``labels`` marks named region ``b``; the walk stops
    at the first time ``k >= 1`` it sits on a site whose label meets
    ``stop_bits``, or on a site carrying ``WINDOW_BIT`` (censored).

    Returns ``(steps, code, c0, c1, c2, u0, u1, u2)`` where ``c`` is the final
    grid cell and ``u`` the unwrapped displacement from the start.
    ``first_hit[b]`` / ``visits[b]`` receive first hitting times (``-1`` if
    none) and visit counts at times ``k >= 1``; ``departures`` counts moves
    out of sites with ``watch_bit`` (index 0) and how many went to ``+e1``
    (index 1).  ``ck_pos[i]`` is the displacement after ``ck_times[i]`` steps.
    """
    n1, n2, n3 = shape[0], shape[1], shape[2]
    c = np.empty(3, np.int64)
    u = np.zeros(3, np.int64)
    for i in range(3):
        c[i] = start[i]
    w = np.empty(6)
    ck = 0
    n_ck = ck_times.shape[0]
    while ck < n_ck and ck_times[ck] == 0:
        ck_pos[ck, 0] = 0
        ck_pos[ck, 1] = 0
        ck_pos[ck, 2] = 0
        ck += 1
    watch = np.int64(1) << watch_bit if watch_bit >= 0 else np.int64(0)
    code = BUDGET
    k = 0
    while k < max_steps:
        x0, x1, x2 = c[0], c[1], c[2]
        if periodic:
            p0 = x0 + 1 if x0 + 1 < n1 else 0
            m0 = x0 - 1 if x0 > 0 else n1 - 1
            p1 = x1 + 1 if x1 + 1 < n2 else 0
            m1 = x1 - 1 if x1 > 0 else n2 - 1
            p2 = x2 + 1 if x2 + 1 < n3 else 0
            m2 = x2 - 1 if x2 > 0 else n3 - 1
        else:
            p0, m0, p1, m1, p2, m2 = x0 + 1, x0 - 1, x1 + 1, x1 - 1, x2 + 1, x2 - 1
        w[0] = beta if occ[p0, x1, x2] else 0.0
        w[1] = 1.0 if occ[m0, x1, x2] else 0.0
        w[2] = 1.0 if occ[x0, p1, x2] else 0.0
        w[3] = 1.0 if occ[x0, m1, x2] else 0.0
        w[4] = 1.0 if occ[x0, x1, p2] else 0.0
        w[5] = 1.0 if occ[x0, x1, m2] else 0.0
        tot = w[0] + w[1] + w[2] + w[3] + w[4] + w[5]
        if tot == 0.0:
            code = ISOLATED
            break
        v = gen.random() * tot
        r = 0
        acc = w[0]
        while (v >= acc or w[r] == 0.0) and r < 5:
            r += 1
            acc += w[r]
        if watch != 0 and (labels[x0, x1, x2] & watch) != 0:
            departures[0] += 1
            if r == 0:
                departures[1] += 1
        if r == 0:
            c[0] = p0
            u[0] += 1
        elif r == 1:
            c[0] = m0
            u[0] -= 1
        elif r == 2:
            c[1] = p1
            u[1] += 1
        elif r == 3:
            c[1] = m1
            u[1] -= 1
        elif r == 4:
            c[2] = p2
            u[2] += 1
        else:
            c[2] = m2
            u[2] -= 1
        k += 1
        while ck < n_ck and ck_times[ck] == k:
            ck_pos[ck, 0] = u[0]
            ck_pos[ck, 1] = u[1]
            ck_pos[ck, 2] = u[2]
            ck += 1
        lab = labels[c[0], c[1], c[2]]
        if lab != 0:
            for b in range(N_BITS):
                if (lab >> b) & 1:
                    visits[b] += 1
                    if first_hit[b] < 0:
                        first_hit[b] = k
            if (lab & stop_bits) != 0:
                code = STOPPED
                break
            if (lab >> WINDOW_BIT) & 1:
                code = WINDOW
                break
    return k, code, c[0], c[1], c[2], u[0], u[1], u[2]


@njit(**_JIT)
def walk_batch(occ, labels, shape, periodic, beta, start, stop_bits, watch_bit, max_steps, gen, reps,
               ck_times, out_steps, out_code, out_final, out_first, out_visits, out_dep, out_ck, out_end):
    """``reps`` independent walks from the same start; per-replica outputs in the ``out_*`` arrays."""
    for r in range(reps):
        for b in range(N_BITS):
            out_first[r, b] = -1
        k, code, c0, c1, c2, u0, u1, u2 = quenched_walk(
            occ, labels, shape, periodic, beta, start, stop_bits, watch_bit, max_steps, gen,
            ck_times, out_ck[r], out_first[r], out_visits[r], out_dep[r])
        out_steps[r] = k
        out_code[r] = code
        out_final[r, 0] = c0
        out_final[r, 1] = c1
        out_final[r, 2] = c2
        out_end[r, 0] = u0
        out_end[r, 1] = u1
        out_end[r, 2] = u2


@njit(**_JIT)
def torus_trace(n1, n2, n3, steps, gen, occ):
    """Mark the sites visited by a simple random walk on the torus, started at a uniform site."""
    x0 = int(gen.random() * n1)
    x1 = int(gen.random() * n2)
    x2 = int(gen.random() * n3)
    occ[x0, x1, x2] = 1
    for _ in range(steps):
        r = int(gen.random() * 6)
        if r == 0:
            x0 = x0 + 1 if x0 + 1 < n1 else 0
        elif r == 1:
            x0 = x0 - 1 if x0 > 0 else n1 - 1
        elif r == 2:
            x1 = x1 + 1 if x1 + 1 < n2 else 0
        elif r == 3:
            x1 = x1 - 1 if x1 > 0 else n2 - 1
        elif r == 4:
            x2 = x2 + 1 if x2 + 1 < n3 else 0
        else:
            x2 = x2 - 1 if x2 > 0 else n3 - 1
        occ[x0, x1, x2] = 1
