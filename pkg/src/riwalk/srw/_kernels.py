"""Compiled walk kernels shared by the escape, hitting and interlacement samplers.

Positions are small int64 arrays so the same code serves d = 3 and d = 4.
Away from the target set the walk is accelerated:

* within ``far`` of the set (d = 3 only), by exact exits from lattice cubes
  disjoint from the set, using the tables of :mod:`riwalk.srw.cubes`;
* beyond ``far``, by jumps to a uniform point of a sphere that misses the
  set's bounding ball, rounded to the lattice;
* once ``cap_ub(A) c(D) / (1 + D)^p < eps``, with ``D`` the distance to the
  bounding ball and ``c(D)`` the Green decay constant valid beyond ``D``, the
  walk is declared escaped.  The return probability from there is below
  ``eps`` because ``P_x[hit A] <= cap(A) max_y g(x, y)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)
# Hot helpers never allocate, so they are compiled without the reference-counting
# runtime; otherwise every call would incref and decref each array of the tuple.
_HOT = dict(cache=True, nogil=True, _nrt=False)


@njit(**_HOT)
def set_index(G, pos):
    """Index of ``pos`` in the target set, or -1."""
    f = 0
    for i in range(G.d):
        a = pos[i] - G.alo[i]
        if a < 0 or a >= G.ashape[i]:
            return -1
        f += a * G.astrides[i]
    return G.index[f]


@njit(**_HOT)
def cheb_distance(G, pos):
    """Chebyshev distance to the set; a lower bound outside the distance grid."""
    f = 0
    inside = True
    for i in range(G.d):
        a = pos[i] - G.glo[i]
        if a < 0 or a >= G.gshape[i]:
            inside = False
            break
        f += a * G.gstrides[i]
    if inside:
        return np.int64(G.cheb[f])
    c = 0
    for i in range(G.d):
        lo = G.alo[i]
        hi = lo + G.ashape[i] - 1
        v = max(lo - pos[i], pos[i] - hi, 0)
        c = max(c, v)
    return c


@njit(**_HOT)
def single_step(pos, gen, d):
    r = int(gen.random() * 2 * d)
    i = r >> 1
    if r & 1:
        pos[i] -= 1
    else:
        pos[i] += 1


@njit(**_HOT)
def cube_jump(G, pos, gen, ki):
    k = G.sizes[ki]
    w = 2 * k + 1
    face = int(gen.random() * 6)
    v = gen.random() * (w * w)
    j = min(int(v), w * w - 1)
    if v - j >= G.prob[G.offsets[ki] + j]:
        j = G.alias[G.offsets[ki] + j]
    a = j // w - k
    b = j % w - k
    axis = face >> 1
    sign = 1 - 2 * (face & 1)
    # the face law is invariant under reflections and the swap of its two axes
    pos[axis] += sign * (k + 1)
    pos[(axis + 1) % 3] += a
    pos[(axis + 2) % 3] += b


@njit(**_HOT)
def sphere_jump(pos, gen, scr, rho):
    d = pos.shape[0]
    nrm = 0.0
    for i in range(d):
        v = gen.standard_normal()
        scr[i] = v
        nrm += v * v
    nrm = math.sqrt(nrm)
    for i in range(d):
        pos[i] = pos[i] + np.int64(np.rint(rho * scr[i] / nrm))


@njit(**_HOT)
def ball_distance(G, pos):
    r2 = 0.0
    for i in range(G.d):
        dv = pos[i] - G.center[i]
        r2 += dv * dv
    return math.sqrt(r2) - G.r0


@njit(**_HOT)
def certified_escape(G, D):
    if D <= 0.0:
        return False
    if D >= G.rfar:
        b = G.gfar * G.capub * (1.0 + 1.0 / D) / (1.0 + D)
        if G.power == 2.0:
            b *= (1.0 + 1.0 / D) / (1.0 + D)
    else:
        b = G.ghat * G.capub / (1.0 + D)
        if G.power == 2.0:
            b /= 1.0 + D
    return b < G.eps


@njit(**_HOT)
def advance(G, pos, gen, scr):
    """One accelerated move; returns 1 if the walk is certified to have escaped."""
    D = ball_distance(G, pos)
    if certified_escape(G, D):
        return 1
    if D > G.far:
        sphere_jump(pos, gen, scr, D - 2.0)
        return 0
    if G.use_cubes:
        c = cheb_distance(G, pos)
        if c >= 2:
            cc = min(c, G.pick.shape[0] - 1)
            ki = G.pick[cc]
            if ki >= 0:
                cube_jump(G, pos, gen, ki)
                return 0
    single_step(pos, gen, G.d)
    return 0


@njit(**_HOT)
def escapes_from(G, pos, gen, scr):
    """Run from ``pos`` (outside the set) until hit (0) or certified escape (1)."""
    while True:
        if set_index(G, pos) >= 0:
            return 0
        if advance(G, pos, gen, scr) == 1:
            return 1


@njit(**_JIT)
def escape_counts(G, starts, reps, gen, out):
    """``out[s]`` = number of escapes among ``reps`` walks from ``starts[s]`` (in the set)."""
    d = G.d
    pos = np.empty(d, np.int64)
    scr = np.empty(d, np.float64)
    for s in range(starts.shape[0]):
        cnt = 0
        for _ in range(reps):
            for i in range(d):
                pos[i] = starts[s, i]
            single_step(pos, gen, d)
            cnt += escapes_from(G, pos, gen, scr)
        out[s] = cnt


@njit(**_JIT)
def escape_from_starts(G, starts, gen):
    """Number of walks from the rows of ``starts`` (outside the set) that never hit it."""
    d = G.d
    pos = np.empty(d, np.int64)
    scr = np.empty(d, np.float64)
    cnt = 0
    for s in range(starts.shape[0]):
        for i in range(d):
            pos[i] = starts[s, i]
        cnt += escapes_from(G, pos, gen, scr)
    return cnt


@njit(**_JIT)
def hit_walk(G, start, gen, exact, max_moves, pos):
    """First hitting of the set at a time k >= 1.

    Returns ``(hit, moves, censored)``; the final position is left in ``pos``.
    With ``exact`` every move is a single lattice step, so ``moves`` is the
    exact step count.
    """
    d = G.d
    scr = np.empty(d, np.float64)
    for i in range(d):
        pos[i] = start[i]
    single_step(pos, gen, d)
    moves = 1
    while True:
        if set_index(G, pos) >= 0:
            return 1, moves, 0
        if moves >= max_moves:
            return 0, moves, 1
        if exact:
            if certified_escape(G, ball_distance(G, pos)):
                return 0, moves, 1
            single_step(pos, gen, d)
        elif advance(G, pos, gen, scr) == 1:
            return 0, moves, 1
        moves += 1


@njit(**_JIT)
def hit_counts(G, start, reps, gen):
    pos = np.empty(G.d, np.int64)
    hits = 0
    for _ in range(reps):
        h, _m, _c = hit_walk(G, start, gen, False, 1 << 62, pos)
        hits += h
    return hits


@njit(**_JIT)
def _grow(buf, n):
    if n < buf.shape[0]:
        return buf
    out = np.empty(2 * buf.shape[0] + 16, buf.dtype)
    out[:n] = buf[:n]
    return out


@njit(**_JIT)
def soup_sample(G, face_site, face_dir, points, u, u_max, gen, record):
    """One interlacement sample on the target set ``W`` by Poisson thinning.

    Trials arrive at rate ``u_max F / (2d)`` over the ``F`` outward faces
    ``(x, dir)`` of ``W`` and carry uniform labels in ``[0, u_max]``.  A trial
    is kept when the walk from ``x + dir`` never hits ``W``; the kept ``x`` are
    then a Poisson(``u cap W``) sample from the normalised harmonic measure,
    and each starts a forward walk whose visits to ``W`` are recorded.
    Trials are processed in label order, so the level-``u`` sample is a
    prefix of every level-``u'`` sample with ``u <= u' <= u_max``.

    Returns ``(local_time, starts, labels, offsets, trace)``; the last three
    are empty unless ``record``.
    """
    d = G.d
    F = face_site.shape[0]
    nW = points.shape[0]
    lt = np.zeros(nW, np.int32)
    n_trials = gen.poisson(u_max * F / (2.0 * d))
    labels = np.sort(gen.random(n_trials) * u_max)
    starts = np.empty(16, np.int64)
    kept = np.empty(16, np.float64)
    offsets = np.zeros(17, np.int64)
    trace = np.empty(64 if record else 1, np.int32)
    nt = 0
    ns = 0
    pos = np.empty(d, np.int64)
    scr = np.empty(d, np.float64)
    for t in range(n_trials):
        if labels[t] > u:
            break
        f = int(gen.random() * F)
        x = face_site[f]
        for i in range(d):
            pos[i] = points[x, i]
        dr = face_dir[f]
        if dr & 1:
            pos[dr >> 1] -= 1
        else:
            pos[dr >> 1] += 1
        if escapes_from(G, pos, gen, scr) == 0:
            continue
        starts = _grow(starts, ns)
        kept = _grow(kept, ns)
        starts[ns] = x
        kept[ns] = labels[t]
        ns += 1
        for i in range(d):
            pos[i] = points[x, i]
        lt[x] += 1
        if record:
            trace = _grow(trace, nt)
            trace[nt] = x
            nt += 1
        while advance(G, pos, gen, scr) == 0:
            j = set_index(G, pos)
            if j >= 0:
                lt[j] += 1
                if record:
                    trace = _grow(trace, nt)
                    trace[nt] = j
                    nt += 1
        if record:
            offsets = _grow(offsets, ns + 1)
            offsets[ns] = nt
    return lt, starts[:ns], kept[:ns], offsets[: ns + 1], trace[:nt]


@njit(**_JIT)
def soup_local_times(G, face_site, face_dir, points, u, gen, reps, out):
    """Local-time vectors of ``reps`` independent samples, saturated at 65535."""
    for r in range(reps):
        lt, _s, _l, _o, _t = soup_sample(G, face_site, face_dir, points, u, u, gen, False)
        for j in range(lt.shape[0]):
            out[r, j] = min(lt[j], 65535)


@njit(**_JIT)
def soup_counts(G, face_site, face_dir, points, u, gen, reps, watch, out_count, out_hit):
    """Trajectory counts and whether any watched site (mask over W) was visited."""
    for r in range(reps):
        lt, s, _l, _o, _t = soup_sample(G, face_site, face_dir, points, u, u, gen, False)
        out_count[r] = s.shape[0]
        hit = 0
        for j in range(lt.shape[0]):
            if watch[j] and lt[j] > 0:
                hit = 1
                break
        out_hit[r] = hit


@njit(**_JIT)
def label_walk(labels, strides, start, gen, max_steps):
    """SRW on a flat grid until it steps on a site with nonzero label.

    ``labels`` must enclose the start by labelled sites, so the walk never
    leaves the array.  Returns ``(label, steps, final_index)``; label 0 means
    the step budget ran out.
    """
    d = strides.shape[0]
    f = start
    for k in range(1, max_steps + 1):
        r = int(gen.random() * 2 * d)
        s = strides[r >> 1]
        f += -s if r & 1 else s
        lab = labels[f]
        if lab != 0:
            return lab, k, f
    return 0, max_steps, f


@njit(**_JIT)
def forward_walks(G, starts, points, gen):
    """Forward walks from the given set indices; returns ``(local_time, offsets, trace)``."""
    d = G.d
    lt = np.zeros(points.shape[0], np.int32)
    offsets = np.zeros(starts.shape[0] + 1, np.int64)
    trace = np.empty(64, np.int32)
    nt = 0
    pos = np.empty(d, np.int64)
    scr = np.empty(d, np.float64)
    for s in range(starts.shape[0]):
        x = starts[s]
        for i in range(d):
            pos[i] = points[x, i]
        lt[x] += 1
        trace = _grow(trace, nt)
        trace[nt] = x
        nt += 1
        while advance(G, pos, gen, scr) == 0:
            j = set_index(G, pos)
            if j >= 0:
                lt[j] += 1
                trace = _grow(trace, nt)
                trace[nt] = j
                nt += 1
        offsets[s + 1] = nt
    return lt, offsets, trace[:nt]
