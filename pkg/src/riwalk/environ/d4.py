"""Simplified traps on Z^4: a dead-end occupied segment along e1.

The trap at ``x`` has the segment ``x + j e1``, ``0 <= j <= s1`` with
``s1 = floor(eps1 ln n)`` occupied; the last ``s2 = floor(eps2 ln n)``
segment sites have every transversal neighbour vacant, and so does
``x + (s1 + 1) e1``.  A walk reaching the tip can only leave by walking
``s2`` steps against the drift, which takes of order ``beta^{s2}`` steps.
Larger ``eps2`` only adds vacancy conditions, so detection events are
nested in ``eps2`` on a common sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from ..errors import DegenerateScale, InvalidBias, InvalidInput
from ..lattice import clamp_log_n, floor_real
from ..rng import as_stream
from ..srw import _kernels as SK
from ..srw.geometry import outward_faces
from ..srw.walks import geometry_for

D = 4
OFFSETS4 = np.concatenate([np.eye(D, dtype=np.int64)[[i, i]] * np.array([[1], [-1]]) for i in range(D)])

_JIT = dict(cache=True, nogil=True)
# Without cube acceleration a d = 4 escape at 1e-4 walks out to radius ~60 step by step;
# 1e-2 keeps samples under a millisecond and moves occupancies by less than the noise.
D4_EPS = 1e-2


def d4_scales(eps1: float, eps2: float, n: float) -> tuple[int, int]:
    """``(s1, s2) = (floor(eps1 ln n), floor(eps2 ln n))``."""
    if not (eps1 > 0 and eps2 > 0):
        raise InvalidInput("eps1 and eps2 must be positive")
    ln = clamp_log_n(n)
    s1, s2 = floor_real(eps1 * ln), floor_real(eps2 * ln)
    if s2 < 1 or s1 < s2:
        raise DegenerateScale(f"need 1 <= floor(eps2 ln n) <= floor(eps1 ln n), got s1={s1}, s2={s2}")
    return s1, s2


def segment_sites(s1: int) -> np.ndarray:
    pts = np.zeros((s1 + 1, D), dtype=np.int64)
    pts[:, 0] = np.arange(s1 + 1)
    return pts


def shell_sites(s1: int, s2: int) -> np.ndarray:
    """Sites that must be vacant: transversal neighbours of the last ``s2`` segment sites and the cap."""
    out = []
    for j in range(s1 - s2 + 1, s1 + 1):
        for o in OFFSETS4[2:]:
            out.append(np.r_[j, 0, 0, 0] + o)
    out.append(np.array([s1 + 1, 0, 0, 0]))
    return np.array(out, dtype=np.int64)


@lru_cache(maxsize=16)
def d4_window(s1: int, radius: int = 2, margin: int = 2, eps_ret: float = D4_EPS):
    """Box ``[-margin, s1 + 1 + margin] x [-radius, radius]^3`` and its soup geometry."""
    ax = [np.arange(-margin, s1 + 2 + margin)] + [np.arange(-radius, radius + 1)] * 3
    pts = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, D).astype(np.int64)
    lo = pts.min(axis=0)
    mask = np.ones(tuple(pts.max(axis=0) - lo + 1), dtype=bool)
    fs, fd = outward_faces(pts, lo, mask)
    return pts, lo, mask.shape, fs, fd, geometry_for(pts, eps_ret)


@dataclass
class D4Report:
    segment: bool
    shell: np.ndarray  # per s2' = 1..s2: every required vacancy holds
    shell_occupied: int  # occupied sites among the full shell for s2

    @property
    def is_trap(self) -> bool:
        return bool(self.segment and self.shell[-1])


def detect_d4(occupied, s1: int, s2: int) -> D4Report:
    """Check the trap at the origin; ``occupied`` maps an (N, 4) array to booleans."""
    seg = bool(occupied(segment_sites(s1)).all())
    nested = np.array([not occupied(shell_sites(s1, k)).any() for k in range(1, s2 + 1)])
    return D4Report(seg, nested, int(occupied(shell_sites(s1, s2)).sum()))


def grid_lookup(occ: np.ndarray, lo: np.ndarray):
    def f(pts):
        g = np.asarray(pts, dtype=np.int64) - lo
        ok = ((g >= 0) & (g < occ.shape)).all(axis=1)
        out = np.zeros(len(g), dtype=bool)
        out[ok] = occ[tuple(g[ok].T)]
        return out
    return f


def hand_built_d4(s1: int, s2: int, extra=()) -> tuple[np.ndarray, np.ndarray]:
    """Grid (origin ``lo``) holding the segment, a transversal stub at the base, and ``extra`` sites."""
    pts, lo, shape, *_ = d4_window(s1)
    occ = np.zeros(shape, dtype=bool)
    occ[tuple((segment_sites(s1) - lo).T)] = True
    occ[tuple((np.array([[0, 1, 0, 0], [-1, 0, 0, 0]]) - lo).T)] = True
    for e in extra:
        occ[tuple(np.asarray(e) - lo)] = True
    return occ, lo


@njit(**_JIT)
def _walk4(occ, edge, strides, beta, start, max_steps, gen):
    """Walk on a flat padded 4-d grid; stops on ``edge`` cells (code 2) or budget (code 3)."""
    f = start
    w = np.empty(8)
    for k in range(1, max_steps + 1):
        tot = 0.0
        for r in range(8):
            s = strides[r >> 1]
            g = f - s if r & 1 else f + s
            w[r] = (beta if r == 0 else 1.0) if occ[g] else 0.0
            tot += w[r]
        if tot == 0.0:
            return k - 1, 4
        v = gen.random() * tot
        r = 0
        acc = w[0]
        while (v >= acc or w[r] == 0.0) and r < 7:
            r += 1
            acc += w[r]
        s = strides[r >> 1]
        f = f - s if r & 1 else f + s
        if edge[f]:
            return k, 2
    return max_steps, 3


@njit(**_JIT)
def _walk4_batch(occ, edge, strides, beta, start, max_steps, gen, steps, code):
    for i in range(steps.shape[0]):
        steps[i], code[i] = _walk4(occ, edge, strides, beta, start, max_steps, gen)


def _padded(occ: np.ndarray):
    p = np.pad(occ.astype(np.uint8), 1)
    inner = np.pad(np.ones(occ.shape, dtype=bool), 1)
    interior = inner.copy()
    for ax in range(D):
        for s in (1, -1):
            interior &= np.roll(inner, s, axis=ax)
    strides = np.array([np.prod(p.shape[i + 1:]) for i in range(D)], dtype=np.int64)
    return p.ravel(), (inner & ~interior).ravel(), strides


def d4_exit_times(occ: np.ndarray, lo: np.ndarray, beta: float, walks: int, rng, max_steps: int = 1_000_000):
    """Exit times from the window for ``walks`` walks started at the origin; budget exits are censored."""
    if not beta > 1:
        raise InvalidBias(f"beta must be > 1, got {beta}")
    flat, edge, strides = _padded(occ)
    start = int(np.dot(-lo + 1, strides))
    steps = np.zeros(walks, dtype=np.int64)
    code = np.zeros(walks, dtype=np.int64)
    _walk4_batch(flat, edge.astype(np.uint8), strides, float(beta), start, np.int64(max_steps),
                 as_stream(rng).generator(), steps, code)
    return steps, code != 2


@lru_cache(maxsize=16)
def detection_set(s1: int, s2: int, eps_ret: float = D4_EPS):
    """Segment plus its largest shell, with soup geometry; occupancy there is all detection needs."""
    pts = np.unique(np.concatenate([segment_sites(s1), shell_sites(s1, s2)]), axis=0)
    fs, fd = outward_faces(pts)
    return pts, fs, fd, geometry_for(pts, eps_ret)


def plant_d4(occ: np.ndarray, lo: np.ndarray, s1: int, s2: int) -> np.ndarray:
    """Copy of ``occ`` with the segment occupied and the shell vacant."""
    out = occ.copy()
    out[tuple((segment_sites(s1) - lo).T)] = True
    out[tuple((shell_sites(s1, s2) - lo).T)] = False
    return out


@dataclass
class D4Result:
    eps1: float
    eps2: float
    s1: int
    s2: int
    samples: int
    segment_hits: int
    detections: np.ndarray  # index k-1: traps with shell length k (nested, non-increasing)
    quantiles: dict  # beta -> {level: exit time}
    censored: dict  # beta -> censored fraction
    environments: int  # planted environments used for sojourn walks
    meta: dict = field(default_factory=dict)

    @property
    def frequency(self) -> np.ndarray:
        return self.detections / self.samples

    @property
    def stderr(self) -> np.ndarray:
        p = self.frequency
        return np.sqrt(p * (1 - p) / self.samples)


def _quantile_table(t: np.ndarray, levels) -> dict:
    t = np.sort(t)
    return {lv: float(t[max(0, min(len(t) - 1, int(math.ceil(lv * len(t))) - 1))]) for lv in levels}


def d4_trap_mode(eps1: float, eps2: float, u: float, beta, n: float, rng, reps: int = 100_000,
                 walks: int = 200, envs: int = 10, max_steps: int = 1_000_000,
                 levels=(0.1, 0.5, 0.9), eps_ret: float = D4_EPS) -> D4Result:
    """Detection frequency of the 4-d trap at the origin and sojourn times in planted traps.

    Detection: ``reps`` samples of the interlacement on the segment and its
    shell, each scored for every shell length up to ``s2``.  Sojourn:
    ``envs`` samples on a surrounding box with the trap planted; from each,
    ``walks`` walks per ``beta`` start at the base and run until they leave
    the box (budget exhaustion is censoring and shows as ``inf``).
    """
    s1, s2 = d4_scales(eps1, eps2, n)
    betas = [float(b) for b in np.atleast_1d(beta)]
    stream = as_stream(rng)
    pts, fs, fd, G = detection_set(s1, s2, eps_ret)
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    idx = tuple((pts - lo).T)
    det = np.zeros(s2, dtype=np.int64)
    seg_hits = 0
    for r in range(reps):
        lt, *_ = SK.soup_sample(G, fs, fd, pts, float(u), float(u), stream.spawn(91, r).generator(), False)
        occ = np.zeros(shape, dtype=bool)
        occ[idx] = lt > 0
        rep = detect_d4(grid_lookup(occ, lo), s1, s2)
        seg_hits += rep.segment
        if rep.segment:
            det += np.cumprod(rep.shell)
    wpts, wlo, wshape, wfs, wfd, WG = d4_window(s1, eps_ret=eps_ret)
    widx = tuple((wpts - wlo).T)
    times = {b: [] for b in betas}
    for e in range(envs):
        lt, *_ = SK.soup_sample(WG, wfs, wfd, wpts, float(u), float(u), stream.spawn(93, e).generator(), False)
        occ = np.zeros(wshape, dtype=bool)
        occ[widx] = lt > 0
        occ = plant_d4(occ, wlo, s1, s2)
        for i, b in enumerate(betas):
            t, c = d4_exit_times(occ, wlo, b, walks, stream.spawn(92, e, i), max_steps)
            times[b].append(np.where(c, np.inf, t.astype(float)))
    q = {b: _quantile_table(np.concatenate(times[b]), levels) if envs else {lv: math.nan for lv in levels}
         for b in betas}
    cf = {b: float(np.isinf(np.concatenate(times[b])).mean()) if envs else math.nan for b in betas}
    return D4Result(eps1, eps2, s1, s2, reps, seg_hits, det, q, cf, envs,
                    {"u": u, "n": n, "betas": betas, "walks": walks, "max_steps": max_steps, "eps_ret": eps_ret})
