"""Public simple-random-walk operations: hitting, escape, 1-d oracles, loop events."""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..errors import InvalidInput
from ..lattice import NEIGHBOR_OFFSETS, Region, Site, Whole, as_site, quiver_scales, trap_anchors
from ..rng import RngStream, as_stream, fsum_pairs, get_threads, run_blocks
from . import _kernels as K
from . import onedim
from .geometry import DEFAULT_EPS, build_geometry


@dataclass(frozen=True)
class TruncationRule:
    """How a transient walk is stopped.

    ``eps_ret`` is the certified bound on the probability of ever returning
    once the walk is stopped.  ``max_steps`` caps the number of moves (None
    for no cap).  With ``exact_steps`` the walk makes single lattice steps only,
    so step counts are exact; otherwise far-field moves are accelerated and
    ``steps`` counts moves.
    """

    eps_ret: float = DEFAULT_EPS
    max_steps: int | None = None
    exact_steps: bool = False

    def __post_init__(self):
        if not (0.0 < self.eps_ret <= 0.01):
            raise InvalidInput("eps_ret must lie in (0, 0.01]")
        if self.max_steps is not None and self.max_steps < 1:
            raise InvalidInput("max_steps must be positive")


@dataclass(frozen=True)
class HittingRecord:
    start: Site
    target: str
    hit: bool
    hit_site: Site | None
    steps: int
    censored: bool
    exact_steps: bool = True


@functools.lru_cache(maxsize=64)
def _geometry_cached(key: bytes, n: int, d: int, eps: float):
    pts = np.frombuffer(key, dtype=np.int64).reshape(n, d)
    return build_geometry(pts, eps=eps)


def geometry_for(points: np.ndarray, eps: float = DEFAULT_EPS):
    pts = np.ascontiguousarray(points, dtype=np.int64)
    return _geometry_cached(pts.tobytes(), pts.shape[0], pts.shape[1], float(eps))


def _region_points(A) -> np.ndarray:
    if isinstance(A, Region):
        return A.sites()
    return np.asarray(A, dtype=np.int64).reshape(-1, 3)


def run_until_hit(start, targets: Region, rng, truncation: TruncationRule | None = None) -> HittingRecord:
    """First hitting of ``targets`` at a time ``k >= 1`` by SRW from ``start``."""
    truncation = truncation or TruncationRule()
    start = as_site(start)
    gen = as_stream(rng).generator()
    if isinstance(targets, Whole):
        step = NEIGHBOR_OFFSETS[int(gen.random() * 6)]
        return HittingRecord(start, targets.descriptor(), True, start + step, 1, False)
    pts = _region_points(targets)
    G = geometry_for(pts, truncation.eps_ret)
    pos = np.empty(3, dtype=np.int64)
    cap = truncation.max_steps or (1 << 62)
    hit, moves, cens = K.hit_walk(G, np.array(start, dtype=np.int64), gen, truncation.exact_steps, cap, pos)
    desc = targets.descriptor() if isinstance(targets, Region) else "explicit"
    return HittingRecord(start, desc, bool(hit), as_site(pos) if hit else None, int(moves), bool(cens),
                         truncation.exact_steps)


def hit_probability(start, targets, rng, reps: int = 100_000, eps_ret: float = DEFAULT_EPS,
                    block_size: int = 8192) -> tuple[float, float]:
    """Monte Carlo ``P_start[T_targets < infinity]`` with certified truncation."""
    pts = _region_points(targets)
    G = geometry_for(pts, eps_ret)
    s = np.array(as_site(start), dtype=np.int64)
    res = run_blocks(lambda g, b, n: K.hit_counts(G, s, n, g), reps, as_stream(rng), block_size, tag=11)
    p = sum(res) / reps
    return p, math.sqrt(max(p * (1 - p), 1e-300) / reps)


def escape_counts(points: np.ndarray, starts: np.ndarray, reps: int, rng: RngStream,
                  eps_ret: float = DEFAULT_EPS, block_size: int = 8192, tag: int = 12) -> np.ndarray:
    """Escape counts from each row of ``starts`` (sites of ``points``), ``reps`` walks each.

    Replicas are split in blocks of ``block_size`` walks per site, each block
    keyed by its own stream, so the result is independent of the worker count.
    """
    G = geometry_for(points, eps_ret)
    starts = np.ascontiguousarray(starts, dtype=np.int64).reshape(-1, points.shape[1])
    per = max(1, block_size // max(1, len(starts)))
    sizes = [per] * (reps // per) + ([reps % per] if reps % per else [])
    streams = as_stream(rng).blocks(len(sizes), tag)

    def job(args):
        stream, n = args
        out = np.zeros(len(starts), dtype=np.int64)
        K.escape_counts(G, starts, n, stream.generator(), out)
        return out

    jobs = list(zip(streams, sizes))
    if get_threads() > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(get_threads()) as pool:
            parts = list(pool.map(job, jobs))
    else:
        parts = [job(j) for j in jobs]
    return np.sum(parts, axis=0)


def escape_probability(x, A, eps_ret: float = DEFAULT_EPS, rng=0, reps: int = 100_000) -> tuple[float, float]:
    """Monte Carlo ``P_x[T_A = infinity]`` for ``x`` in ``A``.

    The bias from truncation is at most ``eps_ret``.
    """
    if not (0.0 < eps_ret <= 0.01):
        raise InvalidInput("eps_ret must lie in (0, 0.01]")
    pts = _region_points(A)
    x = np.array(as_site(x), dtype=np.int64)
    if not (pts == x).all(axis=1).any():
        raise InvalidInput(f"{tuple(x)} is not in the set")
    c = escape_counts(pts, x[None, :], reps, as_stream(rng), eps_ret)[0]
    p = c / reps
    return float(p), math.sqrt(max(p * (1 - p), 1e-300) / reps)


# ---------------------------------------------------------------- 1-d oracles

def gamblers_ruin(a: int, rng, reps: int = 100_000) -> tuple[float, float]:
    """Monte Carlo ``P_1[T_a < T_0]`` for 1-d SRW; exact value ``1/a``."""
    if a < 2:
        raise InvalidInput("a must be >= 2")
    res = run_blocks(lambda g, b, n: onedim._ruin(a, n, g)[0], reps, as_stream(rng), 1 << 16, tag=21)
    p = sum(res) / reps
    return p, math.sqrt(p * (1 - p) / reps)


def stern_conditional_stats(a: int, rng, reps: int = 1_000_000) -> tuple[float, float, int]:
    """``E[T_a | T_a < T_0]`` from 1 by rejection, with ``reps`` accepted walks.

    Returns ``(mean, stderr, accepted)``.
    """
    if a < 2:
        raise InvalidInput("a must be >= 2")
    stream = as_stream(rng)
    wins, s1, s2, b = 0, [], [], 0
    # raw walks are drawn in fixed blocks until enough are accepted
    block = max(1 << 14, min(1 << 22, reps * a // 8))
    while wins < reps:
        w, t1, t2 = onedim._ruin(a, block, stream.spawn(22, b).generator())
        wins += w
        s1.append(t1)
        s2.append(t2)
        b += 1
    mean = fsum_pairs(s1) / wins
    var = fsum_pairs(s2) / wins - mean * mean
    return mean, math.sqrt(max(var, 0.0) / wins), wins


def stern_conditional_mean(a: int, rng, reps: int = 1_000_000) -> float:
    """Monte Carlo ``E[T_a | T_a < T_0]`` for 1-d SRW from 1; exact value ``(a^2 - 1)/3``."""
    return stern_conditional_stats(a, rng, reps)[0]


def coordinate_steps(n_steps: int, coord: int, rng) -> np.ndarray:
    """The successive +-1 moves of coordinate ``coord`` of a 3-d SRW of ``n_steps`` steps."""
    if coord not in (0, 1, 2):
        raise InvalidInput("coord must be 0, 1 or 2")
    out = np.empty(n_steps, dtype=np.int8)
    m = onedim._decimate(n_steps, coord, as_stream(rng).generator(), out)
    return out[:m]


# ---------------------------------------------------------------- loop event

def straight_segment_factor(segment: int) -> float:
    """Probability of the two forced straight runs of ``segment`` steps each."""
    return 6.0 ** (-2 * segment)


@dataclass(frozen=True)
class _Tube:
    labels: np.ndarray  # flat; 1 on the quiver shell, 0 inside
    shape: tuple
    strides: np.ndarray
    length: int
    radius: int

    def flat(self, t, a, b) -> int:
        R = self.radius
        return int(t * self.strides[0] + (a + R) * self.strides[1] + (b + R))


def _tube(M, n) -> _Tube:
    s = quiver_scales(M, n)
    L, R = s.length, s.radius
    shape = (L + 2, 2 * R + 1, 2 * R + 1)
    lab = np.ones(shape, dtype=np.uint8)
    lab[1:L + 1, 1:2 * R, 1:2 * R] = 0
    strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
    return _Tube(lab.reshape(-1), shape, strides, L, R)


def loop_excursion_exact(M, n) -> tuple[float, float]:
    """Exact ``P_{x^+e1}[T_tip < T_Q]`` and ``P_tip[S_{T_Q} = mouth]`` by Dirichlet solves.

    Coordinates are relative to the mouth; ``Q`` is the quiver shell.
    """
    tb = _tube(M, n)
    shape = tb.shape
    interior = np.flatnonzero(tb.labels == 0)
    pos = -np.ones(tb.labels.size, dtype=np.int64)
    pos[interior] = np.arange(len(interior))
    tip = tb.flat(tb.length, 0, 0)
    mouth = tb.flat(0, 0, 0)

    def solve(shell_one: int | None, pinned: int | None):
        # harmonic in the interior except at ``pinned`` (set to 1); on the
        # shell equal to 1 at ``shell_one`` and 0 elsewhere
        idx = np.arange(len(interior))
        rows, cols, vals = [idx], [idx], [np.ones(len(interior))]
        rhs = np.zeros(len(interior))
        free = np.ones(len(interior), dtype=bool)
        if pinned is not None:
            free[pos[pinned]] = False
            rhs[pos[pinned]] = 1.0
        for off in (tb.strides[0], tb.strides[1], tb.strides[2]):
            for sgn in (1, -1):
                nb = interior + sgn * off
                inside = (pos[nb] >= 0) & free
                rows.append(idx[inside])
                cols.append(pos[nb[inside]])
                vals.append(np.full(int(inside.sum()), -1.0 / 6.0))
                if shell_one is not None:
                    rhs[free & (nb == shell_one)] += 1.0 / 6.0
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(interior), len(interior)))
        return spsolve(A, rhs)

    h1 = solve(None, tip)
    p1 = float(h1[pos[tb.flat(1, 0, 0)]])
    h2 = solve(mouth, None)
    p2 = float(h2[pos[tip]])
    return p1, p2


def loop_event_exact(M, n) -> float:
    """Exact ``P_x[E_{x,M,n}]``: both straight runs times the quiver excursion."""
    s = quiver_scales(M, n)
    p1, p2 = loop_excursion_exact(M, n)
    return straight_segment_factor(s.segment) * p1 * p2 / 6.0


def _tilt_ratio(R: int) -> tuple[float, np.ndarray]:
    a = math.pi / (2 * R)
    j = np.arange(2 * R + 1) - R
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.cos(a * j)
        up = np.where(np.abs(j + 1) >= R, 0.0, np.cos(a * (j + 1))) / base
        dn = np.where(np.abs(j - 1) >= R, 0.0, np.cos(a * (j - 1))) / base
    ratio = np.nan_to_num(np.stack([up, dn], axis=1))
    # with cosh(theta) = 3 - 2 cos(a) the tilted weights are a Doob transform
    # with eigenvalue 1, so each successful path has the same likelihood ratio
    theta = math.acosh(3.0 - 2.0 * math.cos(a))
    return theta, ratio


def loop_event_probability(x, M, n, rng, reps: int = 100_000, method: str = "importance",
                           max_steps: int = 10 ** 7):
    """Monte Carlo ``P_x[E_{x,M,n}]``; returns ``(estimate, stderr)``.

    The straight runs contribute ``6^{-2 floor((3/M) ln n)}`` exactly and the
    step from the mouth into the tube ``1/6``.  The two tube excursions (mouth
    neighbour to tip avoiding the shell, tip back to the shell exactly at the
    mouth) are simulated, ``reps`` walks each.  ``method="direct"`` uses the
    plain walk; ``"importance"`` tilts towards the target with the tube's
    principal transverse eigenfunction, which keeps the estimator unbiased and
    makes events of probability 1e-30 measurable.
    """
    trap_anchors(x, M, n)  # validates the scales
    s = quiver_scales(M, n)
    tb = _tube(M, n)
    stream = as_stream(rng)
    tip = tb.flat(tb.length, 0, 0)
    mouth = tb.flat(0, 0, 0)
    start1 = tb.flat(1, 0, 0)
    if method == "importance":
        theta, ratio = _tilt_ratio(tb.radius)
        w1 = math.exp(-theta * (tb.length - 1))
        w2 = math.exp(-theta * tb.length)
        tilt = True
    elif method == "direct":
        theta, ratio, w1, w2, tilt = 0.0, np.zeros((2 * tb.radius + 1, 2)), 1.0, 1.0, False
    else:
        raise InvalidInput(f"unknown method {method!r}")
    # the first excursion is absorbed at the tip as well as on the shell
    lab1 = tb.labels.copy()
    lab1[tip] = 2

    def run(labels, start, target, th, tag):
        res = run_blocks(lambda g, b, m: onedim._tube_walk(labels, tb.strides, start, target, g, m,
                                                           th, ratio, tilt, max_steps),
                         reps, stream, 1 << 14, tag=tag)
        return sum(r[0] for r in res) / reps, sum(r[1] for r in res)

    q1, c1 = run(lab1, start1, tip, theta, 31)
    q2, c2 = run(tb.labels, tip, mouth, -theta, 32)
    p1, p2 = w1 * q1, w2 * q2
    v1 = w1 * w1 * q1 * (1 - q1) / reps
    v2 = w2 * w2 * q2 * (1 - q2) / reps
    pref = straight_segment_factor(s.segment) / 6.0
    est = pref * p1 * p2
    se = pref * math.sqrt(p2 * p2 * v1 + p1 * p1 * v2 + v1 * v2)
    return est, se
