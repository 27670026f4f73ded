"""Quenched walks with named stop regions, cone exits, and the corridor oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ExcessCensoring, InvalidInput
from ..lattice import Cone, Region, as_site
from .._parallel import parallel_map
from ..rng import as_stream
from . import _kernel as K
from .environment import Environment

REASONS = {K.STOPPED: "stopped", K.WINDOW: "window", K.BUDGET: "budget", K.ISOLATED: "isolated"}


def dyadic_checkpoints(max_steps: int) -> np.ndarray:
    """0 and the powers of two up to ``max_steps``."""
    if max_steps < 1:
        return np.zeros(1, dtype=np.int64)
    return np.r_[0, 2 ** np.arange(int(math.log2(max_steps)) + 1)].astype(np.int64)


@dataclass(eq=False)
class WalkSetup:
    """Label grid for an environment and a fixed list of named regions."""

    env: Environment
    names: tuple
    labels: np.ndarray
    stop_bits: int
    watch_bit: int

    @classmethod
    def build(cls, env: Environment, regions: dict | None = None, stop=None, watch: str | None = None):
        regions = dict(regions or {})
        if len(regions) > K.WINDOW_BIT:
            raise InvalidInput(f"at most {K.WINDOW_BIT} named regions")
        names = tuple(regions)
        labels = np.zeros(env.occ.shape, dtype=np.int64)
        if not env.periodic:
            labels[env.edge] |= np.int64(1 << K.WINDOW_BIT)
        for b, name in enumerate(names):
            pts = regions[name].sites() - env.origin
            if env.periodic:
                pts = pts % env.shape
            else:
                ok = ((pts >= 0) & (pts < env.shape)).all(axis=1)
                pts = pts[ok]
            labels[tuple(pts.T)] |= np.int64(1 << b)
        stop = names if stop is None else tuple(stop)
        unknown = set(stop) - set(names)
        if unknown:
            raise InvalidInput(f"unknown stop regions {sorted(unknown)}")
        bits = 0
        for s in stop:
            bits |= 1 << names.index(s)
        wb = -1 if watch is None else names.index(watch)
        return cls(env, names, labels, bits, wb)


@dataclass
class WalkRecord:
    """Summary of one quenched walk.

    ``hitting_times[name]`` is the first time ``k >= 1`` the walk sat in the
    named region (None if never); ``positions[i]`` is the position after
    ``checkpoints[i]`` steps (checkpoints past the end are absent).
    """

    start: tuple
    steps: int
    reason: str
    final: tuple
    hitting_times: dict
    visits: dict
    checkpoints: np.ndarray
    positions: np.ndarray
    departures: tuple = (0, 0)
    meta: dict = field(default_factory=dict)

    @property
    def censored(self) -> bool:
        return self.reason != "stopped"

    @property
    def stopped_by(self) -> str | None:
        if self.censored:
            return None
        hit = [(t, n) for n, t in self.hitting_times.items() if t == self.steps]
        return hit[0][1] if hit else None


@dataclass(eq=False)
class WalkBatch:
    """Arrays for ``reps`` walks from one start (row = replica)."""

    setup: WalkSetup
    start: tuple
    steps: np.ndarray
    code: np.ndarray
    final: np.ndarray
    first_hit: np.ndarray
    visits: np.ndarray
    departures: np.ndarray
    checkpoints: np.ndarray
    displacement: np.ndarray  # (reps, checkpoints, 3)
    end_displacement: np.ndarray

    def __len__(self):
        return len(self.steps)

    @property
    def censored(self) -> np.ndarray:
        return self.code != K.STOPPED

    def hit(self, name: str) -> np.ndarray:
        return self.first_hit[:, self.setup.names.index(name)]

    def stopped_in(self, name: str) -> np.ndarray:
        """Replicas that stopped on the named region."""
        return (self.code == K.STOPPED) & (self.hit(name) == self.steps)

    def record(self, r: int) -> WalkRecord:
        names = self.setup.names
        ht = {n: (int(self.first_hit[r, b]) if self.first_hit[r, b] >= 0 else None) for b, n in enumerate(names)}
        vs = {n: int(self.visits[r, b]) for b, n in enumerate(names)}
        ok = self.checkpoints <= self.steps[r]
        pos = self.displacement[r][ok] + np.asarray(self.start)
        fin = np.asarray(self.start) + self.end_displacement[r]
        return WalkRecord(self.start, int(self.steps[r]), REASONS[int(self.code[r])], as_site(fin), ht, vs,
                          self.checkpoints[ok], pos, tuple(int(v) for v in self.departures[r]))

    def records(self) -> list[WalkRecord]:
        return [self.record(r) for r in range(len(self))]


def run_walks(env: Environment, start, reps: int, rng, regions: dict | None = None, stop=None,
              max_steps: int = 10_000_000, watch: str | None = None, checkpoints=None,
              setup: WalkSetup | None = None, block: int = 1024, threads: int = 1) -> WalkBatch:
    """``reps`` independent quenched walks from ``start``.

    Replicas are split into blocks of ``block`` walks, each driven by its own
    child stream, so the output depends only on ``rng`` and ``reps`` (not on
    ``threads``, which runs blocks concurrently).
    """
    setup = setup or WalkSetup.build(env, regions, stop, watch)
    start = as_site(start)
    if not env.occupied(start):
        raise InvalidInput(f"start {start} is not occupied")
    cell = np.array(env.cell(start), dtype=np.int64)
    ck = dyadic_checkpoints(max_steps) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    nb = K.N_BITS
    steps = np.zeros(reps, dtype=np.int64)
    code = np.zeros(reps, dtype=np.int64)
    final = np.zeros((reps, 3), dtype=np.int64)
    first = np.full((reps, nb), -1, dtype=np.int64)
    visits = np.zeros((reps, nb), dtype=np.int64)
    dep = np.zeros((reps, 2), dtype=np.int64)
    disp = np.zeros((reps, len(ck), 3), dtype=np.int64)
    end = np.zeros((reps, 3), dtype=np.int64)
    stream = as_stream(rng)
    shape = env.shape

    def job(b):
        lo, hi = b * block, min(reps, (b + 1) * block)
        K.walk_batch(env.occ, setup.labels, shape, env.periodic, float(env.beta), cell, np.int64(setup.stop_bits),
                     np.int64(setup.watch_bit), np.int64(max_steps), stream.spawn(61, b).generator(), hi - lo, ck,
                     steps[lo:hi], code[lo:hi], final[lo:hi], first[lo:hi], visits[lo:hi], dep[lo:hi],
                     disp[lo:hi], end[lo:hi])

    parallel_map(job, range((reps + block - 1) // block), threads)
    n = len(setup.names)
    return WalkBatch(setup, start, steps, code, final, first[:, :n], visits[:, :n], dep, ck, disp, end)


def run_walk(env: Environment, start, rng, regions: dict | None = None, stop=None,
             max_steps: int = 10_000_000, watch: str | None = None) -> WalkRecord:
    """One quenched walk until a stop region, the window edge, or the step budget."""
    return run_walks(env, start, 1, rng, regions, stop, max_steps, watch).record(0)


# ---------------------------------------------------------------- oracles

def corridor_exit_time(length: int, beta: float) -> float:
    """Mean time to reach ``length e1`` from 0 on the corridor ``{0, ..., length} e1``.

    Solves the tridiagonal hitting-time system of the birth-death chain that
    steps right with ``beta / (beta + 1)`` inside and is reflected at 0.
    """
    if length < 1:
        raise InvalidInput("length must be >= 1")
    from scipy.linalg import solve_banded

    p = beta / (beta + 1.0)
    n = length  # unknowns h(0..length-1), h(length) = 0
    ab = np.zeros((3, n))
    rhs = np.ones(n)
    ab[1, :] = 1.0
    if n > 1:
        ab[0, 1] = -1.0  # h0 - h1 = 1
    for i in range(1, n):
        ab[2, i - 1] = -(1 - p)
        if i + 1 < n:
            ab[0, i + 1] = -p
    return float(solve_banded((1, 1), ab, rhs)[0])


# ---------------------------------------------------------------- cones

@dataclass
class ConeExitResult:
    p_minus: float
    stderr: float
    p_plus: float
    p_censored: float
    reps: int
    counts: dict
    outcomes: list = field(default_factory=list)  # per replica: (outcome, steps)


def cone_regions(M, n: int, clip: int | None = None) -> dict:
    """Negative face, positive boundary and (if clipped) the artificial side walls of the cone."""
    cone = Cone(M, n, clip)
    bd = cone.boundary()
    from ..lattice import Explicit

    neg = bd[:, 0] == -n
    out = {"minus": Explicit(bd[neg], name="minus")}
    rest = bd[~neg]
    if clip is not None:
        true_w = Cone(M, n).width(rest[:, 0])
        wall = (np.abs(rest[:, 1:]).max(axis=1) == clip) & (true_w > clip)
        if wall.any():
            out["clip"] = Explicit(rest[wall], name="clip")
        rest = rest[~wall]
    out["plus"] = Explicit(rest, name="plus")
    return out


def cone_exit_replica(M, n: int, u: float, beta: float, rng, r: int, clip: int | None = None,
                      max_steps: int = 10_000_000, regions: dict | None = None) -> tuple[str, int]:
    """One averaged-law replica: ``("minus" | "plus" | "censored", steps)``.

    The environment is an interlacement sample on the (optionally clipped)
    cone conditioned on the origin being occupied; replica ``r`` uses child
    streams of ``rng`` only, so replicas can run in any order.
    """
    from ..interlace import sample_interlacement
    from .environment import build_environment

    stream = as_stream(rng)
    regions = regions or cone_regions(M, n, clip)
    smp = sample_interlacement(Cone(M, n, clip), u, stream.spawn(62, r), condition_on=(0, 0, 0), record=False)
    env = build_environment(smp, beta)
    b = run_walks(env, (0, 0, 0), 1, stream.spawn(63, r), regions, max_steps=max_steps,
                  checkpoints=np.zeros(0, dtype=np.int64))
    if b.stopped_in("minus")[0]:
        return "minus", int(b.steps[0])
    if b.stopped_in("plus")[0]:
        return "plus", int(b.steps[0])
    return "censored", int(b.steps[0])


def summarize_cone_exits(outcomes: list, max_censored: float | None = None) -> ConeExitResult:
    reps = len(outcomes)
    counts = {k: sum(o[0] == k for o in outcomes) for k in ("minus", "plus", "censored")}
    pm = counts["minus"] / reps
    pc = counts["censored"] / reps
    if max_censored is not None and pc > max_censored:
        raise ExcessCensoring(f"censored fraction {pc:.4f} exceeds {max_censored}")
    return ConeExitResult(pm, math.sqrt(max(pm * (1 - pm), 0.0) / reps), counts["plus"] / reps, pc, reps, counts,
                          list(outcomes))


def cone_exit_experiment(M, n: int, u: float, beta: float, rng, reps: int = 1000, clip: int | None = None,
                         max_steps: int = 10_000_000, max_censored: float | None = None) -> ConeExitResult:
    """``P[T_{d-C} < T_{d+C}]`` under the averaged law, with a fresh environment per replica.

    Exits through the clip walls and budget exhaustion count as censored.
    """
    regions = cone_regions(M, n, clip)
    out = [cone_exit_replica(M, n, u, beta, rng, r, clip, max_steps, regions) for r in range(reps)]
    return summarize_cone_exits(out, max_censored)
