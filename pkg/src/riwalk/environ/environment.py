"""Conductance environments ``c(x, y) = beta^{max(x.e1, y.e1)}`` on occupied sites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import InvalidBias, InvalidInput, IsolatedSite
from ..lattice import NEIGHBOR_OFFSETS, Explicit, Region, adjacent, as_site
from ..network import WeightedGraph
from ..rng import as_stream
from . import _kernel as K

# neighbour order used by the walk kernel: +e1, -e1, +e2, -e2, +e3, -e3
STEP_ORDER = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64)


@dataclass(eq=False)
class Environment:
    """Occupancy grid plus bias.

    ``occ[g]`` is 1 for occupied cells; site ``x`` lives in cell
    ``x - origin``.  Non-periodic grids carry a vacant border layer and
    ``edge`` marks the window's inner boundary, where walks are censored.
    Periodic grids wrap in every axis (a torus environment).
    """

    beta: float
    origin: np.ndarray
    occ: np.ndarray
    edge: np.ndarray
    periodic: bool = False
    window: Region | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.beta > 1:
            raise InvalidBias(f"beta must be > 1, got {self.beta}")
        self.occ = np.ascontiguousarray(self.occ, dtype=np.uint8)
        self.origin = np.asarray(self.origin, dtype=np.int64)

    @property
    def log_beta(self) -> float:
        return math.log(self.beta)

    @property
    def shape(self) -> np.ndarray:
        return np.array(self.occ.shape, dtype=np.int64)

    def cell(self, x) -> tuple | None:
        g = np.asarray(x, dtype=np.int64) - self.origin
        if self.periodic:
            return tuple(int(v) for v in g % self.shape)
        if (g < 0).any() or (g >= self.shape).any():
            return None
        return tuple(int(v) for v in g)

    def occupied(self, x) -> bool:
        c = self.cell(x)
        return c is not None and bool(self.occ[c])

    def occupied_sites(self) -> np.ndarray:
        return np.argwhere(self.occ > 0) + self.origin

    def conductance_exponent(self, x, y) -> int | None:
        """``max(x.e1, y.e1)`` for an open edge, else None."""
        x, y = as_site(x), as_site(y)
        if not adjacent(x, y) or not (self.occupied(x) and self.occupied(y)):
            return None
        return max(x[0], y[0])

    def log_conductance(self, x, y) -> float:
        e = self.conductance_exponent(x, y)
        return -math.inf if e is None else e * self.log_beta

    def step_weights(self, x) -> np.ndarray:
        """Weights of the six moves in ``STEP_ORDER`` with ``beta^{x.e1}`` factored out."""
        x = np.asarray(as_site(x), dtype=np.int64)
        w = np.array([1.0 if self.occupied(x + d) else 0.0 for d in STEP_ORDER])
        w[0] *= self.beta
        return w

    def transition_probabilities(self, x) -> dict:
        """``q(x, y) = c(x, y) / pi(x)`` for the occupied neighbours ``y``."""
        w = self.step_weights(x)
        tot = w.sum()
        if tot == 0:
            raise IsolatedSite(f"{as_site(x)} has no occupied neighbour")
        x = np.asarray(as_site(x), dtype=np.int64)
        return {as_site(x + d): float(v / tot) for d, v in zip(STEP_ORDER, w) if v > 0}

    def log_pi(self, x) -> float:
        s = self.step_weights(x).sum()
        return -math.inf if s == 0 else as_site(x)[0] * self.log_beta + math.log(s)

    def exact_pi(self, x) -> Fraction:
        b = Fraction(self.beta)
        x = as_site(x)
        return sum((b ** e for y in self._nbrs(x) if (e := self.conductance_exponent(x, y)) is not None),
                   Fraction(0))

    def exact_q(self, x, y) -> Fraction:
        """``q(x, y)`` in the ratio form used by the walk, as an exact fraction."""
        b = Fraction(self.beta)
        x, y = as_site(x), as_site(y)
        w = [(b if i == 0 else Fraction(1)) if self.occupied(np.add(x, d)) else Fraction(0)
             for i, d in enumerate(STEP_ORDER)]
        tot = sum(w)
        if tot == 0:
            raise IsolatedSite(f"{x} has no occupied neighbour")
        d = tuple(np.subtract(y, x).tolist())
        for i, s in enumerate(STEP_ORDER.tolist()):
            if tuple(s) == d:
                return w[i] / tot
        return Fraction(0)

    @staticmethod
    def _nbrs(x):
        return [as_site(np.add(x, d)) for d in NEIGHBOR_OFFSETS]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """All open edges as pairs of site arrays (each edge once)."""
        a, b = [], []
        occ = self.occ.astype(bool)
        for ax in range(3):
            if self.periodic:
                m = occ & np.roll(occ, -1, axis=ax)
            else:
                sl = [slice(None)] * 3
                sl[ax] = slice(0, -1)
                sh = [slice(None)] * 3
                sh[ax] = slice(1, None)
                m = np.zeros_like(occ)
                m[tuple(sl)] = occ[tuple(sl)] & occ[tuple(sh)]
            g = np.argwhere(m)
            h = g.copy()
            h[:, ax] += 1
            a.append(g + self.origin)
            b.append(h + self.origin)
        return np.concatenate(a), np.concatenate(b)

    def graph(self, region: Region | None = None, source=(), sink=()) -> WeightedGraph:
        """Weighted graph of open edges with both ends in ``region`` (default: all)."""
        if self.periodic:
            raise InvalidInput("graphs of periodic environments are not supported")
        a, b = self.edges()
        if region is not None:
            keep = region.contains_many(a) & region.contains_many(b)
            a, b = a[keep], b[keep]
        lw = np.maximum(a[:, 0], b[:, 0]) * self.log_beta
        edges = [(tuple(x), tuple(y), w) for x, y, w in zip(a.tolist(), b.tolist(), lw.tolist())]
        return WeightedGraph.from_edges(edges, [as_site(s) for s in source], [as_site(s) for s in sink])

    def with_sites(self, occupied=(), vacant=()) -> "Environment":
        """Copy with some sites forced occupied or vacant (used to plant traps)."""
        occ = self.occ.copy()
        for val, sites in ((1, occupied), (0, vacant)):
            for s in sites:
                c = self.cell(s)
                if c is None:
                    raise InvalidInput(f"{as_site(s)} is outside the environment grid")
                occ[c] = val
        return Environment(self.beta, self.origin, occ, self.edge, self.periodic, self.window, dict(self.meta))

    def with_beta(self, beta: float) -> "Environment":
        return Environment(beta, self.origin, self.occ, self.edge, self.periodic, self.window, dict(self.meta))


def _grid_from_window(lo: np.ndarray, win_mask: np.ndarray, occ_mask: np.ndarray):
    """Pad by one vacant layer and mark the window's inner boundary."""
    shape = np.array(win_mask.shape) + 2
    occ = np.zeros(shape, dtype=np.uint8)
    occ[1:-1, 1:-1, 1:-1] = occ_mask & win_mask
    inw = np.zeros(shape, dtype=bool)
    inw[1:-1, 1:-1, 1:-1] = win_mask
    interior = inw.copy()
    for ax in range(3):
        for s in (1, -1):
            interior &= np.roll(inw, s, axis=ax)
    return lo - 1, occ, inw & ~interior


def build_environment(sample, beta: float) -> Environment:
    """Environment on the occupied sites of an interlacement sample."""
    if not beta > 1:
        raise InvalidBias(f"beta must be > 1, got {beta}")
    from ..interlace import window_data

    wd = window_data(sample.window, sample.meta.get("eps_ret", 1e-4))
    _, occm = sample.occupancy_mask()
    origin, occ, edge = _grid_from_window(wd.lo, wd.mask, occm)
    meta = {"u": sample.u, "seed": sample.seed, "stream": sample.stream_index,
            "window": sample.window.descriptor()}
    return Environment(beta, origin, occ, edge, False, sample.window, meta)


def environment_from_sites(sites, beta: float, window: Region | None = None) -> Environment:
    """Hand-built environment; by default the window is the occupied set's bounding box plus one layer."""
    pts = np.asarray([as_site(s) for s in sites], dtype=np.int64).reshape(-1, 3)
    if window is None:
        lo = pts.min(axis=0) - 1
        hi = pts.max(axis=0) + 1
        mask = np.ones(tuple(hi - lo + 1), dtype=bool)
    else:
        wpts = window.sites()
        lo = wpts.min(axis=0)
        mask = np.zeros(tuple(wpts.max(axis=0) - lo + 1), dtype=bool)
        mask[tuple((wpts - lo).T)] = True
    occm = np.zeros(mask.shape, dtype=bool)
    rel = pts - lo
    if (rel < 0).any() or (rel >= mask.shape).any():
        raise InvalidInput("occupied sites must lie inside the window")
    occm[tuple(rel.T)] = True
    origin, occ, edge = _grid_from_window(lo, mask, occm)
    return Environment(beta, origin, occ, edge, False, window or Explicit(pts, name="hand"))


def torus_environment(shape, u: float, beta: float, rng) -> Environment:
    """Trace of a simple random walk run for ``u |T|`` steps on the torus ``T``.

    Locally this converges to the interlacement set at level ``u`` as the
    torus grows; it serves as a periodic stand-in when the walk must run
    far beyond any window that could be sampled exactly.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 3:
        raise InvalidInput("torus needs three sides >= 3")
    occ = np.zeros(shape, dtype=np.uint8)
    n = int(np.prod(shape))
    K.torus_trace(shape[0], shape[1], shape[2], int(round(u * n)), as_stream(rng).generator(), occ)
    return Environment(beta, np.zeros(3, dtype=np.int64), occ, np.zeros(shape, dtype=bool), True, None,
                       {"u": u, "torus": shape})


def quenched_step(env: Environment, x, rng) -> tuple:
    """One step of the walk from ``x``."""
    w = env.step_weights(x)
    tot = w.sum()
    if tot == 0:
        raise IsolatedSite(f"{as_site(x)} has no occupied neighbour")
    gen = rng if isinstance(rng, np.random.Generator) else as_stream(rng).generator()
    r = int(np.searchsorted(np.cumsum(w), gen.random() * tot, side="right"))
    r = min(r, 5)
    while w[r] == 0:
        r -= 1
    return as_site(np.add(as_site(x), STEP_ORDER[r]))


def check_detailed_balance(env: Environment, exact: bool = True, region: Region | None = None) -> tuple[bool, int]:
    """Verify ``pi(x) q(x, y) = pi(y) q(y, x)`` on every open edge.

    With ``exact`` the check uses rational arithmetic; otherwise log-space
    floats with a relative tolerance of 1e-12.  Returns (all equal, number of
    edges checked).
    """
    a, b = env.edges()
    if region is not None:
        keep = region.contains_many(a) & region.contains_many(b)
        a, b = a[keep], b[keep]
    ok = True
    bf = Fraction(env.beta)
    for x, y in zip(map(as_site, a.tolist()), map(as_site, b.tolist())):
        if exact:
            # pi(x) = beta^{x.e1} W(x) with W the factored weight sum
            px = bf ** x[0] * sum(_exact_weights(env, x, bf))
            py = bf ** y[0] * sum(_exact_weights(env, y, bf))
            if px * env.exact_q(x, y) != py * env.exact_q(y, x):
                ok = False
        else:
            lx = env.log_pi(x) + math.log(env.transition_probabilities(x)[y])
            ly = env.log_pi(y) + math.log(env.transition_probabilities(y)[x])
            if abs(lx - ly) > 1e-12 * max(1.0, abs(lx)):
                ok = False
    return ok, len(a)


def _exact_weights(env, x, bf):
    return [(bf if i == 0 else Fraction(1)) if env.occupied(np.add(x, d)) else Fraction(0)
            for i, d in enumerate(STEP_ORDER)]
