"""Trap detection, planting, escape checks and sojourn measurements (d = 3)."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationTooRare, InvalidInput, WindowTooSmall
from ..lattice import NEIGHBOR_OFFSETS, Cylinder, Explicit, Region, TrapAnchors, as_site, trap_anchors
from ..network import escape_probability_formula
from ..rng import as_stream
from .environment import Environment, build_environment, environment_from_sites
from .walks import run_walks


class _Occupancy:
    """Uniform occupancy lookup over samples and environments."""

    def __init__(self, obj):
        if isinstance(obj, Environment):
            self.window = obj.window
            self._f = obj.occupied
        else:  # an interlacement sample
            self.window = obj.window
            lo, m = obj.occupancy_mask()
            self._lo, self._m = lo, m
            self._f = self._from_mask

    def _from_mask(self, s):
        g = np.asarray(s, dtype=np.int64) - self._lo
        if (g < 0).any() or (g >= self._m.shape).any():
            return False
        return bool(self._m[tuple(g)])

    def __call__(self, s) -> bool:
        return self._f(s)

    def many(self, pts) -> np.ndarray:
        return np.array([self._f(p) for p in np.asarray(pts).tolist()], dtype=bool)


@dataclass
class TrapReport:
    anchors: TrapAnchors
    t1: bool  # the quiver meets the occupied set only at the mouth
    t2: bool  # the segment from the base to the mouth is occupied
    t3: bool  # the tip is occupied
    sealed: bool  # the tip's component (mouth removed) inside the cylinder avoids the shell
    connected: bool  # the tip reaches the mouth through occupied interior sites
    quiver_occupied: int
    mouth_transversal: int
    component_size: int

    @property
    def is_trap(self) -> bool:
        return self.t1 and self.t2 and self.t3


def _tip_component(occ: _Occupancy, anchors: TrapAnchors) -> tuple[set, bool, bool]:
    """BFS from the tip through occupied cylinder sites other than the mouth.

    Returns (component, touches the shell, adjacent to the mouth).
    """
    q = anchors.quiver
    cyl = q.cylinder()
    mouth = anchors.mouth
    tip = anchors.tip
    if not occ(tip):
        return set(), False, False
    seen = {tip}
    dq = deque([tip])
    touches = False
    reaches = False
    while dq:
        p = dq.popleft()
        for off in NEIGHBOR_OFFSETS.tolist():
            nb = as_site((p[0] + off[0], p[1] + off[1], p[2] + off[2]))
            if nb == mouth:
                reaches = True
                continue
            if nb in seen or not cyl.contains(nb) or not occ(nb):
                continue
            if q.contains(nb):
                touches = True
                continue
            seen.add(nb)
            dq.append(nb)
    return seen, touches, reaches


def detect_trap(obj, x, M, n: float) -> TrapReport:
    """Evaluate the three trap conditions at base ``x`` in a sample or environment."""
    anchors = trap_anchors(x, M, n)
    occ = _Occupancy(obj)
    q = anchors.quiver
    shell = q.sites()
    if occ.window is not None:
        need = np.concatenate([q.cylinder().sites(), np.array(anchors.segment, dtype=np.int64)])
        if not occ.window.contains_many(need).all():
            raise WindowTooSmall("quiver cylinder and segment must lie inside the window")
    mouth = np.array(anchors.mouth)
    on = occ.many(shell)
    is_mouth = (shell == mouth).all(axis=1)
    extra = int((on & ~is_mouth).sum())
    t1 = extra == 0
    t2 = bool(occ.many(np.array(anchors.segment)).all())
    t3 = occ(anchors.tip)
    comp, touches, reaches = _tip_component(occ, anchors)
    trans = sum(occ(as_site(mouth + d)) for d in NEIGHBOR_OFFSETS[2:])
    return TrapReport(anchors, t1, t2, bool(t3), t3 and not touches, reaches, extra, int(trans), len(comp))


def find_trap(obj, M, n: float, candidates, exhaustive: bool = False):
    """Scan candidate bases in lexicographic order; first trap (or all with ``exhaustive``)."""
    pts = np.asarray(candidates, dtype=np.int64)
    order = np.lexsort(pts.T[::-1])
    found = []
    for x in pts[order].tolist():
        try:
            rep = detect_trap(obj, x, M, n)
        except WindowTooSmall:
            continue
        if rep.is_trap:
            if not exhaustive:
                return rep
            found.append(rep)
    return found if exhaustive else None


def trap_window(anchors: TrapAnchors, margin: int = 2) -> Cylinder:
    """Cylinder containing the segment and the quiver cylinder with ``margin`` spare layers."""
    s = anchors.quiver.scales
    b = anchors.base
    return Cylinder((b[0] - margin, b[1], b[2]), 0, s.segment + s.length + 1 + 2 * margin, s.radius + margin)


def plant_trap(env: Environment, x, M, n: float, surround_segment: bool = False) -> tuple[Environment, TrapAnchors]:
    """Force the trap conditions at ``x``.

    Vacates the quiver except its mouth, occupies the segment and the axis
    from mouth to tip.  With ``surround_segment`` every site the walk leaves
    on a straight descent (base up to the site before the mouth) gets all
    six neighbours occupied.
    """
    a = trap_anchors(x, M, n)
    q = a.quiver
    shell = [as_site(p) for p in q.sites().tolist() if as_site(p) != a.mouth]
    axis = [as_site((a.mouth[0] + j, a.mouth[1], a.mouth[2])) for j in range(q.scales.length + 1)]
    occ = list(a.segment) + axis
    if surround_segment:
        for s in a.segment[:-1]:
            occ += [as_site(np.add(s, d)) for d in NEIGHBOR_OFFSETS]
    return env.with_sites(occupied=occ, vacant=shell), a


def trap_network_sites(env: Environment, anchors: TrapAnchors) -> np.ndarray:
    """Mouth plus the tip's occupied component inside the quiver."""
    comp, _, _ = _tip_component(_Occupancy(env), anchors)
    return np.array(sorted(comp | {anchors.mouth}), dtype=np.int64)


@dataclass
class EscapeCheck:
    formula: float
    estimate: float
    stderr: float
    z: float
    reps: int


def trap_escape_check(env: Environment, anchors: TrapAnchors, rng, reps: int = 100_000) -> EscapeCheck:
    """``P_mouth[T_tip < T_mouth]`` on the trap network: electrical formula against simulation."""
    sites = trap_network_sites(env, anchors)
    sub = environment_from_sites(sites, env.beta)
    g = sub.graph()
    f = escape_probability_formula(g, anchors.mouth, anchors.tip)
    regions = {"tip": Explicit([anchors.tip]), "mouth": Explicit([anchors.mouth])}
    b = run_walks(sub, anchors.mouth, reps, rng, regions, checkpoints=np.zeros(0, dtype=np.int64))
    p = float(b.stopped_in("tip").mean())
    se = math.sqrt(max(p * (1 - p), 1e-300) / reps)
    return EscapeCheck(f, p, se, (p - f) / se if se > 0 else 0.0, reps)


@dataclass
class SojournTable:
    beta: float
    quantiles: dict  # level -> exit time (inf where censoring makes it undefined)
    censored_fraction: float
    p_tip: float  # reach the tip before leaving the window
    p_descent: float  # first ``segment`` steps all go to +e1
    descent_prediction: float  # (beta / (beta + 5))^segment
    descent_stderr: float
    mouth_forward: float  # fraction of mouth departures to +e1
    mouth_departures: int
    geometric_p: np.ndarray  # per environment: fitted parameter of the returns to the tip before the mouth
    geometric_stderr: np.ndarray
    geometric_prediction: np.ndarray  # per environment: C(mouth <-> tip) / pi(tip)
    return_counts: np.ndarray  # pooled histogram
    walks: int
    meta: dict = field(default_factory=dict)

    @property
    def geometric_z(self) -> np.ndarray:
        return (self.geometric_p - self.geometric_prediction) / self.geometric_stderr


def _geometric_fit(returns: np.ndarray) -> tuple[float, float]:
    # returns before absorption are geometric on {0, 1, ...}; MLE and its delta-method error
    k = len(returns)
    if k == 0:
        return float("nan"), float("nan")
    p = k / (k + float(returns.sum()))
    return p, p * math.sqrt((1 - p) / k)


def _quantiles(times: np.ndarray, censored: np.ndarray, levels) -> dict:
    t = np.where(censored, np.inf, times.astype(float))
    t.sort()
    out = {}
    for q in levels:
        k = min(len(t) - 1, int(math.ceil(q * len(t))) - 1)
        out[q] = float(t[max(k, 0)])
    return out


def trap_sojourn_experiment(M, n: float, u: float, beta: float, rng, reps: int = 20, walks: int = 200,
                            max_steps: int = 10_000_000, margin: int = 3, surround_segment: bool = True,
                            levels=(0.1, 0.5, 0.9)) -> SojournTable:
    """Sojourn of the walk started at a trap base.

    For each of ``reps`` environments: sample the interlacement on a window
    around the trap, plant and re-detect the trap, then run ``walks`` walks
    from the base until they leave the window (budget exhaustion is
    censoring), plus ``walks`` walks from the tip until they reach the mouth
    to record the number of returns to the tip.
    """
    from ..interlace import sample_interlacement

    stream = as_stream(rng)
    a0 = trap_anchors((0, 0, 0), M, n)
    window = trap_window(a0, margin)
    seg = a0.quiver.scales.segment
    times, cens, tip_hit, descent, returns = [], [], [], [], []
    fwd = dep = 0
    preds, fits = [], []
    for r in range(reps):
        smp = sample_interlacement(window, u, stream.spawn(81, r), record=False)
        env, a = plant_trap(build_environment(smp, beta), (0, 0, 0), M, n, surround_segment)
        if not detect_trap(env, a.base, M, n).is_trap:
            raise ConfigurationTooRare("planted trap was not detected")
        regions = {"tip": Explicit([a.tip]), "mouth": Explicit([a.mouth])}
        b = run_walks(env, a.base, walks, stream.spawn(82, r), regions, stop=(), max_steps=max_steps,
                      watch="mouth", checkpoints=np.zeros(0, dtype=np.int64))
        times.append(b.steps)
        cens.append(b.code != 2)  # anything but a window exit is censoring here
        tip_hit.append(b.hit("tip") >= 0)
        descent.append(b.hit("mouth") == seg)
        fwd += int(b.departures[:, 1].sum())
        dep += int(b.departures[:, 0].sum())
        c = run_walks(env, a.tip, walks, stream.spawn(83, r), regions, stop=("mouth",), max_steps=max_steps,
                      checkpoints=np.zeros(0, dtype=np.int64))
        ok = c.stopped_in("mouth")
        returns.append(c.visits[ok, 0])
        fits.append(_geometric_fit(c.visits[ok, 0]))
        g = env.graph(Explicit(trap_network_sites(env, a)))
        preds.append(escape_probability_formula(g, a.tip, a.mouth))
    times = np.concatenate(times)
    cens = np.concatenate(cens)
    tip_hit = np.concatenate(tip_hit)
    descent = np.concatenate(descent)
    returns = np.concatenate(returns)
    N = len(times)
    pd = float(descent.mean())
    fits = np.array(fits, dtype=float).reshape(-1, 2)
    return SojournTable(
        beta=beta,
        quantiles=_quantiles(times, cens, levels),
        censored_fraction=float(cens.mean()),
        p_tip=float(tip_hit.mean()),
        p_descent=pd,
        descent_prediction=(beta / (beta + 5)) ** seg,
        descent_stderr=math.sqrt(max(pd * (1 - pd), 1e-300) / N),
        mouth_forward=fwd / dep if dep else float("nan"),
        mouth_departures=dep,
        geometric_p=fits[:, 0],
        geometric_stderr=fits[:, 1],
        geometric_prediction=np.array(preds),
        return_counts=np.bincount(returns.astype(np.int64)) if len(returns) else np.zeros(0, dtype=np.int64),
        walks=N,
        meta={"M": str(M), "n": n, "u": u, "reps": reps, "segment": seg},
    )


# ---------------------------------------------------------------- hand-built traps

def hand_built_trap(M, n: float, beta: float, branches: bool = True) -> tuple[Environment, TrapAnchors]:
    """Isolated trap: a fully surrounded segment, the mouth, and an axis to the tip.

    Every segment site below the mouth, and the site behind the base, has all
    six neighbours occupied, so each step of a straight descent has
    probability ``beta / (beta + 5)``.  With ``branches`` a few dead-end side
    arms hang off the axis inside the quiver.
    """
    a = trap_anchors((0, 0, 0), M, n)
    s = a.quiver.scales
    sites = set(a.segment)
    for p in a.segment[:-1]:
        sites |= {as_site(np.add(p, d)) for d in NEIGHBOR_OFFSETS}
    sites |= {as_site((a.mouth[0] + j, 0, 0)) for j in range(s.length + 1)}
    if branches and s.radius >= 3:
        for j in range(2, s.length, max(2, s.length // 4)):
            for k in range(1, s.radius - 1):
                sites.add(as_site((a.mouth[0] + j, k, 0)))
    env = environment_from_sites(sorted(sites), beta, window=trap_window(a, margin=2))
    return env, a


@dataclass
class FrequencyCheck:
    estimate: float
    prediction: float
    stderr: float
    z: float
    trials: int


def _freq(hits: int, trials: int, pred: float) -> FrequencyCheck:
    p = hits / trials
    # binomial standard error under the prediction (defined even when p hits 0 or 1)
    se = math.sqrt(pred * (1 - pred) / trials)
    return FrequencyCheck(p, pred, se, (p - pred) / se if se > 0 else 0.0, trials)


def straight_descent_check(env: Environment, anchors: TrapAnchors, rng, reps: int = 100_000) -> FrequencyCheck:
    """Frequency of ``segment`` consecutive ``+e1`` steps from the base against ``(beta/(beta+5))^segment``."""
    seg = anchors.quiver.scales.segment
    regions = {"mouth": Explicit([anchors.mouth])}
    b = run_walks(env, anchors.base, reps, rng, regions, max_steps=seg, checkpoints=np.zeros(0, dtype=np.int64))
    hits = int(b.stopped_in("mouth").sum())
    return _freq(hits, reps, (env.beta / (env.beta + 5)) ** seg)


def mouth_jump_check(env: Environment, anchors: TrapAnchors, rng, reps: int = 2000,
                     max_steps: int = 20_000) -> FrequencyCheck:
    """Fraction of departures from the mouth that go to ``+e1``, against ``beta/(beta+1)``.

    Departures are pooled over walks from the base; by the strong Markov
    property each one is an independent draw of the mouth's step law.
    """
    regions = {"mouth": Explicit([anchors.mouth])}
    b = run_walks(env, anchors.base, reps, rng, regions, stop=(), watch="mouth", max_steps=max_steps,
                  checkpoints=np.zeros(0, dtype=np.int64))
    tot = int(b.departures[:, 0].sum())
    if tot == 0:
        raise ConfigurationTooRare("no departures from the mouth were observed")
    return _freq(int(b.departures[:, 1].sum()), tot, env.beta / (env.beta + 1))
