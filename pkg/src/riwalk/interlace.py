"""Random interlacements at level u restricted to a finite window.

The sampler uses Poisson thinning over the outward faces of the window.  A
face ``(x, y)`` (``x`` in the window, ``y`` outside and adjacent) is tried at
rate ``u / (2d)``; the trial succeeds when the walk from ``y`` never hits the
window.  Successful trials at ``x`` form a Poisson process of rate
``u e_W(x)``, which is exactly the law of first-entrance points of the
interlacement trajectories meeting the window, and the trial walk is the
time-reversed past of the trajectory.  Each success then launches a forward
walk whose window visits are recorded.  No capacity estimate is needed.
"""

from __future__ import annotations

import functools
import io
import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationTooRare, InvalidInput, WindowExhausted
from .lattice import Box, Cylinder, Explicit, Region, adjacent, as_site, lexsort_sites, region_from_params
from .potential import HarmonicProfile, _signed_permutations, capacity_estimate, exact_capacity
from .rng import as_stream
from .srw import _kernels as K
from .srw.geometry import DEFAULT_EPS, outward_faces
from .srw.walks import geometry_for

SAMPLE_MAGIC = b"RIWALK-SAMPLE v1\n"


@dataclass(frozen=True, eq=False)
class WindowData:
    region: Region
    points: np.ndarray  # lexicographic order; local times are indexed alike
    lo: np.ndarray
    mask: np.ndarray
    face_site: np.ndarray
    face_dir: np.ndarray
    on_boundary: np.ndarray
    G: tuple

    def index_of(self, site) -> int:
        s = np.asarray(site, dtype=np.int64) - self.lo
        if (s < 0).any() or (s >= self.mask.shape).any() or not self.mask[tuple(s)]:
            return -1
        return int(self.G.index[int(((np.asarray(site) - self.G.alo) * self.G.astrides).sum())])


@functools.lru_cache(maxsize=16)
def window_data(region: Region, eps_ret: float = DEFAULT_EPS) -> WindowData:
    pts = lexsort_sites(region.sites())
    if len(pts) == 0:
        raise InvalidInput("window is empty")
    lo = pts.min(axis=0)
    mask = np.zeros(tuple(pts.max(axis=0) - lo + 1), dtype=bool)
    mask[tuple((pts - lo).T)] = True
    fs, fd = outward_faces(pts, lo, mask)
    G = geometry_for(pts, eps_ret)
    on_b = np.zeros(len(pts), dtype=bool)
    on_b[fs] = True
    return WindowData(region, pts, lo, mask, fs, fd, on_b, G)


@dataclass
class InterlacementSample:
    """Trace of the interlacement at level ``u`` on a window.

    ``local_time[i]`` counts visits to ``window_sites[i]``.  Trajectory ``j``
    enters the window at ``window_sites[starts[j]]`` and its successive
    window visits are ``trace[offsets[j]:offsets[j+1]]`` (site indices).
    """

    window: Region
    u: float
    window_sites: np.ndarray
    local_time: np.ndarray
    starts: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    trace: np.ndarray
    seed: int | None = None
    stream_index: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def trajectory_count(self) -> int:
        return len(self.starts)

    @property
    def occupied(self) -> np.ndarray:
        return self.local_time > 0

    @property
    def occupancy(self) -> np.ndarray:
        return self.window_sites[self.occupied]

    @property
    def traces(self) -> list[np.ndarray]:
        return [self.window_sites[self.trace[a:b]] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def local_time_map(self) -> dict:
        nz = np.flatnonzero(self.local_time)
        return {as_site(self.window_sites[i]): int(self.local_time[i]) for i in nz}

    def occupancy_mask(self) -> tuple[np.ndarray, np.ndarray]:
        """Occupancy as a boolean array over the window's bounding box, and its lower corner."""
        wd = window_data(self.window, self.meta.get("eps_ret", DEFAULT_EPS))
        m = np.zeros(wd.mask.shape, dtype=bool)
        occ = self.occupancy - wd.lo
        m[tuple(occ.T)] = True
        return wd.lo, m

    def restrict(self, u: float) -> "InterlacementSample":
        """The coupled sample at a lower level (trajectories with label <= u)."""
        if u > self.u:
            raise InvalidInput("can only restrict to a lower level")
        k = int(np.searchsorted(self.labels, u, side="right"))
        offs = self.offsets[: k + 1]
        tr = self.trace[: offs[-1]]
        lt = np.bincount(tr, minlength=len(self.window_sites)).astype(np.int32)
        return InterlacementSample(self.window, u, self.window_sites, lt, self.starts[:k], self.labels[:k],
                                   offs, tr, self.seed, self.stream_index, dict(self.meta))

    # ------------------------------------------------------------ export
    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x1,x2,x3,occupied,local_time\n")
            for s, lt in zip(self.window_sites.tolist(), self.local_time.tolist()):
                fh.write(f"{s[0]},{s[1]},{s[2]},{int(lt > 0)},{lt}\n")

    def to_bytes(self) -> bytes:
        head = {
            "window": self.window.descriptor(),
            "u": repr(float(self.u)),
            "seed": str(self.seed),
            "stream": str(self.stream_index),
            "trajectory_count": str(self.trajectory_count),
        }
        buf = io.BytesIO()
        buf.write(SAMPLE_MAGIC)
        buf.write((json.dumps(head) + "\n").encode("utf-8"))
        if isinstance(self.window, Explicit):
            pts = self.window_sites
            _put_varint(buf, len(pts))
            _put_sites(buf, pts)
        for j, tr in enumerate(self.traces):
            buf.write(np.float64(self.labels[j]).tobytes())
            _put_varint(buf, len(tr))
            _put_sites(buf, tr)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "InterlacementSample":
        buf = io.BytesIO(data)
        if buf.readline() != SAMPLE_MAGIC:
            raise InvalidInput("not an interlacement sample file")
        head = json.loads(buf.readline().decode("utf-8"))
        desc = head["window"]
        if desc.startswith(("box(", "cylinder(", "cone(", "kregion(", "quiver(")):
            window = parse_descriptor(desc)
        else:
            n = _get_varint(buf)
            window = Explicit(_get_sites(buf, n), name=desc.split("(")[0])
        wd = window_data(window)
        count = int(head["trajectory_count"])
        labels, starts, offsets, trace = [], [], [0], []
        for _ in range(count):
            labels.append(float(np.frombuffer(buf.read(8), dtype=np.float64)[0]))
            n = _get_varint(buf)
            sites = _get_sites(buf, n)
            idx = np.array([wd.index_of(s) for s in sites.tolist()], dtype=np.int32)
            starts.append(int(idx[0]))
            trace.append(idx)
            offsets.append(offsets[-1] + n)
        tr = np.concatenate(trace) if trace else np.zeros(0, dtype=np.int32)
        lt = np.bincount(tr, minlength=len(wd.points)).astype(np.int32)
        seed = None if head["seed"] == "None" else int(head["seed"])
        stream = None if head["stream"] == "None" else int(head["stream"])
        return cls(window, float(head["u"]), wd.points, lt, np.array(starts, dtype=np.int64),
                   np.array(labels), np.array(offsets, dtype=np.int64), tr, seed, stream)

    @classmethod
    def load(cls, path) -> "InterlacementSample":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _zigzag(v: int) -> int:
    return (v << 1) ^ (v >> 63) if v < 0 else v << 1


def _unzigzag(z: int) -> int:
    return (z >> 1) ^ -(z & 1)


def _put_varint(buf, v: int) -> None:
    v = int(v)
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            buf.write(bytes([b | 0x80]))
        else:
            buf.write(bytes([b]))
            return


def _get_varint(buf) -> int:
    shift = out = 0
    while True:
        b = buf.read(1)
        if not b:
            raise InvalidInput("truncated varint")
        out |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            return out
        shift += 7


def _put_sites(buf, pts: np.ndarray) -> None:
    prev = np.zeros(3, dtype=np.int64)
    for p in np.asarray(pts, dtype=np.int64):
        for v in (p - prev).tolist():
            _put_varint(buf, _zigzag(int(v)))
        prev = p


def _get_sites(buf, n: int) -> np.ndarray:
    out = np.zeros((n, 3), dtype=np.int64)
    prev = np.zeros(3, dtype=np.int64)
    for i in range(n):
        d = np.array([_unzigzag(_get_varint(buf)) for _ in range(3)], dtype=np.int64)
        prev = prev + d
        out[i] = prev
    return out


def parse_descriptor(desc: str) -> Region:
    """Rebuild a region from its descriptor string (box, cylinder, cone, kregion, quiver)."""
    kind, body = desc.split("(", 1)
    params = dict(item.split("=", 1) for item in body.rstrip(")").split(";") if item)
    return region_from_params(kind, **params)


# ---------------------------------------------------------------- sampling

def sample_interlacement(window: Region, u: float, rng, u_max: float | None = None,
                         eps_ret: float = DEFAULT_EPS, condition_on=None, max_attempts: int = 10_000,
                         profile: HarmonicProfile | None = None, record: bool = True) -> InterlacementSample:
    """Sample ``I^u`` on ``window``.

    Parameters
    ----------
    u_max : float, optional
        Level of the coupled master sample.  Samples with the same stream and
        ``u_max`` are nested in ``u``.
    condition_on : site, optional
        Resample until this site is occupied (the measure conditioned on
        ``x in I^u``); the number of attempts is stored in ``meta``.
    profile : HarmonicProfile, optional
        Place a Poisson(``u cap``) number of starts from this profile's
        normalised estimates instead of thinning; exact only up to the
        profile's Monte Carlo error.
    """
    if not u > 0:
        raise InvalidInput("u must be positive")
    u_max = u if u_max is None else float(u_max)
    if u_max < u:
        raise InvalidInput("u_max must be >= u")
    stream = as_stream(rng)
    wd = window_data(window, eps_ret)
    target = -1
    if condition_on is not None:
        target = wd.index_of(condition_on)
        if target < 0:
            raise InvalidInput("conditioning site is outside the window")
    gen = stream.generator()
    for attempt in range(1, max_attempts + 1):
        if profile is None:
            lt, starts, labels, offs, tr = K.soup_sample(wd.G, wd.face_site, wd.face_dir, wd.points,
                                                         float(u), u_max, gen, record or target >= 0)
        else:
            lt, starts, labels, offs, tr = _profile_sample(wd, profile, u, gen)
        if target < 0 or lt[target] > 0:
            break
    else:
        raise ConfigurationTooRare(f"site {condition_on} never occupied in {max_attempts} attempts")
    meta = {"eps_ret": eps_ret, "u_max": u_max, "attempts": attempt,
            "sampler": "thinning" if profile is None else "profile"}
    if not record:
        offs, tr = np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int32)
    return InterlacementSample(window, float(u), wd.points, lt, starts, labels, offs, tr,
                               stream.master_seed, stream.stream_index, meta)


def _profile_sample(wd: WindowData, profile: HarmonicProfile, u: float, gen):
    p = np.clip(profile.estimates, 0.0, None)
    cap = float(p.sum())
    n = gen.poisson(u * cap)
    idx = np.searchsorted(np.cumsum(p) / cap, gen.random(n), side="right")
    sites = profile.sites[np.minimum(idx, len(p) - 1)]
    starts = np.array([wd.index_of(s) for s in sites.tolist()], dtype=np.int64)
    lt, offs, tr = K.forward_walks(wd.G, starts, wd.points, gen)
    return lt, starts, np.sort(gen.random(n) * u), offs, tr


def vacancy_samples(A: Region, window: Region, u: float, rng, reps: int, eps_ret: float = DEFAULT_EPS,
                    block: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample trajectory counts and whether ``A`` was hit, for ``reps`` samples."""
    wd = window_data(window, eps_ret)
    watch = np.zeros(len(wd.points), dtype=np.bool_)
    for s in A.sites().tolist():
        i = wd.index_of(s)
        if i < 0:
            raise InvalidInput("A must lie inside the window")
        watch[i] = True
    stream = as_stream(rng)
    counts = np.empty(reps, dtype=np.int64)
    hits = np.empty(reps, dtype=np.int64)
    for b, lo in enumerate(range(0, reps, block)):
        m = min(block, reps - lo)
        K.soup_counts(wd.G, wd.face_site, wd.face_dir, wd.points, float(u), stream.spawn(51, b).generator(),
                      m, watch, counts[lo:lo + m], hits[lo:lo + m])
    return counts, hits


def dilate(A: Region, r: int = 1) -> Explicit:
    """Sup-norm dilation of a region by ``r``."""
    pts = A.sites()
    offs = np.array(np.meshgrid(*[np.arange(-r, r + 1)] * 3, indexing="ij")).reshape(3, -1).T
    return Explicit((pts[:, None, :] + offs[None, :, :]).reshape(-1, 3), name="dilation")


@dataclass
class VacancyCheck:
    empirical: float
    analytic: float
    z_score: float
    empirical_stderr: float
    capacity: float
    capacity_stderr: float


def vacant_probability_check(A: Region, u: float, rng, reps: int = 100_000, capacity: tuple | None = None,
                             cap_walks: int = 1_000_000, window: Region | None = None,
                             eps_ret: float = DEFAULT_EPS) -> VacancyCheck:
    """Empirical ``P[A in V^u]`` against ``exp(-u cap(A))``.

    The samples live on ``window`` (default: the sup-norm 1-dilation of ``A``,
    which strictly contains its neighbourhood).  ``cap(A)`` is a Monte Carlo
    estimate unless ``capacity = (value, stderr)`` is supplied.
    """
    if reps < 1:
        raise InvalidInput("reps must be positive")
    stream = as_stream(rng)
    window = window or dilate(A, 1)
    _, hits = vacancy_samples(A, window, u, stream.spawn(52), reps, eps_ret)
    emp = 1.0 - hits.mean()
    se_emp = math.sqrt(max(emp * (1 - emp), 1e-300) / reps)
    if capacity is None:
        capacity = capacity_estimate(A, stream.spawn(53), cap_walks, eps_ret)
    cap, se_cap = capacity
    ana = math.exp(-u * cap)
    se_ana = ana * u * se_cap
    z = (emp - ana) / math.sqrt(se_emp ** 2 + se_ana ** 2)
    return VacancyCheck(emp, ana, z, se_emp, cap, se_cap)


# ---------------------------------------------------------------- loops

@dataclass(frozen=True)
class LoopSpec:
    """Closed nearest-neighbour path ``y_0 = x0, ..., y_m = x0``.

    The strict form keeps every ``y_k`` off the window's inner boundary.  On a
    3x3x3 window only the centre qualifies, so no loop exists; with
    ``allow_boundary`` the path may use boundary sites (only the centre
    itself, the base, must be interior).
    """

    base: tuple
    path: tuple
    allow_boundary: bool = False

    def __post_init__(self):
        path = tuple(as_site(p) for p in self.path)
        object.__setattr__(self, "path", path)
        object.__setattr__(self, "base", as_site(self.base))
        if len(path) < 3:
            raise InvalidInput("a loop needs m >= 2 steps (m = 0 is degenerate)")
        if path[0] != self.base or path[-1] != self.base:
            raise InvalidInput("loop must start and end at its base")
        for a, b in zip(path[:-1], path[1:]):
            if not adjacent(a, b):
                raise InvalidInput(f"loop steps {a} -> {b} are not adjacent")

    @property
    def m(self) -> int:
        return len(self.path) - 1

    def increments(self) -> Counter:
        """``l(x) = #{1 <= k <= m : y_k = x}``."""
        return Counter(self.path[1:])

    def validate(self, window: Region) -> None:
        wd = window_data(window)
        for k, y in enumerate(self.path):
            i = wd.index_of(y)
            if i < 0:
                raise InvalidInput(f"loop site {y} is outside the window")
            if wd.on_boundary[i] and (k == 0 or not self.allow_boundary):
                raise InvalidInput(f"loop site {y} lies on the window boundary")


@dataclass
class LoopCheck:
    lhs: float
    rhs: float
    passed: bool
    sigma: float
    eta: tuple
    count_eta: int
    count_eta_loop: int
    reps: int


def local_time_table(window: Region, u: float, rng, reps: int, eps_ret: float = DEFAULT_EPS,
                     block: int = 1 << 15) -> np.ndarray:
    """``reps`` local-time vectors (rows, uint16) on a small window."""
    wd = window_data(window, eps_ret)
    out = np.zeros((reps, len(wd.points)), dtype=np.uint16)
    stream = as_stream(rng)
    for b, lo in enumerate(range(0, reps, block)):
        m = min(block, reps - lo)
        K.soup_local_times(wd.G, wd.face_site, wd.face_dir, wd.points, float(u),
                           stream.spawn(54, b).generator(), m, out[lo:lo + m])
    return out


def window_symmetries(window: Region, base) -> np.ndarray:
    """Site permutations induced by the lattice symmetries fixing ``base`` and the window.

    Row ``g`` maps site index ``i`` to ``perm[g, i]``.
    """
    wd = window_data(window)
    b = np.asarray(as_site(base), dtype=np.int64)
    rel = wd.points - b
    rows = []
    for P in _signed_permutations():
        img = rel @ P.T + b
        idx = np.array([wd.index_of(s) for s in img.tolist()])
        if (idx >= 0).all():
            rows.append(idx)
    return np.unique(np.array(rows), axis=0)


def loop_insertion_check(window: Region, u: float, loop: LoopSpec, rng, reps: int = 1_000_000,
                         eta=None, table: np.ndarray | None = None, max_rel_stderr: float = 0.2,
                         symmetrize: bool = True) -> LoopCheck:
    """Empirical ``P[L = eta + l]`` against ``(2d)^{-m} P[L = eta]``.

    Both probabilities are estimated as orbit averages over the lattice
    symmetries fixing the loop base and the window (the law of the local
    times is invariant under them).  ``eta`` defaults to the configuration with
    ``eta(x0) = 1`` whose orbit holds the most samples.  ``passed`` means
    ``lhs >= rhs - 3 sigma``.
    """
    wd = window_data(window)
    if len(wd.points) > 64:
        raise InvalidInput("loop insertion check needs a small window (<= 64 sites)")
    loop.validate(window)
    if table is None:
        table = local_time_table(window, u, rng, reps)
    reps = len(table)
    b = wd.index_of(loop.base)
    perms = window_symmetries(window, loop.base) if symmetrize else np.arange(len(wd.points))[None, :]
    rows = np.ascontiguousarray(table)
    void = np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))
    uniq, counts = np.unique(rows.view(void).ravel(), return_counts=True)
    configs = uniq.view(rows.dtype).reshape(len(uniq), rows.shape[1])
    lookup = dict(zip(uniq.tolist(), counts.tolist()))

    def orbit_stats(vec):
        # distinct images of vec; returns (orbit size, total count over the orbit)
        imgs = np.zeros((len(perms), len(vec)), dtype=rows.dtype)
        imgs[np.arange(len(perms))[:, None], perms] = vec
        imgs = np.unique(imgs, axis=0)
        keys = np.ascontiguousarray(imgs).view(void).ravel().tolist()
        return len(imgs), sum(lookup.get(k, 0) for k in keys)

    if eta is None:
        cand = np.flatnonzero(configs[:, b] == 1)
        if len(cand) == 0:
            raise ConfigurationTooRare("no sample has local time 1 at the loop base")
        best = None
        for i in cand[np.argsort(-counts[cand], kind="stable")][:64]:
            k, c = orbit_stats(configs[i])
            if best is None or c > best[0]:  # the best-sampled orbit gives the tightest check
                best = (c, i)
        eta_vec = configs[best[1]].astype(np.int64)
    else:
        eta_vec = np.asarray(eta, dtype=np.int64)
    ell = np.zeros(len(wd.points), dtype=np.int64)
    for y, c in loop.increments().items():
        ell[wd.index_of(y)] += c
    k_eta, c_eta = orbit_stats(eta_vec)
    k_new, c_new = orbit_stats(eta_vec + ell)
    if c_eta == 0 or 1.0 / math.sqrt(c_eta) > max_rel_stderr:
        raise ConfigurationTooRare(f"P[eta] estimated from {c_eta} samples")
    q_eta, q_new = c_eta / reps, c_new / reps
    p_eta, p_new = q_eta / k_eta, q_new / k_new
    w = (2 * 3) ** (-loop.m)
    var = q_new * (1 - q_new) / reps / k_new ** 2 + w * w * q_eta * (1 - q_eta) / reps / k_eta ** 2
    sigma = math.sqrt(var)
    lhs, rhs = p_new, w * p_eta
    return LoopCheck(lhs, rhs, bool(lhs >= rhs - 3 * sigma), sigma, tuple(eta_vec.tolist()), c_eta, c_new, reps)


# ---------------------------------------------------------------- chemical distance

@dataclass
class ChemicalDistanceTable:
    ray_sites: np.ndarray  # e1-coordinates k with k e1 occupied
    gaps: np.ndarray
    distances: np.ndarray  # graph distance in the occupied window; -1 if not connected there
    tail_h: np.ndarray
    tail_prob: np.ndarray
    tail_slope: float
    occupied_fraction: float


def graph_distances(mask: np.ndarray, source: tuple, target: tuple | None = None) -> np.ndarray:
    """BFS distances in the nearest-neighbour graph of ``mask`` (-1 where unreachable).

    With ``target`` the search stops once it is reached.
    """
    dist = -np.ones(mask.shape, dtype=np.int64)
    if not mask[source]:
        return dist
    dist[source] = 0
    q = deque([source])
    shape = mask.shape
    while q:
        p = q.popleft()
        if p == target:
            break
        dp = dist[p] + 1
        for ax in range(3):
            for s in (-1, 1):
                nb = list(p)
                nb[ax] += s
                if 0 <= nb[ax] < shape[ax]:
                    t = tuple(nb)
                    if mask[t] and dist[t] < 0:
                        dist[t] = dp
                        q.append(t)
    return dist


def chemical_distance_check(u: float, ray_length: int, rng, radius: int = 6, samples: int = 1,
                            min_hits: int = 2, eps_ret: float = DEFAULT_EPS) -> ChemicalDistanceTable:
    """Gaps between occupied sites of the ray ``{k e1 : 0 <= k <= ray_length}`` and their graph distances.

    Each sample is drawn on the cylinder of transverse radius ``radius``
    around the ray; distances are computed inside the occupied part of that
    window.
    """
    if u < 0.25:
        raise InvalidInput("u must be >= 0.25")
    stream = as_stream(rng)
    window = Cylinder((0, 0, 0), 0, ray_length, radius)
    all_sites, gaps, dists = [], [], []
    occ_total = 0
    for s in range(samples):
        smp = sample_interlacement(window, u, stream.spawn(55, s), eps_ret=eps_ret, record=False)
        lo, m = smp.occupancy_mask()
        ray = np.flatnonzero(m[:, radius, radius])
        occ_total += len(ray)
        if len(ray) < min_hits:
            raise WindowExhausted(f"only {len(ray)} occupied ray sites within length {ray_length}")
        all_sites.append(ray)
        for a, b in zip(ray[:-1], ray[1:]):
            gaps.append(int(b - a))
            d = graph_distances(m, (int(a), radius, radius), (int(b), radius, radius))
            dists.append(int(d[int(b), radius, radius]))
    gaps = np.array(gaps, dtype=np.int64)
    dists = np.array(dists, dtype=np.int64)
    hs = np.arange(1, gaps.max() + 1) if len(gaps) else np.zeros(0, dtype=np.int64)
    tail = np.array([(gaps > h).mean() for h in hs])
    keep = (tail > 0) & (hs >= 2)
    slope = float("nan")
    if keep.sum() >= 2:
        x = hs[keep] / np.log(hs[keep])
        slope = float(np.polyfit(x, np.log(tail[keep]), 1)[0])
    frac = occ_total / (samples * (ray_length + 1))
    return ChemicalDistanceTable(np.concatenate(all_sites), gaps, dists, hs, tail, slope, frac)


def exact_vacancy(A: Region, u: float) -> float:
    """``exp(-u cap(A))`` with the exact small-set capacity."""
    return math.exp(-u * exact_capacity(A)[0])
