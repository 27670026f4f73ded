"""Harmonic measure, capacity and variational capacity bounds on Z^3.

Escape probabilities are estimated with the certified-truncation walks of
:mod:`riwalk.srw`.  Sites whose six neighbours all lie in the set have
``e_A(x) = 0`` exactly and are not simulated.  When the set has lattice
symmetries (signed axis permutations composed with a translation), one site
per orbit is simulated with the pooled replica budget of the whole orbit.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCapacity, RegionTooLarge, SupportMismatch
from .lattice import NEIGHBOR_OFFSETS, Quiver, Region, as_site, lexsort_sites, quiver_scales, trap_anchors
from .rng import as_stream, run_blocks
from .srw.geometry import DEFAULT_EPS, outward_faces
from .srw.green import green_many, green_matrix
from .srw.walks import escape_counts, geometry_for
from .srw import _kernels as K

MAX_SITES = 100_000


def _points(A) -> tuple[np.ndarray, str]:
    if isinstance(A, Region):
        return lexsort_sites(A.sites()), A.descriptor()
    pts = lexsort_sites(np.unique(np.asarray(A, dtype=np.int64).reshape(-1, 3), axis=0))
    return pts, "sites"


@dataclass
class HarmonicProfile:
    """Escape probabilities ``e_A(x)`` over a finite set and their sum ``cap(A)``."""

    region_id: str
    sites: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    capacity: float
    capacity_stderr: float
    replicas: int = 0
    seed: int | None = None
    symmetry_order: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> dict:
        return {as_site(s): (float(e), float(v))
                for s, e, v in zip(self.sites.tolist(), self.estimates, self.stderrs)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# region={self.region_id};seed={self.seed};replicas={self.replicas};"
                     f"symmetry_order={self.symmetry_order}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["site_x1", "site_x2", "site_x3", "e_estimate", "e_stderr"])
            for s, e, v in zip(self.sites.tolist(), self.estimates, self.stderrs):
                w.writerow([s[0], s[1], s[2], repr(float(e)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "HarmonicProfile":
        with open(path) as fh:
            head = fh.readline()[2:].strip()
            meta = dict(kv.split("=", 1) for kv in head.split(";"))
            rows = list(csv.DictReader(fh))
        sites = np.array([[int(r["site_x1"]), int(r["site_x2"]), int(r["site_x3"])] for r in rows],
                         dtype=np.int64).reshape(-1, 3)
        est = np.array([float(r["e_estimate"]) for r in rows])
        se = np.array([float(r["e_stderr"]) for r in rows])
        seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
        return cls(meta["region"], sites, est, se, float(est.sum()), float(math.sqrt((se ** 2).sum())),
                   int(meta.get("replicas", 0)), seed, int(meta.get("symmetry_order", 1)))


def _signed_permutations():
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            P = np.zeros((3, 3), dtype=np.int64)
            for i, (j, s) in enumerate(zip(perm, signs)):
                P[i, j] = s
            yield P


def symmetry_orbits(points: np.ndarray) -> tuple[np.ndarray, int]:
    """Orbit label of each site under the lattice symmetries of the set, and the group order."""
    pts = lexsort_sites(points)
    n = len(pts)
    key = {tuple(p): i for i, p in enumerate(pts.tolist())}
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = 0
    lo = pts.min(axis=0)
    for P in _signed_permutations():
        img = pts @ P.T
        img = img + (lo - img.min(axis=0))
        idx = [key.get(tuple(p)) for p in img.tolist()]
        if any(i is None for i in idx):
            continue
        order += 1
        for a, b in enumerate(idx):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    labels = np.array([find(i) for i in range(n)])
    return labels, order


def interior_mask(points: np.ndarray) -> np.ndarray:
    """Sites whose six neighbours all belong to the set (they have ``e_A = 0``)."""
    key = set(map(tuple, points.tolist()))
    out = np.ones(len(points), dtype=bool)
    for off in NEIGHBOR_OFFSETS:
        out &= np.fromiter((tuple(p) in key for p in (points + off).tolist()), dtype=bool, count=len(points))
    return out


def harmonic_measure(A, rng, replicas_per_site: int = 100_000, eps_ret: float = DEFAULT_EPS,
                     symmetrize: bool = True, max_sites: int = MAX_SITES) -> HarmonicProfile:
    """Per-site escape estimates ``e_A(x)`` and their sum.

    With ``symmetrize`` each symmetry orbit is simulated once with
    ``replicas_per_site * |orbit|`` walks and the estimate is shared by its sites.
    """
    pts, desc = _points(A)
    if len(pts) > max_sites:
        raise RegionTooLarge(f"{len(pts)} sites exceed the limit {max_sites}")
    stream = as_stream(rng)
    n = len(pts)
    inner = interior_mask(pts)
    if symmetrize:
        labels, order = symmetry_orbits(pts)
    else:
        labels, order = np.arange(n), 1
    reps_idx = np.array(sorted(set(labels[~inner].tolist())), dtype=np.int64)
    sizes = np.array([(labels == r).sum() for r in reps_idx], dtype=np.int64)
    est = np.zeros(n)
    se = np.zeros(n)
    var_cap = 0.0
    # orbits of equal size share one batched kernel call
    for size in sorted(set(sizes.tolist())):
        group = reps_idx[sizes == size]
        reps = int(replicas_per_site * size)
        counts = escape_counts(pts, pts[group], reps, stream.spawn(41, int(size)), eps_ret)
        p = counts / reps
        s = np.sqrt(np.maximum(p * (1 - p), 1e-300) / reps)
        for r, pr, sr in zip(group, p, s):
            members = labels == r
            est[members] = pr
            se[members] = sr
            var_cap += (size * sr) ** 2
    cap = float(math.fsum(est.tolist()))
    seed = stream.master_seed
    return HarmonicProfile(desc, pts, est, se, cap, math.sqrt(var_cap), replicas_per_site, seed, order,
                           {"eps_ret": eps_ret, "symmetrized": bool(symmetrize and order > 1)})


def capacity_estimate(A, rng, walks: int = 1_000_000, eps_ret: float = DEFAULT_EPS) -> tuple[float, float]:
    """``cap(A) = F/(2d) P[a walk from a uniform outward face never hits A]``.

    ``F`` counts the pairs ``(x, y)`` with ``x`` in ``A``, ``y`` outside and
    adjacent; this is the same thinning identity that drives the interlacement
    sampler.
    """
    pts, _ = _points(A)
    fs, fd = outward_faces(pts)
    F = len(fs)
    G = geometry_for(pts, eps_ret)
    off = np.zeros((6, 3), dtype=np.int64)
    for r in range(6):
        off[r, r >> 1] = -1 if r & 1 else 1
    starts_all = pts[fs] + off[fd]

    def job(gen, b, m):
        pick = np.minimum((gen.random(m) * F).astype(np.int64), F - 1)
        return int(K.escape_from_starts(G, starts_all[pick], gen))

    res = run_blocks(job, walks, as_stream(rng), 1 << 14, tag=42)
    p = sum(res) / walks
    scale = F / 6.0
    return scale * p, scale * math.sqrt(max(p * (1 - p), 1e-300) / walks)


def exact_capacity(A) -> tuple[float, np.ndarray]:
    """Solve ``sum_y g(x,y) e(y) = 1`` on ``A``; returns ``(cap, e)`` in lexicographic site order."""
    pts, _ = _points(A)
    e = np.linalg.solve(green_matrix(pts), np.ones(len(pts)))
    return float(e.sum()), e


@dataclass
class NormalizedMeasure:
    sites: np.ndarray
    probabilities: np.ndarray
    raw_sum: float

    def as_dict(self) -> dict:
        return {as_site(s): float(p) for s, p in zip(self.sites.tolist(), self.probabilities)}


def normalized_harmonic_measure(p: HarmonicProfile) -> NormalizedMeasure:
    """Renormalise the estimates to a probability vector summing to exactly 1."""
    if not p.capacity > 3.0 * p.capacity_stderr or p.capacity <= 0.0:
        raise DegenerateCapacity(f"capacity {p.capacity} within 3 stderr of zero")
    raw = float(math.fsum(p.estimates.tolist()))
    q = p.estimates / raw
    # push the rounding residue onto the largest mass
    k = int(np.argmax(q))
    q[k] = 0.0
    q[k] = 1.0 - math.fsum(q.tolist())
    return NormalizedMeasure(p.sites.copy(), q, raw)


@dataclass
class TestFunction:
    support: np.ndarray
    values: np.ndarray

    __test__ = False  # not a pytest class

    @classmethod
    def constant(cls, region, c: float) -> "TestFunction":
        pts, _ = _points(region)
        return cls(pts, np.full(len(pts), float(c)))


def green_potential(points: np.ndarray, support: np.ndarray, values: np.ndarray,
                    chunk: int = 1 << 22) -> np.ndarray:
    """``sum_y g(x,y) phi(y)`` for every ``x`` in ``points``, in row chunks."""
    points = np.asarray(points, dtype=np.int64)
    out = np.empty(len(points))
    rows = max(1, chunk // max(1, len(support)))
    for i in range(0, len(points), rows):
        P = points[i:i + rows]
        diff = (support[None, :, :] - P[:, None, :]).reshape(-1, 3)
        out[i:i + rows] = green_many(diff).reshape(len(P), len(support)) @ values
    return out


def variational_upper_bound(Q, phi: TestFunction) -> tuple[bool, float, float]:
    """Check ``sum_y g(x,y) phi(y) >= 1`` on ``Q``; returns ``(is_feasible, sum(phi), min_slack)``."""
    pts, _ = _points(Q)
    sup = np.asarray(phi.support, dtype=np.int64).reshape(-1, 3)
    key = set(map(tuple, pts.tolist()))
    if any(tuple(s) not in key for s in sup.tolist()):
        raise SupportMismatch("test function support is not contained in the region")
    vals = np.asarray(phi.values, dtype=np.float64)
    if (vals < 0).any():
        raise SupportMismatch("test function must be nonnegative")
    pot = green_potential(pts, sup, vals)
    slack = float(pot.min() - 1.0)
    # tolerance for the table's rounding
    return bool(slack >= -1e-12), float(vals.sum()), slack


def best_constant_bound(Q) -> tuple[float, float]:
    """Smallest feasible constant test function on ``Q`` and the resulting bound on ``cap(Q)``."""
    pts, _ = _points(Q)
    pot = green_potential(pts, pts, np.ones(len(pts)))
    c = 1.0 / pot.min()
    return float(c), float(c * len(pts))


@dataclass
class QuiverScanRow:
    n: float
    sites: int
    cap_mc: float
    cap_stderr: float
    cap_bound: float
    gamma4: float
    scaled_cap: float  # cap_mc * ln ln n / (M ln n)


def quiver_capacity_scan(M, n_list, rng, walks: int = 400_000, eps_ret: float = DEFAULT_EPS) -> list[QuiverScanRow]:
    """Monte Carlo capacity of quivers against the best constant-test-function bound.

    ``gamma4`` is the constant ``c m^{3/4} ln m`` (``m = ln n``) of the smallest
    feasible constant ``c``.
    """
    stream = as_stream(rng)
    rows = []
    for i, n in enumerate(n_list):
        trap_anchors((0, 0, 0), M, n)
        s = quiver_scales(M, n)
        Q = Quiver((0, 0, 0), M, n)
        cap, se = capacity_estimate(Q, stream.spawn(43, i), walks, eps_ret)
        c, bound = best_constant_bound(Q)
        m = s.log_n
        rows.append(QuiverScanRow(float(n), Q.size, cap, se, bound, c * m ** 0.75 * math.log(m),
                                  cap * math.log(m) / (float(M) * m)))
        if cap > bound + 3 * se:
            raise AssertionError(f"capacity {cap} exceeds the variational bound {bound} at n={n}")
    return rows
