"""Geometry of Z^3: sites, finite regions, inner boundaries, cones and trap anchors.

Regions whose cross-sections orthogonal to e1 are centred squares (boxes,
cylinders, cones, K-regions) enumerate their inner boundary slice by slice;
everything else falls back to a neighbour scan of the region's own sites.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DegenerateScale, InvalidInput

# Nudges floors of quantities like (3/M) ln n that are integers in exact arithmetic.
_FLOOR_EPS = 1e-9

NEIGHBOR_OFFSETS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64
)


class Site(NamedTuple):
    x1: int
    x2: int
    x3: int

    def __add__(self, other):  # type: ignore[override]
        return Site(self.x1 + other[0], self.x2 + other[1], self.x3 + other[2])

    def __sub__(self, other):
        return Site(self.x1 - other[0], self.x2 - other[1], self.x3 - other[2])


E1 = Site(1, 0, 0)
ORIGIN = Site(0, 0, 0)


def as_site(s) -> Site:
    return Site(int(s[0]), int(s[1]), int(s[2]))


def adjacent(x, y) -> bool:
    return sum(abs(int(a) - int(b)) for a, b in zip(x, y)) == 1


def lexsort_sites(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.int64).reshape(-1, 3)
    if len(pts) == 0:
        return pts
    return pts[np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))]


def floor_real(v: float) -> int:
    return int(math.floor(v + _FLOOR_EPS))


def _as_fraction(M) -> Fraction:
    M = Fraction(M)
    if M <= 0:
        raise InvalidInput("M must be positive")
    return M


def clamp_log_n(n: float) -> float:
    return math.log(max(float(n), 3.0))


class Region:
    """Finite set of sites with a pure membership predicate."""

    kind = "region"

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError

    def contains(self, s) -> bool:
        return bool(self.contains_many(np.asarray([s], dtype=np.int64))[0])

    def __contains__(self, s) -> bool:
        return self.contains(s)

    def mask(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean occupancy of the bounding box and the box's lower corner."""
        lo, hi = self.bbox()
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        m = self.contains_many(grid).reshape(tuple(hi - lo + 1))
        return lo, m

    def sites(self) -> np.ndarray:
        lo, m = self.mask()
        return np.argwhere(m).astype(np.int64) + lo

    @property
    def size(self) -> int:
        return int(self.mask()[1].sum())

    def iter_boundary(self) -> Iterator[np.ndarray]:
        pts = self.sites()
        if len(pts) == 0:
            return
        inside = np.ones(len(pts), dtype=bool)
        for off in NEIGHBOR_OFFSETS:
            inside &= self.contains_many(pts + off)
        yield pts[~inside]

    def boundary(self) -> np.ndarray:
        parts = [p for p in self.iter_boundary() if len(p)]
        if not parts:
            return np.zeros((0, 3), dtype=np.int64)
        return lexsort_sites(np.concatenate(parts))

    def __repr__(self):
        return f"<{self.descriptor()}>"


class _SquareSlices(Region):
    """Regions whose slice at e1-level t is a centred square of half-width w(t)."""

    def t_range(self) -> tuple[int, int]:
        raise NotImplementedError

    def center(self) -> tuple[int, int]:
        return (0, 0)

    def width(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _w(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.int64)
        t0, t1 = self.t_range()
        w = self.width(np.clip(t, t0, t1))
        return np.where((t < t0) | (t > t1), -1, w)

    def contains_many(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 3)
        c2, c3 = self.center()
        w = self._w(pts[:, 0])
        r = np.maximum(np.abs(pts[:, 1] - c2), np.abs(pts[:, 2] - c3))
        return (w >= 0) & (r <= w)

    def bbox(self):
        t0, t1 = self.t_range()
        wmax = int(self._w(np.arange(t0, t1 + 1)).max())
        c2, c3 = self.center()
        return (np.array([t0, c2 - wmax, c3 - wmax], dtype=np.int64),
                np.array([t1, c2 + wmax, c3 + wmax], dtype=np.int64))

    def mask(self):
        lo, hi = self.bbox()
        c2, c3 = self.center()
        t = np.arange(lo[0], hi[0] + 1)
        w = self._w(t)
        a = np.abs(np.arange(lo[1], hi[1] + 1) - c2)
        b = np.abs(np.arange(lo[2], hi[2] + 1) - c3)
        r = np.maximum(a[:, None], b[None, :])
        return lo, r[None, :, :] <= w[:, None, None]

    @property
    def size(self) -> int:
        t0, t1 = self.t_range()
        w = self._w(np.arange(t0, t1 + 1))
        return int(np.sum((2 * w + 1) ** 2))

    def iter_boundary(self):
        # Ring of slice t: the square minus the largest square whose sites keep
        # all six neighbours inside.
        t0, t1 = self.t_range()
        c2, c3 = self.center()
        for t in range(t0, t1 + 1):
            w, wm, wp = (int(v) for v in self._w(np.array([t, t - 1, t + 1])))
            inner = min(wm, wp, w - 1)
            a = np.arange(-w, w + 1)
            A, B = np.meshgrid(a, a, indexing="ij")
            r = np.maximum(np.abs(A), np.abs(B))
            sel = r > inner
            n = int(sel.sum())
            out = np.empty((n, 3), dtype=np.int64)
            out[:, 0] = t
            out[:, 1] = A[sel] + c2
            out[:, 2] = B[sel] + c3
            yield out


@dataclass(frozen=True, repr=False)
class Box(_SquareSlices):
    """Sup-norm ball ``|x_i - c_i| <= L``."""

    center_site: Site
    L: int
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "center_site", as_site(self.center_site))
        if self.L < 0:
            raise InvalidInput("Box radius must be nonnegative")

    def t_range(self):
        return (self.center_site.x1 - self.L, self.center_site.x1 + self.L)

    def center(self):
        return (self.center_site.x2, self.center_site.x3)

    def width(self, t):
        return np.full(np.shape(t), self.L, dtype=np.int64)

    def descriptor(self):
        c = self.center_site
        return f"box(center={c.x1},{c.x2},{c.x3};L={self.L})"


@dataclass(frozen=True, repr=False)
class Cylinder(_SquareSlices):
    """``x + {z : -L1 <= z.e1 <= L2, |z.e_i| <= L3}``."""

    base: Site
    L1: int
    L2: int
    L3: int
    kind = "cylinder"

    def __post_init__(self):
        object.__setattr__(self, "base", as_site(self.base))
        if min(self.L1 + self.L2, self.L3) < 0:
            raise InvalidInput("cylinder extents must be nonnegative")

    def t_range(self):
        return (self.base.x1 - self.L1, self.base.x1 + self.L2)

    def center(self):
        return (self.base.x2, self.base.x3)

    def width(self, t):
        return np.full(np.shape(t), self.L3, dtype=np.int64)

    def descriptor(self):
        b = self.base
        return f"cylinder(x={b.x1},{b.x2},{b.x3};L1={self.L1};L2={self.L2};L3={self.L3})"


@dataclass(frozen=True, repr=False)
class Cone(_SquareSlices):
    """``|x.e1| <= n`` and ``|x.e_i| <= M (n - x.e1)``, optionally clipped transversally."""

    M: Fraction
    n: int
    clip: int | None = None
    kind = "cone"

    def __post_init__(self):
        object.__setattr__(self, "M", _as_fraction(self.M))
        if self.n < 1:
            raise InvalidInput("cone scale n must be >= 1")

    def t_range(self):
        return (-self.n, self.n)

    def width(self, t):
        t = np.asarray(t, dtype=np.int64)
        num, den = self.M.numerator, self.M.denominator
        w = (num * (self.n - t)) // den
        if self.clip is not None:
            w = np.minimum(w, self.clip)
        return w

    def descriptor(self):
        s = f"cone(M={self.M};n={self.n}"
        return s + (f";clip={self.clip})" if self.clip is not None else ")")


@dataclass(frozen=True, repr=False)
class KRegion(_SquareSlices):
    """``x.e1 > -n``, ``|x.e_i| <= n + x.e1``, truncated at ``x.e1 <= depth``."""

    n: int
    depth: int
    clip: int | None = None
    kind = "kregion"

    def t_range(self):
        return (-self.n + 1, self.depth)

    def width(self, t):
        w = self.n + np.asarray(t, dtype=np.int64)
        if self.clip is not None:
            w = np.minimum(w, self.clip)
        return w

    def descriptor(self):
        s = f"kregion(n={self.n};depth={self.depth}"
        return s + (f";clip={self.clip})" if self.clip is not None else ")")


@dataclass(frozen=True)
class QuiverScales:
    segment: int  # floor((3/M) ln n)
    length: int  # floor(M ln n)
    radius: int  # floor((ln n)^{3/4})
    log_n: float


def quiver_scales(M, n: float) -> QuiverScales:
    M = _as_fraction(M)
    ln = clamp_log_n(n)
    return QuiverScales(
        segment=floor_real(3.0 * ln / float(M)),
        length=floor_real(float(M) * ln),
        radius=floor_real(ln ** 0.75),
        log_n=ln,
    )


@dataclass(frozen=True, repr=False)
class Quiver(Region):
    """Inner boundary of the cylinder ``Cyl_x(0, floor(M ln n)+1, floor((ln n)^{3/4}))``."""

    base: Site
    M: Fraction
    n: float
    kind = "quiver"

    def __post_init__(self):
        object.__setattr__(self, "base", as_site(self.base))
        object.__setattr__(self, "M", _as_fraction(self.M))

    @property
    def scales(self) -> QuiverScales:
        return quiver_scales(self.M, self.n)

    def cylinder(self) -> Cylinder:
        s = self.scales
        return Cylinder(self.base, 0, s.length + 1, s.radius)

    def contains_many(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 3)
        cyl = self.cylinder()
        inside = cyl.contains_many(pts)
        interior = np.ones(len(pts), dtype=bool)
        for off in NEIGHBOR_OFFSETS:
            interior &= cyl.contains_many(pts + off)
        return inside & ~interior

    def bbox(self):
        return self.cylinder().bbox()

    def iter_boundary(self):
        # a one-site-thick shell is its own inner boundary
        yield from self.cylinder().iter_boundary()

    def sites(self):
        return self.cylinder().boundary()

    def interior(self) -> np.ndarray:
        cyl = self.cylinder()
        lo, m = cyl.mask()
        inner = m.copy()
        inner[0, :, :] = inner[-1, :, :] = False
        inner[:, 0, :] = inner[:, -1, :] = False
        inner[:, :, 0] = inner[:, :, -1] = False
        return np.argwhere(inner).astype(np.int64) + lo

    def descriptor(self):
        b = self.base
        return f"quiver(x={b.x1},{b.x2},{b.x3};M={self.M};n={self.n!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Explicit(Region):
    """An explicit finite site set."""

    points: np.ndarray
    name: str = "explicit"
    _index: dict = field(default=None, compare=False)
    kind = "explicit"

    def __post_init__(self):
        pts = lexsort_sites(np.unique(np.asarray(self.points, dtype=np.int64).reshape(-1, 3), axis=0))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", {tuple(p): i for i, p in enumerate(pts.tolist())})

    def __eq__(self, other):
        return isinstance(other, Explicit) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def contains_many(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 3)
        return np.fromiter((tuple(p) in self._index for p in pts.tolist()), dtype=bool, count=len(pts))

    def bbox(self):
        if len(self.points) == 0:
            raise InvalidInput("empty explicit region has no bounding box")
        return self.points.min(axis=0), self.points.max(axis=0)

    def mask(self):
        lo, hi = self.bbox()
        m = np.zeros(tuple(hi - lo + 1), dtype=bool)
        idx = self.points - lo
        m[idx[:, 0], idx[:, 1], idx[:, 2]] = True
        return lo, m

    def sites(self):
        return self.points.copy()

    @property
    def size(self):
        return len(self.points)

    def descriptor(self):
        body = ",".join(f"{a}:{b}:{c}" for a, b, c in self.points.tolist()[:64])
        more = "" if len(self.points) <= 64 else f";+{len(self.points) - 64}"
        return f"{self.name}({body}{more})"


class Whole(Region):
    """All of Z^3 (as a hitting target only; it has no bounding box)."""

    kind = "whole"

    def contains_many(self, pts):
        return np.ones(len(np.asarray(pts).reshape(-1, 3)), dtype=bool)

    def bbox(self):
        raise InvalidInput("Z^3 has no bounding box")

    def descriptor(self):
        return "whole()"


def segment(length: int, start=ORIGIN) -> Explicit:
    """Sites ``start + k e1`` for ``0 <= k <= length``."""
    s = as_site(start)
    pts = np.array([[s.x1 + k, s.x2, s.x3] for k in range(length + 1)], dtype=np.int64)
    return Explicit(pts, name="segment")


def from_mask(lo: np.ndarray, m: np.ndarray, name: str = "explicit") -> Explicit:
    return Explicit(np.argwhere(m).astype(np.int64) + np.asarray(lo, dtype=np.int64), name=name)


def brute_force_boundary(region: Region) -> np.ndarray:
    """Inner boundary by scanning every site of the bounding box (test oracle)."""
    lo, hi = region.bbox()
    out = []
    for x in range(lo[0], hi[0] + 1):
        for y in range(lo[1], hi[1] + 1):
            for z in range(lo[2], hi[2] + 1):
                if not region.contains((x, y, z)):
                    continue
                if any(not region.contains((x + a, y + b, z + c)) for a, b, c in NEIGHBOR_OFFSETS.tolist()):
                    out.append((x, y, z))
    return lexsort_sites(np.array(out, dtype=np.int64).reshape(-1, 3))


def region_contains(r: Region, s) -> bool:
    return r.contains(s)


def cone_boundaries(M, n: int, clip: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Negative face ``x.e1 = -n`` and the rest of the cone's inner boundary."""
    cone = Cone(M, n, clip)
    bd = cone.boundary()
    neg = bd[:, 0] == -n
    return bd[neg], bd[~neg]


@dataclass(frozen=True)
class TrapAnchors:
    base: Site
    mouth: Site
    tip: Site
    segment: tuple[Site, ...]
    M: Fraction
    n: float

    @property
    def quiver(self) -> Quiver:
        return Quiver(self.mouth, self.M, self.n)


def trap_anchors(x, M, n: float) -> TrapAnchors:
    """Base, mouth and tip of the trap at ``x`` for scale parameters ``(M, n)``."""
    M = _as_fraction(M)
    if M < 10:
        warnings.warn("trap geometry assumes M >= 10", stacklevel=2)
    s = quiver_scales(M, n)
    if s.radius < 2:
        raise DegenerateScale(f"floor((ln n)^(3/4)) = {s.radius} < 2 for n={n}")
    x = as_site(x)
    mouth = x + (s.segment, 0, 0)
    tip = mouth + (s.length, 0, 0)
    seg = tuple(x + (j, 0, 0) for j in range(s.segment + 1))
    return TrapAnchors(x, mouth, tip, seg, M, float(n))


def region_from_params(kind: str, **p) -> Region:
    """Build a region from a kind name and keyword parameters (harness configs)."""
    kind = kind.lower()

    def site(key):
        v = p[key]
        if isinstance(v, str):
            v = [int(t) for t in v.replace(";", ",").split(",")]
        return as_site(v)

    if kind == "box":
        return Box(site("center") if "center" in p else ORIGIN, int(p["L"]))
    if kind == "cylinder":
        return Cylinder(site("x") if "x" in p else ORIGIN, int(p["L1"]), int(p["L2"]), int(p["L3"]))
    if kind == "cone":
        clip = p.get("clip")
        return Cone(Fraction(str(p["M"])), int(p["n"]), None if clip in (None, "") else int(clip))
    if kind == "kregion":
        clip = p.get("clip")
        return KRegion(int(p["n"]), int(p["depth"]), None if clip in (None, "") else int(clip))
    if kind == "quiver":
        return Quiver(site("x") if "x" in p else ORIGIN, Fraction(str(p["M"])), float(p["n"]))
    if kind == "segment":
        return segment(int(p["length"]), site("start") if "start" in p else ORIGIN)
    if kind in ("explicit", "sites"):
        raw = p["sites"]
        pts = [[int(t) for t in chunk.split(",")] for chunk in raw.split(";") if chunk.strip()]
        return Explicit(np.array(pts, dtype=np.int64))
    raise InvalidInput(f"unknown region kind {kind!r}")
