"""Precomputed target-set data consumed by the compiled walk kernels."""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from scipy.ndimage import distance_transform_cdt

from .cubes import cube_tables
from .green import decay_bound, green_matrix, green_origin

SetGeometry = namedtuple(
    "SetGeometry",
    [
        "d", "alo", "ashape", "astrides", "index",
        "glo", "gshape", "gstrides", "cheb", "use_cubes",
        "center", "r0", "capub", "ghat", "gfar", "rfar", "power", "eps", "far",
        "sizes", "offsets", "prob", "alias", "pick",
    ],
)

DEFAULT_EPS = 1e-4
FAR = 136.0
FAR_D4 = 40.0
MAX_GRID_CELLS = 2 ** 25
# exact constant-test-function bound is used below this many sites
SMALL_SET = 2000


def _strides(shape) -> np.ndarray:
    shape = np.asarray(shape, dtype=np.int64)
    st = np.ones(len(shape), dtype=np.int64)
    for i in range(len(shape) - 2, -1, -1):
        st[i] = st[i + 1] * shape[i + 1]
    return st


def outward_faces(points: np.ndarray, mask_lo=None, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """All pairs ``(i, r)`` with ``points[i] + step_r`` outside the set.

    Step ``r`` moves by ``+1`` (even ``r``) or ``-1`` (odd ``r``) along axis ``r // 2``.
    """
    points = np.asarray(points, dtype=np.int64)
    d = points.shape[1]
    if mask is None:
        mask_lo = points.min(axis=0)
        mask = np.zeros(tuple(points.max(axis=0) - mask_lo + 1), dtype=bool)
        mask[tuple((points - mask_lo).T)] = True
    padded = np.pad(mask, 1)
    idx = points - mask_lo + 1
    sites, dirs = [], []
    for r in range(2 * d):
        off = np.zeros(d, dtype=np.int64)
        off[r >> 1] = -1 if r & 1 else 1
        nb = idx + off
        out = ~padded[tuple(nb.T)]
        sites.append(np.nonzero(out)[0])
        dirs.append(np.full(int(out.sum()), r))
    return np.concatenate(sites).astype(np.int64), np.concatenate(dirs).astype(np.int64)


def capacity_upper_bound(points: np.ndarray, n_faces: int | None = None) -> float:
    """Cheap certified upper bound on ``cap(A)``.

    Each outward face contributes at most ``1/(2d g(0))``: a walk from a
    neighbour of ``x`` avoids ``x`` forever with probability ``1/g(0)``.  For
    small 3-d sets the constant test function ``1 / min_x sum_y g(x,y)`` on
    ``A`` gives a sharper bound.
    """
    points = np.asarray(points, dtype=np.int64)
    d = points.shape[1]
    if n_faces is None:
        n_faces = len(outward_faces(points)[0])
    g0 = green_origin(d)
    best = n_faces / (2 * d * g0)
    best = min(best, len(points) / g0)
    if d == 3 and len(points) <= SMALL_SET:
        s = green_matrix(points).sum(axis=1).min()
        best = min(best, len(points) / s)
    # slack for the rounding of the Green table
    return float(best * (1 + 1e-6))


def build_geometry(points, eps: float = DEFAULT_EPS, margin: int = 66, far: float | None = None,
                   capub: float | None = None, n_faces: int | None = None) -> SetGeometry:
    """Kernel data for the target set ``points`` (shape ``(N, d)``, any order).

    The set index used by the kernels is the row order of ``points``.
    """
    points = np.asarray(points, dtype=np.int64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("target set must be a nonempty (N, d) array")
    d = points.shape[1]
    if d not in (3, 4):
        raise ValueError("only d = 3 and d = 4 are supported")
    alo = points.min(axis=0)
    ashape = points.max(axis=0) - alo + 1
    index = np.full(int(np.prod(ashape)), -1, dtype=np.int32)
    astrides = _strides(ashape)
    index[(points - alo) @ astrides] = np.arange(len(points), dtype=np.int32)

    use_cubes = d == 3
    if use_cubes:
        while margin > 2 and np.prod(ashape + 2 * margin) > MAX_GRID_CELLS:
            margin //= 2
        glo = alo - margin
        gshape = ashape + 2 * margin
        free = np.ones(tuple(gshape), dtype=bool)
        free[tuple((points - glo).T)] = False
        cheb = np.minimum(distance_transform_cdt(free, metric="chessboard"), 255).astype(np.uint8)
        cheb = cheb.reshape(-1)
    else:
        glo = alo.copy()
        gshape = np.ones(d, dtype=np.int64)
        cheb = np.zeros(1, dtype=np.uint8)
    center = (points.min(axis=0) + points.max(axis=0)) / 2.0
    r0 = float(np.sqrt(((points - center) ** 2).sum(axis=1)).max())
    ghat, gfar, rfar, power = decay_bound(d)
    if capub is None:
        capub = capacity_upper_bound(points, n_faces)
    tab = cube_tables()
    if far is None:
        far = FAR if d == 3 else FAR_D4
    return SetGeometry(
        np.int64(d), alo.astype(np.int64), ashape.astype(np.int64), astrides, index,
        glo.astype(np.int64), gshape.astype(np.int64), _strides(gshape), cheb, use_cubes,
        center.astype(np.float64), r0, float(capub), float(ghat), float(gfar), float(rfar), float(power), float(eps), float(far),
        tab.sizes, tab.offsets, tab.prob, tab.alias, tab.pick,
    )
