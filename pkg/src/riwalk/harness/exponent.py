"""Displacement exponents on dyadic step grids, and nested cone exits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ExcessCensoring, InvalidInput
from ..lattice import Cone
from ..rng import as_stream
from .._parallel import parallel_map

NEAR_UNBIASED = 1.0 + 1e-9


def dyadic_grid(lo: int = 10, hi: int = 18) -> np.ndarray:
    if not 0 <= lo < hi:
        raise InvalidInput("need 0 <= lo < hi")
    return (2 ** np.arange(lo, hi + 1)).astype(np.int64)


def window_weights(log_n: np.ndarray, width: int) -> np.ndarray:
    """Rows of least-squares slope weights for each run of ``width`` consecutive grid points."""
    k = len(log_n) - width + 1
    if k < 1:
        raise InvalidInput(f"grid has fewer than {width} points")
    W = np.zeros((k, len(log_n)))
    for j in range(k):
        x = log_n[j:j + width]
        xc = x - x.mean()
        W[j, j:j + width] = xc / (xc @ xc)
    return W


@dataclass
class ExponentFit:
    """Mean ``ln ||X_n||`` on a dyadic grid and sliding-window slopes, per bias.

    Slopes are linear in the replica values, so each replica carries its own
    window slopes; standard errors and between-bias differences use them
    directly (environments are shared across biases within a replica).
    """

    grid: np.ndarray
    betas: tuple
    width: int
    mean_log: np.ndarray  # (betas, grid)
    stderr: np.ndarray
    slopes: np.ndarray  # (betas, windows)
    slope_stderr: np.ndarray
    replica_slopes: np.ndarray  # (betas, reps, windows)
    censored: np.ndarray  # (betas,) censored fraction
    reps: int
    meta: dict = field(default_factory=dict)

    def _i(self, beta) -> int:
        for i, b in enumerate(self.betas):
            if math.isclose(b, beta, rel_tol=1e-12, abs_tol=0.0):
                return i
        raise InvalidInput(f"beta {beta} not in the fit")

    def window_end(self, j: int) -> int:
        """Last grid point of window ``j`` (negative ``j`` counts from the end)."""
        j = range(self.slopes.shape[1])[j]
        return int(self.grid[j + self.width - 1])

    def slope(self, beta, j: int = -1) -> tuple[float, float]:
        i = self._i(beta)
        return float(self.slopes[i, j]), float(self.slope_stderr[i, j])

    def trend(self, beta, early: int = 0, late: int = -1) -> tuple[float, float]:
        """Late minus early window slope with its paired standard error."""
        d = self.replica_slopes[self._i(beta), :, late] - self.replica_slopes[self._i(beta), :, early]
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))

    def difference(self, beta_a, beta_b, j: int = -1) -> tuple[float, float]:
        """Slope at ``beta_a`` minus slope at ``beta_b`` on window ``j``, paired over replicas."""
        d = self.replica_slopes[self._i(beta_a), :, j] - self.replica_slopes[self._i(beta_b), :, j]
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))


def _exponent_replica(args):
    from ..environ.slab import SlabEnvironment

    r, u, betas, grid, N, T, stream = args
    env = SlabEnvironment.create(u, stream.spawn(101, r), N=N, T=T)
    start = env.origin_cell(stream.spawn(102, r))
    out = np.zeros((len(betas), len(grid)))
    cens = np.zeros(len(betas), dtype=bool)
    for i, b in enumerate(betas):
        pos, _, c = env.walk(b, start, int(grid[-1]), stream.spawn(103, r, i), grid)
        out[i] = np.log(np.maximum(np.sqrt((pos.astype(float) ** 2).sum(axis=1)), 1.0))
        cens[i] = c
    return out, cens


def exponent_experiment(u: float, betas, reps: int, rng, grid=None, N: int = 32, T: int = 8192, width: int = 4,
                        max_censored: float = 0.01, threads: int = 1) -> ExponentFit:
    """Slope of mean ``ln ||X_n||`` against ``ln n`` on sliding dyadic windows.

    Each replica grows a fresh lazily generated environment (level ``u``,
    unbounded along e1, transversal torus of side ``N``) and starts every
    bias from the same uniformly chosen occupied cell of the origin row.
    ``||X_n|| = 0`` is read as 1 so the logarithm stays finite.
    """
    grid = dyadic_grid() if grid is None else np.asarray(grid, dtype=np.int64)
    if (np.diff(grid) <= 0).any() or grid[0] < 1:
        raise InvalidInput("step grid must be positive and strictly increasing")
    betas = tuple(float(b) for b in betas)
    stream = as_stream(rng)
    res = parallel_map(_exponent_replica, [(r, u, betas, grid, N, T, stream) for r in range(reps)], threads)
    L = np.stack([x[0] for x in res], axis=1)  # (betas, reps, grid)
    cens = np.stack([x[1] for x in res], axis=1).mean(axis=1)
    if (cens > max_censored).any():
        raise ExcessCensoring(f"censored fractions {cens.tolist()} exceed {max_censored}")
    W = window_weights(np.log(grid.astype(float)), width)
    rs = L @ W.T
    sd = rs.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(rs.shape[::2], math.nan)
    se = L.std(axis=1, ddof=1) / math.sqrt(reps) if reps > 1 else np.full((len(betas), len(grid)), math.nan)
    return ExponentFit(grid, betas, width, L.mean(axis=1), se, rs.mean(axis=1), sd, rs, cens, reps,
                       {"u": u, "N": N, "T": T})


# ---------------------------------------------------------------- nested cones

@dataclass
class PhiResult:
    n: int
    failure: float
    stderr: float
    censored: float
    failed_cone: np.ndarray  # per replica: first cone exited on the negative side, -1 if none, -2 if censored
    minus_hits: np.ndarray  # per replica and cone: first hitting time of the negative face (-1 if never)
    reps: int


def _cube_root(n: int) -> int:
    c = round(n ** (1 / 3))
    if c ** 3 != n:
        raise InvalidInput(f"n = {n} is not a perfect cube")
    return c


def nested_cone_regions(M, n: int, clip: int | None) -> tuple[dict, int]:
    """Negative faces and inner boundaries of ``C_M(i n^{1/3})``, i = 1..n^{2/3}, plus the clip walls."""
    from ..environ.walks import cone_regions
    from ..lattice import Explicit

    c = _cube_root(n)
    I = c * c
    regions = {}
    walls = []
    for i in range(1, I + 1):
        reg = cone_regions(M, i * c, clip)
        regions[f"minus{i}"] = reg["minus"]
        regions[f"bd{i}"] = Explicit(np.concatenate([reg["minus"].sites(), reg["plus"].sites()]))
        if "clip" in reg:
            walls.append(reg["clip"].sites())
    if walls:
        regions["clip"] = Explicit(np.unique(np.concatenate(walls), axis=0))
    return regions, I


def _phi_replica(args):
    from ..environ.environment import build_environment
    from ..environ.walks import WalkSetup, run_walks
    from ..interlace import sample_interlacement

    r, M, n, u, beta, clip, max_steps, regions, I, stream = args
    smp = sample_interlacement(Cone(M, n, clip), u, stream.spawn(111, r), condition_on=(0, 0, 0), record=False)
    env = build_environment(smp, beta)
    stop = [f"bd{I}"] + (["clip"] if "clip" in regions else [])
    setup = WalkSetup.build(env, regions, stop)
    b = run_walks(env, (0, 0, 0), 1, stream.spawn(112, r), max_steps=max_steps, setup=setup,
                  checkpoints=np.zeros(0, dtype=np.int64))
    minus = np.array([b.hit(f"minus{i}")[0] for i in range(1, I + 1)])
    bd = np.array([b.hit(f"bd{i}")[0] for i in range(1, I + 1)])
    # a cone whose boundary holds the start is left through its positive side at time 0
    at_start = np.array([regions[f"bd{i}"].contains((0, 0, 0)) for i in range(1, I + 1)])
    resolved = (bd >= 0) | at_start
    failed = ~at_start & (bd >= 0) & (minus == bd)
    if failed.any():
        return int(np.argmax(failed)) + 1, minus
    if not resolved.all():
        return -2, minus
    return -1, minus


def phi_n_experiment(u: float, beta: float, M, n: int, rng, reps: int, clip: int | None = None,
                     max_steps: int = 10_000_000, threads: int = 1) -> PhiResult:
    """Fraction of walks that leave some ``C_M(i n^{1/3})`` through its negative face first.

    One environment per replica on the (clipped) cone ``C_M(n)``, conditioned
    on the origin being occupied.  A replica that reaches a clip wall or
    exhausts its budget before resolving every cone, without having failed
    already, is censored; the failure fraction is over all replicas.
    """
    regions, I = nested_cone_regions(M, n, clip)
    stream = as_stream(rng)
    res = parallel_map(_phi_replica, [(r, M, n, u, beta, clip, max_steps, regions, I, stream)
                                      for r in range(reps)], threads)
    fc = np.array([x[0] for x in res])
    mh = np.stack([x[1] for x in res])
    f = float((fc > 0).mean())
    return PhiResult(n, f, math.sqrt(f * (1 - f) / reps), float((fc == -2).mean()), fc, mh, reps)
