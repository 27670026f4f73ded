"""A lazily generated environment that is unbounded along e1.

The occupied set is the trace of a Poisson soup of simple-walk segments of
length ``T`` on ``Z x (Z/N)^2``: segments start at rate ``u / T`` per site,
so every site receives ``u`` visits on average, as in the interlacement at
level ``u``.  With ``N^2 << T`` the segments are well mixed transversally and
locally look like interlacement trajectories.  Rows along e1 are generated in
chunks as the walker advances; a row is final once every segment that could
reach it has been drawn (segments are confined to ``margin`` rows of their
start, with ``margin`` many standard deviations of their e1 spread).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import InvalidInput
from ..rng import as_stream

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _fill(occ, row0, row1, N, T, rate, margin, gen):
    """Draw the segments whose start row lies in ``[row0, row1)``."""
    n = gen.poisson(rate * (row1 - row0) * N * N)
    lim = occ.shape[0]
    for _ in range(n):
        i = row0 + int(gen.random() * (row1 - row0))
        y = int(gen.random() * N)
        z = int(gen.random() * N)
        i0 = i
        occ[i, y, z] = 1
        for _k in range(T):
            r = int(gen.random() * 6)
            if r == 0:
                i += 1
            elif r == 1:
                i -= 1
            elif r == 2:
                y = y + 1 if y + 1 < N else 0
            elif r == 3:
                y = y - 1 if y > 0 else N - 1
            elif r == 4:
                z = z + 1 if z + 1 < N else 0
            else:
                z = z - 1 if z > 0 else N - 1
            if i - i0 > margin or i0 - i > margin:
                break  # confinement; practically never triggered
            if 0 <= i < lim:
                occ[i, y, z] = 1


@njit(**_JIT)
def _slab_walk(occ, N, beta, state, max_steps, lo, hi, gen, ck_times, ck_pos):
    """Biased walk on the slab; ``state`` = (steps, i, y, z, dy, dz, next_checkpoint, i_start).

    Runs until ``max_steps`` (returns 0), or the row index reaches ``hi``
    (returns 1, more rows are needed) or ``lo`` (returns 2, censored).
    """
    k, i, y, z, dy, dz, ck, i0 = state[0], state[1], state[2], state[3], state[4], state[5], state[6], state[7]
    n_ck = ck_times.shape[0]
    w = np.empty(6)
    code = 0
    while k < max_steps:
        if i >= hi:
            code = 1
            break
        if i <= lo:
            code = 2
            break
        yp = y + 1 if y + 1 < N else 0
        ym = y - 1 if y > 0 else N - 1
        zp = z + 1 if z + 1 < N else 0
        zm = z - 1 if z > 0 else N - 1
        w[0] = beta if occ[i + 1, y, z] else 0.0
        w[1] = 1.0 if occ[i - 1, y, z] else 0.0
        w[2] = 1.0 if occ[i, yp, z] else 0.0
        w[3] = 1.0 if occ[i, ym, z] else 0.0
        w[4] = 1.0 if occ[i, y, zp] else 0.0
        w[5] = 1.0 if occ[i, y, zm] else 0.0
        tot = w[0] + w[1] + w[2] + w[3] + w[4] + w[5]
        v = gen.random() * tot
        r = 0
        acc = w[0]
        while (v >= acc or w[r] == 0.0) and r < 5:
            r += 1
            acc += w[r]
        if r == 0:
            i += 1
        elif r == 1:
            i -= 1
        elif r == 2:
            y = yp
            dy += 1
        elif r == 3:
            y = ym
            dy -= 1
        elif r == 4:
            z = zp
            dz += 1
        else:
            z = zm
            dz -= 1
        k += 1
        while ck < n_ck and ck_times[ck] == k:
            ck_pos[ck, 0] = i - i0
            ck_pos[ck, 1] = dy
            ck_pos[ck, 2] = dz
            ck += 1
    state[0], state[1], state[2], state[3], state[4], state[5], state[6] = k, i, y, z, dy, dz, ck
    return code


@dataclass(eq=False)
class SlabEnvironment:
    """Lazily grown soup environment on ``Z x (Z/N)^2``; row index ``i`` is level ``i - base``."""

    u: float
    N: int
    T: int
    occ: np.ndarray
    base: int
    chunk: int
    margin: int
    generated: int  # rows [0, generated) hold all their segment starts
    seed_stream: object

    @classmethod
    def create(cls, u: float, rng, N: int = 32, T: int = 8192, base: int = 4096, chunk: int = 4096,
               max_rows: int = 1 << 16) -> "SlabEnvironment":
        if N < 3 or T < 1 or not u > 0:
            raise InvalidInput("need N >= 3, T >= 1 and u > 0")
        margin = int(math.ceil(12 * math.sqrt(T / 3.0))) + 2
        occ = np.zeros((max_rows, N, N), dtype=np.uint8)
        env = cls(u, N, T, occ, base, chunk, margin, 0, as_stream(rng))
        env.extend(base + chunk)
        return env

    @property
    def final_rows(self) -> int:
        """Rows below this index are final."""
        return self.generated - self.margin

    def extend(self, rows: int) -> None:
        """Generate segment starts until at least ``rows`` rows are final."""
        while self.final_rows < rows:
            r0 = self.generated
            r1 = min(r0 + self.chunk, self.occ.shape[0])
            if r1 <= r0:
                raise InvalidInput("slab environment exhausted its row budget")
            c = r0 // self.chunk
            _fill(self.occ, r0, r1, self.N, self.T, self.u / self.T, self.margin,
                  self.seed_stream.spawn(71, c).generator())
            self.generated = r1

    def origin_cell(self, rng) -> tuple:
        """A uniformly chosen occupied cell of row ``base``.

        For small ``N`` a whole row can be vacant; the first later row with an
        occupied cell is used instead (never needed at the default ``N = 32``).
        """
        row = self.base
        while not self.occ[row].any():
            row += 1
            if row >= self.final_rows:
                self.extend(self.final_rows + self.chunk)
        sl = np.argwhere(self.occ[row] > 0)
        j = int(as_stream(rng).generator().integers(len(sl)))
        return row, int(sl[j, 0]), int(sl[j, 1])

    def walk(self, beta: float, start: tuple, max_steps: int, rng, checkpoints: np.ndarray):
        """Walk from ``start`` (a cell); returns (displacements at checkpoints, steps, censored)."""
        ck = np.asarray(checkpoints, dtype=np.int64)
        pos = np.zeros((len(ck), 3), dtype=np.int64)
        state = np.array([0, start[0], start[1], start[2], 0, 0, 0, start[0]], dtype=np.int64)
        while state[6] < len(ck) and ck[state[6]] == 0:
            state[6] += 1
        gen = as_stream(rng).generator()
        lo = self.margin
        while True:
            code = _slab_walk(self.occ, self.N, float(beta), state, max_steps, lo, self.final_rows - 1, gen, ck, pos)
            if code == 1:
                self.extend(self.final_rows + self.chunk)
                continue
            return pos, int(state[0]), code == 2
