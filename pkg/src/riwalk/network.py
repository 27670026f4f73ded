"""Effective conductances on finite weighted graphs.

Edge weights are stored as natural logarithms so that conductances of order
``beta^{+-n}`` never overflow.  Before a solve every connected component is
rescaled by its largest weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, cg, spsolve
from scipy.special import logsumexp

from .errors import BrokenPath, InvalidInput, NoCrossingPath, NonConvergence
from .lattice import adjacent, as_site


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on lattice sites with log-weights and two terminal sets.

    Parallel edges are allowed (their conductances add); self loops are
    dropped by the constructors.
    """

    vertices: tuple
    edge_i: np.ndarray
    edge_j: np.ndarray
    log_weight: np.ndarray
    source: frozenset = frozenset()
    sink: frozenset = frozenset()

    def __post_init__(self):
        if self.source & self.sink:
            raise InvalidInput("source and sink must be disjoint")
        n = len(self.vertices)
        if len(self.edge_i) and (max(self.edge_i.max(), self.edge_j.max()) >= n or
                                 min(self.edge_i.min(), self.edge_j.min()) < 0):
            raise InvalidInput("edge endpoint out of range")

    @classmethod
    def from_edges(cls, edges, source=(), sink=(), log: bool = True) -> "WeightedGraph":
        """Build from ``(x, y, weight)`` triples; ``weight`` is a log-weight unless ``log=False``."""
        index: dict = {}
        verts = []

        def vid(s):
            s = as_site(s) if len(s) == 3 else tuple(s)
            if s not in index:
                index[s] = len(verts)
                verts.append(s)
            return index[s]

        ei, ej, lw = [], [], []
        for x, y, w in edges:
            a, b = vid(x), vid(y)
            if a == b:
                continue
            if not log:
                if w <= 0:
                    raise InvalidInput("weights must be positive")
                w = math.log(w)
            ei.append(a)
            ej.append(b)
            lw.append(float(w))
        src = frozenset(vid(s) for s in source)
        snk = frozenset(vid(s) for s in sink)
        return cls(tuple(verts), np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64),
                   np.array(lw, dtype=np.float64), src, snk)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def _index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    def index(self, site) -> int:
        s = as_site(site) if len(site) == 3 else tuple(site)
        try:
            return self._index[s]
        except KeyError:
            raise InvalidInput(f"{s} is not a vertex") from None

    def with_terminals(self, source, sink) -> "WeightedGraph":
        return replace(self, source=frozenset(self.index(s) for s in source),
                       sink=frozenset(self.index(s) for s in sink))

    def log_degree(self, v: int) -> float:
        """``log pi(v)``, the log of the total weight at ``v``."""
        m = (self.edge_i == v) | (self.edge_j == v)
        return float(logsumexp(self.log_weight[m])) if m.any() else -math.inf

    def remove_edge(self, x, y) -> "WeightedGraph":
        a, b = self.index(x), self.index(y)
        keep = ~(((self.edge_i == a) & (self.edge_j == b)) | ((self.edge_i == b) & (self.edge_j == a)))
        if keep.all():
            raise InvalidInput(f"no edge {x} - {y}")
        return replace(self, edge_i=self.edge_i[keep], edge_j=self.edge_j[keep], log_weight=self.log_weight[keep])

    def merge(self, sites) -> "WeightedGraph":
        """Identify a vertex set; the merged vertex keeps the first site's label."""
        idx = sorted({self.index(s) for s in sites})
        if len(idx) < 2:
            raise InvalidInput("merge needs at least two vertices")
        sset = set(idx)
        if sset & self.source and sset & self.sink:
            raise InvalidInput("cannot merge source and sink vertices")
        rep = idx[0]
        mapping = np.arange(self.n)
        mapping[idx] = rep
        keep_v = [v for v in range(self.n) if v == rep or v not in sset]
        renum = -np.ones(self.n, dtype=np.int64)
        renum[keep_v] = np.arange(len(keep_v))
        ei = renum[mapping[self.edge_i]]
        ej = renum[mapping[self.edge_j]]
        keep = ei != ej
        src = frozenset(int(renum[mapping[v]]) for v in self.source)
        snk = frozenset(int(renum[mapping[v]]) for v in self.sink)
        return WeightedGraph(tuple(self.vertices[v] for v in keep_v), ei[keep], ej[keep],
                             self.log_weight[keep], src, snk)

    # ------------------------------------------------------------ edge-list IO
    def to_edgelist(self) -> str:
        lines = ["# riwalk weighted graph"]
        for v in sorted(self.source):
            lines.append("# source " + " ".join(map(str, self.vertices[v])))
        for v in sorted(self.sink):
            lines.append("# sink " + " ".join(map(str, self.vertices[v])))
        for a, b, w in zip(self.edge_i.tolist(), self.edge_j.tolist(), self.log_weight.tolist()):
            lines.append(" ".join(map(str, (*self.vertices[a], *self.vertices[b]))) + f" {w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "WeightedGraph":
        edges, src, snk = [], [], []
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] in ("source", "sink"):
                    (src if parts[0] == "source" else snk).append(tuple(int(t) for t in parts[1:4]))
                continue
            parts = line.split()
            if len(parts) != 7:
                raise InvalidInput(f"line {ln}: expected 7 fields")
            v = [int(t) for t in parts[:6]]
            edges.append((tuple(v[:3]), tuple(v[3:]), float(parts[6])))
        return cls.from_edges(edges, src, snk)


@dataclass(frozen=True)
class NetworkSolution:
    potential: np.ndarray  # per vertex, 1 on the source and 0 on the sink
    effective_conductance: float
    residual_norm: float
    log_scale: float = 0.0  # conductances were divided by exp(log_scale) for the solve
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def effective_resistance(self) -> float:
        c = self.effective_conductance
        return math.inf if c == 0 else 1.0 / c


def _laplacian_parts(g: WeightedGraph, verts: np.ndarray, shift: float):
    pos = -np.ones(g.n, dtype=np.int64)
    pos[verts] = np.arange(len(verts))
    m = (pos[g.edge_i] >= 0) & (pos[g.edge_j] >= 0)
    a, b = pos[g.edge_i[m]], pos[g.edge_j[m]]
    w = np.exp(g.log_weight[m] - shift)
    W = sp.coo_matrix((np.r_[w, w], (np.r_[a, b], np.r_[b, a])), shape=(len(verts),) * 2).tocsr()
    return W, pos


def effective_conductance(g: WeightedGraph, tol: float = 1e-10, max_iter: int | None = None,
                          method: str = "direct") -> NetworkSolution:
    """Effective conductance between ``g.source`` and ``g.sink``.

    The Dirichlet problem (potential 1 on the source, 0 on the sink) is
    reduced to the interior vertices of the source's component and solved by
    sparse LU (``method="cg"``: Jacobi-preconditioned conjugate gradients,
    accurate only to ``tol`` relative to the largest conductance).  The
    current is summed on the sink side, where it is a sum of positive terms;
    on the source side it would be ``c (1 - phi)`` with ``phi`` close to 1
    whenever the bottleneck sits near the sink.  When no sink vertex is
    reachable the conductance is 0 and the potential is 1 on the source
    component.
    """
    if not g.source or not g.sink:
        raise InvalidInput("source and sink must be nonempty")
    n = g.n
    W0 = sp.coo_matrix((np.ones(len(g.edge_i)), (g.edge_i, g.edge_j)), shape=(n, n))
    _, comp = connected_components(W0, directed=False)
    src = np.array(sorted(g.source))
    snk = np.array(sorted(g.sink))
    phi = np.zeros(n)
    src_comps = set(comp[src].tolist())
    live = np.isin(comp, list(src_comps)) & np.isin(comp, comp[snk])
    phi[np.isin(comp, list(src_comps)) & ~live] = 1.0
    phi[src] = 1.0
    verts = np.flatnonzero(live)
    if len(verts) == 0:
        return NetworkSolution(phi, 0.0, 0.0, meta={"disconnected": True})
    in_e = live[g.edge_i]
    shift = float(g.log_weight[in_e].max())
    W, pos = _laplacian_parts(g, verts, shift)
    deg = np.asarray(W.sum(axis=1)).ravel()
    is_s = np.zeros(len(verts), dtype=bool)
    is_t = np.zeros(len(verts), dtype=bool)
    is_s[pos[src[live[src]]]] = True
    is_t[pos[snk[live[snk]]]] = True
    U = np.flatnonzero(~is_s & ~is_t)
    x = np.zeros(len(verts))
    x[is_s] = 1.0
    resid = 0.0
    iters = 0
    if len(U):
        Wu = W[U]
        A = (sp.diags(deg[U]) - Wu[:, U]).tocsr()
        rhs = np.asarray(Wu[:, np.flatnonzero(is_s)].sum(axis=1)).ravel()
        if method == "direct":
            y = spsolve(A.tocsc(), rhs)
        elif method == "cg":
            dinv = 1.0 / deg[U]
            M = LinearOperator(A.shape, matvec=lambda v: dinv * v, dtype=np.float64)
            count = [0]

            def cb(_):
                count[0] += 1

            cap = max_iter or max(1000, 10 * len(U))
            y, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=cap, M=M, callback=cb)
            iters = count[0]
            if info != 0:
                raise NonConvergence(f"conjugate gradients stopped after {iters} iterations")
        else:
            raise InvalidInput(f"unknown method {method!r}")
        y = np.clip(y, 0.0, 1.0)
        resid = float(np.linalg.norm(rhs - A @ y))
        x[U] = y
    phi[verts] = x
    # current into the sink; rescaled back to the original weights
    Wt = W[np.flatnonzero(is_t)]
    flow = float((Wt.multiply(x[None, :])).sum())
    return NetworkSolution(phi, flow * math.exp(shift), resid, shift, iters)


def dirichlet_energy(g: WeightedGraph, phi: np.ndarray) -> float:
    return float(np.sum(np.exp(g.log_weight) * (phi[g.edge_i] - phi[g.edge_j]) ** 2))


def dense_conductance(g: WeightedGraph) -> float:
    """Oracle: Laplacian pseudo-inverse-free dense solve on small graphs."""
    n = g.n
    L = np.zeros((n, n))
    for a, b, lw in zip(g.edge_i, g.edge_j, g.log_weight):
        w = math.exp(lw)
        L[a, a] += w
        L[b, b] += w
        L[a, b] -= w
        L[b, a] -= w
    fixed = {v: 1.0 for v in g.source} | {v: 0.0 for v in g.sink}
    free = [v for v in range(n) if v not in fixed]
    phi = np.zeros(n)
    for v, val in fixed.items():
        phi[v] = val
    # drop vertices that cannot see the terminals (singular rows)
    W0 = sp.csr_matrix((L != 0) & ~np.eye(n, dtype=bool))
    _, comp = connected_components(W0, directed=False)
    term = {comp[v] for v in fixed}
    free = [v for v in free if comp[v] in term]
    if free:
        fx = list(fixed)
        A = L[np.ix_(free, free)]
        b = -L[np.ix_(free, fx)] @ np.array([fixed[v] for v in fx])
        phi[free] = np.linalg.solve(A, b)
    s = list(g.source)
    return float(sum(L[v] @ phi for v in s))


def exact_conductance(edges, source, sink) -> Fraction:
    """Oracle: exact rational effective conductance by Gaussian elimination.

    ``edges`` are ``(x, y, w)`` with rational ``w``; meant for a dozen vertices.
    """
    verts = sorted({e[0] for e in edges} | {e[1] for e in edges} | set(source) | set(sink))
    ix = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    L = [[Fraction(0)] * n for _ in range(n)]
    for x, y, w in edges:
        a, b, w = ix[x], ix[y], Fraction(w)
        if a == b:
            continue
        L[a][a] += w
        L[b][b] += w
        L[a][b] -= w
        L[b][a] -= w
    fixed = {ix[v]: Fraction(1) for v in source} | {ix[v]: Fraction(0) for v in sink}
    free = [i for i in range(n) if i not in fixed and any(L[i][j] != 0 for j in range(n))]
    m = len(free)
    # augmented system for the free potentials
    aug = [[L[i][j] for j in free] + [-sum(L[i][k] * v for k, v in fixed.items())] for i in free]
    phi = dict(fixed)
    rank_rows = []
    r = 0
    for c in range(m):
        p = next((k for k in range(r, m) if aug[k][c] != 0), None)
        if p is None:
            continue
        aug[r], aug[p] = aug[p], aug[r]
        piv = aug[r][c]
        aug[r] = [v / piv for v in aug[r]]
        for k in range(m):
            if k != r and aug[k][c] != 0:
                f = aug[k][c]
                aug[k] = [a - f * b for a, b in zip(aug[k], aug[r])]
        rank_rows.append((r, c))
        r += 1
    for i in free:
        phi.setdefault(i, Fraction(0))
    for r, c in rank_rows:
        phi[free[c]] = aug[r][m]
    return sum((sum(L[ix[s]][j] * phi.get(j, Fraction(0)) for j in range(n)) for s in source), Fraction(0))


def escape_probability_formula(g: WeightedGraph, a, b, tol: float = 1e-10) -> float:
    """``C(a <-> b) / pi(a)``, the probability that the walk from ``a`` reaches ``b`` before returning."""
    ia, ib = g.index(a), g.index(b)
    if ia == ib:
        raise InvalidInput("a and b must differ")
    h = replace(g, source=frozenset([ia]), sink=frozenset([ib]))
    sol = effective_conductance(h, tol)
    lpi = g.log_degree(ia)
    if sol.effective_conductance == 0:
        return 0.0
    return min(1.0, math.exp(math.log(sol.effective_conductance) - lpi))


def rayleigh_check(g: WeightedGraph, modification: tuple, tol: float = 1e-9) -> tuple[float, float, bool]:
    """Conductance before and after ``("remove", x, y)`` or ``("merge", sites)``."""
    kind = modification[0]
    before = effective_conductance(g).effective_conductance
    if kind == "remove":
        h = g.remove_edge(modification[1], modification[2])
    elif kind == "merge":
        h = g.merge(modification[1])
    else:
        raise InvalidInput(f"unknown modification {kind!r}")
    after = effective_conductance(h).effective_conductance
    scale = tol * max(1.0, abs(before))
    ok = after <= before + scale if kind == "remove" else after >= before - scale
    return before, after, bool(ok)


def log_path_conductance(path, log_conductance) -> float:
    """Log of the series conductance ``(sum 1/c_i)^{-1}`` along ``path``."""
    path = [as_site(p) for p in path]
    if len(path) < 2:
        raise InvalidInput("path needs at least one edge")
    if len(set(path)) != len(path):
        raise InvalidInput("path must be simple")
    lw = []
    for x, y in zip(path[:-1], path[1:]):
        if not adjacent(x, y):
            raise BrokenPath(f"{x} and {y} are not adjacent")
        v = log_conductance(x, y)
        if v == -math.inf:
            raise BrokenPath(f"edge {x} - {y} is closed")
        lw.append(v)
    return float(-logsumexp(-np.array(lw)))


def path_conductance_lower_bound(path, env) -> float:
    """Series conductance of an open path; a lower bound on the effective conductance of its endpoints.

    ``env`` is an environment (anything with ``log_conductance(x, y)``) or
    such a callable.
    """
    f = env.log_conductance if hasattr(env, "log_conductance") else env
    return math.exp(log_path_conductance(path, f))


def kregion_level(path) -> int:
    """Smallest ``n`` with every site of ``path`` in ``K(n)``."""
    p = np.asarray([as_site(s) for s in path], dtype=np.int64)
    return int(max((1 - p[:, 0]).max(), (np.abs(p[:, 1]) - p[:, 0]).max(), (np.abs(p[:, 2]) - p[:, 0]).max()))


def resistance_to_infinity_bound(beta: float, N: int | None = None, path=None, depth: int | None = None,
                                 gamma: float = 1.0, K: int = 64) -> tuple[float, bool]:
    """``gamma sum_{k>=0} k^2 beta^{N-k+1}``: the first ``K`` terms plus the closed-form tail.

    ``N`` is taken from ``path`` (the smallest ``n`` with the path inside
    ``K(n)``) when not given; with ``depth`` the path must reach that
    e1-level.
    """
    if not beta > 0:
        raise InvalidInput("beta must be positive")
    if N is None:
        if path is None or len(path) < 2:
            raise NoCrossingPath("need N or an occupied path from the origin")
        if as_site(path[0]) != (0, 0, 0):
            raise NoCrossingPath("path must start at the origin")
        if depth is not None and max(as_site(s)[0] for s in path) < depth:
            raise NoCrossingPath(f"path does not reach level {depth}")
        N = kregion_level(path)
    if beta <= 1:
        return math.inf, False
    x = 1.0 / beta
    ks = np.arange(K + 1, dtype=np.float64)
    head = math.fsum((ks * ks * x ** ks).tolist())
    total = x * (1 + x) / (1 - x) ** 3
    tail = max(total - head, 0.0)
    return gamma * beta ** (N + 1) * (head + tail), True
