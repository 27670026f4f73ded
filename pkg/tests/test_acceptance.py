"""Acceptance checks; each prints one PASS/FAIL line with its statistic and wall time."""

import itertools
import math
import time
import warnings

import numpy as np
import pytest

from riwalk.environ import (
    build_environment, check_detailed_balance, cone_regions, detect_trap, hand_built_trap, mouth_jump_check,
    plant_trap, run_walks, straight_descent_check, trap_escape_check, trap_window,
)
from riwalk.harness.cli import main
from riwalk.harness.exponent import NEAR_UNBIASED, exponent_experiment
from riwalk.interlace import (
    LoopSpec, local_time_table, loop_insertion_check, sample_interlacement, vacant_probability_check, window_data,
)
from riwalk.lattice import Box, Cone, Explicit, segment, trap_anchors
from riwalk.network import WeightedGraph, dense_conductance, effective_conductance
from riwalk.potential import capacity_estimate, exact_capacity
from riwalk.rng import RngStream
from riwalk.srw import stern_conditional_stats

pytestmark = pytest.mark.acceptance

SEED = 20240601


@pytest.fixture
def report(capsys):
    t0 = time.perf_counter()

    def _report(k, title, ok, detail, budget):
        elapsed = time.perf_counter() - t0
        fast = elapsed <= budget
        with capsys.disabled():
            print(f"\n{'PASS' if ok and fast else 'FAIL'} [{k:2d}] {title}: {detail} "
                  f"({elapsed:.1f}s, budget {budget}s)")
        assert ok, detail
        assert fast, f"took {elapsed:.1f}s, budget {budget}s"
    return _report


def stream(k):
    return RngStream(SEED, k)


def test_vacant_set_identity(report):
    sets = {"site": Explicit([(0, 0, 0)]), "pair": Explicit([(0, 0, 0), (1, 0, 0)]), "segment8": segment(8)}
    zs = {}
    for i, ((name, A), u) in enumerate(itertools.product(sets.items(), (0.5, 1.0))):
        c = vacant_probability_check(A, u, stream(1).spawn(i), reps=100_000)
        zs[f"{name}@{u}"] = c.z_score
    worst = max(zs, key=lambda k: abs(zs[k]))
    ok = all(abs(z) <= 3 for z in zs.values())
    report(1, "vacant-set identity", ok, f"max |z| = {abs(zs[worst]):.2f} ({worst}) over {len(zs)} cases", 180)


BATTERY = {
    "site": [(0, 0, 0)],
    "pair": [(0, 0, 0), (1, 0, 0)],
    "diagonal": [(0, 0, 0), (1, 1, 0)],
    "gap2": [(0, 0, 0), (2, 0, 0)],
    "far_pair": [(0, 0, 0), (5, 3, -2)],
    "row3": [(0, 0, 0), (1, 0, 0), (2, 0, 0)],
    "ell": [(0, 0, 0), (1, 0, 0), (1, 1, 0)],
    "square": [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)],
    "tee": [(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 1, 0)],
    "plus": [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)],
    "corner3d": [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
    "cube": [tuple(p) for p in itertools.product((0, 1), repeat=3)],
    "row8": [(k, 0, 0) for k in range(8)],
    "scatter": [(0, 0, 0), (3, 0, 0), (0, 4, 1), (-2, -2, 2), (1, 1, 1), (5, -1, 0)],
}


def test_capacity_oracle_agreement(report):
    worst, ok = 0.0, True
    for i, (name, pts) in enumerate(BATTERY.items()):
        A = Explicit(pts)
        exact, _ = exact_capacity(A)
        mc, se = capacity_estimate(A, stream(2).spawn(i), walks=400_000)
        dev = abs(mc - exact)
        ok &= dev <= 3 * se + 1e-3
        worst = max(worst, dev / (3 * se + 1e-3))
    report(2, "capacity oracle agreement", ok,
           f"{len(BATTERY)} sets, max |MC - exact| / (3 sigma + 1e-3) = {worst:.2f}", 120)


def test_segment_capacity_scaling(report):
    ratios = {}
    for i, h in enumerate((16, 32, 64, 128)):
        cap, se = capacity_estimate(segment(h), stream(3).spawn(i), walks=200_000)
        exact, _ = exact_capacity(segment(h))
        assert abs(cap - exact) <= 4 * se + 1e-3
        ratios[h] = cap * math.log(h) / h
    spread = (max(ratios.values()) - min(ratios.values())) / min(ratios.values())
    detail = ", ".join(f"h={h}: {r:.3f}" for h, r in ratios.items()) + f"; spread {100 * spread:.1f}%"
    report(3, "segment capacity ~ h/ln h", spread < 0.25, detail, 240)


def _random_graph(gen):
    n = int(gen.integers(2, 13))
    verts = [(i, 0, 0) for i in range(n)]
    pairs = list(itertools.combinations(range(n), 2))
    m = int(gen.integers(1, len(pairs) + 1))
    chosen = gen.choice(len(pairs), size=m, replace=False)
    edges = [(verts[pairs[j][0]], verts[pairs[j][1]], float(gen.uniform(-8, 8))) for j in chosen]
    s, t = gen.choice(n, size=2, replace=False)
    return WeightedGraph.from_edges(edges, [verts[s]], [verts[t]])


def test_network_solver_exactness(report):
    a, b, c = (0, 0, 0), (1, 0, 0), (2, 0, 0)
    ser = effective_conductance(WeightedGraph.from_edges([(a, b, 2.0), (b, c, 3.0)], [a], [c], log=False))
    par = effective_conductance(WeightedGraph.from_edges([(a, b, 2.0), (a, b, 3.0)], [a], [b], log=False))
    ok = abs(ser.effective_conductance - 1.2) <= 1e-9 and abs(par.effective_conductance - 5.0) <= 1e-9
    gen = stream(4).generator()
    worst, disconnected = 0.0, 0
    for _ in range(100):
        g = _random_graph(gen)
        x, y = effective_conductance(g).effective_conductance, dense_conductance(g)
        # the dense oracle leaves rounding noise (~1e-13) where source and sink are disconnected
        ok &= abs(x - y) <= 1e-8 * abs(y) + 1e-12
        if x > 0:
            worst = max(worst, abs(x - y) / y)
        else:
            disconnected += 1
    report(4, "network solver exactness", ok,
           f"series {ser.effective_conductance:.12f}, parallel {par.effective_conductance:.12f}, "
           f"100 random graphs max rel. error {worst:.1e} ({disconnected} disconnected, both ~0)", 60)


def test_trap_escape_formula(report):
    M, n, beta = 10, math.e ** 6, 2.0
    window = trap_window(trap_anchors((0, 0, 0), M, n), margin=2)
    zs, natural = [], 0
    for r in range(10):
        smp = sample_interlacement(window, 1.0, stream(5).spawn(1, r), record=False)
        natural += detect_trap(smp, (0, 0, 0), M, n).is_trap
        env, a = plant_trap(build_environment(smp, beta), (0, 0, 0), M, n)
        assert detect_trap(env, a.base, M, n).is_trap
        zs.append(trap_escape_check(env, a, stream(5).spawn(2, r), reps=100_000).z)
    zs = np.array(zs)
    ok = bool((np.abs(zs) <= 3).all())
    report(5, "trap escape probability = C/pi", ok,
           f"10 planted traps (natural at origin: {natural}), z in [{zs.min():.2f}, {zs.max():.2f}]", 300)


def test_stern_conditional_mean(report):
    res = {}
    for i, (a, target) in enumerate(((5, 8.0), (10, 33.0))):
        m, se, acc = stern_conditional_stats(a, stream(6).spawn(i), reps=1_000_000)
        res[a] = (m, target, acc)
    ok = all(abs(m - t) <= 0.02 * t for m, t, _ in res.values())
    detail = ", ".join(f"a={a}: {m:.3f} vs {t:g}" for a, (m, t, _) in res.items())
    report(6, "conditioned ruin time", ok, detail, 60)


def _cone_exit_vs_conductance(n, beta, env_stream, walk_stream, walks):
    """One connected environment on C_1(n): (MC upper estimate, its sigma, conductance ratio)."""
    cone = Cone(1, n)
    reg = cone_regions(1, n)
    minus, plus = reg["minus"].sites(), reg["plus"].sites()
    k = 0
    while True:
        smp = sample_interlacement(cone, 1.0, env_stream.spawn(k), condition_on=(0, 0, 0), record=False)
        env = build_environment(smp, beta)
        k += 1
        occ_minus = [tuple(p) for p in minus.tolist() if env.occupied(p)]
        occ_all = occ_minus + [tuple(p) for p in plus.tolist() if env.occupied(p)]
        if not occ_all:
            continue
        c_all = effective_conductance(env.graph(cone, [(0, 0, 0)], occ_all)).effective_conductance
        if c_all == 0:
            continue  # the origin's cluster never reaches the boundary
        c_minus = (effective_conductance(env.graph(cone, [(0, 0, 0)], occ_minus)).effective_conductance
                   if occ_minus else 0.0)
        b = run_walks(env, (0, 0, 0), walks, walk_stream, reg, max_steps=10 ** 7,
                      checkpoints=np.zeros(0, dtype=np.int64))
        # budget-censored walks are counted as negative exits, which can only raise the estimate
        p = float((b.stopped_in("minus") | b.censored).mean())
        return p, math.sqrt(p * (1 - p) / walks), c_minus / c_all, k - 1


def test_exit_probability_inequality(report):
    rows, ok, skipped, never = [], True, 0, 0
    for i, (n, beta) in enumerate(itertools.product((8, 16), (1.5, 3.0))):
        for e in range(20):
            p, s, ratio, sk = _cone_exit_vs_conductance(n, beta, stream(7).spawn(i, e, 0), stream(7).spawn(i, e, 1),
                                                        4000)
            skipped += sk
            ok &= p <= ratio + 3 * s
            if s > 0:
                rows.append((p - ratio) / s)
            else:
                never += 1  # no negative exit at all (or every walk exited negatively)
    report(7, "negative cone exit <= conductance ratio", ok,
           f"80 environments (4 settings x 20), max (p - ratio)/sigma = {max(rows):.2f} over {len(rows)} "
           f"with mixed outcomes, {never} with p in {{0, 1}}, {skipped} disconnected draws replaced", 300)


def test_detailed_balance(report):
    edges, ok = 0, True
    for i in range(10):
        u, beta = (0.5, 1.0, 2.5)[i % 3], (1.2, 2.0, 4.0, 9.5)[i % 4]
        smp = sample_interlacement(Box((0, 0, 0), 6), u, stream(8).spawn(i), record=False)
        good, m = check_detailed_balance(build_environment(smp, beta), exact=True)
        ok &= good
        edges += m
    report(8, "detailed balance", ok, f"exact on {edges} edges of 10 environments", 30)


def test_loop_insertion(report):
    window = Box((0, 0, 0), 1)
    loop = LoopSpec((0, 0, 0), [(0, 0, 0), (1, 0, 0), (0, 0, 0)], allow_boundary=True)
    table = local_time_table(window, 1.0, stream(9), 1_000_000)
    c = loop_insertion_check(window, 1.0, loop, None, table=table)
    # eta -> eta + l is injective, so summing over every eta with eta(x0) = 1 gives
    # P[L(x0) = 2, L(e1) >= 1] >= (2d)^-m P[L(x0) = 1]
    wd = window_data(window)
    L0, L1 = table[:, wd.index_of((0, 0, 0))], table[:, wd.index_of((1, 0, 0))]
    n = len(table)
    q_new = float(((L0 == 2) & (L1 >= 1)).mean())
    q_eta = float((L0 == 1).mean())
    w = 6.0 ** -loop.m
    sig = math.sqrt(q_new * (1 - q_new) / n + w * w * q_eta * (1 - q_eta) / n)
    pooled = q_new >= w * q_eta - 3 * sig
    report(9, "loop insertion", c.passed and pooled,
           f"best-sampled eta: {c.lhs:.2e} vs {c.rhs:.2e} (sigma {c.sigma:.1e}, {c.count_eta} samples); "
           f"pooled over eta(x0)=1: {q_new:.4f} vs {w * q_eta:.4f} (sigma {sig:.1e})", 240)


def test_trap_machinery(report):
    n = math.e ** 7
    env, a = hand_built_trap(10, n, 2.0)
    det = detect_trap(env, a.base, 10, n).is_trap
    zd, zm = [], []
    for i, beta in enumerate((2.0, 4.0)):
        e = env.with_beta(beta)
        zd.append(straight_descent_check(e, a, stream(10).spawn(i, 0), reps=100_000).z)
        zm.append(mouth_jump_check(e, a, stream(10).spawn(i, 1), reps=2000).z)
    ok = det and all(abs(z) <= 3 for z in zd + zm)
    report(10, "trap machinery", ok,
           f"hand-built trap detected: {det}; descent z = {', '.join(f'{z:.2f}' for z in zd)}; "
           f"mouth jump z = {', '.join(f'{z:.2f}' for z in zm)} (beta = 2, 4)", 180)


def test_speed_signature(report):
    fit = exponent_experiment(1.0, [NEAR_UNBIASED, 1.2, 4.0], 200, stream(11))
    s0, se0 = fit.slope(NEAR_UNBIASED)
    d, sd = fit.difference(4.0, 1.2)
    tr, st = fit.trend(4.0)
    ok = abs(s0 - 0.5) <= 0.1 and d < -2 * sd and tr < -2 * st
    s4, _ = fit.slope(4.0)
    s12, _ = fit.slope(1.2)
    report(11, "speed signature", ok,
           f"control slope {s0:.3f} +- {se0:.3f}; final window (to n = {fit.window_end(-1)}) "
           f"beta=4: {s4:.3f} vs beta=1.2: {s12:.3f} (diff {d:.3f} +- {sd:.3f}); "
           f"beta=4 late - early {tr:.3f} +- {st:.3f}", 900)


DETERMINISM = [
    ("sample", ["window=box(center=0,0,0;L=3)", "u=1.5"]),
    ("capacity", ["set=0,0,0;1,0,0;0,1,1", "walks=20000"]),
    ("vacant", ["set=0,0,0;1,0,0", "reps=5000", "walks=20000"]),
    ("walk", ["beta=1.2,3", "reps=300", "window=box(center=0,0,0;L=5)", "max_steps=5000"]),
    ("cone-exit", ["beta=2", "M=1", "n=4", "reps=30"]),
    ("traps", ["beta=2", "log_n=6", "reps=3", "walks=2000"]),
    ("sojourn", ["beta=2", "M=2", "log_n=3", "reps=2", "walks=50"]),
    ("exponent", ["betas=1.000000001,4", "reps=6", "grid_lo=4", "grid_hi=9", "N=8", "T=256"]),
    ("network-check", ["case=parallel", "weights=2,3"]),
    ("d4", ["eps1=0.1", "eps2=0.1", "log_n=20", "beta=2,4", "u=0.5", "reps=300", "walks=20", "envs=2"]),
]


def test_determinism(report, tmp_path, capsys):
    diffs = []
    for kind, params in DETERMINISM:
        outs = []
        for threads in (1, 4):
            d = tmp_path / f"{kind}-{threads}"
            argv = [kind, "--seed", "424242", "--out", str(d), "--threads", str(threads)]
            for p in params:
                argv += ["-p", p]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                code = main(argv)
            assert code == 0, kind
            outs.append(((d / f"{kind}.csv").read_bytes(), (d / f"{kind}.meta.json").read_bytes()))
        capsys.readouterr()
        if outs[0] != outs[1]:
            diffs.append(kind)
    report(12, "determinism across threads", not diffs,
           f"{len(DETERMINISM)} kinds rerun with 1 and 4 threads; differing: {diffs or 'none'}", 60)

