"""Experiment dispatch and artifact emission.

Each kind turns an :class:`ExperimentConfig` into a list of row dicts and a
summary dict.  Rows are written as CSV (or JSON lines) with floats in
shortest round-trip form, so identical inputs give identical bytes; the
summary and the echoed configuration go to a ``.meta.json`` sidecar.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .. import __version__
from .._parallel import parallel_map
from ..errors import ConfigInvalid, RiwalkError
from ..lattice import Box, Explicit
from ..rng import RngStream
from .config import ExperimentConfig


class RunError(RiwalkError):
    """A module error, re-raised with the experiment that triggered it."""


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return v


def _columns(rows: list[dict]) -> list[str]:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = _columns(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def rows_to_jsonl(rows: list[dict]) -> str:
    return "".join(json.dumps({k: _fmt(v) for k, v in r.items()}) + "\n" for r in rows)


def _stream(cfg: ExperimentConfig, tag: int) -> RngStream:
    return RngStream(cfg.seed, 0).spawn(tag)


def _region(cfg: ExperimentConfig, key: str = "window", default=None):
    from ..interlace import parse_descriptor

    if key in cfg.params:
        try:
            return parse_descriptor(cfg.params[key])
        except (KeyError, ValueError) as exc:
            raise ConfigInvalid({key: f"bad region descriptor: {exc}"}) from None
    if default is None:
        raise ConfigInvalid({key: "missing"})
    return default


def _target_set(cfg: ExperimentConfig):
    if "set" in cfg.params:
        return Explicit(cfg.sites("set"), name="set")
    return _region(cfg, "region")


def _scale_n(cfg: ExperimentConfig) -> float:
    """``n`` given directly or as ``log_n``."""
    if "log_n" in cfg.params:
        return math.exp(cfg.float("log_n"))
    return cfg.float("n")


def _betas(cfg: ExperimentConfig) -> list[float]:
    return cfg.floats("betas") if "betas" in cfg.params else cfg.floats("beta")


# ---------------------------------------------------------------- kinds

def _sample(cfg, threads):
    from ..interlace import sample_interlacement

    window = _region(cfg, default=Box((0, 0, 0), 3))
    s = sample_interlacement(window, cfg.float("u"), _stream(cfg, 1), eps_ret=cfg.float("eps_ret"), record=False)
    rows = [{"x1": p[0], "x2": p[1], "x3": p[2], "occupied": int(lt > 0), "local_time": int(lt)}
            for p, lt in zip(s.window_sites.tolist(), s.local_time.tolist())]
    return rows, {"window": window.descriptor(), "trajectories": s.trajectory_count,
                  "occupied_fraction": float((s.local_time > 0).mean())}


def _capacity(cfg, threads):
    from ..potential import capacity_estimate, exact_capacity

    A = _target_set(cfg)
    cap, se = capacity_estimate(A, _stream(cfg, 2), cfg.int("walks", 1_000_000), cfg.float("eps_ret"))
    row = {"sites": len(A.sites()), "estimate": cap, "stderr": se}
    if len(A.sites()) <= 2000:
        ex, _ = exact_capacity(A)
        row.update(exact=ex, z=(cap - ex) / se if se > 0 else 0.0)
    return [row], dict(row)


def _vacant(cfg, threads):
    from ..interlace import vacant_probability_check

    A = _target_set(cfg)
    window = _region(cfg) if "window" in cfg.params else None
    c = vacant_probability_check(A, cfg.float("u"), _stream(cfg, 3), reps=cfg.int("reps", 100_000),
                                 cap_walks=cfg.int("walks", 1_000_000), window=window, eps_ret=cfg.float("eps_ret"))
    row = {"u": cfg.float("u"), "empirical": c.empirical, "empirical_stderr": c.empirical_stderr,
           "analytic": c.analytic, "capacity": c.capacity, "capacity_stderr": c.capacity_stderr, "z": c.z_score}
    return [row], dict(row)


def _walk(cfg, threads):
    from ..environ import build_environment, run_walks
    from ..interlace import sample_interlacement

    window = _region(cfg, default=Box((0, 0, 0), 10))
    start = tuple(cfg.sites("start", [(0, 0, 0)])[0])
    rows = []
    summary = {}
    for i, beta in enumerate(_betas(cfg)):
        smp = sample_interlacement(window, cfg.float("u"), _stream(cfg, 4), eps_ret=cfg.float("eps_ret"),
                                   condition_on=start, record=False)
        env = build_environment(smp, beta)
        b = run_walks(env, start, cfg.int("reps", 1000), _stream(cfg, 5).spawn(i), max_steps=cfg.int("max_steps", 10 ** 6),
                      checkpoints=np.zeros(0, dtype=np.int64), threads=threads)
        for r in range(len(b)):
            rec = b.record(r)
            rows.append({"beta": beta, "replica": r, "steps": rec.steps, "reason": rec.reason,
                         "censored": rec.censored, "x1": rec.final[0], "x2": rec.final[1], "x3": rec.final[2]})
        summary[repr(beta)] = {"censored_fraction": float(b.censored.mean()), "mean_steps": float(b.steps.mean())}
    return rows, summary


def _cone_exit(cfg, threads):
    from ..environ.walks import cone_exit_replica, cone_regions, summarize_cone_exits

    M, n = cfg.fraction("M"), cfg.int("n")
    clip = cfg.int("clip") if "clip" in cfg.params else None
    reps = cfg.int("reps", 100)
    rows, summary = [], {}
    for i, beta in enumerate(_betas(cfg)):
        regions = cone_regions(M, n, clip)
        st = _stream(cfg, 6).spawn(i)
        out = parallel_map(lambda r: cone_exit_replica(M, n, cfg.float("u"), beta, st, r, clip,
                                                       cfg.int("max_steps", 10 ** 7), regions), range(reps), threads)
        res = summarize_cone_exits(out, cfg.float("max_censored") if "max_censored" in cfg.params else None)
        rows += [{"beta": beta, "replica": r, "outcome": o, "steps": k} for r, (o, k) in enumerate(out)]
        summary[repr(beta)] = {"p_minus": res.p_minus, "stderr": res.stderr, "p_plus": res.p_plus,
                               "p_censored": res.p_censored}
    return rows, summary


def _traps(cfg, threads):
    from ..environ import build_environment, detect_trap, plant_trap, trap_escape_check, trap_window
    from ..interlace import sample_interlacement
    from ..lattice import trap_anchors

    M, n = cfg.fraction("M"), _scale_n(cfg)
    beta = _betas(cfg)[0]
    window = trap_window(trap_anchors((0, 0, 0), M, n), margin=2)
    st = _stream(cfg, 7)

    def one(r):
        smp = sample_interlacement(window, cfg.float("u"), st.spawn(1, r), eps_ret=cfg.float("eps_ret"), record=False)
        nat = detect_trap(smp, (0, 0, 0), M, n)
        env, a = plant_trap(build_environment(smp, beta), (0, 0, 0), M, n)
        rep = detect_trap(env, (0, 0, 0), M, n)
        c = trap_escape_check(env, a, st.spawn(2, r), cfg.int("walks", 100_000))
        return {"replica": r, "natural_t1": nat.t1, "natural_t2": nat.t2, "natural_t3": nat.t3,
                "natural_trap": nat.is_trap, "planted_detected": rep.is_trap, "component_size": rep.component_size,
                "mouth_transversal": rep.mouth_transversal, "formula": c.formula, "estimate": c.estimate,
                "stderr": c.stderr, "z": c.z}

    rows = parallel_map(one, range(cfg.int("reps", 10)), threads)
    z = np.array([r["z"] for r in rows])
    return rows, {"max_abs_z": float(np.abs(z).max()), "natural_traps": int(sum(r["natural_trap"] for r in rows))}


def _sojourn(cfg, threads):
    from ..environ import trap_sojourn_experiment

    M, n = cfg.fraction("M"), _scale_n(cfg)
    rows = []
    for i, beta in enumerate(_betas(cfg)):
        t = trap_sojourn_experiment(M, n, cfg.float("u"), beta, _stream(cfg, 8).spawn(i), reps=cfg.int("reps", 10),
                                    walks=cfg.int("walks", 200), max_steps=cfg.int("max_steps", 10 ** 6))
        row = {"beta": beta}
        row.update({f"q{lv}": v for lv, v in t.quantiles.items()})
        row.update(censored=t.censored_fraction, p_tip=t.p_tip, p_descent=t.p_descent,
                   descent_prediction=t.descent_prediction, descent_stderr=t.descent_stderr,
                   mouth_forward=t.mouth_forward, mouth_departures=t.mouth_departures,
                   geometric_p=float(np.nanmean(t.geometric_p)),
                   geometric_prediction=float(np.mean(t.geometric_prediction)),
                   geometric_max_abs_z=float(np.nanmax(np.abs(t.geometric_z))))
        rows.append(row)
    return rows, {}


def _exponent(cfg, threads):
    from .exponent import dyadic_grid, exponent_experiment

    grid = dyadic_grid(cfg.int("grid_lo", 10), cfg.int("grid_hi", 18))
    fit = exponent_experiment(cfg.float("u"), _betas(cfg), cfg.int("reps", 200), _stream(cfg, 9), grid=grid,
                              N=cfg.int("N", 32), T=cfg.int("T", 8192), threads=threads)
    rows = []
    for i, beta in enumerate(fit.betas):
        for j, n in enumerate(fit.grid):
            row = {"beta": beta, "n": int(n), "mean_log_norm": fit.mean_log[i, j], "stderr": fit.stderr[i, j]}
            w = j - fit.width + 1
            if w >= 0:
                row.update(window_slope=fit.slopes[i, w], slope_stderr=fit.slope_stderr[i, w])
            rows.append(row)
    summary = {repr(b): {"final_slope": fit.slope(b)[0], "trend": fit.trend(b)[0]} for b in fit.betas}
    return rows, summary


def _network_check(cfg, threads):
    from ..network import WeightedGraph, effective_conductance, exact_conductance

    case = cfg.get("case", "series")
    if "edgelist" in cfg.params:
        g = WeightedGraph.from_edgelist(Path(cfg.params["edgelist"]).read_text())
        sol = effective_conductance(g)
        return [{"case": "edgelist", "conductance": sol.effective_conductance,
                 "residual": sol.residual_norm}], {}
    w = cfg.floats("weights", [2.0, 3.0])
    a, m, b = (0, 0, 0), (1, 0, 0), (2, 0, 0)
    if case == "series":
        if len(w) != 2:
            raise ConfigInvalid({"weights": "series needs two weights"})
        edges = [(a, m, w[0]), (m, b, w[1])]
        src, snk = [a], [b]
    elif case == "parallel":
        # each parallel branch is a two-edge path of conductances 2w, 2w, i.e. w in total
        edges = []
        for k, wi in enumerate(w):
            x = (1, k + 1, 0)
            edges += [(a, x, 2 * wi), (x, m, 2 * wi)]
        src, snk = [a], [m]
    else:
        raise ConfigInvalid({"case": f"unknown case {case!r}"})
    g = WeightedGraph.from_edges(edges, src, snk, log=False)
    sol = effective_conductance(g)
    ex = exact_conductance(edges, src, snk)
    row = {"case": case, "conductance": sol.effective_conductance, "exact": str(ex), "exact_float": float(ex),
           "residual": sol.residual_norm}
    return [row], dict(row)


def _d4(cfg, threads):
    from ..environ.d4 import d4_trap_mode

    r = d4_trap_mode(cfg.float("eps1"), cfg.float("eps2"), cfg.float("u"), _betas(cfg), _scale_n(cfg),
                     _stream(cfg, 10), reps=cfg.int("reps", 20_000), walks=cfg.int("walks", 200),
                     envs=cfg.int("envs", 10), max_steps=cfg.int("max_steps", 10 ** 6),
                     eps_ret=cfg.float("d4_eps_ret", 1e-2))
    rows = [{"record": "detection", "shell": k + 1, "detections": int(r.detections[k]), "samples": r.samples,
             "frequency": r.frequency[k], "stderr": r.stderr[k]} for k in range(r.s2)]
    for b in r.quantiles:
        row = {"record": "sojourn", "beta": b, "censored": r.censored[b]}
        row.update({f"q{lv}": v for lv, v in r.quantiles[b].items()})
        rows.append(row)
    return rows, {"s1": r.s1, "s2": r.s2, "segment_hits": r.segment_hits}


KIND_RUNNERS = {
    "sample": _sample, "capacity": _capacity, "vacant": _vacant, "walk": _walk, "cone-exit": _cone_exit,
    "traps": _traps, "sojourn": _sojourn, "exponent": _exponent, "network-check": _network_check, "d4": _d4,
}


def execute(cfg: ExperimentConfig, threads: int = 1) -> tuple[list[dict], dict]:
    """Rows and summary for ``cfg``; module errors are re-raised with the experiment kind."""
    try:
        return KIND_RUNNERS[cfg.kind](cfg, max(1, int(threads)))
    except ConfigInvalid:
        raise
    except RiwalkError as exc:
        raise RunError(f"{cfg.kind} (seed {cfg.seed}): {type(exc).__name__}: {exc}") from exc


def run(cfg: ExperimentConfig, out_dir=".", fmt: str = "csv", threads: int = 1, stem: str | None = None) -> dict:
    """Execute and write ``<stem>.csv`` (or ``.jsonl``) plus ``<stem>.meta.json``; returns the paths."""
    if fmt not in ("csv", "jsonl"):
        raise ConfigInvalid({"format": f"expected csv or jsonl, got {fmt!r}"})
    rows, summary = execute(cfg, threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or cfg.kind
    data = out / f"{stem}.{fmt}"
    data.write_text(rows_to_csv(rows) if fmt == "csv" else rows_to_jsonl(rows))
    meta = {"config": cfg.echo(), "version": __version__, "rows": len(rows),
            "summary": json.loads(json.dumps(summary, default=_fmt))}
    side = out / f"{stem}.meta.json"
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return {"data": str(data), "meta": str(side), "rows": len(rows), "summary": summary}
