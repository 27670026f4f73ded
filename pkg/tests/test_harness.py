import json
import math

import numpy as np
import pytest

from riwalk.errors import ConfigInvalid, InvalidInput
from riwalk.harness.cli import main
from riwalk.harness.config import KINDS, config_from_dict, load_config, parse_sites
from riwalk.harness.exponent import (
    NEAR_UNBIASED, dyadic_grid, exponent_experiment, nested_cone_regions, phi_n_experiment, window_weights,
)
from riwalk.harness.runner import RunError, execute, run


# ---------------------------------------------------------------- configuration

def test_parse_sites():
    assert parse_sites("0,0,0; 1,0,0;") == [(0, 0, 0), (1, 0, 0)]


def test_config_roundtrip(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[experiment]\nkind = vacant\nseed = 7\nu = 0.5\n\n[vacant]\nu = 1.5\nset = 0,0,0\n")
    cfg = load_config(p)
    assert cfg.kind == "vacant" and cfg.seed == 7
    assert cfg.float("u") == 1.5  # kind section wins
    assert load_config(p, {"u": "2.0"}).float("u") == 2.0
    echo = cfg.echo()
    assert echo["kind"] == "vacant" and echo["seed"] == 7 and "threads" not in echo


@pytest.mark.parametrize("d,key", [
    ({"kind": "nope", "seed": 1}, "kind"),
    ({"kind": "walk", "beta": 2}, "seed"),
    ({"kind": "walk", "seed": "x", "beta": 2}, "seed"),
    ({"kind": "walk", "seed": 1, "beta": 0.9}, "beta"),
    ({"kind": "walk", "seed": 1}, "beta"),
    ({"kind": "exponent", "seed": 1, "betas": "1.2,inf"}, "betas"),
    ({"kind": "vacant", "seed": 1, "u": -1}, "u"),
    ({"kind": "vacant", "seed": 1, "reps": 0}, "reps"),
    ({"kind": "sample", "seed": 1, "eps_ret": 2}, "eps_ret"),
])
def test_config_errors(d, key):
    with pytest.raises(ConfigInvalid) as exc:
        config_from_dict(d)
    assert key in exc.value.problems


def test_config_collects_all_problems():
    with pytest.raises(ConfigInvalid) as exc:
        config_from_dict({"kind": "walk", "u": 0})
    assert {"seed", "u", "beta"} <= set(exc.value.problems)


def test_missing_experiment_section(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[other]\na = 1\n")
    with pytest.raises(ConfigInvalid):
        load_config(p)


def test_typed_accessor_errors():
    cfg = config_from_dict({"kind": "network-check", "seed": 1, "weights": "a,b"})
    with pytest.raises(ConfigInvalid):
        cfg.floats("weights")
    with pytest.raises(ConfigInvalid):
        cfg.int("missing_key")
    assert cfg.int("reps", 5) == 5
    assert config_from_dict({"kind": "vacant", "seed": 1, "reps": "1e5"}).int("reps") == 100_000


# ---------------------------------------------------------------- runs

def test_network_check_series_and_parallel():
    rows, _ = execute(config_from_dict({"kind": "network-check", "seed": 0}))
    assert rows[0]["conductance"] == pytest.approx(1.2, abs=1e-9) and rows[0]["exact"] == "6/5"
    rows, _ = execute(config_from_dict({"kind": "network-check", "seed": 0, "case": "parallel"}))
    assert rows[0]["conductance"] == pytest.approx(5.0, abs=1e-9)


def test_network_check_edgelist(tmp_path):
    from riwalk.network import WeightedGraph
    g = WeightedGraph.from_edges([((0, 0, 0), (1, 0, 0), 2.0), ((1, 0, 0), (2, 0, 0), 3.0)],
                                 [(0, 0, 0)], [(2, 0, 0)], log=False)
    p = tmp_path / "g.txt"
    p.write_text(g.to_edgelist())
    rows, _ = execute(config_from_dict({"kind": "network-check", "seed": 0, "edgelist": str(p)}))
    assert rows[0]["conductance"] == pytest.approx(1.2)


def test_run_writes_data_and_sidecar(tmp_path):
    cfg = config_from_dict({"kind": "sample", "seed": 3, "window": "box(center=0,0,0;L=1)"})
    res = run(cfg, tmp_path, "csv")
    lines = (tmp_path / "sample.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["x1", "x2", "x3", "occupied"] and len(lines) == 28
    meta = json.loads((tmp_path / "sample.meta.json").read_text())
    assert meta["config"]["seed"] == 3 and meta["rows"] == 27 == res["rows"]
    run(cfg, tmp_path, "jsonl")
    recs = [json.loads(s) for s in (tmp_path / "sample.jsonl").read_text().splitlines()]
    assert len(recs) == 27 and set(recs[0]) >= {"x1", "occupied", "local_time"}


def test_bad_window_descriptor():
    with pytest.raises(ConfigInvalid):
        execute(config_from_dict({"kind": "sample", "seed": 3, "window": "blob(1)"}))


def test_module_error_is_wrapped():
    cfg = config_from_dict({"kind": "cone-exit", "seed": 1, "beta": 2, "M": "1", "n": "4", "reps": 20,
                            "max_steps": 1, "max_censored": 0.5})
    with pytest.raises(RunError, match="cone-exit"):
        execute(cfg)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["network-check", "--out", str(tmp_path)]) == 2  # no seed
    assert "seed" in capsys.readouterr().err
    assert main(["network-check", "--seed", "5", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rows"] == 1
    assert (tmp_path / "network-check.csv").exists()


def test_cli_config_file(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[experiment]\nkind = network-check\nseed = 9\ncase = parallel\n")
    assert main(["network-check", "--config", str(p), "--out", str(tmp_path), "-p", "weights=1,1"]) == 0
    capsys.readouterr()
    txt = (tmp_path / "network-check.csv").read_text()
    assert ",2" in txt or "2.0" in txt


@pytest.mark.parametrize("kind,params", [
    ("walk", ["beta=2", "reps=200", "window=box(center=0,0,0;L=4)", "max_steps=2000"]),
    ("cone-exit", ["beta=2", "M=1", "n=4", "reps=12"]),
])
def test_cli_deterministic_over_threads(tmp_path, capsys, kind, params):
    outs = []
    for t in (1, 3):
        d = tmp_path / f"t{t}"
        args = [kind, "--seed", "11", "--out", str(d), "--threads", str(t)]
        for p in params:
            args += ["-p", p]
        assert main(args) == 0
        outs.append((d / f"{kind}.csv").read_bytes())
        capsys.readouterr()
    assert outs[0] == outs[1] and len(outs[0]) > 0


def test_seed_changes_output(tmp_path):
    a = execute(config_from_dict({"kind": "sample", "seed": 1, "window": "box(center=0,0,0;L=2)"}))[0]
    b = execute(config_from_dict({"kind": "sample", "seed": 2, "window": "box(center=0,0,0;L=2)"}))[0]
    assert a != b


def test_all_kinds_have_runners():
    from riwalk.harness.runner import KIND_RUNNERS
    assert set(KINDS) == set(KIND_RUNNERS)


# ---------------------------------------------------------------- exponent fitting

def test_dyadic_grid():
    assert dyadic_grid(2, 5).tolist() == [4, 8, 16, 32]
    with pytest.raises(InvalidInput):
        dyadic_grid(5, 5)


def test_window_weights_recover_slope():
    x = np.log(dyadic_grid(3, 12).astype(float))
    W = window_weights(x, 4)
    assert W.shape == (7, 10)
    y = 0.37 * x + 2.0
    np.testing.assert_allclose(W @ y, 0.37, atol=1e-12)
    np.testing.assert_allclose(W.sum(axis=1), 0.0, atol=1e-12)
    with pytest.raises(InvalidInput):
        window_weights(x[:3], 4)


def test_exponent_small_run():
    grid = dyadic_grid(4, 10)
    fit = exponent_experiment(1.0, [NEAR_UNBIASED, 4.0], 12, 40, grid=grid, N=8, T=512, width=3)
    assert fit.mean_log.shape == (2, len(grid)) and fit.slopes.shape == (2, len(grid) - 2)
    assert (fit.censored == 0).all()
    assert fit.window_end(-1) == 1024 and fit.window_end(0) == 64
    s, se = fit.slope(NEAR_UNBIASED)
    assert 0.2 < s < 0.8 and se > 0
    d, dse = fit.difference(4.0, NEAR_UNBIASED)
    assert d == pytest.approx(fit.slope(4.0)[0] - s)
    again = exponent_experiment(1.0, [NEAR_UNBIASED, 4.0], 12, 40, grid=grid, N=8, T=512, width=3, threads=2)
    np.testing.assert_array_equal(fit.mean_log, again.mean_log)
    with pytest.raises(InvalidInput):
        fit.slope(2.0)


def test_exponent_grid_validation():
    with pytest.raises(InvalidInput):
        exponent_experiment(1.0, [2.0], 2, 0, grid=[16, 8])


# ---------------------------------------------------------------- nested cones

def test_nested_cone_regions():
    regions, I = nested_cone_regions(1, 8, None)
    assert I == 4 and {"minus1", "bd4"} <= set(regions)
    with pytest.raises(InvalidInput):
        nested_cone_regions(1, 9, None)


def test_phi_n_small():
    r = phi_n_experiment(1.0, 3.0, 1, 8, 41, reps=30)
    assert 0 <= r.failure <= 1 and r.reps == 30
    assert r.minus_hits.shape == (30, 4)
    assert ((r.failed_cone >= 1) | (r.failed_cone == -1) | (r.failed_cone == -2)).all()
    assert r.failure == pytest.approx((r.failed_cone > 0).mean())
