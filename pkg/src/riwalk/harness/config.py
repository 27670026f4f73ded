"""Experiment configuration: INI files with an ``[experiment]`` section and kind sections.

Example::

    [experiment]
    kind = vacant
    seed = 7
    u = 1.0
    reps = 100000

    [vacant]
    set = 0,0,0

Keys of the kind's own section override those of ``[experiment]``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import ConfigInvalid

KINDS = ("sample", "capacity", "vacant", "walk", "cone-exit", "traps", "sojourn", "exponent",
         "network-check", "d4")

# kinds that build a biased environment
_NEEDS_BETA = {"walk", "cone-exit", "traps", "sojourn", "exponent", "d4"}
_NEEDS_U = {"sample", "vacant", "walk", "cone-exit", "traps", "sojourn", "exponent", "d4"}

DEFAULTS = {"u": "1.0", "M": "10", "eps_ret": "1e-4"}


def parse_sites(text: str) -> list[tuple[int, ...]]:
    """``"0,0,0; 1,0,0"`` -> ``[(0, 0, 0), (1, 0, 0)]``."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            out.append(tuple(int(t) for t in part.split(",")))
    return out


def parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    """Validated experiment parameters; ``params`` holds everything as given (strings)."""

    kind: str
    seed: int
    params: dict = field(default_factory=dict)

    # typed accessors; each raises ConfigInvalid naming the field

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def _conv(self, key, fn, default):
        raw = self.params.get(key)
        if raw is None:
            if default is None:
                raise ConfigInvalid({key: "missing"})
            return default
        try:
            return fn(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid({key: f"{raw!r}: {exc}"}) from None

    def float(self, key, default=None) -> float:
        return self._conv(key, float, default)

    def int(self, key, default=None) -> int:
        return self._conv(key, lambda s: int(float(s)) if "e" in str(s).lower() else int(s), default)

    def fraction(self, key, default=None) -> Fraction:
        return self._conv(key, lambda s: Fraction(str(s)), default)

    def floats(self, key, default=None) -> list[float]:
        return self._conv(key, parse_floats, default)

    def sites(self, key, default=None) -> list[tuple]:
        return self._conv(key, parse_sites, default)

    def echo(self) -> dict:
        """Everything needed to rerun the experiment (the thread count is deliberately absent)."""
        return {"kind": self.kind, "seed": self.seed, **{k: self.params[k] for k in sorted(self.params)}}


def validate(kind: str, seed, params: dict) -> ExperimentConfig:
    """Check the fields shared by all kinds; collects every problem before raising."""
    problems = []
    if kind not in KINDS:
        problems.append(("kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}"))
    if seed is None or str(seed).strip() == "":
        problems.append(("seed", "missing (a seed is mandatory)"))
        seed_v = None
    else:
        try:
            seed_v = int(str(seed), 0)
            if not 0 <= seed_v < 2 ** 64:
                problems.append(("seed", "must lie in [0, 2^64)"))
        except ValueError:
            problems.append(("seed", f"not an integer: {seed!r}"))
            seed_v = None
    p = {**DEFAULTS, **{k: str(v) for k, v in params.items() if v is not None}}
    if kind in _NEEDS_U:
        try:
            if not float(p["u"]) > 0:
                problems.append(("u", "must be > 0"))
        except ValueError:
            problems.append(("u", f"not a number: {p['u']!r}"))
    if kind in _NEEDS_BETA:
        key = "betas" if "betas" in p else "beta"
        if key not in p:
            problems.append(("beta", "missing"))
        else:
            try:
                bs = parse_floats(p[key])
                if not bs or any(not (b > 1 and math.isfinite(b)) for b in bs):
                    problems.append((key, "every bias must be a finite number > 1"))
            except ValueError:
                problems.append((key, f"not a list of numbers: {p[key]!r}"))
    for key in ("reps", "walks", "max_steps"):
        if key in p:
            try:
                if int(float(p[key])) < 1:
                    problems.append((key, "must be >= 1"))
            except ValueError:
                problems.append((key, f"not an integer: {p[key]!r}"))
    try:
        if not 0 < float(p["eps_ret"]) < 1:
            problems.append(("eps_ret", "must lie in (0, 1)"))
    except ValueError:
        problems.append(("eps_ret", f"not a number: {p['eps_ret']!r}"))
    if problems:
        raise ConfigInvalid(problems)
    return ExperimentConfig(kind, seed_v, p)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI file; ``overrides`` (e.g. from command-line flags) win over file values."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep keys such as M case-sensitive
    with open(path) as fh:
        cp.read_file(fh)
    if not cp.has_section("experiment"):
        raise ConfigInvalid({"experiment": "missing section"})
    base = dict(cp.items("experiment"))
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    kind = overrides.get("kind", base.get("kind"))
    if kind and cp.has_section(kind):
        base.update(cp.items(kind))
    base.update(overrides)
    seed = base.pop("seed", None)
    base.pop("kind", None)
    return validate(kind or "", seed, base)


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    return validate(d.pop("kind", ""), d.pop("seed", None), d)
