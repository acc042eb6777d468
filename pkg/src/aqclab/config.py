"""Declarative experiment configuration (YAML), validation and family construction."""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .builders import (
    InterpolatingFamily,
    RandomFinalSpec,
    TransverseFieldSpec,
    UniformInt,
    build_random_final,
    cost_family,
    cost_from_table,
    gh1_family,
    grover_family,
    separable_pair,
    shift_family,
)
from .errors import ContractError
from .sat import SatInstance, encode_energy, parse_dimacs, random_instance

CONFIG_VERSION = "1"

KINDS = ("gap-sweep", "separable", "grover-search", "gh1-search", "shift-search",
         "random-final", "sat-gap", "positivity", "evolve", "scaling-study")
FAMILIES = ("separable", "grover", "sat", "random-final", "gh1", "shift")
BASES = ("separable", "sat", "random-final")


class ConfigError(ContractError):
    """Invalid configuration; ``fields`` names every offending key."""

    def __init__(self, problems: dict):
        self.fields = sorted(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(problems.items()))
        super().__init__(f"invalid config ({msg})")
        self.problems = dict(problems)


@dataclass
class ExperimentConfig:
    kind: str
    version: str = CONFIG_VERSION
    n: Optional[int] = None
    sizes: Optional[list] = None          # scaling-study qubit counts
    family: Optional[str] = None          # gap-sweep / positivity / evolve / scaling-study
    base: str = "separable"               # underlying problem of gh1 / shift families
    couplings: Optional[list] = None
    seed: int = 0
    target: Optional[int] = None
    cnf: Optional[str] = None             # DIMACS path for SAT families
    clauses: Optional[int] = None         # m for seeded random 3-SAT
    law: Optional[list] = None            # [lo, hi] for random-final
    grid: int = 101
    tol: float = 1e-10
    s_values: list = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    steps: Optional[int] = None           # product-formula steps; None = adaptive
    T: Optional[float] = None
    samples: int = 101
    evolve_tol: float = 1e-8
    f_star: float = 0.9
    window: float = 0.1
    threads: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self):
        p = {}
        if self.version != CONFIG_VERSION:
            p["version"] = f"unsupported version {self.version!r}"
        if self.kind not in KINDS:
            p["kind"] = f"must be one of {', '.join(KINDS)}"
        if self.family is not None and self.family not in FAMILIES:
            p["family"] = f"must be one of {', '.join(FAMILIES)}"
        if self.base not in BASES:
            p["base"] = f"must be one of {', '.join(BASES)}"
        if self.n is not None and not (isinstance(self.n, int) and 1 <= self.n <= 24):
            p["n"] = "must be an integer in [1, 24]"
        if self.sizes is not None and (not self.sizes or any(
                not isinstance(k, int) or not 1 <= k <= 24 for k in self.sizes)):
            p["sizes"] = "must be a non-empty list of integers in [1, 24]"
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            p["seed"] = "must be an unsigned 64-bit integer"
        if not isinstance(self.grid, int) or self.grid < 3:
            p["grid"] = "must be an integer >= 3"
        if not self.tol > 0:
            p["tol"] = "must be positive"
        if self.law is not None and (len(self.law) != 2 or self.law[0] > self.law[1]):
            p["law"] = "must be [lo, hi] with lo <= hi"
        if self.couplings is not None and any(int(a) != a or a < 0 for a in self.couplings):
            p["couplings"] = "must be non-negative integers"
        if any(not 0 <= s <= 1 for s in self.s_values):
            p["s_values"] = "must lie in [0, 1]"
        if self.T is not None and not self.T > 0:
            p["T"] = "must be positive"
        if not 0.5 < self.f_star < 1:
            p["f_star"] = "must lie in (0.5, 1)"
        if not isinstance(self.threads, int) or self.threads < 1:
            p["threads"] = "must be a positive integer"
        needs_n = self.kind in KINDS and self.kind != "scaling-study" and not (
            self.kind == "sat-gap" and self.cnf)
        if needs_n and self.n is None and "n" not in p:
            p["n"] = "required for this experiment"
        if self.kind == "scaling-study" and self.sizes is None and "sizes" not in p:
            p["sizes"] = "required for scaling-study"
        if self.kind in ("gap-sweep", "positivity", "evolve", "scaling-study") \
                and self.family is None and "family" not in p:
            p["family"] = "required for this experiment"
        if self.kind == "evolve" and self.T is None and "T" not in p:
            p["T"] = "required for evolve"
        if self.resolved_family() in ("sat",) or self.base == "sat" and self.resolved_family() in (
                "gh1", "shift"):
            if self.cnf is None and self.clauses is None:
                p["clauses"] = "SAT families need a cnf path or a clause count"
        if p:
            raise ConfigError(p)

    def resolved_family(self):
        return self.family or {
            "separable": "separable", "grover-search": "grover", "gh1-search": "gh1",
            "shift-search": "shift", "random-final": "random-final", "sat-gap": "sat",
        }.get(self.kind)

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError({"<root>": "config must be a mapping"})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError({k: "unknown field" for k in unknown})
        if "kind" not in d:
            raise ConfigError({"kind": "missing"})
        d = dict(d)
        if "version" in d:
            d["version"] = str(d["version"])
        for key in ("tol", "evolve_tol", "f_star", "window"):
            if key in d and isinstance(d[key], str):
                try:
                    d[key] = float(d[key])
                except ValueError:
                    raise ConfigError({key: "must be a number"}) from None
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError({"<root>": str(exc)}) from None

    @classmethod
    def from_yaml(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError({"<root>": f"not valid YAML: {exc}"}) from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        return cls.from_yaml(Path(path).read_text())

    def replace(self, **changes):
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(d)


def sat_instance(cfg: ExperimentConfig, n=None) -> SatInstance:
    if cfg.cnf is not None:
        return parse_dimacs(Path(cfg.cnf).read_text())
    return random_instance(n or cfg.n, cfg.clauses, cfg.seed)


def _couplings(cfg, n):
    if cfg.couplings is None:
        return TransverseFieldSpec.uniform(n)
    if len(cfg.couplings) != n:
        raise ConfigError({"couplings": f"expected {n} entries, got {len(cfg.couplings)}"})
    return TransverseFieldSpec(tuple(cfg.couplings))


def _base_family(cfg, name, n):
    if name == "separable":
        return separable_pair(n)
    if name == "sat":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            e = encode_energy(sat_instance(cfg, n)).energies
            h1 = cost_from_table(e)
        return cost_family(h1, _couplings(cfg, h1.n), name="sat")
    if name == "random-final":
        law = UniformInt(*cfg.law) if cfg.law is not None else None
        h1 = build_random_final(RandomFinalSpec(n, cfg.seed, law), cfg.target)
        return cost_family(h1, _couplings(cfg, n), name="random-final", target=cfg.target)
    raise ConfigError({"family": f"unknown family {name!r}"})


def build_family(cfg: ExperimentConfig, n=None) -> InterpolatingFamily:
    """The interpolating family a config describes (``n`` overrides ``cfg.n`` for scans)."""
    n = n if n is not None else cfg.n
    name = cfg.resolved_family()
    if name == "grover":
        return grover_family(n, cfg.target or 0, _couplings(cfg, n))
    if name in ("gh1", "shift"):
        base = base_family(cfg, n)
        t = cfg.target if cfg.target is not None else 0
        return gh1_family(base, t) if name == "gh1" else shift_family(base, t)
    return _base_family(cfg, name, n)


def base_family(cfg: ExperimentConfig, n=None) -> InterpolatingFamily:
    """The unmodified problem underlying a gh1 or shift family."""
    return _base_family(cfg, cfg.base, n if n is not None else cfg.n)
