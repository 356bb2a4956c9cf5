"""Paired real-world / FiND-world data from a GLM structural causal model.

Each node is generated by inverse-CDF sampling from one uniform stream per
node and row. The real and the FiND world consume the same streams, so they
differ only where the FiND world evaluates a warp-set node with the
reference level of the protected attribute.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.special import gammaincinv

from .causal_graph import CausalGraph, GraphError, validate, warp_set

_U_EPS = 1e-12


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class NodeGenerator:
    """Structural equation of one node.

    ``coefficients`` maps ``"intercept"``, parent names and protected-level
    indicators written ``"<protected>=<level>"`` to real coefficients.
    """

    variable: str
    family: str
    coefficients: dict[str, float]
    shape: float = 1.0

    @property
    def link(self) -> str:
        return "log" if self.family == "gamma" else "logit"

    def to_dict(self) -> dict:
        d = {"family": self.family, "coefficients": dict(self.coefficients)}
        if self.family == "gamma":
            d["shape"] = self.shape
        return d


@dataclass(frozen=True)
class SimConfig:
    graph: CausalGraph
    generators: tuple[NodeGenerator, ...]
    levels: tuple[str, str] = ("female", "male")
    pi_first_level: float = 0.31
    n_train: int = 2000
    n_test: int = 500
    iterations: int = 100
    misspecified: bool = False
    reference_group: str = "male"
    threshold: float = 0.5
    alpha: float = 0.05
    epsilon: float = 0.95
    top_k: int = 10
    cross_direction: bool = False

    def generator(self, name: str) -> NodeGenerator:
        for g in self.generators:
            if g.variable == name:
                return g
        raise KeyError(name)

    def flipped(self) -> "SimConfig":
        other = self.levels[0] if self.reference_group == self.levels[1] else self.levels[1]
        return replace(self, reference_group=other)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "generators": {g.variable: g.to_dict() for g in self.generators},
            "levels": list(self.levels),
            "pi_first_level": self.pi_first_level,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "iterations": self.iterations,
            "misspecified": self.misspecified,
            "reference_group": self.reference_group,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "top_k": self.top_k,
            "cross_direction": self.cross_direction,
        }


def check_config(config: SimConfig) -> None:
    try:
        validate(config.graph)
    except GraphError as exc:
        raise InvalidConfig(str(exc)) from exc
    pa = config.graph.protected
    if len(set(config.levels)) != 2:
        raise InvalidConfig(f"need two distinct protected levels, got {config.levels}")
    if config.reference_group not in config.levels:
        raise InvalidConfig(f"reference group {config.reference_group!r} not in {config.levels}")
    if not 0.0 < config.pi_first_level < 1.0:
        raise InvalidConfig("pi_first_level must lie in (0, 1)")
    if config.n_train < 10 or config.n_test < 2 or config.iterations < 1:
        raise InvalidConfig("n_train >= 10, n_test >= 2 and iterations >= 1 required")
    covered = {g.variable for g in config.generators}
    for v in config.graph.variables:
        if v.name == pa:
            continue
        if v.name not in covered:
            raise InvalidConfig(f"no generator for {v.name!r}")
        g = config.generator(v.name)
        expected = "gamma" if v.kind == "continuous" else "bernoulli"
        if g.family != expected:
            raise InvalidConfig(f"{v.name!r} is {v.kind} and needs a {expected} generator, got {g.family}")
        if g.family == "gamma" and not g.shape > 0:
            raise InvalidConfig(f"{v.name!r}: gamma shape must be positive")
        parents = set(config.graph.parents(v.name))
        for key in g.coefficients:
            if key == "intercept":
                continue
            if "=" in key:
                name, level = key.split("=", 1)
                if name != pa or level not in config.levels:
                    raise InvalidConfig(f"{v.name!r}: bad protected indicator {key!r}")
                allowed = pa in parents or (config.misspecified and v.role == "confounder")
                if not allowed:
                    raise InvalidConfig(f"{v.name!r}: {pa!r} is not a parent, so {key!r} is not allowed")
            elif key not in parents:
                raise InvalidConfig(f"{v.name!r}: coefficient {key!r} does not name a parent")


def _linear_predictor(gen: NodeGenerator, values: dict[str, np.ndarray], protected: str, groups: np.ndarray, n: int):
    eta = np.full(n, float(gen.coefficients.get("intercept", 0.0)))
    for key, coef in gen.coefficients.items():
        if key == "intercept":
            continue
        if "=" in key:
            level = key.split("=", 1)[1]
            eta = eta + coef * (groups == level)
        else:
            eta = eta + coef * values[key]
    return eta


def _draw(gen: NodeGenerator, eta: np.ndarray, u: np.ndarray) -> np.ndarray:
    if gen.family == "gamma":
        mean = np.exp(eta)
        return gammaincinv(gen.shape, u) * (mean / gen.shape)
    p = 1.0 / (1.0 + np.exp(-eta))
    # inverse CDF of Bernoulli(p): 1 exactly when u falls in the top p mass
    return (u > 1.0 - p).astype(int)


@dataclass
class WorldPair:
    real: pd.DataFrame
    find: pd.DataFrame


@dataclass
class SimulatedData:
    train: WorldPair
    test: WorldPair


def simulate_worlds(config: SimConfig, n: int, rng: np.random.Generator) -> WorldPair:
    """Draw ``n`` rows of both worlds from one RNG."""
    graph = config.graph
    pa = graph.protected
    groups = np.where(rng.random(n) < config.pi_first_level, config.levels[0], config.levels[1])
    ref_groups = np.full(n, config.reference_group)
    ws = set(warp_set(graph, quiet=True))
    real: dict[str, np.ndarray] = {pa: groups}
    find: dict[str, np.ndarray] = {pa: groups}
    for name in graph.topological_order():
        if name == pa:
            continue
        gen = config.generator(name)
        u = np.clip(rng.random(n), _U_EPS, 1.0 - _U_EPS)
        real[name] = _draw(gen, _linear_predictor(gen, real, pa, groups, n), u)
        find_groups = ref_groups if name in ws else groups
        find[name] = _draw(gen, _linear_predictor(gen, find, pa, find_groups, n), u)
    cols = graph.names
    return WorldPair(pd.DataFrame({c: real[c] for c in cols}), pd.DataFrame({c: find[c] for c in cols}))


def simulate_pair(config: SimConfig, seed: int) -> SimulatedData:
    """Deterministic train/test world pairs for one seed."""
    check_config(config)
    rng = np.random.default_rng(seed)
    both = simulate_worlds(config, config.n_train + config.n_test, rng)
    cut = config.n_train

    def split(df: pd.DataFrame):
        return df.iloc[:cut].reset_index(drop=True), df.iloc[cut:].reset_index(drop=True)

    real_tr, real_te = split(both.real)
    find_tr, find_te = split(both.find)
    return SimulatedData(WorldPair(real_tr, find_tr), WorldPair(real_te, find_te))
