"""TOML pipeline configuration.

A config has the sections ``graph``, ``warping``, ``models``,
``simulation`` (optional), ``evaluation`` and ``io``; the README documents
every key. Unknown sections and keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .causal_graph import CausalGraph, GraphError, VariableSpec, validate
from .evaluation import UC3_METRICS, UC4_METRICS
from .simulation import InvalidConfig, NodeGenerator, SimConfig, check_config

METRICS = ("w1", "w2", "uc1", "uc2", "uc3", "uc4", "fairness")
FAMILY_FOR_KIND = {"continuous": "gamma", "binary": "bernoulli"}

_SECTIONS = {
    "graph": {"variables", "edges"},
    "warping": {"reference_group", "threshold"},
    "models": {"features", "families"},
    "simulation": {
        "levels", "pi_first_level", "n_train", "n_test", "iterations",
        "misspecified", "cross_direction", "generators",
    },
    "evaluation": {"alpha", "epsilon", "top_k", "uc2_k", "metrics", "split", "uc3_metric", "uc4_metric"},
    "io": {"seed", "out"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationSettings:
    alpha: float = 0.05
    epsilon: float = 0.95
    top_k: int = 10
    uc2_k: int = 5
    metrics: tuple[str, ...] = METRICS
    split: Optional[float] = None  # training fraction for a seeded split of real data
    uc3_metric: str = "zscore_euclidean"
    uc4_metric: str = "minmax_mean_abs"


@dataclass(frozen=True)
class PipelineConfig:
    graph: CausalGraph
    reference_group: str
    threshold: float = 0.5
    features: tuple[str, ...] = ()
    families: dict[str, str] = field(default_factory=dict)
    simulation: Optional[SimConfig] = None
    evaluation: EvaluationSettings = EvaluationSettings()
    seed: int = 0
    out: Optional[str] = None
    digest: str = ""

    @property
    def protected(self) -> str:
        return self.graph.protected

    @property
    def target(self) -> str:
        return self.graph.target

    def require_simulation(self) -> SimConfig:
        if self.simulation is None:
            raise ConfigError("config has no [simulation] section")
        return self.simulation


def _check_keys(name: str, table: dict, allowed: set) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"[{name}]: unknown key(s) {extra}")


def _number(name: str, value, lo=None, hi=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (integer and not isinstance(value, int)):
        raise ConfigError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if lo is not None and value < lo or hi is not None and value > hi:
        raise ConfigError(f"{name}={value} outside [{lo}, {hi}]")
    return value


def _graph(section: dict) -> CausalGraph:
    _check_keys("graph", section, _SECTIONS["graph"])
    try:
        variables = []
        for v in section.get("variables", []):
            if not isinstance(v, dict) or set(v) != {"name", "kind", "role"}:
                raise ConfigError(f"graph variable entries need exactly name, kind and role: {v!r}")
            variables.append(VariableSpec(str(v["name"]), str(v["kind"]), str(v["role"])))
        edges = []
        for e in section.get("edges", []):
            if not isinstance(e, list) or len(e) != 2:
                raise ConfigError(f"graph edges are [parent, child] pairs, got {e!r}")
            edges.append((str(e[0]), str(e[1])))
        graph = CausalGraph(tuple(variables), tuple(edges))
        validate(graph)
    except GraphError as exc:
        raise ConfigError(f"[graph]: {exc}") from exc
    return graph


def _features(graph: CausalGraph, section: dict) -> tuple[str, ...]:
    pa, target = graph.protected, graph.target
    if "features" not in section:
        return tuple(v.name for v in graph.variables if v.role not in ("protected", "target"))
    feats = tuple(str(f) for f in section["features"])
    for f in feats:
        base = f.split("=", 1)[0]
        if base == pa:
            raise ConfigError(f"[models] features must not contain the protected attribute {pa!r}")
        if f == target:
            raise ConfigError(f"[models] features must not contain the target {target!r}")
        if f not in graph.names:
            raise ConfigError(f"[models] feature {f!r} is not a graph variable")
    if len(set(feats)) != len(feats):
        raise ConfigError("[models] features contain duplicates")
    return feats


def _families(graph: CausalGraph, section: dict) -> dict[str, str]:
    fams = {v.name: FAMILY_FOR_KIND[v.kind] for v in graph.variables if v.role != "protected"}
    for name, fam in dict(section.get("families", {})).items():
        if name not in fams:
            raise ConfigError(f"[models.families] {name!r} is not a modelled variable")
        if fam != fams[name]:
            raise ConfigError(f"[models.families] {name!r} is {graph.spec(name).kind}; only {fams[name]!r} is supported")
    return fams


def _evaluation(section: dict) -> EvaluationSettings:
    _check_keys("evaluation", section, _SECTIONS["evaluation"])
    metrics = tuple(section.get("metrics", METRICS))
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise ConfigError(f"[evaluation] unknown metric(s) {bad}; choose from {list(METRICS)}")
    split = section.get("split")
    if split is not None:
        _number("evaluation.split", split, 0.0, 1.0)
        if not 0.0 < split < 1.0:
            raise ConfigError("evaluation.split must lie strictly between 0 and 1")
    uc3 = section.get("uc3_metric", "zscore_euclidean")
    uc4 = section.get("uc4_metric", "minmax_mean_abs")
    if uc3 not in UC3_METRICS:
        raise ConfigError(f"evaluation.uc3_metric {uc3!r} unknown; choose from {sorted(UC3_METRICS)}")
    if uc4 not in UC4_METRICS:
        raise ConfigError(f"evaluation.uc4_metric {uc4!r} unknown; choose from {sorted(UC4_METRICS)}")
    return EvaluationSettings(
        alpha=float(_number("evaluation.alpha", section.get("alpha", 0.05), 0.0, 1.0)),
        epsilon=float(_number("evaluation.epsilon", section.get("epsilon", 0.95), 0.0, 1.0)),
        top_k=_number("evaluation.top_k", section.get("top_k", 10), 1, integer=True),
        uc2_k=_number("evaluation.uc2_k", section.get("uc2_k", 5), 1, integer=True),
        metrics=metrics,
        split=None if split is None else float(split),
        uc3_metric=uc3,
        uc4_metric=uc4,
    )


def _simulation(section: dict, graph, reference_group, threshold, ev: EvaluationSettings) -> SimConfig:
    _check_keys("simulation", section, _SECTIONS["simulation"])
    gens = []
    for name, g in dict(section.get("generators", {})).items():
        _check_keys(f"simulation.generators.{name}", g, {"family", "coefficients", "shape"})
        coefs = {str(k): float(_number(f"{name}.{k}", v)) for k, v in dict(g.get("coefficients", {})).items()}
        gens.append(NodeGenerator(name, str(g.get("family", "")), coefs, float(g.get("shape", 1.0))))
    levels = tuple(str(x) for x in section.get("levels", ("female", "male")))
    if len(levels) != 2:
        raise ConfigError("simulation.levels needs exactly two entries")
    sim = SimConfig(
        graph=graph,
        generators=tuple(gens),
        levels=levels,
        pi_first_level=float(_number("simulation.pi_first_level", section.get("pi_first_level", 0.31))),
        n_train=_number("simulation.n_train", section.get("n_train", 2000), integer=True),
        n_test=_number("simulation.n_test", section.get("n_test", 500), integer=True),
        iterations=_number("simulation.iterations", section.get("iterations", 100), integer=True),
        misspecified=bool(section.get("misspecified", False)),
        reference_group=reference_group,
        threshold=threshold,
        alpha=ev.alpha,
        epsilon=ev.epsilon,
        top_k=ev.top_k,
        cross_direction=bool(section.get("cross_direction", False)),
    )
    try:
        check_config(sim)
    except InvalidConfig as exc:
        raise ConfigError(f"[simulation]: {exc}") from exc
    return sim


def parse_config(data: dict, digest: str = "") -> PipelineConfig:
    extra = sorted(set(data) - set(_SECTIONS))
    if extra:
        raise ConfigError(f"unknown section(s) {extra}")
    if "graph" not in data:
        raise ConfigError("config needs a [graph] section")
    graph = _graph(data["graph"])
    warping = data.get("warping", {})
    _check_keys("warping", warping, _SECTIONS["warping"])
    if "reference_group" not in warping:
        raise ConfigError("[warping] needs reference_group")
    reference_group = str(warping["reference_group"])
    threshold = float(_number("warping.threshold", warping.get("threshold", 0.5), 0.0, 1.0))
    models = data.get("models", {})
    _check_keys("models", models, _SECTIONS["models"])
    ev = _evaluation(data.get("evaluation", {}))
    io = data.get("io", {})
    _check_keys("io", io, _SECTIONS["io"])
    sim = None
    if "simulation" in data:
        sim = _simulation(data["simulation"], graph, reference_group, threshold, ev)
    return PipelineConfig(
        graph=graph,
        reference_group=reference_group,
        threshold=threshold,
        features=_features(graph, models),
        families=_families(graph, models),
        simulation=sim,
        evaluation=ev,
        seed=_number("io.seed", io.get("seed", 0), integer=True),
        out=io.get("out"),
        digest=digest,
    )


def load_config(path) -> PipelineConfig:
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, hashlib.sha256(raw).hexdigest())


def builtin_config_path(name: str) -> Path:
    """Path of a config shipped with the package (``sim1``, ``sim2``, ``rq3``, ``credit``)."""
    p = Path(__file__).parent / "configs" / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"no built-in config named {name!r}")
    return p


def load_any(spec: Any) -> PipelineConfig:
    """Load a config from a path, or from a built-in name such as ``"sim1"``."""
    p = Path(str(spec))
    if p.exists():
        return load_config(p)
    if p.suffix == "" and p.parent == Path("."):
        return load_config(builtin_config_path(str(spec)))
    raise ConfigError(f"config file {spec} not found")
