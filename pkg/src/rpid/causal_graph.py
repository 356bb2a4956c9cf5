"""Typed causal DAGs and the warp plan derived from them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

KINDS = ("continuous", "binary")
ROLES = ("protected", "confounder", "mediator", "target")


class GraphError(ValueError):
    pass


class GraphValidationError(GraphError):
    """Raised by :func:`validate`; ``issues`` lists every violated rule."""

    def __init__(self, issues: list["GraphIssue"]):
        self.issues = issues
        super().__init__("; ".join(f"{i.code}: {i.message}" for i in issues))


@dataclass(frozen=True)
class GraphIssue:
    code: str
    message: str


class NoPathToTarget(UserWarning):
    pass


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    role: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise GraphError(f"variable {self.name!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class CausalGraph:
    variables: tuple[VariableSpec, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def spec(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def _by_role(self, role: str) -> str:
        matches = [v.name for v in self.variables if v.role == role]
        if len(matches) != 1:
            raise GraphError(f"expected exactly one {role} variable, found {len(matches)}")
        return matches[0]

    @property
    def protected(self) -> str:
        return self._by_role("protected")

    @property
    def target(self) -> str:
        return self._by_role("target")

    def parents(self, name: str) -> list[str]:
        """Parents of ``name`` in declaration order."""
        ps = {a for a, b in self.edges if b == name}
        return [n for n in self.names if n in ps]

    def children(self, name: str) -> list[str]:
        cs = {b for a, b in self.edges if a == name}
        return [n for n in self.names if n in cs]

    def descendants(self, name: str) -> set[str]:
        seen: set[str] = set()
        stack = [name]
        while stack:
            for c in self.children(stack.pop()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def ancestors(self, name: str) -> set[str]:
        seen: set[str] = set()
        stack = [name]
        while stack:
            for p in self.parents(stack.pop()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def topological_order(self) -> list[str]:
        """Kahn's algorithm; ties go to the earlier-declared variable."""
        names = self.names
        indeg = {n: 0 for n in names}
        for _, b in set(self.edges):
            indeg[b] += 1
        order: list[str] = []
        ready = [n for n in names if indeg[n] == 0]
        while ready:
            node = ready.pop(0)
            order.append(node)
            for c in self.children(node):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort(key=names.index)
        if len(order) != len(names):
            raise GraphError("graph contains a cycle")
        return order

    def find_world(self) -> "CausalGraph":
        """The FiND-world DAG: edges out of the protected attribute into the warp set are dropped."""
        ws = set(warp_set(self, quiet=True))
        pa = self.protected
        edges = tuple(e for e in self.edges if not (e[0] == pa and e[1] in ws))
        return CausalGraph(self.variables, edges)

    def to_dict(self) -> dict:
        return {
            "variables": [{"name": v.name, "kind": v.kind, "role": v.role} for v in self.variables],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CausalGraph":
        return cls(
            variables=tuple(VariableSpec(**v) for v in d["variables"]),
            edges=tuple(tuple(e) for e in d["edges"]),
        )


def find_issues(graph: CausalGraph) -> list[GraphIssue]:
    issues: list[GraphIssue] = []
    names = graph.names
    if len(set(names)) != len(names):
        issues.append(GraphIssue("DuplicateVariable", "variable names must be unique"))
    known = set(names)
    for a, b in graph.edges:
        for end in (a, b):
            if end not in known:
                issues.append(GraphIssue("UnknownVariableInEdge", f"edge ({a}, {b}) names undeclared variable {end!r}"))
    protected = [v for v in graph.variables if v.role == "protected"]
    targets = [v for v in graph.variables if v.role == "target"]
    if len(protected) != 1:
        issues.append(GraphIssue("MissingProtected", f"need exactly one protected variable, found {len(protected)}"))
    if len(targets) != 1:
        issues.append(GraphIssue("MissingTarget", f"need exactly one target variable, found {len(targets)}"))
    for v in protected + targets:
        if v.kind != "binary":
            issues.append(GraphIssue("UnsupportedKind", f"{v.role} variable {v.name!r} must be binary"))
    if len(targets) == 1:
        out = [b for a, b in graph.edges if a == targets[0].name]
        if out:
            issues.append(GraphIssue("TargetHasChildren", f"target {targets[0].name!r} has children {out}"))
    if not any(i.code in ("UnknownVariableInEdge", "DuplicateVariable") for i in issues):
        try:
            graph.topological_order()
        except GraphError:
            issues.append(GraphIssue("CycleDetected", "edge set contains a directed cycle"))
    return issues


def validate(graph: CausalGraph) -> None:
    issues = find_issues(graph)
    if issues:
        raise GraphValidationError(issues)


def warp_set(graph: CausalGraph, quiet: bool = False) -> list[str]:
    """Variables on some directed path from the protected attribute to the target.

    Returned in topological order. An empty result is legal but signalled
    with a :class:`NoPathToTarget` warning because warping is then a no-op.
    """
    pa, target = graph.protected, graph.target
    on_path = graph.descendants(pa) & (graph.ancestors(target) | {target})
    result = [n for n in graph.topological_order() if n in on_path]
    if not result and not quiet:
        warnings.warn(f"{pa!r} has no directed path to {target!r}; nothing to warp", NoPathToTarget, stacklevel=2)
    return result


@dataclass(frozen=True)
class WarpPlan:
    warp_order: tuple[str, ...]
    covariates: dict[str, tuple[str, ...]] = field(default_factory=dict)
    reference_group: str = ""
    protected: str = ""
    target: str = ""
    kinds: dict[str, str] = field(default_factory=dict)

    @property
    def feature_order(self) -> tuple[str, ...]:
        """Warped variables that are features, i.e. everything but the target."""
        return tuple(v for v in self.warp_order if v != self.target)

    def to_dict(self) -> dict:
        return {
            "warp_order": list(self.warp_order),
            "covariates": {k: list(v) for k, v in self.covariates.items()},
            "reference_group": self.reference_group,
            "protected": self.protected,
            "target": self.target,
            "kinds": dict(self.kinds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WarpPlan":
        return cls(
            warp_order=tuple(d["warp_order"]),
            covariates={k: tuple(v) for k, v in d["covariates"].items()},
            reference_group=d["reference_group"],
            protected=d["protected"],
            target=d["target"],
            kinds=dict(d["kinds"]),
        )


def build_warp_plan(graph: CausalGraph, reference_group: str) -> WarpPlan:
    validate(graph)
    order = warp_set(graph)
    pa = graph.protected
    covariates = {v: tuple(p for p in graph.parents(v) if p != pa) for v in order}
    return WarpPlan(
        warp_order=tuple(order),
        covariates=covariates,
        reference_group=str(reference_group),
        protected=pa,
        target=graph.target,
        kinds={v.name: v.kind for v in graph.variables},
    )


def graph_from_lists(variables: Iterable[dict | Sequence], edges: Iterable[Sequence[str]]) -> CausalGraph:
    specs = []
    for v in variables:
        specs.append(VariableSpec(**v) if isinstance(v, dict) else VariableSpec(*v))
    return CausalGraph(tuple(specs), tuple(tuple(e) for e in edges))
