"""Model bundle: warp plan, warp models and prediction model in one JSON file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import glm
from .causal_graph import CausalGraph, WarpPlan
from .warp import WarpModel

FORMAT_VERSION = 1


class BundleError(ValueError):
    pass


class BundleVersionError(BundleError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    plan: WarpPlan
    graph: CausalGraph
    warp_models: dict[str, WarpModel]
    threshold: float = 0.5
    features: tuple[str, ...] = ()
    prediction: Optional[glm.GlmFit] = None
    provenance: dict = field(default_factory=dict)

    def with_prediction(self, fit: glm.GlmFit, **provenance) -> "ModelBundle":
        return replace(self, prediction=fit, provenance={**self.provenance, **provenance})

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "graph": self.graph.to_dict(),
            "plan": self.plan.to_dict(),
            "warp_models": {k: m.to_dict() for k, m in self.warp_models.items()},
            "threshold": self.threshold,
            "features": list(self.features),
            "prediction": None if self.prediction is None else self.prediction.to_dict(),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleVersionError(f"bundle format version {version!r} is not supported (expected {FORMAT_VERSION})")
        try:
            return cls(
                plan=WarpPlan.from_dict(d["plan"]),
                graph=CausalGraph.from_dict(d["graph"]),
                warp_models={k: WarpModel.from_dict(m) for k, m in d["warp_models"].items()},
                threshold=float(d["threshold"]),
                features=tuple(d["features"]),
                prediction=None if d["prediction"] is None else glm.GlmFit.from_dict(d["prediction"]),
                provenance=dict(d.get("provenance", {})),
            )
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed bundle: {exc!r}") from exc

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        # json writes floats with repr, which round-trips every double exactly
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelBundle":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise BundleError(f"{path}: file not found") from exc
        except json.JSONDecodeError as exc:
            raise BundleError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(d)
