"""Logistic prediction models on tabular data.

Feature names of the form ``"<column>=<level>"`` denote 0/1 indicators, which
is how a real-world model can include the protected attribute.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from . import glm
from .warp import MissingFeature


def design_matrix(data: pd.DataFrame, features: Sequence[str]) -> np.ndarray:
    cols = []
    for name in features:
        if "=" in name and name not in data.columns:
            col, level = name.split("=", 1)
            if col not in data.columns:
                raise MissingFeature(f"column {col!r} not found")
            cols.append((data[col].astype(str).to_numpy() == level).astype(float))
        else:
            if name not in data.columns:
                raise MissingFeature(f"column {name!r} not found")
            cols.append(data[name].to_numpy(dtype=float))
    if not cols:
        return np.empty((len(data), 0))
    return np.column_stack(cols)


def fit_prediction_model(data: pd.DataFrame, features: Sequence[str], target: str) -> glm.GlmFit:
    if target not in data.columns:
        raise MissingFeature(f"target column {target!r} not found")
    return glm.fit(glm.BERNOULLI, design_matrix(data, features), data[target].to_numpy(dtype=float), tuple(features))


def predict(fit: glm.GlmFit, data: pd.DataFrame) -> np.ndarray:
    return np.asarray(glm.predict_mean(fit, design_matrix(data, fit.feature_names)), dtype=float)
