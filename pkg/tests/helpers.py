"""Random fixtures shared by the warping tests and the acceptance gate."""

import numpy as np
import pandas as pd

from rpid.causal_graph import build_warp_plan, graph_from_lists
from rpid.glm import GlmError
from rpid.warp import fit_warp_models, warp_training

CREDIT_GRAPH = graph_from_lists(
    [
        ("Gender", "binary", "protected"),
        ("Age", "continuous", "confounder"),
        ("Amount", "continuous", "mediator"),
        ("Savings", "binary", "mediator"),
        ("Risk", "binary", "target"),
    ],
    [("Age", "Amount"), ("Age", "Savings"), ("Age", "Risk"), ("Amount", "Risk"), ("Savings", "Risk"),
     ("Gender", "Amount"), ("Gender", "Savings"), ("Gender", "Risk")],
)


def random_credit_frame(rng: np.random.Generator, n_f: int, n_m: int) -> pd.DataFrame:
    """Small Credit-shaped table with random group effects."""
    g = np.array(["female"] * n_f + ["male"] * n_m)
    rng.shuffle(g)
    fem = (g == "female").astype(float)
    n = g.size
    age = rng.gamma(8.0, 35.0 / 8.0, size=n)
    amount = rng.gamma(2.5, np.exp(7.0 + 0.01 * age + rng.normal(0, 0.5) * fem) / 2.5)
    sav_p = 1 / (1 + np.exp(-(0.3 - 0.01 * age + rng.normal(0, 1.0) * fem)))
    savings = (rng.random(n) < sav_p).astype(int)
    risk_eta = 0.5 + 0.02 * (age - 35) - 0.0002 * (amount - 1500) + rng.normal(0, 1) * savings + rng.normal(0, 1) * fem
    risk = (rng.random(n) < 1 / (1 + np.exp(-risk_eta))).astype(int)
    return pd.DataFrame({"Gender": g, "Age": age, "Amount": amount, "Savings": savings, "Risk": risk})


def random_warp_fixture(rng: np.random.Generator, reference="male"):
    """(data, plan, models, warped) or None when a random fit separates."""
    n_f, n_m = (int(v) for v in rng.integers(8, 60, size=2))
    data = random_credit_frame(rng, n_f, n_m)
    plan = build_warp_plan(CREDIT_GRAPH, reference)
    try:
        models = fit_warp_models(data, plan)
    except GlmError:
        return None
    return data, plan, models, warp_training(data, plan, models)
