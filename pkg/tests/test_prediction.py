import math

import numpy as np
import pandas as pd
import pytest

from rpid.prediction import design_matrix, fit_prediction_model, predict
from rpid.warp import MissingFeature


def test_indicator_columns():
    df = pd.DataFrame({"G": ["f", "m", "f"], "x": [1.0, 2.0, 3.0]})
    np.testing.assert_array_equal(design_matrix(df, ["x", "G=f"]), [[1, 1], [2, 0], [3, 1]])
    assert design_matrix(df, []).shape == (3, 0)
    with pytest.raises(MissingFeature):
        design_matrix(df, ["H=f"])
    with pytest.raises(MissingFeature):
        design_matrix(df, ["z"])


def test_indicator_model_recovers_group_log_odds():
    df = pd.DataFrame({"G": ["f"] * 40 + ["m"] * 40, "y": [1] * 10 + [0] * 30 + [1] * 30 + [0] * 10})
    fit = fit_prediction_model(df, ["G=f"], "y")
    assert fit.coefficients[1] == pytest.approx(-math.log(9.0), abs=1e-6)
    np.testing.assert_allclose(predict(fit, df.iloc[[0, 79]]), [0.25, 0.75], atol=1e-9)
    with pytest.raises(MissingFeature):
        fit_prediction_model(df, ["G=f"], "risk")
