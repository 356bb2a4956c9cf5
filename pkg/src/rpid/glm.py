"""Generalized linear models fitted by iteratively reweighted least squares.

Two families are supported: Bernoulli with a logit link and Gamma with a
log link. Coefficient vectors always carry the intercept first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOLERANCE = 1e-8
MAX_ITER = 100
COEF_CAP = 30.0
# fitted probabilities are kept this far from 0 and 1 inside the IRLS weights
_MU_EPS = 1e-10


class GlmError(ValueError):
    pass


class SeparationDetected(GlmError):
    pass


class SingularDesign(GlmError):
    pass


class InvalidResponse(GlmError):
    pass


class DimensionMismatch(GlmError):
    pass


class NotConverged(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GlmFamily:
    family: str
    link: str

    def __post_init__(self):
        if (self.family, self.link) not in {("bernoulli", "logit"), ("gamma", "log")}:
            raise GlmError(f"unsupported family/link pair: {self.family}/{self.link}")

    def inverse_link(self, eta: np.ndarray) -> np.ndarray:
        if self.link == "logit":
            return 1.0 / (1.0 + np.exp(-eta))
        return np.exp(eta)

    def link_fn(self, mu):
        if self.link == "logit":
            return np.log(mu / (1.0 - mu))
        return np.log(mu)


BERNOULLI = GlmFamily("bernoulli", "logit")
GAMMA = GlmFamily("gamma", "log")


def family_for_kind(kind: str) -> GlmFamily:
    return GAMMA if kind == "continuous" else BERNOULLI


@dataclass(frozen=True)
class GlmFit:
    family: GlmFamily
    feature_names: tuple[str, ...]
    coefficients: np.ndarray
    dispersion: float = 1.0
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (len(self.feature_names) + 1,):
            raise DimensionMismatch(
                f"{len(self.feature_names)} features need {len(self.feature_names) + 1} coefficients, got {coef.shape}"
            )
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def shape(self) -> float:
        """Gamma shape estimate (reciprocal of the Pearson dispersion)."""
        return 1.0 / self.dispersion

    def to_dict(self) -> dict:
        return {
            "family": self.family.family,
            "link": self.family.link,
            "feature_names": list(self.feature_names),
            "coefficients": [float(c) for c in self.coefficients],
            "dispersion": float(self.dispersion),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GlmFit":
        return cls(
            family=GlmFamily(d["family"], d["link"]),
            feature_names=tuple(d["feature_names"]),
            coefficients=np.array(d["coefficients"], dtype=float),
            dispersion=float(d["dispersion"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
        )


def _design(rows, n_features: int) -> np.ndarray:
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, n_features) if n_features else x.reshape(-1, 0)
    if x.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} columns, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise GlmError("design rows must be finite")
    return np.column_stack([np.ones(x.shape[0]), x])


def linear_predictor(coefficients: np.ndarray, x: np.ndarray) -> np.ndarray:
    # column-by-column accumulation keeps each row's value independent of batch size
    eta = np.full(x.shape[0], coefficients[0])
    for j in range(1, coefficients.size):
        eta = eta + coefficients[j] * x[:, j]
    return eta


def log_likelihood(family: GlmFamily, coefficients, rows, response) -> float:
    """Family log-likelihood up to terms free of the coefficients.

    For the Gamma family the shape is fixed at one, which leaves the
    maximizer unchanged.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    x = _design(rows, coefficients.size - 1)
    y = np.asarray(response, dtype=float)
    eta = x @ coefficients
    if family.family == "bernoulli":
        # y*eta - log(1 + e^eta), written stably
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return float(np.sum(-y * np.exp(-eta) - eta))


def fit(family: GlmFamily, rows, response, feature_names: Sequence[str] | None = None) -> GlmFit:
    """Maximum-likelihood fit by Fisher scoring.

    ``rows`` is an (n, p) array of covariates without the intercept column.
    Raises SeparationDetected if any coefficient leaves [-30, 30] while
    iterating; warns NotConverged and returns ``converged=False`` when the
    iteration limit is reached.
    """
    y = np.asarray(response, dtype=float).ravel()
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(y.size, -1)
    p = rows.shape[1]
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(p))
    if len(feature_names) != p:
        raise DimensionMismatch(f"{len(feature_names)} names for {p} columns")
    x = _design(rows, p)
    n = x.shape[0]
    if y.size != n:
        raise DimensionMismatch(f"{n} rows but {y.size} responses")
    if n < p + 2:
        raise GlmError(f"need at least {p + 2} rows to fit {p} features, got {n}")
    if not np.all(np.isfinite(y)):
        raise InvalidResponse("response must be finite")
    if family.family == "bernoulli":
        if np.any((y < 0) | (y > 1)):
            raise InvalidResponse("bernoulli response must lie in [0, 1]")
        ybar = y.mean()
        if ybar <= 0.0 or ybar >= 1.0:
            raise InvalidResponse("bernoulli response is constant at a boundary")
    elif np.any(y <= 0):
        raise InvalidResponse("gamma response must be strictly positive")
    if np.linalg.matrix_rank(x) < p + 1:
        raise SingularDesign("design matrix is rank deficient")

    beta = np.zeros(p + 1)
    beta[0] = float(family.link_fn(y.mean()))
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        eta = x @ beta
        mu = family.inverse_link(eta)
        if family.family == "bernoulli":
            mu = np.clip(mu, _MU_EPS, 1.0 - _MU_EPS)
            w = mu * (1.0 - mu)
            z = eta + (y - mu) / w
        else:
            w = np.ones_like(mu)
            z = eta + (y - mu) / mu
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
            raise SeparationDetected(f"working response overflowed at iteration {it}")
        sw = np.sqrt(w)
        new_beta = np.linalg.lstsq(x * sw[:, None], z * sw, rcond=None)[0]
        if family.family == "gamma":
            # unit-weight scoring can overshoot on the log scale; halve until the likelihood improves
            ll_old = log_likelihood(family, beta, rows, y)
            for _ in range(30):
                if log_likelihood(family, new_beta, rows, y) >= ll_old - 1e-12 * abs(ll_old):
                    break
                new_beta = 0.5 * (beta + new_beta)
        if np.any(np.abs(new_beta) > COEF_CAP):
            raise SeparationDetected(
                f"coefficient magnitude exceeded {COEF_CAP} at iteration {it}; the classes are likely separable"
            )
        step = float(np.max(np.abs(new_beta - beta)))
        beta = new_beta
        if step < TOLERANCE:
            converged = True
            break
    if not converged:
        warnings.warn(f"IRLS did not converge in {MAX_ITER} iterations", NotConverged, stacklevel=2)

    dispersion = 1.0
    if family.family == "gamma":
        mu = family.inverse_link(x @ beta)
        dof = max(n - (p + 1), 1)
        dispersion = float(np.sum(((y - mu) / mu) ** 2) / dof)
    return GlmFit(
        family=family,
        feature_names=tuple(feature_names),
        coefficients=beta,
        dispersion=dispersion,
        converged=converged,
        iterations=it,
    )


def predict_mean(fit: GlmFit, rows) -> np.ndarray:
    """Inverse link of the linear predictor; accepts one row or a batch."""
    rows = np.asarray(rows, dtype=float)
    single = rows.ndim <= 1
    if single and rows.size != len(fit.feature_names):
        raise DimensionMismatch(f"row has {rows.size} values, model has {len(fit.feature_names)} features")
    x = _design(rows.reshape(1, -1) if single else rows, len(fit.feature_names))
    mu = fit.family.inverse_link(linear_predictor(fit.coefficients, x))
    return mu[0] if single else mu


def residuals(fit: GlmFit, rows, response) -> np.ndarray:
    """Response-scale residuals ``response - predict_mean``."""
    y = np.asarray(response, dtype=float).ravel()
    rows = np.asarray(rows, dtype=float)
    if rows.ndim < 2:
        rows = rows.reshape(y.size, len(fit.feature_names))
    mu = predict_mean(fit, rows)
    if mu.size != y.size:
        raise DimensionMismatch(f"{mu.size} predictions for {y.size} responses")
    return y - mu
