"""Logistic link-prediction models fit by maximum likelihood.

The restricted model regresses future edge presence on the target layer's
own triadic closure and persistence; the full model adds the other layer's
features and the union-graph features. Fitting is Newton-Raphson with
step-halving; a near-separated fit restarts with a tiny ridge penalty. The
likelihood ratio between the two converged fits is the significance test
for the extra features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateLabels,
    IncomparableFits,
    InsufficientHistory,
    NumericError,
    ShapeError,
)
from .multiplex import FEATURE_NAMES, DuplexSnapshot, PairFeatures, feature_matrix
from .netbuild import Layer

#: Chi-square critical value at p = 0.001 with 4 degrees of freedom.
CHI2_4DF_P001 = 18.47

#: Extra coefficients in the full model vs the restricted one.
FULL_VS_RESTRICTED_DF = 4

_GRADIENT_TOL = 1e-8
_MAX_ITER = 100
_SEPARATION_BOUND = 30.0
_RIDGE_PENALTY = 1e-6


@dataclass(frozen=True)
class ModelSpec:
    """Which regressors enter the linear predictor, and at what lag."""

    variant: str  # "restricted" | "full"
    lag_h: int
    regressors: tuple[str, ...]  # "intercept" first

    def __post_init__(self):
        if self.regressors[0] != "intercept":
            raise ValueError("first regressor must be the intercept")
        for name in self.regressors[1:]:
            if name not in FEATURE_NAMES:
                raise ValueError(f"unknown regressor {name!r}")

    @property
    def n_coefficients(self) -> int:
        return len(self.regressors)


def restricted_spec(lag_h: int, own_layer: Layer = Layer.FINANCIAL) -> ModelSpec:
    """Single-layer model: intercept, own-layer closure, own-layer persistence."""
    if own_layer is Layer.FINANCIAL:
        names = ("intercept", "t_fin", "e_fin")
    elif own_layer is Layer.SOCIAL:
        names = ("intercept", "t_soc", "e_soc")
    else:
        raise ValueError("restricted model needs a concrete layer")
    return ModelSpec("restricted", lag_h, names)


def full_spec(lag_h: int) -> ModelSpec:
    """Both layers plus the union-graph features."""
    return ModelSpec(
        "full",
        lag_h,
        ("intercept", "t_fin", "e_fin", "t_soc", "e_soc", "t_multi", "e_any"),
    )


@dataclass(frozen=True)
class TrainingSet:
    """Stacked (features at t', label at t'+h) rows over the training span.

    ``features`` columns follow FEATURE_NAMES; every source window
    contributes one row per vertex pair, in lexicographic pair order.
    """

    features: np.ndarray  # m x len(FEATURE_NAMES)
    labels: np.ndarray  # m, values 0.0 / 1.0
    source_windows: tuple[int, ...]
    target_layer: Layer
    lag_h: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "source_windows", tuple(self.source_windows))
        if features.ndim != 2 or features.shape[1] != len(FEATURE_NAMES):
            raise ShapeError(f"features must be m x {len(FEATURE_NAMES)}")
        if labels.shape != (features.shape[0],):
            raise ShapeError("labels must match feature rows")
        features.flags.writeable = False
        labels.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def key(self) -> tuple:
        """Identity used to check that two fits saw the same data."""
        return (self.target_layer, self.lag_h, self.source_windows, self.n_rows)


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    coefficients: np.ndarray
    loglik: float
    iterations: int
    gradient_norm: float
    converged: bool
    ridge_fallback: bool = False
    data_key: tuple = ()

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coef)
        coef.flags.writeable = False


def edge_label_vector(snapshot: DuplexSnapshot, layer: Layer) -> np.ndarray:
    """Presence of each pair in the given layer, lexicographic pair order."""
    adj = snapshot.layer_graph(layer).adjacency
    iu, ju = np.triu_indices(snapshot.n, 1)
    return adj[iu, ju].astype(np.float64)


def build_training_set(
    snapshots: Sequence[DuplexSnapshot],
    target_layer: Layer,
    lag_h: int,
    train_span: Sequence[int],
    feature_matrices: Sequence[np.ndarray] | None = None,
) -> TrainingSet:
    """One row per (pair, source window): features now, edge label lag_h later.

    ``feature_matrices`` may carry precomputed per-snapshot matrices so sweeps
    do not recompute them; entries must align with ``snapshots``.
    """
    span = tuple(int(t) for t in train_span)
    if not span:
        raise InsufficientHistory("empty training span")
    if lag_h < 1:
        raise ValueError("lag must be at least 1 window step")
    for t in span:
        if t < 0 or t + lag_h >= len(snapshots):
            raise InsufficientHistory(
                f"source window {t} needs snapshot {t + lag_h}, "
                f"have {len(snapshots)}"
            )
    blocks = []
    labels = []
    for t in span:
        if feature_matrices is not None:
            blocks.append(feature_matrices[t])
        else:
            blocks.append(feature_matrix(snapshots[t]))
        labels.append(edge_label_vector(snapshots[t + lag_h], target_layer))
    return TrainingSet(
        features=np.concatenate(blocks, axis=0),
        labels=np.concatenate(labels),
        source_windows=span,
        target_layer=target_layer,
        lag_h=lag_h,
    )


def design_matrix(spec: ModelSpec, data: TrainingSet) -> np.ndarray:
    """Regressor columns in spec order, intercept of ones first."""
    cols = [np.ones(data.n_rows)]
    for name in spec.regressors[1:]:
        cols.append(data.features[:, FEATURE_NAMES.index(name)])
    return np.column_stack(cols)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ez = np.exp(eta[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(eta: np.ndarray) -> np.ndarray:
    """log(1 + e^eta) without overflow at large |eta|."""
    return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))


def loglik(spec: ModelSpec, coefficients, data: TrainingSet) -> float:
    """Bernoulli log-likelihood sum y*eta - log(1 + e^eta) over all rows.

    The reduction uses exact compensated summation, so the value is
    independent of row count quirks and reproducible to the last bit.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (spec.n_coefficients,):
        raise ShapeError(
            f"expected {spec.n_coefficients} coefficients, got {coefficients.shape}"
        )
    if not np.all(np.isfinite(coefficients)):
        raise NumericError("non-finite coefficient")
    x = design_matrix(spec, data)
    eta = x @ coefficients
    terms = data.labels * eta - _softplus(eta)
    return math.fsum(terms)


def _loglik_fast(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - _softplus(eta)))


def _newton(x, y, penalty, tol, max_iter):
    """Maximize the (optionally ridge-penalized) log-likelihood.

    Returns (beta, iterations, gradient_max_norm, converged, escaped) where
    ``escaped`` flags a coefficient wandering past the separation bound.
    """
    m, p = x.shape
    beta = np.zeros(p)
    eta = x @ beta
    objective = _loglik_fast(y, eta) - 0.5 * penalty * float(beta @ beta)
    iterations = 0
    for iterations in range(max_iter + 1):
        prob = _sigmoid(eta)
        grad = x.T @ (y - prob) - penalty * beta
        gnorm = float(np.max(np.abs(grad))) if p else 0.0
        if gnorm <= tol:
            return beta, iterations, gnorm, True, False
        if iterations == max_iter:
            return beta, iterations, gnorm, False, False
        weight = prob * (1.0 - prob)
        hessian = x.T @ (x * weight[:, None])
        if penalty:
            hessian = hessian + penalty * np.eye(p)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, grad, rcond=None)[0]
        # Step-halving guards against early overshoot; the tolerance lets
        # final polishing steps through when the objective change is below
        # evaluation noise.
        no_worse = objective - 1e-10 * (1.0 + abs(objective))
        scale = 1.0
        while True:
            candidate = beta + scale * step
            eta_new = x @ candidate
            obj_new = _loglik_fast(y, eta_new) - 0.5 * penalty * float(
                candidate @ candidate
            )
            if obj_new >= no_worse or scale < 2.0**-30:
                break
            scale *= 0.5
        beta = candidate
        eta = eta_new
        objective = obj_new
        if penalty == 0.0 and np.any(np.abs(beta) > _SEPARATION_BOUND):
            return beta, iterations + 1, gnorm, False, True
    return beta, iterations, gnorm, False, False


def fit(spec: ModelSpec, data: TrainingSet) -> FitResult:
    """Maximum-likelihood coefficients by Newton-Raphson.

    Deterministic given the data. If any coefficient escapes past the
    separation bound (persistence can be a near-perfect predictor at short
    lags), the fit restarts with an L2 penalty of 1e-6 and flags itself.
    """
    if data.n_rows == 0:
        raise DegenerateLabels("empty training set")
    y = data.labels
    if np.all(y == y[0]):
        raise DegenerateLabels("all training labels identical")
    x = design_matrix(spec, data)

    beta, iters, gnorm, converged, escaped = _newton(
        x, y, 0.0, _GRADIENT_TOL, _MAX_ITER
    )
    ridge = False
    if escaped:
        ridge = True
        beta, iters, gnorm, converged, _ = _newton(
            x, y, _RIDGE_PENALTY, _GRADIENT_TOL, _MAX_ITER
        )
    return FitResult(
        spec=spec,
        coefficients=beta,
        loglik=loglik(spec, beta, data),
        iterations=iters,
        gradient_norm=gnorm,
        converged=converged,
        ridge_fallback=ridge,
        data_key=data.key,
    )


def gradient(spec: ModelSpec, coefficients, data: TrainingSet) -> np.ndarray:
    """Analytic gradient of the log-likelihood at the given coefficients."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    x = design_matrix(spec, data)
    prob = _sigmoid(x @ coefficients)
    return x.T @ (data.labels - prob)


def standard_errors(result: FitResult, data: TrainingSet) -> np.ndarray:
    """Wald standard errors from the inverse observed information."""
    x = design_matrix(result.spec, data)
    prob = _sigmoid(x @ result.coefficients)
    weight = prob * (1.0 - prob)
    info = x.T @ (x * weight[:, None])
    return np.sqrt(np.diag(np.linalg.inv(info)))


def predict(result: FitResult, features: PairFeatures) -> float:
    """Edge probability for one pair under the fitted model."""
    eta = result.coefficients[0]
    for coef, name in zip(result.coefficients[1:], result.spec.regressors[1:]):
        eta += coef * getattr(features, name)
    return float(_sigmoid(np.array([eta]))[0])


def predict_matrix(result: FitResult, features: np.ndarray) -> np.ndarray:
    """Edge probabilities for a full pair-feature matrix (FEATURE_NAMES cols)."""
    eta = np.full(features.shape[0], result.coefficients[0])
    for coef, name in zip(result.coefficients[1:], result.spec.regressors[1:]):
        eta += coef * features[:, FEATURE_NAMES.index(name)]
    return _sigmoid(eta)


def likelihood_ratio(full: FitResult, restricted: FitResult) -> tuple[float, bool]:
    """Wilks statistic 2 (L_full - L_restricted) and its significance.

    Significance is strict exceedance of the chi-square critical value at
    p = 0.001 with 4 degrees of freedom.
    """
    if full.data_key != restricted.data_key:
        raise IncomparableFits("fits were trained on different data")
    full_names = set(full.spec.regressors)
    restricted_names = set(restricted.spec.regressors)
    if not (restricted_names < full_names):
        raise IncomparableFits("restricted regressors must nest inside full")
    lam = 2.0 * (full.loglik - restricted.loglik)
    # Nested optima cannot make the full model worse; tiny negatives are
    # optimizer tolerance noise.
    if lam < 0.0:
        lam = 0.0
    return lam, lam > CHI2_4DF_P001
