"""Incidence density ratios and marginal-mean predictions from a fit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import Z_CRIT, FitResult
from .model import INTERCEPT_NAMES, ModelKind, linear_predictor, marginal_mean, softplus

__all__ = ["IdrReport", "idr", "predict_marginal_mean"]


@dataclass(frozen=True)
class IdrReport:
    """Rate ratio for a one-unit increase in a count-part covariate.

    For marginal kinds ``idr`` is a number with a Wald interval built on the
    log scale.  For ZIP/ZINB the ratio depends on the zero-part profile, so
    ``idr`` is a list of ``(profile, ratio)`` pairs and ``summary`` holds
    its min/median/max; no interval is given.
    """

    covariate: str
    kind: ModelKind
    idr: float | list
    ci_95: tuple | None
    constant: bool
    summary: dict | None = None


def _covariate_index(fit: FitResult, covariate) -> int:
    if isinstance(covariate, str):
        if covariate not in fit.x_names:
            raise KeyError(f"covariate {covariate!r} is not in the count-part design")
        return fit.x_names.index(covariate)
    j = int(covariate)
    if not 0 <= j < len(fit.x_names):
        raise IndexError(f"covariate index {j} out of range")
    return j


def _is_intercept(name: str) -> bool:
    return name.lower() in INTERCEPT_NAMES


def idr(fit: FitResult, covariate, profiles=None, dataset=None) -> IdrReport:
    """IDR of ``covariate`` (name or column index in ``X``).

    ZIP/ZINB ratios are evaluated at ``profiles`` (rows of ``Z``), defaulting
    to the observed rows of ``dataset``.  A covariate absent from ``Z`` has
    no zero-part coefficient and yields a flat profile curve.
    """
    j = _covariate_index(fit, covariate)
    name = fit.x_names[j]
    if _is_intercept(name):
        raise ValueError("the IDR is undefined for the intercept")
    beta_j = float(fit.estimates.beta[j])
    if fit.kind.marginal:
        se = float(fit.std_errors[fit.names.index(f"count:{name}")])
        ci = (float(np.exp(beta_j - Z_CRIT * se)), float(np.exp(beta_j + Z_CRIT * se)))
        return IdrReport(name, fit.kind, float(np.exp(beta_j)), ci, True)

    if profiles is None:
        if dataset is None:
            raise ValueError("ZIP/ZINB IDRs need evaluation profiles or the dataset")
        profiles = dataset.Z
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    if profiles.shape[1] != len(fit.z_names):
        raise ValueError(f"profiles need {len(fit.z_names)} columns")
    alpha = fit.estimates.alpha
    alpha_j = float(alpha[fit.z_names.index(name)]) if name in fit.z_names else 0.0
    t = linear_predictor(profiles, alpha)
    # exp(beta_j) * (1 + e^t) / (1 + e^(t + alpha_j)), in log space
    ratios = np.exp(beta_j + softplus(t) - softplus(t + alpha_j))
    curve = [(tuple(row), float(r)) for row, r in zip(profiles, ratios)]
    summary = {
        "min": float(np.min(ratios)),
        "median": float(np.median(ratios)),
        "max": float(np.max(ratios)),
    }
    return IdrReport(name, fit.kind, curve, None, False, summary)


def predict_marginal_mean(fit: FitResult, X_new, Z_new=None) -> np.ndarray:
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != len(fit.x_names):
        raise ValueError(f"X rows need {len(fit.x_names)} columns, got {X_new.shape[1]}")
    if fit.kind.zero_inflated:
        Z_new = X_new if Z_new is None and fit.z_names == fit.x_names else Z_new
        if Z_new is None:
            raise ValueError("zero-inflated fits need zero-part rows")
        Z_new = np.atleast_2d(np.asarray(Z_new, dtype=float))
        if Z_new.shape != (X_new.shape[0], len(fit.z_names)):
            raise ValueError(f"Z rows need {len(fit.z_names)} columns and {X_new.shape[0]} rows")
    return np.asarray(marginal_mean(fit.kind, fit.estimates, X_new, Z_new), dtype=float)
