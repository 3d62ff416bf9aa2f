"""Maximum-likelihood fitting, standard errors and model comparison."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .likelihood import InvalidPointError, gradient, gradient_steps, hessian, loglik_packed, rounding_scale
from .model import Dataset, ModelKind, ParameterVector

__all__ = [
    "FitConfig",
    "FitResult",
    "FitError",
    "RankDeficientError",
    "Z_CRIT",
    "check_rank",
    "initialize",
    "fit",
    "compare",
]

logger = logging.getLogger(__name__)

Z_CRIT = 1.959964
RANK_TOL = 1e-10


class FitError(ValueError):
    """The model cannot be fitted to this dataset."""


class RankDeficientError(FitError):
    def __init__(self, design: str, columns):
        self.design = design
        self.columns = tuple(columns)
        super().__init__(f"design {design} is rank deficient; dependent columns: {', '.join(self.columns)}")


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-10
    restart_attempts: int = 3

    def __post_init__(self):
        for name in ("max_iterations", "gradient_tolerance", "step_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.restart_attempts < 0:
            raise ValueError("restart_attempts must be nonnegative")


@dataclass
class FitResult:
    """Fitted model.  Estimates and errors are on the natural scale (``k``, not ``log k``).

    ``theta`` and ``covariance`` keep the packed optimisation scale
    ``(alpha, beta, log_k)`` for downstream calculations.
    """

    kind: ModelKind
    estimates: ParameterVector
    std_errors: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    condition_warning: bool
    names: tuple = ()
    theta: np.ndarray = field(default=None, repr=False)
    covariance: np.ndarray = field(default=None, repr=False)
    gradient: np.ndarray = field(default=None, repr=False)
    x_names: tuple = ()
    z_names: tuple = ()
    fingerprint: str = ""

    @property
    def values(self) -> np.ndarray:
        """Estimates on the natural scale in packed order."""
        e = self.estimates
        tail = [] if e.log_k is None else [e.k]
        return np.concatenate([e.alpha, e.beta, tail])

    @property
    def n_params(self) -> int:
        return self.values.size

    @property
    def z_stats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.values / self.std_errors

    @property
    def significant_at_05(self) -> np.ndarray:
        return np.abs(self.z_stats) > Z_CRIT

    @property
    def minus2ll(self) -> float:
        return -2.0 * self.loglik

    @property
    def aic(self) -> float:
        return self.minus2ll + 2 * self.n_params

    @property
    def ok(self) -> bool:
        return self.converged and not self.condition_warning

    def table(self):
        """Rows of ``(name, estimate, se, z, significant)``."""
        return list(zip(self.names, self.values, self.std_errors, self.z_stats, self.significant_at_05))


def parameter_names(kind: ModelKind, data: Dataset) -> tuple:
    names = []
    if kind.zero_inflated:
        names += [f"zero:{c}" for c in data.z_names]
    names += [f"count:{c}" for c in data.x_names]
    if kind.has_k:
        names.append("k")
    return tuple(names)


def check_rank(data: Dataset, kind: ModelKind) -> None:
    """Pivoted QR rank check; raises naming the dependent columns."""
    designs = [("X", data.X, data.x_names)]
    if kind.zero_inflated:
        designs.append(("Z", data.Z, data.z_names))
    for label, M, names in designs:
        if M.shape[1] == 0:
            raise FitError(f"design {label} has no columns")
        _, R, piv = scipy.linalg.qr(M, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        if d.size == 0 or d[0] == 0:
            raise RankDeficientError(label, names)
        rank = int(np.sum(d > RANK_TOL * d[0]))
        if rank < M.shape[1] or M.shape[0] < M.shape[1]:
            raise RankDeficientError(label, [names[j] for j in piv[rank:]] or names)


def _intercept_index(M):
    for j in range(M.shape[1]):
        if np.all(M[:, j] == 1.0):
            return j
    return None


def initialize(kind: ModelKind, data: Dataset) -> ParameterVector:
    """Starting values: intercepts from the mean count and the zero share."""
    if not np.any(data.y > 0):
        raise FitError("all responses are zero; the mean is undefined on the log scale")
    data.check_kind(kind)
    beta = np.zeros(data.p)
    j = _intercept_index(data.X)
    if j is not None:
        beta[j] = math.log(float(np.mean(data.y)) + 0.01)
    alpha = np.zeros(data.q if kind.zero_inflated else 0)
    if kind.zero_inflated:
        j = _intercept_index(data.Z)
        if j is not None:
            share = max(0.05, float(np.mean(data.zero_mask)))
            share = min(share, 0.95)
            alpha[j] = math.log(share / (1.0 - share))
    return ParameterVector(alpha, beta, math.log(0.5) if kind.has_k else None)


class _Objective:
    """Negative log-likelihood with its finite-difference gradient."""

    def __init__(self, kind, data):
        self.kind = kind
        self.data = data
        self.evaluations = 0

    def value(self, theta):
        self.evaluations += 1
        return -loglik_packed(self.kind, theta, self.data)

    def grad(self, theta):
        return -gradient(self.kind, theta, self.data)

    def scale(self, theta):
        return rounding_scale(self.kind, theta, self.data)


def _resolved(g, f, theta, tol, obj) -> bool:
    """True when every gradient component is below ``tol`` or below the
    rounding noise of its central difference.

    The noise of ``(f(t+h) - f(t-h)) / 2h`` is about the rounding error of
    ``f`` over ``h``: at least an ulp of the total, and more when large
    counts make per-observation terms much bigger than their sum.
    """
    if np.max(np.abs(g)) < tol:
        return True
    noise = max(2.0 * np.spacing(abs(f)), 2.0 * np.finfo(float).eps * obj.scale(theta))
    return bool(np.all(np.abs(g) < np.maximum(tol, noise / gradient_steps(theta))))


def _bfgs(obj: _Objective, theta0, config: FitConfig, budget: int):
    """BFGS on the inverse Hessian with Armijo backtracking.

    Returns ``(theta, f, g, iterations, status)`` where status is one of
    ``"converged"``, ``"stalled"`` or ``"maxiter"``.
    """
    theta = np.array(theta0, dtype=float)
    f = obj.value(theta)
    if not math.isfinite(f):
        raise InvalidPointError("log-likelihood not finite at the starting point")
    g = obj.grad(theta)
    m = theta.size
    Hinv = np.eye(m) / max(1.0, float(np.max(np.abs(g))))
    first = True
    for it in range(1, budget + 1):
        if _resolved(g, f, theta, config.gradient_tolerance, obj):
            return theta, f, g, it - 1, "converged"
        d = -Hinv @ g
        slope = float(g @ d)
        if slope >= 0:
            Hinv = np.eye(m) / max(1.0, float(np.max(np.abs(g))))
            d = -Hinv @ g
            slope = float(g @ d)
        t = 1.0
        while True:
            cand = theta + t * d
            fc = obj.value(cand)
            if math.isfinite(fc) and fc <= f + 1e-4 * t * slope:
                try:
                    gc = obj.grad(cand)
                    break
                except InvalidPointError:
                    pass
            t *= 0.5
            if t * np.max(np.abs(d)) < config.step_tolerance * (1.0 + np.max(np.abs(theta))):
                return theta, f, g, it, "stalled"
        s = cand - theta
        yv = gc - g
        sy = float(s @ yv)
        theta, f, g = cand, fc, gc
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(yv)):
            if first:
                Hinv = np.eye(m) * (sy / float(yv @ yv))
                first = False
            rho = 1.0 / sy
            V = np.eye(m) - rho * np.outer(s, yv)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        if np.max(np.abs(s)) < config.step_tolerance * (1.0 + np.max(np.abs(theta))):
            status = "converged" if _resolved(g, f, theta, config.gradient_tolerance, obj) else "stalled"
            return theta, f, g, it, status
    status = "converged" if _resolved(g, f, theta, config.gradient_tolerance, obj) else "maxiter"
    return theta, f, g, budget, status


def _covariance(H):
    info = -H
    warning = False
    try:
        c = scipy.linalg.cho_factor(info)
        cov = scipy.linalg.cho_solve(c, np.eye(info.shape[0]))
    except (np.linalg.LinAlgError, ValueError):
        warning = True
        cov = np.linalg.pinv(info)
    if not warning and np.linalg.cond(info) > 1e12:
        warning = True
    diag = np.diag(cov)
    with np.errstate(invalid="ignore"):
        se = np.where(diag > 0, np.sqrt(np.abs(diag)), np.nan)
    if not np.all(np.isfinite(se)):
        warning = True
    return se, cov, warning


def _newton_polish(obj, theta, f, g, H, max_steps=3):
    """Newton steps on a fixed Hessian, kept only while the gradient shrinks.

    Line searches stop once objective differences fall under rounding; the
    gradient is still informative there, so a few chord steps close the gap.
    """
    try:
        c = scipy.linalg.cho_factor(-H)
    except (np.linalg.LinAlgError, ValueError):
        return theta, f, g
    for _ in range(max_steps):
        gnorm = np.max(np.abs(g))
        if gnorm == 0:
            break
        # obj.grad is the gradient of -loglik: ascent step is -(-H)^-1 grad
        cand = theta - scipy.linalg.cho_solve(c, g)
        fc = obj.value(cand)
        if not math.isfinite(fc) or fc > f + 1e-12 * (1.0 + abs(f)):
            break
        try:
            gc = obj.grad(cand)
        except InvalidPointError:
            break
        if np.max(np.abs(gc)) >= gnorm:
            break
        theta, f, g = cand, fc, gc
    return theta, f, g


def fit(kind: ModelKind, data: Dataset, config: FitConfig | None = None, start=None) -> FitResult:
    """Fit ``kind`` to ``data`` by quasi-Newton maximisation of the log-likelihood.

    BFGS runs from :func:`initialize`; its end point is refined with Newton
    steps on the finite-difference Hessian.  If the gradient is still above
    tolerance the search restarts from the best point (jittered from the
    second restart on).  The Hessian at the returned point gives the
    observed-information standard errors.
    """
    config = config or FitConfig()
    kind = ModelKind.parse(kind) if isinstance(kind, str) else kind
    check_rank(data, kind)
    start = initialize(kind, data) if start is None else start
    theta0 = start.pack() if isinstance(start, ParameterVector) else np.asarray(start, float)
    obj = _Objective(kind, data)
    jitter = np.random.default_rng(0)
    tol = config.gradient_tolerance

    best = None
    H = None
    used = 0
    for attempt in range(config.restart_attempts + 1):
        budget = config.max_iterations - used
        if budget <= 0:
            break
        try:
            theta, f, g, iters, status = _bfgs(obj, theta0, config, budget)
        except InvalidPointError:
            theta, f, g, iters, status = theta0, math.inf, None, 0, "invalid"
        used += iters
        if g is not None:
            try:
                Ht = hessian(kind, theta, data)
            except InvalidPointError:
                Ht = None
            if Ht is not None:
                theta, f, g = _newton_polish(obj, theta, f, g, Ht)
            if best is None or f < best[1]:
                best, H = (theta, f, g), Ht
            if _resolved(g, f, theta, tol, obj):
                break
        logger.debug("%s fit attempt %d ended %s at -ll=%.6g", kind, attempt, status, f)
        if best is None:
            break
        theta0 = best[0] + (0 if attempt == 0 else 0.1 * jitter.standard_normal(best[0].size))
    if best is None:
        raise FitError(f"{kind}: log-likelihood is not finite at the starting point")
    theta, f, g = best
    converged = _resolved(g, f, theta, tol, obj)
    if H is None:
        se_packed = np.full(theta.size, np.nan)
        cov = np.full((theta.size, theta.size), np.nan)
        warning = True
    else:
        se_packed, cov, warning = _covariance(H)
    est = ParameterVector.unpack(theta, kind, data.p, data.q)
    se = se_packed.copy()
    if kind.has_k:
        se[-1] = est.k * se_packed[-1]
    return FitResult(
        kind=kind,
        estimates=est,
        std_errors=se,
        loglik=-f,
        converged=converged,
        iterations=used,
        condition_warning=warning,
        names=parameter_names(kind, data),
        theta=theta,
        covariance=cov,
        gradient=-g,
        x_names=data.x_names,
        z_names=data.z_names,
        fingerprint=data.fingerprint(),
    )


def compare(results) -> list:
    """Rank fits of the same dataset by AIC, then parameter count, then kind order."""
    results = list(results)
    if len(results) < 2:
        raise ValueError("compare needs at least two fits")
    prints = {r.fingerprint for r in results}
    if len(prints) > 1:
        raise ValueError("fits come from different datasets")
    return sorted(results, key=lambda r: (r.aic, r.n_params, r.kind.order))
