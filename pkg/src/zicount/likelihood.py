"""Log-likelihoods of the six count models and their finite-difference derivatives.

Totals are reduced with ``math.fsum`` (correctly rounded), so a likelihood
value does not depend on row order or on how the rows were chunked.

Derivatives are taken numerically on the packed parameter vector
``(alpha, beta, log_k)``.  Step sizes are fixed functions of the parameter
values so every derivative is deterministic.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .distributions import (
    _nb_from_log,
    _nb_zero_from_log,
    _poisson_from_log,
    log_factorial,
)
from .model import Dataset, ModelKind, ParameterVector, linear_predictor, softplus

__all__ = [
    "InvalidPointError",
    "LogLikValue",
    "loglik",
    "loglik_packed",
    "per_observation",
    "gradient",
    "hessian",
    "gradient_steps",
    "hessian_steps",
]


class InvalidPointError(ArithmeticError):
    """The log-likelihood is not finite at (or next to) the requested point."""


@dataclass(frozen=True)
class LogLikValue:
    total: float
    per_obs: np.ndarray | None = None

    @property
    def valid(self) -> bool:
        return math.isfinite(self.total)


class _Split:
    """Rows partitioned once into ``y == 0`` and ``y > 0``."""

    def __init__(self, data: Dataset):
        zero = data.zero_mask
        pos = ~zero
        self.idx0 = np.flatnonzero(zero)
        self.idx1 = np.flatnonzero(pos)
        self.X0, self.Z0 = data.X[zero], data.Z[zero]
        self.X1, self.Z1 = data.X[pos], data.Z[pos]
        self.y1 = data.y[pos].astype(float)
        self.logfact1 = log_factorial(data.y[pos])
        self.n = data.n


_SPLITS: "weakref.WeakKeyDictionary[Dataset, _Split]" = weakref.WeakKeyDictionary()


def _split(data: Dataset) -> _Split:
    s = _SPLITS.get(data)
    if s is None:
        s = _SPLITS[data] = _Split(data)
    return s


def _contributions(kind: ModelKind, theta: np.ndarray, s: _Split):
    """Per-observation log-masses for the zero rows and the positive rows."""
    p = s.X1.shape[1]
    q = s.Z1.shape[1] if kind.zero_inflated else 0
    alpha = theta[:q]
    beta = theta[q : q + p]
    log_k = theta[q + p] if kind.has_k else None

    eta0 = linear_predictor(s.X0, beta)
    eta1 = linear_predictor(s.X1, beta)
    if not kind.zero_inflated:
        if kind is ModelKind.POISSON:
            with np.errstate(over="ignore"):
                ll0 = -np.exp(eta0)
            ll1 = _poisson_from_log(s.y1, eta1, s.logfact1)
        else:
            ll0 = _nb_zero_from_log(eta0, log_k)
            ll1 = _nb_from_log(s.y1, eta1, log_k, s.logfact1)
        return ll0, ll1

    t0 = linear_predictor(s.Z0, alpha)
    t1 = linear_predictor(s.Z1, alpha)
    sp0, sp1 = softplus(t0), softplus(t1)
    log_pi0 = -softplus(-t0)
    log_1mpi0, log_1mpi1 = -sp0, -sp1
    if kind in (ModelKind.MZIP, ModelKind.MZINB):
        # connector: log(lam) = X'beta + log(1 + exp(Z'alpha))
        eta0 = eta0 + sp0
        eta1 = eta1 + sp1
    if kind in (ModelKind.ZIP, ModelKind.MZIP):
        with np.errstate(over="ignore"):
            count0 = -np.exp(eta0)
        count1 = _poisson_from_log(s.y1, eta1, s.logfact1)
    else:
        count0 = _nb_zero_from_log(eta0, log_k)
        count1 = _nb_from_log(s.y1, eta1, log_k, s.logfact1)
    with np.errstate(invalid="ignore"):
        ll0 = np.logaddexp(log_pi0, log_1mpi0 + count0)
    ll1 = log_1mpi1 + count1
    return ll0, ll1


def _total(ll0, ll1) -> float:
    try:
        total = math.fsum(ll0.tolist() + ll1.tolist())
    except (OverflowError, ValueError):
        return -math.inf
    return total if math.isfinite(total) else -math.inf


def loglik_packed(kind: ModelKind, theta, data: Dataset) -> float:
    """Total log-likelihood at a packed vector; ``-inf`` marks an invalid point."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return -math.inf
    ll0, ll1 = _contributions(kind, theta, _split(data))
    return _total(ll0, ll1)


def per_observation(kind: ModelKind, params: ParameterVector, data: Dataset) -> np.ndarray:
    s = _split(data)
    ll0, ll1 = _contributions(kind, _packed(kind, params, data), s)
    out = np.empty(s.n)
    out[s.idx0] = ll0
    out[s.idx1] = ll1
    return out


def _packed(kind, params, data):
    theta = params.pack() if isinstance(params, ParameterVector) else np.asarray(params, float)
    expected = ParameterVector.size(kind, data.p, data.q)
    if theta.size != expected:
        raise ValueError(f"{kind} on this dataset expects {expected} parameters, got {theta.size}")
    return theta


def loglik(kind: ModelKind, params, data: Dataset, per_obs: bool = False) -> LogLikValue:
    """Log-likelihood of ``data`` under ``kind`` at ``params``.

    A non-finite value is reported as ``total == -inf`` (``valid`` is False)
    rather than raised.
    """
    if kind.zero_inflated:
        data.check_kind(kind)
    theta = _packed(kind, params, data)
    s = _split(data)
    ll0, ll1 = _contributions(kind, theta, s)
    total = _total(ll0, ll1)
    if not per_obs:
        return LogLikValue(total)
    out = np.empty(s.n)
    out[s.idx0] = ll0
    out[s.idx1] = ll1
    return LogLikValue(total, out)


def rounding_scale(kind: ModelKind, theta, data: Dataset) -> float:
    """Root-sum-square size of the per-observation intermediates at ``theta``.

    Terms such as ``y * log(lam)`` and ``log(y!)`` cancel to a small
    contribution but are each rounded at their own magnitude, so this bounds
    the absolute rounding noise of the total (times machine epsilon).  In a
    zero row the count-part mass only matters through its mixture weight.
    """
    theta = np.asarray(theta, dtype=float)
    s = _split(data)
    ll0, ll1 = _contributions(kind, theta, s)
    q = data.q if kind.zero_inflated else 0
    beta = theta[q : q + data.p]
    eta0 = linear_predictor(s.X0, beta)
    eta1 = linear_predictor(s.X1, beta)
    if kind in (ModelKind.MZIP, ModelKind.MZINB):
        alpha = theta[:q]
        eta0 = eta0 + softplus(linear_predictor(s.Z0, alpha))
        eta1 = eta1 + softplus(linear_predictor(s.Z1, alpha))
    lam0 = np.exp(np.minimum(eta0, 700.0))
    lam1 = np.exp(np.minimum(eta1, 700.0))
    if kind.zero_inflated:
        # share of the zero probability carried by the count part
        log_1mpi0 = -softplus(linear_predictor(s.Z0, theta[:q]))
        with np.errstate(invalid="ignore"):
            weight = np.exp(np.minimum(log_1mpi0 - lam0 - ll0, 0.0))
        weight = np.where(np.isfinite(weight), weight, 1.0)
    else:
        weight = 1.0
    m0 = lam0 * weight + np.abs(ll0)
    m1 = s.y1 * (np.abs(eta1) + 1.0) + lam1 + s.logfact1
    return float(np.sqrt(np.sum(m0 * m0) + np.sum(m1 * m1)))


def gradient_steps(theta) -> np.ndarray:
    return np.maximum(1e-6, 1e-7 * np.abs(theta))


def hessian_steps(theta) -> np.ndarray:
    return np.maximum(1e-4, 1e-4 * np.abs(theta))


def _central_gradient(f, theta, steps):
    g = np.empty(theta.size)
    for j, h in enumerate(steps):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        fu, fd = f(up), f(dn)
        if not (math.isfinite(fu) and math.isfinite(fd)):
            raise InvalidPointError(f"log-likelihood not finite when probing coordinate {j}")
        g[j] = (fu - fd) / (up[j] - dn[j])
    return g


def gradient(kind: ModelKind, params, data: Dataset, steps=None) -> np.ndarray:
    """Central-difference gradient of the log-likelihood on the packed scale."""
    theta = _packed(kind, params, data)
    steps = gradient_steps(theta) if steps is None else steps
    return _central_gradient(lambda t: loglik_packed(kind, t, data), theta, steps)


def hessian(kind: ModelKind, params, data: Dataset) -> np.ndarray:
    """Central differences of central-difference gradients, symmetrised.

    Both levels use ``hessian_steps`` (about eps**(1/4)), which balances
    truncation against rounding for a second derivative.
    """
    theta = _packed(kind, params, data)
    steps = hessian_steps(theta)
    f = lambda t: loglik_packed(kind, t, data)  # noqa: E731
    H = np.empty((theta.size, theta.size))
    for j, h in enumerate(steps):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        H[:, j] = (_central_gradient(f, up, steps) - _central_gradient(f, dn, steps)) / (up[j] - dn[j])
    return 0.5 * (H + H.T)
