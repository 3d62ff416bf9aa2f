"""Data model, links, the marginalisation connector and moment formulas.

Two families of zero-inflated models share the same likelihood shape but
differ in what the count-part coefficients mean:

* latent-class (ZIP, ZINB): ``log(lam) = X'beta``, so ``beta`` acts on the
  susceptible subpopulation only and the overall mean is
  ``exp(X'beta) / (1 + exp(Z'alpha))``;
* marginal (MZIP, MZINB): ``log(mu) = X'beta`` for the overall mean ``mu``,
  and the count-part mean is recovered through the connector
  ``log(lam) = X'beta + log(1 + exp(Z'alpha))``.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelKind",
    "Dataset",
    "ParameterVector",
    "linear_predictor",
    "expit",
    "softplus",
    "zero_probability",
    "connector_delta",
    "marginal_mean",
    "model_variance",
]

SATURATION = 30.0
INTERCEPT = "intercept"
INTERCEPT_NAMES = ("intercept", "(intercept)", "const")


class ModelKind(enum.Enum):
    POISSON = "Poisson"
    NB = "NB"
    ZIP = "ZIP"
    ZINB = "ZINB"
    MZIP = "MZIP"
    MZINB = "MZINB"

    @property
    def has_k(self) -> bool:
        return self in (ModelKind.NB, ModelKind.ZINB, ModelKind.MZINB)

    @property
    def zero_inflated(self) -> bool:
        return self in (ModelKind.ZIP, ModelKind.ZINB, ModelKind.MZIP, ModelKind.MZINB)

    @property
    def marginal(self) -> bool:
        """True when ``exp(beta_j)`` is a population-level rate ratio."""
        return self in (ModelKind.POISSON, ModelKind.NB, ModelKind.MZIP, ModelKind.MZINB)

    @property
    def order(self) -> int:
        return list(ModelKind).index(self)

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        for kind in cls:
            if kind.value.lower() == name.strip().lower():
                return kind
        raise ValueError(f"unknown model kind {name!r}")

    def __str__(self):
        return self.value


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Counts ``y`` with a count-part design ``X`` and a zero-part design ``Z``.

    Intercepts are explicit columns.  ``Z`` may have zero columns for models
    without a zero part.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: tuple = ()
    z_names: tuple = ()
    zero_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("y must be a nonempty vector")
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(np.floor(y) != y):
            raise ValueError("y must contain finite nonnegative integers")
        n = y.size
        X = np.asarray(self.X, dtype=float)
        Z = np.asarray(self.Z, dtype=float) if self.Z is not None else np.empty((n, 0))
        if Z.size == 0:
            Z = Z.reshape(n, 0)
        if X.ndim != 2 or X.shape[0] != n:
            raise ValueError(f"X must have {n} rows")
        if Z.ndim != 2 or Z.shape[0] != n:
            raise ValueError(f"Z must have {n} rows")
        x_names = tuple(self.x_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        z_names = tuple(self.z_names) or tuple(f"z{j}" for j in range(Z.shape[1]))
        for label, names, M in (("X", x_names, X), ("Z", z_names, Z)):
            if len(names) != M.shape[1]:
                raise ValueError(f"{label} has {M.shape[1]} columns but {len(names)} names")
            if len(set(names)) != len(names):
                raise ValueError(f"column labels of {label} must be unique")
        object.__setattr__(self, "y", _frozen(y, np.int64))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Z", _frozen(Z))
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "z_names", z_names)
        object.__setattr__(self, "zero_mask", _frozen(y == 0, bool))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.y, self.X, self.Z):
            h.update(str(a.shape).encode())
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(repr((self.x_names, self.z_names)).encode())
        return h.hexdigest()[:16]

    def replicate(self, times: int) -> "Dataset":
        return Dataset(
            np.tile(self.y, times),
            np.tile(self.X, (times, 1)),
            np.tile(self.Z, (times, 1)),
            self.x_names,
            self.z_names,
        )

    def check_kind(self, kind: ModelKind) -> None:
        if kind.zero_inflated and self.q == 0:
            raise ValueError(f"{kind} needs a nonempty zero-part design")


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Packed as ``(alpha, beta, log_k)``; ``alpha`` is empty without a zero part."""

    alpha: np.ndarray
    beta: np.ndarray
    log_k: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(np.atleast_1d(self.alpha)))
        object.__setattr__(self, "beta", _frozen(np.atleast_1d(self.beta)))
        if self.log_k is not None:
            object.__setattr__(self, "log_k", float(self.log_k))

    @property
    def k(self) -> float | None:
        return None if self.log_k is None else float(np.exp(self.log_k))

    def pack(self) -> np.ndarray:
        tail = [] if self.log_k is None else [self.log_k]
        return np.concatenate([self.alpha, self.beta, tail])

    @classmethod
    def unpack(cls, theta, kind: ModelKind, p: int, q: int) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        q = q if kind.zero_inflated else 0
        expected = q + p + int(kind.has_k)
        if theta.size != expected:
            raise ValueError(f"{kind} expects {expected} parameters, got {theta.size}")
        return cls(theta[:q], theta[q : q + p], theta[q + p] if kind.has_k else None)

    @classmethod
    def from_k(cls, alpha, beta, k=None) -> "ParameterVector":
        return cls(alpha, beta, None if k is None else np.log(k))

    @staticmethod
    def size(kind: ModelKind, p: int, q: int) -> int:
        return (q if kind.zero_inflated else 0) + p + int(kind.has_k)


def linear_predictor(M, coef):
    """Row-wise ``M @ coef``, accumulated column by column.

    The fixed left-to-right order (no BLAS, no fused multiply-add) makes the
    result independent of the linear-algebra backend and its threading.
    """
    M = np.asarray(M, dtype=float)
    coef = np.asarray(coef, dtype=float)
    if M.shape[-1] != coef.shape[0]:
        raise ValueError(f"design has {M.shape[-1]} columns but {coef.shape[0]} coefficients")
    out = np.zeros(M.shape[:-1])
    for j in range(coef.shape[0]):
        out = out + M[..., j] * coef[j]
    return out if out.ndim else float(out)


def expit(t):
    """Logistic function; exact to double precision for any ``t``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def softplus(t):
    """``log(1 + exp(t))`` with fixed saturation at ``|t| = 30``."""
    t = np.asarray(t, dtype=float)
    mid = np.log1p(np.exp(np.clip(t, -SATURATION, SATURATION)))
    low = np.exp(np.minimum(t, -SATURATION))
    out = np.where(t > SATURATION, t, np.where(t < -SATURATION, low, mid))
    return float(out) if out.ndim == 0 else out


def zero_probability(z_row, alpha):
    return expit(linear_predictor(z_row, alpha))


def connector_delta(x_row, beta, z_row, alpha):
    """Log of the count-part mean implied by a log-linear marginal mean."""
    return linear_predictor(x_row, beta) + softplus(linear_predictor(z_row, alpha))


def _parts(kind, params, x_row, z_row):
    eta = linear_predictor(x_row, params.beta)
    if not kind.zero_inflated:
        return eta, None
    return eta, linear_predictor(z_row, params.alpha)


def marginal_mean(kind: ModelKind, params: ParameterVector, x_row, z_row=None):
    """Overall expected count ``E(Y)`` for one row or a matrix of rows."""
    eta, zeta = _parts(kind, params, x_row, z_row)
    if kind.marginal:
        return np.exp(eta)
    # ZIP/ZINB: mu = (1 - pi) * lam
    return np.exp(eta - softplus(zeta))


def count_mean(kind: ModelKind, params: ParameterVector, x_row, z_row=None):
    """Mean of the count component (``lam``), before zero inflation."""
    eta, zeta = _parts(kind, params, x_row, z_row)
    if kind in (ModelKind.MZIP, ModelKind.MZINB):
        return np.exp(eta + softplus(zeta))
    return np.exp(eta)


def model_variance(kind: ModelKind, params: ParameterVector, x_row, z_row=None):
    lam = count_mean(kind, params, x_row, z_row)
    if kind is ModelKind.POISSON:
        return lam
    if kind is ModelKind.NB:
        return lam * (1.0 + params.k * lam)
    pi = expit(linear_predictor(z_row, params.alpha))
    if kind in (ModelKind.ZIP, ModelKind.MZIP):
        return lam * (1.0 - pi) * (1.0 + pi * lam)
    return lam * (1.0 - pi) * (1.0 + lam * (params.k + pi))
