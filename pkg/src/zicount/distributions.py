"""Log-mass functions and samplers for the count distributions.

Every log-mass function is vectorised over numpy arrays and works in log
space throughout.  The negative binomial uses the mean/overdispersion
parameterisation ``(lam, k)`` with ``Var = lam * (1 + k * lam)``; the
gamma-shape ``1 / k`` never leaks into the public surface.

The underscore-prefixed ``*_from_log`` kernels skip validation and take the
mean on the log scale.  They are the hot path for the likelihood code, which
wants non-finite values to propagate rather than raise.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

__all__ = [
    "DomainError",
    "RngStream",
    "log_factorial",
    "log_pmf_poisson",
    "log_pmf_nb",
    "log_pmf_zip",
    "log_pmf_zinb",
    "sample_poisson",
    "sample_gamma",
    "sample_nb",
    "sample_bernoulli",
    "sample_lognormal_standard",
]


class DomainError(ValueError):
    """A distribution parameter lies outside its domain."""


_LOG_FACTORIAL_TABLE = gammaln(np.arange(257, dtype=float) + 1.0)
# beyond this gamma shape the plain gammaln difference loses digits
_STIRLING_SHAPE = 1e4


def log_factorial(y):
    """``log(y!)`` with a lookup table for ``y <= 256``."""
    y = np.asarray(y)
    if y.ndim == 0:
        yi = int(y)
        return float(_LOG_FACTORIAL_TABLE[yi]) if yi <= 256 else float(gammaln(yi + 1.0))
    out = np.empty(y.shape, dtype=float)
    small = y <= 256
    out[small] = _LOG_FACTORIAL_TABLE[y[small].astype(np.intp)]
    out[~small] = gammaln(y[~small] + 1.0)
    return out


def _log_rising(shape, y):
    """``log Gamma(shape + y) - log Gamma(shape)`` accurate for huge ``shape``.

    For ``shape`` above ``_STIRLING_SHAPE`` the difference of Stirling series
    is used, written so the leading terms cancel analytically.
    """
    shape = np.asarray(shape, dtype=float)
    y = np.asarray(y, dtype=float)
    shape, y = np.broadcast_arrays(shape, y)
    out = np.empty(shape.shape, dtype=float)
    big = shape > _STIRLING_SHAPE
    small = ~big
    out[small] = gammaln(shape[small] + y[small]) - gammaln(shape[small])
    if big.any():
        a = shape[big]
        n = y[big]
        apn = a + n
        out[big] = (
            (a - 0.5) * np.log1p(n / a)
            + n * np.log(apn)
            - n
            - n / (12.0 * a * apn)
            + (1.0 / apn**3 - 1.0 / a**3) * (-1.0 / 360.0)
        )
    return out


def _poisson_from_log(y, log_lam, log_fact):
    with np.errstate(over="ignore", invalid="ignore"):
        return y * log_lam - np.exp(log_lam) - log_fact


def _nb_zero_from_log(log_lam, log_k):
    """``log p**(1/k)`` with ``p = 1 / (1 + k lam)``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return -np.log1p(np.exp(log_k + log_lam)) / np.exp(log_k)


def _nb_from_log(y, log_lam, log_k, log_fact):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        k = np.exp(log_k)
        log1p_klam = np.log1p(np.exp(log_k + log_lam))
        # y*log(1-p) == y*(log k + log lam - log1p(k lam)); finite for y == 0
        log_one_minus_p = np.where(y > 0, log_k + log_lam - log1p_klam, 0.0)
        return (
            _log_rising(1.0 / k, y)
            - log_fact
            + y * log_one_minus_p
            - log1p_klam / k
        )


def _zero_inflated(y, log_pi, log_1mpi, log_zero_count, log_positive):
    """Mixture log-mass given the count-part log-masses at 0 and at ``y``."""
    with np.errstate(invalid="ignore"):
        zero = np.logaddexp(log_pi, log_1mpi + log_zero_count)
        return np.where(y == 0, zero, log_1mpi + log_positive)


def _check_counts(y):
    y = np.asarray(y)
    if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(np.floor(y) != y):
        raise DomainError("counts must be finite nonnegative integers")
    return y


def _check_positive(name, value):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)) or np.any(value <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return value


def _check_pi(pi):
    pi = np.asarray(pi, dtype=float)
    if not np.all(np.isfinite(pi)) or np.any(pi < 0) or np.any(pi >= 1):
        raise DomainError("pi must lie in [0, 1)")
    return pi


def _scalarize(out):
    return float(out) if np.ndim(out) == 0 else out


def log_pmf_poisson(y, lam):
    """Poisson log-mass ``y log(lam) - lam - log(y!)``."""
    y = _check_counts(y)
    lam = _check_positive("lambda", lam)
    return _scalarize(_poisson_from_log(y, np.log(lam), log_factorial(y)))


def log_pmf_nb(y, lam, k):
    """Negative binomial log-mass with mean ``lam`` and overdispersion ``k``.

    Stable as ``k -> 0``, where it tends to the Poisson log-mass.
    """
    y = _check_counts(y)
    lam = _check_positive("lambda", lam)
    k = _check_positive("k", k)
    return _scalarize(_nb_from_log(y, np.log(lam), np.log(k), log_factorial(y)))


def log_pmf_zip(y, lam, pi):
    """Zero-inflated Poisson log-mass with structural-zero probability ``pi``."""
    y = _check_counts(y)
    lam = _check_positive("lambda", lam)
    pi = _check_pi(pi)
    log_lam = np.log(lam)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    out = _zero_inflated(
        y, log_pi, np.log1p(-pi), -lam, _poisson_from_log(y, log_lam, log_factorial(y))
    )
    return _scalarize(out)


def log_pmf_zinb(y, lam, pi, k):
    """Zero-inflated negative binomial log-mass."""
    y = _check_counts(y)
    lam = _check_positive("lambda", lam)
    pi = _check_pi(pi)
    k = _check_positive("k", k)
    log_lam, log_k = np.log(lam), np.log(k)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    out = _zero_inflated(
        y,
        log_pi,
        np.log1p(-pi),
        _nb_zero_from_log(log_lam, log_k),
        _nb_from_log(y, log_lam, log_k, log_factorial(y)),
    )
    return _scalarize(out)


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's PCG64 seeded through ``SeedSequence(seed,
    spawn_key=(stream_id,))``, so distinct stream ids give independent
    sequences.  A stream is single-owner; never share one across workers.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be unsigned")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _gen(rng):
    return rng.generator if isinstance(rng, RngStream) else rng


def sample_poisson(rng, lam, size=None):
    lam = _check_positive("lambda", lam)
    return _gen(rng).poisson(lam, size=size)


def sample_gamma(rng, shape, scale, size=None):
    shape = _check_positive("shape", shape)
    scale = _check_positive("scale", scale)
    return _gen(rng).gamma(shape, scale, size=size)


def sample_nb(rng, lam, k, size=None):
    """Gamma-Poisson mixture: ``lam* ~ Gamma(1/k, k lam)``, ``y ~ Poisson(lam*)``."""
    lam = _check_positive("lambda", lam)
    k = _check_positive("k", k)
    g = _gen(rng)
    rate = g.gamma(1.0 / k, k * lam, size=size)
    return g.poisson(rate)


def sample_bernoulli(rng, p, size=None):
    p = np.asarray(p, dtype=float)
    if not np.all((p >= 0) & (p <= 1)):
        raise DomainError("p must lie in [0, 1]")
    return (_gen(rng).random(size=size if size is not None else p.shape) < p).astype(np.int64)


def sample_lognormal_standard(rng, size=None):
    return np.exp(_gen(rng).standard_normal(size=size))
