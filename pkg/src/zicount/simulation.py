"""Monte Carlo studies with data generated from the marginal zero-inflated models.

Each replicate draws from its own :class:`RngStream` (stream id = replicate
index), so a study gives bit-identical summaries whatever the number of
worker processes or the order in which replicates finish.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distributions import RngStream, sample_bernoulli, sample_lognormal_standard
from .estimation import FitConfig, FitError, fit
from .likelihood import InvalidPointError
from .model import INTERCEPT, Dataset, ModelKind, ParameterVector, expit, linear_predictor, softplus

__all__ = [
    "GenerationError",
    "SimulationDesign",
    "SummaryRow",
    "SummaryTable",
    "generate_covariates",
    "generate_response",
    "simulate_dataset",
    "run_study",
    "MEASURES",
]

logger = logging.getLogger(__name__)

COLUMNS = (INTERCEPT, "x1", "x2")
MEASURES = ("estimate", "std_error", "sb_std_error", "bias", "rel_bias", "mse")

# true values used in the two simulation designs
MZIP_ALPHA = (0.6, -2.0, 0.25)
MZIP_BETA = (0.25, 0.4, 0.25)
MZINB_ALPHA = (0.6, -2.0, 0.3)
MZINB_BETA = (0.25, 0.5, 0.2)
FOUR_MODELS = (ModelKind.POISSON, ModelKind.NB, ModelKind.MZIP, ModelKind.MZINB)
# Poisson rates above this cannot be drawn as int64 counts
RATE_MAX = 1e18


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationDesign:
    generator: ModelKind
    true_alpha: tuple
    true_beta: tuple
    true_k: float | None = None
    sample_sizes: tuple = (100, 500, 1000)
    replicates: int = 2000
    seed: int = 0
    fit_kinds: tuple = FOUR_MODELS

    def __post_init__(self):
        gen = ModelKind.parse(self.generator) if isinstance(self.generator, str) else self.generator
        object.__setattr__(self, "generator", gen)
        object.__setattr__(self, "true_alpha", tuple(float(a) for a in self.true_alpha))
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(
            self,
            "fit_kinds",
            tuple(ModelKind.parse(k) if isinstance(k, str) else k for k in self.fit_kinds),
        )
        if gen not in (ModelKind.MZIP, ModelKind.MZINB):
            raise ValueError("the generator must be MZIP or MZINB")
        if (self.true_k is not None) != (gen is ModelKind.MZINB):
            raise ValueError("true_k is required for MZINB and only for MZINB")
        if self.true_k is not None and not self.true_k > 0:
            raise ValueError("true_k must be positive")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise ValueError("sample sizes must be positive")
        if len(self.true_alpha) != len(COLUMNS) or len(self.true_beta) != len(COLUMNS):
            raise ValueError(f"true_alpha and true_beta need {len(COLUMNS)} values")
        if any(v == 0 for v in self.true_alpha + self.true_beta):
            raise ValueError("true values must be nonzero for relative bias")
        if not self.fit_kinds:
            raise ValueError("at least one fit kind is required")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @classmethod
    def mzip(cls, **kw) -> "SimulationDesign":
        return cls(ModelKind.MZIP, MZIP_ALPHA, MZIP_BETA, None, **kw)

    @classmethod
    def mzinb(cls, k: float = 1.5, **kw) -> "SimulationDesign":
        kw.setdefault("sample_sizes", (100, 200, 500, 1000))
        return cls(ModelKind.MZINB, MZINB_ALPHA, MZINB_BETA, k, **kw)

    @property
    def params(self) -> ParameterVector:
        return ParameterVector.from_k(self.true_alpha, self.true_beta, self.true_k)


def generate_covariates(rng, n: int):
    """``x1 ~ Bernoulli(0.5)`` and standard lognormal ``x2``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    x1 = sample_bernoulli(rng, np.full(n, 0.5)).astype(float)
    x2 = sample_lognormal_standard(rng, size=n)
    return x1, x2


def design_matrix(x1, x2) -> np.ndarray:
    return np.column_stack([np.ones_like(x1), x1, x2])


def generate_response(rng, generator: ModelKind, params: ParameterVector, X, Z) -> np.ndarray:
    """Counts from MZIP/MZINB: structural zero w.p. ``pi``, else the count part."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise ValueError("X and Z need the same number of rows")
    t = linear_predictor(Z, params.alpha)
    pi = expit(t)
    with np.errstate(over="ignore"):
        lam = np.exp(linear_predictor(X, params.beta) + softplus(t))
    bad = np.flatnonzero(~np.isfinite(lam) | (lam <= 0))
    if bad.size:
        raise GenerationError(f"count mean is not finite/positive at row {int(bad[0])}")
    if generator not in (ModelKind.MZIP, ModelKind.MZINB):
        raise ValueError(f"cannot generate from {generator}")
    g = rng.generator if isinstance(rng, RngStream) else rng
    structural = g.random(X.shape[0]) < pi
    rate = lam if generator is ModelKind.MZIP else g.gamma(1.0 / params.k, params.k * lam)
    big = np.flatnonzero(rate > RATE_MAX)
    if big.size:
        i = int(big[0])
        raise GenerationError(f"Poisson rate {rate[i]:.3g} at row {i} is beyond the int64 count range")
    counts = g.poisson(rate)
    return np.where(structural, 0, counts).astype(np.int64)


def simulate_dataset(design: SimulationDesign, n: int, replicate: int) -> Dataset:
    rng = RngStream(design.seed, replicate)
    x1, x2 = generate_covariates(rng, n)
    X = design_matrix(x1, x2)
    y = generate_response(rng, design.generator, design.params, X, X)
    return Dataset(y, X, X, COLUMNS, COLUMNS)


def parameter_labels(kind: ModelKind) -> list:
    """Labels in table order: betas, then alphas, then ``k``."""
    labels = [f"beta{j}" for j in range(len(COLUMNS))]
    if kind.zero_inflated:
        labels += [f"alpha{j}" for j in range(len(COLUMNS))]
    if kind.has_k:
        labels.append("k")
    return labels


def _true_values(design: SimulationDesign, kind: ModelKind) -> np.ndarray:
    vals = list(design.true_beta)
    if kind.zero_inflated:
        vals += list(design.true_alpha)
    if kind.has_k:
        vals.append(math.nan if design.true_k is None else design.true_k)
    return np.array(vals)


def _reorder(kind, values):
    """Packed ``(alpha, beta, k)`` order to table order ``(beta, alpha, k)``."""
    q = len(COLUMNS) if kind.zero_inflated else 0
    p = len(COLUMNS)
    out = list(values[q : q + p]) + list(values[:q]) + list(values[q + p :])
    return np.array(out, dtype=float)


def _replicate_task(args):
    design, config, n, r = args
    try:
        data = simulate_dataset(design, n, r)
    except GenerationError as exc:
        logger.warning("replicate %d n=%d not generated: %s", r, n, exc)
        return {kind: None for kind in design.fit_kinds}
    out = {}
    for kind in design.fit_kinds:
        try:
            res = fit(kind, data, config)
        except (FitError, InvalidPointError) as exc:
            logger.debug("replicate %d n=%d %s failed: %s", r, n, kind, exc)
            out[kind] = None
            continue
        out[kind] = (
            _reorder(kind, res.values),
            _reorder(kind, res.std_errors),
            res.converged,
        )
    return out


@dataclass(frozen=True)
class SummaryRow:
    fit_kind: ModelKind
    n: int
    parameter: str
    true_value: float
    mean_estimate: float
    mean_model_se: float
    empirical_se: float
    bias: float
    relative_bias: float
    mse: float
    converged: int
    failed: int

    def measure(self, name: str) -> float:
        return {
            "estimate": self.mean_estimate,
            "std_error": self.mean_model_se,
            "sb_std_error": self.empirical_se,
            "bias": self.bias,
            "rel_bias": self.relative_bias,
            "mse": self.mse,
        }[name]


@dataclass
class SummaryTable:
    """Per (fit kind, sample size, parameter) summaries over converged replicates.

    ``failed`` counts replicates that did not converge, raised during fitting
    or could not be generated (a draw beyond the count range).

    ``mean_model_se`` is the mean of the per-replicate model SEs;
    ``empirical_se`` is the sample standard deviation of the estimates
    (NaN with a single replicate); ``mse`` is ``bias**2`` plus the
    population variance of the estimates.
    """

    design: SimulationDesign
    rows: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict, repr=False)

    def row(self, fit_kind, n, parameter) -> SummaryRow:
        fit_kind = ModelKind.parse(fit_kind) if isinstance(fit_kind, str) else fit_kind
        for r in self.rows:
            if r.fit_kind is fit_kind and r.n == n and r.parameter == parameter:
                return r
        raise KeyError((fit_kind, n, parameter))

    def tidy(self) -> list:
        """One dict per kind x n x parameter x measure, for plotting."""
        k_true = "" if self.design.true_k is None else self.design.true_k
        out = []
        for r in self.rows:
            for m in MEASURES:
                out.append(
                    {
                        "generator": self.design.generator.value,
                        "fit_kind": r.fit_kind.value,
                        "n": r.n,
                        "k_true": k_true,
                        "parameter": r.parameter,
                        "measure": m,
                        "value": r.measure(m),
                        "replicates_converged": r.converged,
                    }
                )
        return out


def summarize(estimates: np.ndarray, model_ses: np.ndarray, truth: float):
    """Aggregate one parameter over converged replicates."""
    R = estimates.size
    if R == 0:
        nan = math.nan
        return nan, nan, nan, nan, nan, nan
    mean = float(np.mean(estimates))
    mean_se = float(np.nanmean(model_ses)) if np.any(np.isfinite(model_ses)) else math.nan
    sd = float(np.std(estimates, ddof=1)) if R > 1 else math.nan
    bias = mean - truth
    rel = bias / truth if truth != 0 else math.nan
    pop_var = float(np.var(estimates))
    mse = bias**2 + (sd**2 * (R - 1) / R if R > 1 else 0.0)
    if math.isfinite(mse) and abs(mse - (bias**2 + pop_var)) > 1e-10 * max(1.0, mse):
        raise ArithmeticError("MSE identity check failed")
    return mean, mean_se, sd, bias, rel, mse


def run_study(design: SimulationDesign, config: FitConfig | None = None, workers: int = 1) -> SummaryTable:
    """Generate, fit and summarise every (sample size, replicate) of ``design``."""
    config = config or FitConfig()
    tasks = [(design, config, n, r) for n in design.sample_sizes for r in range(design.replicates)]
    if workers <= 1:
        results = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))

    table = SummaryTable(design)
    for n in design.sample_sizes:
        block = [res for (_, _, nn, _), res in zip(tasks, results) if nn == n]
        for kind in design.fit_kinds:
            ok = [b[kind] for b in block if b[kind] is not None and b[kind][2]]
            failed = len(block) - len(ok)
            labels = parameter_labels(kind)
            est = np.array([o[0] for o in ok]).reshape(len(ok), len(labels))
            ses = np.array([o[1] for o in ok]).reshape(len(ok), len(labels))
            table.estimates[(kind, n)] = est
            truths = _true_values(design, kind)
            for j, label in enumerate(labels):
                mean, mean_se, sd, bias, rel, mse = summarize(est[:, j], ses[:, j], truths[j])
                table.rows.append(
                    SummaryRow(kind, n, label, float(truths[j]), mean, mean_se, sd, bias, rel, mse, len(ok), failed)
                )
    return table
