import math

import numpy as np
import pytest

from zicount.estimation import Z_CRIT, FitResult, fit
from zicount.inference import idr, predict_marginal_mean
from zicount.model import ModelKind, ParameterVector, marginal_mean
from zicount.simulation import SimulationDesign, simulate_dataset

P = ModelKind
NAMES = ("intercept", "x1", "x2")


def _stub(kind, alpha, beta, se=0.1, log_k=None):
    pv = ParameterVector(alpha, beta, log_k)
    names = tuple(f"zero:{c}" for c in NAMES[: len(alpha)]) + tuple(f"count:{c}" for c in NAMES[: len(beta)])
    if log_k is not None:
        names += ("k",)
    return FitResult(kind, pv, np.full(len(names), se), -10.0, True, 1, False, names=names,
                     x_names=NAMES[: len(beta)], z_names=NAMES[: len(alpha)])


@pytest.fixture(scope="module")
def data():
    return simulate_dataset(SimulationDesign.mzinb(k=1.5), 400, 3)


class TestConstantIdr:
    def test_null_effect(self):
        rep = idr(_stub(P.MZIP, [0.1, 0.2, 0.3], [0.5, 0.0, 0.2]), "x1")
        assert rep.constant and rep.idr == 1.0
        lo, hi = rep.ci_95
        assert lo < 1.0 < hi

    def test_exact_values(self):
        beta_j, se = 0.37, 0.08
        rep = idr(_stub(P.NB, [], [0.5, beta_j, 0.2], se=se, log_k=0.0), 1)
        assert rep.idr == math.exp(beta_j)
        assert rep.ci_95 == (math.exp(beta_j - Z_CRIT * se), math.exp(beta_j + Z_CRIT * se))
        assert rep.ci_95[0] < rep.idr < rep.ci_95[1]

    def test_profiles_do_not_matter(self):
        f = _stub(P.MZINB, [0.6, -2.0, 0.3], [0.25, 0.5, 0.2], log_k=0.4)
        a = idr(f, "x2")
        b = idr(f, "x2", profiles=np.random.default_rng(0).normal(size=(7, 3)))
        assert a == b

    @pytest.mark.parametrize("cov", ["intercept", 0])
    def test_intercept_rejected(self, cov):
        with pytest.raises(ValueError):
            idr(_stub(P.POISSON, [], [0.1, 0.2, 0.3]), cov)

    def test_unknown_covariate(self):
        with pytest.raises(KeyError):
            idr(_stub(P.POISSON, [], [0.1, 0.2, 0.3]), "x9")


class TestProfileIdr:
    def test_flat_when_alpha_zero(self):
        f = _stub(P.ZIP, [0.4, 0.0, -0.7], [0.3, 0.45, 0.1])
        prof = np.random.default_rng(1).normal(size=(20, 3))
        rep = idr(f, "x1", profiles=prof)
        assert not rep.constant and rep.ci_95 is None
        ratios = np.array([r for _, r in rep.idr])
        np.testing.assert_allclose(ratios, math.exp(0.45), rtol=1e-14)

    def test_stated_arithmetic(self):
        # alpha_j = 0.5, every other zero-part term zero, evaluated at x_j = 0
        f = _stub(P.ZIP, [0.0, 0.5, 0.0], [0.3, 0.45, 0.1])
        rep = idr(f, "x1", profiles=[[1.0, 0.0, 0.0]])
        expected = math.exp(0.45) * 2 / (1 + math.exp(0.5))
        assert rep.idr[0][1] == pytest.approx(expected, rel=1e-14)

    def test_spread_shrinks_with_alpha(self):
        prof = np.random.default_rng(2).normal(size=(50, 3))
        spreads = []
        for a in (1.0, 0.1, 0.01, 0.001):
            rep = idr(_stub(P.ZINB, [0.2, a, 0.3], [0.3, 0.45, 0.1], log_k=0.0), "x1", profiles=prof)
            spreads.append(rep.summary["max"] - rep.summary["min"])
        assert spreads == sorted(spreads, reverse=True)
        assert spreads[-1] < 1e-3

    def test_default_profiles_from_dataset(self, data):
        f = fit(P.ZINB, data)
        rep = idr(f, "x1", dataset=data)
        assert len(rep.idr) == data.n
        s = rep.summary
        assert s["min"] <= s["median"] <= s["max"]

    def test_needs_profiles(self):
        with pytest.raises(ValueError):
            idr(_stub(P.ZIP, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3]), "x1")


class TestPrediction:
    def test_poisson_baseline_row(self):
        f = _stub(P.POISSON, [], [0.7, 0.2, -0.1])
        assert predict_marginal_mean(f, [[1.0, 0.0, 0.0]])[0] == pytest.approx(math.exp(0.7), rel=1e-15)

    def test_training_row(self, data):
        f = fit(P.MZINB, data)
        pred = predict_marginal_mean(f, data.X[:5], data.Z[:5])
        np.testing.assert_array_equal(pred, marginal_mean(P.MZINB, f.estimates, data.X[:5], data.Z[:5]))

    def test_zip_saturation(self):
        f = _stub(P.ZIP, [30.0, 0.0, 0.0], [0.5, 0.0, 0.0])
        pred = predict_marginal_mean(f, [[1.0, 0.0, 0.0]])[0]
        assert pred < math.exp(0.5) * 1e-12 + 1e-15

    def test_column_mismatch(self):
        f = _stub(P.MZIP, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            predict_marginal_mean(f, [[1.0, 0.0]])
        with pytest.raises(ValueError):
            predict_marginal_mean(f, [[1.0, 0.0, 0.0]], [[1.0, 0.0]])
