import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilap.asymptotics import (EdgeCase, classify_case, fit_exponent, fit_exponential_rate,
                               leading_constant, predict_e_leading, resonance_report, threshold_coupling)
from bilap.core_model import delta_generator, laplacian_generator
from bilap.errors import DomainError, IllConditioned, InsufficientData, MissingIngredient
from bilap.fixtures import FIXTURES
from bilap.spectral_solver import SpectralProblem, ThresholdReport, eigenvalue_solve


def fake_report(d=1, n_o=0, n_top=0, mu_lower=0.0, mu_upper=0.0, c_v=1.0, C_v=1.0,
                hat_c_v=math.inf, hat_C_v=math.inf):
    return ThresholdReport(d=d, mu_lower=mu_lower, mu_upper=mu_upper, n_o=n_o, n_top=n_top,
                           c_v=c_v, C_v=C_v, hat_c_v=hat_c_v, hat_C_v=hat_C_v,
                           bottom_class=None, top_class=None, verdicts={})


@pytest.fixture(scope="module")
def rep1():
    return SpectralProblem(delta_generator(1)).thresholds()


class TestCases:
    def test_examples(self):
        rep = fake_report(d=1)
        assert classify_case(rep, "bottom").family == "bottom-k1"
        assert classify_case(fake_report(d=4), "bottom").family == "bottom-exponential"
        assert classify_case(fake_report(d=3), "top").family == "top-k3"

    @pytest.mark.parametrize("edge", ["bottom", "top"])
    def test_totality(self, edge):
        families = set()
        for k in range(1, 13):
            d = 1 + (k - 1) % 2 if k <= 2 else (k % 2 or 2)
            n = (k - d) // 2
            rep = fake_report(d=d, n_o=n, n_top=n)
            case = classify_case(rep, edge)
            assert case.k == k and case.parity == ("odd" if k % 2 else "even")
            families.add(case.family)
        expected = 10 if edge == "bottom" else 6
        assert len(families) == expected

    def test_bad_edge(self):
        with pytest.raises(DomainError):
            classify_case(fake_report(), "middle")


class TestConstants:
    def test_delta_d1(self, rep1):
        b = leading_constant(rep1, classify_case(rep1, "bottom"))
        t = leading_constant(rep1, classify_case(rep1, "top"))
        assert b.leading_constant == pytest.approx(2 ** (-1 / 3), rel=1e-9)
        assert b.energy_exponent == Fraction(4, 3)
        assert t.leading_constant == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-9)
        assert t.energy_exponent == 2

    def test_delta_d2(self):
        rep = SpectralProblem(delta_generator(2)).thresholds()
        pred = leading_constant(rep, classify_case(rep, "bottom"))
        assert pred.leading_constant == pytest.approx(0.25, rel=1e-9)
        assert pred.has_log_correction

    def test_resonance_constants(self):
        # k = 5 and k = 6 constants in closed form for c_v = 2, mu_o = 0.5
        r5 = fake_report(d=5, mu_lower=0.5, c_v=2.0)
        r6 = fake_report(d=2, n_o=2, mu_lower=0.5, c_v=2.0)
        assert leading_constant(r5, classify_case(r5, "bottom")).leading_constant == pytest.approx(32 / math.pi)
        assert leading_constant(r6, classify_case(r6, "bottom")).leading_constant == pytest.approx(64 / math.pi)

    def test_missing_ingredient(self):
        r9 = fake_report(d=1, n_o=4, mu_lower=2 / 3, c_v=1.0, hat_c_v=math.inf)
        with pytest.raises(MissingIngredient):
            leading_constant(r9, classify_case(r9, "bottom"))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 12), st.sampled_from(["bottom", "top"]),
           st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_positive(self, k, edge, cv, Cv, mu, hat):
        d = 2 - k % 2
        n = (k - d) // 2
        rep = fake_report(d=d, n_o=n, n_top=n, mu_lower=mu, mu_upper=mu, c_v=cv, C_v=Cv,
                          hat_c_v=hat, hat_C_v=hat)
        assert leading_constant(rep, classify_case(rep, edge)).leading_constant > 0


class TestPredict:
    def test_delta_d1(self, rep1):
        b = leading_constant(rep1, classify_case(rep1, "bottom"))
        t = leading_constant(rep1, classify_case(rep1, "top"))
        assert predict_e_leading(b, 1e-3, rep1) == pytest.approx(-(2 ** (-4 / 3)) * 1e-4, rel=1e-9)
        assert predict_e_leading(t, -1e-3, rep1) == pytest.approx(4 + 1.25e-7, rel=1e-15)
        assert predict_e_leading(t, -1e-3, rep1) - 4 == pytest.approx(1.25e-7, rel=1e-6)

    def test_at_threshold(self, rep1):
        b = leading_constant(rep1, classify_case(rep1, "bottom"))
        t = leading_constant(rep1, classify_case(rep1, "top"))
        assert predict_e_leading(b, 0.0, rep1) == 0.0
        assert predict_e_leading(t, 0.0, rep1) == 4.0

    def test_wrong_side(self, rep1):
        b = leading_constant(rep1, classify_case(rep1, "bottom"))
        with pytest.raises(DomainError):
            predict_e_leading(b, -1.0, rep1)


class TestFit:
    def test_synthetic(self):
        mus = np.logspace(-4, -2, 9)
        data = [(m, -0.37 * m ** (4 / 3)) for m in mus]
        fit = fit_exponent(data, "bottom", 0.0)
        assert fit.exponent_hat == pytest.approx(4 / 3, abs=1e-10)
        assert fit.prefactor_hat == pytest.approx(0.37, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.3, 5.0), st.floats(0.01, 100.0), st.floats(-3.0, 3.0))
    def test_synthetic_any_exponent(self, alpha, K, thr):
        deltas = np.logspace(-5, -1, 8)
        data = [(thr + dl, -K * dl ** alpha) for dl in deltas]
        fit = fit_exponent(data, "bottom", thr)
        assert fit.exponent_hat == pytest.approx(alpha, rel=1e-8)

    def test_top_synthetic(self):
        deltas = np.logspace(-4, -2, 7)
        data = [(-2.0 - dl, 9.0 + 0.125 * dl ** 2) for dl in deltas]
        fit = fit_exponent(data, "top", -2.0, d=3 / 2)     # 4 d^2 = 9
        # absolute energies near 9 keep only ~7 digits of e - 9 here; EigenResult offsets avoid this
        assert fit.exponent_hat == pytest.approx(2.0, abs=1e-6)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            fit_exponent([(m, -m) for m in (0.1, 0.2, 0.3)], "bottom", 0.0)

    def test_ill_conditioned(self):
        data = [(1e-3 * (1 + 1e-12 * j), -1e-4) for j in range(8)]
        with pytest.raises(IllConditioned):
            fit_exponent(data, "bottom", 0.0)

    def test_log_corrected(self):
        mus = np.logspace(-3, -1.5, 10)
        data = [(m, -((0.25 * m) * (1 - 2.0 * m * math.log(m))) ** 2) for m in mus]
        fit = fit_exponent(data, "bottom", 0.0, log_correction="dlogd")
        assert fit.corrected["r_squared"] >= 0.999
        assert fit.corrected["exponent"] == pytest.approx(2.0, abs=0.02)

    def test_exponential_rate(self):
        mus = np.linspace(0.2, 0.5, 8)
        data = [(m, -(3.0 * math.exp(-1 / (0.05 * m))) ** 2) for m in mus]
        fit = fit_exponential_rate(data, "bottom", 0.0)
        assert fit["rate"] == pytest.approx(0.05, rel=1e-10)
        assert fit["c"] == pytest.approx(3.0, rel=1e-8)

    def test_solver_sweep_delta_d1(self):
        prob = SpectralProblem(delta_generator(1))
        rep = prob.thresholds()
        res = [eigenvalue_solve(prob, m, rep) for m in np.logspace(-4, -2, 9)]
        fit = fit_exponent(res, "bottom", 0.0)
        assert fit.exponent_hat == pytest.approx(4 / 3, rel=0.01)
        assert fit.prefactor_hat == pytest.approx(2 ** (-4 / 3), rel=0.02)


class TestResonanceReport:
    def test_delta_d5(self):
        prob = SpectralProblem(delta_generator(5))
        out = resonance_report(prob.thresholds())
        assert out["bottom"] == "0-energy resonance (f not in L2)"

    def test_delta_d3_top(self):
        out = resonance_report(SpectralProblem(delta_generator(3)).thresholds())
        assert out["top"] == "4d^2-energy resonance (f not in L2)"

    def test_k9(self):
        out = resonance_report(fake_report(d=1, n_o=4, mu_lower=2 / 3))
        assert out["bottom"] == "threshold eigenfunction f in L2 at energy 0"

    def test_numeric_verdicts(self):
        prob = SpectralProblem(laplacian_generator(1))
        out = resonance_report(prob.thresholds(), prob)
        assert out["verdicts"] == out["expected"]


class TestThresholdCoupling:
    def test_sides(self):
        rep = fake_report(mu_lower=1.5, mu_upper=2.5)
        assert threshold_coupling(rep, "bottom") == 1.5
        assert threshold_coupling(rep, "top") == -2.5


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_orders(name):
    fx = FIXTURES[name]
    rep = fake_report(d=fx.d, n_o=fx.n_o, n_top=fx.n_top)
    assert classify_case(rep, "bottom").k == fx.k_bottom
    from bilap.quadrature import vanishing_order_exact
    assert vanishing_order_exact(fx.generator, "bottom") == fx.n_o
    assert vanishing_order_exact(fx.generator, "top") == fx.n_top
