import math

import numpy as np
import pytest

from infospectrum import (
    CountingMeasure,
    IidSource,
    MarkovSource,
    MixedSource,
    PreconditionError,
    StepSpectrumModel,
    TestingProblem,
    UnsupportedModelError,
    WeightMeasure,
    check_theorem4_assumptions,
    eta_step,
    problem_eta,
)
from infospectrum.exponents import (
    ExponentCurve,
    b_e,
    b_e_mixed_combinator,
    b_e_star,
    coding_problem,
    exponent,
    r_e_coding,
    sigma,
    spectral_inf_divergence,
    sweep,
)
from infospectrum.ldp import PiecewiseEta

from conftest import kl

D_ALT_NULL = 0.3680642071684971
D_NULL_ALT = 0.5108256237659907
TERNARY = TestingProblem(IidSource([0.2, 0.3, 0.5]), IidSource([0.6, 0.3, 0.1]))


def passing():
    return check_theorem4_assumptions(TestingProblem(IidSource([0.5, 0.5]), IidSource([0.9, 0.1])))


class TestErrorExponent:
    def test_zero_rate_is_infinite(self, binary_pair):
        assert b_e(problem_eta(binary_pair), 0.0).value == math.inf

    def test_negative_rate_rejected(self, binary_pair):
        with pytest.raises(ValueError):
            b_e(problem_eta(binary_pair), -0.1)

    @pytest.mark.parametrize("method", ["auto", "dual-parameter", "r-grid", "closed-form"])
    def test_gaussian(self, gaussian_pair, method):
        eta = problem_eta(gaussian_pair, closed_form=method == "closed-form")
        assert b_e(eta, 0.5, method).value == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("r,expected", [(0.1, 1.0), (0.2, 1.0), (0.25, 0.8), (0.5, 0.8), (0.7, 0.8)])
    def test_step(self, r, expected):
        assert b_e(eta_step(StepSpectrumModel(0.2)), r).value == pytest.approx(expected, abs=1e-15)

    def test_step_interior_attainment(self):
        res = b_e(eta_step(StepSpectrumModel(0.2)), 0.7)
        assert res.minimizing_R == pytest.approx(0.6)
        assert res.attainment == "interior"

    def test_identical_hypotheses(self):
        eta = problem_eta(TestingProblem(IidSource([0.3, 0.7]), IidSource([0.3, 0.7])))
        for r in (1e-6, 0.1, 3.0):
            assert b_e(eta, r).value == 0.0

    @pytest.mark.parametrize("r,expected", [(0.05, 0.2163412425644308), (0.1, 0.12788746919771474)])
    def test_hoeffding_binary(self, binary_pair, r, expected):
        eta = problem_eta(binary_pair)
        assert b_e(eta, r).value == pytest.approx(expected, abs=1e-10)
        assert b_e(eta, r, "r-grid").value == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize(
        "r,expected", [(0.05, 0.28507617305961), (0.1, 0.189504419226401), (0.2, 0.08574157477944924)]
    )
    def test_hoeffding_ternary(self, r, expected):
        assert exponent(TERNARY, "error", r).value == pytest.approx(expected, abs=1e-10)

    def test_ternary_just_below_threshold(self):
        # min D(Q||alt) over D(Q||null) <= r, solved by tilted-family root and by SLSQP
        r = kl([0.6, 0.3, 0.1], [0.2, 0.3, 0.5]) - 1e-3
        assert exponent(TERNARY, "error", r).value == pytest.approx(6.808705492879034e-07, rel=1e-6)

    def test_counting_alternative_can_be_negative(self):
        eta = problem_eta(TestingProblem(IidSource([0.11, 0.89]), CountingMeasure(2)))
        assert b_e(eta, 0.1).value < 0

    def test_markov_dual_vs_grid(self, markov_kernels):
        eta = problem_eta(TestingProblem(MarkovSource(markov_kernels[0]), MarkovSource(markov_kernels[1])))
        for r in (0.02, 0.2, 1.0):
            assert b_e(eta, r).value == pytest.approx(b_e(eta, r, "r-grid").value, abs=1e-6)

    def test_route_errors(self, binary_pair, gaussian_pair):
        with pytest.raises(UnsupportedModelError):
            b_e(problem_eta(binary_pair), 0.1, "piecewise-exact")
        with pytest.raises(UnsupportedModelError):
            b_e(problem_eta(gaussian_pair), 0.1, "closed-form")
        with pytest.raises(UnsupportedModelError):
            b_e(eta_step(StepSpectrumModel(0.2)), 0.1, "dual-parameter")

    def test_only_tail_piece_feasible(self):
        eta = PiecewiseEta([(0.0, 2.0), (1.0, 0.0)])
        res = b_e(eta, 2.0)
        assert res.value == 1.0


class TestCorrectExponent:
    def test_zero_rate(self, binary_pair):
        assert b_e_star(problem_eta(binary_pair), 0.0, passing()).value == 0.0

    def test_zero_rate_generalized_measure(self):
        pr = TestingProblem(IidSource([0.11, 0.89]), CountingMeasure(2))
        eta = problem_eta(pr)
        assert eta.kappa_lower == pytest.approx(-math.log(2))
        assert b_e_star(eta, 0.0, check_theorem4_assumptions(pr)).value == pytest.approx(-math.log(2))

    @pytest.mark.parametrize("r,expected", [(8.0, 2.0), (1.0, 0.0), (2.0, 0.0), (4.5, 0.5)])
    def test_gaussian(self, gaussian_pair, r, expected):
        ok = check_theorem4_assumptions(gaussian_pair)
        assert b_e_star(problem_eta(gaussian_pair), r, ok).value == pytest.approx(expected, abs=1e-9)

    def test_binary_zero_below_threshold(self, binary_pair):
        eta = problem_eta(binary_pair)
        for r in np.linspace(0.01, D_ALT_NULL, 8):
            assert b_e_star(eta, r, passing()).value == pytest.approx(0.0, abs=1e-12)
        assert b_e_star(eta, D_ALT_NULL + 0.05, passing()).value > 0

    def test_ternary_against_simplex_minimiser(self):
        ok = check_theorem4_assumptions(TERNARY)
        res = b_e_star(problem_eta(TERNARY), 0.7, ok)
        assert res.value == pytest.approx(0.023939550284614038, abs=1e-9)
        assert b_e_star(problem_eta(TERNARY), 0.7, ok, "r-grid").value == pytest.approx(res.value, abs=1e-6)

    def test_step(self):
        eta = eta_step(StepSpectrumModel(0.2))
        vals = [b_e_star(eta, r, passing()).value for r in (0.1, 0.5, 0.7, 1.0)]
        # inf over pieces of b + max(v, r)
        expected = [min(b + max(v, r) for b, v in eta.pieces) for r in (0.1, 0.5, 0.7, 1.0)]
        np.testing.assert_allclose(vals, expected)

    def test_refuses_failed_assumptions(self):
        pr = TestingProblem(IidSource([1.0, 0.0]), IidSource([0.5, 0.5]))
        with pytest.raises(PreconditionError):
            exponent(pr, "correct", 0.3)

    def test_refuses_missing_limit(self, binary_pair):
        eta = problem_eta(binary_pair)
        eta.limit_exists = False
        with pytest.raises(UnsupportedModelError):
            b_e_star(eta, 0.3, passing())

    def test_markov_dual_vs_grid(self, markov_kernels):
        pr = TestingProblem(MarkovSource(markov_kernels[0]), MarkovSource(markov_kernels[1]))
        eta, ok = problem_eta(pr), check_theorem4_assumptions(pr)
        for r in (0.5, 1.0):
            assert b_e_star(eta, r, ok).value == pytest.approx(b_e_star(eta, r, ok, "r-grid").value, abs=1e-6)


class TestCoding:
    @pytest.mark.parametrize("r", [0.01, 0.1, 1.0])
    def test_uniform_source(self, r):
        assert r_e_coding(IidSource([0.5, 0.5]), r).value == pytest.approx(math.log(2), abs=1e-12)

    def test_single_symbol(self):
        for r in (0.01, 1.0):
            assert r_e_coding(IidSource([1.0]), r).value == 0.0

    def test_zero_rate(self):
        assert r_e_coding(IidSource([0.11, 0.89]), 0.0).value == 0.0

    @pytest.mark.parametrize("r,expected", [(0.01, 0.43417213), (0.1, 0.58525764), (1.0, 0.6931471805599453)])
    def test_biased_source(self, r, expected):
        src = IidSource([0.11, 0.89])
        value = r_e_coding(src, r).value
        assert value == pytest.approx(expected, abs=2e-6)
        assert value == -b_e(problem_eta(coding_problem(src)), r).value
        assert r_e_coding(src, r, "r-grid").value == pytest.approx(value, abs=1e-6)

    def test_sigma_is_reflected_eta(self):
        eta = problem_eta(coding_problem(IidSource([0.11, 0.89])))
        R = np.linspace(0.0, 1.0, 21)
        np.testing.assert_array_equal(sigma(eta, R), eta(-R))

    def test_markov_source(self):
        src = MarkovSource([[0.9, 0.1], [0.2, 0.8]])
        val = r_e_coding(src, 0.05).value
        assert 0 < val < math.log(2)

    def test_mixture_refused(self, mixture):
        with pytest.raises(UnsupportedModelError):
            coding_problem(mixture)


class TestMixedCombinator:
    def test_identical_components(self):
        mix = MixedSource([IidSource([0.5, 0.5]), IidSource([0.5, 0.5])], [0.5, 0.5])
        single = b_e(problem_eta(TestingProblem(IidSource([0.5, 0.5]), IidSource([0.9, 0.1]))), 0.1)
        assert b_e_mixed_combinator(mix, IidSource([0.9, 0.1]), 0.1).value == single.value

    def test_agrees_with_projection_eta(self, mixture):
        alt = IidSource([0.5, 0.5])
        from infospectrum import eta_mixed

        eta = eta_mixed(mixture, alt)
        for r in (0.01, 0.05, 0.2):
            assert b_e(eta, r).value == pytest.approx(b_e_mixed_combinator(mixture, alt, r).value, abs=1e-3)

    def test_zero_past_largest_threshold(self, mixture):
        alt = IidSource([0.5, 0.5])
        r = max(kl([0.5, 0.5], [0.8, 0.2]), kl([0.5, 0.5], [0.3, 0.7])) + 1e-3
        assert b_e_mixed_combinator(mixture, alt, r).value == pytest.approx(0.0, abs=1e-12)

    def test_mixed_alternative(self, mixture):
        alt = MixedSource([IidSource([0.5, 0.5]), IidSource([0.6, 0.4])], [0.5, 0.5])
        res = b_e_mixed_combinator(mixture, alt, 0.05)
        singles = [
            b_e(problem_eta(TestingProblem(p, g)), 0.05).value
            for p in mixture.components
            for g in alt.components
        ]
        assert res.value == min(singles)


class TestSpectralInfDivergence:
    def test_identical(self):
        assert spectral_inf_divergence(TestingProblem(IidSource([0.3, 0.7]), IidSource([0.3, 0.7]))) == 0.0

    def test_gaussian(self, gaussian_pair):
        assert spectral_inf_divergence(gaussian_pair) == 2.0

    def test_mixed(self, mixture):
        val = spectral_inf_divergence(TestingProblem(mixture, IidSource([0.5, 0.5])))
        assert val == pytest.approx(min(0.19274475702175753, 0.08228287850505178), abs=1e-12)

    def test_step_and_units(self):
        assert spectral_inf_divergence(TestingProblem(StepSpectrumModel(0.2), log_base=2)) == 1.0
        nats = spectral_inf_divergence(TestingProblem(StepSpectrumModel(0.2)))
        assert nats == pytest.approx(math.log(2))


class TestSweep:
    def test_gaussian_error(self, gaussian_pair):
        curve = sweep(gaussian_pair, "error", [0.5, 2.0, 3.0])
        np.testing.assert_allclose(curve.values, [0.5, 0.0, 0.0], atol=1e-12)
        assert isinstance(curve, ExponentCurve)

    def test_step_error(self):
        curve = sweep(TestingProblem(StepSpectrumModel(0.2), log_base=2), "error", [0.1, 0.2, 0.25])
        np.testing.assert_allclose(curve.values, [1.0, 1.0, 0.8], atol=1e-15)

    def test_singleton_matches_pointwise(self, binary_pair):
        curve = sweep(binary_pair, "error", [0.1])
        assert curve.values[0] == exponent(binary_pair, "error", 0.1).value

    def test_order_independent(self, binary_pair):
        fwd = sweep(binary_pair, "correct", [0.2, 0.4, 0.6])
        single = [sweep(binary_pair, "correct", [r]).values[0] for r in (0.6, 0.4, 0.2)]
        np.testing.assert_array_equal(fwd.values, single[::-1])

    def test_errors_recorded_in_place(self):
        pr = TestingProblem(IidSource([1.0, 0.0]), IidSource([0.5, 0.5]))
        curve = sweep(pr, "correct", [0.0, 0.5])
        assert all(math.isnan(v) for v in curve.values)
        assert curve.points[0][1].diagnostics["error"] == "PreconditionError"

    def test_grid_must_increase(self, binary_pair):
        with pytest.raises(ValueError):
            sweep(binary_pair, "error", [0.3, 0.2])

    def test_log_base_two(self, binary_pair):
        bits = TestingProblem(binary_pair.null, binary_pair.alternative, log_base=2)
        r_bits = 0.1 / math.log(2)
        assert exponent(bits, "error", r_bits).value == pytest.approx(
            exponent(binary_pair, "error", 0.1).value / math.log(2), rel=1e-12
        )

    def test_weights_alternative(self):
        pr = TestingProblem(IidSource([0.5, 0.5]), WeightMeasure([2.0, 0.5]))
        assert exponent(pr, "error", 0.05).value == pytest.approx(
            exponent(TestingProblem(IidSource([0.5, 0.5]), IidSource([0.8, 0.2])), "error", 0.05).value
            - math.log(2.5),
            abs=1e-9,
        )
