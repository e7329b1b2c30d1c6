"""
Tests for averaging, maximal and integral-function operators
"""
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import exp1, expn

from hlmax.analysis.catalog import make_function, make_weight
from hlmax.analysis.operators import (
    Field,
    FieldValues,
    PExponent,
    average,
    average_field,
    average_values,
    function_field,
    integral_field,
    integral_fields,
    integral_function,
    integral_tail_bound,
    integral_values,
    lq_norm,
    maximal,
    maximal_field,
    maximal_search,
    p_sweep,
    region_for,
    uses_exact_path,
)
from hlmax.analysis.quadrature import EstimateKind, mc_integrate_ball
from hlmax.analysis.spaces import BallSpec, SpacePoint, ball_volume, parse_space
from hlmax.config import QuadratureConfig
from hlmax.errors import DomainError, ParseError, UsageError

CFG = QuadratureConfig(threads=1)
LINE = parse_space("real-line")
INDICATOR = make_function(LINE, "indicator-ball:0:1")
EXP = make_weight("exp")


def maximal_of_indicator(x: float) -> float:
    """M of the indicator of [-1, 1]"""
    return 1.0 if abs(x) <= 1.0 else 1.0 / (1.0 + abs(x))


class TestExponent:
    @pytest.mark.parametrize("text,value", [("1", 1.0), ("2.5", 2.5), ("inf", math.inf), ("Infinity", math.inf)])
    def test_parse(self, text, value):
        assert PExponent.parse(text).value == value

    @pytest.mark.parametrize("text", ["0.5", "-1", "nan", "two", ""])
    def test_parse_rejects(self, text):
        with pytest.raises(ParseError):
            PExponent.parse(text)

    def test_domain(self):
        with pytest.raises(DomainError):
            PExponent(0.99)

    def test_text_and_order(self):
        assert [str(PExponent(v)) for v in (1.0, 2.5, math.inf)] == ["1", "2.5", "inf"]
        assert sorted([PExponent(math.inf), PExponent(4.0), PExponent(1.0)])[0] == PExponent(1.0)
        assert PExponent.coerce("8") == PExponent.coerce(8) == PExponent(8.0)


class TestAverage:
    @pytest.mark.parametrize("x,r,expected", [(0.0, 2.0, 0.5), (2.0, 3.0, 1.0 / 3.0), (0.0, 0.5, 1.0), (5.0, 1.0, 0.0)])
    def test_indicator_on_line(self, x, r, expected):
        estimate = average(LINE, INDICATOR, SpacePoint.real1(x), r, CFG)
        assert estimate.value == pytest.approx(expected, abs=1e-15)
        assert estimate.kind is EstimateKind.DETERMINISTIC

    def test_radius_domain(self):
        with pytest.raises(DomainError):
            average(LINE, INDICATOR, SpacePoint.real1(0.0), 0.0, CFG)
        with pytest.raises(DomainError):
            average_values(LINE, INDICATOR, np.zeros((1, 1)), np.array([-1.0]), CFG)

    def test_monte_carlo_matches_ball_integral(self, plane, fast_cfg):
        f = make_function(plane, "bump:0,0:1")
        x = plane.point([0.4, -0.2])
        estimate = average(plane, f, x, 0.8, fast_cfg)
        integral = mc_integrate_ball(plane, f, x, 0.8, fast_cfg)
        assert estimate.is_monte_carlo
        assert estimate.value == pytest.approx(integral.value / ball_volume(plane, x, 0.8), rel=1e-12)

    def test_common_samples_across_entry_points(self, plane, fast_cfg):
        f = make_function(plane, "indicator-ball:0,0:1")
        x = plane.point([0.5, 0.5])
        values, _ = average_values(plane, f, x.as_array()[None, :], np.array([0.7]), fast_cfg)
        assert values[0, 0] == pytest.approx(average(plane, f, x, 0.7, fast_cfg).value, rel=1e-12)

    def test_constant_on_affine(self, affine_left):
        cfg = QuadratureConfig(mc_samples=20_000, threads=1)
        f = make_function(affine_left, "const:2")
        estimate = average(affine_left, f, SpacePoint.affine(1.0, 3.0), 1.0, cfg)
        assert abs(estimate.value - 2.0) <= 2.0 * estimate.error_bound

    def test_zero_function(self, affine_right, fast_cfg):
        f = make_function(affine_right, "const:0")
        assert average(affine_right, f, affine_right.identity, 2.0, fast_cfg).value == 0.0


class TestMaximal:
    @pytest.mark.parametrize("x", [0.0, 0.5, 1.5, 2.0, 5.0, -3.0])
    def test_indicator_on_line(self, x):
        estimate = maximal(LINE, INDICATOR, SpacePoint.real1(x), CFG)
        assert estimate.value == pytest.approx(maximal_of_indicator(x), abs=1e-4)
        assert estimate.value <= maximal_of_indicator(x) + 1e-12

    def test_maximizing_radius(self):
        _, radius = maximal_search(LINE, INDICATOR, SpacePoint.real1(2.0), CFG)
        assert radius == pytest.approx(3.0, abs=1e-2)

    def test_smallest_maximizing_radius_wins(self):
        _, radius = maximal_search(LINE, INDICATOR, SpacePoint.real1(0.0), CFG)
        assert radius == pytest.approx(1e-4)

    def test_constant(self):
        f = make_function(LINE, "const:3")
        assert maximal(LINE, f, SpacePoint.real1(7.0), CFG).value == pytest.approx(3.0, rel=1e-15)

    def test_zero(self, affine_left, fast_cfg):
        f = make_function(affine_left, "const:0")
        estimate = maximal(affine_left, f, affine_left.identity, fast_cfg)
        assert estimate.value == 0.0
        assert estimate.error_bound == 0.0

    def test_plane_indicator_center(self, plane, fast_cfg):
        f = make_function(plane, "indicator-ball:0,0:1")
        estimate = maximal(plane, f, plane.identity, fast_cfg)
        assert estimate.value == pytest.approx(1.0)
        assert estimate.is_monte_carlo

    def test_vectorized_matches_pointwise(self):
        field = maximal_field(LINE, INDICATOR, CFG)
        points = np.array([[0.3], [2.0], [-4.0]])
        values = field(points).values
        for x, value in zip(points[:, 0], values):
            assert value == pytest.approx(maximal(LINE, INDICATOR, SpacePoint.real1(x), CFG).value, rel=1e-12)


class TestIntegralFunction:
    def test_indicator_p1_closed_form(self):
        estimate = integral_function(LINE, INDICATOR, EXP, 1, SpacePoint.real1(0.0), CFG)
        expected = 1.0 - math.exp(-1.0) + float(exp1(1.0))
        assert estimate.value == pytest.approx(expected, abs=1e-8)
        assert abs(estimate.value - expected) <= estimate.error_bound + 1e-12
        assert estimate.kind is EstimateKind.DETERMINISTIC

    def test_indicator_p2_closed_form(self):
        estimate = integral_function(LINE, INDICATOR, EXP, 2, SpacePoint.real1(0.0), CFG)
        expected = math.sqrt(1.0 - math.exp(-1.0) + float(expn(2, 1.0)))
        assert estimate.value == pytest.approx(expected, abs=1e-8)

    def test_infinite_p_is_maximal(self):
        x = SpacePoint.real1(2.0)
        assert integral_function(LINE, INDICATOR, EXP, math.inf, x, CFG) == maximal(LINE, INDICATOR, x, CFG)

    def test_constant(self):
        f = make_function(LINE, "const:3")
        estimate = integral_function(LINE, f, EXP, 2, SpacePoint.real1(-4.0), CFG)
        assert estimate.value == pytest.approx(3.0, abs=1e-8)

    def test_zero(self, affine_right, fast_cfg):
        f = make_function(affine_right, "const:0")
        estimate = integral_function(affine_right, f, EXP, 3, affine_right.identity, fast_cfg)
        assert estimate.value == 0.0
        assert estimate.error_bound == 0.0

    @pytest.mark.parametrize("c", [2.0, 4.0])
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_homogeneity(self, c, p):
        x = SpacePoint.real1(1.5)
        base = integral_function(LINE, INDICATOR, EXP, p, x, CFG).value
        scaled = integral_function(LINE, INDICATOR.scaled(c), EXP, p, x, CFG).value
        assert scaled == pytest.approx(c * base, rel=1e-12)

    def test_sublinearity(self):
        g = make_function(LINE, "indicator-ball:3:1")
        x = SpacePoint.real1(1.5)
        combined = integral_function(LINE, INDICATOR + g, EXP, 2, x, CFG)
        parts = [integral_function(LINE, h, EXP, 2, x, CFG) for h in (INDICATOR, g)]
        assert combined.value <= sum(e.value for e in parts) + combined.error_bound + sum(e.error_bound for e in parts)

    @given(x=st.floats(min_value=-6.0, max_value=6.0), p=st.sampled_from([1.0, 2.0, 4.0, 8.0]))
    @settings(max_examples=25, deadline=None)
    def test_dominated_by_maximal(self, x, p):
        point = SpacePoint.real1(x)
        estimate = integral_function(LINE, INDICATOR, EXP, p, point, CFG)
        M = maximal(LINE, INDICATOR, point, CFG)
        assert estimate.value <= EXP.norm ** (1.0 / p) * M.upper + estimate.error_bound + 1e-9

    def test_large_exponent_in_log_space(self):
        estimate = integral_function(LINE, INDICATOR, EXP, 256, SpacePoint.real1(2.0), CFG)
        assert 0.95 / 3.0 <= estimate.value <= 1.0 / 3.0 + estimate.error_bound

    def test_monte_carlo_path_agrees_with_exact(self):
        cfg = QuadratureConfig(mc_samples=20_000, threads=1)
        sampled = dataclasses.replace(INDICATOR, interval_mass=None)
        assert not uses_exact_path(LINE, sampled)

        x = SpacePoint.real1(0.0)
        estimate = integral_function(LINE, sampled, EXP, 1, x, cfg)
        expected = 1.0 - math.exp(-1.0) + float(exp1(1.0))
        assert estimate.is_monte_carlo
        assert estimate.samples_used == cfg.mc_samples
        assert abs(estimate.value - expected) <= estimate.error_bound

    def test_vectorized_matches_pointwise(self, plane, fast_cfg):
        f = make_function(plane, "indicator-ball:0,0:1")
        X = np.array([[0.0, 0.0], [1.0, 0.5]])
        fields = integral_values(plane, f, EXP, [1, 2], X, fast_cfg)
        for i, x in enumerate(X):
            for p in (1, 2):
                estimate = integral_function(plane, f, EXP, p, plane.point(x), fast_cfg)
                assert fields[PExponent(p)].values[i] == estimate.value
                assert fields[PExponent(p)].error_bounds[i] == estimate.error_bound

    def test_threads_do_not_change_results(self, plane):
        f = make_function(plane, "bump:0,0:1")
        X = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, -0.3], [2.0, 0.0], [0.1, 0.9]])
        single = QuadratureConfig(mc_samples=2000, threads=1)
        pooled = single.with_changes(threads=3)
        a = integral_values(plane, f, EXP, [1, 4, math.inf], X, single)
        b = integral_values(plane, f, EXP, [1, 4, math.inf], X, pooled)
        for p in a:
            assert np.array_equal(a[p].values, b[p].values)
            assert np.array_equal(a[p].error_bounds, b[p].error_bounds)

    def test_reproducible_across_calls(self, affine_left, fast_cfg):
        f = make_function(affine_left, "bump:e:1")
        first = integral_function(affine_left, f, EXP, 2, SpacePoint.affine(0.2, 1.1), fast_cfg)
        second = integral_function(affine_left, f, EXP, 2, SpacePoint.affine(0.2, 1.1), fast_cfg)
        assert first == second
        assert first.value > 0


class TestSweep:
    def test_converges_to_maximal(self):
        rows = p_sweep(LINE, INDICATOR, EXP, SpacePoint.real1(2.0), [1, 2, 4, 8, 16, 32, 64, 128, 256], CFG)
        normalized = [row.normalized for row in rows]
        errors = [row.i_value.error_bound for row in rows]
        for (a, ea), (b, eb) in zip(zip(normalized, errors), zip(normalized[1:], errors[1:])):
            assert b >= a - ea - eb - 1e-12

        M = rows[0].maximal.value
        assert M == pytest.approx(1.0 / 3.0, abs=1e-4)
        assert normalized[-1] >= 0.95 * M
        assert rows[-1].gap_to_max < rows[4].gap_to_max

    def test_constant_has_no_gap(self):
        f = make_function(LINE, "const:2")
        rows = p_sweep(LINE, f, EXP, SpacePoint.real1(0.0), [1, 16, 256], CFG)
        for row in rows:
            assert row.normalized == pytest.approx(2.0, abs=1e-8)
            assert row.gap_to_max == pytest.approx(0.0, abs=1e-8)

    def test_infinite_exponent_row(self):
        rows = p_sweep(LINE, INDICATOR, EXP, SpacePoint.real1(2.0), [1, math.inf], CFG)
        assert rows[-1].gap_to_max == 0.0
        assert rows[-1].i_value == rows[-1].maximal

    @pytest.mark.parametrize("p_list", [[2, 1], [1], [1, 1]])
    def test_rejects_bad_lists(self, p_list):
        with pytest.raises(UsageError):
            p_sweep(LINE, INDICATOR, EXP, SpacePoint.real1(0.0), p_list, CFG)


class TestFields:
    def test_cache_reuses_evaluation(self):
        calls = []

        def evaluate(X):
            calls.append(X.shape[0])
            zeros = np.zeros(X.shape[0])
            return FieldValues(X[:, 0] ** 2, zeros, zeros)

        field = Field("square", LINE, evaluate, exact=True)
        points = np.linspace(0.0, 1.0, 7)[:, None]
        assert field(points).values == pytest.approx(np.linspace(0.0, 1.0, 7) ** 2)
        field(points)
        assert calls == [7]

    def test_grid_shape_is_preserved(self, plane):
        f = make_function(plane, "const:1")
        values = function_field(f)(np.zeros((4, 3, 2))).values
        assert values.shape == (4, 3)

    def test_integral_fields_share_work(self):
        fields = integral_fields(LINE, INDICATOR, EXP, [1, 2], CFG)
        X = np.array([[0.0], [2.0]])
        assert fields[PExponent(1)](X).values[0] == pytest.approx(1.0 - math.exp(-1.0) + float(exp1(1.0)), abs=1e-8)
        assert integral_field(LINE, INDICATOR, EXP, 2, CFG)(X).values == pytest.approx(fields[PExponent(2)](X).values)

    def test_average_field(self):
        field = average_field(LINE, INDICATOR, 2.0, CFG)
        assert field.exact
        assert field(np.array([[0.0], [2.0]])).values.tolist() == pytest.approx([0.5, 0.25])


class TestNorms:
    def test_indicator_l2(self):
        estimate = lq_norm(LINE, function_field(INDICATOR), 2, BallSpec(LINE.identity, 3.0), CFG,
                           compact=True, breakpoints=(1.0,))
        assert estimate.value == pytest.approx(math.sqrt(2.0), rel=1e-9)
        assert estimate.kind is EstimateKind.DETERMINISTIC

    def test_indicator_sup(self):
        estimate = lq_norm(LINE, function_field(INDICATOR), math.inf, BallSpec(LINE.identity, 3.0), CFG, compact=True)
        assert estimate.value == 1.0
        assert estimate.is_lower_bound

    def test_zero_field(self, affine_left, fast_cfg):
        f = make_function(affine_left, "const:0")
        estimate = lq_norm(affine_left, function_field(f), 2, BallSpec(affine_left.identity, 2.0), fast_cfg, compact=True)
        assert estimate.value == 0.0

    def test_needs_tail_certificate(self):
        with pytest.raises(UsageError):
            lq_norm(LINE, function_field(INDICATOR), 2, BallSpec(LINE.identity, 3.0), CFG)

    def test_tail_widens_error(self):
        region = BallSpec(LINE.identity, 3.0)
        tight = lq_norm(LINE, function_field(INDICATOR), 1, region, CFG, tail_certificate=0.0, breakpoints=(1.0,))
        loose = lq_norm(LINE, function_field(INDICATOR), 1, region, CFG, tail_certificate=0.5, breakpoints=(1.0,))
        assert loose.value == tight.value
        assert loose.error_bound == pytest.approx(tight.error_bound + 0.5)

    def test_hyperbolic_indicator(self, affine_left):
        cfg = QuadratureConfig(region_panels=8, region_angles=32, threads=1)
        f = make_function(affine_left, "indicator-ball:e:1")
        estimate = lq_norm(affine_left, function_field(f), 1, BallSpec(affine_left.identity, 2.0), cfg,
                           compact=True, breakpoints=(1.0,))
        # radial about the region center: every direction sees the same values
        assert estimate.value == pytest.approx(f.norm(1.0).value, rel=1e-9)

    @pytest.mark.slow
    def test_maximal_field_l2(self):
        cfg = QuadratureConfig(rel_tol=1e-6, threads=1)
        estimate = lq_norm(LINE, maximal_field(LINE, INDICATOR, cfg), 2, BallSpec(LINE.identity, 20.0), cfg,
                           compact=True, breakpoints=(1.0,))
        expected = math.sqrt(2.0 + 2.0 * (0.5 - 1.0 / 21.0))
        assert estimate.value == pytest.approx(expected, abs=1e-3)


class TestTailBound:
    def test_region_for(self, plane):
        assert region_for(LINE, INDICATOR) == BallSpec(LINE.identity, 21.0)
        assert region_for(plane, make_function(plane, "bump:0,0:1")).radius == 7.0
        with pytest.raises(UsageError):
            region_for(LINE, make_function(LINE, "gauss:0:1"))

    def test_decreases_with_region(self):
        near = integral_tail_bound(LINE, INDICATOR, EXP, 2, 2, 21.0, CFG)
        far = integral_tail_bound(LINE, INDICATOR, EXP, 2, 2, 40.0, CFG)
        assert near > far > 0.0

    def test_annulus_holds_the_mass(self, monkeypatch):
        standard = integral_tail_bound(LINE, INDICATOR, EXP, 2, 2, 21.0, CFG)
        monkeypatch.setattr("hlmax.analysis.operators.TAIL_CERTIFICATE_SPAN", 5.0)
        narrow = integral_tail_bound(LINE, INDICATOR, EXP, 2, 2, 21.0, CFG)
        monkeypatch.setattr("hlmax.analysis.operators.TAIL_CERTIFICATE_SPAN", 80.0)
        wide = integral_tail_bound(LINE, INDICATOR, EXP, 2, 2, 21.0, CFG)
        assert narrow < standard
        assert wide == pytest.approx(standard, rel=1e-5)

    def test_sup_certificate(self):
        bound = integral_tail_bound(LINE, INDICATOR, EXP, 2, math.inf, 21.0, CFG)
        assert bound == pytest.approx(math.exp(-10.0))

    def test_zero_function(self):
        assert integral_tail_bound(LINE, make_function(LINE, "const:0"), EXP, 1, 1, 5.0, CFG) == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(UsageError):
            integral_tail_bound(LINE, make_function(LINE, "gauss:0:1"), EXP, 1, 2, 10.0, CFG)
        with pytest.raises(DomainError):
            integral_tail_bound(LINE, INDICATOR, EXP, 1, 2, 0.5, CFG)
        with pytest.raises(UsageError):
            integral_tail_bound(LINE, INDICATOR, EXP, math.inf, 2, 10.0, CFG)
