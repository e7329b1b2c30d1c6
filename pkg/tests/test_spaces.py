"""
Tests for spaces: parsing, geometry, measures and sampling
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlmax.analysis.spaces import (
    MeasureKind,
    SpaceKind,
    SpacePoint,
    ball_shadow,
    ball_volume,
    distance,
    exp_map,
    geodesic_segment,
    inverse,
    left_invariance_violation,
    metric_axiom_violations,
    modular,
    parse_space,
    random_directions,
    reference_volume,
    sample_ball,
    substream,
    translate,
    unit_ball_samples,
)
from hlmax.errors import DomainError, ParseError, UsageError

coordinate = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
scale = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)


class TestParsing:
    @pytest.mark.parametrize("text,kind,dim", [
        ("real-line", SpaceKind.REAL_LINE, 1),
        ("euclidean:3", SpaceKind.EUCLIDEAN, 3),
        ("affine-left", SpaceKind.AFFINE_LEFT, 2),
        ("affine-right", SpaceKind.AFFINE_RIGHT, 2),
    ])
    def test_known_spaces(self, text, kind, dim):
        space = parse_space(text)
        assert space.kind is kind
        assert space.dim == dim
        assert space.descriptor == text

    def test_measure_kinds(self, real_line, affine_left, affine_right):
        assert real_line.measure is MeasureKind.LEBESGUE
        assert affine_left.measure is MeasureKind.LEFT_HAAR
        assert affine_right.measure is MeasureKind.RIGHT_HAAR
        assert real_line.is_unimodular and not affine_left.is_unimodular

    @pytest.mark.parametrize("text", ["euclidean:0", "euclidean:4", "euclidean:x", "sphere", ""])
    def test_rejects_unknown(self, text):
        with pytest.raises(ParseError):
            parse_space(text)

    def test_parse_error_names_token(self):
        with pytest.raises(ParseError) as info:
            parse_space("hyperbolic:7")
        assert "hyperbolic:7" in str(info.value)

    def test_identity_points(self, real_line, affine_left):
        assert real_line.parse_point("e") == SpacePoint.real1(0.0)
        assert affine_left.parse_point("e") == SpacePoint.affine(0.0, 1.0)

    @pytest.mark.parametrize("text", ["1", "1,2,3", "0,-1", "0,0", "a,b"])
    def test_bad_affine_points(self, affine_left, text):
        with pytest.raises(ParseError):
            affine_left.parse_point(text)

    def test_point_invariants(self):
        with pytest.raises(DomainError):
            SpacePoint.affine(0.0, -2.0)
        with pytest.raises(DomainError):
            SpacePoint.real1(math.inf)
        with pytest.raises(UsageError):
            SpacePoint.realn([1.0, 2.0, 3.0, 4.0])

    def test_variant_mismatch(self, real_line, affine_left):
        with pytest.raises(UsageError):
            distance(affine_left, SpacePoint.real1(0.0), affine_left.identity)
        with pytest.raises(UsageError):
            ball_volume(real_line, affine_left.identity, 1.0)


class TestGeometry:
    def test_euclidean_distance(self, plane):
        assert distance(plane, plane.point([0, 0]), plane.point([3, 4])) == pytest.approx(5.0)

    @given(t=st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
    def test_vertical_geodesic(self, t):
        space = parse_space("affine-left")
        assert distance(space, space.identity, SpacePoint.affine(0.0, math.exp(t))) == pytest.approx(abs(t), abs=1e-9)

    def test_affine_distance_formula(self, affine_left):
        x, y = SpacePoint.affine(1.0, 2.0), SpacePoint.affine(-0.5, 0.5)
        expected = math.acosh(1.0 + ((1.5) ** 2 + 1.5 ** 2) / (2.0 * 2.0 * 0.5))
        assert distance(affine_left, x, y) == pytest.approx(expected, rel=1e-12)

    def test_nearby_points_keep_precision(self, affine_left):
        x = SpacePoint.affine(0.0, 1.0)
        y = SpacePoint.affine(1e-9, 1.0)
        assert distance(affine_left, x, y) == pytest.approx(1e-9, rel=1e-6)

    @given(a=coordinate, b=scale)
    def test_inverse(self, a, b):
        space = parse_space("affine-left")
        x = SpacePoint.affine(a, b)
        product = translate(space, x, inverse(space, x))
        assert product.coords[0] == pytest.approx(0.0, abs=1e-9)
        assert product.coords[1] == pytest.approx(1.0, rel=1e-12)

    @given(a1=coordinate, b1=scale, a2=coordinate, b2=scale)
    def test_modular_is_homomorphism(self, a1, b1, a2, b2):
        space = parse_space("affine-right")
        x, y = SpacePoint.affine(a1, b1), SpacePoint.affine(a2, b2)
        assert modular(space, translate(space, x, y)) == pytest.approx(modular(space, x) * modular(space, y), rel=1e-12)

    def test_group_law_is_not_commutative(self, affine_left):
        x, y = SpacePoint.affine(1.0, 2.0), SpacePoint.affine(3.0, 0.5)
        assert translate(affine_left, x, y) == SpacePoint.affine(7.0, 1.0)
        assert translate(affine_left, y, x) == SpacePoint.affine(3.5, 1.0)

    @pytest.mark.parametrize("descriptor", ["real-line", "euclidean:2", "euclidean:3", "affine-left"])
    def test_metric_axioms(self, descriptor):
        space = parse_space(descriptor)
        symmetry, triangle = metric_axiom_violations(space, substream(7, 1))
        assert symmetry <= 1e-9
        assert triangle <= 1e-9
        assert left_invariance_violation(space, substream(7, 2)) <= 1e-8

    @given(d=st.floats(min_value=0.01, max_value=6.0), angle=st.floats(min_value=0.0, max_value=6.28))
    @settings(max_examples=50)
    def test_exp_map_reaches_distance(self, d, angle):
        space = parse_space("affine-left")
        center = np.array([0.3, 1.7])
        direction = np.array([math.cos(angle), math.sin(angle)])
        point = exp_map(space, center, np.array(d), direction)
        assert distance(space, space.point(center), space.point(point)) == pytest.approx(d, rel=1e-8)

    def test_geodesic_segment(self, affine_right):
        segment = geodesic_segment(affine_right, SpacePoint.affine(0.0, 2.0), 1.0, 5)
        assert [t for t, _ in segment] == pytest.approx([-1.0, -0.5, 0.0, 0.5, 1.0])
        for t, point in segment:
            assert distance(affine_right, SpacePoint.affine(0.0, 2.0), point) == pytest.approx(abs(t), abs=1e-12)


class TestMeasures:
    def test_euclidean_volumes(self, real_line, plane):
        assert ball_volume(real_line, SpacePoint.real1(3.0), 2.5) == pytest.approx(5.0)
        assert ball_volume(plane, plane.point([1, 1]), 2.0) == pytest.approx(4.0 * math.pi)
        assert reference_volume(parse_space("euclidean:3"), 1.0) == pytest.approx(4.0 / 3.0 * math.pi)

    def test_hyperbolic_area(self, affine_left):
        assert reference_volume(affine_left, 2.0) == pytest.approx(2.0 * math.pi * (math.cosh(2.0) - 1.0), rel=1e-12)

    @given(b=scale, r=st.floats(min_value=0.1, max_value=4.0))
    def test_left_volume_is_translation_invariant(self, b, r):
        space = parse_space("affine-left")
        assert ball_volume(space, SpacePoint.affine(1.0, b), r) == pytest.approx(reference_volume(space, r), rel=1e-12)

    @given(b=scale, r=st.floats(min_value=0.1, max_value=4.0))
    def test_right_volume_scales_with_height(self, b, r):
        space = parse_space("affine-right")
        assert ball_volume(space, SpacePoint.affine(-2.0, b), r) == pytest.approx(b * reference_volume(space, r), rel=1e-12)

    @pytest.mark.parametrize("descriptor, point", [
        ("real-line", "0.5"),
        ("euclidean:3", "1,0,-1"),
        ("affine-left", "1,2"),
        ("affine-right", "-1,0.5"),
    ])
    @pytest.mark.parametrize("r", [0.1, 1.0, 5.0])
    def test_volume_is_lipschitz_in_radius(self, descriptor, point, r):
        space = parse_space(descriptor)
        x = space.parse_point(point)
        h = 1e-6 * r
        slope = (ball_volume(space, x, r + h) - ball_volume(space, x, r - h)) / (2.0 * h)
        for eps in (1e-3, 1e-4, 1e-5):
            step = ball_volume(space, x, r + eps) - ball_volume(space, x, r)
            assert 0.0 < step <= 2.0 * slope * eps

    def test_radius_must_be_positive(self, plane):
        with pytest.raises(DomainError):
            ball_volume(plane, plane.identity, 0.0)

    def test_ball_shadow(self, affine_left):
        center, radius = ball_shadow(affine_left, SpacePoint.affine(1.0, 2.0), 1.0)
        assert center.coords == pytest.approx((1.0, 2.0 * math.cosh(1.0)))
        assert radius == pytest.approx(2.0 * math.sinh(1.0))
        with pytest.raises(UsageError):
            ball_shadow(parse_space("euclidean:2"), parse_space("euclidean:2").identity, 1.0)

    def test_monte_carlo_left_area(self, affine_left):
        r = 1.0
        sample = sample_ball(affine_left, affine_left.identity, r, substream(3, 0), size=200_000)
        b = sample.points[:, 1]
        estimate = math.pi * math.sinh(r) ** 2 * float(np.mean(1.0 / b ** 2))
        assert estimate == pytest.approx(2.0 * math.pi * (math.cosh(r) - 1.0), rel=0.01)

    def test_monte_carlo_right_measure(self, affine_right):
        x = SpacePoint.affine(0.5, 3.0)
        r = 1.5
        sample = sample_ball(affine_right, x, r, substream(3, 1), size=200_000)
        b = sample.points[:, 1]
        estimate = math.pi * (3.0 * math.sinh(r)) ** 2 * float(np.mean(1.0 / b))
        assert estimate == pytest.approx(ball_volume(affine_right, x, r), rel=0.01)


class TestSampling:
    def test_samples_stay_inside(self, affine_left):
        x = SpacePoint.affine(-1.0, 0.3)
        sample = sample_ball(affine_left, x, 1.2, substream(5), size=5000)
        d = np.array([distance(affine_left, x, affine_left.point(p)) for p in sample.points])
        assert np.all(d < 1.2 + 1e-12)
        assert np.mean(sample.weights) == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_unit_ball_samples(self, dim):
        samples = unit_ball_samples(dim, 2000, substream(1, dim))
        assert samples.shape == (2000, dim)
        assert np.all(np.linalg.norm(samples, axis=1) <= 1.0)

    def test_substreams_are_reproducible(self):
        a = substream(42, 3, 1).uniform(size=4)
        b = substream(42, 3, 1).uniform(size=4)
        c = substream(42, 3, 2).uniform(size=4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_random_directions_are_unit(self, plane):
        directions = random_directions(plane, substream(9), (10, 4))
        assert directions.shape == (10, 4, 2)
        assert np.allclose(np.linalg.norm(directions, axis=-1), 1.0)
