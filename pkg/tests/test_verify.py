"""
Tests for the verification checks and suites
"""
import numpy as np
import pytest

from hlmax.analysis.catalog import make_function
from hlmax.analysis.operators import PExponent
from hlmax.analysis.spaces import SpacePoint, parse_space
from hlmax.analysis.verify import (
    CONTINUITY_DELTAS,
    SUITES,
    CheckReport,
    CheckStatus,
    check_continuity,
    check_convergence,
    check_domination,
    check_domination_random,
    check_global_bound,
    check_maximal_bound,
    check_radius_bound,
    continuity_offsets,
    enforce_non_vacuity,
    run_suite,
    suite_manifest,
    summarize,
)
from hlmax.config import QuadratureConfig
from hlmax.errors import UsageError

CFG = QuadratureConfig(threads=1)


def make_report(name, lhs, status=CheckStatus.PASS, zero_function=False):
    return CheckReport(name=name, paper_anchor="anchor", status=status, lhs=lhs, rhs=1.0, slack=0.0,
                       config_digest="0" * 16, seed=42, details={"zero_function": zero_function})


@pytest.fixture(scope="module")
def line_indicator(real_line):
    return make_function(real_line, "indicator-ball:0:1")


class TestReport:
    def test_dict_layout(self):
        report = make_report("domination/x", 0.5)
        assert list(report.to_dict()) == [
            "name", "paper_anchor", "status", "lhs", "rhs", "slack", "seed", "config_digest", "details",
        ]
        assert report.to_dict()["status"] == "pass"
        assert report.passed

    def test_summarize(self):
        reports = [make_report("a/1", 1.0), make_report("a/2", 1.0, CheckStatus.FAIL),
                   make_report("b/1", 1.0, CheckStatus.INCONCLUSIVE)]
        assert summarize(reports) == {"pass": 1, "fail": 1, "inconclusive": 1}


class TestNonVacuity:
    def test_all_zero_group_fails(self):
        reports = [make_report("domination/a", 0.0), make_report("domination/b", 0.0),
                   make_report("convergence/a", 0.3)]
        enforce_non_vacuity(reports)
        assert [r.status for r in reports[:2]] == [CheckStatus.FAIL, CheckStatus.FAIL]
        assert all(r.details["vacuous"] for r in reports[:2])
        assert reports[2].status is CheckStatus.PASS

    def test_one_positive_instance_is_enough(self):
        reports = [make_report("global-bound/a", 0.0), make_report("global-bound/b", 1e-3)]
        enforce_non_vacuity(reports)
        assert all(r.status is CheckStatus.PASS for r in reports)

    def test_zero_function_instances_are_exempt(self):
        reports = [make_report("convergence/zero", 0.0, zero_function=True)]
        enforce_non_vacuity(reports)
        assert reports[0].status is CheckStatus.PASS
        assert "vacuous" not in reports[0].details


class TestChecks:
    def test_convergence_on_line(self, real_line, line_indicator, exp_weight):
        report = check_convergence(real_line, line_indicator, exp_weight, SpacePoint.real1(2.0), CFG)
        assert report.status is CheckStatus.PASS
        assert report.details["maximal"] == pytest.approx(1.0 / 3.0, abs=1e-4)
        assert report.lhs == pytest.approx(0.95 * report.details["maximal"], rel=1e-12)
        assert report.rhs >= report.lhs
        assert report.details["normalized"] == sorted(report.details["normalized"])
        assert report.config_digest == CFG.digest()
        assert report.seed == CFG.master_seed

    def test_convergence_zero_function(self, real_line, exp_weight):
        f = make_function(real_line, "const:0")
        report = check_convergence(real_line, f, exp_weight, real_line.identity, CFG)
        assert report.status is CheckStatus.PASS
        assert report.details["zero_function"]
        assert report.lhs == 0.0

    def test_domination_on_sample_points(self, real_line, line_indicator, exp_weight):
        X = np.array([[0.0], [0.5], [2.0], [-3.0]])
        report = check_domination(real_line, line_indicator, exp_weight, (1, 2, 4), X, CFG)
        assert report.status is CheckStatus.PASS
        assert report.lhs <= report.rhs + report.slack
        assert report.details["worst_p"] in ("1", "2", "4")
        assert len(report.details["points"]) == 4

    def test_random_domination(self, real_line):
        report = check_domination_random(real_line, 5, CFG)
        assert report.status is CheckStatus.PASS
        assert report.details["configurations"] == 5
        assert report.name == "domination/real-line/random-5"

    def test_random_domination_is_seeded(self, real_line):
        a = check_domination_random(real_line, 3, CFG)
        b = check_domination_random(real_line, 3, CFG)
        assert a.to_dict() == b.to_dict()

    def test_random_domination_needs_line(self, plane):
        with pytest.raises(UsageError):
            check_domination_random(plane, 2, CFG)

    @pytest.mark.slow
    def test_global_bound_euclidean(self, exp_weight):
        space = parse_space("euclidean:1")
        f = make_function(space, "indicator-ball:0:1")
        report = check_global_bound(space, f, exp_weight, PExponent(2), PExponent(2), CFG)
        assert report.status is CheckStatus.PASS
        assert report.rhs == pytest.approx(np.sqrt(2.0), rel=1e-8)
        assert 0.0 < report.details["lhs_lower"] <= report.lhs
        assert "left Haar" in report.paper_anchor

    def test_global_bound_rejects_p_above_q(self, real_line, line_indicator, exp_weight):
        with pytest.raises(UsageError):
            check_global_bound(real_line, line_indicator, exp_weight, PExponent(4), PExponent(2), CFG)

    def test_global_bound_zero_function(self, real_line, exp_weight):
        f = make_function(real_line, "const:0")
        report = check_global_bound(real_line, f, exp_weight, PExponent(1), PExponent(2), CFG)
        assert report.status is CheckStatus.PASS
        assert report.lhs == 0.0

    def test_radius_bound_euclidean(self):
        space = parse_space("euclidean:1")
        f = make_function(space, "indicator-ball:0:1")
        report = check_radius_bound(space, f, (0.5, 1.0, 2.0), (1, 2, "inf"), CFG)
        assert report.status is CheckStatus.PASS
        pairs = report.details["pairs"]
        assert len(pairs) == 9
        assert all(pair["factor"] == 1.0 for pair in pairs)
        # averaging preserves the L1 mass of a nonnegative function
        l1 = [pair for pair in pairs if pair["p"] == "1"]
        for pair in l1:
            assert pair["lhs"] == pytest.approx(2.0, rel=1e-8)

    def test_continuity_on_line(self, exp_weight):
        space = parse_space("euclidean:1")
        f = make_function(space, "indicator-ball:0:1")
        report = check_continuity(space, f, exp_weight, PExponent(2), space.parse_point("0.5"), CFG)
        assert report.status is CheckStatus.PASS
        moduli = report.details["moduli"]
        assert len(moduli) == len(report.details["deltas"])
        assert moduli[-1] <= 0.05 * report.details["value"]
        assert report.details["excluded_offsets"] == 0

    def test_continuity_on_affine_left(self, affine_left, exp_weight, fast_cfg):
        f = make_function(affine_left, "bump:e:1")
        report = check_continuity(affine_left, f, exp_weight, PExponent(1), affine_left.identity, fast_cfg)
        assert report.status is CheckStatus.PASS
        details = report.details
        assert details["calibration_floor"] == pytest.approx(0.01 * details["value"], abs=1e-6)
        assert report.slack == max(details["error_band"], details["calibration_floor"])
        assert details["excluded_offsets"] == 0

    def test_continuity_on_affine_right_drops_low_offsets(self, affine_right, exp_weight, fast_cfg):
        f = make_function(affine_right, "bump:e:1")
        radii = (2.0, 1.0) + CONTINUITY_DELTAS
        report = check_continuity(affine_right, f, exp_weight, PExponent(1), affine_right.identity, fast_cfg,
                                  radii=radii)
        assert report.status is CheckStatus.PASS
        assert report.details["excluded_offsets"] > 0
        assert report.details["error_band"] > 0.0

    def test_continuity_offsets_mask(self, affine_left, affine_right):
        # Delta(y) <= 2 Delta(x) keeps exactly the offsets with b >= b_x / 2
        points, keep = continuity_offsets(affine_right, affine_right.identity, (2.0, 0.25), CFG)
        assert points.shape == (2, 32, 2)
        assert np.array_equal(keep, points[..., 1] >= 0.5)
        assert not keep[0].all()
        assert keep[1].all()

        _, keep_left = continuity_offsets(affine_left, affine_left.identity, (2.0, 0.25), CFG)
        assert keep_left.all()

    def test_continuity_rejects_increasing_scales(self, real_line, line_indicator, exp_weight):
        with pytest.raises(UsageError):
            check_continuity(real_line, line_indicator, exp_weight, PExponent(1), real_line.identity, CFG,
                             radii=(0.1, 0.2))

    @pytest.mark.slow
    def test_maximal_bound_on_line(self, real_line, line_indicator, exp_weight):
        report = check_maximal_bound(real_line, line_indicator, exp_weight, PExponent(1), PExponent(2), CFG)
        assert report.status is CheckStatus.PASS
        assert report.lhs > 0.0
        assert report.details["maximal_norm"] > report.lhs

    def test_maximal_bound_needs_line(self, plane, exp_weight):
        f = make_function(plane, "bump:0,0:1")
        with pytest.raises(UsageError):
            check_maximal_bound(plane, f, exp_weight, PExponent(1), PExponent(2), CFG)


class TestSuites:
    def test_unknown_suite(self):
        with pytest.raises(UsageError):
            suite_manifest("nope")

    def test_all_is_the_union(self):
        union = [name for suite in SUITES if suite != "all" for name, _ in suite_manifest(suite)]
        names = [name for name, _ in suite_manifest("all")]
        assert sorted(names) == sorted(union)
        assert len(set(names)) == len(names)

    def test_manifest_covers_every_check_type(self):
        types = {name.split("/", 1)[0] for name, _ in suite_manifest("all")}
        assert types == {"convergence", "domination", "global-bound", "radius-bound", "continuity", "maximal-bound"}

    def test_global_pairs_per_space(self):
        names = [name for name, _ in suite_manifest("affine-left")]
        for p, q in ((1, 1), (1, 2), (2, 2), (2, 4)):
            assert f"global-bound/affine-left/indicator-ball:e:1/exp/p={p}/q={q}" in names

    @pytest.mark.slow
    def test_convergence_suite_is_deterministic(self, fast_cfg):
        first = run_suite("convergence", fast_cfg)
        second = run_suite("convergence", fast_cfg.with_changes(threads=2))
        assert [r.name for r in first] == sorted(r.name for r in first)
        assert [r.to_dict() for r in first] == [r.to_dict() for r in second]
        assert summarize(first)["fail"] == 0

    @pytest.mark.slow
    def test_timing_is_opt_in(self, fast_cfg):
        reports = run_suite("convergence", fast_cfg, include_timing=True)
        assert all("elapsed_ms" in r.details for r in reports)
