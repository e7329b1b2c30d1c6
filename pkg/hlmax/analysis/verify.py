"""
Verification
Executable inequality checks for the averaging, maximal and integral-function
operators, and the fixed suites that run them

Every check returns a CheckReport carrying the measured left and right sides,
the slack it was judged with, and the claim it exercises. A check never raises
on a violated inequality: failures are reports.
"""
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hlmax.analysis.catalog import (
    RadiusWeight,
    TestFunction,
    adaptive_weight,
    g_norm,
    make_function,
    make_weight,
    modular_ball_factor,
)
from hlmax.analysis.operators import (
    Field,
    PExponent,
    average_field,
    function_field,
    integral_fields,
    integral_function,
    integral_tail_bound,
    integral_values,
    lq_norm,
    maximal,
    maximal_field,
    maximal_values,
    p_sweep,
    region_for,
    uses_exact_path,
)
from hlmax.analysis.spaces import (
    BallSpec,
    SpaceInstance,
    SpaceKind,
    SpacePoint,
    exp_map,
    parse_space,
    random_directions,
    random_points,
    substream,
)
from hlmax.config import QuadratureConfig
from hlmax.errors import UsageError
from hlmax.utils.io_utils import format_float
from hlmax.utils.logger import setup_logger
from hlmax.utils.metrics import StageTimer, TimingCollector

logger = setup_logger(__name__)

STREAM_SAMPLE_POINTS = 31
STREAM_RANDOM_CONFIGS = 32
STREAM_CONTINUITY = 33

DETERMINISTIC_SLACK = 1e-9
MC_HEADROOM = 0.02
SIGMAS = 3.0

CONVERGENCE_EXPONENTS = (1, 2, 4, 8, 16, 32, 64, 128, 256)
CONVERGENCE_FRACTION = 0.95

CONTINUITY_OFFSETS = 32
CONTINUITY_DELTAS = tuple(0.5 ** k for k in range(1, 9))
CONTINUITY_FRACTION = 0.05
# calibration floor under the Monte Carlo error band, relative to I f(x)
CONTINUITY_MC_FLOOR = 0.01

SUITES = ("all", "euclidean", "affine-left", "affine-right", "convergence")


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class CheckReport:
    """Outcome of one check; pass means lhs <= rhs + slack"""
    name: str
    paper_anchor: str
    status: CheckStatus
    lhs: float
    rhs: float
    slack: float
    config_digest: str
    seed: int
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status is CheckStatus.PASS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "paper_anchor": self.paper_anchor,
            "status": self.status.value,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "slack": float(self.slack),
            "seed": int(self.seed),
            "config_digest": self.config_digest,
            "details": self.details,
        }


_ANCHORS = {
    "convergence": ("Integral-functions converge to the maximal function", "For any f∈F_loc(X) and every x∈X"),
    "domination": ("Pointwise domination by the maximal function", "Since Af(x,r)≤Mf(x) we have"),
    "radius-bound-left": ("Per-radius averaging bound under left Haar measure", "by Jensen's inequality we have"),
    "radius-bound-right": ("Per-radius averaging bound under right Haar measure", "for any f∈F_loc(G),r∈(0,∞)"),
    "global-bound-left": ("Global L_q bound for weights with finite G-norm", "radius-weight with finite G-norm"),
    "global-bound-right": ("Global L_q bound under right Haar measure", "w is an arbitrary radius-weight"),
    "continuity-left": ("Continuity at points of local boundedness", "continuous almost every-where"),
    "continuity-right": ("Continuity under right Haar measure", "continuous almost every-where; Δ(y)≤2Δ(x)"),
    "maximal-bound": ("L_q equivalence with the maximal function", "uniformly (L_q(X),L_q(X))-bounded"),
}


def _anchor(key: str) -> str:
    label, quote = _ANCHORS[key]
    return f'{label}: "{quote}"'


def _judge(lhs: float, rhs: float, slack: float, monte_carlo: bool) -> CheckStatus:
    """
    Status of the inequality lhs <= rhs

    Misses within a second slack band are inconclusive on Monte Carlo paths.
    """
    margin = rhs + slack - lhs
    if margin >= 0:
        return CheckStatus.PASS
    if monte_carlo and -margin <= slack:
        return CheckStatus.INCONCLUSIVE
    return CheckStatus.FAIL


def _combine(*statuses: CheckStatus) -> CheckStatus:
    if CheckStatus.FAIL in statuses:
        return CheckStatus.FAIL
    if CheckStatus.INCONCLUSIVE in statuses:
        return CheckStatus.INCONCLUSIVE
    return CheckStatus.PASS


def _report(name: str, anchor: str, status: CheckStatus, lhs: float, rhs: float, slack: float,
            cfg: QuadratureConfig, details: Dict[str, Any]) -> CheckReport:
    return CheckReport(
        name=name,
        paper_anchor=_anchor(anchor),
        status=status,
        lhs=float(lhs),
        rhs=float(rhs),
        slack=float(slack),
        config_digest=cfg.digest(),
        seed=cfg.master_seed,
        details=details,
    )


def _describe(space: SpaceInstance, f: TestFunction, w: Optional[RadiusWeight] = None) -> Dict[str, Any]:
    details: Dict[str, Any] = {"space": space.descriptor, "function": f.descriptor, "zero_function": f.is_zero}
    if w is not None:
        details["weight"] = w.name
        if w.is_compact:
            details["weight_note"] = (
                f"{w.name} vanishes beyond r={format_float(w.support_bound)}; "
                "outside the a.e. nonzero class, checked as an extension"
            )
    return details


def _mc_slack(rhs: float, error: float, monte_carlo: bool) -> float:
    slack = DETERMINISTIC_SLACK + error
    if monte_carlo:
        slack += MC_HEADROOM * abs(rhs)
    return slack


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_convergence(space: SpaceInstance,
                      f: TestFunction,
                      w: RadiusWeight,
                      x: SpacePoint,
                      cfg: QuadratureConfig,
                      name: Optional[str] = None) -> CheckReport:
    """
    Integral-functions approach the maximal function as p grows

    Sweeps p = 1, 2, 4, ..., 256. Passes when the normalized column is
    nondecreasing within error bounds, the last normalized value reaches
    0.95 * Mf(x), and gap(256) < gap(16) (or gap(16) is already within slack).

    Args:
        space: Space
        f: Test function admissible for the maximal function
        w: Radius weight
        x: Point
        cfg: Quadrature configuration
        name: Report name (default derived from the inputs)

    Returns:
        CheckReport with lhs = 0.95 * Mf(x) and rhs = normalized value at p = 256
    """
    name = name or f"convergence/{space}/{f}/{w.name}/x={x}"
    rows = p_sweep(space, f, w, x, CONVERGENCE_EXPONENTS, cfg)
    M = rows[0].maximal
    monte_carlo = M.is_monte_carlo or any(row.i_value.is_monte_carlo for row in rows)

    def band(row) -> float:
        return row.i_value.error_bound / w.norm ** (1.0 / row.p.value)

    statuses = []
    worst_drop = 0.0
    for prev, cur in zip(rows, rows[1:]):
        drop = prev.normalized - cur.normalized
        slack = DETERMINISTIC_SLACK + band(prev) + band(cur)
        worst_drop = max(worst_drop, drop)
        statuses.append(_judge(prev.normalized, cur.normalized, slack, monte_carlo))

    last = rows[-1]
    lhs = CONVERGENCE_FRACTION * M.value
    slack = _mc_slack(last.normalized, band(last) + CONVERGENCE_FRACTION * M.error_bound, monte_carlo)
    statuses.append(_judge(lhs, last.normalized, slack, monte_carlo))

    by_p = {row.p.value: row for row in rows}
    gap_16, gap_256 = by_p[16.0].gap_to_max, by_p[256.0].gap_to_max
    gap_slack = DETERMINISTIC_SLACK + band(by_p[16.0]) + band(by_p[256.0]) + M.error_bound
    if gap_16 > gap_slack:
        statuses.append(_judge(gap_256, gap_16, 0.0, monte_carlo))

    details = _describe(space, f, w)
    details.update({
        "point": str(x),
        "maximal": M.value,
        "maximal_error": M.error_bound,
        "worst_drop": worst_drop,
        "p": [str(row.p) for row in rows],
        "normalized": [row.normalized for row in rows],
        "gap_to_max": [row.gap_to_max for row in rows],
        "threshold_note": "the 0.95 fraction and the gap comparison are calibration, not part of the limit statement",
    })
    return _report(name, "convergence", _combine(*statuses), lhs, last.normalized, slack, cfg, details)


def check_domination(space: SpaceInstance,
                     f: TestFunction,
                     w: RadiusWeight,
                     p_list: Sequence[float],
                     sample_points: np.ndarray,
                     cfg: QuadratureConfig,
                     name: Optional[str] = None) -> CheckReport:
    """
    I_{p,w}f(x) <= ||w||^{1/p} Mf(x) at every sampled (p, x)

    Returns:
        CheckReport for the pair with the smallest margin
    """
    exponents = [PExponent.coerce(p) for p in p_list]
    name = name or f"domination/{space}/{f}/{w.name}"
    X = np.asarray(sample_points, dtype=float).reshape(-1, space.dim)

    fields = integral_values(space, f, w, exponents, X, cfg, cfg.mc_samples)
    M, M_err, _, _ = maximal_values(space, f, X, cfg, cfg.mc_samples)
    monte_carlo = not (f.is_zero or uses_exact_path(space, f))

    worst = None
    for p in exponents:
        scale = 1.0 if p.is_infinite else w.norm ** (1.0 / p.value)
        I = fields[p]
        for i in range(X.shape[0]):
            rhs = scale * M[i]
            slack = _mc_slack(rhs, I.error_bounds[i] + scale * M_err[i], monte_carlo)
            margin = rhs + slack - I.values[i]
            if worst is None or margin < worst[0]:
                worst = (margin, I.values[i], rhs, slack, str(p), i)

    _, lhs, rhs, slack, p_text, index = worst
    details = _describe(space, f, w)
    details.update({
        "p": [str(p) for p in exponents],
        "points": [str(space.point(x)) for x in X],
        "worst_p": p_text,
        "worst_point": str(space.point(X[index])),
    })
    return _report(name, "domination", _judge(lhs, rhs, slack, monte_carlo), lhs, rhs, slack, cfg, details)


def check_domination_random(space: SpaceInstance, n: int, cfg: QuadratureConfig, name: Optional[str] = None) -> CheckReport:
    """
    Pointwise domination over n random (f, w, p, x) configurations on a 1-D space

    Functions, weights, exponents and points are drawn from a dedicated
    substream, so the configurations depend only on the master seed.
    """
    if space.dim != 1:
        raise UsageError("Random domination configurations are drawn on 1-D spaces")
    name = name or f"domination/{space}/random-{n}"

    worst = None
    for k in range(n):
        rng = substream(cfg.master_seed, STREAM_RANDOM_CONFIGS, k)
        center = format_float(round(float(rng.uniform(-2.0, 2.0)), 3))
        size = format_float(round(float(rng.uniform(0.25, 2.0)), 3))
        kind = ("indicator-ball", "bump", "gauss")[int(rng.integers(3))]
        weight_spec = ("exp", "gauss", f"uniform:{format_float(round(float(rng.uniform(0.5, 3.0)), 3))}")[int(rng.integers(3))]
        p = float((1, 2, 3, 4, 8, 16)[int(rng.integers(6))])
        x = space.point([round(float(rng.uniform(-4.0, 4.0)), 3)])

        f = make_function(space, f"{kind}:{center}:{size}")
        w = make_weight(weight_spec, space, cfg)
        I = integral_function(space, f, w, p, x, cfg)
        M = maximal(space, f, x, cfg)

        rhs = w.norm ** (1.0 / p) * M.value
        slack = DETERMINISTIC_SLACK + I.error_bound + w.norm ** (1.0 / p) * M.error_bound
        margin = rhs + slack - I.value
        if worst is None or margin < worst[0]:
            worst = (margin, I.value, rhs, slack, {"function": f.descriptor, "weight": w.name, "p": format_float(p), "point": str(x)})

    _, lhs, rhs, slack, config = worst
    details = {"space": space.descriptor, "configurations": n, "zero_function": False, "worst": config}
    return _report(name, "domination", _judge(lhs, rhs, slack, False), lhs, rhs, slack, cfg, details)


def _global_constant(space: SpaceInstance, w: RadiusWeight, p: PExponent, q: PExponent,
                     cfg: QuadratureConfig) -> Tuple[float, float, Dict[str, Any]]:
    """Constant of the global bound with its relative standard error"""
    inv_p = 0.0 if p.is_infinite else 1.0 / p.value
    inv_q = 0.0 if q.is_infinite else 1.0 / q.value
    info: Dict[str, Any] = {"w_norm": w.norm}

    if not space.left_haar_regime:
        return w.norm ** inv_p, 0.0, info

    G = g_norm(space, w, cfg)
    info["g_norm"] = G.value
    info["g_norm_error"] = G.error_bound
    constant = w.norm ** (inv_p - inv_q) * G.value ** inv_q
    rel_sigma = inv_q * G.std_error / G.value if G.value > 0 else 0.0
    return constant, rel_sigma, info


def check_global_bound(space: SpaceInstance,
                       f: TestFunction,
                       w: RadiusWeight,
                       p: PExponent,
                       q: PExponent,
                       cfg: QuadratureConfig,
                       fields: Optional[Dict[PExponent, Field]] = None,
                       name: Optional[str] = None) -> CheckReport:
    """
    ||I_{p,w}f||_q <= C ||f||_q with C = ||w||^{1/p-1/q} ||w||_G^{1/q} (left Haar)
    or C = ||w||^{1/p} (right Haar)

    The left side is measured over the support of f widened by a margin; the
    outside mass enters through integral_tail_bound. Pass iff the upper end of
    the left side is at most 1.02 * rhs + 3 sigma; fail iff the region-only
    measurement already exceeds it.

    Args:
        space: Space
        f: Compactly supported test function
        w: Radius weight
        p: Exponent of the integral-function
        q: Norm exponent (>= p)
        cfg: Quadrature configuration
        fields: Precomputed integral fields by exponent (shared across checks)
        name: Report name

    Returns:
        CheckReport
    """
    p = PExponent.coerce(p)
    q = PExponent.coerce(q)
    if p > q:
        raise UsageError(f"The global bound needs p <= q, got p={p}, q={q}")
    name = name or f"global-bound/{space}/{f}/{w.name}/p={p}/q={q}"
    anchor = "global-bound-left" if space.left_haar_regime else "global-bound-right"
    details = _describe(space, f, w)
    details.update({"p": str(p), "q": str(q)})

    if f.is_zero:
        return _report(name, anchor, CheckStatus.PASS, 0.0, 0.0, DETERMINISTIC_SLACK, cfg, details)

    region = region_for(space, f)
    if p.is_infinite:
        field_p = maximal_field(space, f, cfg)
        tail = f.sup
    else:
        field_p = (fields or {}).get(p) or integral_fields(space, f, w, [p], cfg)[p]
        tail = integral_tail_bound(space, f, w, p, q, region.radius, cfg)

    breakpoints = tuple(r for _, r in f.sharp_spheres)
    norm = lq_norm(space, field_p, q, region, cfg, tail_certificate=tail, breakpoints=breakpoints)
    f_norm = f.norm(q.value, cfg)
    constant, rel_sigma, info = _global_constant(space, w, p, q, cfg)

    rhs = constant * f_norm.value
    sigma = norm.std_error + rhs * rel_sigma + constant * f_norm.std_error
    threshold = (1.0 + MC_HEADROOM) * rhs + SIGMAS * sigma + DETERMINISTIC_SLACK + constant * (f_norm.error_bound - SIGMAS * f_norm.std_error)
    slack = threshold - rhs

    lhs_upper = norm.upper
    lhs_lower = norm.value
    if lhs_upper <= threshold:
        status = CheckStatus.PASS
    elif lhs_lower > threshold:
        status = CheckStatus.FAIL
    else:
        status = CheckStatus.INCONCLUSIVE

    details.update(info)
    details.update({
        "constant": constant,
        "f_norm": f_norm.value,
        "region_radius": region.radius,
        "region_norm": norm.value,
        "norm_error": norm.error_bound,
        "tail_certificate": tail,
        "lhs_lower": lhs_lower,
    })
    return _report(name, anchor, status, lhs_upper, rhs, slack, cfg, details)


def check_radius_bound(space: SpaceInstance,
                       f: TestFunction,
                       r_list: Sequence[float],
                       p_list: Sequence[float],
                       cfg: QuadratureConfig,
                       name: Optional[str] = None) -> CheckReport:
    """
    ||Af(.,r)||_p <= factor(r)^{1/p} ||f||_p at every (r, p)

    factor(r) is the ball-averaged modular factor under left Haar measure
    (identically 1 on unimodular spaces) and 1 under right Haar measure.
    Compactly supported f make Af(., r) vanish outside B_{anchor, R_f + r},
    so no tail certificate is needed. For other f both sides are measured
    over the same bounded region.

    Returns:
        CheckReport for the (r, p) pair with the smallest margin
    """
    exponents = [PExponent.coerce(p) for p in p_list]
    radii = [float(r) for r in r_list]
    name = name or f"radius-bound/{space}/{f}"
    anchor = "radius-bound-left" if space.left_haar_regime else "radius-bound-right"

    if space.left_haar_regime:
        factors, factor_sd = modular_ball_factor(space, np.array(radii), cfg)
    else:
        factors, factor_sd = np.ones(len(radii)), np.zeros(len(radii))

    entries = []
    worst = None
    for k, r in enumerate(radii):
        A = average_field(space, f, r, cfg)
        if f.has_compact_support:
            region = BallSpec(f.anchor, f.support_radius + r) if not f.is_zero else BallSpec(f.anchor, r)
        else:
            region = BallSpec(f.anchor, 5.0)
        kinks = sorted(({abs(R - r) for _, R in f.sharp_spheres} | {R + r for _, R in f.sharp_spheres}) - {0.0})

        for p in exponents:
            lhs = lq_norm(space, A, p, region, cfg, compact=True, breakpoints=kinks)
            if f.has_compact_support:
                f_norm = f.norm(p.value, cfg)
            else:
                f_norm = lq_norm(space, function_field(f), p, region, cfg, compact=True)

            power = 0.0 if p.is_infinite else 1.0 / p.value
            scale = factors[k] ** power
            rhs = scale * f_norm.value
            monte_carlo = lhs.is_monte_carlo or f_norm.is_monte_carlo or factor_sd[k] > 0
            error = lhs.error_bound + scale * f_norm.error_bound
            error += SIGMAS * power * rhs * factor_sd[k] / factors[k] if factors[k] > 0 else 0.0
            slack = _mc_slack(rhs, error, monte_carlo)
            status = _judge(lhs.value, rhs, slack, monte_carlo)
            entries.append({
                "r": r, "p": str(p), "lhs": lhs.value, "rhs": rhs,
                "factor": float(factors[k]), "status": status.value,
            })
            margin = rhs + slack - lhs.value
            if worst is None or margin < worst[0]:
                worst = (margin, lhs.value, rhs, slack)

    status = _combine(*(CheckStatus(entry["status"]) for entry in entries))
    _, lhs, rhs, slack = worst
    details = _describe(space, f)
    details["pairs"] = entries
    return _report(name, anchor, status, lhs, rhs, slack, cfg, details)


def continuity_offsets(space: SpaceInstance, x: SpacePoint, deltas: Sequence[float], cfg: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed pattern of 32 offsets around x scaled to each delta

    Returns:
        (points of shape (len(deltas), 32, dim), keep mask of shape (len(deltas), 32));
        on right Haar spaces points with Delta(y) > 2 Delta(x) are masked out
    """
    rng = substream(cfg.master_seed, STREAM_CONTINUITY)
    directions = random_directions(space, rng, (CONTINUITY_OFFSETS,))
    fractions = rng.uniform(0.0, 1.0, size=CONTINUITY_OFFSETS) ** (1.0 / space.dim)

    c = x.as_array()
    d = np.asarray(deltas, dtype=float)[:, None] * fractions[None, :]
    points = exp_map(space, c, d, np.broadcast_to(directions, d.shape + (space.dim,)))

    keep = np.ones(d.shape, dtype=bool)
    if space.kind is SpaceKind.AFFINE_RIGHT:
        # Delta(y) = 1/y_b <= 2 Delta(x)
        keep = points[..., 1] >= 0.5 * c[1]
    return points, keep


def check_continuity(space: SpaceInstance,
                     f: TestFunction,
                     w: RadiusWeight,
                     p: PExponent,
                     x: SpacePoint,
                     cfg: QuadratureConfig,
                     radii: Sequence[float] = CONTINUITY_DELTAS,
                     name: Optional[str] = None) -> CheckReport:
    """
    Modulus of continuity of I_{p,w}f at x

    m(delta) is the largest |I f(x) - I f(y)| over the offset pattern at
    scale delta. Passes when m is nonincreasing within error bands and the
    last m(delta) is at most 5% of I f(x). The band is the error bound at x
    plus the largest error bound among kept offsets; Monte Carlo fields use
    at least 1% of I f(x). The 5% level and that floor are calibration.

    Args:
        space: Space
        f: Test function
        w: Radius weight
        p: Exponent
        x: Point (f must be locally bounded there)
        cfg: Quadrature configuration
        radii: Decreasing scales delta
        name: Report name

    Returns:
        CheckReport with lhs = m(last delta), rhs = 0.05 * (I f(x) + 1e-12)
    """
    p = PExponent.coerce(p)
    name = name or f"continuity/{space}/{f}/{w.name}/p={p}/x={x}"
    anchor = "continuity-left" if space.left_haar_regime else "continuity-right"
    details = _describe(space, f, w)
    details.update({"p": str(p), "point": str(x)})

    if not math.isfinite(f.local_bound(x)):
        details["reason"] = "f is not essentially bounded near x"
        return _report(name, anchor, CheckStatus.INCONCLUSIVE, math.nan, math.nan, 0.0, cfg, details)

    deltas = [float(d) for d in radii]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise UsageError("Continuity scales must be strictly decreasing")

    points, keep = continuity_offsets(space, x, deltas, cfg)
    field_p = maximal_field(space, f, cfg) if p.is_infinite else integral_fields(space, f, w, [p], cfg)[p]
    X = np.concatenate((x.as_array()[None, :], points.reshape(-1, space.dim)))
    values = field_p(X)

    center, center_err = float(values.values[0]), float(values.error_bounds[0])
    others = values.values[1:].reshape(keep.shape)
    other_err = values.error_bounds[1:].reshape(keep.shape)
    diffs = np.where(keep, np.abs(others - center), 0.0)
    moduli = diffs.max(axis=1)

    monte_carlo = not field_p.exact
    error_band = DETERMINISTIC_SLACK + center_err + float(np.max(np.where(keep, other_err, 0.0), initial=0.0))
    floor = CONTINUITY_MC_FLOOR * center + DETERMINISTIC_SLACK if monte_carlo else 0.0
    band = max(error_band, floor)

    statuses = [_judge(b, a, band, monte_carlo) for a, b in zip(moduli, moduli[1:])]
    rhs = CONTINUITY_FRACTION * (center + 1e-12)
    statuses.append(_judge(float(moduli[-1]), rhs, band, monte_carlo))

    details.update({
        "value": center,
        "deltas": deltas,
        "moduli": [float(m) for m in moduli],
        "excluded_offsets": int(np.size(keep) - np.count_nonzero(keep)),
        "error_band": error_band,
        "calibration_floor": floor,
        "threshold_note": "the 5% modulus and the Monte Carlo band floor are calibration, not part of the continuity statement",
    })
    return _report(name, anchor, _combine(*statuses), float(moduli[-1]), rhs, band, cfg, details)


def check_maximal_bound(space: SpaceInstance,
                        f: TestFunction,
                        w: RadiusWeight,
                        p: PExponent,
                        q: PExponent,
                        cfg: QuadratureConfig,
                        fields: Optional[Dict[PExponent, Field]] = None,
                        name: Optional[str] = None) -> CheckReport:
    """
    ||I_{p,w}f||_q <= ||w||^{1/p} ||Mf||_q over a bounded region of a 1-D space

    Both norms are restricted to the same region, where the pointwise
    domination carries over unchanged.
    """
    p = PExponent.coerce(p)
    q = PExponent.coerce(q)
    if space.dim != 1:
        raise UsageError("The maximal-bound check runs on 1-D spaces")
    name = name or f"maximal-bound/{space}/{f}/{w.name}/p={p}/q={q}"
    details = _describe(space, f, w)
    details.update({"p": str(p), "q": str(q), "restriction": "both norms over the same region"})

    if f.is_zero:
        return _report(name, "maximal-bound", CheckStatus.PASS, 0.0, 0.0, DETERMINISTIC_SLACK, cfg, details)

    region = region_for(space, f)
    breakpoints = tuple(r for _, r in f.sharp_spheres)
    field_p = (fields or {}).get(p) or integral_fields(space, f, w, [p], cfg)[p]
    lhs = lq_norm(space, field_p, q, region, cfg, compact=True, breakpoints=breakpoints)

    dense = cfg.with_changes(region_panels=64)
    M_norm = lq_norm(space, maximal_field(space, f, dense), q, region, dense, compact=True,
                     breakpoints=breakpoints, adaptive=False)
    scale = w.norm ** (1.0 / p.value)
    rhs = scale * M_norm.value
    slack = DETERMINISTIC_SLACK + lhs.error_bound + scale * M_norm.error_bound

    details.update({"region_radius": region.radius, "maximal_norm": M_norm.value})
    status = _judge(lhs.value, rhs, slack, lhs.is_monte_carlo or M_norm.is_monte_carlo)
    return _report(name, "maximal-bound", status, lhs.value, rhs, slack, cfg, details)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

CheckTask = Tuple[str, Callable[[QuadratureConfig], CheckReport]]

GLOBAL_PAIRS = ((1, 1), (1, 2), (2, 2), (2, 4))
RIGHT_PAIRS = ((1, 2), (2, 2))
RADII = (0.5, 1.0, 2.0)


def _global_tasks(space_spec: str, function_specs: Sequence[str], weight_spec: str,
                  pairs: Sequence[Tuple[int, int]]) -> List[CheckTask]:
    """Global-bound checks for several functions, sharing one field set per function"""
    tasks = []
    for function_spec in function_specs:
        shared: Dict[str, Dict[PExponent, Field]] = {}
        lock = threading.Lock()

        def run(cfg: QuadratureConfig, p: int, q: int, function_spec=function_spec, shared=shared, lock=lock) -> CheckReport:
            space = parse_space(space_spec)
            f = make_function(space, function_spec)
            w = make_weight(weight_spec, space, cfg)
            key = cfg.digest()
            with lock:
                if key not in shared:
                    shared[key] = integral_fields(space, f, w, sorted({a for a, _ in pairs}), cfg)
            return check_global_bound(space, f, w, PExponent(p), PExponent(q), cfg, fields=shared[key],
                                      name=f"global-bound/{space_spec}/{function_spec}/{weight_spec}/p={p}/q={q}")

        for p, q in pairs:
            tasks.append((f"global-bound/{space_spec}/{function_spec}/{weight_spec}/p={p}/q={q}",
                          lambda cfg, p=p, q=q, run=run: run(cfg, p, q)))
    return tasks


def _convergence_task(space_spec: str, function_spec: str, weight_spec: str, point: str) -> CheckTask:
    name = f"convergence/{space_spec}/{function_spec}/{weight_spec}/x={point}"

    def run(cfg: QuadratureConfig) -> CheckReport:
        space = parse_space(space_spec)
        return check_convergence(space, make_function(space, function_spec), make_weight(weight_spec, space, cfg),
                                 space.parse_point(point), cfg, name=name)
    return name, run


def _domination_task(space_spec: str, function_spec: str, weight_spec: str, p_list: Sequence[float]) -> CheckTask:
    name = f"domination/{space_spec}/{function_spec}/{weight_spec}"

    def run(cfg: QuadratureConfig) -> CheckReport:
        space = parse_space(space_spec)
        f = make_function(space, function_spec)
        spread = 1.0 if space.is_affine else 2.0
        X = random_points(space, substream(cfg.master_seed, STREAM_SAMPLE_POINTS), 4, spread=spread)
        X = np.concatenate((f.anchor.as_array()[None, :], X))
        return check_domination(space, f, make_weight(weight_spec, space, cfg), p_list, X, cfg, name=name)
    return name, run


def _radius_task(space_spec: str, function_spec: str, p_list: Sequence[str]) -> CheckTask:
    name = f"radius-bound/{space_spec}/{function_spec}"

    def run(cfg: QuadratureConfig) -> CheckReport:
        space = parse_space(space_spec)
        return check_radius_bound(space, make_function(space, function_spec), RADII,
                                  [PExponent.parse(p) for p in p_list], cfg, name=name)
    return name, run


def _continuity_task(space_spec: str, function_spec: str, weight_spec: str, p: int, point: str) -> CheckTask:
    name = f"continuity/{space_spec}/{function_spec}/{weight_spec}/p={p}/x={point}"

    def run(cfg: QuadratureConfig) -> CheckReport:
        space = parse_space(space_spec)
        return check_continuity(space, make_function(space, function_spec), make_weight(weight_spec, space, cfg),
                                PExponent(p), space.parse_point(point), cfg, name=name)
    return name, run


def _maximal_bound_tasks(space_spec: str, function_spec: str, weight_spec: str,
                         pairs: Sequence[Tuple[int, int]]) -> List[CheckTask]:
    tasks = []
    for p, q in pairs:
        name = f"maximal-bound/{space_spec}/{function_spec}/{weight_spec}/p={p}/q={q}"

        def run(cfg: QuadratureConfig, p=p, q=q, name=name) -> CheckReport:
            space = parse_space(space_spec)
            return check_maximal_bound(space, make_function(space, function_spec), make_weight(weight_spec, space, cfg),
                                       PExponent(p), PExponent(q), cfg, name=name)
        tasks.append((name, run))
    return tasks


def _adaptive_global_task(space_spec: str, function_spec: str, p: int, q: int) -> CheckTask:
    name = f"global-bound/{space_spec}/{function_spec}/adaptive/p={p}/q={q}"

    def run(cfg: QuadratureConfig) -> CheckReport:
        space = parse_space(space_spec)
        return check_global_bound(space, make_function(space, function_spec), adaptive_weight(space, cfg),
                                  PExponent(p), PExponent(q), cfg, name=name)
    return name, run


def _random_domination_task(space_spec: str, n: int) -> CheckTask:
    name = f"domination/{space_spec}/random-{n}"
    return name, lambda cfg: check_domination_random(parse_space(space_spec), n, cfg, name=name)


def suite_manifest(suite: str) -> List[CheckTask]:
    """
    Named checks of a suite

    Args:
        suite: One of SUITES

    Returns:
        List of (name, runner) pairs; runners take a QuadratureConfig
    """
    if suite not in SUITES:
        raise UsageError(f"Unknown suite {suite!r}; choose from {', '.join(SUITES)}")

    convergence = [
        _convergence_task("real-line", "indicator-ball:0:1", "exp", "2"),
        _convergence_task("real-line", "const:2", "uniform:2", "0"),
        _convergence_task("real-line", "const:0", "exp", "0"),
        _convergence_task("real-line", "gauss:0:1", "gauss", "1"),
        _convergence_task("affine-left", "bump:e:1", "exp", "e"),
    ]

    euclidean = [
        _domination_task("real-line", "indicator-ball:0:1", "exp", (1, 2, 4, 8)),
        _random_domination_task("real-line", 50),
        _domination_task("euclidean:2", "bump:0,0:1", "exp", (1, 2, 4)),
        *_global_tasks("euclidean:1", ("indicator-ball:0:1", "bump:0:1"), "exp", GLOBAL_PAIRS),
        *_global_tasks("euclidean:2", ("indicator-ball:0,0:1",), "exp", ((1, 1), (2, 2))),
        _radius_task("euclidean:1", "indicator-ball:0:1", ("1", "2", "inf")),
        _radius_task("euclidean:2", "indicator-ball:0,0:1", ("1", "2")),
        _continuity_task("euclidean:1", "indicator-ball:0:1", "exp", 2, "0.5"),
        _continuity_task("euclidean:2", "bump:0,0:1", "exp", 1, "0.25,0"),
        *_maximal_bound_tasks("real-line", "indicator-ball:0:1", "exp", ((1, 2), (2, 4))),
    ]

    affine_left = [
        _radius_task("affine-left", "indicator-ball:e:1", ("1", "2")),
        *_global_tasks("affine-left", ("indicator-ball:e:1", "bump:e:1"), "exp", GLOBAL_PAIRS),
        _adaptive_global_task("affine-left", "indicator-ball:e:1", 1, 2),
        _domination_task("affine-left", "bump:e:1", "exp", (1, 2, 4)),
        _continuity_task("affine-left", "bump:e:1", "exp", 1, "e"),
    ]

    affine_right = [
        _radius_task("affine-right", "indicator-ball:e:1", ("1", "2")),
        *_global_tasks("affine-right", ("indicator-ball:e:1", "bump:e:1"), "exp", RIGHT_PAIRS),
        *_global_tasks("affine-right", ("power:0.5:1",), "exp", ((1, 2),)),
        _domination_task("affine-right", "indicator-ball:e:1", "exp", (1, 2, 4)),
        _continuity_task("affine-right", "bump:e:1", "exp", 1, "e"),
    ]

    manifest = {
        "convergence": convergence,
        "euclidean": euclidean,
        "affine-left": affine_left,
        "affine-right": affine_right,
    }
    if suite == "all":
        return [task for tasks in manifest.values() for task in tasks]
    return manifest[suite]


def _check_type(report: CheckReport) -> str:
    return report.name.split("/", 1)[0]


def enforce_non_vacuity(reports: List[CheckReport]) -> List[CheckReport]:
    """
    Fail check types whose non-zero-function instances all measured lhs == 0

    Every check type needs at least one instance with f != 0 and lhs > 0.
    """
    by_type: Dict[str, List[CheckReport]] = {}
    for report in reports:
        by_type.setdefault(_check_type(report), []).append(report)

    for check_type, group in by_type.items():
        nonzero = [r for r in group if not r.details.get("zero_function", False)]
        if not nonzero:
            continue
        if any(r.lhs > 0 for r in nonzero if math.isfinite(r.lhs)):
            continue
        logger.warning(f"Check type {check_type} measured lhs = 0 everywhere; marking as vacuous")
        for r in nonzero:
            r.status = CheckStatus.FAIL
            r.details["vacuous"] = True
    return reports


def run_suite(suite: str,
              cfg: QuadratureConfig,
              include_timing: bool = False,
              collector: Optional[TimingCollector] = None) -> List[CheckReport]:
    """
    Run every check of a suite

    Checks run on cfg.threads workers, each single-threaded; the returned
    reports are sorted by name and depend only on the numeric configuration.

    Args:
        suite: Suite name
        cfg: Quadrature configuration
        include_timing: Attach elapsed_ms to each report's details
        collector: Optional timing collector (a fresh one is used otherwise)

    Returns:
        Reports sorted by name
    """
    tasks = suite_manifest(suite)
    collector = collector or TimingCollector()
    worker_cfg = cfg.with_changes(threads=1)
    logger.info(f"Running suite {suite}: {len(tasks)} checks on {cfg.threads} worker(s)")

    def run_one(task: CheckTask) -> CheckReport:
        name, runner = task
        with StageTimer(collector, f"check:{name}") as timer:
            report = runner(worker_cfg)
        collector.increment(f"checks_{report.status.value}")
        if include_timing:
            report.details["elapsed_ms"] = round(timer.elapsed_ms, 3)
        log = logger.warning if report.status is CheckStatus.FAIL else logger.info
        log(f"{report.status.value:>12}  {name}  ({timer.elapsed_ms:.0f} ms)")
        return report

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            reports = list(pool.map(run_one, tasks))
    else:
        reports = [run_one(task) for task in tasks]

    reports.sort(key=lambda r: r.name)
    enforce_non_vacuity(reports)
    collector.log_summary()
    return reports


def summarize(reports: Sequence[CheckReport]) -> Dict[str, int]:
    """Counts by status"""
    counts = {status.value: 0 for status in CheckStatus}
    for report in reports:
        counts[report.status.value] += 1
    return counts
