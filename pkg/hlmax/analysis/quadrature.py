"""
Quadrature Engines
Adaptive Gauss-Kronrod (QUADPACK) over radius intervals, log-space integration for large
exponents, fixed rules for Monte Carlo-backed integrands, ball Monte Carlo and
truncation control for integrals over (0, inf)
"""
import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import logsumexp

from hlmax.analysis.spaces import (
    SpaceInstance,
    SpacePoint,
    SpaceKind,
    ball_volume,
    exp_map,
    random_directions,
    sample_ball,
    shell_measure,
    substream,
)
from hlmax.config import QuadratureConfig
from hlmax.errors import ConfigurationError, DomainError, NumericError, UsageError
from hlmax.utils.logger import setup_logger

if TYPE_CHECKING:
    from hlmax.analysis.catalog import RadiusWeight, TestFunction

logger = setup_logger(__name__)

# Random stream tags (second element of the substream key)
STREAM_BALL_MC = 11
STREAM_REGION = 12

# Kronrod 15-point nodes and weights on [0, 1] (symmetric), embedded Gauss 7-point weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG_HALF = np.array([
    0.0,
    0.129484966168869693270611432679082,
    0.0,
    0.279705391489276667901467771423780,
    0.0,
    0.381830050505118944950369775488975,
    0.0,
    0.417959183673469387755102040816327,
])

GK15_NODES = np.concatenate((-_XGK[:-1], _XGK[::-1]))
GK15_KRONROD = np.concatenate((_WGK[:-1], _WGK[::-1]))
GK15_GAUSS = np.concatenate((_WG_HALF[:-1], _WG_HALF[::-1]))

MAX_PANELS = 4000

# QUADPACK subinterval limit, and the smallest relative tolerance it accepts
QUAD_LIMIT = 500
QUAD_MIN_REL_TOL = 50.0 * np.finfo(float).eps


class EstimateKind(str, Enum):
    DETERMINISTIC = "deterministic"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class Estimate:
    """
    A numerical value with an error bound

    For Monte Carlo estimates ``std_error`` is the standard error (sigma) and
    ``error_bound`` includes 3 sigma plus any deterministic contributions.
    """
    value: float
    error_bound: float = 0.0
    kind: EstimateKind = EstimateKind.DETERMINISTIC
    samples_used: int = 0
    std_error: float = 0.0
    converged: bool = True
    is_lower_bound: bool = False

    def __post_init__(self):
        if not math.isfinite(self.error_bound) or self.error_bound < 0:
            raise NumericError(f"Invalid error bound {self.error_bound}")

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    @property
    def lower(self) -> float:
        return self.value - self.error_bound

    @property
    def is_monte_carlo(self) -> bool:
        return self.kind is EstimateKind.MONTE_CARLO

    def scaled(self, factor: float) -> "Estimate":
        """Estimate of factor * value (factor >= 0)"""
        return Estimate(
            value=self.value * factor,
            error_bound=self.error_bound * factor,
            kind=self.kind,
            samples_used=self.samples_used,
            std_error=self.std_error * factor,
            converged=self.converged,
            is_lower_bound=self.is_lower_bound,
        )

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error_bound": self.error_bound,
            "kind": self.kind.value,
            "samples_used": self.samples_used,
            "std_error": self.std_error,
            "converged": self.converged,
        }


class LogEstimate(NamedTuple):
    """Integral held as its logarithm; rel_error bounds |error| / value"""
    log_value: float
    rel_error: float
    converged: bool


class RadialRule(NamedTuple):
    """Composite Gauss-Kronrod rule: sum(kronrod * g(nodes)) approximates the integral"""
    nodes: np.ndarray
    kronrod: np.ndarray
    gauss: np.ndarray


class RegionRule(NamedTuple):
    """
    Geodesic-polar rule for integrals over a ball

    ``points`` has shape (K, M, dim): M random directions at each of K radial
    nodes. The estimate of the integral of g is sum(kronrod * g(points)) and
    the embedded Gauss weights give the radial discretization error.
    """
    points: np.ndarray
    kronrod: np.ndarray
    gauss: np.ndarray
    directions: int


def _check_values(values: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"Non-finite integrand value in {where}")
    return values


def _initial_edges(a: float, b: float, breakpoints: Sequence[float]) -> List[float]:
    inner = sorted(float(t) for t in breakpoints if a < t < b)
    edges = [a]
    for t in inner:
        if t - edges[-1] > 1e-14 * max(1.0, abs(t)):
            edges.append(t)
    if b - edges[-1] <= 1e-14 * max(1.0, abs(b)) and len(edges) > 1:
        edges.pop()
    edges.append(b)
    return edges


def integrate_interval(g: Callable[[np.ndarray], np.ndarray],
                       a: float,
                       b: float,
                       cfg: QuadratureConfig,
                       breakpoints: Sequence[float] = ()) -> Estimate:
    """
    Adaptive Gauss-Kronrod integration over a finite interval (QUADPACK via scipy)

    The target is max(abs_tol, rel_tol * |value|). When QUADPACK stops on its
    subinterval limit, roundoff or divergence the result is flagged as not
    converged and its error bound is enlarged.

    Args:
        g: Vectorized integrand (array in, array out)
        a: Lower limit
        b: Upper limit (> a)
        cfg: Tolerances
        breakpoints: Known kinks; passed to QUADPACK as initial panel edges

    Returns:
        Deterministic Estimate
    """
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise DomainError(f"Integration interval must be finite with a < b, got [{a}, {b}]")

    def scalar(t: float) -> float:
        value = float(np.asarray(g(np.array([t])), dtype=float).reshape(-1)[0])
        if not math.isfinite(value):
            raise NumericError("Non-finite integrand value in integrate_interval")
        return value

    points = _initial_edges(a, b, breakpoints)[1:-1]
    result = quad(
        scalar, a, b,
        epsabs=cfg.abs_tol,
        epsrel=max(cfg.rel_tol, QUAD_MIN_REL_TOL),
        limit=QUAD_LIMIT,
        points=points or None,
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    # a fourth element carries the QUADPACK message when ier > 0
    converged = len(result) < 4

    if not math.isfinite(value):
        raise NumericError(f"Quadrature on [{a:.6g}, {b:.6g}] produced {value}")
    error = error if math.isfinite(error) else abs(value)
    if not converged:
        logger.warning(
            f"Adaptive quadrature on [{a:.6g}, {b:.6g}] did not converge "
            f"({result[3].splitlines()[0] if result[3] else 'no message'}); error bound {error:.3g}"
        )
        error *= 10.0

    return Estimate(value=value, error_bound=max(error, 0.0), converged=converged)


def integrate_radial(g: Callable[[np.ndarray], np.ndarray],
                     r_lo: float,
                     r_hi: float,
                     cfg: QuadratureConfig,
                     breakpoints: Sequence[float] = ()) -> Estimate:
    """
    Integrate a function of the radius over [r_lo, r_hi]

    Args:
        g: Vectorized integrand in r
        r_lo: Lower limit (>= 0)
        r_hi: Upper limit (> r_lo, finite)
        cfg: Quadrature configuration
        breakpoints: Radii where g has kinks

    Returns:
        Deterministic Estimate
    """
    if not (r_lo >= 0 and math.isfinite(r_hi) and r_hi > r_lo):
        raise DomainError(f"Radial interval must satisfy 0 <= r_lo < r_hi < inf, got [{r_lo}, {r_hi}]")
    return integrate_interval(g, r_lo, r_hi, cfg, breakpoints)


def _log_panel(log_g: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> Tuple[float, float]:
    """Log of the K15 panel value and log of |K15 - G7|"""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    logs = np.asarray(log_g(mid + half * GK15_NODES), dtype=float)
    if np.any(np.isnan(logs)) or np.any(logs == np.inf):
        raise NumericError("Invalid log-integrand value in integrate_radial_log")

    peak = float(np.max(logs))
    if peak == -np.inf:
        return -np.inf, -np.inf

    scaled = np.exp(logs - peak)
    kronrod = float(np.dot(GK15_KRONROD, scaled))
    gauss = float(np.dot(GK15_GAUSS, scaled))
    log_half = math.log(half)
    log_value = peak + log_half + math.log(kronrod)
    diff = abs(kronrod - gauss)
    log_error = peak + log_half + math.log(diff) if diff > 0 else -np.inf
    return log_value, log_error


def integrate_radial_log(log_g: Callable[[np.ndarray], np.ndarray],
                         r_lo: float,
                         r_hi: float,
                         cfg: QuadratureConfig,
                         breakpoints: Sequence[float] = ()) -> LogEstimate:
    """
    Adaptive integration of exp(log_g) without leaving log space

    Panels are combined with logsumexp, so integrands like w(r)*A(r)^256 that
    underflow double precision keep full relative accuracy.

    Args:
        log_g: Vectorized log of a nonnegative integrand (-inf allowed)
        r_lo: Lower limit (>= 0)
        r_hi: Upper limit
        cfg: Quadrature configuration (rel_tol applies)
        breakpoints: Radii where the integrand has kinks

    Returns:
        LogEstimate; log_value is -inf for an identically zero integrand
    """
    if not (r_lo >= 0 and math.isfinite(r_hi) and r_hi > r_lo):
        raise DomainError(f"Radial interval must satisfy 0 <= r_lo < r_hi < inf, got [{r_lo}, {r_hi}]")

    panels = {}
    heap = []
    edges = _initial_edges(r_lo, r_hi, breakpoints)
    for lo, hi in zip(edges[:-1], edges[1:]):
        log_value, log_error = _log_panel(log_g, lo, hi)
        panels[(lo, hi)] = (log_value, log_error, 0)
        heapq.heappush(heap, (-log_error, lo, hi))

    converged = True
    frozen = set()

    def totals():
        values = [v for v, _, _ in panels.values()]
        errors = [e for _, e, _ in panels.values()]
        return float(logsumexp(values)), float(logsumexp(errors))

    log_total, log_error_total = totals()
    while heap and log_total > -np.inf and log_error_total - log_total > math.log(cfg.rel_tol):
        if len(panels) >= MAX_PANELS:
            converged = False
            break

        _, lo, hi = heapq.heappop(heap)
        log_value, log_error, depth = panels[(lo, hi)]
        if depth >= cfg.max_depth:
            frozen.add((lo, hi))
            converged = False
            if len(frozen) == len(panels):
                break
            continue

        del panels[(lo, hi)]
        mid = 0.5 * (lo + hi)
        for a, b in ((lo, mid), (mid, hi)):
            child_value, child_error = _log_panel(log_g, a, b)
            panels[(a, b)] = (child_value, child_error, depth + 1)
            heapq.heappush(heap, (-child_error, a, b))

        log_total, log_error_total = totals()

    if log_total == -np.inf:
        return LogEstimate(-np.inf, 0.0, True)

    rel_error = math.exp(min(log_error_total - log_total, 0.0))
    if not converged:
        logger.warning(f"Log-space quadrature stopped early; relative error {rel_error:.3g}")
        rel_error = min(10.0 * rel_error, 1.0)
    return LogEstimate(log_total, rel_error, converged)


def radial_rule(r_lo: float,
                r_hi: float,
                panels: int,
                breakpoints: Sequence[float] = (),
                fixed_size: bool = False) -> RadialRule:
    """
    Fixed composite Gauss-Kronrod rule on [r_lo, r_hi]

    Used where the integrand comes from Monte Carlo: adaptivity would chase
    sampling noise. Panels are equal-width, split further at breakpoints.

    Args:
        r_lo: Lower limit
        r_hi: Upper limit
        panels: Number of equal panels before splitting at breakpoints
        breakpoints: Extra panel edges
        fixed_size: Keep every breakpoint (clipped into the interval) even when
            it repeats an edge, so rules built for different points share one shape

    Returns:
        RadialRule with 15 nodes per panel
    """
    if not (math.isfinite(r_hi) and r_hi > r_lo >= 0):
        raise DomainError(f"Radial interval must satisfy 0 <= r_lo < r_hi < inf, got [{r_lo}, {r_hi}]")
    if panels < 1:
        raise UsageError("radial_rule needs at least one panel")

    base = np.linspace(r_lo, r_hi, panels + 1)
    if fixed_size:
        # zero-width panels get zero weights; keep their nodes strictly positive
        floor = r_lo + 1e-9 * (r_hi - r_lo)
        extra = np.clip(np.asarray(breakpoints, dtype=float), floor, r_hi)
        edges = np.sort(np.concatenate((base, extra)))
    else:
        edges = np.asarray(_initial_edges(r_lo, r_hi, list(base[1:-1]) + list(breakpoints)))

    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + halves[:, None] * GK15_NODES[None, :]).ravel()
    kronrod = (halves[:, None] * GK15_KRONROD[None, :]).ravel()
    gauss = (halves[:, None] * GK15_GAUSS[None, :]).ravel()
    return RadialRule(nodes, kronrod, gauss)


def region_rule(space: SpaceInstance,
                center: SpacePoint,
                radius: float,
                cfg: QuadratureConfig,
                rng: Optional[np.random.Generator] = None,
                breakpoints: Sequence[float] = ()) -> RegionRule:
    """
    Quadrature rule for integrals over the ball B_{center, radius}

    Geodesic-polar coordinates: Gauss-Kronrod in the geodesic radius,
    cfg.region_angles random directions per radial node. In dimension 1 the
    two directions +-1 are used, which makes the rule deterministic.
    Right-Haar weights carry the b-coordinate of each point.

    Args:
        space: Space
        center: Center of the region
        radius: Region radius
        cfg: Supplies region_panels, region_angles and master_seed
        rng: Optional generator; default is the region substream
        breakpoints: Geodesic radii used as extra panel edges

    Returns:
        RegionRule
    """
    space.check(center)
    rule = radial_rule(0.0, radius, cfg.region_panels, breakpoints)
    c = center.as_array()

    if space.dim == 1:
        directions = np.broadcast_to(np.array([[-1.0], [1.0]]), (rule.nodes.size, 2, 1))
    else:
        rng = rng if rng is not None else substream(cfg.master_seed, STREAM_REGION)
        directions = random_directions(space, rng, (rule.nodes.size, cfg.region_angles))
    m = directions.shape[1]

    points = exp_map(space, c, rule.nodes[:, None], directions)
    shell = shell_measure(space, rule.nodes)[:, None] / m
    kronrod = rule.kronrod[:, None] * shell * np.ones((1, m))
    gauss = rule.gauss[:, None] * shell * np.ones((1, m))

    if space.kind is SpaceKind.AFFINE_RIGHT:
        # d rho = b d lambda
        kronrod = kronrod * points[..., 1]
        gauss = gauss * points[..., 1]

    return RegionRule(points, kronrod, gauss, m)


def apply_region_rule(rule: RegionRule, values: np.ndarray) -> Tuple[float, float, float]:
    """
    Apply a region rule to sampled values

    Args:
        rule: RegionRule
        values: Integrand values, shape (K, M)

    Returns:
        (integral, radial discretization error, angular standard error)
    """
    values = _check_values(np.asarray(values, dtype=float), "region_rule")
    integral = float(np.sum(rule.kronrod * values))
    discretization = abs(integral - float(np.sum(rule.gauss * values)))

    if rule.directions < 2:
        return integral, discretization, 0.0

    # per-node sample variance of the direction average
    contributions = rule.kronrod * values
    node_var = np.var(contributions, axis=1, ddof=1) * rule.directions
    std_error = float(np.sqrt(np.sum(node_var)))
    return integral, discretization, std_error


def mc_integrate_ball(space: SpaceInstance,
                      f: "TestFunction",
                      x: SpacePoint,
                      r: float,
                      cfg: QuadratureConfig,
                      rng: Optional[np.random.Generator] = None) -> Estimate:
    """
    Monte Carlo estimate of the integral of f over B_{x,r}

    Args:
        space: Space
        f: Test function
        x: Center
        r: Radius (> 0)
        cfg: Supplies mc_samples and master_seed
        rng: Optional generator; default is the ball substream

    Returns:
        Monte Carlo Estimate with error_bound = 3 * standard error
    """
    n = cfg.mc_samples
    if n < 1:
        raise UsageError("Monte Carlo integration needs at least one sample")

    rng = rng if rng is not None else substream(cfg.master_seed, STREAM_BALL_MC)
    sample = sample_ball(space, x, r, rng, size=n)
    contributions = _check_values(sample.weights * f.evaluate(sample.points), "mc_integrate_ball")

    volume = ball_volume(space, x, r)
    mean = float(np.mean(contributions))
    std_error = float(np.std(contributions, ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return Estimate(
        value=volume * mean,
        error_bound=3.0 * volume * std_error,
        kind=EstimateKind.MONTE_CARLO,
        samples_used=n,
        std_error=volume * std_error,
    )


TRUNCATION_FLOOR = 1.0


def truncation_radius(w: "RadiusWeight", integrand_sup: float, cfg: QuadratureConfig) -> float:
    """
    Radius beyond which the weighted tail is negligible

    Solves min(integrand_sup, 1) * tail(R) <= tail_tol. With A <= sup the
    tail of the integral of w * A^p is at most sup^p * tail(R), and p = 1 is
    the worst exponent when sup <= 1; larger sups are handled relative to
    sup^p. A weight with finite support returns its support bound.

    Args:
        w: Radius weight
        integrand_sup: Upper bound of the averaged function
        cfg: Supplies tail_tol

    Returns:
        Truncation radius (>= 1.0)
    """
    if not (integrand_sup >= 0 and math.isfinite(integrand_sup)):
        raise DomainError(f"integrand_sup must be finite and >= 0, got {integrand_sup}")
    if integrand_sup == 0:
        return TRUNCATION_FLOOR
    if math.isfinite(w.support_bound):
        return float(w.support_bound)
    if w.tail_bound is None:
        raise ConfigurationError(f"Weight {w.name} has infinite support and no tail bound")

    target = cfg.tail_tol / min(integrand_sup, 1.0)

    def excess(radius: float) -> float:
        return w.tail_bound(radius) - target

    if excess(TRUNCATION_FLOOR) <= 0:
        return TRUNCATION_FLOOR

    hi = 2.0 * TRUNCATION_FLOOR
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConfigurationError(f"Tail of weight {w.name} does not reach {target:.3g}")

    radius = brentq(excess, hi / 2.0, hi, xtol=1e-12, rtol=1e-12)
    if excess(radius) > 0:
        # brentq may land a hair below the root
        radius += 1e-9
    return float(radius)
