"""
Weights and Test Functions
Radius-weights (mass, G-norm, the adaptive two-branch weight) and the library
of nonnegative test functions with integrability metadata
"""
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import erf, erfc

from hlmax.analysis.quadrature import (
    Estimate,
    EstimateKind,
    apply_region_rule,
    integrate_interval,
    integrate_radial,
    radial_rule,
    region_rule,
    truncation_radius,
)
from hlmax.analysis.spaces import (
    SpaceInstance,
    SpaceKind,
    SpacePoint,
    ball_volume,
    distance,
    distance_array,
    reference_ball,
    shell_measure,
    substream,
    unit_ball_samples,
)
from hlmax.config import QuadratureConfig
from hlmax.errors import DomainError, ParseError, UsageError, ValidationError
from hlmax.utils.io_utils import read_csv_rows
from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)

STREAM_MODULAR = 21

ADAPTIVE_GRID_NODES = 512
ADAPTIVE_GRID_START = 1e-3

Array = np.ndarray


# ---------------------------------------------------------------------------
# Radius weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadiusWeight:
    """
    Nonnegative integrable density w on (0, inf)

    Attributes:
        name: Descriptor the weight was built from
        density: Vectorized r -> w(r)
        support_bound: Right end of the support (inf when unbounded)
        closed_form_mass: Exact total mass when known
        tail_bound: R -> upper bound of the integral of w over (R, inf)
        breakpoints: Radii where the density has kinks
    """
    name: str
    density: Callable[[Array], Array]
    support_bound: float = math.inf
    closed_form_mass: Optional[float] = None
    tail_bound: Optional[Callable[[float], float]] = None
    breakpoints: Tuple[float, ...] = ()

    def __call__(self, r: Array) -> Array:
        return self.density(np.asarray(r, dtype=float))

    def log_density(self, r: Array) -> Array:
        with np.errstate(divide="ignore"):
            return np.log(self(r))

    @property
    def is_compact(self) -> bool:
        """Support is bounded, so the weight is not a.e. nonzero on (0, inf)"""
        return math.isfinite(self.support_bound)

    @functools.cached_property
    def norm(self) -> float:
        """Total mass ||w|| (closed form when known)"""
        if self.closed_form_mass is not None:
            return self.closed_form_mass
        return total_mass(self, QuadratureConfig()).value

    def scaled(self, factor: float) -> "RadiusWeight":
        """The weight factor * w"""
        if not (factor > 0 and math.isfinite(factor)):
            raise DomainError(f"Weight scale must be positive, got {factor}")
        base = self
        return RadiusWeight(
            name=f"{factor!r}*{self.name}",
            density=lambda r: factor * base.density(r),
            support_bound=self.support_bound,
            closed_form_mass=None if self.closed_form_mass is None else factor * self.closed_form_mass,
            tail_bound=None if self.tail_bound is None else (lambda R: factor * base.tail_bound(R)),
            breakpoints=self.breakpoints,
        )


def _exp_weight() -> RadiusWeight:
    return RadiusWeight(
        name="exp",
        density=lambda r: np.exp(-r),
        closed_form_mass=1.0,
        tail_bound=lambda R: math.exp(-R),
    )


def _gauss_weight() -> RadiusWeight:
    return RadiusWeight(
        name="gauss",
        density=lambda r: np.exp(-r * r),
        closed_form_mass=math.sqrt(math.pi) / 2.0,
        tail_bound=lambda R: math.sqrt(math.pi) / 2.0 * float(erfc(R)),
    )


def _uniform_weight(token: str) -> RadiusWeight:
    try:
        R = float(token)
    except ValueError as e:
        raise ParseError("Invalid uniform weight radius", token) from e
    if not (R > 0 and math.isfinite(R)):
        raise ParseError("Uniform weight radius must be positive", token)

    return RadiusWeight(
        name=f"uniform:{token}",
        density=lambda r: np.where((r > 0) & (r <= R), 1.0, 0.0),
        support_bound=R,
        closed_form_mass=R,
        tail_bound=lambda T: max(R - T, 0.0),
        breakpoints=(R,),
    )


def tabulated_weight(name: str, radii: Array, values: Array) -> RadiusWeight:
    """
    Piecewise-linear weight through (radii, values), zero outside the table

    Args:
        name: Descriptor
        radii: Strictly increasing nodes (> 0)
        values: Nonnegative density values

    Returns:
        RadiusWeight with exact trapezoid mass and tail
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)

    if radii.ndim != 1 or radii.size < 2 or radii.size != values.size:
        raise ValidationError(f"Weight table {name} needs at least two (r, w) rows")
    if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(values))):
        raise ValidationError(f"Weight table {name} has non-finite entries")
    if np.any(np.diff(radii) <= 0) or radii[0] < 0:
        raise ValidationError(f"Weight table {name} needs strictly increasing r >= 0")
    if np.any(values < 0):
        raise ValidationError(f"Weight table {name} has negative entries")

    segments = 0.5 * (values[1:] + values[:-1]) * np.diff(radii)
    cumulative = np.concatenate(([0.0], np.cumsum(segments)))
    mass = float(cumulative[-1])

    def density(r: Array) -> Array:
        return np.interp(r, radii, values, left=0.0, right=0.0)

    def tail(R: float) -> float:
        if R <= radii[0]:
            return mass
        if R >= radii[-1]:
            return 0.0
        i = int(np.searchsorted(radii, R, side="right"))
        w_R = float(np.interp(R, radii, values))
        partial = cumulative[i - 1] + 0.5 * (values[i - 1] + w_R) * (R - radii[i - 1])
        return max(mass - float(partial), 0.0)

    return RadiusWeight(
        name=name,
        density=density,
        support_bound=float(radii[-1]),
        closed_form_mass=mass,
        tail_bound=tail,
        # long tables are smooth enough that only the support ends matter
        breakpoints=tuple(float(r) for r in (radii if radii.size <= 32 else radii[[0, -1]])),
    )


def _table_weight(path_token: str) -> RadiusWeight:
    rows = read_csv_rows(Path(path_token))
    try:
        radii = [float(row["r"]) for row in rows]
        values = [float(row["w"]) for row in rows]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError("Weight table needs numeric columns r,w", path_token) from e

    weight = tabulated_weight(f"table:{path_token}", np.array(radii), np.array(values))
    validate_weight(weight)
    return weight


def validate_weight(w: RadiusWeight, n: int = 10_000):
    """
    Check the radius-weight invariants on a uniform sample grid

    Raises:
        ValidationError: negative or non-finite density, or more than 1% of
            the grid evaluating to zero inside the support
    """
    if w.is_compact:
        cap = w.support_bound
    else:
        cap = truncation_radius(w, 1.0, QuadratureConfig())

    r = (np.arange(n) + 0.5) * (cap / n)
    values = w(r)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValidationError(f"Weight {w.name} has negative or non-finite density values")

    zero_fraction = float(np.mean(values == 0))
    if zero_fraction > 0.01:
        raise ValidationError(
            f"Weight {w.name} vanishes on {zero_fraction:.1%} of (0, {cap:.4g}); "
            f"a radius-weight must be almost everywhere nonzero"
        )


def make_weight(spec: str,
                space: Optional[SpaceInstance] = None,
                cfg: Optional[QuadratureConfig] = None) -> RadiusWeight:
    """
    Build a radius weight from its descriptor

    Args:
        spec: "exp", "gauss", "uniform:<R>", "table:<path>" or "adaptive"
        space: Required for "adaptive"
        cfg: Configuration for "adaptive" (defaults otherwise)

    Returns:
        RadiusWeight
    """
    token = spec.strip()
    if token == "exp":
        return _exp_weight()
    if token == "gauss":
        return _gauss_weight()
    if token.startswith("uniform:"):
        return _uniform_weight(token.split(":", 1)[1])
    if token.startswith("table:"):
        return _table_weight(token.split(":", 1)[1])
    if token == "adaptive":
        if space is None:
            raise UsageError("The adaptive weight needs a space")
        return adaptive_weight(space, cfg or QuadratureConfig())
    raise ParseError("Unknown weight descriptor", token)


def total_mass(w: RadiusWeight, cfg: QuadratureConfig) -> Estimate:
    """
    Numerical total mass of a weight

    Integrates the density up to the truncation radius and adds the tail
    bound to the error. When a closed-form mass exists the two must agree.

    Args:
        w: Radius weight
        cfg: Quadrature configuration

    Returns:
        Deterministic Estimate of ||w||
    """
    R = truncation_radius(w, 1.0, cfg)
    tail = 0.0 if w.is_compact else w.tail_bound(R)
    if not math.isfinite(tail):
        raise ValidationError(f"Weight {w.name} has a divergent tail")

    estimate = integrate_radial(w, 0.0, R, cfg, breakpoints=w.breakpoints)
    result = Estimate(
        value=estimate.value,
        error_bound=estimate.error_bound + tail,
        converged=estimate.converged,
    )

    if w.closed_form_mass is not None:
        mismatch = abs(result.value - w.closed_form_mass)
        allowed = max(10 * result.error_bound, 10 * cfg.rel_tol * w.closed_form_mass, cfg.abs_tol)
        if mismatch > allowed:
            raise ValidationError(
                f"Weight {w.name}: numerical mass {result.value!r} differs from "
                f"closed form {w.closed_form_mass!r}"
            )

    return result


def modular_ball_factor(space: SpaceInstance,
                        radii: Array,
                        cfg: QuadratureConfig,
                        n_samples: Optional[int] = None) -> Tuple[Array, Array]:
    """
    Ball-averaged modular factor (1/lambda(B_{e,r})) * integral of Delta(y^-1) over B_{e,r}

    Identically 1 on unimodular spaces. On affine-left, Delta(y^-1) = y_b is
    averaged by Monte Carlo with common random numbers across radii.

    Args:
        space: A left-Haar space
        radii: Radii, shape (K,)
        cfg: Supplies mc_samples and master_seed
        n_samples: Samples per radius (defaults to cfg.mc_samples)

    Returns:
        (factor values, standard errors), each of shape (K,)
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if space.kind is SpaceKind.AFFINE_RIGHT:
        raise UsageError("The modular ball factor is defined for left Haar measure")
    if space.is_unimodular:
        return np.ones_like(radii), np.zeros_like(radii)

    n = n_samples or cfg.mc_samples
    unit = unit_ball_samples(space.dim, n, substream(cfg.master_seed, STREAM_MODULAR))

    values = np.empty_like(radii)
    errors = np.empty_like(radii)
    for i, r in enumerate(radii):
        ref = reference_ball(space, np.array([r]), unit)
        contributions = ref.weights[0] * ref.points[0, :, 1]
        values[i] = float(np.mean(contributions))
        errors[i] = float(np.std(contributions, ddof=1) / math.sqrt(n))
    return values, errors


def g_norm(space: SpaceInstance, w: RadiusWeight, cfg: QuadratureConfig) -> Estimate:
    """
    G-norm: integral of w(r) times the ball-averaged modular factor

    Args:
        space: euclidean kinds or affine-left
        w: Radius weight
        cfg: Quadrature configuration

    Returns:
        total_mass on unimodular spaces; a Monte Carlo Estimate on affine-left
    """
    if space.kind is SpaceKind.AFFINE_RIGHT:
        raise UsageError("g_norm is defined for left Haar measure; affine-right uses ||w||")
    if space.is_unimodular:
        return total_mass(w, cfg)

    R = truncation_radius(w, 1.0, cfg)
    rule = radial_rule(0.0, R, cfg.radial_panels, w.breakpoints)
    factor, factor_error = modular_ball_factor(space, rule.nodes, cfg)

    density = w(rule.nodes)
    value = float(np.dot(rule.kronrod, density * factor))
    discretization = abs(value - float(np.dot(rule.gauss, density * factor)))
    # common random numbers: node errors are correlated, add them linearly
    sigma = float(np.dot(rule.kronrod, density * factor_error))
    tail = 0.0 if w.is_compact else w.tail_bound(R) * max(1.0, float(np.max(factor)))

    logger.debug(f"g_norm({space}, {w.name}) = {value:.6g} +- {sigma:.2g}")

    return Estimate(
        value=value,
        error_bound=discretization + tail + 3.0 * sigma,
        kind=EstimateKind.MONTE_CARLO,
        samples_used=cfg.mc_samples * rule.nodes.size,
        std_error=sigma,
    )


@functools.lru_cache(maxsize=8)
def _adaptive_table(space: SpaceInstance, cfg: QuadratureConfig) -> Tuple[Array, Array]:
    r_max = truncation_radius(_gauss_weight(), 1.0, cfg)
    nodes = np.geomspace(ADAPTIVE_GRID_START, r_max, ADAPTIVE_GRID_NODES)
    factor, _ = modular_ball_factor(space, nodes, cfg)

    base = np.exp(-nodes * nodes)
    # two branches: divide by the factor only where it exceeds 1
    density = np.where(factor > 1.0, base / factor, base)
    return nodes, density


def adaptive_weight(space: SpaceInstance, cfg: QuadratureConfig) -> RadiusWeight:
    """
    Weight with finite G-norm built from e^{-r^2}

    At each of 512 log-spaced nodes on [1e-3, R_max] the density is
    e^{-r^2} / factor(r) where the modular ball factor exceeds 1 and e^{-r^2}
    otherwise; between nodes it is interpolated linearly. The table is cached
    per (space, cfg).

    Args:
        space: A left-Haar space
        cfg: Quadrature configuration

    Returns:
        Tabulated RadiusWeight named "adaptive"
    """
    if space.kind is SpaceKind.AFFINE_RIGHT:
        raise UsageError("The adaptive weight is defined for left Haar measure")
    nodes, density = _adaptive_table(space, cfg)
    return tabulated_weight("adaptive", nodes, density)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TestFunction:
    """
    Nonnegative evaluable function on a space with support metadata

    Attributes:
        descriptor: Text the function was built from
        space: Space the function lives on
        evaluator: Vectorized coordinates (..., dim) -> values (...)
        anchor: Center of the support ball
        support_radius: f vanishes outside B_{anchor, support_radius} (inf when unbounded)
        sup: Essential supremum (also the local bound everywhere)
        known_lq_norms: Exact norms by exponent (math.inf key for the sup norm)
        interval_mass: 1-D spaces only: (lo, hi) -> integral of f over [lo, hi], vectorized
        profile: Radial profile h(d) about the anchor, when f = h(d(anchor, .))
        sharp_spheres: (center, radius) pairs where f jumps
        envelope_radius: Extra search radius for infinite-support functions
    """
    __test__ = False

    descriptor: str
    space: SpaceInstance
    evaluator: Callable[[Array], Array]
    anchor: SpacePoint
    support_radius: float = math.inf
    sup: float = 0.0
    known_lq_norms: Dict[float, float] = field(default_factory=dict)
    interval_mass: Optional[Callable[[Array, Array], Array]] = None
    profile: Optional[Callable[[Array], Array]] = None
    sharp_spheres: Tuple[Tuple[SpacePoint, float], ...] = ()
    envelope_radius: float = 0.0

    def evaluate(self, points: Array) -> Array:
        """Values at coordinate arrays of shape (..., dim)"""
        return self.evaluator(np.asarray(points, dtype=float))

    def __call__(self, x: SpacePoint) -> float:
        self.space.check(x)
        return float(self.evaluate(x.as_array()[None, :])[0])

    @property
    def is_zero(self) -> bool:
        return self.sup == 0.0

    @property
    def has_compact_support(self) -> bool:
        return math.isfinite(self.support_radius)

    def local_bound(self, x: SpacePoint) -> float:
        """Essential supremum of f near x"""
        return self.sup

    def kink_radii(self, x: SpacePoint) -> List[float]:
        """Radii r where the sphere of radius r about x touches a jump of f"""
        radii = []
        for center, R in self.sharp_spheres:
            d = distance(self.space, x, center)
            radii.extend(r for r in (d + R, abs(d - R)) if r > 0)
        return sorted(set(radii))

    def search_radius(self, x: SpacePoint) -> float:
        """
        Upper end of the maximal-function radius search

        Beyond d(x, anchor) + support radius the ball average only decreases.
        """
        d = distance(self.space, x, self.anchor)
        if self.has_compact_support:
            return d + self.support_radius + 1.0
        return d + self.envelope_radius + 1.0

    def norm(self, q: float, cfg: Optional[QuadratureConfig] = None) -> Estimate:
        """
        L_q norm of f with respect to the space's measure

        Known norms are exact; radial profiles are integrated in geodesic
        polar coordinates; anything else uses the region rule on the support.
        """
        if q in self.known_lq_norms:
            return Estimate(self.known_lq_norms[q])
        if math.isinf(q):
            return Estimate(self.sup)
        if self.is_zero:
            return Estimate(0.0)
        if not self.has_compact_support:
            return Estimate(math.inf)

        cfg = cfg or QuadratureConfig()
        R = self.support_radius

        if self.profile is not None:
            profile = self.profile
            space = self.space
            estimate = integrate_interval(
                lambda d: shell_measure(space, d) * profile(d) ** q, 0.0, R, cfg
            )
            scale = self.anchor.coords[1] if space.kind is SpaceKind.AFFINE_RIGHT else 1.0
            integral, error = estimate.value * scale, estimate.error_bound * scale
            value = integral ** (1.0 / q)
            bound = value * error / (q * integral) if integral > 0 else 0.0
            return Estimate(value, bound, converged=estimate.converged)

        rule = region_rule(self.space, self.anchor, R, cfg, breakpoints=self.kink_radii(self.anchor))
        integral, discretization, sigma = apply_region_rule(rule, self.evaluate(rule.points) ** q)
        value = integral ** (1.0 / q)
        scale = value / (q * integral) if integral > 0 else 0.0
        kind = EstimateKind.DETERMINISTIC if rule.directions < 2 else EstimateKind.MONTE_CARLO
        return Estimate(
            value=value,
            error_bound=scale * (discretization + 3.0 * sigma),
            kind=kind,
            samples_used=rule.points.shape[0] * rule.points.shape[1],
            std_error=scale * sigma,
        )

    def scaled(self, factor: float) -> "TestFunction":
        """The function |factor| * f"""
        c = abs(float(factor))
        base = self
        return TestFunction(
            descriptor=f"{c!r}*{self.descriptor}",
            space=self.space,
            evaluator=lambda pts: c * base.evaluator(pts),
            anchor=self.anchor,
            support_radius=self.support_radius if c > 0 else 0.0,
            sup=c * self.sup,
            known_lq_norms={q: c * v for q, v in self.known_lq_norms.items()},
            interval_mass=None if self.interval_mass is None else (lambda lo, hi: c * base.interval_mass(lo, hi)),
            profile=None if self.profile is None else (lambda d: c * base.profile(d)),
            sharp_spheres=self.sharp_spheres,
            envelope_radius=self.envelope_radius,
        )

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if other.space != self.space:
            raise UsageError("Cannot add functions on different spaces")
        a, b = self, other
        gap = distance(self.space, self.anchor, other.anchor)

        norms = {}
        if 1.0 in a.known_lq_norms and 1.0 in b.known_lq_norms:
            norms[1.0] = a.known_lq_norms[1.0] + b.known_lq_norms[1.0]

        interval_mass = None
        if a.interval_mass is not None and b.interval_mass is not None:
            interval_mass = lambda lo, hi: a.interval_mass(lo, hi) + b.interval_mass(lo, hi)

        return TestFunction(
            descriptor=f"{a.descriptor}+{b.descriptor}",
            space=self.space,
            evaluator=lambda pts: a.evaluator(pts) + b.evaluator(pts),
            anchor=a.anchor,
            support_radius=max(a.support_radius, gap + b.support_radius),
            sup=a.sup + b.sup,
            known_lq_norms=norms,
            interval_mass=interval_mass,
            sharp_spheres=a.sharp_spheres + b.sharp_spheres,
            envelope_radius=max(a.envelope_radius, gap + b.envelope_radius),
        )

    def __str__(self) -> str:
        return self.descriptor


def _parse_positive(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError as e:
        raise ParseError(f"Invalid {what}", token) from e
    if not (value > 0 and math.isfinite(value)):
        raise ParseError(f"{what} must be positive and finite", token)
    return value


def _const(space: SpaceInstance, token: str) -> TestFunction:
    try:
        c = abs(float(token))
    except ValueError as e:
        raise ParseError("Invalid constant", token) from e
    if not math.isfinite(c):
        raise ParseError("Constant must be finite", token)

    return TestFunction(
        descriptor=f"const:{token}",
        space=space,
        evaluator=lambda pts: np.full(pts.shape[:-1], c),
        anchor=space.identity,
        sup=c,
        support_radius=0.0 if c == 0 else math.inf,
        known_lq_norms={math.inf: c},
        interval_mass=(lambda lo, hi: c * (hi - lo)) if space.dim == 1 else None,
        profile=lambda d: np.full(np.shape(d), c),
    )


def _bump_profile(R: float) -> Callable[[Array], Array]:
    def profile(d: Array) -> Array:
        u = (np.asarray(d, dtype=float) / R) ** 2
        inside = u < 1.0
        safe = np.where(inside, u, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)
    return profile


_LEGENDRE_NODES, _LEGENDRE_WEIGHTS = np.polynomial.legendre.leggauss(32)
_BUMP_PANELS = 4


def _bump_interval_mass(center: float, R: float, profile: Callable[[Array], Array]):
    """Composite Gauss-Legendre mass of a 1-D bump over [lo, hi]"""
    def interval_mass(lo: Array, hi: Array) -> Array:
        lo = np.maximum(np.asarray(lo, dtype=float), center - R)
        hi = np.minimum(np.asarray(hi, dtype=float), center + R)
        width = np.maximum(hi - lo, 0.0)

        edges = np.linspace(0.0, 1.0, _BUMP_PANELS + 1)
        total = np.zeros(np.broadcast(lo, hi).shape)
        for a, b in zip(edges[:-1], edges[1:]):
            t = a + (b - a) * 0.5 * (_LEGENDRE_NODES + 1.0)
            x = lo[..., None] + width[..., None] * t
            values = profile(np.abs(x - center))
            total += 0.5 * (b - a) * np.sum(values * _LEGENDRE_WEIGHTS, axis=-1)
        return total * width
    return interval_mass


def _radial(space: SpaceInstance, center: SpacePoint, profile: Callable[[Array], Array]) -> Callable[[Array], Array]:
    c = center.as_array()
    return lambda pts: profile(distance_array(space, pts, c))


def _indicator(space: SpaceInstance, center: SpacePoint, R: float, descriptor: str) -> TestFunction:
    volume = ball_volume(space, center, R)
    profile = lambda d: np.where(np.asarray(d) < R, 1.0, 0.0)

    interval_mass = None
    if space.dim == 1:
        c = center.coords[0]
        interval_mass = lambda lo, hi: np.clip(np.minimum(hi, c + R) - np.maximum(lo, c - R), 0.0, None)

    return TestFunction(
        descriptor=descriptor,
        space=space,
        evaluator=_radial(space, center, profile),
        anchor=center,
        support_radius=R,
        sup=1.0,
        known_lq_norms={1.0: volume, 2.0: math.sqrt(volume), math.inf: 1.0},
        interval_mass=interval_mass,
        profile=profile,
        sharp_spheres=((center, R),),
    )


def _gauss(space: SpaceInstance, center: SpacePoint, sigma: float, descriptor: str) -> TestFunction:
    if space.is_affine:
        raise UsageError(f"gauss functions live on euclidean kinds, not {space.descriptor}")

    n = space.dim
    profile = lambda d: np.exp(-0.5 * (np.asarray(d) / sigma) ** 2)
    norms = {q: (2.0 * math.pi * sigma ** 2 / q) ** (n / (2.0 * q)) for q in (1.0, 2.0, 4.0)}
    norms[math.inf] = 1.0

    interval_mass = None
    if n == 1:
        c = center.coords[0]
        scale = sigma * math.sqrt(math.pi / 2.0)
        root2 = sigma * math.sqrt(2.0)
        interval_mass = lambda lo, hi: scale * (erf((hi - c) / root2) - erf((lo - c) / root2))

    return TestFunction(
        descriptor=descriptor,
        space=space,
        evaluator=_radial(space, center, profile),
        anchor=center,
        sup=1.0,
        known_lq_norms=norms,
        interval_mass=interval_mass,
        profile=profile,
        envelope_radius=8.0 * sigma,
    )


def _bump(space: SpaceInstance, center: SpacePoint, R: float, descriptor: str) -> TestFunction:
    profile = _bump_profile(R)
    interval_mass = _bump_interval_mass(center.coords[0], R, profile) if space.dim == 1 else None
    return TestFunction(
        descriptor=descriptor,
        space=space,
        evaluator=_radial(space, center, profile),
        anchor=center,
        support_radius=R,
        sup=1.0,
        known_lq_norms={math.inf: 1.0},
        interval_mass=interval_mass,
        profile=profile,
    )


def _power(space: SpaceInstance, s: float, R: float, descriptor: str) -> TestFunction:
    if not space.is_affine:
        raise UsageError(f"power functions live on affine kinds, not {space.descriptor}")

    identity = space.identity
    e = identity.as_array()

    def evaluator(pts: Array) -> Array:
        inside = distance_array(space, pts, e) < R
        return np.where(inside, pts[..., 1] ** s, 0.0)

    # L_q norms: integrate b^{sq} against the Haar density over the shadow disk,
    # parameterized by b = cosh R + sinh R * sin(theta)
    haar_power = 2.0 if space.kind is SpaceKind.AFFINE_LEFT else 1.0
    cosh_R, sinh_R = math.cosh(R), math.sinh(R)

    def norm_q(q: float) -> float:
        def integrand(theta: Array) -> Array:
            b = cosh_R + sinh_R * np.sin(theta)
            return 2.0 * sinh_R ** 2 * np.cos(theta) ** 2 * b ** (s * q - haar_power)
        estimate = integrate_interval(integrand, -math.pi / 2, math.pi / 2, QuadratureConfig())
        return estimate.value ** (1.0 / q)

    return TestFunction(
        descriptor=descriptor,
        space=space,
        evaluator=evaluator,
        anchor=identity,
        support_radius=R,
        sup=math.exp(abs(s) * R),
        known_lq_norms={1.0: norm_q(1.0), 2.0: norm_q(2.0), 4.0: norm_q(4.0), math.inf: math.exp(abs(s) * R)},
        sharp_spheres=((identity, R),),
    )


def make_function(space: SpaceInstance, spec: str) -> TestFunction:
    """
    Build a test function from its descriptor

    Args:
        space: Space the function lives on
        spec: "const:<c>", "indicator-ball:<center>:<R>", "gauss:<center>:<sigma>",
            "bump:<center>:<R>" or "power:<s>:<R>"; centers use the point
            encoding of the space (or "e")

    Returns:
        TestFunction
    """
    token = spec.strip()
    parts = token.split(":")
    kind = parts[0]

    if kind == "const" and len(parts) == 2:
        return _const(space, parts[1])

    if kind in ("indicator-ball", "gauss", "bump") and len(parts) == 3:
        center = space.parse_point(parts[1])
        size = _parse_positive(parts[2], "radius" if kind != "gauss" else "sigma")
        if kind == "indicator-ball":
            return _indicator(space, center, size, token)
        if kind == "gauss":
            return _gauss(space, center, size, token)
        return _bump(space, center, size, token)

    if kind == "power" and len(parts) == 3:
        try:
            s = float(parts[1])
        except ValueError as e:
            raise ParseError("Invalid power exponent", parts[1]) from e
        return _power(space, s, _parse_positive(parts[2], "radius"), token)

    raise ParseError("Unknown function descriptor", token)
