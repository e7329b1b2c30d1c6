"""
Operators
Averaging function Af(x,r), maximal function Mf(x), integral-function
I_{p,w}f(x), their fields over point arrays, L_q norms over regions and p-sweeps

Two evaluation paths share one interface:

* exact (1-D spaces): ball averages come from the closed-form interval mass of
  f and radial integrals are adaptive;
* Monte Carlo (everything else): ball averages are E[weight * f(x*y)] over a
  fixed set of reference samples y in B_{e,r} (common random numbers), so every
  field is a deterministic, smooth function of x and r for a given seed.
"""
import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from hlmax.analysis.catalog import RadiusWeight, TestFunction
from hlmax.analysis.quadrature import (
    STREAM_BALL_MC,
    Estimate,
    EstimateKind,
    apply_region_rule,
    integrate_interval,
    integrate_radial,
    integrate_radial_log,
    mc_integrate_ball,
    radial_rule,
    region_rule,
    truncation_radius,
)
from hlmax.analysis.spaces import (
    BallSpec,
    SpaceInstance,
    SpaceKind,
    SpacePoint,
    ball_volume,
    distance_array,
    reference_ball,
    reference_volume,
    shell_measure,
    substream,
    translate_array,
    unit_ball_samples,
)
from hlmax.config import QuadratureConfig
from hlmax.errors import DomainError, ParseError, UnsupportedInputError, UsageError
from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)

R_MIN = 1e-4
COARSE_RADII = 256
REFINE_ROUNDS = 2
REFINE_INTERVALS = 32
LOG_SPACE_P = 128.0
TAIL_CERTIFICATE_SPAN = 40.0

# samples per evaluation chunk (points arrays stay around 16 MB)
_CHUNK_ELEMENTS = 1 << 20
# shared reference balls are precomputed when they fit in this many samples
_SHARED_ELEMENTS = 1 << 22

Array = np.ndarray


@dataclass(frozen=True, order=True)
class PExponent:
    """Exponent p in [1, inf]"""
    value: float

    def __post_init__(self):
        value = float(self.value)
        object.__setattr__(self, "value", value)
        if math.isnan(value) or value < 1.0:
            raise DomainError(f"Exponent must be >= 1, got {value}")

    @classmethod
    def parse(cls, text: str) -> "PExponent":
        token = str(text).strip().lower()
        if token in ("inf", "infinity", "oo"):
            return cls(math.inf)
        try:
            value = float(token)
        except ValueError as e:
            raise ParseError("Invalid exponent", str(text)) from e
        try:
            return cls(value)
        except DomainError as e:
            raise ParseError(str(e), str(text)) from e

    @classmethod
    def coerce(cls, p: Union["PExponent", float, str]) -> "PExponent":
        if isinstance(p, PExponent):
            return p
        if isinstance(p, str):
            return cls.parse(p)
        return cls(float(p))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.is_infinite:
            return "inf"
        if self.value.is_integer():
            return str(int(self.value))
        return repr(self.value)


class FieldValues(NamedTuple):
    """Field samples with per-point error bounds and Monte Carlo standard errors"""
    values: Array
    error_bounds: Array
    std_errors: Array


@dataclass(frozen=True)
class SweepRow:
    """One exponent of a p-sweep"""
    p: PExponent
    i_value: Estimate
    normalized: float
    gap_to_max: float
    maximal: Estimate


# ---------------------------------------------------------------------------
# Ball averages
# ---------------------------------------------------------------------------

def uses_exact_path(space: SpaceInstance, f: TestFunction) -> bool:
    """1-D spaces with a closed-form interval mass skip Monte Carlo"""
    return space.dim == 1 and f.interval_mass is not None


@lru_cache(maxsize=16)
def _unit_samples(dim: int, n: int, master_seed: int) -> Array:
    samples = unit_ball_samples(dim, n, substream(master_seed, STREAM_BALL_MC))
    samples.setflags(write=False)
    return samples


def _reference_chunks(space: SpaceInstance, radii: Array, unit: Array):
    step = max(1, _CHUNK_ELEMENTS // unit.shape[0])
    for start in range(0, radii.size, step):
        chunk = slice(start, min(start + step, radii.size))
        yield chunk, reference_ball(space, radii[chunk], unit)


def _as_points(space: SpaceInstance, X: Array) -> Array:
    return np.asarray(X, dtype=float).reshape(-1, space.dim)


def average_values(space: SpaceInstance,
                   f: TestFunction,
                   X: Array,
                   radii: Array,
                   cfg: QuadratureConfig,
                   n_samples: Optional[int] = None) -> Tuple[Array, Array]:
    """
    Ball averages Af(x, r) for many centers and radii

    Args:
        space: Space
        f: Test function
        X: Centers, shape (n, dim)
        radii: Radii shared by all centers, shape (K,), or per center, shape (n, K)
        cfg: Quadrature configuration
        n_samples: Reference samples per ball (default cfg.mc_samples)

    Returns:
        (averages, standard errors), each of shape (n, K); standard errors are
        zero on the exact path
    """
    X = _as_points(space, X)
    radii = np.asarray(radii, dtype=float)
    per_point = radii.ndim == 2
    if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
        raise DomainError("Ball radii must be positive and finite")

    shape = (X.shape[0], radii.shape[-1])
    if f.is_zero:
        return np.zeros(shape), np.zeros(shape)

    if uses_exact_path(space, f):
        R = radii if per_point else radii[None, :]
        x = X[:, :1]
        return f.interval_mass(x - R, x + R) / (2.0 * R), np.zeros(shape)

    unit = _unit_samples(space.dim, n_samples or cfg.mc_samples, cfg.master_seed)
    n = unit.shape[0]

    shared = None
    if not per_point and radii.size * n <= _SHARED_ELEMENTS:
        shared = list(_reference_chunks(space, radii, unit))

    averages = np.empty(shape)
    std_errors = np.empty(shape)
    for i, x in enumerate(X):
        chunks = shared if shared is not None else _reference_chunks(space, radii[i] if per_point else radii, unit)
        for chunk, ref in chunks:
            contributions = ref.weights * f.evaluate(translate_array(space, x, ref.points))
            averages[i, chunk] = contributions.mean(axis=-1)
            std_errors[i, chunk] = contributions.std(axis=-1, ddof=1) / math.sqrt(n)

    return averages, std_errors


def _map_points(fn: Callable[[Array], Tuple[Array, ...]], X: Array, cfg: QuadratureConfig) -> Tuple[Array, ...]:
    """Apply fn to chunks of points on cfg.threads workers; results keep point order"""
    if cfg.threads <= 1 or X.shape[0] < 2:
        return fn(X)

    pieces = np.array_split(X, min(X.shape[0], 4 * cfg.threads))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(fn, pieces))
    return tuple(np.concatenate(parts, axis=0) for parts in zip(*results))


def average(space: SpaceInstance, f: TestFunction, x: SpacePoint, r: float, cfg: QuadratureConfig) -> Estimate:
    """
    Averaging function Af(x, r): mean of f over the ball B_{x,r}

    Exact on 1-D spaces, Monte Carlo (cfg.mc_samples draws) elsewhere.
    """
    space.check(x)
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Ball radius must be positive and finite, got {r}")

    if f.is_zero or uses_exact_path(space, f):
        values, _ = average_values(space, f, x.as_array()[None, :], np.array([r]), cfg)
        return Estimate(float(values[0, 0]))

    integral = mc_integrate_ball(space, f, x, r, cfg)
    return integral.scaled(1.0 / ball_volume(space, x, r))


# ---------------------------------------------------------------------------
# Maximal function
# ---------------------------------------------------------------------------

def maximal_values(space: SpaceInstance,
                   f: TestFunction,
                   X: Array,
                   cfg: QuadratureConfig,
                   n_samples: Optional[int] = None) -> Tuple[Array, Array, Array, Array]:
    """
    Maximal function at many points by radius search

    A log-spaced grid of 256 radii on [1e-4, r_max] is followed by two
    refinement rounds of 32 intervals on the bracket around the best node.
    Ties resolve to the smallest radius.

    Returns:
        (values, error bounds, standard errors, maximizing radii)
    """
    X = _as_points(space, X)
    n = X.shape[0]
    if f.is_zero:
        return np.zeros(n), np.zeros(n), np.zeros(n), np.full(n, R_MIN)
    if not math.isfinite(f.sup):
        raise UnsupportedInputError(f"{f} is not locally bounded; the maximal function cannot be certified")

    r_max = np.array([max(f.search_radius(space.point(x)), 10.0 * R_MIN) for x in X])
    rows = np.arange(n)

    grid = np.geomspace(np.full(n, R_MIN), r_max, COARSE_RADII, axis=-1)
    A, sd = average_values(space, f, X, grid, cfg, n_samples)
    j = np.argmax(A, axis=1)
    best, best_sd, best_r = A[rows, j], sd[rows, j], grid[rows, j]

    def bracket(grid, A, j):
        lo_idx = np.maximum(j - 1, 0)
        hi_idx = np.minimum(j + 1, grid.shape[1] - 1)
        edge_min = np.minimum(A[rows, lo_idx], A[rows, hi_idx])
        return grid[rows, lo_idx], grid[rows, hi_idx], edge_min

    lo, hi, edge_min = bracket(grid, A, j)
    spread = best - edge_min

    t = np.linspace(0.0, 1.0, REFINE_INTERVALS + 1)
    for _ in range(REFINE_ROUNDS):
        grid = lo[:, None] + (hi - lo)[:, None] * t[None, :]
        A, sd = average_values(space, f, X, grid, cfg, n_samples)
        j = np.argmax(A, axis=1)
        candidate, candidate_r = A[rows, j], grid[rows, j]

        better = (candidate > best) | ((candidate == best) & (candidate_r < best_r))
        best = np.where(better, candidate, best)
        best_sd = np.where(better, sd[rows, j], best_sd)
        best_r = np.where(better, candidate_r, best_r)

        lo, hi, edge_min = bracket(grid, A, j)
        spread = np.maximum(best - edge_min, 0.0)

    return best, spread + 3.0 * best_sd, best_sd, best_r


def _samples_per_search(space: SpaceInstance, f: TestFunction, n_samples: int) -> int:
    if uses_exact_path(space, f):
        return 0
    return n_samples * (COARSE_RADII + REFINE_ROUNDS * (REFINE_INTERVALS + 1))


def maximal_search(space: SpaceInstance, f: TestFunction, x: SpacePoint, cfg: QuadratureConfig) -> Tuple[Estimate, float]:
    """
    Maximal function Mf(x) = sup_r Af(x, r) with the maximizing radius

    Args:
        space: Space
        f: Test function (locally bounded or of compact support)
        x: Point
        cfg: Quadrature configuration

    Returns:
        (Estimate whose error bound is the bracket variation, smallest maximizing radius)
    """
    space.check(x)
    values, errors, sds, radii = maximal_values(space, f, x.as_array()[None, :], cfg, cfg.mc_samples)

    exact = f.is_zero or uses_exact_path(space, f)
    estimate = Estimate(
        value=float(values[0]),
        error_bound=float(errors[0]),
        kind=EstimateKind.DETERMINISTIC if exact else EstimateKind.MONTE_CARLO,
        samples_used=_samples_per_search(space, f, cfg.mc_samples),
        std_error=float(sds[0]),
    )
    logger.debug(f"M{f}({x}) = {estimate.value:.9g} at r={radii[0]:.6g}")
    return estimate, float(radii[0])


def maximal(space: SpaceInstance, f: TestFunction, x: SpacePoint, cfg: QuadratureConfig) -> Estimate:
    """Hardy-Littlewood maximal function Mf(x)"""
    return maximal_search(space, f, x, cfg)[0]


# ---------------------------------------------------------------------------
# Integral-function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _l1_mass(f: TestFunction) -> float:
    """Upper bound of ||f||_1 (inf when f is not known to be integrable)"""
    if not (f.has_compact_support or 1.0 in f.known_lq_norms):
        return math.inf
    return f.norm(1.0).upper


def _tail_envelope(space: SpaceInstance, f: TestFunction, x: Array, R: float) -> float:
    """Bound of Af(x, r) for r >= R: min(sup f, ||f||_1 / mu(B_{x,R}))"""
    mass = _l1_mass(f)
    volume = reference_volume(space, R)
    if space.kind is SpaceKind.AFFINE_RIGHT:
        volume *= x[1]
    return min(f.sup, mass / volume) if math.isfinite(mass) else f.sup


def _log_tail(space: SpaceInstance, f: TestFunction, w: RadiusWeight, x: Array, R: float, p: float) -> float:
    """Log of the bound sup_{r>=R}(Af)^p * integral of w over (R, inf)"""
    if w.is_compact and R >= w.support_bound:
        return -np.inf
    tail = w.tail_bound(R) if w.tail_bound is not None else 0.0
    envelope = _tail_envelope(space, f, x, R)
    if tail <= 0 or envelope <= 0:
        return -np.inf
    return math.log(tail) + p * math.log(envelope)


def _exact_integral(space: SpaceInstance,
                    f: TestFunction,
                    w: RadiusWeight,
                    p_values: Sequence[float],
                    x: Array,
                    cfg: QuadratureConfig) -> List[Tuple[float, float]]:
    point = space.point(x)
    R = truncation_radius(w, f.local_bound(point), cfg)
    breaks = sorted(set(f.kink_radii(point)) | set(w.breakpoints))

    def A(r: Array) -> Array:
        return f.interval_mass(x[0] - r, x[0] + r) / (2.0 * r)

    results = []
    for p in p_values:
        log_tail = _log_tail(space, f, w, x, R, p)
        if p >= LOG_SPACE_P:
            def log_g(r, p=p):
                with np.errstate(divide="ignore"):
                    return w.log_density(r) + p * np.log(A(r))
            estimate = integrate_radial_log(log_g, 0.0, R, cfg, breaks)
            log_J, rel = estimate.log_value, estimate.rel_error
        else:
            estimate = integrate_radial(lambda r, p=p: w(r) * A(r) ** p, 0.0, R, cfg, breaks)
            J = max(estimate.value, 0.0)
            log_J = math.log(J) if J > 0 else -np.inf
            rel = estimate.error_bound / J if J > 0 else 0.0
            if J == 0 and estimate.error_bound > 0:
                log_tail = np.logaddexp(log_tail, math.log(estimate.error_bound))

        value = math.exp(log_J / p) if log_J > -np.inf else 0.0
        error = value * rel / p
        if log_tail > -np.inf:
            error += math.exp(np.logaddexp(log_J, log_tail) / p) - value
        results.append((value, error))
    return results


def _point_rule_radii(space: SpaceInstance, f: TestFunction, w: RadiusWeight, X: Array, R: float, cfg: QuadratureConfig):
    """Per-point radial rules with the kink radii of f as panel edges"""
    nodes, kronrod, gauss = [], [], []
    for x in X:
        breaks = []
        for center, radius in f.sharp_spheres:
            d = float(distance_array(space, x, center.as_array()))
            breaks.extend((d + radius, abs(d - radius)))
        rule = radial_rule(0.0, R, cfg.radial_panels, list(w.breakpoints) + breaks, fixed_size=True)
        nodes.append(rule.nodes)
        kronrod.append(rule.kronrod)
        gauss.append(rule.gauss)
    return np.array(nodes), np.array(kronrod), np.array(gauss)


def _mc_integral(space: SpaceInstance,
                 f: TestFunction,
                 w: RadiusWeight,
                 p_values: Sequence[float],
                 X: Array,
                 cfg: QuadratureConfig,
                 n_samples: int) -> Tuple[Array, ...]:
    R = truncation_radius(w, f.sup, cfg)
    nodes, kronrod, gauss = _point_rule_radii(space, f, w, X, R, cfg)
    A, sd = average_values(space, f, X, nodes, cfg, n_samples)

    density = w(nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_kw = np.log(kronrod * density)
        log_gw = np.log(gauss * density)
        log_A = np.log(np.maximum(A, 0.0))
        log_sd = np.log(sd)

    out = []
    for p in p_values:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_J = logsumexp(log_kw + p * log_A, axis=1)
            log_G = logsumexp(log_gw + p * log_A, axis=1)
            spread = 0.0 if p == 1.0 else (p - 1.0) * log_A
            log_dJ = logsumexp(log_kw + spread + math.log(p) + log_sd, axis=1)

        positive = np.isfinite(log_J)
        values = np.where(positive, np.exp(np.where(positive, log_J, 0.0) / p), 0.0)
        rel_disc = np.where(positive, np.abs(1.0 - np.exp(np.where(positive, log_G - log_J, 0.0))), 0.0)
        rel_mc = np.where(positive & np.isfinite(log_dJ), np.exp(np.where(positive, log_dJ - log_J, 0.0)), 0.0)

        std_errors = values * rel_mc / p
        errors = values * (rel_disc + 3.0 * rel_mc) / p
        for i, x in enumerate(X):
            log_tail = _log_tail(space, f, w, x, R, p)
            if log_tail > -np.inf:
                base = log_J[i] if positive[i] else -np.inf
                errors[i] += math.exp(np.logaddexp(base, log_tail) / p) - values[i]
        out.extend((values, errors, std_errors))
    return tuple(out)


def integral_values(space: SpaceInstance,
                    f: TestFunction,
                    w: RadiusWeight,
                    p_values: Sequence[Union[PExponent, float]],
                    X: Array,
                    cfg: QuadratureConfig,
                    n_samples: Optional[int] = None) -> Dict[PExponent, FieldValues]:
    """
    Integral-functions I_{p,w}f at many points for several exponents

    One set of ball averages serves every exponent. Infinite p delegates to
    the maximal function.

    Args:
        space: Space
        f: Test function
        w: Radius weight
        p_values: Exponents
        X: Points, shape (n, dim)
        cfg: Quadrature configuration
        n_samples: Reference samples per ball (default cfg.mc_samples)

    Returns:
        Mapping exponent -> FieldValues
    """
    X = _as_points(space, X)
    exponents = [PExponent.coerce(p) for p in p_values]
    finite = sorted({p.value for p in exponents if not p.is_infinite})
    n = X.shape[0]
    n_samples = n_samples or cfg.mc_samples

    results: Dict[PExponent, FieldValues] = {}
    zeros = np.zeros(n)

    if finite:
        if f.is_zero:
            for p in finite:
                results[PExponent(p)] = FieldValues(zeros, zeros, zeros)
        elif uses_exact_path(space, f):
            def evaluate(chunk: Array) -> Tuple[Array, ...]:
                rows = [_exact_integral(space, f, w, finite, x, cfg) for x in chunk]
                out = []
                for k in range(len(finite)):
                    out.append(np.array([row[k][0] for row in rows]))
                    out.append(np.array([row[k][1] for row in rows]))
                return tuple(out)

            arrays = _map_points(evaluate, X, cfg)
            for k, p in enumerate(finite):
                results[PExponent(p)] = FieldValues(arrays[2 * k], arrays[2 * k + 1], zeros)
        else:
            arrays = _map_points(lambda chunk: _mc_integral(space, f, w, finite, chunk, cfg, n_samples), X, cfg)
            for k, p in enumerate(finite):
                results[PExponent(p)] = FieldValues(arrays[3 * k], arrays[3 * k + 1], arrays[3 * k + 2])

    if any(p.is_infinite for p in exponents):
        values, errors, sds, _ = _map_points(lambda chunk: maximal_values(space, f, chunk, cfg, n_samples), X, cfg)
        results[PExponent(math.inf)] = FieldValues(values, errors, sds)

    return results


def integral_function(space: SpaceInstance,
                      f: TestFunction,
                      w: RadiusWeight,
                      p: Union[PExponent, float],
                      x: SpacePoint,
                      cfg: QuadratureConfig) -> Estimate:
    """
    Hardy-Littlewood integral-function I_{p,w}f(x) = (integral of w(r) Af(x,r)^p dr)^{1/p}

    The radial integral runs from 0 to the truncation radius of w; the error
    bound combines quadrature error, the truncated tail and (on the Monte Carlo
    path) three standard errors, propagated through the p-th root to first
    order. p = inf returns maximal(...) unchanged.

    Args:
        space: Space
        f: Test function
        w: Radius weight
        p: Exponent >= 1 or inf
        x: Point
        cfg: Quadrature configuration

    Returns:
        Estimate
    """
    p = PExponent.coerce(p)
    space.check(x)
    if p.is_infinite:
        return maximal(space, f, x, cfg)

    field = integral_values(space, f, w, [p], x.as_array()[None, :], cfg, cfg.mc_samples)[p]
    exact = f.is_zero or uses_exact_path(space, f)
    estimate = Estimate(
        value=float(field.values[0]),
        error_bound=float(field.error_bounds[0]),
        kind=EstimateKind.DETERMINISTIC if exact else EstimateKind.MONTE_CARLO,
        samples_used=0 if exact else cfg.mc_samples,
        std_error=float(field.std_errors[0]),
    )
    logger.debug(f"I_{p},{w.name} {f}({x}) = {estimate.value:.9g} +- {estimate.error_bound:.2g}")
    return estimate


def p_sweep(space: SpaceInstance,
            f: TestFunction,
            w: RadiusWeight,
            x: SpacePoint,
            p_list: Sequence[Union[PExponent, float]],
            cfg: QuadratureConfig) -> List[SweepRow]:
    """
    Integral-functions over an ascending list of exponents

    normalized = I / ||w||^{1/p} is a power mean of Af(x, .) under the
    probability measure w/||w|| and is nondecreasing in p; gap_to_max is
    Mf(x) - normalized.

    Args:
        space: Space
        f: Test function
        w: Radius weight
        x: Point
        p_list: At least two ascending exponents
        cfg: Quadrature configuration

    Returns:
        SweepRow per exponent, sorted by p
    """
    exponents = [PExponent.coerce(p) for p in p_list]
    if len(exponents) < 2:
        raise UsageError("A sweep needs at least two exponents")
    if any(b <= a for a, b in zip(exponents, exponents[1:])):
        raise UsageError("Sweep exponents must be strictly ascending")

    space.check(x)
    M = maximal(space, f, x, cfg)
    fields = integral_values(space, f, w, [p for p in exponents if not p.is_infinite], x.as_array()[None, :], cfg)
    exact = f.is_zero or uses_exact_path(space, f)

    rows = []
    for p in exponents:
        if p.is_infinite:
            i_value = M
        else:
            field = fields[p]
            i_value = Estimate(
                value=float(field.values[0]),
                error_bound=float(field.error_bounds[0]),
                kind=EstimateKind.DETERMINISTIC if exact else EstimateKind.MONTE_CARLO,
                samples_used=0 if exact else cfg.mc_samples,
                std_error=float(field.std_errors[0]),
            )
        scale = 1.0 if p.is_infinite else w.norm ** (1.0 / p.value)
        normalized = i_value.value / scale
        rows.append(SweepRow(p=p, i_value=i_value, normalized=normalized, gap_to_max=M.value - normalized, maximal=M))
    return rows


# ---------------------------------------------------------------------------
# Fields and norms
# ---------------------------------------------------------------------------

class Field:
    """
    A function on point arrays returning FieldValues

    Evaluations are memoized by the exact bytes of the point array, so
    several norms over the same region reuse one evaluation.
    """

    def __init__(self, name: str, space: SpaceInstance, evaluate: Callable[[Array], FieldValues], exact: bool):
        self.name = name
        self.space = space
        self.exact = exact
        self._evaluate = evaluate
        self._cache: Dict[str, FieldValues] = {}
        self._lock = threading.Lock()

    def __call__(self, points: Array) -> FieldValues:
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        flat = points.reshape(-1, self.space.dim)
        key = hashlib.sha1(flat.tobytes()).hexdigest()

        # concurrent callers with the same points wait for one evaluation
        with self._lock:
            cached = self._cache.get(key)
            if cached is None:
                cached = self._evaluate(flat)
                self._cache[key] = cached

        return FieldValues(*(a.reshape(shape) for a in cached))

    def __repr__(self) -> str:
        return f"Field({self.name})"


def function_field(f: TestFunction) -> Field:
    """The test function itself as an exact field"""
    def evaluate(X: Array) -> FieldValues:
        zeros = np.zeros(X.shape[0])
        return FieldValues(f.evaluate(X), zeros, zeros)
    return Field(f.descriptor, f.space, evaluate, exact=True)


def average_field(space: SpaceInstance, f: TestFunction, r: float, cfg: QuadratureConfig) -> Field:
    """x -> Af(x, r) with cfg.field_samples draws per ball"""
    def evaluate(X: Array) -> FieldValues:
        A, sd = _map_points(
            lambda chunk: average_values(space, f, chunk, np.array([r]), cfg, cfg.field_samples), X, cfg
        )
        return FieldValues(A[:, 0], 3.0 * sd[:, 0], sd[:, 0])
    return Field(f"A{f}(.,{r!r})", space, evaluate, exact=uses_exact_path(space, f) or f.is_zero)


def maximal_field(space: SpaceInstance, f: TestFunction, cfg: QuadratureConfig) -> Field:
    """x -> Mf(x)"""
    def evaluate(X: Array) -> FieldValues:
        values, errors, sds, _ = _map_points(
            lambda chunk: maximal_values(space, f, chunk, cfg, cfg.field_samples), X, cfg
        )
        return FieldValues(values, errors, sds)
    return Field(f"M{f}", space, evaluate, exact=uses_exact_path(space, f) or f.is_zero)


def integral_fields(space: SpaceInstance,
                    f: TestFunction,
                    w: RadiusWeight,
                    p_values: Sequence[Union[PExponent, float]],
                    cfg: QuadratureConfig) -> Dict[PExponent, Field]:
    """
    Fields x -> I_{p,w}f(x) for several exponents sharing one evaluation

    Returns:
        Mapping exponent -> Field
    """
    exponents = sorted({PExponent.coerce(p) for p in p_values})
    cache: Dict[str, Dict[PExponent, FieldValues]] = {}
    lock = threading.Lock()

    def shared(X: Array) -> Dict[PExponent, FieldValues]:
        key = hashlib.sha1(X.tobytes()).hexdigest()
        with lock:
            hit = cache.get(key)
            if hit is None:
                hit = integral_values(space, f, w, exponents, X, cfg, cfg.field_samples)
                cache[key] = hit
        return hit

    exact = uses_exact_path(space, f) or f.is_zero
    return {
        p: Field(f"I_{p},{w.name}{f}", space, lambda X, p=p: shared(X)[p], exact=exact)
        for p in exponents
    }


def integral_field(space: SpaceInstance, f: TestFunction, w: RadiusWeight, p: Union[PExponent, float], cfg: QuadratureConfig) -> Field:
    """x -> I_{p,w}f(x)"""
    p = PExponent.coerce(p)
    return integral_fields(space, f, w, [p], cfg)[p]


def lq_norm(space: SpaceInstance,
            g: Field,
            q: Union[PExponent, float],
            region: BallSpec,
            cfg: QuadratureConfig,
            tail_certificate: Optional[float] = None,
            compact: bool = False,
            breakpoints: Sequence[float] = (),
            adaptive: bool = True) -> Estimate:
    """
    L_q norm of a field over a ball region

    Args:
        space: Space
        g: Field
        q: Exponent >= 1 or inf
        region: Integration ball
        cfg: Quadrature configuration
        tail_certificate: Bound on the integral of g^q outside the region
            (for q = inf: bound on sup g outside the region)
        compact: The field vanishes outside the region; no certificate needed
        breakpoints: Geodesic distances from the region center where g has kinks
        adaptive: On 1-D spaces use adaptive quadrature (else the fixed region rule)

    Returns:
        Estimate whose value is the region norm; the tail enters error_bound.
        q = inf gives a sampled maximum flagged as a lower bound.
    """
    q = PExponent.coerce(q)
    space.check(region.center)
    if not compact and tail_certificate is None:
        raise UsageError(f"lq_norm of {g.name} over a bounded region needs a tail certificate")
    tail = 0.0 if compact else float(tail_certificate)
    if tail < 0 or not math.isfinite(tail):
        raise DomainError(f"Tail certificate must be finite and >= 0, got {tail}")

    c = region.center.as_array()
    R = region.radius

    if space.dim == 1 and adaptive:
        cuts = [c[0] + s * b for b in breakpoints for s in (-1.0, 1.0)]
        if q.is_infinite:
            grid = np.union1d(np.linspace(c[0] - R, c[0] + R, 4097), np.clip(cuts, c[0] - R, c[0] + R))
            field = g(grid[:, None])
            k = int(np.argmax(field.values))
            value = max(float(field.values[k]), tail)
            return Estimate(value, float(field.error_bounds[k]), is_lower_bound=True)

        estimate = integrate_interval(lambda t: g(t[:, None]).values ** q.value, c[0] - R, c[0] + R, cfg, cuts)
        J = max(estimate.value, 0.0)
        disc = estimate.error_bound

        def propagated(t: Array) -> Array:
            field = g(t[:, None])
            return q.value * np.maximum(field.values, 0.0) ** (q.value - 1.0) * field.error_bounds

        loose = cfg.with_changes(rel_tol=max(cfg.rel_tol, 1e-3))
        field_error = integrate_interval(propagated, c[0] - R, c[0] + R, loose, cuts)
        disc += field_error.value + field_error.error_bound
        sigma_J = 0.0
        kind = EstimateKind.DETERMINISTIC
        samples = 0
    else:
        rule = region_rule(space, region.center, R, cfg, breakpoints=breakpoints)
        field = g(rule.points)

        if q.is_infinite:
            flat = np.argmax(field.values)
            k = np.unravel_index(flat, field.values.shape)
            value = max(float(field.values[k]), tail)
            return Estimate(
                value,
                float(field.error_bounds[k]),
                kind=EstimateKind.DETERMINISTIC if g.exact else EstimateKind.MONTE_CARLO,
                std_error=float(field.std_errors[k]),
                is_lower_bound=True,
            )

        J, disc, sigma_angle = apply_region_rule(rule, field.values ** q.value)
        J = max(J, 0.0)
        sensitivity = q.value * np.maximum(field.values, 0.0) ** (q.value - 1.0)
        # common random numbers correlate field errors; add them linearly
        sigma_field = float(np.sum(np.abs(rule.kronrod) * sensitivity * field.std_errors))
        field_bias = float(np.sum(np.abs(rule.kronrod) * sensitivity * (field.error_bounds - 3.0 * field.std_errors)))
        disc += max(field_bias, 0.0)
        sigma_J = math.hypot(sigma_angle, sigma_field) if rule.directions > 1 else sigma_field
        monte_carlo = rule.directions > 1 or not g.exact
        kind = EstimateKind.MONTE_CARLO if monte_carlo else EstimateKind.DETERMINISTIC
        samples = int(rule.points.shape[0] * rule.points.shape[1])

    inv_q = 1.0 / q.value
    value = J ** inv_q
    if J > 0:
        scale = value * inv_q / J
        std_error = scale * sigma_J
        error = scale * disc + 3.0 * std_error + ((J + tail) ** inv_q - value)
    else:
        std_error = sigma_J ** inv_q
        error = (disc + 3.0 * sigma_J + tail) ** inv_q

    return Estimate(value, error, kind=kind, samples_used=samples, std_error=std_error)


def region_for(space: SpaceInstance, f: TestFunction, margin: Optional[float] = None) -> BallSpec:
    """Default integration region: the support ball of f widened by a margin (20 on 1-D spaces, 6 elsewhere)"""
    if not f.has_compact_support:
        raise UsageError(f"{f} has unbounded support; pick the region explicitly")
    if margin is None:
        margin = 20.0 if space.dim == 1 else 6.0
    return BallSpec(f.anchor, f.support_radius + margin)


def integral_tail_bound(space: SpaceInstance,
                        f: TestFunction,
                        w: RadiusWeight,
                        p: Union[PExponent, float],
                        q: Union[PExponent, float],
                        region_radius: float,
                        cfg: QuadratureConfig) -> float:
    """
    Envelope bound on the mass of (I_{p,w}f)^q in the annulus region_radius <= d <= region_radius + 40

    For d = d(x, anchor) >= region_radius the ball average vanishes when
    r <= d - R_f and is at most min(sup f, ||f||_1 / mu(B_{x,r})) otherwise.
    On right-Haar spaces min(a, c) <= a^{1-1/q} c^{1/q} cancels the
    dependence of mu(B_{x,r}) on x. The outer integral stops at
    region_radius + 40: mass farther from the anchor is not included, and
    for weights with exponential tails it lies below the quadrature tolerance.

    For q = inf the returned value bounds sup I_{p,w}f outside the region.

    Args:
        space: Space
        f: Compactly supported test function
        w: Radius weight
        p: Exponent of the integral-function (finite)
        q: Norm exponent
        region_radius: Radius of the measured region about f's anchor
        cfg: Quadrature configuration

    Returns:
        Nonnegative bound
    """
    p = PExponent.coerce(p)
    q = PExponent.coerce(q)
    if p.is_infinite:
        raise UsageError("Tail certificates are available for finite p")
    if f.is_zero:
        return 0.0
    if not f.has_compact_support:
        raise UsageError(f"{f} has unbounded support; no tail certificate")

    R_f = f.support_radius
    if region_radius < R_f:
        raise DomainError("The region must contain the support of f")

    S = f.sup
    pv = p.value
    R_w = truncation_radius(w, S, cfg)
    tail_cfg = cfg.with_changes(rel_tol=max(cfg.rel_tol, 1e-6), abs_tol=max(cfg.abs_tol, 1e-14))

    if q.is_infinite:
        lo = region_radius - R_f
        mass = 0.0 if (w.is_compact and lo >= w.support_bound) else (w.tail_bound(lo) if lo > 0 else w.norm)
        return S * mass ** (1.0 / pv)

    qv = q.value
    m1 = _l1_mass(f)
    right = space.kind is SpaceKind.AFFINE_RIGHT

    def envelope_p(r: Array) -> Array:
        V = reference_volume(space, r)
        if right:
            return S ** (pv - pv / qv) * (m1 / V) ** (pv / qv)
        return np.minimum(S, m1 / V) ** pv

    def inner(d: float) -> float:
        lo = max(d - R_f, 0.0)
        if w.is_compact and lo >= w.support_bound:
            return 0.0
        total = 0.0
        if lo < R_w:
            estimate = integrate_radial(lambda r: w(r) * envelope_p(r), lo, R_w, tail_cfg, w.breakpoints)
            total += estimate.value + estimate.error_bound
        start = max(lo, R_w)
        if w.tail_bound is not None and not (w.is_compact and start >= w.support_bound):
            total += w.tail_bound(start) * float(envelope_p(np.array([start]))[0])
        return total

    def outer(d: Array) -> Array:
        values = np.array([inner(float(t)) for t in d])
        return shell_measure(space, d) * values ** (qv / pv)

    estimate = integrate_interval(outer, region_radius, region_radius + TAIL_CERTIFICATE_SPAN, tail_cfg)
    bound = max(estimate.value, 0.0) + estimate.error_bound
    logger.debug(f"Tail certificate for I_{p},{w.name}{f} in L_{q} beyond {region_radius:.3g}: {bound:.3g}")
    return bound
