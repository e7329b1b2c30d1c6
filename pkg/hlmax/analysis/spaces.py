"""
Metric Measure Spaces
Real line, Euclidean R^n (n <= 3) and the affine (ax+b) group with left or right Haar measure

The affine group is realized as the upper half-plane {(a, b): b > 0} acting by
t -> b*t + a. Its left-invariant metric is the hyperbolic metric
(da^2 + db^2)/b^2, left Haar density is 1/b^2, right Haar density is 1/b and
the modular function is 1/b. The identity is (0, 1).

Scalar operations take SpacePoint values; the *_array variants work on
coordinate arrays of shape (..., dim) and are what the operators use.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma

from hlmax.errors import DomainError, ParseError, UsageError
from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_EUCLIDEAN_DIM = 3


class SpaceKind(str, Enum):
    REAL_LINE = "real-line"
    EUCLIDEAN = "euclidean"
    AFFINE_LEFT = "affine-left"
    AFFINE_RIGHT = "affine-right"


class MeasureKind(str, Enum):
    LEBESGUE = "lebesgue"
    LEFT_HAAR = "left-haar"
    RIGHT_HAAR = "right-haar"


class PointVariant(str, Enum):
    REAL1 = "real1"
    REALN = "realn"
    AFFINE = "affine"


@dataclass(frozen=True)
class SpacePoint:
    """A point of one of the supported spaces"""
    variant: PointVariant
    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)

        if not all(math.isfinite(c) for c in coords):
            raise DomainError(f"Point coordinates must be finite: {coords}")

        if self.variant is PointVariant.REAL1 and len(coords) != 1:
            raise UsageError(f"Real1 point needs one coordinate, got {len(coords)}")
        if self.variant is PointVariant.REALN and not 1 <= len(coords) <= MAX_EUCLIDEAN_DIM:
            raise UsageError(f"RealN point needs 1..{MAX_EUCLIDEAN_DIM} coordinates, got {len(coords)}")
        if self.variant is PointVariant.AFFINE:
            if len(coords) != 2:
                raise UsageError(f"Affine point needs (a, b), got {len(coords)} coordinates")
            if coords[1] <= 0:
                raise DomainError(f"Affine point needs b > 0, got b={coords[1]}")

    @classmethod
    def real1(cls, x: float) -> "SpacePoint":
        return cls(PointVariant.REAL1, (x,))

    @classmethod
    def realn(cls, coords: Sequence[float]) -> "SpacePoint":
        return cls(PointVariant.REALN, tuple(coords))

    @classmethod
    def affine(cls, a: float, b: float) -> "SpacePoint":
        return cls(PointVariant.AFFINE, (a, b))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __str__(self) -> str:
        return ",".join(repr(c) for c in self.coords)


@dataclass(frozen=True)
class BallSpec:
    """Open metric ball B_{center, radius}"""
    center: SpacePoint
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"Ball radius must be positive and finite, got {self.radius}")


class BallSample(NamedTuple):
    """Points drawn in a ball with importance weights normalized to mean 1"""
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class SpaceInstance:
    """
    A metric measure space

    Instances are immutable and safe to share across worker threads.
    """
    kind: SpaceKind
    dim: int

    def __post_init__(self):
        if self.kind is SpaceKind.REAL_LINE and self.dim != 1:
            raise UsageError("real-line has dimension 1")
        if self.kind is SpaceKind.EUCLIDEAN and not 1 <= self.dim <= MAX_EUCLIDEAN_DIM:
            raise UsageError(f"euclidean dimension must be 1..{MAX_EUCLIDEAN_DIM}, got {self.dim}")
        if self.is_affine and self.dim != 2:
            raise UsageError("affine group has dimension 2")

    @property
    def is_affine(self) -> bool:
        return self.kind in (SpaceKind.AFFINE_LEFT, SpaceKind.AFFINE_RIGHT)

    @property
    def is_unimodular(self) -> bool:
        return not self.is_affine

    @property
    def left_haar_regime(self) -> bool:
        """Measure is a left Haar measure (Lebesgue counts: R^n is abelian)"""
        return self.kind is not SpaceKind.AFFINE_RIGHT

    @property
    def measure(self) -> MeasureKind:
        if self.kind is SpaceKind.AFFINE_LEFT:
            return MeasureKind.LEFT_HAAR
        if self.kind is SpaceKind.AFFINE_RIGHT:
            return MeasureKind.RIGHT_HAAR
        return MeasureKind.LEBESGUE

    @property
    def variant(self) -> PointVariant:
        if self.is_affine:
            return PointVariant.AFFINE
        if self.kind is SpaceKind.REAL_LINE:
            return PointVariant.REAL1
        return PointVariant.REALN

    @property
    def identity(self) -> SpacePoint:
        if self.is_affine:
            return SpacePoint.affine(0.0, 1.0)
        return self.point([0.0] * self.dim)

    @property
    def descriptor(self) -> str:
        if self.kind is SpaceKind.EUCLIDEAN:
            return f"euclidean:{self.dim}"
        return self.kind.value

    def point(self, coords: Union[Sequence[float], np.ndarray]) -> SpacePoint:
        """Build a point of this space from raw coordinates"""
        return SpacePoint(self.variant, tuple(float(c) for c in np.ravel(coords)))

    def parse_point(self, text: str) -> SpacePoint:
        """
        Parse a point encoding

        Args:
            text: Comma-separated decimals (e.g. "0.5,2.0"), or "e" for the identity

        Returns:
            SpacePoint of this space
        """
        token = text.strip()
        if token == "e":
            return self.identity
        try:
            coords = [float(part) for part in token.split(",")]
        except ValueError as e:
            raise ParseError(f"Invalid point for {self.descriptor}", token) from e
        if len(coords) != self.dim:
            raise ParseError(f"{self.descriptor} points have {self.dim} coordinate(s)", token)
        try:
            return self.point(coords)
        except (DomainError, UsageError) as e:
            raise ParseError(str(e), token) from e

    def check(self, x: SpacePoint):
        """Raise UsageError unless x belongs to this space's point variant"""
        if x.variant is not self.variant or len(x.coords) != self.dim:
            raise UsageError(f"{x.variant.value} point {x} does not belong to {self.descriptor}")

    def __str__(self) -> str:
        return self.descriptor


def parse_space(descriptor: str) -> SpaceInstance:
    """
    Parse a space descriptor

    Args:
        descriptor: "real-line", "euclidean:<dim>", "affine-left" or "affine-right"

    Returns:
        SpaceInstance
    """
    token = descriptor.strip()
    if token == SpaceKind.REAL_LINE.value:
        return SpaceInstance(SpaceKind.REAL_LINE, 1)
    if token == SpaceKind.AFFINE_LEFT.value:
        return SpaceInstance(SpaceKind.AFFINE_LEFT, 2)
    if token == SpaceKind.AFFINE_RIGHT.value:
        return SpaceInstance(SpaceKind.AFFINE_RIGHT, 2)
    if token.startswith("euclidean:"):
        try:
            dim = int(token.split(":", 1)[1])
        except ValueError as e:
            raise ParseError("Invalid euclidean dimension", token) from e
        if not 1 <= dim <= MAX_EUCLIDEAN_DIM:
            raise ParseError(f"euclidean dimension must be 1..{MAX_EUCLIDEAN_DIM}", token)
        return SpaceInstance(SpaceKind.EUCLIDEAN, dim)
    raise ParseError("Unknown space descriptor", token)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def substream(master_seed: int, *task_index: int) -> np.random.Generator:
    """
    Deterministic random stream for one task

    The seed is a stable hash of (master_seed, task_index...), so results do
    not depend on which worker runs the task or in which order.
    """
    keys = tuple(int(k) & 0xFFFFFFFF for k in task_index)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=keys))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _as_coords(space: SpaceInstance, x: SpacePoint) -> np.ndarray:
    space.check(x)
    return x.as_array()


def distance_array(space: SpaceInstance, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """
    Distances between coordinate arrays (broadcast over leading axes)

    Args:
        space: Space
        X, Y: Arrays of shape (..., dim)

    Returns:
        Array of distances
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)

    if space.is_affine:
        da = X[..., 0] - Y[..., 0]
        db = X[..., 1] - Y[..., 1]
        # arcosh(1 + q/2) == 2 asinh(sqrt(q)/2), stable for nearby points
        q = (da * da + db * db) / (X[..., 1] * Y[..., 1])
        return 2.0 * np.arcsinh(0.5 * np.sqrt(q))

    diff = X - Y
    if space.dim == 1:
        return np.abs(diff[..., 0])
    return np.sqrt(np.sum(diff * diff, axis=-1))


def distance(space: SpaceInstance, x: SpacePoint, y: SpacePoint) -> float:
    """
    Distance between two points

    Affine kinds use the hyperbolic half-plane distance
    arcosh(1 + ((a1-a2)^2 + (b1-b2)^2) / (2 b1 b2)).
    """
    return float(distance_array(space, _as_coords(space, x), _as_coords(space, y)))


def translate_array(space: SpaceInstance, g: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Left translation y -> g*y applied to a coordinate array of shape (..., dim)"""
    g = np.asarray(g, dtype=float)
    Y = np.asarray(Y, dtype=float)

    if space.is_affine:
        out = np.empty(np.broadcast_shapes(Y.shape, g.shape), dtype=float)
        out[..., 0] = g[..., 0] + g[..., 1] * Y[..., 0]
        out[..., 1] = g[..., 1] * Y[..., 1]
        return out
    return g + Y


def translate(space: SpaceInstance, g: SpacePoint, x: SpacePoint) -> SpacePoint:
    """
    Group law g*x

    Euclidean kinds add coordinates; the affine group composes the maps
    t -> g_b*t + g_a and t -> x_b*t + x_a.
    """
    return space.point(translate_array(space, _as_coords(space, g), _as_coords(space, x)))


def inverse_array(space: SpaceInstance, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if space.is_affine:
        out = np.empty_like(X)
        out[..., 0] = -X[..., 0] / X[..., 1]
        out[..., 1] = 1.0 / X[..., 1]
        return out
    return -X


def inverse(space: SpaceInstance, x: SpacePoint) -> SpacePoint:
    """Group inverse"""
    return space.point(inverse_array(space, _as_coords(space, x)))


def modular_array(space: SpaceInstance, X: np.ndarray) -> np.ndarray:
    """Modular function on a coordinate array: 1/b on the affine group, 1 otherwise"""
    X = np.asarray(X, dtype=float)
    if space.is_affine:
        return 1.0 / X[..., 1]
    return np.ones(X.shape[:-1])


def modular(space: SpaceInstance, x: SpacePoint) -> float:
    """
    Modular function Delta(x), defined by lambda(Bx) = Delta(x) lambda(B)
    """
    return float(modular_array(space, _as_coords(space, x)))


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / float(gamma(dim / 2 + 1))


def reference_volume(space: SpaceInstance, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Measure of the ball of radius r about the identity

    Vectorized over r. For both Haar measures this is the hyperbolic area
    2*pi*(cosh r - 1), written as 4*pi*sinh(r/2)^2 for accuracy at small r.
    """
    r = np.asarray(r, dtype=float)
    if space.is_affine:
        value = 4.0 * math.pi * np.sinh(0.5 * r) ** 2
    else:
        value = unit_ball_volume(space.dim) * r ** space.dim
    return float(value) if value.ndim == 0 else value


def ball_volume(space: SpaceInstance, x: SpacePoint, r: float) -> float:
    """
    Measure of the open ball B_{x,r}

    Args:
        space: Space
        x: Center
        r: Radius (> 0)

    Returns:
        mu(B_{x,r}); on affine-right this is Delta(x^-1) * rho(B_{e,r})
    """
    coords = _as_coords(space, x)
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Ball radius must be positive and finite, got {r}")

    volume = reference_volume(space, r)
    if space.kind is SpaceKind.AFFINE_RIGHT:
        # Delta(x^-1) = x_b
        volume *= coords[1]
    return float(volume)


def ball_shadow(space: SpaceInstance, x: SpacePoint, r: float) -> Tuple[SpacePoint, float]:
    """
    Euclidean disk equal to the hyperbolic ball B_{x,r}

    Args:
        space: An affine space
        x: Center (a, b)
        r: Hyperbolic radius

    Returns:
        (Euclidean center (a, b*cosh r), Euclidean radius b*sinh r)
    """
    if not space.is_affine:
        raise UsageError(f"ball_shadow needs an affine space, got {space.descriptor}")
    a, b = _as_coords(space, x)
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Ball radius must be positive and finite, got {r}")
    return SpacePoint.affine(a, b * math.cosh(r)), b * math.sinh(r)


def unit_ball_samples(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in the Euclidean unit ball, shape (n, dim)"""
    if dim == 1:
        return rng.uniform(-1.0, 1.0, size=(n, 1))
    if dim == 2:
        radius = np.sqrt(rng.uniform(0.0, 1.0, size=n))
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
        return np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))

    direction = rng.standard_normal(size=(n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
    return direction * radius


def reference_ball(space: SpaceInstance, radii: np.ndarray, unit: np.ndarray) -> BallSample:
    """
    Map unit-ball samples into the balls B_{e,r} for several radii

    The same unit samples are reused for every radius (common random numbers),
    so a ball average estimated from them is a deterministic function of r.
    For any center x the ball average of f is E[weight * f(x*y)]: the metric
    is left-invariant and the measure of x*B_{e,r} scales uniformly.

    Args:
        space: Space
        radii: Radii, shape (K,)
        unit: Uniform samples in the Euclidean unit ball, shape (N, dim)

    Returns:
        BallSample with points of shape (K, N, dim) and weights of shape (K, N)
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if np.any(radii <= 0):
        raise DomainError("Ball radii must be positive")

    if not space.is_affine:
        points = radii[:, None, None] * unit[None, :, :]
        return BallSample(points, np.ones(points.shape[:2]))

    sinh_r = np.sinh(radii)[:, None]
    points = np.empty((radii.size, unit.shape[0], 2))
    points[..., 0] = sinh_r * unit[None, :, 0]
    points[..., 1] = np.cosh(radii)[:, None] + sinh_r * unit[None, :, 1]

    # uniform shadow-disk density pi*sinh(r)^2 over ball volume 4*pi*sinh(r/2)^2
    scale = np.cosh(0.5 * radii)[:, None] ** 2
    b = points[..., 1]
    if space.kind is SpaceKind.AFFINE_LEFT:
        weights = scale / (b * b)
    else:
        weights = scale / b
    return BallSample(points, weights)


def sample_ball(space: SpaceInstance,
                x: SpacePoint,
                r: float,
                rng: np.random.Generator,
                size: int = 1) -> BallSample:
    """
    Draw points in B_{x,r} with importance weights

    The expectation of weight*h(point) equals the mu-average of h over the
    ball. Euclidean kinds sample uniformly (weight 1); affine kinds sample
    the Euclidean shadow disk uniformly and weight by the Haar density.

    Args:
        space: Space
        x: Center
        r: Radius (> 0)
        rng: Seeded generator
        size: Number of draws

    Returns:
        BallSample with points (size, dim) and weights (size,)
    """
    center = _as_coords(space, x)
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Ball radius must be positive and finite, got {r}")

    unit = unit_ball_samples(space.dim, size, rng)
    ref = reference_ball(space, np.array([r]), unit)
    return BallSample(translate_array(space, center, ref.points[0]), ref.weights[0])


# ---------------------------------------------------------------------------
# Geodesic polar coordinates
# ---------------------------------------------------------------------------

def random_directions(space: SpaceInstance, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Uniform unit tangent directions at the identity, shape shape + (dim,)

    In dimension 1 the directions are +-1.
    """
    if space.dim == 1:
        return rng.choice(np.array([-1.0, 1.0]), size=shape + (1,))
    if space.dim == 2:
        angle = rng.uniform(0.0, 2.0 * math.pi, size=shape)
        return np.stack((np.cos(angle), np.sin(angle)), axis=-1)
    direction = rng.standard_normal(size=shape + (space.dim,))
    return direction / np.linalg.norm(direction, axis=-1, keepdims=True)


def exp_map(space: SpaceInstance, center: np.ndarray, d: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """
    Points at geodesic distance d from center in the given unit directions

    Args:
        space: Space
        center: Center coordinates, shape (dim,)
        d: Distances, broadcastable against directions[..., 0]
        directions: Unit vectors, shape (..., dim)

    Returns:
        Coordinates of shape (..., dim)
    """
    d = np.asarray(d, dtype=float)
    if not space.is_affine:
        return translate_array(space, center, d[..., None] * directions)

    # geodesic polar coordinates about i, via the disk model w = tanh(d/2) e^{i phi}
    t = np.tanh(0.5 * d)
    cos_phi = directions[..., 0]
    sin_phi = directions[..., 1]
    denom = 1.0 - 2.0 * t * cos_phi + t * t
    ref = np.empty(np.broadcast_shapes(t.shape, cos_phi.shape) + (2,))
    ref[..., 0] = -2.0 * t * sin_phi / denom
    ref[..., 1] = (1.0 - t * t) / denom
    return translate_array(space, center, ref)


def shell_measure(space: SpaceInstance, d: np.ndarray) -> np.ndarray:
    """
    Riemannian measure of the geodesic sphere of radius d (left Haar / Lebesgue)

    1-D: 2, 2-D: 2*pi*d, 3-D: 4*pi*d^2, hyperbolic: 2*pi*sinh(d).
    On affine-right multiply by the b-coordinate of each point (d rho = b d lambda).
    """
    d = np.asarray(d, dtype=float)
    if space.is_affine:
        return 2.0 * math.pi * np.sinh(d)
    return space.dim * unit_ball_volume(space.dim) * d ** (space.dim - 1)


def geodesic_segment(space: SpaceInstance, center: SpacePoint, radius: float, n: int) -> List[Tuple[float, SpacePoint]]:
    """
    Points on a geodesic segment through center

    Euclidean kinds use the first coordinate axis, affine kinds the vertical
    geodesic (a, b*e^t), which has d(center, point) = |t|.

    Args:
        space: Space
        center: Midpoint of the segment
        radius: Half-length
        n: Number of points (>= 1)

    Returns:
        List of (signed geodesic coordinate, point)
    """
    c = _as_coords(space, center)
    if n < 1:
        raise UsageError("A grid needs at least one point")
    if not (radius >= 0 and math.isfinite(radius)):
        raise DomainError(f"Grid radius must be finite and >= 0, got {radius}")

    ts = np.linspace(-radius, radius, n) if n > 1 else np.zeros(1)
    points = []
    for t in ts:
        if space.is_affine:
            coords = np.array([c[0], c[1] * math.exp(t)])
        else:
            coords = c.copy()
            coords[0] += t
        points.append((float(t), space.point(coords)))
    return points


# ---------------------------------------------------------------------------
# Sampled property checks
# ---------------------------------------------------------------------------

def random_points(space: SpaceInstance, rng: np.random.Generator, n: int, spread: float = 2.0) -> np.ndarray:
    """Random coordinates of shape (n, dim) spread around the identity"""
    if space.is_affine:
        a = rng.normal(0.0, spread, size=n)
        b = np.exp(rng.normal(0.0, 0.5 * spread, size=n))
        return np.column_stack((a, b))
    return rng.normal(0.0, spread, size=(n, space.dim))


def metric_axiom_violations(space: SpaceInstance, rng: np.random.Generator, n: int = 200) -> Tuple[float, float]:
    """
    Largest symmetry and triangle-inequality violations on random triples

    Returns:
        (max |d(x,y) - d(y,x)|, max(d(x,z) - d(x,y) - d(y,z), 0))
    """
    X = random_points(space, rng, n)
    Y = random_points(space, rng, n)
    Z = random_points(space, rng, n)

    symmetry = np.max(np.abs(distance_array(space, X, Y) - distance_array(space, Y, X)))
    triangle = distance_array(space, X, Z) - distance_array(space, X, Y) - distance_array(space, Y, Z)
    return float(symmetry), float(max(np.max(triangle), 0.0))


def left_invariance_violation(space: SpaceInstance, rng: np.random.Generator, n: int = 100) -> float:
    """Largest |d(gx, gy) - d(x, y)| over random (g, x, y)"""
    G = random_points(space, rng, n)
    X = random_points(space, rng, n)
    Y = random_points(space, rng, n)

    moved = distance_array(space, translate_array(space, G, X), translate_array(space, G, Y))
    return float(np.max(np.abs(moved - distance_array(space, X, Y))))
