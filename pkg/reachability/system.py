"""
Closed-loop system definitions: hyperrectangles, unsafe sets and the
system tuple the reachability drivers consume.
"""
from dataclasses import dataclass, field

import numpy as np

from expressions.intervals import Interval
from utils.exceptions import ConfigurationError

INSIDE = 'inside'
OUTSIDE = 'outside'
POLARITIES = (INSIDE, OUTSIDE)


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError('Box bounds differ in length')
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError('Box bounds must be finite')
        if np.any(lower > upper):
            bad = int(np.flatnonzero(lower > upper)[0])
            raise ValueError(f'Box is empty along x{bad + 1}: [{lower[bad]}, {upper[bad]}]')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1])

    @classmethod
    def hull_of(cls, points):
        points = np.atleast_2d(points)
        return cls(points.min(axis=0), points.max(axis=0))

    def __eq__(self, other):
        return (isinstance(other, Box) and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    __hash__ = None

    def __repr__(self):
        inner = ' x '.join(f'[{lo:.6g}, {hi:.6g}]' for lo, hi in zip(self.lower, self.upper))
        return f'Box({inner})'

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def center(self):
        return (self.lower + self.upper) / 2.0

    def as_pairs(self):
        return [[float(lo), float(hi)] for lo, hi in zip(self.lower, self.upper)]

    def as_mapping(self):
        """{variable: (lo, hi)} with 1-based variables."""
        return {i + 1: (float(lo), float(hi)) for i, (lo, hi) in enumerate(zip(self.lower, self.upper))}

    def intervals(self):
        return [Interval(float(lo), float(hi)) for lo, hi in zip(self.lower, self.upper)]

    def padded(self, amount):
        """Widen every side by `amount` relative to the side's magnitude, at least `amount`."""
        scale = np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))
        return Box(self.lower - amount * scale, self.upper + amount * scale)

    def contains_box(self, other, tol=0.0):
        return bool(np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol))

    def contains_points(self, points, tol=0.0):
        """Boolean per row of `points`."""
        points = np.atleast_2d(points)
        return np.all((points >= self.lower - tol) & (points <= self.upper + tol), axis=1)

    def intersects(self, other):
        return bool(np.all(np.maximum(self.lower, other.lower) <= np.minimum(self.upper, other.upper)))

    def intersection(self, other):
        """The overlap, or None when the boxes are disjoint."""
        lower = np.maximum(self.lower, other.lower)
        upper = np.minimum(self.upper, other.upper)
        if np.any(lower > upper):
            return None
        return Box(lower, upper)

    def sample(self, rng, count):
        return rng.uniform(self.lower, self.upper, (count, self.dimension))


def box_volume(box):
    """Product of the side lengths."""
    return float(np.prod(box.widths))


@dataclass(frozen=True, eq=False)
class AvoidSet:
    """
    An unsafe region active for steps t_from..t_to inclusive.

    A box region is the box itself (`inside`) or its complement
    (`outside`). A halfspace region is {x : normal . x >= offset}, or its
    complement for `outside`.
    """
    t_from: int
    t_to: int
    polarity: str = INSIDE
    box: Box = None
    normal: np.ndarray = None
    offset: float = 0.0

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f'Unknown polarity {self.polarity!r}')
        if (self.box is None) == (self.normal is None):
            raise ValueError('An avoid set is either a box or a halfspace')
        if self.normal is not None:
            object.__setattr__(self, 'normal', np.asarray(self.normal, dtype=float).reshape(-1))
        if self.t_from > self.t_to:
            raise ValueError(f'Avoid window {self.t_from}..{self.t_to} is empty')

    @property
    def kind(self):
        return 'box' if self.box is not None else 'halfspace'

    def active(self, t):
        return self.t_from <= t <= self.t_to

    def intersects(self, region):
        """Whether the unsafe region meets the box `region`."""
        if self.box is not None:
            if self.polarity == INSIDE:
                return self.box.intersects(region)
            return not self.box.contains_box(region)
        positive = np.maximum(self.normal, 0.0)
        negative = np.minimum(self.normal, 0.0)
        highest = positive @ region.upper + negative @ region.lower
        lowest = positive @ region.lower + negative @ region.upper
        if self.polarity == INSIDE:
            return bool(highest >= self.offset)
        return bool(lowest < self.offset)

    def contains_points(self, points):
        """Boolean per row: the point is unsafe."""
        points = np.atleast_2d(points)
        if self.box is not None:
            inside = self.box.contains_points(points)
        else:
            inside = points @ self.normal >= self.offset
        return inside if self.polarity == INSIDE else ~inside


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """The closed-loop system x' = x + (f(x) + u(x) + eps) * delta."""
    n: int
    initial: Box
    dynamics: tuple
    perturbation: Box
    controller: object
    delta: float
    horizon: int
    goal: Box = None
    avoid: tuple = field(default_factory=tuple)
    name: str = 'system'

    def __post_init__(self):
        object.__setattr__(self, 'dynamics', tuple(self.dynamics))
        object.__setattr__(self, 'avoid', tuple(self.avoid))
        errors = {}
        if len(self.dynamics) != self.n:
            errors['dynamics'] = [f'Expected {self.n} transition functions, got {len(self.dynamics)}']
        for i, f in enumerate(self.dynamics):
            outside = [v for v in f.free_vars if not 1 <= v <= self.n]
            if outside:
                errors[f'dynamics.{i}'] = [f'x{outside[0]} is not a state variable of an n={self.n} system']
        for key in ('initial', 'perturbation', 'goal'):
            value = getattr(self, key)
            if value is not None and value.dimension != self.n:
                errors[key] = [f'Expected {self.n} intervals, got {value.dimension}']
        for i, region in enumerate(self.avoid):
            size = region.box.dimension if region.box is not None else len(region.normal)
            if size != self.n:
                errors[f'avoid.{i}'] = [f'Expected {self.n} coordinates, got {size}']
        if not self.delta > 0:
            errors['delta'] = ['Step size must be positive']
        if self.horizon < 0:
            errors['horizon'] = ['Horizon must be a natural number']
        if self.controller.input_size != self.n or self.controller.output_size != self.n:
            errors['network'] = [
                f'Controller maps R^{self.controller.input_size} to R^{self.controller.output_size}, '
                f'expected R^{self.n}'
            ]
        if errors:
            raise ConfigurationError(errors)

    def avoid_at(self, t):
        return [region for region in self.avoid if region.active(t)]
