"""
Closed-interval arithmetic with emulated outward rounding.

Every computed endpoint is pushed outward by a relative epsilon, so an
exactly-zero endpoint stays zero.
"""
import math
from collections.abc import Mapping
from dataclasses import dataclass

from utils.exceptions import DomainError

from .nodes import Binary, Const, Neg, Unary, Var

OUTWARD = 1e-12
TWO_PI = 2.0 * math.pi


def _down(value):
    return value - OUTWARD * abs(value)


def _up(value):
    return value + OUTWARD * abs(value)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError(f'Invalid interval [{lo}, {hi}]')
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    @classmethod
    def point(cls, value):
        return cls(value, value)

    @classmethod
    def outward(cls, lo, hi):
        return cls(_down(lo), _up(hi))

    def __repr__(self):
        return f'[{self.lo:.6g}, {self.hi:.6g}]'

    def __iter__(self):
        yield self.lo
        yield self.hi

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def is_zero(self):
        return self.lo == 0.0 and self.hi == 0.0

    def contains(self, value, tol=0.0):
        return self.lo - tol <= value <= self.hi + tol

    def contains_zero(self):
        return self.lo <= 0.0 <= self.hi

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def pad(self, amount):
        return Interval(self.lo - amount, self.hi + amount)

    def split(self):
        mid = self.midpoint
        return Interval(self.lo, mid), Interval(mid, self.hi)

    def _coerce(self, other):
        return other if isinstance(other, Interval) else Interval.point(other)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, other):
        other = self._coerce(other)
        return Interval.outward(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Interval.outward(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval.outward(min(products), max(products))

    __rmul__ = __mul__

    def __pow__(self, exponent):
        """Image of t**exponent for a natural exponent; even powers never go negative."""
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError(f'Interval powers need a natural exponent, got {exponent!r}')
        if exponent == 0:
            return Interval.point(1.0)
        try:
            ends = (self.lo ** exponent, self.hi ** exponent)
        except OverflowError as exc:
            raise DomainError(f'Power {exponent} overflows on {self!r}') from exc
        if exponent % 2:
            return Interval.outward(*ends)
        hi = _up(max(ends))
        if self.contains_zero():
            return Interval(0.0, hi)
        return Interval(max(0.0, _down(min(ends))), hi)

    def square(self):
        return self ** 2

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.contains_zero():
            raise DomainError(f'Division by an interval containing zero {other!r}')
        return self * Interval.outward(1.0 / other.hi, 1.0 / other.lo)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def apply(self, func):
        """Image of the interval under an elementary function."""
        return _FUNCTIONS[func](self)


def _contains_phase(iv, phase):
    """True if iv contains phase + 2k*pi for some integer k."""
    k = math.ceil((iv.lo - phase) / TWO_PI)
    return phase + k * TWO_PI <= iv.hi


def _sin(iv):
    if iv.width >= TWO_PI:
        return Interval(-1.0, 1.0)
    ends = (math.sin(iv.lo), math.sin(iv.hi))
    lo, hi = min(ends), max(ends)
    if _contains_phase(iv, math.pi / 2):
        hi = 1.0
    if _contains_phase(iv, -math.pi / 2):
        lo = -1.0
    return Interval(max(-1.0, _down(lo)), min(1.0, _up(hi)))


def _cos(iv):
    if iv.width >= TWO_PI:
        return Interval(-1.0, 1.0)
    ends = (math.cos(iv.lo), math.cos(iv.hi))
    lo, hi = min(ends), max(ends)
    if _contains_phase(iv, 0.0):
        hi = 1.0
    if _contains_phase(iv, math.pi):
        lo = -1.0
    return Interval(max(-1.0, _down(lo)), min(1.0, _up(hi)))


def _tan(iv):
    if iv.width >= math.pi or _contains_phase(iv, math.pi / 2) or _contains_phase(iv, -math.pi / 2):
        raise DomainError(f'tan is undefined somewhere on {iv!r}')
    return Interval.outward(math.tan(iv.lo), math.tan(iv.hi))


def _asin(iv):
    if iv.lo < -1.0 or iv.hi > 1.0:
        raise DomainError(f'asin is undefined outside [-1, 1], got {iv!r}')
    return Interval.outward(math.asin(iv.lo), math.asin(iv.hi))


def _acos(iv):
    if iv.lo < -1.0 or iv.hi > 1.0:
        raise DomainError(f'acos is undefined outside [-1, 1], got {iv!r}')
    return Interval.outward(math.acos(iv.hi), math.acos(iv.lo))


def _atan(iv):
    return Interval.outward(math.atan(iv.lo), math.atan(iv.hi))


def _exp(iv):
    try:
        return Interval.outward(math.exp(iv.lo), math.exp(iv.hi))
    except OverflowError as exc:
        raise DomainError(f'exp overflows on {iv!r}') from exc


def _log(iv):
    if iv.lo <= 0.0:
        raise DomainError(f'log is undefined for non-positive values, got {iv!r}')
    return Interval.outward(math.log(iv.lo), math.log(iv.hi))


_FUNCTIONS = {
    'sin': _sin,
    'cos': _cos,
    'tan': _tan,
    'asin': _asin,
    'acos': _acos,
    'atan': _atan,
    'exp': _exp,
    'log': _log,
}


def box_lookup(box, index):
    """Interval for 1-based variable `index` from a sequence or mapping box."""
    if isinstance(box, Mapping):
        return box[index]
    return box[index - 1]


def interval_evaluate(expr, box):
    """
    Sound enclosure of expr over a box. `box` is a sequence of Interval
    indexed by variable-1, or a mapping from variable index to Interval.
    """
    if isinstance(expr, Const):
        return Interval.point(expr.value)
    if isinstance(expr, Var):
        iv = box_lookup(box, expr.index)
        return iv if isinstance(iv, Interval) else Interval(*iv)
    if isinstance(expr, Neg):
        return -interval_evaluate(expr.arg, box)
    if isinstance(expr, Unary):
        return interval_evaluate(expr.arg, box).apply(expr.func)
    if isinstance(expr, Binary):
        left = interval_evaluate(expr.left, box)
        right = interval_evaluate(expr.right, box)
        if expr.op == '+':
            return left + right
        if expr.op == '-':
            return left - right
        if expr.op == '*':
            # t*t is a square, not a product of independent factors
            return left.square() if expr.left == expr.right else left * right
        return left / right
    raise TypeError(f'Unsupported node {expr!r}')
