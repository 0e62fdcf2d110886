"""
Symbolic differentiation and sign-change isolation for univariate
expressions.
"""
import logging
from dataclasses import dataclass, field

from utils.exceptions import DomainError, RootIsolationError

from .evaluation import evaluate
from .intervals import Interval, interval_evaluate
from .nodes import Binary, Const, Neg, Unary, Var

logger = logging.getLogger(__name__)

ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary('+', a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary('-', a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary('*', a, b)


def div(a, b):
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary('/', a, b)


def neg(a):
    if _is_const(a):
        return Const(-a.value)
    return Neg(a)


def differentiate(expr, var):
    """
    d(expr)/d(x_var) with the standard rules. Only constant folding and
    identity elimination (+0, *1, *0) are applied to the result.
    """
    if isinstance(expr, Const):
        return ZERO
    if isinstance(expr, Var):
        return ONE if expr.index == var else ZERO
    if isinstance(expr, Neg):
        return neg(differentiate(expr.arg, var))
    if isinstance(expr, Binary):
        a, b = expr.left, expr.right
        da, db = differentiate(a, var), differentiate(b, var)
        if expr.op == '+':
            return add(da, db)
        if expr.op == '-':
            return sub(da, db)
        if expr.op == '*':
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), mul(b, b))
    if isinstance(expr, Unary):
        inner = differentiate(expr.arg, var)
        if _is_const(inner, 0.0):
            return ZERO
        return mul(_outer_derivative(expr.func, expr.arg), inner)
    raise TypeError(f'Unsupported node {expr!r}')


def _outer_derivative(func, u):
    if func == 'sin':
        return Unary('cos', u)
    if func == 'cos':
        return Neg(Unary('sin', u))
    if func == 'tan':
        return div(ONE, mul(Unary('cos', u), Unary('cos', u)))
    if func == 'exp':
        return Unary('exp', u)
    if func == 'log':
        return div(ONE, u)
    if func == 'atan':
        return div(ONE, add(ONE, mul(u, u)))
    # 1/sqrt(1 - u^2) written as exp(-0.5 * log(1 - u^2))
    inv_sqrt = Unary('exp', mul(Const(-0.5), Unary('log', sub(ONE, mul(u, u)))))
    if func == 'asin':
        return inv_sqrt
    if func == 'acos':
        return Neg(inv_sqrt)
    raise TypeError(f'Unsupported function {func!r}')


@dataclass
class SignChanges:
    roots: list = field(default_factory=list)
    identically_zero: bool = False


def find_sign_changes(expr, iv, tol=1e-10, max_boxes=200_000):
    """
    Isolate the zeros of a univariate expression on `iv` by interval
    subdivision followed by bisection.

    Boxes on which the interval image excludes zero are discarded; the rest
    are split until narrower than `tol`. Adjacent surviving boxes are
    clustered and each cluster yields one root. Clusters without a sign
    change are kept as roots only when the expression is numerically zero
    at their midpoint.
    """
    if len(expr.free_vars) > 1:
        raise ValueError('find_sign_changes needs a univariate expression')
    if not isinstance(iv, Interval):
        iv = Interval(*iv)
    var = expr.free_vars[0] if expr.free_vars else 1

    def at(x):
        return evaluate(expr, _state(var, x))

    def image(sub_iv):
        return interval_evaluate(expr, {var: sub_iv})

    try:
        whole = image(iv)
    except DomainError:
        # undefined somewhere on the enclosure; subdivision narrows it down
        whole = None
    if whole is not None and whole.is_zero:
        return SignChanges(identically_zero=True)
    if whole is not None and not whole.contains_zero():
        return SignChanges()

    scale = 1.0 + max(abs(at(iv.lo)), abs(at(iv.hi)), abs(at(iv.midpoint)))
    candidates = []
    zero_boxes = 0
    definite_boxes = 0
    stack = [iv]
    processed = 0
    while stack:
        processed += 1
        if processed > max_boxes:
            raise RootIsolationError(
                f'Root isolation of {expr} on {iv!r} exceeded {max_boxes} boxes; increase tol'
            )
        box = stack.pop()
        try:
            value = image(box)
        except DomainError:
            value = Interval(-1.0, 1.0)
        if value.is_zero:
            zero_boxes += 1
            candidates.append(box)
            continue
        if not value.contains_zero():
            definite_boxes += 1
            continue
        if box.width <= tol:
            candidates.append(box)
            continue
        left, right = box.split()
        stack.append(right)
        stack.append(left)

    if definite_boxes == 0 and zero_boxes > 0 and zero_boxes == len(candidates):
        return SignChanges(identically_zero=True)

    roots = []
    for lo, hi in _clusters(candidates, tol):
        root = _refine(at, lo, hi, tol)
        if root is None:
            mid = 0.5 * (lo + hi)
            if abs(at(mid)) <= 1e-6 * scale:
                root = mid
        if root is not None and iv.lo < root < iv.hi:
            roots.append(root)
    logger.debug('Isolated %d roots of %s on %r', len(roots), expr, iv)
    return SignChanges(roots=sorted(roots))


def _state(var, x):
    state = [0.0] * var
    state[var - 1] = x
    return state


def _clusters(boxes, tol):
    boxes = sorted(boxes, key=lambda b: b.lo)
    merged = []
    for box in boxes:
        if merged and box.lo <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], box.hi)
        else:
            merged.append([box.lo, box.hi])
    return [tuple(c) for c in merged]


def _refine(at, lo, hi, tol):
    """Bisect a sign change inside [lo, hi]; None when the ends agree in sign."""
    try:
        f_lo, f_hi = at(lo), at(hi)
    except DomainError:
        return None
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo < 0) == (f_hi < 0):
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = at(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
