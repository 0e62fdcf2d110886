import numpy as np

from utils.exceptions import DomainError

from .nodes import Binary, Const, Neg, Unary, Var


def evaluate(expr, x):
    """
    Evaluate `expr` at a state vector `x` (shape (n,)) or at a batch of
    states (shape (N, n)). Variable k reads column k-1.
    """
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    if single:
        points = points[np.newaxis, :]
    needed = max(expr.free_vars, default=0)
    if points.shape[1] < needed:
        raise ValueError(f'Expression uses x{needed} but only {points.shape[1]} entries were given')
    with np.errstate(all='ignore'):
        values = _evaluate(expr, points)
    values = np.broadcast_to(values, (points.shape[0],)).astype(float)
    return float(values[0]) if single else values


def _evaluate(node, points):
    if isinstance(node, Const):
        return np.full(points.shape[0], node.value)
    if isinstance(node, Var):
        return points[:, node.index - 1]
    if isinstance(node, Neg):
        return -_evaluate(node.arg, points)
    if isinstance(node, Unary):
        return _apply(node.func, _evaluate(node.arg, points))
    left = _evaluate(node.left, points)
    right = _evaluate(node.right, points)
    if node.op == '+':
        return left + right
    if node.op == '-':
        return left - right
    if node.op == '*':
        return left * right
    if np.any(right == 0):
        raise DomainError('Division by zero')
    return left / right


def _apply(func, arg):
    if func == 'log':
        if np.any(arg <= 0):
            raise DomainError('log of a non-positive value')
        return np.log(arg)
    if func in ('asin', 'acos'):
        if np.any(np.abs(arg) > 1):
            raise DomainError(f'{func} argument outside [-1, 1]')
        return np.arcsin(arg) if func == 'asin' else np.arccos(arg)
    if func == 'tan':
        if np.any(np.cos(arg) == 0):
            raise DomainError('tan at a pole')
        return np.tan(arg)
    return {
        'sin': np.sin,
        'cos': np.cos,
        'atan': np.arctan,
        'exp': np.exp,
    }[func](arg)
