"""
Random expression generation for fuzzing bounds and solvers.
"""
from .nodes import Binary, Const, Neg, Unary, Var


def random_expression(rng, depth, variables=(1,), functions=('sin', 'cos', 'exp'),
                      operators=('+', '-', '*'), constant_range=(-2.0, 2.0), negation=True,
                      denominator_offset=None):
    """
    Build a random tree of at most `depth` levels over `variables`.

    `rng` is a numpy Generator; constants are rounded to three decimals so
    printed sources stay short. With `denominator_offset` set, every divisor
    has the form c + exp(g) with c drawn from that range and g univariate,
    so it stays above c.
    """
    def build(depth, variables, operators):
        if depth <= 1 or rng.random() < 0.25:
            if rng.random() < 0.75:
                return Var(int(rng.choice(variables)))
            return Const(round(float(rng.uniform(*constant_range)), 3))
        roll = rng.random()
        if functions and roll < 0.35:
            return Unary(str(rng.choice(functions)), build(depth - 1, variables, operators))
        if negation and roll < 0.42:
            return Neg(build(depth - 1, variables, operators))
        op = str(rng.choice(operators))
        left = build(depth - 1, variables, operators)
        if op != '/' or denominator_offset is None:
            return Binary(op, left, build(depth - 1, variables, operators))
        inner = build(depth - 2, (int(rng.choice(variables)),), tuple(o for o in operators if o != '/'))
        offset = round(float(rng.uniform(*denominator_offset)), 3)
        return Binary('/', left, Binary('+', Const(offset), Unary('exp', inner)))

    return build(depth, variables, operators)


def random_box(rng, variables, max_width=2.0, center_range=(-1.0, 1.0)):
    """Random box as a {variable: (lo, hi)} mapping with widths in (0.05, max_width]."""
    box = {}
    for var in variables:
        center = rng.uniform(*center_range)
        width = rng.uniform(0.05, max_width)
        box[var] = (center - width / 2, center + width / 2)
    return box
