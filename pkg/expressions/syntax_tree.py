from dataclasses import dataclass

from .nodes import Binary, Neg, Unary


@dataclass(frozen=True)
class SyntaxTree:
    """
    Decomposition of an expression into univariate leaves joined by
    operators. Leaves have op None; internal nodes carry one of
    '+', '-', '*', '/', 'neg' or, for an elementary function applied to a
    multivariate argument, the function name (which bounding rejects).
    """
    func: object
    op: str = None
    children: tuple = ()

    def get_func(self):
        return self.func

    def get_op(self):
        return self.op

    def get_arity(self):
        return len(self.children)

    @property
    def is_leaf(self):
        return self.op is None

    @property
    def variable(self):
        """The single variable of a leaf, or None for a constant leaf."""
        free = self.func.free_vars
        return free[0] if free else None

    def leaves(self):
        if self.is_leaf:
            return [self]
        found = []
        for child in self.children:
            found.extend(child.leaves())
        return found

    def reassemble(self):
        if self.is_leaf:
            return self.func
        parts = [child.reassemble() for child in self.children]
        if self.op == 'neg':
            return Neg(parts[0])
        if self.op in ('+', '-', '*', '/'):
            node = parts[0]
            for part in parts[1:]:
                node = Binary(self.op, node, part)
            return node
        return Unary(self.op, parts[0])


def decompose_to_syntax_tree(expr):
    """
    Collapse maximal univariate subtrees into leaves. Left-nested chains of
    one operator become a single n-ary node whose children fold left.
    """
    if len(expr.free_vars) <= 1:
        return SyntaxTree(expr)
    if isinstance(expr, Neg):
        return SyntaxTree(expr, 'neg', (decompose_to_syntax_tree(expr.arg),))
    if isinstance(expr, Unary):
        return SyntaxTree(expr, expr.func, (decompose_to_syntax_tree(expr.arg),))
    operands = []
    node = expr
    while isinstance(node, Binary) and node.op == expr.op and len(node.free_vars) > 1:
        operands.append(node.right)
        node = node.left
    operands.append(node)
    operands.reverse()
    return SyntaxTree(expr, expr.op, tuple(decompose_to_syntax_tree(o) for o in operands))
