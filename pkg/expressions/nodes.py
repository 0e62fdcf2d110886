"""
Expression nodes for transition functions.

Nodes are frozen dataclasses, so structural equality and hashing come for
free and trees can be shared across threads.
"""
from dataclasses import dataclass
from functools import cached_property

FUNCTIONS = ('sin', 'cos', 'tan', 'asin', 'acos', 'atan', 'exp', 'log')
FUNCTION_ALIASES = {'arcsin': 'asin', 'arccos': 'acos', 'arctan': 'atan'}
OPERATORS = ('+', '-', '*', '/')


class Expr:
    """Base class; subclasses define `children`."""

    children = ()

    @cached_property
    def free_vars(self):
        """Sorted tuple of 1-based variable indices used by the expression."""
        found = set()
        for child in self.children:
            found.update(child.free_vars)
        return tuple(sorted(found))

    @property
    def is_univariate(self):
        return len(self.free_vars) <= 1

    def __str__(self):
        from .parser import to_source
        return to_source(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, 'value', float(self.value))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    @cached_property
    def free_vars(self):
        return (self.index,)


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    func: str
    arg: Expr

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f'Unknown function {self.func!r}')

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f'Unknown operator {self.op!r}')

    @property
    def children(self):
        return (self.left, self.right)


def walk(expr):
    """Yield every node of the tree, parents before children."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def depth(expr):
    if not expr.children:
        return 1
    return 1 + max(depth(child) for child in expr.children)
