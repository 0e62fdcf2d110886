"""
Recursive-descent parser and printer for the dynamics grammar:

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := number | var | func "(" expr ")" | "(" expr ")" | "-" factor
    var    := "x" digit+

Identifiers other than variables and functions resolve through an optional
constants mapping (config-declared names such as c1, c2).
"""
import re

from utils.exceptions import ExpressionSyntaxError

from .nodes import FUNCTION_ALIASES, FUNCTIONS, Binary, Const, Neg, Unary, Var

TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/()])
''', re.VERBOSE)

VAR_RE = re.compile(r'x(\d+)')


def tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        match = TOKEN_RE.match(source, pos)
        if match is None:
            raise ExpressionSyntaxError(f'Unexpected character {source[pos]!r}', pos)
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append((kind, match.group(), pos))
        pos = match.end()
    tokens.append(('end', '', len(source)))
    return tokens


class Parser:
    def __init__(self, source, constants=None):
        self.source = source
        self.tokens = tokenize(source)
        self.constants = dict(constants or {})
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text):
        kind, value, pos = self.current
        if value != text or kind == 'end':
            found = 'end of input' if kind == 'end' else repr(value)
            raise ExpressionSyntaxError(f'Expected {text!r}, found {found}', pos)
        return self.advance()

    def parse(self):
        if self.current[0] == 'end':
            raise ExpressionSyntaxError('Empty expression', 0)
        node = self.expr()
        kind, value, pos = self.current
        if kind != 'end':
            raise ExpressionSyntaxError(f'Unexpected {value!r}', pos)
        return node

    def expr(self):
        node = self.term()
        while self.current[1] in ('+', '-') and self.current[0] == 'op':
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.current[1] in ('*', '/') and self.current[0] == 'op':
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        kind, value, pos = self.current
        if kind == 'op' and value == '-':
            self.advance()
            if self.current[0] == 'number':
                return Const(-float(self.advance()[1]))
            return Neg(self.factor())
        if kind == 'op' and value == '(':
            self.advance()
            node = self.expr()
            self.expect(')')
            return node
        if kind == 'number':
            self.advance()
            return Const(float(value))
        if kind == 'name':
            return self.name()
        if kind == 'end':
            raise ExpressionSyntaxError('Unexpected end of input', pos)
        raise ExpressionSyntaxError(f'Unexpected {value!r}', pos)

    def name(self):
        _, value, pos = self.advance()
        var = VAR_RE.fullmatch(value)
        if var:
            index = int(var.group(1))
            if index == 0:
                raise ExpressionSyntaxError('Variable index must be at least 1', pos)
            if self.source[pos + len(value):pos + len(value) + 1] == '.':
                raise ExpressionSyntaxError('Variable index must be an integer', pos)
            return Var(index)
        func = FUNCTION_ALIASES.get(value, value)
        if func in FUNCTIONS:
            self.expect('(')
            arg = self.expr()
            self.expect(')')
            return Unary(func, arg)
        if value in self.constants:
            return Const(self.constants[value])
        if self.current[1] == '(':
            raise ExpressionSyntaxError(f'Unknown function {value!r}', pos)
        raise ExpressionSyntaxError(f'Unknown name {value!r}', pos)


def parse(source, constants=None):
    """
    Parse `source` into an expression tree.
    """
    return Parser(source, constants).parse()


PRECEDENCE = {'+': 1, '-': 1, '*': 2, '/': 2}


def to_source(expr):
    """Print an expression so that parse(to_source(e)) == e."""
    if isinstance(expr, Const):
        return repr(expr.value)
    if isinstance(expr, Var):
        return f'x{expr.index}'
    if isinstance(expr, Unary):
        return f'{expr.func}({to_source(expr.arg)})'
    if isinstance(expr, Neg):
        inner = to_source(expr.arg)
        if isinstance(expr.arg, (Binary, Neg)) or (isinstance(expr.arg, Const) and expr.arg.value >= 0):
            inner = f'({inner})'
        return f'-{inner}'
    left = to_source(expr.left)
    right = to_source(expr.right)
    if isinstance(expr.left, Binary) and PRECEDENCE[expr.left.op] < PRECEDENCE[expr.op]:
        left = f'({left})'
    if isinstance(expr.right, Binary) and PRECEDENCE[expr.right.op] <= PRECEDENCE[expr.op]:
        right = f'({right})'
    if _is_negative_literal(expr.right):
        right = f'({right})'
    return f'{left} {expr.op} {right}'


def _is_negative_literal(expr):
    return isinstance(expr, Const) and (expr.value < 0 or repr(expr.value).startswith('-'))
