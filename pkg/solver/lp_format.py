"""
CPLEX LP text export.
"""
import math

from milp.model import EQ, GE, LE, MAXIMIZE

TERMS_PER_LINE = 8

_SENSE_TEXT = {LE: '<=', GE: '>=', EQ: '='}


def format_number(value):
    return '%.17g' % value


def _bound_text(value):
    if math.isinf(value):
        return '+inf' if value > 0 else '-inf'
    return format_number(value)


def _linear(terms, names):
    parts = []
    for index in sorted(terms):
        coef = terms[index]
        magnitude = abs(coef)
        body = names[index] if magnitude == 1.0 else f'{format_number(magnitude)} {names[index]}'
        parts.append(('-' if coef < 0 else '+', body))
    if not parts:
        return '0 ' + names[0] if names else '0'
    pieces = [('- ' if parts[0][0] == '-' else '') + parts[0][1]]
    pieces.extend(f'{sign} {body}' for sign, body in parts[1:])
    lines = [' '.join(pieces[i:i + TERMS_PER_LINE]) for i in range(0, len(pieces), TERMS_PER_LINE)]
    return '\n   '.join(lines)


def export_lp_text(model, objective=None):
    """
    The model in CPLEX LP format: variables in declaration order,
    coefficients with 17 significant digits, unnamed constraints called
    c1, c2, ... by position. The objective constant is left out; solvers
    add it back after reading the solution.
    """
    objective = objective or model.objective
    names = [v.name for v in model.variables]
    lines = [f'\\ Model {model.name}']
    lines.append('Maximize' if objective is not None and objective.sense == MAXIMIZE else 'Minimize')
    terms = objective.terms if objective is not None else {}
    lines.append(f' obj: {_linear(terms, names)}' if terms else ' obj:')
    lines.append('Subject To')
    for position, constraint in enumerate(model.constraints, start=1):
        name = constraint.name or f'c{position}'
        body = _linear(constraint.terms, names)
        lines.append(f' {name}: {body} {_SENSE_TEXT[constraint.sense]} {format_number(constraint.rhs)}')
    continuous = [v for v in model.variables if not v.binary]
    if continuous:
        lines.append('Bounds')
        for var in continuous:
            if var.lb == var.ub:
                lines.append(f' {var.name} = {format_number(var.lb)}')
            elif math.isinf(var.lb) and math.isinf(var.ub):
                lines.append(f' {var.name} free')
            else:
                lines.append(f' {_bound_text(var.lb)} <= {var.name} <= {_bound_text(var.ub)}')
    binaries = [v.name for v in model.variables if v.binary]
    if binaries:
        lines.append('Binaries')
        lines.extend(f' {name}' for name in binaries)
    lines.append('End')
    return '\n'.join(lines) + '\n'
