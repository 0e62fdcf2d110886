"""
In-memory mixed-integer linear program.

Encoders add variables and constraints through the builder methods; solvers
read the dense form from `to_arrays`. Objectives are passed to the solvers
separately so that one frozen model can back many objective variants.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from utils.exceptions import ModelError

LE = '<='
GE = '>='
EQ = '='
SENSES = (LE, GE, EQ)

MAXIMIZE = 'max'
MINIMIZE = 'min'


@dataclass
class Variable:
    index: int
    name: str
    lb: float
    ub: float
    binary: bool = False


@dataclass
class Constraint:
    terms: dict
    sense: str
    rhs: float
    name: str = None


@dataclass
class Objective:
    terms: dict = field(default_factory=dict)
    sense: str = MAXIMIZE
    constant: float = 0.0

    def __post_init__(self):
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ModelError(f'Unknown objective sense {self.sense!r}')


class MilpModel:
    def __init__(self, name='model'):
        self.name = name
        self.variables = []
        self.constraints = []
        self.objective = None
        self._by_name = {}
        self._frozen = False

    def __repr__(self):
        return (f'MilpModel({self.name!r}, {len(self.variables)} variables, '
                f'{self.num_binaries} binaries, {len(self.constraints)} constraints)')

    @property
    def num_binaries(self):
        return sum(1 for v in self.variables if v.binary)

    @property
    def binary_indices(self):
        return [v.index for v in self.variables if v.binary]

    def _check_mutable(self):
        if self._frozen:
            raise ModelError(f'Model {self.name!r} is frozen')

    def freeze(self):
        self._frozen = True
        return self

    @property
    def frozen(self):
        return self._frozen

    def add_variable(self, name, lb=0.0, ub=math.inf, binary=False):
        self._check_mutable()
        if name in self._by_name:
            raise ModelError(f'Duplicate variable name {name!r}')
        if binary:
            lb, ub = max(0.0, lb), min(1.0, ub)
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f'Variable {name!r} has empty bounds [{lb}, {ub}]')
        var = Variable(len(self.variables), name, lb, ub, binary)
        self.variables.append(var)
        self._by_name[name] = var.index
        return var.index

    def add_binary(self, name):
        return self.add_variable(name, 0.0, 1.0, binary=True)

    def fixed(self, name, value):
        return self.add_variable(name, value, value)

    def index(self, ref):
        """Variable index for a name or an index."""
        if isinstance(ref, str):
            try:
                return self._by_name[ref]
            except KeyError:
                raise ModelError(f'Unknown variable {ref!r}') from None
        ref = int(ref)
        if not 0 <= ref < len(self.variables):
            raise ModelError(f'Variable index {ref} out of range')
        return ref

    def has_variable(self, name):
        return name in self._by_name

    def _normalise_terms(self, terms):
        merged = {}
        for ref, coef in dict(terms).items():
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelError(f'Non-finite coefficient {coef} on {ref!r}')
            idx = self.index(ref)
            merged[idx] = merged.get(idx, 0.0) + coef
        return {idx: coef for idx, coef in merged.items() if coef != 0.0}

    def add_constraint(self, terms, sense, rhs, name=None):
        self._check_mutable()
        if sense not in SENSES:
            raise ModelError(f'Unknown constraint sense {sense!r}')
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError(f'Non-finite right-hand side in constraint {name!r}')
        constraint = Constraint(self._normalise_terms(terms), sense, rhs, name)
        self.constraints.append(constraint)
        return len(self.constraints) - 1

    def set_bounds(self, ref, lb=None, ub=None):
        self._check_mutable()
        var = self.variables[self.index(ref)]
        var.lb = var.lb if lb is None else float(lb)
        var.ub = var.ub if ub is None else float(ub)
        if var.lb > var.ub:
            raise ModelError(f'Variable {var.name!r} has empty bounds [{var.lb}, {var.ub}]')

    def set_objective(self, terms, sense=MAXIMIZE, constant=0.0):
        self.objective = self.make_objective(terms, sense, constant)
        return self.objective

    def make_objective(self, terms, sense=MAXIMIZE, constant=0.0):
        return Objective(self._normalise_terms(terms), sense, float(constant))

    def bounds(self):
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def to_arrays(self):
        """Dense (A_ub, b_ub, A_eq, b_eq) with >= rows negated into <= rows."""
        n = len(self.variables)
        rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
        for constraint in self.constraints:
            row = np.zeros(n)
            for idx, coef in constraint.terms.items():
                row[idx] = coef
            if constraint.sense == EQ:
                rows_eq.append(row)
                rhs_eq.append(constraint.rhs)
            elif constraint.sense == LE:
                rows_ub.append(row)
                rhs_ub.append(constraint.rhs)
            else:
                rows_ub.append(-row)
                rhs_ub.append(-constraint.rhs)
        a_ub = np.array(rows_ub).reshape(-1, n)
        a_eq = np.array(rows_eq).reshape(-1, n)
        return a_ub, np.array(rhs_ub, dtype=float), a_eq, np.array(rhs_eq, dtype=float)

    def objective_vector(self, objective=None):
        objective = objective or self.objective
        if objective is None:
            raise ModelError('No objective given')
        c = np.zeros(len(self.variables))
        for idx, coef in objective.terms.items():
            c[idx] = coef
        return c

    def check_assignment(self, x, tol=1e-7):
        """Largest bound or constraint violation of an assignment."""
        x = np.asarray(x, dtype=float)
        lb, ub = self.bounds()
        worst = float(np.max(np.concatenate([[0.0], lb - x, x - ub])))
        for constraint in self.constraints:
            lhs = sum(coef * x[idx] for idx, coef in constraint.terms.items())
            if constraint.sense == LE:
                worst = max(worst, lhs - constraint.rhs)
            elif constraint.sense == GE:
                worst = max(worst, constraint.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - constraint.rhs))
        return worst
