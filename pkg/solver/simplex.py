"""
Dense two-phase primal simplex for the LP relaxations of MilpModel.

The model is rewritten in standard form (min c.z, A z = b, z >= 0, b >= 0)
by shifting finite lower bounds to zero, mirroring variables with only an
upper bound, splitting free variables and adding slack columns. Rows and
columns are equilibrated by their largest absolute entry before pivoting.
Pricing is Dantzig's rule until 10 * rows consecutive degenerate pivots
have been made; after that Bland's rule takes over for the rest of the
solve.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from milp.model import MAXIMIZE
from utils.conf import verifier_settings
from utils.exceptions import SolverError

logger = logging.getLogger(__name__)

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'
ITERATION_LIMIT = 'iteration-limit'

OPTIMALITY_TOL = 1e-9
FEASIBILITY_TOL = 1e-7
PIVOT_TOL = 1e-11


@dataclass
class LpSolution:
    status: str
    objective: float = None
    x: np.ndarray = None
    standard_x: np.ndarray = None
    reduced_costs: np.ndarray = None
    pivots: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL


@dataclass
class StandardForm:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    transform: np.ndarray
    offsets: np.ndarray


def standard_form(c, a_ub, b_ub, a_eq, b_eq, lb, ub):
    """x = offsets + transform @ z with z >= 0 the standard-form columns."""
    n = len(c)
    columns = []
    offsets = np.zeros(n)
    upper_rows = []
    for i in range(n):
        lo, hi = lb[i], ub[i]
        if math.isfinite(lo) and math.isfinite(hi) and lo == hi:
            offsets[i] = lo
        elif math.isfinite(lo):
            offsets[i] = lo
            columns.append((i, 1.0))
            if math.isfinite(hi):
                upper_rows.append((len(columns) - 1, hi - lo))
        elif math.isfinite(hi):
            offsets[i] = hi
            columns.append((i, -1.0))
        else:
            columns.append((i, 1.0))
            columns.append((i, -1.0))
    transform = np.zeros((n, len(columns)))
    for col, (i, sign) in enumerate(columns):
        transform[i, col] = sign

    a_ub_z = a_ub @ transform
    b_ub_z = b_ub - a_ub @ offsets
    bound_rows = np.zeros((len(upper_rows), len(columns)))
    for row, (col, width) in enumerate(upper_rows):
        bound_rows[row, col] = 1.0
    a_ub_z = np.vstack([a_ub_z, bound_rows])
    b_ub_z = np.concatenate([b_ub_z, [w for _, w in upper_rows]])
    a_eq_z = a_eq @ transform
    b_eq_z = b_eq - a_eq @ offsets

    m_ub, m_eq = len(b_ub_z), len(b_eq_z)
    a = np.zeros((m_ub + m_eq, len(columns) + m_ub))
    a[:m_ub, :len(columns)] = a_ub_z
    a[:m_ub, len(columns):] = np.eye(m_ub)
    a[m_ub:, :len(columns)] = a_eq_z
    b = np.concatenate([b_ub_z, b_eq_z])
    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0
    c_z = np.concatenate([transform.T @ c, np.zeros(m_ub)])
    full_transform = np.hstack([transform, np.zeros((n, m_ub))])
    return StandardForm(a, b, c_z, full_transform, offsets)


def _equilibrate(a):
    row_max = np.max(np.abs(a), axis=1, initial=0.0)
    row_scale = np.where(row_max > 0, 1.0 / np.where(row_max > 0, row_max, 1.0), 1.0)
    scaled = a * row_scale[:, None]
    col_max = np.max(np.abs(scaled), axis=0, initial=0.0)
    col_scale = np.where(col_max > 0, 1.0 / np.where(col_max > 0, col_max, 1.0), 1.0)
    return row_scale, col_scale


class Tableau:
    """Dense tableau; the last row holds reduced costs and the last column the right-hand side."""

    def __init__(self, table, basis, max_pivots, pivots=0):
        self.table = table
        self.basis = basis
        self.max_pivots = max_pivots
        self.pivots = pivots

    @property
    def rows(self):
        return self.table.shape[0] - 1

    def pivot(self, row, col):
        table = self.table
        table[row] /= table[row, col]
        factors = table[:, col].copy()
        factors[row] = 0.0
        table -= np.outer(factors, table[row])
        self.basis[row] = col
        self.pivots += 1

    def run(self, columns):
        """Iterate to optimality over the first `columns` columns."""
        degenerate = 0
        bland = False
        m = self.rows
        while True:
            costs = self.table[-1, :columns]
            candidates = np.flatnonzero(costs < -OPTIMALITY_TOL)
            if candidates.size == 0:
                return OPTIMAL
            if self.pivots >= self.max_pivots:
                return ITERATION_LIMIT
            enter = candidates[0] if bland else candidates[np.argmin(costs[candidates])]
            column = self.table[:m, enter]
            positive = column > PIVOT_TOL
            if not np.any(positive):
                return UNBOUNDED
            ratios = np.full(m, np.inf)
            ratios[positive] = self.table[:m, -1][positive] / column[positive]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))
            leave = ties[np.argmin(self.basis[ties])]
            if best <= 1e-12:
                degenerate += 1
                if degenerate > 10 * m and not bland:
                    logger.debug('Switching to Bland pricing after %d degenerate pivots', degenerate)
                    bland = True
            else:
                degenerate = 0
            self.pivot(leave, enter)


def solve_lp(model, objective=None, bounds=None, max_pivots=None):
    """
    Solve the LP relaxation of `model` (binaries relaxed to [0, 1]).

    `bounds` optionally replaces the model's (lb, ub) arrays, which is how
    branch and bound fixes binaries. Returns an LpSolution; `x` and the
    objective are in the model's own variables and sense, `standard_x`
    and `reduced_costs` refer to the standard-form minimisation.
    """
    objective = objective or model.objective
    max_pivots = max_pivots or verifier_settings.SOLVER['MAX_PIVOTS']
    c = model.objective_vector(objective)
    if objective.sense == MAXIMIZE:
        c = -c
    lb, ub = bounds if bounds is not None else model.bounds()
    if np.any(lb > ub + FEASIBILITY_TOL):
        return LpSolution(INFEASIBLE)
    a_ub, b_ub, a_eq, b_eq = model.to_arrays()
    form = standard_form(c, a_ub, b_ub, a_eq, b_eq, lb, ub)
    return _solve_standard(form, model, objective, max_pivots)


def _solve_standard(form, model, objective, max_pivots):
    m, n_std = form.a.shape
    if m == 0:
        if np.any(form.c < -OPTIMALITY_TOL):
            return LpSolution(UNBOUNDED)
        z = np.zeros(n_std)
        return _finish(form, model, objective, z, form.c.copy(), 0)

    row_scale, col_scale = _equilibrate(form.a)
    a = form.a * row_scale[:, None] * col_scale[None, :]
    b = form.b * row_scale
    c = form.c * col_scale

    # phase one: one artificial per row
    table = np.zeros((m + 1, n_std + m + 1))
    table[:m, :n_std] = a
    table[:m, n_std:n_std + m] = np.eye(m)
    table[:m, -1] = b
    table[-1, :n_std] = -a.sum(axis=0)
    table[-1, -1] = -b.sum()
    tableau = Tableau(table, np.arange(n_std, n_std + m), max_pivots)
    status = tableau.run(n_std + m)
    if status == ITERATION_LIMIT:
        raise SolverError(f'Simplex hit the iteration limit of {max_pivots} pivots in phase one')
    infeasibility = -tableau.table[-1, -1]
    if infeasibility > FEASIBILITY_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        return LpSolution(INFEASIBLE, pivots=tableau.pivots)

    keep = []
    for row in range(m):
        if tableau.basis[row] < n_std:
            keep.append(row)
            continue
        candidates = np.flatnonzero(np.abs(tableau.table[row, :n_std]) > PIVOT_TOL)
        if candidates.size:
            tableau.pivot(row, candidates[0])
            keep.append(row)
    table = np.vstack([tableau.table[keep][:, list(range(n_std)) + [-1]], np.zeros((1, n_std + 1))])
    basis = tableau.basis[keep]
    table[-1, :n_std] = c - c[basis] @ table[:-1, :n_std]
    table[-1, -1] = -(c[basis] @ table[:-1, -1])
    phase_two = Tableau(table, basis, max_pivots, tableau.pivots)
    status = phase_two.run(n_std)
    if status == ITERATION_LIMIT:
        raise SolverError(f'Simplex hit the iteration limit of {max_pivots} pivots')
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, pivots=phase_two.pivots)
    z_scaled = np.zeros(n_std)
    z_scaled[phase_two.basis] = phase_two.table[:-1, -1]
    z = np.maximum(z_scaled * col_scale, 0.0)
    reduced = phase_two.table[-1, :n_std] / col_scale
    return _finish(form, model, objective, z, reduced, phase_two.pivots)


def _finish(form, model, objective, z, reduced, pivots):
    x = form.offsets + form.transform @ z
    value = float(model.objective_vector(objective) @ x) + objective.constant
    return LpSolution(OPTIMAL, value, x, z, reduced, pivots)
