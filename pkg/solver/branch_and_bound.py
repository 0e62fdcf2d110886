"""
Best-first branch and bound over the simplex relaxation.
"""
import heapq
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from milp.model import MAXIMIZE
from utils.conf import verifier_settings
from utils.exceptions import SolverError

from .simplex import INFEASIBLE, UNBOUNDED, solve_lp

logger = logging.getLogger(__name__)

OPTIMAL = 'optimal'
INFEASIBLE_STATUS = INFEASIBLE
TIME_LIMIT = 'time-limit'

INTEGRALITY_TOL = 1e-6


@dataclass
class MilpResult:
    """
    `objective` is the incumbent value and `bound` the best proven bound,
    both in the objective's own sense: for a maximisation the bound is an
    upper bound on the optimum, for a minimisation a lower bound.
    """
    status: str
    objective: float = None
    bound: float = None
    gap: float = None
    x: np.ndarray = None
    nodes: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL

    def outer_value(self):
        """The best bound, which is safe to use in place of the optimum."""
        if self.status == INFEASIBLE_STATUS:
            raise SolverError("An infeasible solve has no bound")
        if self.bound is None or not math.isfinite(self.bound):
            raise SolverError(f'Solve ended with status {self.status!r} and no usable bound')
        return self.bound


def relative_gap(incumbent, bound):
    if incumbent is None or not math.isfinite(incumbent):
        return math.inf
    return abs(incumbent - bound) / max(1.0, abs(incumbent))


def solve_milp(model, objective=None, time_limit=None, mip_gap=None, max_pivots=None):
    """
    Maximise or minimise `objective` (default: the model's own) over the
    model. Branches on the most fractional binary, lowest index on ties,
    and stops when the relative gap drops to `mip_gap` or the tree is
    exhausted. On timeout the incumbent (possibly None) is returned with
    the best bound over the open nodes.
    """
    objective = objective or model.objective
    time_limit = time_limit if time_limit is not None else verifier_settings.SOLVER['TIME_LIMIT_S']
    mip_gap = mip_gap if mip_gap is not None else verifier_settings.SOLVER['MIP_GAP']
    sign = -1.0 if objective.sense == MAXIMIZE else 1.0
    binaries = np.array(model.binary_indices, dtype=int)
    started = time.monotonic()

    def to_sense(value):
        return None if value is None else sign * value

    root_lb, root_ub = model.bounds()
    incumbent, best_x = math.inf, None
    closed = math.inf
    heap = [(-math.inf, 0, root_lb, root_ub)]
    counter = 1
    nodes = 0
    while heap:
        bound, _, lb, ub = heapq.heappop(heap)
        if bound >= incumbent - _tolerance(incumbent, mip_gap):
            closed = min(closed, bound)
            continue
        if nodes and time.monotonic() - started > time_limit:
            open_bound = min([bound, closed] + [node[0] for node in heap])
            logger.warning('MILP %s stopped at the %.1fs time limit after %d nodes', model.name, time_limit, nodes)
            result_bound = min(open_bound, incumbent)
            return MilpResult(TIME_LIMIT, to_sense(_finite(incumbent)), to_sense(result_bound),
                              relative_gap(_finite(incumbent), result_bound), best_x, nodes)
        nodes += 1
        relaxation = solve_lp(model, objective, bounds=(lb, ub), max_pivots=max_pivots)
        if relaxation.status == INFEASIBLE:
            continue
        if relaxation.status == UNBOUNDED:
            raise SolverError(f'LP relaxation of {model.name} is unbounded')
        value = sign * relaxation.objective
        if value >= incumbent - _tolerance(incumbent, mip_gap):
            closed = min(closed, value)
            continue
        x = relaxation.x
        if binaries.size:
            fractional = np.abs(x[binaries] - np.round(x[binaries]))
            candidates = np.flatnonzero(fractional > INTEGRALITY_TOL)
        else:
            candidates = np.array([], dtype=int)
        if candidates.size == 0:
            incumbent, best_x = value, x.copy()
            if binaries.size:
                best_x[binaries] = np.round(best_x[binaries])
            logger.debug('MILP %s: incumbent %.9g at node %d', model.name, sign * value, nodes)
            continue
        # closest to one half, ties by lowest variable index
        distance = np.abs(x[binaries[candidates]] - 0.5)
        branch = binaries[candidates[np.argmin(distance)]]
        for fixed in (0.0, 1.0):
            child_lb, child_ub = lb.copy(), ub.copy()
            child_lb[branch] = child_ub[branch] = fixed
            heapq.heappush(heap, (value, counter, child_lb, child_ub))
            counter += 1

    if best_x is None:
        logger.debug('MILP %s infeasible after %d nodes', model.name, nodes)
        return MilpResult(INFEASIBLE_STATUS, nodes=nodes)
    logger.debug('MILP %s optimal %.9g after %d nodes', model.name, sign * incumbent, nodes)
    bound = min(incumbent, closed)
    return MilpResult(OPTIMAL, to_sense(incumbent), to_sense(bound), relative_gap(incumbent, bound), best_x, nodes)


def _tolerance(incumbent, mip_gap):
    if not math.isfinite(incumbent):
        return 0.0
    return mip_gap * max(1.0, abs(incumbent))


def _finite(value):
    return value if math.isfinite(value) else None
