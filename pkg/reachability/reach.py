"""
Forward reachability: one-step successor boxes from MILP solves (concrete
steps), multi-step symbolic windows, and trajectory assembly.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from enclosures.function_bound import bound_expression
from expressions.intervals import interval_evaluate
from milp.graph import build_step_graph
from milp.networks import propagate_preactivation_bounds
from solver.backends import solve
from solver.branch_and_bound import INFEASIBLE_STATUS
from utils.conf import verifier_settings
from utils.exceptions import InfeasibleModelError, SolverError

from .system import Box, box_volume

logger = logging.getLogger(__name__)

INITIAL = 'initial'
CONCRETE = 'concrete'
SYMBOLIC = 'symbolic'

PREPASS_CONCRETE = 'concrete'
PREPASS_INTERVAL = 'interval'


@dataclass
class ReachOptions:
    """Per-run knobs; anything left as None comes from settings."""
    divisions: int = None
    solver: dict = field(default_factory=dict)
    workers: int = None
    prepass: str = None
    padding: float = None

    def __post_init__(self):
        if self.divisions is None:
            self.divisions = verifier_settings.ENCLOSURE['DIVISIONS']
        if self.workers is None:
            self.workers = verifier_settings.SOLVER['WORKERS']
        if self.prepass is None:
            self.prepass = verifier_settings.REACH['PREPASS']
        if self.padding is None:
            self.padding = verifier_settings.ENCLOSURE['PADDING']
        if self.prepass not in (PREPASS_CONCRETE, PREPASS_INTERVAL):
            raise ValueError(f'Unknown pre-pass {self.prepass!r}')


@dataclass
class StepOutcome:
    box: Box
    gaps: list
    statuses: list


def build_enclosures(spec, box, options):
    """One bounding set per transition function over the padded box."""
    domain = box.padded(options.padding).as_mapping()
    return [bound_expression(f, domain, k=options.divisions) for f in spec.dynamics]


def controller_bounds(spec, box):
    """Interval enclosure of every controller output over the box."""
    network = spec.controller
    final = propagate_preactivation_bounds(network, box.lower, box.upper)[-1]
    lower, upper = final.lower.copy(), final.upper.copy()
    for index, value in network.constant_outputs.items():
        lower[index - 1] = upper[index - 1] = value
    return lower, upper


def interval_step(spec, box):
    """
    Sound but loose successor box by interval arithmetic. Used as
    the symbolic pre-pass and as the fallback when a solve returns no
    usable bound.
    """
    intervals = box.intervals()
    u_lo, u_hi = controller_bounds(spec, box)
    lower, upper = np.empty(spec.n), np.empty(spec.n)
    for i, f in enumerate(spec.dynamics):
        image = interval_evaluate(f, intervals)
        rate_lo = image.lo + u_lo[i] + spec.perturbation.lower[i]
        rate_hi = image.hi + u_hi[i] + spec.perturbation.upper[i]
        lower[i] = box.lower[i] + spec.delta * rate_lo
        upper[i] = box.upper[i] + spec.delta * rate_hi
    return Box(lower, upper).padded(1e-12)


def next_set(spec, box, t=0, history=(), options=None, fallback=None):
    """
    Successor box of `box` at step t.

    With an empty `history` this is a concrete step. Otherwise `history`
    lists (step, box) pairs for the earlier steps of a symbolic window,
    oldest first; their boxes are the enclosure domains, and the returned
    box bounds x at t + 1 as a function of the window's entry state.

    Every dimension is maximised and minimised in its own model; the 2n
    solves run concurrently. A solve that stops early contributes its
    best bound.
    """
    options = options or ReachOptions()
    steps = [s for s, _ in history] + [t]
    boxes = dict(history)
    boxes[t] = box
    enclosures = {s: build_enclosures(spec, b, options) for s, b in boxes.items()}
    _, step_models = build_step_graph(spec, steps, enclosures, boxes)

    jobs = []
    for step_model in step_models:
        jobs.append((step_model, step_model.maximize))
        jobs.append((step_model, step_model.minimize))

    def run(job):
        step_model, objective = job
        return solve(step_model.model, objective, options.solver)

    with ThreadPoolExecutor(max_workers=max(1, options.workers)) as pool:
        results = list(pool.map(run, jobs))

    lower, upper = np.empty(spec.n), np.empty(spec.n)
    gaps, statuses = [], []
    for index, ((step_model, objective), result) in enumerate(zip(jobs, results)):
        i = step_model.dimension - 1
        if result.status == INFEASIBLE_STATUS:
            raise InfeasibleModelError(f'Reach model {step_model.model.name} ({objective.sense}) is infeasible')
        try:
            value = result.outer_value()
        except SolverError:
            fallback = fallback or interval_step(spec, box)
            value = fallback.upper[i] if index % 2 == 0 else fallback.lower[i]
            logger.warning('No bound from %s (%s); using the interval bound %.9g',
                           step_model.model.name, objective.sense, value)
        if index % 2 == 0:
            upper[i] = value
        else:
            lower[i] = value
        gaps.append(result.gap if result.gap is not None else float('inf'))
        statuses.append(result.status)
    successor = Box(np.minimum(lower, upper), np.maximum(lower, upper)).padded(options.padding)
    return StepOutcome(successor, gaps, statuses)


def make_schedule(horizon, symbolic_window=0):
    """
    Windows of consecutive steps covering 0..horizon-1. Width 0 or 1 is all
    concrete; wider windows are symbolic, stitched end to end.
    """
    width = max(1, int(symbolic_window))
    return [list(range(start, min(start + width, horizon))) for start in range(0, horizon, width)]


@dataclass
class ReachTrajectory:
    boxes: list
    modes: list
    gaps: list
    elapsed_ms: list

    def __len__(self):
        return len(self.boxes)

    @property
    def final(self):
        return self.boxes[-1]

    def steps(self):
        for t, (box, mode, gaps, ms) in enumerate(zip(self.boxes, self.modes, self.gaps, self.elapsed_ms)):
            yield {'t': t, 'mode': mode, 'box': box.as_pairs(), 'volume': box_volume(box), 'ms': ms, 'gaps': gaps}


def compute_trajectory(spec, schedule=None, options=None):
    """
    Boxes X_0..X_T with X_0 the initial set. Each window of the schedule
    starts from the last box of the previous one. Inside a symbolic
    window, the box for every later step is the symbolic result
    intersected with the pre-pass box for that step.
    """
    options = options or ReachOptions()
    schedule = schedule if schedule is not None else make_schedule(spec.horizon,
                                                                   verifier_settings.REACH['SYMBOLIC_WINDOW'])
    covered = [t for window in schedule for t in window]
    if covered != list(range(spec.horizon)):
        raise ValueError(f'Schedule must cover steps 0..{spec.horizon - 1} in order')

    trajectory = ReachTrajectory([spec.initial], [INITIAL], [[]], [0.0])
    for window in schedule:
        width = len(window)
        mode = CONCRETE if width == 1 else f'{SYMBOLIC}({width})'
        history = []
        for t in window:
            started = time.monotonic()
            current = trajectory.boxes[t]
            if width == 1:
                outcome = next_set(spec, current, t, options=options)
                box = outcome.box
            else:
                if options.prepass == PREPASS_INTERVAL:
                    prepass = interval_step(spec, current)
                else:
                    prepass = next_set(spec, current, t, options=options).box
                outcome = next_set(spec, current, t, history, options, fallback=prepass)
                box = outcome.box.intersection(prepass) or prepass
                history.append((t, current))
            elapsed = (time.monotonic() - started) * 1000.0
            trajectory.boxes.append(box)
            trajectory.modes.append(mode)
            trajectory.gaps.append(outcome.gaps)
            trajectory.elapsed_ms.append(elapsed)
            logger.info('Step %d/%d (%s): %r in %.0f ms', t + 1, spec.horizon, mode, box, elapsed)
    return trajectory
