"""
Dependency graphs between per-dimension enclosure models and the
controller, and assembly of the MILP for one reach objective.

Vertex (t, 0) is the controller at step t and (t, i) the enclosure model of
dimension i. Within a step every state vertex is joined to the controller,
which reads the full state. A temporal edge (t-1, j) -> (t, k) records that
vertex k at step t reads x_j, whose value is produced by the update of
dimension j at step t-1.
"""
import logging
from dataclasses import dataclass, field

from utils.exceptions import ModelError

from .encoding import encode_enclosure, encode_relu_network
from .model import EQ, MAXIMIZE, MINIMIZE, MilpModel
from .networks import propagate_preactivation_bounds

logger = logging.getLogger(__name__)

CONTROLLER = 0


class DependencyGraph:
    def __init__(self, n, steps, reads, constant_outputs=()):
        """
        `steps` is the ordered list of time steps in the window; `reads`
        maps each dimension to the set of state variables its transition
        function reads.
        """
        self.n = n
        self.steps = list(steps)
        self.reads = {i: set(reads.get(i, ())) for i in range(1, n + 1)}
        self.constant_outputs = set(constant_outputs)
        self.vertices = [(t, j) for t in self.steps for j in range(n + 1)]
        self.state_edges = [((t, i), (t, CONTROLLER)) for t in self.steps for i in range(1, n + 1)]
        self.temporal_edges = []
        for before, after in zip(self.steps, self.steps[1:]):
            for k in range(n + 1):
                for j in sorted(self._inputs_of(k)):
                    self.temporal_edges.append(((before, j), (after, k)))

    def __repr__(self):
        return (f'DependencyGraph(n={self.n}, steps={self.steps}, {len(self.vertices)} vertices, '
                f'{len(self.state_edges)} state edges, {len(self.temporal_edges)} temporal edges)')

    def _inputs_of(self, k):
        """State variables vertex k reads at its own step."""
        if k == CONTROLLER:
            return set(range(1, self.n + 1))
        return self.reads[k] | {k}

    def controller_needed(self, i):
        return i not in self.constant_outputs

    def objective_vertices(self, i):
        """Vertices the update of dimension i at the last step needs directly."""
        last = self.steps[-1]
        needed = {(last, i)}
        if self.controller_needed(i):
            needed.add((last, CONTROLLER))
        return needed

    def dependencies(self, i):
        """
        Every vertex the model for dimension i at the last step depends on,
        following temporal edges back to the window entry.
        """
        first = self.steps[0]
        needed = set()
        frontier = list(self.objective_vertices(i))
        while frontier:
            vertex = frontier.pop()
            if vertex in needed:
                continue
            needed.add(vertex)
            t, k = vertex
            if t == first:
                continue
            before = self.steps[self.steps.index(t) - 1]
            for j in self._inputs_of(k):
                frontier.append((before, j))
                if self.controller_needed(j):
                    frontier.append((before, CONTROLLER))
        return needed


@dataclass
class StepModel:
    """The model for one dimension plus its two objectives."""
    dimension: int
    model: MilpModel
    maximize: object
    minimize: object
    vertices: set = field(default_factory=set)


def _state_var(model, t, j, boxes):
    name = f'x_{t}_{j}'
    if model.has_variable(name):
        return model.index(name)
    lower, upper = boxes[t].lower[j - 1], boxes[t].upper[j - 1]
    return model.add_variable(name, lower, upper)


def build_step_graph(spec, steps, enclosures, boxes):
    """
    Assemble one model per dimension for the update that leaves the last of
    `steps`.

    `enclosures[t][i - 1]` is the bounding set of f_i built over `boxes[t]`.
    With more than one step the window is symbolic: x at each later step is
    tied to the previous step by x_{t+1} = x_t + (y_t + u_t + eps_t) * delta
    with a fresh eps per step.
    """
    n = spec.n
    network = spec.controller
    if network.input_size != n or network.output_size != n:
        raise ModelError(f'Controller maps R^{network.input_size} to R^{network.output_size}, system has n={n}')
    reads = {i: set(f.free_vars) for i, f in enumerate(spec.dynamics, start=1)}
    graph = DependencyGraph(n, steps, reads, network.constant_outputs)
    step_models = []
    for i in range(1, n + 1):
        vertices = graph.dependencies(i)
        model = MilpModel(f'step{steps[-1]}_x{i}')
        outputs = {}
        controls = {}
        for t in steps:
            if (t, CONTROLLER) in vertices:
                inputs = [_state_var(model, t, j, boxes) for j in range(1, n + 1)]
                bounds = propagate_preactivation_bounds(network, boxes[t].lower, boxes[t].upper)
                controls[t] = encode_relu_network(model, network, bounds, inputs, str(t))
            for j in range(1, n + 1):
                if (t, j) not in vertices:
                    continue
                bounding_set = enclosures[t][j - 1]
                inputs = {v: _state_var(model, t, v, boxes) for v in bounding_set.variables if v in reads[j]}
                outputs[t, j] = encode_enclosure(model, bounding_set, inputs, f'{t}_{j}')
                _state_var(model, t, j, boxes)

        def update_terms(t, j):
            terms = {model.index(f'x_{t}_{j}'): 1.0}
            terms[outputs[t, j].output] = terms.get(outputs[t, j].output, 0.0) + spec.delta
            if t in controls:
                control = controls[t][j - 1]
                terms[control] = terms.get(control, 0.0) + spec.delta
            else:
                control = model.fixed(f'u_{t}_{j}', network.constant_outputs[j])
                terms[control] = spec.delta
            eps = model.add_variable(f'eps_{t}_{j}', spec.perturbation.lower[j - 1], spec.perturbation.upper[j - 1])
            terms[eps] = spec.delta
            return terms

        for before, after in zip(steps, steps[1:]):
            for j in range(1, n + 1):
                name = f'x_{after}_{j}'
                if not model.has_variable(name):
                    continue
                terms = update_terms(before, j)
                terms[model.index(name)] = terms.get(model.index(name), 0.0) - 1.0
                model.add_constraint(terms, EQ, 0.0, f'next_{after}_{j}')

        last = steps[-1]
        objective_terms = update_terms(last, i)
        encoding = outputs[last, i]
        upper_terms = dict(objective_terms)
        upper_terms[encoding.upper] = upper_terms.pop(encoding.output)
        lower_terms = dict(objective_terms)
        lower_terms[encoding.lower] = lower_terms.pop(encoding.output)
        model.freeze()
        logger.debug('Assembled %r over %d vertices', model, len(vertices))
        step_models.append(StepModel(i, model, model.make_objective(upper_terms, MAXIMIZE),
                                     model.make_objective(lower_terms, MINIMIZE), vertices))
    return graph, step_models
