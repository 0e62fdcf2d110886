"""
MILP encodings of bounding-set enclosures (aggregated convex combination
over the grid triangulation) and of ReLU networks (big-M).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from utils.exceptions import ModelError

from .model import EQ, LE
from .networks import RELU

logger = logging.getLogger(__name__)


@dataclass
class EnclosureEncoding:
    """Indices of the variables an enclosure encoding created."""
    lower: int
    upper: int
    output: int
    lam: list = field(default_factory=list)
    binaries: list = field(default_factory=list)


def encode_enclosure(model, bounding_set, inputs, tag, triangulation=None):
    """
    Add the enclosure of `bounding_set` to `model`.

    `inputs` maps each state variable of the bounding set to a model
    variable index. `tag` is a "{t}_{i}" suffix used in variable names.
    The output y lies between the lower surface y_lo and the upper surface
    y_hi at the input point. One binary per simplex selects the simplex
    whose vertices carry the lambda weights.
    """
    lower, upper = bounding_set.lower, bounding_set.upper
    y_lo = model.add_variable(f'ylo_{tag}', float(lower.min()), float(lower.max()))
    y_hi = model.add_variable(f'yhi_{tag}', float(upper.min()), float(upper.max()))
    y = model.add_variable(f'y_{tag}', float(lower.min()), float(upper.max()))
    model.add_constraint({y: 1.0, y_hi: -1.0}, LE, 0.0, f'cc5u_{tag}')
    model.add_constraint({y_lo: 1.0, y: -1.0}, LE, 0.0, f'cc5l_{tag}')
    if np.ptp(lower) == 0.0 and np.ptp(upper) == 0.0:
        # flat surfaces: the bounds alone describe the enclosure
        return EnclosureEncoding(y_lo, y_hi, y)

    missing = [v for v in bounding_set.variables if v not in inputs]
    if missing:
        raise ModelError(f'No model variable supplied for x{missing[0]} of enclosure {tag}')
    triangulation = triangulation or bounding_set.triangulation
    if len(triangulation) == 0:
        raise ModelError(f'Enclosure {tag} has an empty triangulation')
    points = bounding_set.point_set.points

    lam = [model.add_variable(f'lam_{tag}_{j}', 0.0, 1.0) for j in range(len(points))]
    binaries = [model.add_binary(f'b_{tag}_{k}') for k in range(len(triangulation))]
    model.add_constraint({j: 1.0 for j in lam}, EQ, 1.0, f'cc1lam_{tag}')
    model.add_constraint({k: 1.0 for k in binaries}, EQ, 1.0, f'cc1b_{tag}')

    incident = [[] for _ in lam]
    for k, simplex in enumerate(triangulation.simplices):
        for j in simplex:
            incident[j].append(binaries[k])
    for j, owners in enumerate(incident):
        terms = {lam[j]: 1.0}
        for owner in owners:
            terms[owner] = terms.get(owner, 0.0) - 1.0
        model.add_constraint(terms, LE, 0.0, f'cc2_{tag}_{j}')

    for axis, variable in enumerate(bounding_set.variables):
        terms = {inputs[variable]: 1.0}
        for j, index in enumerate(lam):
            terms[index] = terms.get(index, 0.0) - points[j, axis]
        model.add_constraint(terms, EQ, 0.0, f'cc3_{tag}_x{variable}')

    hi_terms = {y_hi: 1.0}
    lo_terms = {y_lo: 1.0}
    for j, index in enumerate(lam):
        hi_terms[index] = -upper[j]
        lo_terms[index] = -lower[j]
    model.add_constraint(hi_terms, EQ, 0.0, f'cc4u_{tag}')
    model.add_constraint(lo_terms, EQ, 0.0, f'cc4l_{tag}')
    logger.debug('Encoded enclosure %s: %d lambdas, %d binaries', tag, len(lam), len(binaries))
    return EnclosureEncoding(y_lo, y_hi, y, lam, binaries)


def encode_relu_network(model, network, bounds, inputs, tag):
    """
    Add the network to `model` and return the output variable indices.

    `bounds` are the pre-activation LayerBounds from
    propagate_preactivation_bounds. A ReLU whose bounds straddle zero gets
    the big-M constraints with an indicator delta:
        y >= z,  y <= z - l(1 - delta),  y <= u delta,  y >= 0.
    Stably inactive neurons are fixed at 0 and stably active ones reuse z.
    Constant outputs become fixed variables.
    """
    if len(inputs) != network.input_size:
        raise ModelError(f'Network expects {network.input_size} inputs, got {len(inputs)}')
    if len(bounds) != len(network.layers):
        raise ModelError('One LayerBounds per layer is required')
    activations = list(inputs)
    last = len(network.layers) - 1
    for depth, (layer, layer_bounds) in enumerate(zip(network.layers, bounds)):
        next_activations = []
        for j in range(layer.output_size):
            lo, hi = float(layer_bounds.lower[j]), float(layer_bounds.upper[j])
            if depth == last:
                if network.is_constant(j + 1):
                    next_activations.append(model.fixed(f'u_{tag}_{j + 1}', network.constant_outputs[j + 1]))
                    continue
                name = f'u_{tag}_{j + 1}'
            else:
                name = f'z_{tag}_{depth}_{j}'
            if layer.activation == RELU and hi <= 0.0:
                next_activations.append(model.fixed(f'a_{tag}_{depth}_{j}', 0.0))
                continue
            z = model.add_variable(name, lo, hi)
            terms = {z: 1.0}
            for source, weight in zip(activations, layer.weights[j]):
                terms[source] = terms.get(source, 0.0) - weight
            model.add_constraint(terms, EQ, float(layer.biases[j]), f'lin_{tag}_{depth}_{j}')
            if layer.activation != RELU or lo >= 0.0:
                next_activations.append(z)
                continue
            y = model.add_variable(f'a_{tag}_{depth}_{j}', 0.0, hi)
            delta = model.add_binary(f'd_{tag}_{depth}_{j}')
            model.add_constraint({z: 1.0, y: -1.0}, LE, 0.0, f'relu1_{tag}_{depth}_{j}')
            model.add_constraint({y: 1.0, z: -1.0, delta: -lo}, LE, -lo, f'relu2_{tag}_{depth}_{j}')
            model.add_constraint({y: 1.0, delta: -hi}, LE, 0.0, f'relu3_{tag}_{depth}_{j}')
            next_activations.append(y)
        activations = next_activations
    return activations
