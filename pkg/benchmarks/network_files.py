"""
Controller network files.

Network file layout, one record per line, values comma separated with an
optional trailing comma; blank lines and lines starting with `//` are
skipped:

    // comments
    L                       number of weight layers
    s0, s1, ..., sL         layer sizes, input first
    a1, ..., aL             activations, `relu` or `linear`
    then for each layer l = 1..L:
        s_l weight rows of s_(l-1) values each
        s_l bias lines of one value each
    constants               optional section marker
    index, value            1-based output index held at a constant value
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from milp.networks import ACTIVATIONS, LINEAR, Layer, NeuralNetwork
from utils.exceptions import NetworkFormatError

logger = logging.getLogger(__name__)

COMMENT = '//'
CONSTANTS_MARKER = 'constants'


@dataclass
class NetworkFile:
    """The records of a network file before they become a NeuralNetwork."""
    sizes: list
    activations: list
    weights: list
    biases: list
    constant_outputs: dict = field(default_factory=dict)

    def to_network(self):
        layers = tuple(Layer(w, b, a) for w, b, a in zip(self.weights, self.biases, self.activations))
        return NeuralNetwork(layers, self.constant_outputs)


class _Records:
    """Content lines of a network file with their byte offsets."""

    def __init__(self, data):
        self.size = len(data)
        self.lines = []
        offset = 0
        for raw in data.splitlines(keepends=True):
            text = raw.decode('utf-8', errors='replace').strip()
            if text and not text.startswith(COMMENT):
                self.lines.append((offset, text))
            offset += len(raw)
        self.position = 0

    @property
    def exhausted(self):
        return self.position >= len(self.lines)

    def next(self, expected):
        if self.exhausted:
            raise NetworkFormatError(f'Unexpected end of file, expected {expected}', self.size)
        record = self.lines[self.position]
        self.position += 1
        return record

    def peek(self):
        return None if self.exhausted else self.lines[self.position][1]


def _fields(text):
    parts = [part.strip() for part in text.split(',')]
    if len(parts) > 1 and parts[-1] == '':
        parts.pop()
    return parts


def _numbers(offset, text, count, kind, expected):
    parts = _fields(text)
    if len(parts) != count:
        raise NetworkFormatError(f'Expected {count} values in {expected}, got {len(parts)}', offset)
    values = []
    for part in parts:
        try:
            value = kind(part)
        except ValueError:
            raise NetworkFormatError(f'Invalid number {part!r} in {expected}', offset) from None
        if kind is float and not math.isfinite(value):
            raise NetworkFormatError(f'Non-finite value {part!r} in {expected}', offset)
        values.append(value)
    return values


def parse_network(data):
    """Parse network file bytes into a NetworkFile."""
    records = _Records(data)
    offset, text = records.next('the layer count')
    (count,) = _numbers(offset, text, 1, int, 'the layer count')
    if count < 1:
        raise NetworkFormatError('A network needs at least one layer', offset)

    offset, text = records.next('the layer sizes')
    sizes = _numbers(offset, text, count + 1, int, 'the layer sizes')
    if min(sizes) < 1:
        raise NetworkFormatError('Layer sizes must be positive', offset)

    offset, text = records.next('the activations')
    activations = _fields(text)
    if len(activations) != count:
        raise NetworkFormatError(f'Expected {count} activations, got {len(activations)}', offset)
    for activation in activations:
        if activation not in ACTIVATIONS:
            raise NetworkFormatError(f'Unknown activation {activation!r}', offset)
    activation_offset = offset

    weights, biases = [], []
    for layer in range(1, count + 1):
        rows, cols = sizes[layer], sizes[layer - 1]
        matrix = np.empty((rows, cols))
        for row in range(rows):
            expected = f'weight row {row + 1} of layer {layer}'
            offset, text = records.next(expected)
            matrix[row] = _numbers(offset, text, cols, float, expected)
        vector = np.empty(rows)
        for row in range(rows):
            expected = f'bias {row + 1} of layer {layer}'
            offset, text = records.next(expected)
            (vector[row],) = _numbers(offset, text, 1, float, expected)
        weights.append(matrix)
        biases.append(vector)

    constants = {}
    if records.peek() == CONSTANTS_MARKER:
        records.next(CONSTANTS_MARKER)
        while not records.exhausted:
            offset, text = records.next('a constant output')
            index, value = _numbers(offset, text, 2, float, 'a constant output')
            if not index.is_integer() or not 1 <= index <= sizes[-1]:
                raise NetworkFormatError(f'Constant output index must be in 1..{sizes[-1]}', offset)
            constants[int(index)] = value
    if not records.exhausted:
        offset, text = records.next('end of file')
        raise NetworkFormatError(f'Unexpected content {text[:40]!r}', offset)

    if activations[-1] != LINEAR:
        raise NetworkFormatError('The final layer must be linear', activation_offset)
    return NetworkFile(sizes, activations, weights, biases, constants)


def load_network(path):
    """Read a controller network file."""
    path = Path(path)
    network = parse_network(path.read_bytes()).to_network()
    logger.info('Loaded %s: %s, %d constant outputs', path.name,
                'x'.join(str(s) for s in [network.input_size] + [layer.output_size for layer in network.layers]),
                len(network.constant_outputs))
    return network


def dump_network(network, comment=None):
    """Network file text for `network`."""
    lines = [f'{COMMENT} {comment}'] if comment else []
    sizes = [network.input_size] + [layer.output_size for layer in network.layers]
    lines.append(str(len(network.layers)))
    lines.append(','.join(str(s) for s in sizes))
    lines.append(','.join(layer.activation for layer in network.layers))
    for layer in network.layers:
        lines.extend(','.join(repr(float(w)) for w in row) for row in layer.weights)
        lines.extend(repr(float(b)) for b in layer.biases)
    if network.constant_outputs:
        lines.append(CONSTANTS_MARKER)
        lines.extend(f'{index},{value!r}' for index, value in sorted(network.constant_outputs.items()))
    return '\n'.join(lines) + '\n'
