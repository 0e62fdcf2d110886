import numpy as np

from expressions.evaluation import evaluate


def simulate(spec, count, rng, steps=None):
    """
    Exact rollouts from states drawn uniformly in the initial box, with a
    fresh perturbation drawn uniformly in E at every step. Returns an array
    of shape (count, steps + 1, n).
    """
    steps = spec.horizon if steps is None else steps
    states = np.empty((count, steps + 1, spec.n))
    x = spec.initial.sample(rng, count)
    states[:, 0] = x
    for t in range(steps):
        rates = np.column_stack([evaluate(f, x) for f in spec.dynamics])
        eps = spec.perturbation.sample(rng, count)
        x = x + spec.delta * (rates + spec.controller.forward(x) + eps)
        states[:, t + 1] = x
    return states
