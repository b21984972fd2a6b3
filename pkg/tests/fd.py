"""Bump-and-revalue derivatives of path functionals with respect to the driving noise."""
import numpy as np

from pathlsi.sampler import simulate_increments


def noise_derivative(model, x, grid, dW, k, evaluate, eps=1e-6):
    """Central differences of ``evaluate(batch)`` in ``dW[p, k[p], a]`` for every ``a``.

    ``dW`` has shape ``(P, n, d)`` and ``k`` one step index per path; returns ``(P, d)``.
    """
    P, n, d = dW.shape
    rows = np.arange(P)
    bumped = np.repeat(dW[:, None], 2 * d, axis=1)
    for a in range(d):
        bumped[rows, 2 * a, k, a] += eps
        bumped[rows, 2 * a + 1, k, a] -= eps
    batch = simulate_increments(model, x, grid, bumped.reshape(P * 2 * d, n, d))
    vals = evaluate(batch).reshape(P, d, 2)
    return (vals[..., 0] - vals[..., 1]) / (2 * eps)
