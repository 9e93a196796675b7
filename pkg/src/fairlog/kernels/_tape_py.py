"""Pure-numpy decision-tape evaluation (fallback kernel).

Vectorizes over the batch dimension; loops over tape nodes in Python.
Matches fairlog.kernels._tape_c bit-for-bit (same operations, same
order), which the kernel equivalence tests assert.
"""

from __future__ import annotations

import numpy as np


def tape_forward(var, lo, hi, root: int, probs: np.ndarray) -> np.ndarray:
    """Probability of the root for each row of ``probs`` (batch, n_leaves)."""
    batch = probs.shape[0]
    if root == 0:
        return np.zeros(batch)
    if root == 1:
        return np.ones(batch)
    values = np.empty((len(var) + 2, batch))
    values[0] = 0.0
    values[1] = 1.0
    for node in range(len(var)):
        p = probs[:, var[node]]
        values[node + 2] = p * values[hi[node]] + (1.0 - p) * values[lo[node]]
    return values[root].copy()


def tape_forward_backward(var, lo, hi, root: int, probs: np.ndarray):
    """Root probability and its gradient w.r.t. every leaf probability.

    Returns ``(value (batch,), grad (batch, n_leaves))``; leaves that do
    not appear in the tape get gradient 0.
    """
    batch, n_leaves = probs.shape
    grad = np.zeros((batch, n_leaves))
    if root in (0, 1):
        return (np.zeros(batch) if root == 0 else np.ones(batch)), grad
    n_nodes = len(var)
    values = np.empty((n_nodes + 2, batch))
    values[0] = 0.0
    values[1] = 1.0
    for node in range(n_nodes):
        p = probs[:, var[node]]
        values[node + 2] = p * values[hi[node]] + (1.0 - p) * values[lo[node]]
    adjoint = np.zeros((n_nodes + 2, batch))
    adjoint[root] = 1.0
    for node in range(n_nodes - 1, -1, -1):
        a = adjoint[node + 2]
        p = probs[:, var[node]]
        grad[:, var[node]] += a * (values[hi[node]] - values[lo[node]])
        adjoint[hi[node]] += a * p
        adjoint[lo[node]] += a * (1.0 - p)
    return values[root].copy(), grad
