# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled decision-tape evaluation (hot kernel).

Same contract as fairlog.kernels._tape_py, with the node loop and batch
loop fused in C. Values also match the numpy lane bit-for-bit: both
compute p*hi + (1-p)*lo per node in identical order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def tape_forward(cnp.int32_t[::1] var, cnp.int32_t[::1] lo, cnp.int32_t[::1] hi,
                 int root, cnp.float64_t[:, ::1] probs):
    cdef Py_ssize_t batch = probs.shape[0]
    cdef Py_ssize_t n_nodes = var.shape[0]
    cdef Py_ssize_t row, node
    cdef double p
    out_arr = np.empty(batch, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    if root == 0 or root == 1:
        out_arr[:] = root
        return out_arr
    values_arr = np.empty(n_nodes + 2, dtype=np.float64)
    cdef cnp.float64_t[::1] values = values_arr
    values[0] = 0.0
    values[1] = 1.0
    for row in range(batch):
        for node in range(n_nodes):
            p = probs[row, var[node]]
            values[node + 2] = p * values[hi[node]] + (1.0 - p) * values[lo[node]]
        out[row] = values[root]
    return out_arr


def tape_forward_backward(cnp.int32_t[::1] var, cnp.int32_t[::1] lo, cnp.int32_t[::1] hi,
                          int root, cnp.float64_t[:, ::1] probs):
    cdef Py_ssize_t batch = probs.shape[0]
    cdef Py_ssize_t n_leaves = probs.shape[1]
    cdef Py_ssize_t n_nodes = var.shape[0]
    cdef Py_ssize_t row, node
    cdef double p, a
    out_arr = np.empty(batch, dtype=np.float64)
    grad_arr = np.zeros((batch, n_leaves), dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef cnp.float64_t[:, ::1] grad = grad_arr
    if root == 0 or root == 1:
        out_arr[:] = root
        return out_arr, grad_arr
    values_arr = np.empty(n_nodes + 2, dtype=np.float64)
    adjoint_arr = np.empty(n_nodes + 2, dtype=np.float64)
    cdef cnp.float64_t[::1] values = values_arr
    cdef cnp.float64_t[::1] adjoint = adjoint_arr
    values[0] = 0.0
    values[1] = 1.0
    for row in range(batch):
        for node in range(n_nodes):
            p = probs[row, var[node]]
            values[node + 2] = p * values[hi[node]] + (1.0 - p) * values[lo[node]]
        out[row] = values[root]
        for node in range(n_nodes + 2):
            adjoint[node] = 0.0
        adjoint[root] = 1.0
        for node in range(n_nodes - 1, -1, -1):
            a = adjoint[node + 2]
            if a == 0.0:
                continue
            p = probs[row, var[node]]
            grad[row, var[node]] += a * (values[hi[node]] - values[lo[node]])
            adjoint[hi[node]] += a * p
            adjoint[lo[node]] += a * (1.0 - p)
    return out_arr, grad_arr
