#!/usr/bin/env python3
"""Benchmark the compiled tape kernel against the numpy fallback.

Two workloads: the measurement-template circuit (the training hot path)
and a synthetic wide tape. Run after building the extension:

    python benchmarks/bench_tape.py
"""

import time

import numpy as np

from fairlog.kernels import _tape_py
from fairlog.logic import NeuralBinding, ground
from fairlog.templates import build_measurement_bias_program

try:
    from fairlog.kernels import _tape_c
except ImportError:
    _tape_c = None


def measurement_tape(n_features=4):
    program = build_measurement_bias_program(n_features)
    params = {(f"p{j}", i): 0.1 for j in (1, 2, 3, 4) for i in range(1, n_features + 1)}
    bindings = {
        "a": NeuralBinding(lambda args, ctx: 1.0, ground_time=True),
        "n": NeuralBinding(lambda args, ctx: 0.0),
        "h": NeuralBinding(lambda args, ctx: 0.5),
    }
    circuit = ground(program, program.queries[0], params, bindings)
    return circuit.tape()


def random_tape(rng, n_leaves, n_nodes):
    var = rng.integers(0, n_leaves, n_nodes).astype(np.int32)
    lo = np.empty(n_nodes, dtype=np.int32)
    hi = np.empty(n_nodes, dtype=np.int32)
    for i in range(n_nodes):
        lo[i] = rng.integers(0, i + 2)
        hi[i] = rng.integers(0, i + 2)
    return var, lo, hi, n_nodes + 1, n_leaves


def bench(impl, arrays, probs, repeats):
    var, lo, hi, root = arrays
    impl.tape_forward_backward(var, lo, hi, root, probs)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        impl.tape_forward_backward(var, lo, hi, root, probs)
    return (time.perf_counter() - start) / repeats


def main():
    rng = np.random.default_rng(0)
    tape = measurement_tape()
    cases = [
        (
            "measurement template (%d nodes, %d leaves)" % (tape.n_nodes, tape.n_leaves),
            (tape.var, tape.lo, tape.hi, tape.root),
            tape.n_leaves,
        ),
        ("random tape (400 nodes, 24 leaves)", None, 24),
    ]
    var, lo, hi, root, n_leaves = random_tape(rng, 24, 400)
    cases[1] = ("random tape (400 nodes, 24 leaves)", (var, lo, hi, root), n_leaves)

    for batch in (64, 1024):
        print(f"\nbatch size {batch}")
        for name, arrays, width in cases:
            probs = np.ascontiguousarray(rng.random((batch, width)))
            t_py = bench(_tape_py, arrays, probs, repeats=50)
            line = f"  {name:48s} numpy {t_py * 1e6:9.1f} us"
            if _tape_c is not None:
                t_c = bench(_tape_c, arrays, probs, repeats=200)
                line += f"   cython {t_c * 1e6:9.1f} us   speedup {t_py / t_c:6.1f}x"
            else:
                line += "   (compiled kernel not built)"
            print(line)


if __name__ == "__main__":
    main()
