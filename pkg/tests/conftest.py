"""Shared brute-force oracles for the test suite."""

import itertools

import numpy as np


def simplex_projection_oracle(v):
    """Projection onto the unit simplex by trying every support set.

    For each candidate support the equality-constrained minimizer shifts
    the supported entries by a common theta; the projection is the
    feasible candidate closest to v.  Exponential in the dimension, so
    only for small vectors.
    """
    v = np.asarray(v, dtype=float)
    d = v.size
    best = None
    best_dist = np.inf
    for r in range(1, d + 1):
        for support in itertools.combinations(range(d), r):
            idx = list(support)
            theta = (v[idx].sum() - 1.0) / r
            x = np.zeros(d)
            x[idx] = v[idx] - theta
            if x[idx].min() < 0.0:
                continue
            dist = float(np.sum((x - v) ** 2))
            if dist < best_dist:
                best_dist = dist
                best = x
    return best
