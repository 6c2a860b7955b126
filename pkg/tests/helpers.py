"""Shared instance generators for the tests and the acceptance suite."""

import numpy as np

from rapidmix import RandomSource


def random_dense_01(n: int, rng: RandomSource) -> np.ndarray:
    """Random 0-1 matrix with every row and column at least half ones
    (such matrices always have a perfect matching)."""
    gen = rng.generator
    need = -(-n // 2)  # ceil(n/2)
    A = (gen.random((n, n)) < 0.6).astype(np.int64)
    for i in range(n):
        while A[i].sum() < need:
            A[i, gen.integers(n)] = 1
    for j in range(n):
        while A[:, j].sum() < need:
            A[gen.integers(n), j] = 1
    return A
