"""Deterministic array averaging used by TTA and ensemble fusion."""

from __future__ import annotations

import numpy as np


def pairwise_sum(stack: np.ndarray) -> np.ndarray:
    """Sum a (n, ...) stack along axis 0 as a balanced binary tree.

    The tree shape depends only on n, so the result is independent of how the
    stack was produced, and sums of 2^k identical values are exact.
    """
    n = stack.shape[0]
    if n == 0:
        raise ValueError("cannot sum an empty stack")
    while n > 1:
        half = n // 2
        paired = stack[0 : 2 * half : 2] + stack[1 : 2 * half : 2]
        if n % 2:
            stack = np.concatenate([paired, stack[2 * half :]])
        else:
            stack = paired
        n = stack.shape[0]
    return np.array(stack[0], dtype=np.float64)


def pairwise_mean(stack: np.ndarray) -> np.ndarray:
    """Equal-weight mean along axis 0 using the pairwise tree.

    For inputs in [0, 1] the result stays in [0, 1]: every partial sum of m
    terms is bounded by the representable integer m, and division cannot
    round past 1.
    """
    return pairwise_sum(stack) / stack.shape[0]


def weighted_mean(stack: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mean along axis 0; weights are normalised by their own sum.

    Numerator and denominator are reduced with the same pairwise tree, so by
    monotonicity of rounding the quotient of in-range inputs stays in [0, 1].
    """
    weights = np.asarray(weights, dtype=np.float64)
    shaped = weights.reshape((-1,) + (1,) * (stack.ndim - 1))
    num = pairwise_sum(stack * shaped)
    den = pairwise_sum(weights)
    return num / den
