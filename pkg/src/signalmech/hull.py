"""Lower convex hulls of x-sorted point sequences (Andrew's monotone chain)."""
from __future__ import annotations

import numpy as np


def prefix_hull_parents(x, y) -> np.ndarray:
    """Run the monotone chain left to right and record each point's stack predecessor.

    After point ``k`` is pushed, the lower hull of points ``0..k`` is the chain
    ``k, parent[k], parent[parent[k]], ..., 0``.  The root has parent -1.
    """
    xs = np.asarray(x, dtype=float).tolist()
    ys = np.asarray(y, dtype=float).tolist()
    parent = np.full(len(xs), -1, dtype=np.int64)
    stack: list[int] = []
    for k, (xk, yk) in enumerate(zip(xs, ys)):
        while len(stack) >= 2:
            i, j = stack[-2], stack[-1]
            cross = (xs[j] - xs[i]) * (yk - ys[i]) - (ys[j] - ys[i]) * (xk - xs[i])
            if cross > 0:
                break
            stack.pop()
        if stack:
            parent[k] = stack[-1]
        stack.append(k)
    return parent


def lower_hull(x, y) -> np.ndarray:
    """Indices of the lower-hull vertices, increasing.  Collinear points are dropped."""
    n = len(x)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    parent = prefix_hull_parents(x, y)
    chain = [n - 1]
    while parent[chain[-1]] >= 0:
        chain.append(int(parent[chain[-1]]))
    return np.asarray(chain[::-1], dtype=np.int64)
