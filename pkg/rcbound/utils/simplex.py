"""Helpers for optimization over the probability simplex."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray


def project_onto_simplex(c: ArrayLike) -> NDArray:
    """Euclidean projection of `c` onto {x : x >= 0, sum(x) = 1}."""
    c = np.asarray(c, dtype=np.float64)
    a = -np.sort(-c)
    thresholds = (np.cumsum(a) - 1.0) / np.arange(1, c.size + 1)
    k = np.flatnonzero(a > thresholds)[-1]
    return np.maximum(c - thresholds[k], 0.0)


def starting_points(num_inputs: int, count: int, rng: np.random.Generator) -> list[NDArray]:
    """The uniform distribution followed by `count - 1` flat Dirichlet draws."""
    starts = [np.full(num_inputs, 1.0 / num_inputs)]
    starts.extend(rng.dirichlet(np.ones(num_inputs)) for _ in range(count - 1))
    return starts


def cluster(points: list[NDArray], tolerance: float) -> list[int]:
    """Indices of cluster representatives; a point joins the first representative within L1 `tolerance`."""
    representatives: list[int] = []
    for i, point in enumerate(points):
        if all(np.abs(point - points[j]).sum() > tolerance for j in representatives):
            representatives.append(i)
    return representatives
