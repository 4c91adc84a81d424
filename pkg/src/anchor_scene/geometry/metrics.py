"""Point-cloud distances."""

from collections.abc import Sequence
from itertools import combinations

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.shapes import validate_cloud


def chamfer(a: ArrayLike, b: ArrayLike) -> float:
    """Mean squared nearest-neighbour distance from a to b plus from b to a."""
    x = validate_cloud(a, "a")
    y = validate_cloud(b, "b")
    d = cdist(x, y, "sqeuclidean")
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def mean_pairwise_chamfer(clouds: Sequence[ArrayLike]) -> float:
    """Average Chamfer distance over all unordered pairs."""
    if len(clouds) < 2:
        raise ContractViolation("need at least two clouds for a pairwise average")
    values = [chamfer(a, b) for a, b in combinations(clouds, 2)]
    return float(np.mean(values))
