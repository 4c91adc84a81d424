"""Farthest point sampling and k-nearest-neighbour patches."""

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.shapes import PatchSet, validate_cloud


def fps(points: ArrayLike, m: int) -> NDArray[np.int64]:
    """Greedy farthest point sampling seeded at index 0.

    Each step adds the point with the largest distance to the selected set; ties go to
    the lowest index. Returns indices in selection order.
    """
    cloud = validate_cloud(points, "points")
    n = cloud.shape[0]
    if not 1 <= m <= n:
        raise ContractViolation(f"fps needs 1 <= m <= {n}, got m={m}")
    selected = np.empty(m, dtype=np.int64)
    selected[0] = 0
    nearest = np.sum((cloud - cloud[0]) ** 2, axis=1)
    nearest[0] = -1.0
    for i in range(1, m):
        pick = int(np.argmax(nearest))
        selected[i] = pick
        dist = np.sum((cloud - cloud[pick]) ** 2, axis=1)
        np.minimum(nearest, dist, out=nearest)
        nearest[selected[: i + 1]] = -1.0
    return selected


def fps_min_distances(points: ArrayLike, order: NDArray[np.int64]) -> NDArray[np.float64]:
    """Distance of each newly selected point to the points selected before it."""
    cloud = validate_cloud(points, "points")
    out = np.full(order.shape[0], np.inf)
    for i in range(1, order.shape[0]):
        out[i] = float(np.min(np.linalg.norm(cloud[order[:i]] - cloud[order[i]], axis=1)))
    return out


def knn_indices(points: ArrayLike, queries: ArrayLike, k: int) -> NDArray[np.int64]:
    """Indices of the k nearest ``points`` for each query, nearest first, ties by index."""
    cloud = validate_cloud(points, "points")
    q = validate_cloud(queries, "queries")
    if not 1 <= k <= cloud.shape[0]:
        raise ContractViolation(f"knn needs 1 <= k <= {cloud.shape[0]}, got k={k}")
    dist = cdist(q, cloud, "sqeuclidean")
    return np.argsort(dist, axis=1, kind="stable")[:, :k].astype(np.int64)


def knn_patches(points: ArrayLike, anchors: ArrayLike, k: int) -> PatchSet:
    """For each anchor, its k nearest surface points in anchor-relative coordinates."""
    cloud = validate_cloud(points, "points")
    centers = validate_cloud(anchors, "anchors")
    idx = knn_indices(cloud, centers, k)
    patches = cloud[idx] - centers[:, None, :]
    return PatchSet(anchors=centers, patches=patches, indices=idx)
