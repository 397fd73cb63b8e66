"""k-means and the three scenario zonings (spaces, square grid, Build2Vec)."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .build2vec import EmbeddingMatrix
from .geometry import FloorPlan, MeshGrid, Zoning, dissolve_cells
from .spatial_graph import SpatialGraph, aoi_signature


@dataclass(frozen=True)
class KMeansResult:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple[float, ...] = ()


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [int(rng.integers(n))]
    closest = _sq_dists(x, x[centers]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a centre; take unused indices in order
            unused = np.setdiff1d(np.arange(n), centers)
            centers.append(int(unused[0]))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            centers.append(min(idx, n - 1))
        closest = np.minimum(closest, _sq_dists(x, x[centers[-1:]]).ravel())
    return x[centers].copy()


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = _sq_dists(x, centroids)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(len(x)), labels]


def kmeans(vectors, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding.

    Stops once no centroid moves more than ``tol``.  A cluster that loses
    all members is re-seeded at the point farthest from its centroid.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    n = len(x)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of vectors ({n})")
    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _kmeans_pp(x, k, rng)
    labels, dist = _assign(x, centroids)
    history = [float(dist.sum())]
    it = 0
    for it in range(1, max_iter + 1):
        new = np.empty_like(centroids)
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(dist))
                new[j] = x[far]
                dist[far] = 0.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(1)).max())
        centroids = new
        labels, dist = _assign(x, centroids)
        history.append(float(dist.sum()))
        if shift < tol:
            break
    for j in range(k):
        members = labels == j
        if members.any():
            centroids[j] = x[members].mean(axis=0)
    inertia = float(((x - centroids[labels]) ** 2).sum())
    return KMeansResult(k, labels, centroids, inertia, it, int(seed), tuple(history))


def build2vec_zoning(embeddings: EmbeddingMatrix, mesh: MeshGrid, k: int = 20, seed: int = 0) -> Zoning:
    """Cluster L2-normalised cell embeddings and dissolve each cluster into a zone."""
    ids = mesh.cell_ids
    missing = [c for c in ids if c not in embeddings]
    if missing:
        raise KeyError(f"cell {missing[0]} has no embedding")
    vecs = embeddings.subset(ids)
    unit = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    result = kmeans(unit, k, seed=seed)
    zoning = dissolve_cells(mesh, dict(zip(ids, result.labels.tolist())), method="build2vec")
    zoning.meta.update(k=k, seed=int(seed), inertia=result.inertia, iterations=result.iterations)
    return zoning


def spaces_zoning(plan: FloorPlan, mesh: MeshGrid) -> Zoning:
    """One zone per space, numbered in plan order."""
    order = {s.id: i for i, s in enumerate(plan.spaces)}
    labels = {}
    for cid, sid in zip(mesh.cell_ids, mesh.space_ids):
        if sid is None or sid not in order:
            raise ValueError(f"cell {cid} has no containing space")
        labels[cid] = order[sid]
    return dissolve_cells(mesh, labels, method="spaces")


def grid_zoning(plan: FloorPlan, mesh: MeshGrid, square: float = 4.0) -> Zoning:
    """Axis-aligned ``square`` tiles from the plan's minimum corner; empty tiles dropped."""
    if not square > 0:
        raise ValueError("square must be > 0")
    minx, miny, _, _ = plan.bounds
    cents = mesh.centroids
    tx = np.floor((cents[:, 0] - minx) / square).astype(np.int64)
    ty = np.floor((cents[:, 1] - miny) / square).astype(np.int64)
    labels = {cid: (int(r), int(c)) for cid, r, c in zip(mesh.cell_ids, ty, tx)}
    zoning = dissolve_cells(mesh, labels, method="square_grid")
    zoning.meta.update(square=square)
    return zoning


def zone_signature_table(zoning: Zoning, graph: SpatialGraph) -> list[dict]:
    """Per zone: the most common AoI element-kind combination and cell count."""
    rows = []
    for z in zoning.zones:
        kinds = Counter(
            "+".join(sorted({k for k, _ in aoi_signature(graph, c) if k != "space"})) or "none"
            for c in z.member_cell_ids
        )
        dominant = sorted(kinds.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        rows.append({"zone_id": z.zone_id, "dominant_aoi_signature": dominant, "cell_count": len(z.member_cell_ids)})
    return rows


def signature_table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["zone_id", "dominant_aoi_signature", "cell_count"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def expected_grid_tiles(width: float, height: float, square: float) -> int:
    return math.ceil(width / square) * math.ceil(height / square)
