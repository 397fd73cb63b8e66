"""Heterogeneous proximity graph over mesh cells and spatial elements."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import MeshGrid, Space, SpatialElement, distance_to_element, points_in_polygon

PROXIMITY_TOL = 1e-9
EDGE_KINDS = ("proximity", "adjacency", "instance_of")
NODE_KINDS = ("cell", "element", "kind")


@dataclass(frozen=True)
class SpatialGraph:
    """Undirected simple graph stored as a sorted edge list plus CSR adjacency.

    ``node_kind`` is ``cell``, ``element`` (spaces included) or ``kind``
    (one hub per element kind, linking all instances of that kind).
    """

    node_ids: tuple[str, ...]
    node_kinds: tuple[str, ...]
    element_kinds: tuple[str | None, ...]
    edges: tuple[tuple[int, int, str], ...]

    def __post_init__(self):
        n = len(self.node_ids)
        if len(set(self.node_ids)) != n:
            raise ValueError("duplicate node ids")
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v, _ in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in nbrs])
        indices = np.array([v for x in nbrs for v in sorted(x)], dtype=np.int64)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "_index", {nid: i for i, nid in enumerate(self.node_ids)})

    def __len__(self) -> int:
        return len(self.node_ids)

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise KeyError(f"unknown node {node_id!r}") from None

    def neighbors(self, node_id: str) -> list[str]:
        i = self.index_of(node_id)
        return [self.node_ids[j] for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]

    def degree(self, node_id: str) -> int:
        i = self.index_of(node_id)
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def cell_ids(self) -> list[str]:
        return [nid for nid, k in zip(self.node_ids, self.node_kinds) if k == "cell"]

    def edge_set(self, kind: str | None = None) -> set[tuple[str, str]]:
        ids = self.node_ids
        return {(ids[u], ids[v]) for u, v, k in self.edges if kind is None or k == kind}

    def to_node_link(self) -> dict[str, Any]:
        return {
            "directed": False,
            "multigraph": False,
            "nodes": [
                {"id": nid, "node_kind": nk, "element_kind": ek}
                for nid, nk, ek in zip(self.node_ids, self.node_kinds, self.element_kinds)
            ],
            "links": [
                {"source": self.node_ids[u], "target": self.node_ids[v], "edge_kind": k}
                for u, v, k in self.edges
            ],
        }

    @classmethod
    def from_node_link(cls, data: Mapping[str, Any]) -> SpatialGraph:
        nodes = data["nodes"]
        ids = tuple(n["id"] for n in nodes)
        index = {nid: i for i, nid in enumerate(ids)}
        edges = [
            _ordered(index[link["source"]], index[link["target"]], link["edge_kind"])
            for link in data["links"]
        ]
        return cls(
            node_ids=ids,
            node_kinds=tuple(n["node_kind"] for n in nodes),
            element_kinds=tuple(n.get("element_kind") for n in nodes),
            edges=tuple(sorted(edges)),
        )


def _ordered(u: int, v: int, kind: str) -> tuple[int, int, str]:
    return (u, v, kind) if u < v else (v, u, kind)


def build_graph(
    mesh: MeshGrid,
    elements: Sequence[SpatialElement],
    radii: Mapping[str, float] | None = None,
    *,
    spaces: Iterable[Space] | None = None,
    adjacency: bool = True,
    kind_hubs: bool = True,
) -> SpatialGraph:
    """Link every cell to the elements whose AoI holds its centroid.

    Cells are also linked to their containing space, to their 4-neighbours
    (``adjacency``), and element instances to a hub per kind (``kind_hubs``).
    Proximity uses the exact distance from the centroid to the element
    geometry, so it matches the true dilated region rather than its
    polygonal approximation.
    """
    if len(mesh) == 0:
        raise ValueError("mesh is empty")
    radii = dict(radii or {})
    cell_ids = mesh.cell_ids
    centroids = mesh.centroids
    n_cells = len(cell_ids)

    space_list = list(spaces) if spaces is not None else None
    if space_list is None:
        space_order = list(dict.fromkeys(s for s in mesh.space_ids if s is not None))
    else:
        space_order = [s.id for s in space_list]

    node_ids = list(cell_ids) + space_order + [e.id for e in elements]
    node_kinds = ["cell"] * n_cells + ["element"] * (len(space_order) + len(elements))
    element_kinds: list[str | None] = [None] * n_cells + ["space"] * len(space_order)
    element_kinds += [e.kind for e in elements]
    index = {nid: i for i, nid in enumerate(node_ids)}
    if len(index) != len(node_ids):
        raise ValueError("node id collision between cells, spaces and elements")

    edges: set[tuple[int, int, str]] = set()
    if space_list is None:
        for i, sid in enumerate(mesh.space_ids):
            if sid is not None:
                edges.add(_ordered(i, index[sid], "proximity"))
    else:
        for s in space_list:
            hit = np.flatnonzero(points_in_polygon(centroids, s.polygon))
            for i in hit.tolist():
                edges.add(_ordered(i, index[s.id], "proximity"))

    for e in elements:
        r = radii.get(e.kind, e.aoi_radius)
        if not r > 0:
            raise ValueError(f"aoi radius for {e.id} must be > 0")
        near = np.flatnonzero(distance_to_element(centroids, e) <= r + PROXIMITY_TOL)
        j = index[e.id]
        for i in near.tolist():
            edges.add(_ordered(i, j, "proximity"))

    if adjacency:
        pos = {(r, c): i for i, (r, c) in enumerate(zip(mesh.rows.tolist(), mesh.cols.tolist()))}
        for (r, c), i in pos.items():
            for nb in ((r, c + 1), (r + 1, c)):
                k = pos.get(nb)
                if k is not None:
                    edges.add(_ordered(i, k, "adjacency"))

    if kind_hubs:
        kinds = sorted({k for k in element_kinds if k is not None})
        for kind in kinds:
            hub = len(node_ids)
            node_ids.append(f"kind:{kind}")
            node_kinds.append("kind")
            element_kinds.append(kind)
            for i, k in enumerate(element_kinds[:hub]):
                if k == kind and node_kinds[i] == "element":
                    edges.add(_ordered(i, hub, "instance_of"))

    return SpatialGraph(tuple(node_ids), tuple(node_kinds), tuple(element_kinds), tuple(sorted(edges)))


def aoi_signature(graph: SpatialGraph, cell_id: str) -> tuple[tuple[str, str], ...]:
    """Sorted ``(element kind, element id)`` pairs whose AoI holds the cell."""
    i = graph.index_of(cell_id)
    if graph.node_kinds[i] != "cell":
        raise KeyError(f"{cell_id!r} is not a cell")
    out = []
    for j in graph.indices[graph.indptr[i]:graph.indptr[i + 1]].tolist():
        if graph.node_kinds[j] == "element":
            out.append((graph.element_kinds[j], graph.node_ids[j]))
    return tuple(sorted(out))


def signature_kinds(signature: Sequence[tuple[str, str]]) -> tuple[str, ...]:
    """Element kinds of a signature with instance ids dropped (spaces excluded)."""
    return tuple(sorted({k for k, _ in signature if k != "space"}))
