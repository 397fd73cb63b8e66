"""Random-walk corpora and skip-gram (negative sampling) node embeddings.

Both kernels are compiled with numba and draw randomness from counter-based
streams, so results depend only on the seed and the inputs.
"""
from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numba
import numpy as np

from .spatial_graph import SpatialGraph, aoi_signature

log = logging.getLogger(__name__)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_SIGMOID_CLIP = 30.0


@numba.njit(cache=True)
def _mix(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, seed, walk_length, walks_per_node):
    n = indptr.shape[0] - 1
    walks = np.full((n * walks_per_node, walk_length), -1, dtype=np.int64)
    lengths = np.zeros(n * walks_per_node, dtype=np.int64)
    base = _mix(np.uint64(seed))
    row = 0
    for w in range(walks_per_node):
        for start in range(n):
            state = _mix(_mix(base ^ np.uint64(start)) ^ np.uint64(w))
            cur = start
            walks[row, 0] = cur
            length = 1
            while length < walk_length:
                lo = indptr[cur]
                deg = indptr[cur + 1] - lo
                if deg == 0:
                    break
                state = state + _GOLDEN
                r = _mix(state)
                cur = indices[lo + np.int64(r % np.uint64(deg))]
                walks[row, length] = cur
                length += 1
            lengths[row] = length
            row += 1
    return walks, lengths


@dataclass(frozen=True)
class WalkCorpus:
    """Uniform random walks; row ``w * n + i`` is walk ``w`` started at node ``i``."""

    node_ids: tuple[str, ...]
    walks: np.ndarray
    lengths: np.ndarray
    walk_length: int
    walks_per_node: int
    rng_seed: int

    def __len__(self) -> int:
        return len(self.lengths)

    def as_lists(self) -> list[list[str]]:
        ids = self.node_ids
        return [[ids[j] for j in row[:n]] for row, n in zip(self.walks.tolist(), self.lengths.tolist())]

    def token_counts(self) -> np.ndarray:
        valid = self.walks[self.walks >= 0]
        return np.bincount(valid, minlength=len(self.node_ids))


def generate_walks(graph: SpatialGraph, walk_length: int = 50, walks_per_node: int = 50, seed: int = 0) -> WalkCorpus:
    """Uniform next-neighbour walks, ``walks_per_node`` from every node.

    Each walk's random stream is derived from ``(seed, start node, walk index)``.
    Walks stop early at nodes without neighbours.
    """
    if len(graph) == 0:
        raise ValueError("graph is empty")
    if walk_length < 1 or walks_per_node < 1:
        raise ValueError("walk_length and walks_per_node must be >= 1")
    isolated = int(np.count_nonzero(np.diff(graph.indptr) == 0))
    if isolated:
        log.info("%d isolated node(s) produce length-1 walks", isolated)
    walks, lengths = _walk_kernel(graph.indptr, graph.indices, np.uint64(seed), walk_length, walks_per_node)
    walks.setflags(write=False)
    lengths.setflags(write=False)
    return WalkCorpus(graph.node_ids, walks, lengths, walk_length, walks_per_node, int(seed))


@numba.njit(cache=True)
def _next_rand(state):
    return state * np.uint64(25214903917) + np.uint64(11)


@numba.njit(cache=True)
def _uniform(state):
    return float(state >> _S11) * _INV53


@numba.njit(cache=True)
def _sgns_kernel(walks, lengths, orders, w_in, w_out, neg_cdf, window, negatives, lr0, rng_seed):
    n_epochs = orders.shape[0]
    dim = w_in.shape[1]
    total_tokens = 0
    for i in range(lengths.shape[0]):
        total_tokens += lengths[i]
    total_tokens *= n_epochs
    losses = np.zeros(n_epochs)
    grad = np.zeros(dim)
    state = _mix(np.uint64(rng_seed))
    seen = 0
    for epoch in range(n_epochs):
        loss_sum = 0.0
        pairs = 0
        for oi in range(orders.shape[1]):
            wi = orders[epoch, oi]
            length = lengths[wi]
            for pos in range(length):
                lr = lr0 * (1.0 - seen / (total_tokens + 1.0))
                if lr < lr0 * 1e-4:
                    lr = lr0 * 1e-4
                seen += 1
                center = walks[wi, pos]
                state = _next_rand(state)
                span = window - np.int64((state >> _S11) % np.uint64(window))
                lo = max(0, pos - span)
                hi = min(length, pos + span + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    context = walks[wi, cpos]
                    for g in range(dim):
                        grad[g] = 0.0
                    for s in range(negatives + 1):
                        if s == 0:
                            target = context
                            label = 1.0
                        else:
                            state = _next_rand(state)
                            target = np.searchsorted(neg_cdf, _uniform(state), side="right")
                            if target >= neg_cdf.shape[0]:
                                target = neg_cdf.shape[0] - 1
                            if target == context:
                                continue
                            label = 0.0
                        dot = 0.0
                        for g in range(dim):
                            dot += w_in[center, g] * w_out[target, g]
                        if dot > _SIGMOID_CLIP:
                            dot = _SIGMOID_CLIP
                        elif dot < -_SIGMOID_CLIP:
                            dot = -_SIGMOID_CLIP
                        sig = 1.0 / (1.0 + np.exp(-dot))
                        if label > 0.5:
                            loss_sum -= np.log(sig + 1e-12)
                        else:
                            loss_sum -= np.log(1.0 - sig + 1e-12)
                        coef = (label - sig) * lr
                        for g in range(dim):
                            grad[g] += coef * w_out[target, g]
                            w_out[target, g] += coef * w_in[center, g]
                    for g in range(dim):
                        w_in[center, g] += grad[g]
                    pairs += 1
        losses[epoch] = loss_sum / max(pairs, 1)
    return losses


@dataclass(frozen=True)
class EmbeddingMatrix:
    node_ids: tuple[str, ...]
    vectors: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.vectors.setflags(write=False)
        object.__setattr__(self, "_index", {nid: i for i, nid in enumerate(self.node_ids)})

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __getitem__(self, node_id: str) -> np.ndarray:
        return self.vectors[self._index[node_id]]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    def subset(self, node_ids: Sequence[str]) -> np.ndarray:
        return self.vectors[[self._index[n] for n in node_ids]]

    def to_text(self) -> str:
        lines = [f"{len(self.node_ids)} {self.dimension}"]
        for nid, vec in zip(self.node_ids, self.vectors):
            lines.append(nid + " " + " ".join(format(float(v), ".17g") for v in vec))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_text())
        path.with_suffix(".meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> EmbeddingMatrix:
        path = Path(path)
        lines = path.read_text().splitlines()
        n, d = map(int, lines[0].split())
        ids, rows = [], []
        for line in lines[1 : n + 1]:
            parts = line.split(" ")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
        vectors = np.array(rows, dtype=float).reshape(n, d)
        meta_path = path.with_suffix(".meta.json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(tuple(ids), vectors, meta)


def train_skipgram(
    corpus: WalkCorpus,
    dimension: int = 50,
    window: int = 30,
    epochs: int = 5,
    negative_samples: int = 5,
    seed: int = 0,
    learning_rate: float = 0.025,
) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over the walk corpus.

    Walk order is reshuffled each epoch with a seeded permutation and pairs
    are consumed sequentially.  The effective window of each centre token
    is drawn uniformly from ``1..window``; negatives follow unigram^0.75.
    Input vectors start uniform in ``±0.5/dimension``, output vectors at 0.
    """
    if dimension <= 0:
        raise ValueError("dimension must be > 0")
    if window <= 0:
        raise ValueError("window must be > 0")
    if epochs < 0 or negative_samples < 0:
        raise ValueError("epochs and negative_samples must be >= 0")
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    n = len(corpus.node_ids)
    rng = np.random.Generator(np.random.PCG64(seed))
    w_in = rng.uniform(-0.5 / dimension, 0.5 / dimension, size=(n, dimension))
    w_out = np.zeros((n, dimension))
    counts = corpus.token_counts().astype(float) ** 0.75
    neg_cdf = np.cumsum(counts / counts.sum())
    orders = np.array([rng.permutation(len(corpus)) for _ in range(epochs)], dtype=np.int64).reshape(epochs, len(corpus))
    losses = _sgns_kernel(
        corpus.walks, corpus.lengths, orders, w_in, w_out, neg_cdf,
        int(window), int(negative_samples), float(learning_rate), np.uint64(seed),
    )
    meta = {
        "dimension": dimension,
        "window": window,
        "epochs": epochs,
        "negative_samples": negative_samples,
        "learning_rate": {"initial": learning_rate, "schedule": "linear", "floor": learning_rate * 1e-4},
        "init": "uniform(+-0.5/dimension)",
        "seed": int(seed),
        "walk_seed": corpus.rng_seed,
        "walk_length": corpus.walk_length,
        "walks_per_node": corpus.walks_per_node,
        "epoch_losses": [float(x) for x in losses],
    }
    if not np.all(np.isfinite(w_in)):
        raise FloatingPointError("non-finite embedding")
    return EmbeddingMatrix(corpus.node_ids, w_in, meta)


def cosine_similarity(a, b) -> float:
    """``a . b / (|a| |b|)``, clipped into [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("vectors differ in dimension")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("undefined similarity for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.clip(unit @ unit.T, -1.0, 1.0)


def signature_contrast(graph: SpatialGraph, embeddings: EmbeddingMatrix) -> tuple[float, float]:
    """Mean cosine over cell pairs with identical vs. disjoint AoI signatures."""
    cells = graph.cell_ids
    sigs = [frozenset(aoi_signature(graph, c)) for c in cells]
    sim = cosine_matrix(embeddings.subset(cells))
    n = len(cells)
    iu = np.triu_indices(n, k=1)
    uniq = {s: k for k, s in enumerate(dict.fromkeys(sigs))}
    code = np.array([uniq[s] for s in sigs])
    same = code[iu[0]] == code[iu[1]]
    # signatures as element-id bitsets for a vectorised disjointness test
    elems = sorted({e for s in uniq for e in s})
    bit = {e: k for k, e in enumerate(elems)}
    masks = np.zeros((len(uniq), len(elems)), dtype=bool)
    for s, k in uniq.items():
        for e in s:
            masks[k, bit[e]] = True
    overlap = (masks.astype(np.int64) @ masks.T.astype(np.int64)) > 0
    disjoint = ~overlap[code[iu[0]], code[iu[1]]]
    vals = sim[iu]
    return float(vals[same].mean()), float(vals[disjoint].mean())
