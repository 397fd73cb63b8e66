from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_sampler.build2vec import (
    EmbeddingMatrix,
    WalkCorpus,
    cosine_similarity,
    generate_walks,
    signature_contrast,
    train_skipgram,
)
from adaptive_sampler.config import DEFAULT_AOI_RADII
from adaptive_sampler.fixtures import twin_rooms
from adaptive_sampler.geometry import discretize
from adaptive_sampler.spatial_graph import SpatialGraph, build_graph

FAST = dict(walk_length=20, walks_per_node=10)


def _toy(ids, edges):
    index = {n: i for i, n in enumerate(ids)}
    e = sorted((min(index[u], index[v]), max(index[u], index[v]), "adjacency") for u, v in edges)
    return SpatialGraph(tuple(ids), ("cell",) * len(ids), (None,) * len(ids), tuple(e))


@pytest.fixture(scope="module")
def twin_graph():
    plan = twin_rooms()
    mesh = discretize(plan, 0.5)
    return build_graph(mesh, plan.elements, DEFAULT_AOI_RADII, spaces=plan.spaces)


# -- walks -------------------------------------------------------------------------

def test_path_graph_walk():
    g = _toy(["a", "b", "c"], [("a", "b"), ("b", "c")])
    corpus = generate_walks(g, walk_length=3, walks_per_node=20, seed=1)
    for walk in corpus.as_lists():
        if walk[0] == "a":
            assert walk[1] == "b" and walk[2] in {"a", "c"}
            assert len(walk) == 3


def test_isolated_node_walk():
    g = _toy(["a", "b", "z"], [("a", "b")])
    corpus = generate_walks(g, walk_length=5, walks_per_node=3, seed=0)
    assert [w for w in corpus.as_lists() if w[0] == "z"] == [["z"]] * 3


def test_only_neighbour_always_chosen():
    g = _toy(["a", "b"], [("a", "b")])
    corpus = generate_walks(g, walk_length=10_001, walks_per_node=1, seed=7)
    walk = corpus.as_lists()[0]
    assert walk[0] == "a"
    steps_from_a = [walk[i + 1] for i in range(len(walk) - 1) if walk[i] == "a"]
    assert len(steps_from_a) == 5_000
    assert steps_from_a.count("b") / len(steps_from_a) == 1.0


def test_walks_follow_edges(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=3)
    edges = twin_graph.edge_set()
    for walk in corpus.as_lists():
        assert len(walk) <= FAST["walk_length"]
        for u, v in zip(walk, walk[1:]):
            assert (u, v) in edges or (v, u) in edges


def test_every_node_starts_walks(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=0)
    starts = corpus.walks[:, 0]
    assert np.bincount(starts, minlength=len(twin_graph)).tolist() == [FAST["walks_per_node"]] * len(twin_graph)


def test_walk_determinism(twin_graph):
    a = generate_walks(twin_graph, **FAST, seed=11)
    b = generate_walks(twin_graph, **FAST, seed=11)
    c = generate_walks(twin_graph, **FAST, seed=12)
    assert np.array_equal(a.walks, b.walks)
    assert not np.array_equal(a.walks, c.walks)


def test_walk_stream_is_per_start_node():
    # adding an unrelated component leaves the existing nodes' walks untouched
    g1 = _toy(["a", "b", "c"], [("a", "b"), ("b", "c")])
    g2 = _toy(["a", "b", "c", "x", "y"], [("a", "b"), ("b", "c"), ("x", "y")])
    w1 = generate_walks(g1, walk_length=8, walks_per_node=4, seed=5).as_lists()
    w2 = generate_walks(g2, walk_length=8, walks_per_node=4, seed=5).as_lists()
    assert [w for w in w1] == [w for w in w2 if w[0] in "abc"]


def test_walk_rejects_empty_graph():
    with pytest.raises(ValueError):
        generate_walks(_toy([], []))


# -- skip-gram ------------------------------------------------------------------------

def _corpus(walks, ids):
    index = {n: i for i, n in enumerate(ids)}
    width = max(len(w) for w in walks)
    arr = np.full((len(walks), width), -1, dtype=np.int64)
    for r, w in enumerate(walks):
        arr[r, : len(w)] = [index[t] for t in w]
    return WalkCorpus(tuple(ids), arr, np.array([len(w) for w in walks]), width, 1, 0)


def test_cooccurrence_drives_similarity():
    ids = ["a", "b", "c", "d"]
    walks = [["a", "b"] * 10] * 50 + [["c", "d"] * 10] * 50
    emb = train_skipgram(_corpus(walks, ids), dimension=16, window=2, epochs=5, negative_samples=3, seed=0)
    assert cosine_similarity(emb["a"], emb["b"]) > cosine_similarity(emb["a"], emb["c"])


def test_zero_epochs_is_initialisation():
    ids = ["a", "b", "c"]
    emb = train_skipgram(_corpus([["a", "b", "c"]], ids), dimension=8, window=1, epochs=0, seed=4)
    norms = np.linalg.norm(emb.vectors, axis=1)
    assert np.all((norms > 0) & (norms <= 1))
    assert np.all(np.abs(emb.vectors) <= 0.5 / 8)


@pytest.mark.parametrize("kw", [dict(dimension=0), dict(window=0), dict(dimension=-3)])
def test_bad_hyperparameters(kw):
    ids = ["a", "b"]
    with pytest.raises(ValueError):
        train_skipgram(_corpus([["a", "b"]], ids), **kw)


def test_embedding_byte_determinism(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=1)
    a = train_skipgram(corpus, dimension=16, window=5, epochs=1, seed=9)
    b = train_skipgram(corpus, dimension=16, window=5, epochs=1, seed=9)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.to_text() == b.to_text()


def test_loss_decreases_per_epoch(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=2)
    emb = train_skipgram(corpus, dimension=50, window=5, epochs=3, seed=2)
    losses = emb.meta["epoch_losses"]
    assert len(losses) == 3
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert np.all(np.isfinite(emb.vectors))


def test_training_metadata(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=2)
    emb = train_skipgram(corpus, dimension=8, window=4, epochs=1, negative_samples=2, seed=6)
    m = emb.meta
    assert (m["dimension"], m["window"], m["epochs"], m["negative_samples"], m["seed"]) == (8, 4, 1, 2, 6)
    assert m["learning_rate"]["initial"] == 0.025
    assert m["walk_length"] == FAST["walk_length"]


def test_save_load_round_trip(tmp_path, twin_graph):
    corpus = generate_walks(twin_graph, walk_length=5, walks_per_node=2, seed=0)
    emb = train_skipgram(corpus, dimension=6, window=2, epochs=1, seed=0)
    path = tmp_path / "emb.txt"
    emb.save(path)
    header = path.read_text().splitlines()[0]
    assert header == f"{len(twin_graph)} 6"
    back = EmbeddingMatrix.load(path)
    assert back.node_ids == emb.node_ids
    assert back.vectors.tobytes() == emb.vectors.tobytes()
    assert back.meta == emb.meta


def test_signature_contrast_single_seed(twin_graph):
    corpus = generate_walks(twin_graph, **FAST, seed=0)
    emb = train_skipgram(corpus, dimension=50, window=5, epochs=2, seed=0)
    same, disjoint = signature_contrast(twin_graph, emb)
    assert same > disjoint


# -- cosine -----------------------------------------------------------------------------

def test_cosine_examples():
    assert cosine_similarity((1, 2, 3), (1, 2, 3)) == pytest.approx(1.0)
    assert cosine_similarity((1, 0), (0, 1)) == 0.0
    assert cosine_similarity((1, 0), (1, 1)) == pytest.approx(1 / math.sqrt(2), abs=1e-8)


def test_cosine_errors():
    with pytest.raises(ValueError, match="undefined similarity"):
        cosine_similarity((0, 0), (1, 1))
    with pytest.raises(ValueError):
        cosine_similarity((1, 0), (1, 0, 0))


vec = arrays(np.float64, 5, elements=st.floats(-100, 100, allow_nan=False))


@settings(max_examples=200)
@given(vec, vec, st.floats(1e-3, 1e3))
def test_cosine_properties(a, b, k):
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    c = cosine_similarity(a, b)
    assert abs(c) <= 1 + 1e-12
    assert c == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert c == pytest.approx(cosine_similarity(k * a, b), abs=1e-9)
