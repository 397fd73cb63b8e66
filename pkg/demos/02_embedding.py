"""Build the spatial graph, embed it and cluster cells into zones."""
from __future__ import annotations

from adaptive_sampler.build2vec import generate_walks, signature_contrast, train_skipgram
from adaptive_sampler.config import DEFAULT_AOI_RADII
from adaptive_sampler.fixtures import twin_rooms
from adaptive_sampler.geometry import discretize
from adaptive_sampler.spatial_graph import build_graph
from adaptive_sampler.zoning import build2vec_zoning, zone_signature_table


def main() -> None:
    plan = twin_rooms()
    mesh = discretize(plan, 0.5)
    graph = build_graph(mesh, plan.elements, DEFAULT_AOI_RADII, spaces=plan.spaces)
    print(f"graph: {len(graph)} nodes, {len(graph.edges)} edges")

    # short walks and a small window keep this under a few seconds
    corpus = generate_walks(graph, walk_length=20, walks_per_node=10, seed=1)
    emb = train_skipgram(corpus, dimension=50, window=5, epochs=2, seed=2)
    print("loss per epoch:", [round(v, 4) for v in emb.meta["epoch_losses"]])

    same, disjoint = signature_contrast(graph, emb)
    print(f"mean cosine, identical signatures {same:.3f} vs disjoint {disjoint:.3f}")

    zoning = build2vec_zoning(emb, mesh, k=6, seed=3)
    for row in zone_signature_table(zoning, graph):
        print(f"zone {row['zone_id']:>2}: {row['cell_count']:>3} cells, signature {row['dominant_aoi_signature']}")


if __name__ == "__main__":
    main()
