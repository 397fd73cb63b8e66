"""End-to-end orchestration, in memory and as on-disk artifact stages.

Each stage reads its upstream artifacts, checks them against the upstream
manifest, and writes its own outputs plus ``manifests/<stage>.json``.  A
manifest holds the config hash, the seed record and the SHA-256 of every
input and output file; it never holds timestamps, so identical runs produce
identical manifests.
"""
from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from .build2vec import EmbeddingMatrix, WalkCorpus, generate_walks, train_skipgram
from .config import RunConfig
from .fixtures import load_fixture
from .geometry import (
    FloorPlan,
    MeshGrid,
    Zoning,
    discretize,
    floor_plan_from_geojson,
    floor_plan_to_geojson,
    mirror_plan,
    zoning_from_geojson,
    zoning_to_geojson,
)
from .metrics import QualityReport, ScenarioQuality
from .simulator import (
    ScenarioResult,
    WorldTrace,
    compare_scenarios,
    fit_conditions,
    generate_trace,
    run_scenario,
    score_scenarios,
)
from .spatial_graph import SpatialGraph, build_graph
from .triggering import (
    TriggerConditionSet,
    decisions_to_jsonl,
    events_from_csv,
    events_to_csv,
)
from .zoning import (
    build2vec_zoning,
    grid_zoning,
    signature_table_csv,
    spaces_zoning,
    zone_signature_table,
)

log = logging.getLogger("adaptive_sampler")

# CLI method name -> zoning method label
METHODS = {"spaces": "spaces", "grid": "square_grid", "build2vec": "build2vec"}
STAGES = ("ingest", "discretize", "graph", "embed", "zone", "conditions", "simulate", "evaluate", "report")


class MissingArtifact(RuntimeError):
    """An upstream artifact is absent; the message names the command to run."""


class ArtifactMismatch(RuntimeError):
    """An artifact or config no longer matches the manifest that recorded it."""


def resolve_methods(method: str) -> list[str]:
    if method == "all":
        return list(METHODS)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from spaces, grid, build2vec, all")
    return [method]


# -- in-memory pipeline ------------------------------------------------------

def embed_plan(plan: FloorPlan, mesh: MeshGrid, config: RunConfig) -> tuple[SpatialGraph, WalkCorpus, EmbeddingMatrix]:
    emb = config.embedding
    graph = build_graph(
        mesh, plan.elements, config.aoi_radii, spaces=plan.spaces,
        adjacency=emb.adjacency, kind_hubs=emb.kind_hubs,
    )
    corpus = generate_walks(graph, config.walk.length, config.walk.per_node, seed=config.seeds.walks)
    vectors = train_skipgram(
        corpus, emb.dim, emb.window, emb.epochs, emb.negatives, seed=config.seeds.embed, learning_rate=emb.lr,
    )
    return graph, corpus, vectors


def make_zoning(method: str, plan: FloorPlan, mesh: MeshGrid, config: RunConfig,
                embedding: EmbeddingMatrix | None = None) -> Zoning:
    if method == "spaces":
        return spaces_zoning(plan, mesh)
    if method == "grid":
        return grid_zoning(plan, mesh, config.grid_square)
    if method == "build2vec":
        if embedding is None:
            raise ValueError("build2vec zoning needs an embedding")
        return build2vec_zoning(embedding, mesh, config.k_zones, seed=config.seeds.zoning)
    raise ValueError(f"unknown method {method!r}")


def zone_counts(plan: FloorPlan, config: RunConfig, methods: Iterable[str] = METHODS) -> dict[str, int]:
    """Zone count of each method on ``plan``, keyed by zoning label."""
    methods = list(methods)
    mesh = discretize(plan, config.cell_size)
    embedding = embed_plan(plan, mesh, config)[2] if "build2vec" in methods else None
    return {METHODS[m]: len(make_zoning(m, plan, mesh, config, embedding)) for m in methods}


@dataclass
class PipelineRun:
    plan: FloorPlan
    mesh: MeshGrid
    graph: SpatialGraph
    embedding: EmbeddingMatrix
    zonings: dict[str, Zoning]
    trace: WorldTrace
    conditions: TriggerConditionSet
    report: QualityReport
    results: dict[str, ScenarioResult] = field(repr=False)
    grown_counts: dict[str, int] | None = None


def run_pipeline(plan: FloorPlan, config: RunConfig, *, mirrored: bool = True) -> PipelineRun:
    """Every step from floor plan to quality report, without touching disk.

    With ``mirrored`` the three zonings are also built on the mirrored plan
    so the report carries scalability classes.
    """
    mesh = discretize(plan, config.cell_size)
    graph, _, embedding = embed_plan(plan, mesh, config)
    zonings = {METHODS[m]: make_zoning(m, plan, mesh, config, embedding) for m in METHODS}
    grown = zone_counts(mirror_plan(plan), config) if mirrored else None
    trace = generate_trace(plan, config.simulation, config.seeds.sim)
    conditions = fit_conditions(trace, config.k_conditions, config.seeds.conditions, config.simulation.calibration_days)
    report, results = compare_scenarios(trace, plan, zonings, conditions, config, grown)
    return PipelineRun(plan, mesh, graph, embedding, zonings, trace, conditions, report, results, grown)


# -- artifact stages -----------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class ArtifactStore:
    """Stage outputs under one directory, each stage sealed by a manifest."""

    def __init__(self, root: str | Path, config: RunConfig):
        self.root = Path(root)
        self.config = config
        self.config_hash = config.config_hash()

    def path(self, rel: str) -> Path:
        return self.root / rel

    def manifest_path(self, stage: str) -> Path:
        return self.root / "manifests" / f"{stage}.json"

    def manifest(self, stage: str) -> dict:
        p = self.manifest_path(stage)
        if not p.exists():
            raise MissingArtifact(f"missing {stage} artifacts in {self.root}; run the '{stage}' command first")
        return json.loads(p.read_text())

    def require(self, stage: str, *names: str) -> dict[str, str]:
        """Verify ``stage``'s manifest against the config and the files on disk.

        Returns ``{relative path: sha256}`` for ``names`` (every output when
        ``names`` is empty), ready to be recorded as inputs.
        """
        man = self.manifest(stage)
        if man["config_hash"] != self.config_hash:
            raise ArtifactMismatch(
                f"config hash {self.config_hash[:12]} differs from the one that produced the "
                f"{stage} artifacts ({man['config_hash'][:12]}); rerun '{stage}' with this config"
            )
        wanted = names or tuple(man["outputs"])
        out = {}
        for rel in wanted:
            if rel not in man["outputs"]:
                raise MissingArtifact(f"{rel} was not produced by '{stage}'; rerun '{stage}'")
            p = self.path(rel)
            if not p.exists():
                raise MissingArtifact(f"{rel} is missing; run the '{stage}' command first")
            if sha256_file(p) != man["outputs"][rel]:
                raise ArtifactMismatch(f"{rel} does not match its '{stage}' manifest hash")
            out[rel] = man["outputs"][rel]
        return out

    def write_text(self, rel: str, text: str) -> str:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return rel

    def seal(self, stage: str, inputs: dict[str, str], outputs: Iterable[str], params: dict | None = None) -> dict:
        outs = {rel: sha256_file(self.path(rel)) for rel in sorted(set(outputs))}
        man = {
            "stage": stage,
            "config_hash": self.config_hash,
            "seeds": self.config.seeds.model_dump(),
            "inputs": dict(sorted(inputs.items())),
            "outputs": outs,
            "params": params or {},
        }
        self.write_text(f"manifests/{stage}.json", _dump(man))
        log.info("%s: wrote %d artifacts", stage, len(outs))
        return man

    # loaders -------------------------------------------------------------

    def plan(self) -> FloorPlan:
        return floor_plan_from_geojson(json.loads(self.path("plan.geojson").read_text()), self.config.aoi_radii)

    def mesh(self) -> MeshGrid:
        return MeshGrid.from_dict(json.loads(self.path("mesh.json").read_text()))

    def zonings(self) -> dict[str, Zoning]:
        out = {}
        for m in self.manifest("zone")["params"]["methods"]:
            data = json.loads(self.path(f"zones_{m}.geojson").read_text())
            out[METHODS[m]] = zoning_from_geojson(data)
        return out


def stage_ingest(store: ArtifactStore, fixture: str | None = None) -> dict:
    cfg = store.config
    inputs: dict[str, str] = {}
    if fixture is not None:
        plan = load_fixture(fixture, cfg.aoi_radii)
        source = f"fixture:{fixture}"
    elif cfg.paths.floor_plan:
        src = Path(cfg.paths.floor_plan)
        if not src.exists():
            raise MissingArtifact(f"floor plan {src} not found")
        plan = floor_plan_from_geojson(json.loads(src.read_text()), cfg.aoi_radii)
        inputs[str(src)] = sha256_file(src)
        source = "file"
    else:
        raise MissingArtifact("no floor plan: pass --fixture or set paths.floor_plan in the config")
    plan.validate()
    store.write_text("plan.geojson", _dump(floor_plan_to_geojson(plan)))
    return store.seal("ingest", inputs, ["plan.geojson"], {
        "source": source, "spaces": len(plan.spaces), "elements": len(plan.elements),
        "gross_floor_area": plan.gross_floor_area,
    })


def stage_discretize(store: ArtifactStore) -> dict:
    inputs = store.require("ingest", "plan.geojson")
    mesh = discretize(store.plan(), store.config.cell_size)
    store.write_text("mesh.json", _dump(mesh.to_dict()))
    return store.seal("discretize", inputs, ["mesh.json"], {"cells": len(mesh)})


def stage_graph(store: ArtifactStore) -> dict:
    inputs = store.require("ingest", "plan.geojson") | store.require("discretize", "mesh.json")
    cfg, plan = store.config, store.plan()
    graph = build_graph(
        store.mesh(), plan.elements, cfg.aoi_radii, spaces=plan.spaces,
        adjacency=cfg.embedding.adjacency, kind_hubs=cfg.embedding.kind_hubs,
    )
    store.write_text("graph.json", _dump(graph.to_node_link()))
    return store.seal("graph", inputs, ["graph.json"], {"nodes": len(graph), "edges": len(graph.edges)})


def stage_embed(store: ArtifactStore) -> dict:
    inputs = store.require("graph", "graph.json")
    cfg = store.config
    graph = SpatialGraph.from_node_link(json.loads(store.path("graph.json").read_text()))
    corpus = generate_walks(graph, cfg.walk.length, cfg.walk.per_node, seed=cfg.seeds.walks)
    emb = train_skipgram(
        corpus, cfg.embedding.dim, cfg.embedding.window, cfg.embedding.epochs,
        cfg.embedding.negatives, seed=cfg.seeds.embed, learning_rate=cfg.embedding.lr,
    )
    emb.save(store.path("embeddings.txt"))
    return store.seal("embed", inputs, ["embeddings.txt", "embeddings.meta.json"], {"walks": len(corpus)})


def stage_zone(store: ArtifactStore, method: str = "all", mirrored: bool = True) -> dict:
    methods = resolve_methods(method)
    inputs = store.require("ingest", "plan.geojson") | store.require("discretize", "mesh.json")
    inputs |= store.require("graph", "graph.json")
    cfg, plan, mesh = store.config, store.plan(), store.mesh()
    graph = SpatialGraph.from_node_link(json.loads(store.path("graph.json").read_text()))
    embedding = None
    if "build2vec" in methods:
        inputs |= store.require("embed", "embeddings.txt")
        embedding = EmbeddingMatrix.load(store.path("embeddings.txt"))
    outputs = []
    counts = {}
    for m in methods:
        zoning = make_zoning(m, plan, mesh, cfg, embedding)
        counts[METHODS[m]] = len(zoning)
        outputs.append(store.write_text(f"zones_{m}.geojson", _dump(zoning_to_geojson(zoning))))
        outputs.append(store.write_text(
            f"zones_{m}.wgs84.geojson", _dump(zoning_to_geojson(zoning, anchor=plan.anchor))))
        outputs.append(store.write_text(
            f"zone_signatures_{m}.csv", signature_table_csv(zone_signature_table(zoning, graph))))
    table = {"zone_count": counts}
    if mirrored:
        log.info("zone: rebuilding %s on the mirrored plan", ", ".join(methods))
        table["zone_count_mirrored"] = zone_counts(mirror_plan(plan), cfg, methods)
    outputs.append(store.write_text("zone_counts.json", _dump(table)))
    return store.seal("zone", inputs, outputs, {"methods": methods, "mirrored": mirrored})


def stage_conditions(store: ArtifactStore) -> dict:
    inputs = store.require("ingest", "plan.geojson")
    cfg = store.config
    trace = generate_trace(store.plan(), cfg.simulation, cfg.seeds.sim)
    trace.save(store.path("trace"))
    conditions = fit_conditions(trace, cfg.k_conditions, cfg.seeds.conditions, cfg.simulation.calibration_days)
    store.write_text("conditions.json", _dump(conditions.to_dict()))
    outputs = ["trace/environment.csv", "trace/streams.csv", "trace/trace.json", "conditions.json"]
    return store.seal("conditions", inputs, outputs, {"trace_hash": trace.trace_hash(), "k": conditions.k})


def stage_simulate(store: ArtifactStore) -> dict:
    inputs = store.require("zone") | store.require("conditions")
    cfg = store.config
    trace = WorldTrace.load(store.path("trace"))
    conditions = TriggerConditionSet.from_dict(json.loads(store.path("conditions.json").read_text()))
    outputs, summary = [], {}
    for m in store.manifest("zone")["params"]["methods"]:
        zoning = store.zonings()[METHODS[m]]
        res = run_scenario(trace, zoning, conditions, cfg.simulation.policy, cfg.simulation, cfg.trigger,
                           seed=cfg.seeds.sim)
        outputs.append(store.write_text(f"events_{m}.csv", events_to_csv(res.events)))
        outputs.append(store.write_text(f"decisions_{m}.jsonl", decisions_to_jsonl(res.decisions)))
        summary[m] = {"events": len(res.events), "trace_hash": res.trace_hash}
    return store.seal("simulate", inputs, outputs, {"scenarios": summary, "policy": cfg.simulation.policy})


def stage_evaluate(store: ArtifactStore) -> dict:
    inputs = store.require("ingest", "plan.geojson") | store.require("zone") | store.require("simulate")
    cfg = store.config
    zonings = store.zonings()
    methods = store.manifest("zone")["params"]["methods"]
    events = {METHODS[m]: events_from_csv(store.path(f"events_{m}.csv").read_text()) for m in methods}
    counts = json.loads(store.path("zone_counts.json").read_text())
    scen = store.manifest("simulate")["params"]["scenarios"]
    trace_hashes = sorted({s["trace_hash"] for s in scen.values()})
    report = score_scenarios(
        store.plan(), zonings, events, cfg, counts.get("zone_count_mirrored"),
        metadata={"trace_hash": trace_hashes[0] if len(trace_hashes) == 1 else trace_hashes,
                  "policy": cfg.simulation.policy},
    )
    store.write_text("evaluation.json", _dump(report_state(report)))
    return store.seal("evaluate", inputs, ["evaluation.json"])


def stage_report(store: ArtifactStore) -> dict:
    inputs = store.require("evaluate", "evaluation.json")
    report = report_from_state(json.loads(store.path("evaluation.json").read_text()))
    outputs = [
        store.write_text("report.json", _dump(report.to_dict())),
        store.write_text("per_zone.csv", report.per_zone_csv()),
        store.write_text("plot_data.csv", report.plot_data_csv()),
        store.write_text("table.md", report.table()),
    ]
    return store.seal("report", inputs, outputs, {"comparison": report.comparison()})


def report_state(report: QualityReport) -> dict:
    """Raw scenario inputs of a report, enough to rebuild it exactly."""
    return {
        "metadata": report.metadata,
        "scenarios": [
            {
                "method": s.method, "zone_count": s.zone_count, "components": list(s.components),
                "zone_ids": s.zone_ids, "counts_before": s.counts_before, "counts_after": s.counts_after,
                "x": s.x, "y": s.y, "zone_count_grown": s.zone_count_grown,
                "scalability_class": s.scalability_class,
            }
            for s in report.scenarios
        ],
    }


def report_from_state(state: dict) -> QualityReport:
    scenarios = [ScenarioQuality(**{**s, "components": tuple(s["components"])}) for s in state["scenarios"]]
    return QualityReport(scenarios, state["metadata"]).finalize()


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "discretize": stage_discretize,
    "graph": stage_graph,
    "embed": stage_embed,
    "zone": stage_zone,
    "conditions": stage_conditions,
    "simulate": stage_simulate,
    "evaluate": stage_evaluate,
    "report": stage_report,
}
