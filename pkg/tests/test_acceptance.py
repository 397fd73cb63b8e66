"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

Run with ``python3 -m pytest tests/test_acceptance.py -s`` to see the lines
inline; they are also repeated in the terminal summary.
"""
from __future__ import annotations

import contextlib
import itertools
import json
import math
import time

import numpy as np
import pytest

from adaptive_sampler.build2vec import cosine_similarity, generate_walks, signature_contrast, train_skipgram
from adaptive_sampler.cli import main
from adaptive_sampler.config import DEFAULT_AOI_RADII, load_config
from adaptive_sampler.fixtures import small_office, square_room, twin_rooms
from adaptive_sampler.geometry import (
    discretize,
    dissolve_cells,
    mirror_plan,
    point_in_polygon,
    project_from_wgs84,
    project_to_wgs84,
)
from adaptive_sampler.metrics import adequacy, adequacy_redundancy, cochran_sample_size, q_s, scalability_class, softmax
from adaptive_sampler.pipeline import run_pipeline, zone_counts
from adaptive_sampler.simulator import fit_conditions, generate_trace, run_scenario
from adaptive_sampler.spatial_graph import build_graph
from adaptive_sampler.triggering import ledger_from_events, remove_redundant
from adaptive_sampler.zoning import grid_zoning, spaces_zoning

from .oracles import convex_polygon, q_s_literal, winding_number

# Reduced walk and window settings keep the embedding affordable on one CPU;
# simulation settings stay at their defaults (14 days, 10 occupants).
FAST = {"walk": {"length": 20, "per_node": 10}, "embedding": {"window": 5, "epochs": 2}}

RESULTS: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    notes: list[str] = []
    try:
        yield notes
    except BaseException:
        line = f"FAIL criterion {number}: {title}"
        RESULTS.append(line)
        print(line)
        raise
    detail = f" ({'; '.join(notes)})" if notes else ""
    line = f"PASS criterion {number}: {title}{detail}"
    RESULTS.append(line)
    print(line)


@pytest.fixture(scope="module")
def office_run():
    config = load_config(FAST)
    start = time.perf_counter()
    run = run_pipeline(small_office(), config)
    return run, time.perf_counter() - start


# 1 ------------------------------------------------------------------------------------------------

def test_criterion_1_cochran():
    with criterion(1, "Cochran sample size for 650 / 0.11 / 0.90 / 0.5") as notes:
        n = cochran_sample_size(650, 0.11, 0.90, 0.5)
        assert abs(n - 50) <= 2
        best = math.inf
        for _ in range(50):
            t0 = time.perf_counter()
            cochran_sample_size(650, 0.11, 0.90, 0.5)
            best = min(best, time.perf_counter() - t0)
        assert best < 1e-3
        notes += [f"n={n}", f"{best * 1e6:.1f} us"]


# 2 ------------------------------------------------------------------------------------------------

def test_criterion_2_q_s_oracle():
    with criterion(2, "Q_s equals literal oracle; Q_s = 1 iff ledger is perfect") as notes:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            x = int(rng.integers(1, 11))
            y = int(rng.integers(1, 3))
            n = int(rng.integers(0, 101))
            counts = np.bincount(rng.integers(0, x, n), minlength=x).tolist()
            ledger = {(0, u): a for u, a in enumerate(counts)}
            worst = max(worst, abs(adequacy_redundancy(ledger, 0, x, y) - q_s_literal(counts, x, y)))
        assert worst <= 1e-12
        checked = 0
        for x in range(1, 5):
            for y in (1, 2):
                for counts in itertools.product(range(13), repeat=x):
                    if sum(counts) > 12:
                        continue
                    value = q_s(list(counts), x, y)
                    assert (value == 1.0) == all(a == y for a in counts)
                    assert abs(value - q_s_literal(counts, x, y)) <= 1e-12
                    checked += 1
        notes += [f"max random error {worst:.1e}", f"{checked} exhaustive ledgers"]


# 3 ------------------------------------------------------------------------------------------------

def test_criterion_3_metric_properties():
    with criterion(3, "softmax, cosine and Cochran properties") as notes:
        rng = np.random.default_rng(3)
        for _ in range(10_000):
            z = rng.normal(0, 10, int(rng.integers(1, 20)))
            out = softmax(z)
            assert abs(out.sum() - 1) <= 1e-9
            np.testing.assert_allclose(softmax(z + rng.uniform(-100, 100)), out, rtol=0, atol=1e-12)
        for _ in range(2000):
            a, b = rng.normal(size=(2, 8))
            k = float(rng.uniform(1e-3, 1e3))
            c = cosine_similarity(a, b)
            assert c == cosine_similarity(b, a)
            assert abs(cosine_similarity(k * a, b) - c) <= 1e-12
            assert -1 - 1e-12 <= c <= 1 + 1e-12
        pops = [1, 2, 5, 10, 50, 100, 650, 1000, 10**4, 10**6]
        sizes = [cochran_sample_size(p, 0.11, 0.90) for p in pops]
        assert sizes == sorted(sizes)
        margins = [0.01, 0.02, 0.05, 0.11, 0.2, 0.3, 0.5]
        sizes = [cochran_sample_size(650, e, 0.90) for e in margins]
        assert sizes == sorted(sizes, reverse=True)
        notes.append("10000 softmax vectors, 2000 cosine pairs")


# 4 ------------------------------------------------------------------------------------------------

def test_criterion_4_geometry():
    with criterion(4, "geometry suite") as notes:
        t0 = time.perf_counter()
        plan = square_room(10.0)
        mesh = discretize(plan, 0.5)
        assert len(mesh) == 400
        rng = np.random.default_rng(4)
        for k in (1, 2, 5, 20):
            labels = rng.integers(0, k, len(mesh))
            zoning = dissolve_cells(mesh, dict(zip(mesh.cell_ids, labels.tolist())))
            assert abs(zoning.area - 100.0) <= 1e-6
        office = small_office()
        office_mesh = discretize(office, 0.5)
        for z in (spaces_zoning(office, office_mesh), grid_zoning(office, office_mesh, 4.0)):
            assert abs(z.area - len(office_mesh) * 0.25) <= 1e-6
        anchor = (1.30, 103.77)
        worst = 0.0
        for x, y in rng.uniform(-500, 500, size=(1000, 2)):
            back = project_from_wgs84(project_to_wgs84((x, y), anchor), anchor)
            worst = max(worst, math.dist(back, (x, y)))
        assert worst < 1e-6
        for _ in range(10_000):
            ring = convex_polygon(rng)
            p = rng.uniform(-1.5, 1.5, size=2)
            assert point_in_polygon(p, ring) == (winding_number(p, ring) != 0)
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0
        notes += [f"round trip {worst:.1e} m", f"{elapsed:.2f} s"]


# 5 ------------------------------------------------------------------------------------------------

def test_criterion_5_embedding_structure():
    with criterion(5, "identical-signature cells closer than disjoint-signature cells") as notes:
        t0 = time.perf_counter()
        plan = twin_rooms()
        mesh = discretize(plan, 0.5)
        assert len(mesh) == 400
        graph = build_graph(mesh, plan.elements, DEFAULT_AOI_RADII, spaces=plan.spaces)
        wins = 0
        for seed in range(20):
            corpus = generate_walks(graph, 20, 10, seed=seed)
            emb = train_skipgram(corpus, dimension=50, window=5, epochs=2, seed=seed)
            same, disjoint = signature_contrast(graph, emb)
            wins += same > disjoint
        corpus = generate_walks(graph, 20, 10, seed=7)
        a = train_skipgram(corpus, dimension=50, window=5, epochs=2, seed=7)
        b = train_skipgram(generate_walks(graph, 20, 10, seed=7), dimension=50, window=5, epochs=2, seed=7)
        assert a.to_text().encode() == b.to_text().encode()
        elapsed = time.perf_counter() - t0
        assert wins >= 19
        assert elapsed < 60.0
        notes += [f"{wins}/20 seeds", f"{elapsed:.1f} s"]


# 6 ------------------------------------------------------------------------------------------------

def test_criterion_6_scalability_classes():
    with criterion(6, "mirroring scales baselines, build2vec stays bounded") as notes:
        config = load_config(FAST)
        base = zone_counts(small_office(), config)
        grown = zone_counts(mirror_plan(small_office()), config)
        assert grown["spaces"] == 2 * base["spaces"]
        assert 1.8 <= grown["square_grid"] / base["square_grid"] <= 2.2
        assert grown["build2vec"] <= 20
        classes = {m: scalability_class(base[m], grown[m]) for m in base}
        assert classes == {"spaces": "Linear O(N)", "square_grid": "Linear O(N)", "build2vec": "Constant O(1)"}
        notes += [f"{m} {base[m]}->{grown[m]} {classes[m]}" for m in base]


# 7 ------------------------------------------------------------------------------------------------

def test_criterion_7_trigger_safety(office_run):
    run, _ = office_run
    with criterion(7, "trigger engine safety over 14 days with 10 occupants") as notes:
        config = load_config(FAST)
        assert (config.simulation.days, config.simulation.occupants) == (14, 10)
        assert config.trigger.y == 1 and not config.trigger.fine_tune
        t0 = time.perf_counter()
        trace = generate_trace(run.plan, config.simulation, config.seeds.sim)
        conditions = fit_conditions(trace, config.k_conditions, config.seeds.conditions)
        results = {m: run_scenario(trace, z, conditions, "adaptive", config.simulation, config.trigger, seed=config.seeds.sim)
                   for m, z in run.zonings.items()}
        elapsed = time.perf_counter() - t0
        total = 0
        for res in results.values():
            per_occ: dict[str, list[float]] = {}
            for e in res.events:
                per_occ.setdefault(e.occupant_id, []).append(e.timestamp)
            for times in per_occ.values():
                assert np.all(np.diff(sorted(times)) >= config.trigger.cooldown)
            keys = [(e.zone_id, e.condition_id) for e in res.events]
            assert len(keys) == len(set(keys))
            assert ledger_from_events(res.events).counts == res.ledger.counts
            total += len(res.events)
        assert total > 0
        assert elapsed < 120.0
        notes += [f"{total} accepted events over 3 zonings", f"{elapsed:.1f} s"]


# 8 ------------------------------------------------------------------------------------------------

def test_criterion_8_end_to_end_direction(office_run):
    run, elapsed = office_run
    with criterion(8, "build2vec overall quality exceeds square grid") as notes:
        by = run.report.by_method()
        ratio = by["build2vec"].overall / by["square_grid"].overall
        assert by["build2vec"].overall > by["square_grid"].overall
        comparison = run.report.to_dict()["comparison"]
        assert comparison["reference_claim"] == "18-23% higher overall sampling quality"
        assert comparison["build2vec_vs_square_grid_overall_ratio"] == pytest.approx(ratio)
        for res in run.results.values():
            y = load_config(FAST).trigger.y
            kept = remove_redundant(res.events, y)
            after = ledger_from_events(kept).counts
            assert all(v <= y for v in after.values())
            for zone in res.zoning.zones:
                before = [res.ledger.counts.get((zone.zone_id, u), 0) for u in range(10)]
                now = [after.get((zone.zone_id, u), 0) for u in range(10)]
                assert adequacy(before) == adequacy(now)
        notes += [f"ratio {ratio:.3f} ({(ratio - 1) * 100:+.1f}%)", "claimed 18-23%", f"pipeline {elapsed:.1f} s"]


# 9 ------------------------------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    with criterion(9, "two full runs give hash-identical manifests") as notes:
        cfg = tmp_path / "fast.json"
        cfg.write_text(json.dumps({**FAST, "simulation": {"days": 3}}))
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["run", "--fixture", "small", "--config", str(cfg), "--out", str(out)]) == 0
        names = sorted(p.name for p in (outs[0] / "manifests").iterdir())
        assert names == sorted(p.name for p in (outs[1] / "manifests").iterdir())
        n_outputs = 0
        for name in names:
            a = (outs[0] / "manifests" / name).read_bytes()
            assert a == (outs[1] / "manifests" / name).read_bytes()
            n_outputs += len(json.loads(a)["outputs"])
        notes.append(f"{len(names)} manifests, {n_outputs} artifacts")
