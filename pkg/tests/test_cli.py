from __future__ import annotations

import json
import subprocess
import sys

import pytest

from adaptive_sampler.cli import main
from adaptive_sampler.config import ConfigError, RunConfig, config_schema, load_config
from adaptive_sampler.geometry import zoning_from_geojson

FAST = {
    "walk": {"length": 10, "per_node": 4},
    "embedding": {"window": 3, "epochs": 1},
    "simulation": {"days": 2, "occupants": 4},
}


@pytest.fixture(scope="module")
def fast_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "fast.json"
    path.write_text(json.dumps(FAST))
    return str(path)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, fast_config):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--fixture", "small", "--config", fast_config, "--out", str(out)]) == 0
    return out


# -- config ----------------------------------------------------------------------------------

def test_defaults_match_reference_values():
    c = RunConfig()
    assert (c.cell_size, c.k_zones, c.k_conditions, c.grid_square) == (0.5, 20, 10, 4.0)
    assert (c.walk.length, c.walk.per_node) == (50, 50)
    assert (c.embedding.dim, c.embedding.window) == (50, 30)
    assert (c.trigger.cooldown, c.trigger.y, c.trigger.x) == (900.0, 1, 10)
    assert (c.cochran.population, c.cochran.margin, c.cochran.confidence, c.cochran.p) == (650, 0.11, 0.90, 0.5)
    assert c.aoi_radii["ceiling_fan"] == 2.5 and c.aoi_radii["stand_fan"] == 1.5


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigError, match=r"embedding\.dimm"):
        load_config({"embedding": {"dimm": 3}})
    with pytest.raises(ConfigError, match=r"trigger\.cooldown"):
        load_config({"trigger": {"cooldown": -1}})
    with pytest.raises(ConfigError, match="aoi_radii"):
        load_config({"aoi_radii": {"chandelier": 1.0}})


def test_overrides_and_hash():
    a = load_config({}, seeds__walks=7)
    assert a.seeds.walks == 7
    assert a.config_hash() != RunConfig().config_hash()
    assert load_config({"paths": {"output_dir": "elsewhere"}}).config_hash() == RunConfig().config_hash()
    with pytest.raises(ConfigError):
        load_config({}, seeds__sim=2**64)


def test_schema_is_published(capsys):
    assert "properties" in config_schema()
    assert main(["schema"]) == 0
    assert '"RunConfig"' in capsys.readouterr().out


# -- pipeline commands -------------------------------------------------------------------------

def test_full_pipeline_produces_all_artifacts(full_run):
    for name in ("plan.geojson", "mesh.json", "graph.json", "embeddings.txt", "embeddings.meta.json",
                 "zones_spaces.geojson", "zones_grid.geojson", "zones_build2vec.geojson", "zone_counts.json",
                 "conditions.json", "trace/environment.csv", "trace/streams.csv", "trace/trace.json",
                 "events_build2vec.csv", "decisions_build2vec.jsonl", "evaluation.json",
                 "report.json", "per_zone.csv", "plot_data.csv", "table.md"):
        assert (full_run / name).exists(), name
    config_hash = load_config(FAST).config_hash()
    for stage in ("ingest", "discretize", "graph", "embed", "zone", "conditions", "simulate", "evaluate", "report"):
        man = json.loads((full_run / "manifests" / f"{stage}.json").read_text())
        assert man["config_hash"] == config_hash
        assert man["seeds"] == RunConfig().seeds.model_dump()
    report = json.loads((full_run / "report.json").read_text())
    assert report["comparison"]["reference_claim"] == "18-23% higher overall sampling quality"
    assert "build2vec_vs_square_grid_overall_ratio" in report["comparison"]
    classes = {s["method"]: s["scalability_class"] for s in report["scenarios"]}
    assert classes == {"spaces": "Linear O(N)", "square_grid": "Linear O(N)", "build2vec": "Constant O(1)"}


def test_rerun_gives_identical_manifests(full_run, tmp_path, fast_config):
    assert main(["run", "--fixture", "small", "--config", fast_config, "--out", str(tmp_path)]) == 0
    for man in sorted((full_run / "manifests").iterdir()):
        assert (tmp_path / "manifests" / man.name).read_bytes() == man.read_bytes()


def test_zone_all_partitions_same_cells(full_run):
    partitions = []
    for m in ("spaces", "grid", "build2vec"):
        z = zoning_from_geojson(json.loads((full_run / f"zones_{m}.geojson").read_text()))
        cells = [c for zone in z.zones for c in zone.member_cell_ids]
        assert len(cells) == len(set(cells))
        partitions.append(sorted(cells))
    mesh = json.loads((full_run / "mesh.json").read_text())
    assert partitions[0] == partitions[1] == partitions[2] == sorted(c["cell_id"] for c in mesh["cells"])


def test_missing_upstream_names_command(tmp_path, capsys):
    assert main(["discretize", "--out", str(tmp_path)]) != 0
    assert "'ingest'" in capsys.readouterr().err
    assert main(["report", "--out", str(tmp_path)]) != 0
    assert "'evaluate'" in capsys.readouterr().err


def test_config_violation_reports_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"walk": {"length": 0}}))
    assert main(["ingest", "--fixture", "small", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "walk.length" in capsys.readouterr().err


def test_changed_config_detected(full_run, fast_config, capsys):
    code = main(["evaluate", "--config", fast_config, "--out", str(full_run), "--seed-override", "sim=99"])
    assert code != 0
    assert "config hash" in capsys.readouterr().err


def test_tampered_artifact_detected(tmp_path, fast_config, capsys):
    assert main(["ingest", "--fixture", "twin-rooms", "--config", fast_config, "--out", str(tmp_path)]) == 0
    plan = tmp_path / "plan.geojson"
    plan.write_text(plan.read_text().replace("room_a", "room_z"))
    assert main(["discretize", "--config", fast_config, "--out", str(tmp_path)]) != 0
    assert "manifest hash" in capsys.readouterr().err


def test_seed_override_recorded(tmp_path, fast_config):
    args = ["--config", fast_config, "--out", str(tmp_path), "--seed-override", "mesh=12345678901234567890"]
    assert main(["ingest", "--fixture", "twin-rooms", *args]) == 0
    man = json.loads((tmp_path / "manifests" / "ingest.json").read_text())
    assert man["seeds"]["mesh"] == 12345678901234567890


def test_bad_seed_override_rejected():
    with pytest.raises(SystemExit):
        main(["ingest", "--seed-override", "nope=1"])
    with pytest.raises(SystemExit):
        main(["ingest", "--seed-override", "sim=-1"])


def test_single_method_zone(tmp_path, fast_config):
    args = ["--config", fast_config, "--out", str(tmp_path)]
    for cmd in (["ingest", "--fixture", "twin-rooms"], ["discretize"], ["graph"]):
        assert main([*cmd, *args]) == 0
    assert main(["zone", "--method", "spaces", "--no-mirror", *args]) == 0
    assert (tmp_path / "zones_spaces.geojson").exists()
    assert not (tmp_path / "zones_build2vec.geojson").exists()
    assert main(["zone", "--method", "build2vec", *args]) != 0  # embed has not run


def test_console_entry_point(tmp_path):
    env_cmd = [sys.executable, "-m", "adaptive_sampler", "ingest", "--fixture", "mirrored", "--out", str(tmp_path)]
    proc = subprocess.run(env_cmd, capture_output=True, text=True, env={"ADAPTIVE_SAMPLER_LOG": "info",
                                                                        "PATH": "/usr/bin:/bin"})
    assert proc.returncode == 0, proc.stderr
    assert "ingest: wrote" in proc.stderr
    man = json.loads((tmp_path / "manifests" / "ingest.json").read_text())
    assert man["params"]["spaces"] == 16
