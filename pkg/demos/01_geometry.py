"""Mesh a floor plan, dissolve cells into zones and export GeoJSON."""
from __future__ import annotations

import json

from adaptive_sampler.fixtures import small_office
from adaptive_sampler.geometry import discretize, mirror_plan, project_to_wgs84, zoning_to_geojson
from adaptive_sampler.zoning import grid_zoning, spaces_zoning


def main() -> None:
    plan = small_office()
    mesh = discretize(plan, 0.5)
    print(f"{len(plan.spaces)} spaces, {len(plan.elements)} elements, {len(mesh)} cells of 0.5 m")

    for zoning in (spaces_zoning(plan, mesh), grid_zoning(plan, mesh, 4.0)):
        print(f"{zoning.method:>12}: {len(zoning)} zones covering {zoning.area:.2f} m2")

    grown = mirror_plan(plan)
    print(f"mirrored plan: {len(grown.spaces)} spaces, {len(discretize(grown, 0.5))} cells")

    lat, lon = project_to_wgs84((10.0, 5.0), plan.anchor)
    print(f"local (10, 5) m -> lat {lat:.7f}, lon {lon:.7f}")

    doc = zoning_to_geojson(spaces_zoning(plan, mesh))
    props = doc["features"][0]["properties"]
    print("first feature:", json.dumps({k: v for k, v in props.items() if k != "member_cell_ids"}))


if __name__ == "__main__":
    main()
