"""Adaptive spatial-temporal sampling of thermal preference.

Floor plans are meshed into cells, embedded with random walks over a
cell/element proximity graph, clustered into zones, and sampled by a
trigger engine that prompts only for under-sampled (zone, condition) pairs.
"""
from .config import RunConfig, load_config
from .geometry import FloorPlan, MeshGrid, Zoning, discretize, dissolve_cells
from .metrics import cochran_sample_size, q_s
from .pipeline import run_pipeline

__all__ = [
    "FloorPlan",
    "MeshGrid",
    "RunConfig",
    "Zoning",
    "cochran_sample_size",
    "discretize",
    "dissolve_cells",
    "load_config",
    "q_s",
    "run_pipeline",
]
__version__ = "0.1.0"
