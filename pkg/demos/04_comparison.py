"""Run the three zoning scenarios on the bundled office and print the report."""
from __future__ import annotations

import time

from adaptive_sampler import load_config, run_pipeline
from adaptive_sampler.fixtures import small_office


def main() -> None:
    # reduced walk settings; the defaults take minutes on one CPU
    config = load_config({"walk": {"length": 20, "per_node": 10}, "embedding": {"window": 5, "epochs": 2}})
    t0 = time.perf_counter()
    run = run_pipeline(small_office(), config)
    print(run.report.table())
    print(run.report.comparison())
    print(f"finished in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
