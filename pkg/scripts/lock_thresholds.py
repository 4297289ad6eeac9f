"""Regenerate tests/data/locked_thresholds.json.

Runs the end-to-end reconstruction protocols used by the acceptance tests,
then locks error ceilings as the measured value times a safety margin.
The committed JSON is the contract; rerun this only when the protocol
itself changes, and review the resulting diff.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

import meshcs as mc

PROTOCOL = {
    "solver": {"threshold": 3.75, "residual_tol": 0.06, "max_stages": 40},
    "order": 5,
    "mesh_2d": {"points": 33067, "holes": 6, "seed": 20260825},
    "mesh_3d": {"points": 100000, "holes": 4, "seed": 777, "dim": 3},
    "sample_seed": 424242,
    "partition_seed": 99001122,
    "partitions": 16,
}

MARGINS = {"f_r10": 1.3, "g_r30": 1.3, "rank_max": 1.4}


def solver_config() -> mc.StompConfig:
    s = PROTOCOL["solver"]
    return mc.StompConfig(threshold=s["threshold"], residual_tol=s["residual_tol"],
                          max_stages=s["max_stages"])


def measure() -> dict[str, float]:
    cfg = solver_config()
    w = PROTOCOL["order"]
    spec2 = PROTOCOL["mesh_2d"]
    cloud = mc.gen_holed_mesh(spec2["points"], spec2["holes"], spec2["seed"])
    n = cloud.n_points
    basis = mc.build_basis(mc.hierarchy_for_order(cloud, w), w)
    seed = PROTOCOL["sample_seed"]

    out = {}
    for key, field, ratio in (("f_r10", mc.eval_field_f(cloud.coords), 10),
                              ("g_r30", mc.eval_field_g(cloud.coords), 30)):
        m = min(n, max(1, round(n / ratio)))
        bundle = mc.make_bundle(field, mc.BernoulliSpec(n, m, seed), key)
        t0 = time.perf_counter()
        f_r, _, res = mc.reconstruct_full(bundle, cloud, w, stomp=cfg, basis=basis)
        err = mc.error_norm(field, f_r)
        print(f"{key}: err={err:.5e} converged={res.converged} "
              f"stages={res.stages_used} ({time.perf_counter() - t0:.1f}s)")
        out[key] = err

    spec3 = PROTOCOL["mesh_3d"]
    cloud3 = mc.gen_holed_mesh(spec3["points"], spec3["holes"], spec3["seed"],
                               dim=spec3["dim"])
    field3 = mc.eval_field_smooth(cloud3.coords)
    parts = mc.partition_cloud(cloud3, PROTOCOL["partitions"])
    bundles = []
    for p in parts:
        sub = field3[p.start:p.stop]
        m = max(1, round(sub.size / 10))
        bspec = mc.BernoulliSpec(sub.size, m,
                                 mc.derive_rank_seed(PROTOCOL["partition_seed"], p.rank_id))
        bundles.append(mc.make_bundle(sub, bspec, "smooth", rank_id=p.rank_id))
    t0 = time.perf_counter()
    _, reports = mc.reconstruct_partitioned_report(bundles, cloud3, parts, w,
                                                   stomp=cfg, reference=field3)
    worst = max(r.final_error for r in reports)
    print(f"rank_max: err={worst:.5e} all converged="
          f"{all(r.final_converged for r in reports)} ({time.perf_counter() - t0:.1f}s)")
    out["rank_max"] = worst
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    default_out = Path(__file__).resolve().parents[1] / "tests" / "data" / "locked_thresholds.json"
    parser.add_argument("--out", default=str(default_out))
    args = parser.parse_args()

    pilots = measure()
    payload = dict(PROTOCOL)
    for key, pilot in pilots.items():
        locked = round(pilot * MARGINS[key], 2)
        payload[key] = {"pilot": pilot, "margin": MARGINS[key], "locked": locked}
        print(f"lock {key}: {pilot:.5e} * {MARGINS[key]} -> {locked}")
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
