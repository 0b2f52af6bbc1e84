#!/usr/bin/env python3
"""Sweep the group-diffusion factor and report time-in-review reductions.

For each diffusion value and seed, runs a paired pair of simulator arms
(policy none vs bystander_rnd) and prints the median TIR reduction on
group-only diffs, plus the guardrail columns: per-review service-time
means and individually-assigned median TIR, which must match across arms.
The shipped configs/bystander_paper.json was chosen from this sweep.

Usage: python3 scripts/calibrate_bystander.py [--days 55] [--seeds 0 1 2]
"""

import argparse

from revrec.sim import SimConfig, run_sim


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, default=55)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument(
        "--diffusion", type=float, nargs="+",
        default=[1.1, 1.15, 1.2, 1.22, 1.25, 1.3, 1.4, 1.6],
    )
    args = ap.parse_args()

    base = dict(
        n_engineers=120, n_teams=24, diff_arrival_rate=8.0,
        base_response_rate=0.5, group_only_fraction=0.7,
        rework_probability=0.25, sim_days=args.days,
    )
    print("diffusion  seed  reduction  n_group  service none/rnd     individual none/rnd")
    for d in args.diffusion:
        for seed in args.seeds:
            none = run_sim(SimConfig(**base, diffusion_factor=d, seed=seed, policy="none"))
            rnd = run_sim(SimConfig(**base, diffusion_factor=d, seed=seed, policy="bystander_rnd"))
            red = (1 - rnd.median_tir_hours_group_only / none.median_tir_hours_group_only) * 100
            print(
                f"{d:9.2f}  {seed:4d}  {red:+8.2f}%  {none.n_group_only:7d}"
                f"  {none.mean_service_hours:.4f}/{rnd.mean_service_hours:.4f}"
                f"  {none.median_tir_hours_individual:.3f}/{rnd.median_tir_hours_individual:.3f}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
