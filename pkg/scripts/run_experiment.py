#!/usr/bin/env python3
"""End-to-end experiment: corpus, model, three backtest conditions, deltas.

Generates (or reuses) a synthetic corpus, trains the ranker on the first
80% of diffs by publish time, backtests v1 / v2 / v2+wl on the held-out
tail, and prints the two comparison tables. All artifacts and manifests
land in the chosen output directory, so a rerun with the same config is
byte-identical.

Usage: python3 scripts/run_experiment.py --outdir runs/exp1 [--config cfg.json]
"""

import argparse
import sys
from pathlib import Path

from revrec.cli import main as cli


def run(argv: list[str]) -> None:
    rc = cli(argv)
    if rc != 0:
        print(f"step failed with exit code {rc}: {argv}", file=sys.stderr)
        raise SystemExit(rc)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", required=True)
    ap.add_argument("--config", help="global config JSON; defaults apply if omitted")
    ap.add_argument("--split", default="0.8")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    base = ["--config", args.config] if args.config else []
    corpus = str(out / "corpus.jsonl")
    model = str(out / "model.json")

    if not Path(corpus).exists():
        run(["synth", *base, "--out", corpus])
    run(["validate", "--corpus", corpus])
    run(["train", *base, "--corpus", corpus, "--out", model, "--split", args.split])
    for cond in ("v1", "v2", "v2+wl"):
        name = cond.replace("+", "_")
        run(["evaluate", *base, "--corpus", corpus, "--model", model,
             "--condition", cond, "--split", args.split,
             "--out", str(out / f"report_{name}.json")])
    print("\n=== v2 vs v1 ===")
    run(["compare", *base, "--a", str(out / "report_v1.json"),
         "--b", str(out / "report_v2.json"), "--out", str(out / "delta_v2_v1.json")])
    print("\n=== v2+wl vs v2 ===")
    run(["compare", *base, "--a", str(out / "report_v2.json"),
         "--b", str(out / "report_v2_wl.json"), "--out", str(out / "delta_wl_v2.json")])
    print("\nmodel feature importance:")
    run(["importance", "--model", model])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
