"""Command line front end for the full pipeline.

One binary, subcommand per stage. Every run that writes an artifact also
writes a manifest next to it recording the resolved config digest, input
file digests, the seed, and library versions; two runs with identical
manifests produce byte-identical artifacts.

Exit codes: 1 for usage errors, 2 for data errors (unreadable or invalid
inputs), 3 for anything else. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import GlobalConfig, config_hash, resolve_config
from .corpus import load_corpus, save_corpus
from .errors import DataError, RevRecError
from .evaluate import BASELINE_V1, BacktestReport, backtest, compare_reports
from .featurize import build_training_set
from .github import import_github_prs
from .index import EventIndex
from .ranker import (
    feature_importance,
    format_importance,
    load_model,
    model_to_json,
    train_lambdamart,
)
from .server import bench_latency, make_server
from .sim import run_sim
from .store import build_store
from .synth import synth_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CONDITIONS = ("v1", "v2", "v2+wl")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself."""

    def error(self, message):
        raise _UsageError(message)


# -- manifests ---------------------------------------------------------------


def _sha256_path(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_digests(paths) -> dict[str, str]:
    out: dict[str, str] = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.glob("*.json")):
                out[str(f)] = _sha256_path(f)
        else:
            out[str(p)] = _sha256_path(p)
    return out


def _write_manifest(out_path, command: str, cfg: GlobalConfig, inputs, seed: int) -> None:
    manifest = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "inputs": _input_digests(inputs),
        "seed": seed,
        "versions": {
            "revrec": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    Path(str(out_path) + ".manifest.json").write_text(text)


def _emit(args, text: str, out_attr: str = "out") -> None:
    """Print a report and also write it when an output path was given."""
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    out = getattr(args, out_attr, None)
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _override(cfg_obj, **updates):
    live = {k: v for k, v in updates.items() if v is not None}
    return dataclasses.replace(cfg_obj, **live) if live else cfg_obj


# -- subcommands -------------------------------------------------------------


def _cmd_ingest(args) -> int:
    cfg = resolve_config(args.config)
    log = import_github_prs(args.export)
    save_corpus(log, args.out)
    _write_manifest(args.out, "ingest", cfg, [args.export], cfg.seed)
    print(f"wrote {len(log)} events to {args.out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = resolve_config(args.config)
    scfg = _override(cfg.synth, seed=args.seed)
    out = args.out or cfg.paths.corpus
    log = synth_corpus(scfg)
    save_corpus(log, out)
    _write_manifest(out, "synth", dataclasses.replace(cfg, synth=scfg), [], scfg.seed)
    print(f"wrote {len(log)} events to {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    log, dropped = load_corpus(args.corpus)
    print(f"{args.corpus}: {len(log)} events, {dropped} dropped")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = resolve_config(args.config)
    hp = _override(
        cfg.hyperparams,
        n_trees=args.trees,
        learning_rate=args.learning_rate,
        max_leaves=args.leaves,
        seed=args.seed,
    )
    corpus = args.corpus or cfg.paths.corpus
    out = args.out or cfg.paths.model
    log, _ = load_corpus(corpus)
    idx = EventIndex(log)
    if args.split is not None:
        from .evaluate import temporal_split

        train_ids, _ = temporal_split(idx, args.split)
    else:
        train_ids = None
    ds = build_training_set(
        log,
        cfg.candidates,
        index=idx,
        diff_ids=train_ids,
        max_queries=args.max_queries,
    )
    model = train_lambdamart(ds, hp)
    Path(out).write_text(model_to_json(model))
    _write_manifest(out, "train", dataclasses.replace(cfg, hyperparams=hp), [corpus], hp.seed)
    print(f"trained {len(model.trees)} trees on {len(ds.queries)} queries -> {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = resolve_config(args.config)
    corpus = args.corpus or cfg.paths.corpus
    log, _ = load_corpus(corpus)
    inputs = [corpus]
    if args.condition == "v1":
        model = BASELINE_V1
    else:
        model_path = args.model or cfg.paths.model
        model = load_model(model_path)
        inputs.append(model_path)
    pcfg = cfg.policy if args.condition == "v2+wl" else None
    report = backtest(
        log,
        model,
        pcfg,
        args.split,
        pol=cfg.candidates,
        condition=args.condition,
    )
    _emit(args, report.to_json())
    if args.out:
        _write_manifest(args.out, "evaluate", cfg, inputs, cfg.seed)
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = resolve_config(args.config)
    a = BacktestReport.from_json(Path(args.a).read_text())
    b = BacktestReport.from_json(Path(args.b).read_text())
    delta = compare_reports(a, b)
    print(f"{b.condition} vs {a.condition} over {a.n_diffs} diffs")
    print(delta.to_text())
    if args.out:
        Path(args.out).write_text(delta.to_json())
        _write_manifest(args.out, "compare", cfg, [args.a, args.b], cfg.seed)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = resolve_config(args.config)
    scfg = _override(cfg.sim, policy=args.policy, sim_days=args.days, seed=args.seed)
    report = run_sim(scfg)
    _emit(args, report.to_json())
    if args.out:
        _write_manifest(args.out, "simulate", dataclasses.replace(cfg, sim=scfg), [], scfg.seed)
    return EXIT_OK


def _cmd_serve(args) -> int:
    cfg = resolve_config(args.config)
    corpus = args.corpus or cfg.paths.corpus
    model_path = args.model or cfg.paths.model
    log, _ = load_corpus(corpus)
    model = load_model(model_path)
    events = log.events
    as_of = (events[-1].ts + 1) if events else 0
    store = build_store(log, as_of, pol=cfg.candidates, model=model, pcfg=cfg.policy)
    server = make_server(store, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}/recommend ({len(log)} events, as_of={as_of})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = resolve_config(args.config)
    corpus = args.corpus or cfg.paths.corpus
    model_path = args.model or cfg.paths.model
    log, _ = load_corpus(corpus)
    model = load_model(model_path)
    events = log.events
    as_of = (events[-1].ts + 1) if events else 0
    store = build_store(log, as_of, pol=cfg.candidates, model=model, pcfg=cfg.policy)
    idx = EventIndex(log)
    pubs = [e for e in events if e.kind == "DiffPublished"]
    take = pubs[-args.requests :]
    requests = [
        {"author": e.engineer, "files": list(e.files), "k": 5, "groups": list(e.assigned_groups)}
        for e in take
    ]
    result = bench_latency(store, requests, args.repetitions, index=idx)
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    _emit(args, text)
    if args.out:
        _write_manifest(args.out, "bench", cfg, [corpus, model_path], cfg.seed)
    return EXIT_OK


def _cmd_importance(args) -> int:
    cfg = resolve_config(args.config)
    model_path = args.model or cfg.paths.model
    model = load_model(model_path)
    imp = feature_importance(model)
    if args.json:
        _emit(args, json.dumps(imp, indent=2) + "\n")
    else:
        _emit(args, format_importance(imp))
    if args.out:
        _write_manifest(args.out, "importance", cfg, [model_path], cfg.seed)
    return EXIT_OK


# -- argument wiring ---------------------------------------------------------


def _build_parser() -> _Parser:
    top = _Parser(prog="revrec", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"revrec {__version__}")
    sub = top.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="path to a global config JSON file")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="upper bound on worker threads; results never depend on it",
        )

    p = sub.add_parser("ingest", help="convert a directory of PR export files to a corpus")
    common(p)
    p.add_argument("--export", required=True, help="directory of *.json PR exports")
    p.add_argument("--out", required=True, help="corpus file to write")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic review corpus")
    common(p)
    p.add_argument("--out", help="corpus file to write (default: paths.corpus)")
    p.add_argument("--seed", type=int, help="override the synth seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check that a corpus file loads cleanly")
    common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("train", help="fit the ranking model on review history")
    common(p)
    p.add_argument("--corpus", help="training corpus (default: paths.corpus)")
    p.add_argument("--out", help="model file to write (default: paths.model)")
    p.add_argument("--split", type=float, help="train on the first fraction of diffs")
    p.add_argument("--trees", type=int, help="override hyperparams.n_trees")
    p.add_argument("--learning-rate", type=float, help="override hyperparams.learning_rate")
    p.add_argument("--leaves", type=int, help="override hyperparams.max_leaves")
    p.add_argument("--seed", type=int, help="override hyperparams.seed")
    p.add_argument("--max-queries", type=int, help="cap the number of training queries")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="backtest a ranking condition on held-out diffs")
    common(p)
    p.add_argument("--corpus", help="corpus to evaluate on (default: paths.corpus)")
    p.add_argument("--model", help="model file (ignored for v1; default: paths.model)")
    p.add_argument("--condition", required=True, choices=CONDITIONS)
    p.add_argument("--split", type=float, required=True, help="temporal train fraction")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="delta table between two backtest reports")
    common(p)
    p.add_argument("--a", required=True, help="baseline report JSON")
    p.add_argument("--b", required=True, help="comparison report JSON")
    p.add_argument("--out", help="also write the delta JSON here")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("simulate", help="run the review process simulator")
    common(p)
    p.add_argument("--policy", choices=("none", "bystander_rnd", "bystander_wl"))
    p.add_argument("--days", type=int, help="override sim.sim_days")
    p.add_argument("--seed", type=int, help="override sim.seed")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="serve recommendations over HTTP")
    common(p)
    p.add_argument("--corpus", help="corpus to serve from (default: paths.corpus)")
    p.add_argument("--model", help="model file (default: paths.model)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("bench", help="latency percentiles for both serving paths")
    common(p)
    p.add_argument("--corpus", help="corpus to bench against (default: paths.corpus)")
    p.add_argument("--model", help="model file (default: paths.model)")
    p.add_argument("--requests", type=int, default=150)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--out", help="also write the result JSON here")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("importance", help="split-gain share per model feature")
    common(p)
    p.add_argument("--model", help="model file (default: paths.model)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.add_argument("--out", help="also write the output here")
    p.set_defaults(func=_cmd_importance)

    return top


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise _UsageError(f"--threads must be >= 1, got {args.threads}")
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RevRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # last resort: never a traceback to the user
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
