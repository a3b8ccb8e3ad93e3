"""Command-line entry point: ``revgnn <subcommand> [flags]``.

Exit codes: 0 success, 2 input error, 3 numerical abort, 4 artifact mismatch.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import InputError, RevGNNError

log = logging.getLogger("revgnn")

ABLATE_FLAGS = {
    "no-stage2": {"use_stage2": False},
    "no-knowledge": {"use_knowledge": False},
    "no-behavior": {"use_behavior": False},
}


def _config(path, assignments=(), extra=None) -> TrainConfig:
    cfg = TrainConfig.load(path) if path else TrainConfig()
    if assignments:
        cfg = cfg.with_overrides(assignments)
    if extra:
        cfg = cfg.replace(**extra)
        cfg.validate()
    return cfg


def _need_file(path, what):
    if not Path(path).is_file():
        raise InputError(f"{what} not found: {path}")


def cmd_prepare(args):
    from .graphstore import prepare

    data = prepare(args.edges, args.features, args.seed, args.out)
    s = data.stats
    print(f"scholars={s.scholars} submissions={s.submissions} reviews={s.reviews} "
          f"density={s.density:.6e}")


def cmd_train(args):
    from .graphstore import load_prepared
    from .trainer import default_log_path, fit

    extra = dict(ABLATE_FLAGS[args.ablate]) if args.ablate else {}
    if args.seed is not None:
        extra["seed"] = args.seed
    cfg = _config(args.config, args.set, extra)
    data = load_prepared(args.data)
    log_path = args.log or default_log_path(args.out)
    trainer = fit(cfg, data, out=args.out, log_path=log_path)
    print(f"trained {trainer.epoch} epochs ({trainer.step} steps); checkpoint {args.out}, log {log_path}")


def cmd_eval(args):
    from .evalkit import RankingContext, emit_report, evaluate
    from .graphstore import load_prepared
    from .trainer import load_model

    _need_file(args.checkpoint, "checkpoint")
    data = load_prepared(args.data)
    model = load_model(args.checkpoint, data)
    report = evaluate(RankingContext.for_model(model), args.k)
    emit_report(report, args.report, args.detail,
                catalogs=(data.graph.scholars, data.graph.submissions))
    if args.plot:
        from .plotting import plot_report
        plot_report(report, args.plot)
    print(",".join(report.header()))
    print(",".join(format(v, ".6f") for v in report.row()))


def _split_list(raw: str) -> list[str]:
    items = [x.strip() for x in raw.split(",") if x.strip()]
    if not items:
        raise InputError("empty list")
    return items


def cmd_ablate(args):
    from .ablation import compare, run_ablation, variant_overrides, write_comparisons, write_results
    from .graphstore import load_prepared

    variants = _split_list(args.variants)
    for v in variants:
        variant_overrides(v)
    try:
        seeds = [int(s) for s in _split_list(args.seeds)]
    except ValueError:
        raise InputError(f"--seeds must be integers, got {args.seeds!r}") from None
    cfg = _config(args.config, args.set)
    data = load_prepared(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_ablation(cfg, data, variants, seeds, args.k)
    write_results(results, out / "results.csv", args.k)
    write_comparisons(compare(results), out / "pvalues.csv")
    if args.plot:
        from .plotting import plot_ablation
        plot_ablation(results, args.plot, args.k)
    print(f"{len(results)} runs; wrote {out / 'results.csv'} and {out / 'pvalues.csv'}")


def cmd_export(args):
    from .decoder import gather_histories, history_lists
    from .graphstore import load_prepared, write_features
    from .trainer import load_model

    _need_file(args.checkpoint, "checkpoint")
    data = load_prepared(args.data)
    model = load_model(args.checkpoint, data)
    g = data.graph
    emb = model.embeddings()
    write_features(args.out, g.scholars + g.submissions, emb)
    if args.clusters:
        state = model.cluster_state()
        if state is None:
            raise InputError("--clusters needs a model trained with stage 2 enabled")
        state.export(args.clusters, g.scholars + g.submissions)
    if args.scores:
        scorer = model.scorer()
        lists = history_lists(g.neighbors("train"))
        scholars = np.arange(g.n_scholars)
        with open(args.scores, "w", encoding="utf-8", newline="\n") as fh:
            for j, sub_id in enumerate(g.submissions):
                hist, mask = gather_histories(lists, scholars, [j] * len(scholars), model.config.history_len)
                scores = scorer.score(j, scholars, hist, mask)
                order = np.lexsort((scholars, -scores))
                if args.k:
                    order = order[:args.k]
                for i in order:
                    fh.write(f"{sub_id}\t{g.scholars[i]}\t{format(float(scores[i]), '.10g')}\n")


def cmd_dump_config(args):
    sys.stdout.write(_config(args.config, args.set).to_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="revgnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="key = value config file (defaults if omitted)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")

    sp = sub.add_parser("prepare", help="intern ids, split edges, pool scholar features")
    sp.add_argument("--edges", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train a model on prepared data")
    with_config(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--log", help="epoch CSV (default: <checkpoint>.log.csv)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--ablate", choices=sorted(ABLATE_FLAGS))
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="rank held-out reviewers and write metrics")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--k", type=int, default=20)
    sp.add_argument("--report", required=True)
    sp.add_argument("--detail", help="per-candidate detail TSV")
    sp.add_argument("--plot", help="SVG bar chart of the metrics")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", help="train/evaluate variants over several seeds")
    with_config(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--variants", default="full,-Knowl.,-Behav.,-Stage-2")
    sp.add_argument("--seeds", default="0,1,2,3,4")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--k", type=int, default=20)
    sp.add_argument("--plot", help="SVG chart of median Recall@K per variant")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("export-embeddings", help="write node embeddings, clusters and scores")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="embedding file (feature-file format)")
    sp.add_argument("--clusters", help="node_id, hard cluster, soft assignment rows")
    sp.add_argument("--scores", help="submission_id, scholar_id, score rows")
    sp.add_argument("--k", type=int, default=0, help="top-k scores per submission (0 = all)")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("dump-config", help="print the effective configuration")
    with_config(sp)
    sp.set_defaults(func=cmd_dump_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "k", 1) is not None and getattr(args, "k", 1) < 0:
        parser.error("--k must be >= 0")
    try:
        args.func(args)
    except RevGNNError as exc:
        print(f"revgnn: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
