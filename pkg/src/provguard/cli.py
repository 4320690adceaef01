"""Command line entry point: ``provguard <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .adversary import parse_attack
from .config import load_config
from .exceptions import ConfigError, DataError, ProvGuardError
from .persistence import load_artifact, save_artifact

logger = logging.getLogger("provguard")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _data_opts(p):
    p.add_argument("--data", help="dataset directory (data.path)")


def _model_opt(p):
    p.add_argument("--model", help="model artifact path (model.path)")


def _report_opt(p):
    p.add_argument("--report-dir", help="report directory (report.dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="provguard", description="Provenance-graph anomaly detection toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    _common(p)
    p.add_argument("--out", help="output directory (defaults to data.path)")

    p = sub.add_parser("build-graph", help="turn a raw event log into a graph dataset")
    _common(p)
    p.add_argument("events", help="event log (jsonl or csv, see data.format)")
    p.add_argument("--labels", help="entity ground-truth file")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="train encoder and detector on the benign training split")
    _common(p)
    _data_opts(p)
    _model_opt(p)

    p = sub.add_parser("detect", help="score a dataset split with a trained model")
    _common(p)
    _data_opts(p)
    _model_opt(p)
    _report_opt(p)

    p = sub.add_parser("attack", help="write an attacked copy of a dataset")
    _common(p)
    _data_opts(p)
    p.add_argument("--attack", required=True, help="descriptor such as cgpa:y=0.2:seed=7")
    p.add_argument("--phase", choices=("detection", "training"))
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("eval-robustness", help="attack grid against a trained model")
    _common(p)
    _data_opts(p)
    _model_opt(p)
    _report_opt(p)

    p = sub.add_parser("export-embeddings", help="write entity embeddings as jsonl")
    _common(p)
    _data_opts(p)
    _model_opt(p)
    p.add_argument("--out", required=True, help="output jsonl file")
    return parser


def _config(args):
    overrides = list(args.set)
    for opt, key in (("data", "data.path"), ("model", "model.path"), ("report_dir", "report.dir")):
        value = getattr(args, opt, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def _cmd_gen(cfg, args):
    out = pipeline.generate(cfg, args.out or cfg["data.path"])
    print(f"wrote {cfg['gen.profile']} dataset to {out}")


def _cmd_build_graph(cfg, args):
    data = pipeline.build_graphs(cfg, args.events, args.out, args.labels)
    nodes = sum(g.n_nodes for g in data.graphs)
    edges = sum(g.n_edges for g in data.graphs)
    print(f"wrote {len(data.graphs)} graph(s), {nodes} nodes, {edges} edges to {args.out}")


def _cmd_train(cfg, args):
    data = pipeline.load(cfg)
    art = pipeline.train_from_dataset(cfg, data)
    path = save_artifact(art, cfg["model.path"])
    hist = " ".join(f"{x:.4f}" for x in art.encoder.loss_history)
    print(f"loss: {hist}")
    print(f"d_mean: {art.detector.d_mean:.6g}  theta: {art.detector.theta:.6g}  k: {art.detector.k}")
    print(f"wrote model to {path}")


def _cmd_detect(cfg, args):
    art = load_artifact(cfg["model.path"])
    data = pipeline.load(cfg)
    det = pipeline.detect_dataset(cfg, art, data)
    root = pipeline.write_detection(det, cfg["report.dir"])
    sys.stdout.write((root / "summary.txt").read_text(encoding="utf-8"))


def _cmd_attack(cfg, args):
    spec = parse_attack(args.attack, args.phase, cfg["eval.policy"], cfg.seed)
    data = pipeline.load(cfg)
    out = pipeline.save_attacked(pipeline.attack_dataset(data, spec), args.out)
    print(f"wrote {spec.describe()} ({spec.phase}) dataset to {out}")


def _cmd_eval(cfg, args):
    art = load_artifact(cfg["model.path"])
    data = pipeline.load(cfg)
    rows = pipeline.eval_robustness(cfg, art, data)
    root = pipeline.write_robustness(rows, cfg["report.dir"])
    sys.stdout.write((root / "robustness.txt").read_text(encoding="utf-8"))


def _cmd_export(cfg, args):
    art = load_artifact(cfg["model.path"])
    data = pipeline.load(cfg)
    ids, emb = pipeline.export_embeddings(cfg, art, data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for i, row in zip(ids, emb):
            fh.write(json.dumps({"id": i, "embedding": [float(x) for x in row]}, separators=(",", ":")) + "\n")
    print(f"wrote {len(ids)} embedding(s) of width {emb.shape[1]} to {out}")


_COMMANDS = {
    "gen": _cmd_gen,
    "build-graph": _cmd_build_graph,
    "train": _cmd_train,
    "detect": _cmd_detect,
    "attack": _cmd_attack,
    "eval-robustness": _cmd_eval,
    "export-embeddings": _cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        cfg = _config(args)
        _COMMANDS[args.command](cfg, args)
    except ProvGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
