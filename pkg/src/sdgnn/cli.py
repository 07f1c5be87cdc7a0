"""Command line: ``sdgnn {stats,train,eval,export}``.

Settings resolve as built-in defaults, then ``--config`` file
(``key = value`` lines, ``#`` comments), then explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from sdgnn.evaluation import format_report, run_experiment, write_report_csv
from sdgnn.graph import FORMATS, GraphFormatError, load_edge_list
from sdgnn.losses import LossWeights
from sdgnn.model import AGGREGATORS, ModelConfig, encode_all, export_embeddings
from sdgnn.trainer import CheckpointError, TrainConfig, TrainingError, checkpoint, restore, train, write_trace
from sdgnn.triads import POLICIES, census

log = logging.getLogger("sdgnn")

DEFAULTS = {
    "format": "tsv_sign",
    "dim": 20,
    "layers": 2,
    "aggregator": "attention",
    "activation": "tanh",
    "epochs": 100,
    "batch_size": 500,
    "lr": 0.001,
    "weight_decay": 0.001,
    "lambda1": 1.0,
    "lambda2": 1.0,
    "gamma": 0.5,
    "triangle_policy": "both",
    "seed": 0,
    "runs": 5,
    "out": ".",
    "embedding": "sdgnn",
    "dtype": "float64",
}
_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


@dataclass
class RunSpec:
    command: str
    graph: str | None
    options: dict = field(default_factory=dict)

    @property
    def out(self):
        return Path(self.options["out"])

    @property
    def seed(self):
        return self.options["seed"]

    def train_config(self) -> TrainConfig:
        o = self.options
        return TrainConfig(
            epochs=o["epochs"], batch_size=o["batch_size"], lr=o["lr"],
            weight_decay=o["weight_decay"], seed=o["seed"], triangle_policy=o["triangle_policy"],
            loss=LossWeights(direction=o["lambda1"], triangle=o["lambda2"], margin=o["gamma"]),
            model=ModelConfig(dim=o["dim"], layers=o["layers"], aggregator=o["aggregator"],
                              activation=o["activation"], seed=o["seed"], dtype=o["dtype"]),
        )


def read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _TYPES[key](value)
    return values


def _common(p):
    p.add_argument("graph", help="edge-list file (.gz accepted)")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--aggregator", choices=AGGREGATORS, default=None)
    p.add_argument("--activation", choices=("tanh", "relu"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--triangle-policy", choices=POLICIES, default=None)
    p.add_argument("--dtype", choices=("float64", "float32"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="sdgnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="balance/status triad census")
    p.add_argument("graph")
    p.add_argument("--format", choices=FORMATS, default="tsv_sign")
    p.add_argument("--machine", action="store_true", help="also print key=value lines")

    p = sub.add_parser("train", help="train embeddings, write checkpoint and loss trace")
    _common(p)

    p = sub.add_parser("eval", help="link sign prediction over repeated splits")
    _common(p)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--embedding", choices=("sdgnn", "random"), default=None)

    p = sub.add_parser("export", help="write final embeddings as text")
    p.add_argument("checkpoint")
    p.add_argument("output")
    p.add_argument("--graph", help="re-encode with this graph instead of stored embeddings")
    p.add_argument("--format", choices=FORMATS, default="tsv_sign")
    return parser


def resolve(args) -> RunSpec:
    options = dict(DEFAULTS)
    if getattr(args, "config", None):
        options.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return RunSpec(command=args.command, graph=getattr(args, "graph", None), options=options)


def cmd_stats(args):
    g = load_edge_list(args.graph, args.format)
    report = census(g)
    if report.total_triads == 0:
        print("warning: no closed triads", file=sys.stderr)
    print(f"{'both':>8} {'only_bal':>9} {'only_sta':>9} {'neither':>8} {'triads':>10}")
    print(f"{report.both:>8.3f} {report.only_balance:>9.3f} {report.only_status:>9.3f} "
          f"{report.neither:>8.3f} {report.total_triads:>10d}")
    if args.machine:
        for k, v in report.as_dict().items():
            print(f"{k}={v}")
    return report


def cmd_train(spec: RunSpec):
    g = load_edge_list(spec.graph, spec.options["format"])
    config = spec.train_config()
    spec.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = train(g, config)
    log.info("trained %d epochs in %.1fs", config.epochs, time.perf_counter() - start)
    ckpt = spec.out / "checkpoint.npz"
    checkpoint(ckpt, result.params, config, g.node_count, adam=result.state.adam,
               epoch=result.state.epoch, embeddings=result.embeddings)
    write_trace(result.trace, spec.out / "loss_trace.csv")
    print(f"wrote {ckpt} and {spec.out / 'loss_trace.csv'}", file=sys.stderr)
    return result


def cmd_eval(spec: RunSpec):
    g = load_edge_list(spec.graph, spec.options["format"])
    config = spec.train_config()
    runs = spec.options["runs"]
    report = run_experiment(
        g, config, runs=runs, seed=spec.seed, embedding=spec.options["embedding"],
        progress=lambda s, r: print(f"run seed={s} done: {r.values()}", file=sys.stderr))
    spec.out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, spec.out / "metrics.csv", seed=spec.seed)
    print(format_report(report, seed=spec.seed))
    return report


def cmd_export(args):
    ckpt = restore(args.checkpoint)
    if args.graph:
        g = load_edge_list(args.graph, args.format)
        if g.node_count != ckpt.node_count:
            raise CheckpointError(f"graph has {g.node_count} nodes, checkpoint {ckpt.node_count}")
        Z = encode_all(g, ckpt.params, ckpt.config.model)
    elif ckpt.embeddings is not None:
        Z = ckpt.embeddings
    else:
        raise CheckpointError("checkpoint holds no embeddings; pass --graph to re-encode")
    export_embeddings(Z, args.output)
    print(f"wrote {len(Z)} embeddings to {args.output}", file=sys.stderr)
    return Z


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "stats":
            cmd_stats(args)
        elif args.command == "export":
            cmd_export(args)
        else:
            spec = resolve(args)
            (cmd_train if spec.command == "train" else cmd_eval)(spec)
    except (OSError, GraphFormatError, CheckpointError, TrainingError, ValueError) as exc:
        print(f"sdgnn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
