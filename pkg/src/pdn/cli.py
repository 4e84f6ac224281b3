"""Command-line entry point: gen-data, train, eval, gradcheck, analyze.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys


from . import analyzer, synthetic
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config
from .errors import ConfigError, PDNError
from .gradcheck import check_network, random_problem, tiny_config
from .metrics import evaluate
from .network import merge_scores, network_forward, predict
from .trainer import OptimState, init_params, train


def _site(text: str):
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"site must be 'row,col', got {text!r}")
    return r, c


def cmd_gen_data(args) -> int:
    samples = synthetic.generate(args.task, args.n, args.seed, args.size, args.classes, args.distance)
    synthetic.write_dataset(samples, args.out)
    print(f"wrote {len(samples)} {args.task} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network()
    samples = synthetic.read_dataset(args.data)
    if not samples:
        raise ConfigError(f"no samples in {args.data}")
    params = init_params(net)
    opt = OptimState(lr=cfg.train.lr_new, lr_backbone=cfg.train.lr_backbone,
                     momentum=cfg.train.momentum, weight_decay=cfg.train.weight_decay)
    steps = cfg.train.steps if args.steps is None else args.steps
    train(params, opt, samples, steps, seed=cfg.train.seed, variant=net.variant,
          crop=cfg.train.crop, log=lambda i, loss: print(f"step={i} loss={loss:.10g}", flush=True))
    save_checkpoint(params, args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def evaluate_dataset(net, params, samples):
    """EvalReports for the merged prediction and for each layer's own prediction."""
    merged, per_layer = [], [[] for _ in range(net.layers)]
    for s in samples:
        scores, _ = network_forward(s.image, params, net.variant)
        merged.append(predict(merge_scores(scores)))
        for t, sc in enumerate(scores):
            per_layer[t].append(predict(sc))
    gts = [s.labels for s in samples]
    return (evaluate(merged, gts, net.num_classes),
            [evaluate(p, gts, net.num_classes) for p in per_layer])


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network()
    params = load_checkpoint(args.ckpt, net)
    samples = synthetic.read_dataset(args.data)
    merged, layers = evaluate_dataset(net, params, samples)
    for t, rep in enumerate(layers, start=1):
        print(rep.format(f"layer={t} "))
    print(merged.format("merged "))
    return 0


def cmd_gradcheck(args) -> int:
    net = load_config(args.config).network() if args.config else tiny_config()
    params, image, labels = random_problem(net, net.seed)
    result = check_network(net, params, image, labels, args.eps)
    print(("PASS " if result.passed else "FAIL ") + result.format())
    return 0 if result.passed else 3


def cmd_analyze(args) -> int:
    net = load_config(args.config).network()
    params = load_checkpoint(args.ckpt, net) if args.ckpt else init_params(net)
    entries = [(analyzer.scheme_name(net), net, params)]
    if args.compare and net.rings != 1:
        from dataclasses import replace
        base = replace(net, rings=1)
        entries.append(("lg_lstm_8", base, init_params(base)))
    reports = []
    for scheme, cfg, p in entries:
        for t in range(1, net.layers + 1):
            reports.append(analyzer.influence_report(cfg, p, args.site, t, scheme))
    analyzer.write_report(reports, args.out)
    for r in reports:
        print(r.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write PDNS sample files")
    p.add_argument("--task", choices=["local", "context"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=17)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--distance", type=int, default=6)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train and write a checkpoint")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, help="override train.steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-layer and merged metrics")
    p.add_argument("--config")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--config")
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze", help="influence-set report")
    p.add_argument("--config")
    p.add_argument("--site", type=_site, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--compare", action="store_true", help="also probe the 8-neighbor scheme")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except PDNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
