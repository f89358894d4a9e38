"""``mohn`` command line: gen-data, train, eval-knn, grad-check, inspect.

Human-readable messages go to stderr; machine-readable results to stdout.
Exit codes: 0 success, 1 numeric/acceptance failure, 2 usage/config error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from .config import SECTIONS, TrainConfig, load_config, override
from .data import gen_clusters, load_cifar10, read_csv, stratified_split, write_csv
from .data.dataset import Normalizer
from .errors import MohnError, UsageError
from .evaluation import KnnConfig, clamp_k, embed_dataset, knn_top1
from .gradcheck import grad_check
from .numeric import l2_normalize

log = logging.getLogger("mohn")

GRAD_TOL = 1e-4


def _out(line):
    print(line, flush=True)


def cmd_gen_data(args):
    ds = gen_clusters(args.classes, args.per_class, args.dim, args.spread, args.seed)
    write_csv(ds, args.out)
    log.info("wrote %d items to %s", len(ds), args.out)
    _out(f"items={len(ds)}")
    return 0


def _config_flags(parser):
    """One flag per config key: --epochs, --loss.temperature, ..."""
    def add(name, default):
        kind = type(default)
        if isinstance(default, tuple):
            parser.add_argument(f"--{name}", dest=f"cfg:{name}", default=None,
                                type=lambda s: [int(v) for v in s.split(",")],
                                help="comma-separated")
        else:
            parser.add_argument(f"--{name}", dest=f"cfg:{name}", default=None, type=kind)

    base = TrainConfig()
    for f in dataclasses.fields(TrainConfig):
        if f.name in SECTIONS:
            for sub in dataclasses.fields(SECTIONS[f.name]):
                add(f"{f.name}.{sub.name}", getattr(getattr(base, f.name), sub.name))
        else:
            add(f.name, getattr(base, f.name))


def _overrides(args):
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}


def cmd_train(args):
    from .trainer import train

    cfg = load_config(args.config) if args.config else TrainConfig()
    cfg = override(cfg, _overrides(args))

    def report(row):
        if row.knn_top1 is not None:
            _out(f"epoch={row.epoch} step={row.step} knn_top1={row.knn_top1:.4f}")

    state = train(cfg, resume=args.resume, max_steps=args.max_steps, on_metrics=report)
    log.info("finished at step %d; outputs in %s", state.step, cfg.output_dir)
    return 0


def _load_eval_data(path, cfg: TrainConfig):
    if path is None:
        from .trainer import prepare_data
        data = prepare_data(cfg)
        return data.train, data.test
    if os.path.isdir(path):
        return load_cifar10(path)
    full = read_csv(path)
    return stratified_split(full, cfg.data.holdout_fraction, cfg.data.seed)


def cmd_eval_knn(args):
    from .trainer import load_checkpoint

    state = load_checkpoint(args.checkpoint)
    cfg = state.config
    train, test = _load_eval_data(args.data, cfg)
    norm = Normalizer.fit(train)

    def preprocess(flat):
        shape = (len(flat),) + train.images.shape[1:]
        return norm(flat.reshape(shape)).reshape(len(flat), -1)

    act = cfg.encoder.activation
    train_index = embed_dataset(state.pair.query_params, train, act, preprocess)
    test_index = embed_dataset(state.pair.query_params, test, act, preprocess)
    tau = args.tau if args.tau is not None else cfg.knn.temperature
    if args.k is not None:
        knn = KnnConfig(args.k, tau)
    else:
        knn = clamp_k(KnnConfig(cfg.knn.k, tau), len(train_index))
    acc = knn_top1(train_index, test_index, knn)
    _out(f"knn_top1={acc:.4f}")
    return 0


def cmd_grad_check(args):
    res = grad_check(seed=args.seed, dim=args.dim, batch=args.batch, queue=args.queue,
                     corrupt=args.corrupt)
    _out(f"max_rel_error={res.max_rel_error:.3e}")
    ok = res.max_rel_error < GRAD_TOL
    log.info("gradient check %s (tolerance %.0e)", "passed" if ok else "FAILED", GRAD_TOL)
    return 0 if ok else 1


def cmd_inspect(args):
    from .trainer import load_checkpoint

    bank = load_checkpoint(args.checkpoint).bank
    rows = bank.rows()
    if args.probe is not None:
        probe = np.array([float(v) for v in args.probe.split(",")])
        if probe.shape != (bank.dim,):
            raise UsageError(f"probe has {probe.size} entries, bank dim is {bank.dim}")
    else:
        if not 0 <= args.probe_row < len(rows):
            raise UsageError(f"probe row {args.probe_row} outside [0, {len(rows)})")
        probe = rows[args.probe_row]
    probe = l2_normalize(probe)
    norms = np.linalg.norm(rows, axis=1)
    sims = np.clip(rows @ probe / norms, -1.0, 1.0)
    lines = ["row,norm,similarity"] + [
        f"{i},{float(n)!r},{float(s)!r}" for i, (n, s) in enumerate(zip(norms, sims))]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        log.info("wrote %d rows to %s (write_ptr=%d)", len(rows), args.out, bank.write_ptr)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mohn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic cluster dataset as CSV")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--per-class", type=int, default=100)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--spread", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=3)
    g.add_argument("--out", default="clusters.csv")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="self-supervised training")
    t.add_argument("--config")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--max-steps", type=int, default=None)
    _config_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval-knn", help="weighted kNN top-1 of a checkpoint's query encoder")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="CSV file or CIFAR-10 directory (default: the run's data)")
    e.add_argument("--k", type=int, default=None)
    e.add_argument("--tau", type=float, default=None)
    e.set_defaults(func=cmd_eval_knn)

    c = sub.add_parser("grad-check", help="finite-difference check of the full loss gradient")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--dim", type=int, default=8)
    c.add_argument("--batch", type=int, default=4)
    c.add_argument("--queue", type=int, default=32)
    c.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_grad_check)

    i = sub.add_parser("inspect", help="dump memory-bank rows of a checkpoint as CSV")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--probe", help="comma-separated probe vector")
    i.add_argument("--probe-row", type=int, default=0)
    i.add_argument("--out")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except MohnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
