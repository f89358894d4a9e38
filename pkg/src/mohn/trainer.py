"""Training loop: two views, query/key passes, filtered dual-view loss, SGD, EMA, enqueue."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt
from .config import TrainConfig, from_dict, to_dict
from .data import (AugmentPolicy, Dataset, Normalizer, VectorAugmentPolicy, gen_clusters,
                   load_cifar10, read_csv, stratified_split, two_vector_views, two_views)
from .encoder import EncoderPair, EncoderParams, backward, momentum_update
from .errors import ConfigInvalid, EmptyBatch, IoFailure, ShapeMismatch
from .evaluation import clamp_k, embed_dataset, knn_top1
from .memory_bank import MemoryBank, enqueue, init_bank
from .objective import filtered_dual_view_loss
from .rng import get_state, make_rng, restore_rng

log = logging.getLogger(__name__)

METRICS_HEADER = "step,epoch,loss,loss_query_term,loss_key_term,lr,queue_ptr,knn_top1"


def shuffle_batch(batch, rng):
    """Permute rows uniformly at random. Returns (permuted batch, permutation)."""
    batch = np.asarray(batch)
    if len(batch) == 0:
        raise EmptyBatch("cannot shuffle an empty batch")
    perm = rng.permutation(len(batch))
    return batch[perm], perm


def unshuffle_batch(batch, perm):
    out = np.empty_like(batch)
    out[perm] = batch
    return out


def sgd_step(params: EncoderParams, grads: EncoderParams, velocity: EncoderParams,
             lr: float, momentum: float, weight_decay: float):
    """In place: v <- mu * v + (g + wd * theta); theta <- theta - lr * v."""
    if params.shapes() != grads.shapes() or params.shapes() != velocity.shapes():
        raise ShapeMismatch("params, grads and velocity shapes disagree")
    for theta, g, v in zip(params.tensors(), grads.tensors(), velocity.tensors()):
        v *= momentum
        v += g + weight_decay * theta
        theta -= lr * v
    return params, velocity


@dataclass
class StepMetrics:
    step: int
    epoch: int
    loss: float
    loss_query_term: float
    loss_key_term: float
    lr: float
    queue_ptr: int
    knn_top1: float | None = None

    def csv_row(self) -> str:
        knn = "" if self.knn_top1 is None else repr(self.knn_top1)
        return (f"{self.step},{self.epoch},{self.loss!r},{self.loss_query_term!r},"
                f"{self.loss_key_term!r},{self.lr!r},{self.queue_ptr},{knn}")


@dataclass
class TrainState:
    config: TrainConfig
    pair: EncoderPair
    velocity: EncoderParams
    bank: MemoryBank
    rng: np.random.Generator
    step: int = 0
    epoch: int = 0  # completed epochs
    batch_in_epoch: int = 0  # batches done in the current epoch
    epoch_order: np.ndarray | None = None

    @classmethod
    def initial(cls, config: TrainConfig) -> "TrainState":
        config.validate()
        pair = EncoderPair.create(config.encoder, config.seed, config.momentum_coefficient)
        bank = init_bank(config.queue_capacity, config.encoder.embed_dim, config.seed + 1)
        return cls(config, pair, pair.query_params.zeros_like(), bank, make_rng(config.seed, 2))


def train_step(state: TrainState, view1, view2) -> StepMetrics:
    """One optimization step on a batch of two-view pairs (rows of view1/view2)."""
    cfg = state.config
    pair = state.pair
    q, cache = pair.embed_query(view1)
    # key path: no gradient is ever taken through the key encoder or the bank
    shuffled, perm = shuffle_batch(view2, state.rng)
    k = unshuffle_batch(pair.embed_key(shuffled), perm)
    out = filtered_dual_view_loss(q, k, state.bank, cfg.loss)
    grads = backward(pair.query_params, cache, out.grad_q)
    sgd_step(pair.query_params, grads, state.velocity, cfg.learning_rate, cfg.sgd_momentum,
             cfg.weight_decay)
    momentum_update(pair)
    enqueue(state.bank, k)
    state.step += 1
    return StepMetrics(state.step, state.epoch + 1, out.total, out.query_term, out.key_term,
                       cfg.learning_rate, state.bank.write_ptr)


# --- data -------------------------------------------------------------------

@dataclass
class PreparedData:
    train: Dataset
    test: Dataset
    normalizer: Normalizer
    spread: float

    def preprocess(self, flat):
        """Raw flat features -> encoder inputs (normalization only)."""
        shape = (len(flat),) + self.train.images.shape[1:]
        return self.normalizer(flat.reshape(shape)).reshape(len(flat), -1)

    def views(self, idx, rng):
        """Two augmented, normalized views of the training items ``idx``, flattened."""
        if self.train.is_vector:
            policy = VectorAugmentPolicy.for_spread(
                self.spread, self.normalizer.mean.ravel(), self.normalizer.std.ravel())
            return two_vector_views(self.train.flat()[idx], policy, rng)
        policy = AugmentPolicy(channel_mean=tuple(self.normalizer.mean),
                               channel_std=tuple(self.normalizer.std))
        pairs = [two_views(self.train.images[i], policy, rng) for i in idx]
        v1 = np.stack([a.ravel() for a, _ in pairs])
        v2 = np.stack([b.ravel() for _, b in pairs])
        return v1, v2


def prepare_data(config: TrainConfig) -> PreparedData:
    d = config.data
    if d.kind == "cifar10":
        train, test = load_cifar10(d.path)
    else:
        if d.kind == "synthetic":
            full = gen_clusters(d.classes, d.per_class, d.dim, d.spread, d.seed)
        else:
            full = read_csv(d.path)
        train, test = stratified_split(full, d.holdout_fraction, d.seed)
    if train.feature_dim != config.encoder.input_dim:
        raise ConfigInvalid(
            f"encoder input dim {config.encoder.input_dim} != data dim {train.feature_dim}")
    return PreparedData(train, test, Normalizer.fit(train), d.spread)


def evaluate(state: TrainState, data: PreparedData) -> float:
    cfg = state.config
    act = cfg.encoder.activation
    train_index = embed_dataset(state.pair.query_params, data.train, act, data.preprocess)
    test_index = embed_dataset(state.pair.query_params, data.test, act, data.preprocess)
    return knn_top1(train_index, test_index, clamp_k(cfg.knn, len(train_index)))


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(state: TrainState, path) -> None:
    meta = {
        "step": state.step,
        "epoch": state.epoch,
        "batch_in_epoch": state.batch_in_epoch,
        "rng": get_state(state.rng),
        "bank": {"write_ptr": state.bank.write_ptr, "filled": state.bank.filled,
                 "total_enqueued": state.bank.total_enqueued},
    }
    order = state.epoch_order if state.epoch_order is not None else np.zeros(0, dtype=np.int64)
    sections = {
        "config": ckpt.json_bytes(to_dict(state.config)),
        "meta": ckpt.json_bytes(meta),
        "query": ckpt.f64_bytes(state.pair.query_params.tensors()),
        "key": ckpt.f64_bytes(state.pair.key_params.tensors()),
        "velocity": ckpt.f64_bytes(state.velocity.tensors()),
        "bank": ckpt.f64_bytes([state.bank.storage]),
        "order": np.asarray(order, dtype="<i8").tobytes(),
        "has_order": b"\x01" if state.epoch_order is not None else b"\x00",
    }
    ckpt.write_container(path, sections)


def _params(payload, shapes):
    tensors = ckpt.split_f64(payload, shapes)
    return EncoderParams(tensors[0::2], tensors[1::2])


def load_checkpoint(path) -> TrainState:
    sections = ckpt.read_container(path)
    try:
        config = from_dict(json.loads(ckpt.require(sections, "config")))
        meta = json.loads(ckpt.require(sections, "meta"))
    except (ValueError, ConfigInvalid) as exc:
        raise ckpt.CorruptCheckpoint(f"{path}: unreadable config/meta: {exc}") from exc
    spec = config.encoder
    shapes = []
    for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        shapes.extend([(fan_out, fan_in), (fan_out,)])
    query = _params(ckpt.require(sections, "query"), shapes)
    key = _params(ckpt.require(sections, "key"), shapes)
    velocity = _params(ckpt.require(sections, "velocity"), shapes)
    (storage,) = ckpt.split_f64(ckpt.require(sections, "bank"),
                                [(config.queue_capacity, spec.embed_dim)])
    b = meta["bank"]
    bank = MemoryBank(config.queue_capacity, spec.embed_dim, storage, b["write_ptr"], b["filled"],
                      b["total_enqueued"])
    order = None
    if ckpt.require(sections, "has_order") == b"\x01":
        order = np.frombuffer(ckpt.require(sections, "order"), dtype="<i8").astype(np.int64)
    pair = EncoderPair(spec, query, key, config.momentum_coefficient)
    return TrainState(config, pair, velocity, bank, restore_rng(meta["rng"]), meta["step"],
                      meta["epoch"], meta["batch_in_epoch"], order)


# --- driver -----------------------------------------------------------------

def _open_metrics(path, resume_step):
    """Open the metrics file for appending, keeping only rows up to ``resume_step``."""
    kept = []
    if resume_step is not None and os.path.exists(path):
        with open(path) as fh:
            lines = fh.read().splitlines()
        kept = [ln for ln in lines[1:] if ln and int(ln.split(",", 1)[0]) <= resume_step]
    fh = open(path, "w")
    fh.write(METRICS_HEADER + "\n")
    for ln in kept:
        fh.write(ln + "\n")
    fh.flush()
    return fh


def train(config: TrainConfig, resume=None, max_steps=None, on_metrics=None, out_dir=None):
    """Run (or resume) training. Returns the final :class:`TrainState`.

    Writes ``metrics.csv`` and checkpoints (``ckpt_000000.mohn`` initially,
    every ``checkpoint_interval`` steps, and ``final.mohn``) to the output
    directory. ``max_steps`` stops early after that global step, saving a
    checkpoint there.
    """
    if resume is not None:
        state = load_checkpoint(resume)
        config = state.config if config is None else config
        if to_dict(config) != to_dict(state.config):
            # only the output location may change on resume
            diff = dataclasses.replace(config, output_dir=state.config.output_dir)
            if to_dict(diff) != to_dict(state.config):
                raise ConfigInvalid("config differs from the checkpoint being resumed")
        state.config = config
    else:
        state = TrainState.initial(config)
    config.validate()
    out_dir = out_dir or config.output_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out_dir}: {exc}") from exc
    data = prepare_data(config)
    steps_per_epoch = len(data.train) // config.batch_size
    if steps_per_epoch == 0 and config.epochs > 0:
        raise ConfigInvalid(f"batch_size {config.batch_size} exceeds training set size {len(data.train)}")
    if config.knn.k > len(data.train):
        log.info("knn k=%d will be clamped to train size %d", config.knn.k, len(data.train))

    def ckpt_path(name):
        return os.path.join(out_dir, name)

    try:
        metrics = _open_metrics(ckpt_path("metrics.csv"), state.step if resume is not None else None)
    except OSError as exc:
        raise IoFailure(f"cannot write metrics in {out_dir}: {exc}") from exc
    with metrics:
        if resume is None:
            save_checkpoint(state, ckpt_path("ckpt_000000.mohn"))
        while state.epoch < config.epochs:
            if state.epoch_order is None or state.batch_in_epoch >= steps_per_epoch:
                state.epoch_order = state.rng.permutation(len(data.train))
                state.batch_in_epoch = 0
            while state.batch_in_epoch < steps_per_epoch:
                start = state.batch_in_epoch * config.batch_size
                idx = state.epoch_order[start: start + config.batch_size]
                v1, v2 = data.views(idx, state.rng)
                row = train_step(state, v1, v2)
                state.batch_in_epoch += 1
                if state.batch_in_epoch == steps_per_epoch:
                    state.epoch += 1
                    e = state.epoch
                    if e == config.epochs or (config.eval_interval and e % config.eval_interval == 0):
                        row.knn_top1 = evaluate(state, data)
                        log.info("epoch %d knn_top1=%.4f", e, row.knn_top1)
                metrics.write(row.csv_row() + "\n")
                metrics.flush()
                if on_metrics is not None:
                    on_metrics(row)
                if config.checkpoint_interval and state.step % config.checkpoint_interval == 0:
                    save_checkpoint(state, ckpt_path(f"ckpt_{state.step:06d}.mohn"))
                if max_steps is not None and state.step >= max_steps:
                    save_checkpoint(state, ckpt_path(f"ckpt_{state.step:06d}.mohn"))
                    return state
        save_checkpoint(state, ckpt_path("final.mohn"))
    return state
