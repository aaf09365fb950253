"""Training loop, inference entry point and checkpoint files."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import inference
from . import numeric as nm
from .data import _atomic_write, derive_ground_truth
from .errors import ConfigError, FormatError, BadMagicError, NonFiniteError, TruncatedPayloadError
from .model import BaFormer, ModelConfig
from .objective import STRATEGIES, LossWeights, video_loss

log = logging.getLogger(__name__)

VOTING_MODES = ("query", "frame", "argmax")
BOUNDARY_SOURCES = ("peak", "nms", "ground_truth")


@dataclass
class TrainConfig:
    epochs: int = 300
    lr: float = 5e-4
    decay: float = 0.5
    decay_interval: int = 100
    batch_size: int = 1
    seed: int = 0
    matching: str = "instance"
    heatmap_sigma: float = 2.0
    eval_interval: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("train.epochs must be >= 1")
        if not self.lr > 0:
            raise ConfigError("train.lr must be > 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.decay_interval < 1:
            raise ConfigError("train.decay_interval must be >= 1")
        if not 0 < self.decay <= 1:
            raise ConfigError("train.decay must lie in (0, 1]")
        if self.matching not in STRATEGIES:
            raise ConfigError(f"train.matching must be one of {STRATEGIES}")
        if self.heatmap_sigma <= 0:
            raise ConfigError("train.heatmap_sigma must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("train.seed must be an unsigned 64-bit integer")


def _epoch_orders(seed: int, n: int):
    gen = np.random.Generator(np.random.Philox(key=seed))
    while True:
        yield gen.permutation(n)


def train(model: BaFormer, dataset, config: TrainConfig, weights: LossWeights | None = None, on_epoch=None):
    """Fit ``model`` in place; returns ``(model, log)`` with one dict per epoch."""
    config.validate()
    weights = weights or LossWeights()
    weights.validate()
    if not dataset:
        raise ValueError("empty dataset")
    truths = [derive_ground_truth(v.labels, config.heatmap_sigma) for v in dataset]
    params = model.params
    state = nm.OptimState(lr=config.lr, decay=config.decay, decay_interval=config.decay_interval)
    orders = _epoch_orders(config.seed, len(dataset))
    history = []
    for epoch in range(config.epochs):
        state.epoch = epoch
        order = next(orders)
        sums = np.zeros(4)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            model.zero_grad()
            for idx in batch:
                video = dataset[idx]
                out = model.forward(video.features)
                parts = video_loss(out, truths[idx], config.matching, weights)
                value = parts.total.item()
                if not np.isfinite(value):
                    raise NonFiniteError(f"non-finite loss at epoch {epoch}, video {video.video_id}")
                parts.total.backward()
                sums += [value, parts.class_term, parts.mask_term, parts.boundary_term]
            grads = {name: p.grad / len(batch) for name, p in params.items()}
            values = {name: p.data for name, p in params.items()}
            try:
                new_values, state = nm.adam_step(values, grads, state)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}: {exc}") from None
            for name, p in params.items():
                p.data = new_values[name]
        n = len(dataset)
        entry = {
            "epoch": epoch,
            "loss": sums[0] / n,
            "class": sums[1] / n,
            "mask": sums[2] / n,
            "boundary": sums[3] / n,
            "lr": state.current_lr(),
        }
        if config.eval_interval and (epoch + 1) % config.eval_interval == 0:
            acc = [np.mean(infer(model, v) == v.labels) * 100 for v in dataset]
            entry["eval_accuracy"] = float(np.mean(acc))
        history.append(entry)
        log.debug("epoch %d loss %.4f", epoch, entry["loss"])
        if on_epoch is not None:
            on_epoch(entry)
    return model, history


def decode(pc, pm, pb, voting="query", boundary="peak", labels=None, nms_window=8, min_prob=None,
           sigma=2.0):
    """Turn final-layer probabilities into frame labels."""
    if voting not in VOTING_MODES:
        raise ValueError(f"unknown voting mode {voting!r}")
    if boundary not in BOUNDARY_SOURCES:
        raise ValueError(f"unknown boundary source {boundary!r}")
    if voting == "argmax":
        return inference.frame_argmax(pc, pm)
    T = pm.shape[1]
    if boundary == "ground_truth":
        if labels is None:
            raise ValueError("boundary=ground_truth needs frame labels")
        B = inference.with_endpoints(derive_ground_truth(labels, sigma).boundaries, T)
    else:
        B = inference.extract_boundaries(pb, boundary, nms_window=nms_window, min_prob=min_prob)
    if voting == "query":
        return inference.query_vote(pc, pm, B)
    return inference.frame_vote(pc, pm, B)


def infer(model: BaFormer, video, voting="query", boundary="peak", nms_window=8, min_prob=None):
    """Predict frame labels for one sequence from the last decoder layer."""
    if voting != "argmax" and boundary == "ground_truth" and getattr(video, "labels", None) is None:
        raise ValueError("boundary=ground_truth needs frame labels")
    out = model.forward(video.features)
    pc, pm, pb = out.final()
    return decode(pc, pm, pb, voting, boundary, getattr(video, "labels", None), nms_window, min_prob)


# ------------------------------------------------------------- checkpoints

CHECKPOINT_MAGIC = b"BAFC"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: BaFormer, metadata: dict | None = None):
    meta = {"model_config": asdict(model.cfg), "config_hash": model.cfg.digest()}
    meta.update(metadata or {})
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(model.params))]
    for name, p in model.params.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<I", p.data.ndim) + struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        chunks.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)) + blob)
    _atomic_write(path, b"".join(chunks))


class _Reader:
    def __init__(self, raw, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n):
        if self.pos + n > len(self.raw):
            raise TruncatedPayloadError(f"{self.path}: truncated checkpoint")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    """Return ``(state_dict, metadata)``."""
    raw = Path(path).read_bytes()
    r = _Reader(raw, path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: bad magic")
    version, count = r.unpack("<II")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    state = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims)) if rank else 1
        state[name] = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(dims).astype(np.float64)
    (n,) = r.unpack("<I")
    meta = json.loads(r.take(n).decode("utf-8"))
    if r.pos != len(raw):
        raise FormatError(f"{path}: trailing bytes after metadata")
    return state, meta


def model_from_checkpoint(path) -> tuple:
    state, meta = load_checkpoint(path)
    model = BaFormer(ModelConfig(**meta["model_config"]))
    model.load_state_dict(state)
    return model, meta
