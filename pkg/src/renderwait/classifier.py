"""Rendering-state classifier: a small inverted-residual CNN, its training loop and inference."""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import DegenerateDataset, TooFewApps, UninitializedModel
from .imaging import Frame
from .nn.core import (DTYPE, STANDARD, BatchNorm2d, Conv2d, GlobalAvgPool, InvertedResidual, Layer, Linear,
                      ReLU6, Sequential, bce_loss, sigmoid)
from .nn.optim import AdamState, TrainConfig, adam_step, lr_at
from .segmenter import DatasetEntry
from .states import Label

log = logging.getLogger(__name__)

FULL_SIZE = (768, 448)  # width, height
DESK_SIZE = (96, 56)

# (in, out, stride) for each inverted-residual block
DEFAULT_BLOCKS = ((8, 16, 2), (16, 16, 1), (16, 24, 2), (24, 24, 1), (24, 32, 2))


@dataclass(frozen=True)
class NetConfig:
    input_size: tuple[int, int] = DESK_SIZE  # width, height
    stem_channels: int = 8
    blocks: tuple[tuple[int, int, int], ...] = DEFAULT_BLOCKS
    expansion: int = 6
    bn_momentum: float = 0.1


class RenderNet(Layer):
    """Stem conv -> inverted-residual blocks -> global average pool -> one logit."""

    def __init__(self, cfg: NetConfig = NetConfig(), seed: int = 0, dtype=DTYPE):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.stem = Sequential(
            Conv2d(STANDARD, 3, cfg.stem_channels, 2, bias=False, rng=rng, dtype=dtype),
            BatchNorm2d(cfg.stem_channels, cfg.bn_momentum, dtype=dtype), ReLU6())
        chans = cfg.stem_channels
        self.blocks = []
        for cin, cout, stride in cfg.blocks:
            if cin != chans:
                raise ValueError(f"block input {cin} does not follow previous output {chans}")
            self.blocks.append(InvertedResidual(cin, cout, stride, cfg.expansion, cfg.bn_momentum, rng, dtype))
            chans = cout
        self.head = Sequential(GlobalAvgPool(), Linear(chans, 1, rng=rng, dtype=dtype))
        self.net = Sequential(self.stem, *self.blocks, self.head)
        self.trained = False

    def parameters(self):
        return self.net.parameters()

    def buffers(self):
        return self.net.buffers()

    def forward(self, x, training=False):
        return self.net.forward(x, training)[:, 0]

    def backward(self, gy):
        return self.net.backward(gy[:, None])

    def shape_plan(self, batch: int = 1) -> list[tuple[str, tuple[int, ...]]]:
        """Statically computed output shape after the stem and each block."""
        w, h = self.cfg.input_size
        shape = (batch, 3, h, w)
        plan = []
        stem_conv = self.stem.layers[0]
        shape = stem_conv.output_shape(shape)
        plan.append(("stem", shape))
        for i, blk in enumerate(self.blocks):
            n, _, hh, ww = shape
            shape = (n, blk.out_channels, -(-hh // blk.stride), -(-ww // blk.stride))
            plan.append((f"block{i}", shape))
        plan.append(("head", (batch,)))
        return plan


def preprocess(frame: Frame, target: tuple[int, int] = DESK_SIZE) -> np.ndarray:
    """Bilinear resize to ``target`` (width, height); returns a [3, H, W] float32 array in [0, 1]."""
    px = frame.pixels
    if (px.shape[1], px.shape[0]) != tuple(target):
        px = np.asarray(Image.fromarray(px).resize(tuple(target), Image.BILINEAR))
    return np.ascontiguousarray(px.transpose(2, 0, 1), dtype=np.float32) / np.float32(255.0)


@dataclass(frozen=True)
class Verdict:
    probability_fully_rendered: float
    decision: Label
    inference_ms: float = 0.0


def decide(probability: float) -> Label:
    # ties go to PARTIALLY so a scheduler errs toward waiting
    return Label.FULLY if probability > 0.5 else Label.PARTIALLY


def infer(model: RenderNet, frame: Frame) -> Verdict:
    if model is None or not getattr(model, "trained", False):
        raise UninitializedModel("model has not been trained or loaded")
    start = time.perf_counter()
    x = preprocess(frame, model.cfg.input_size)[None]
    p = float(sigmoid(model.forward(x, training=False))[0])
    return Verdict(p, decide(p), (time.perf_counter() - start) * 1000.0)


def predict_proba(model: RenderNet, frames: Sequence[Frame], batch_size: int = 64) -> np.ndarray:
    out = []
    for i in range(0, len(frames), batch_size):
        x = np.stack([preprocess(f, model.cfg.input_size) for f in frames[i:i + batch_size]])
        out.append(sigmoid(model.forward(x, training=False)))
    return np.concatenate(out) if out else np.zeros(0)


# data splitting ------------------------------------------------------------------

def split_by_app(entries: Sequence[DatasetEntry], ratios=(8, 1, 1), seed: int = 0):
    """Partition entries so that every app id lands in exactly one of train/val/test."""
    apps = sorted({e.app_id or e.screencast_id for e in entries})
    if len(apps) < 3:
        raise TooFewApps(f"need at least 3 distinct apps, got {len(apps)}")
    order = [apps[i] for i in np.random.default_rng(seed).permutation(len(apps))]
    total = sum(ratios)
    n_val = max(1, int(round(len(apps) * ratios[1] / total)))
    n_test = max(1, int(round(len(apps) * ratios[2] / total)))
    test_ids = set(order[:n_test])
    val_ids = set(order[n_test:n_test + n_val])
    parts = ([], [], [])
    for e in entries:
        a = e.app_id or e.screencast_id
        parts[2 if a in test_ids else 1 if a in val_ids else 0].append(e)
    return parts


# training ----------------------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    lr: float
    loss: float
    val_precision: float = float("nan")
    val_recall: float = float("nan")
    val_f1: float = float("nan")

    def line(self) -> str:
        return (f"epoch={self.epoch} lr={self.lr:.6g} loss={self.loss:.6f} "
                f"val_p={self.val_precision:.4f} val_r={self.val_recall:.4f} val_f1={self.val_f1:.4f}")


@dataclass
class TrainResult:
    model: RenderNet
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = -1


def _tensorise(entries, size):
    x = np.stack([preprocess(e.frame, size) for e in entries])
    y = np.array([1.0 if e.label is Label.FULLY else 0.0 for e in entries], dtype=np.float32)
    return x, y


def train(dataset: Sequence[DatasetEntry], cfg: TrainConfig = TrainConfig(), val: Sequence[DatasetEntry] = (),
          net_cfg: NetConfig = NetConfig(), progress=None) -> TrainResult:
    """Mini-batch Adam on BCE; keeps the parameters of the best validation F1 epoch
    (or the last epoch when no validation set is given)."""
    entries = list(dataset)
    labels = {e.label for e in entries}
    if labels != {Label.FULLY, Label.PARTIALLY}:
        raise DegenerateDataset(f"training data needs both labels, got {sorted(map(str, labels))}")
    x, y = _tensorise(entries, net_cfg.input_size)
    xv, yv = _tensorise(list(val), net_cfg.input_size) if val else (None, None)
    return train_arrays(x, y, cfg, xv, yv, net_cfg, progress)


def train_arrays(x: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig(), xv: np.ndarray | None = None,
                 yv: np.ndarray | None = None, net_cfg: NetConfig = NetConfig(), progress=None) -> TrainResult:
    """The training loop over preprocessed inputs ``x`` [N, 3, H, W] and 0/1 targets ``y``."""
    from .evaluation import counts_from, metrics

    y = np.asarray(y, dtype=np.float32)
    if len(np.unique(y)) != 2:
        raise DegenerateDataset("training data needs both labels")
    model = RenderNet(net_cfg, seed=cfg.rng_seed)
    params = model.parameters()
    state = AdamState()
    rng = np.random.default_rng([cfg.rng_seed, 1])
    result = TrainResult(model)
    best_f1, best_state, step = -1.0, None, 0
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        order = rng.permutation(len(x))
        total, seen = 0.0, 0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            if len(idx) < 2 and len(order) > 1:
                continue  # a singleton batch has no batch-norm statistics
            model.zero_grad()
            z = model.forward(x[idx], training=True)
            loss, gz = bce_loss(z, y[idx])
            model.backward(gz)
            step += 1
            adam_step(params, state, cfg, step, lr)
            total += loss * len(idx)
            seen += len(idx)
        entry = EpochLog(epoch, lr, total / max(seen, 1))
        model.trained = True
        if xv is not None and len(xv):
            pred = sigmoid(_forward_batched(model, xv)) > 0.5
            p, r, f1 = metrics(counts_from(np.asarray(yv) > 0.5, pred))
            entry.val_precision, entry.val_recall, entry.val_f1 = p, r, f1
            if f1 > best_f1:
                best_f1, best_state, result.best_epoch = f1, _snapshot(model), epoch
        result.log.append(entry)
        log.info(entry.line())
        if progress:
            progress(entry)
    if best_state is not None:
        _restore(model, best_state)
    else:
        result.best_epoch = cfg.epochs - 1
    model.trained = True
    return result


def _forward_batched(model, x, batch=128):
    return np.concatenate([model.forward(x[i:i + batch], training=False) for i in range(0, len(x), batch)])


def _snapshot(model):
    return [t.data.copy() for t in model.parameters() + model.buffers()]


def _restore(model, snap):
    for t, d in zip(model.parameters() + model.buffers(), snap):
        t.data = d.copy()


def clone(model: RenderNet) -> RenderNet:
    return copy.deepcopy(model)


# checkpoints -------------------------------------------------------------------------

def save_model(model: RenderNet, path) -> None:
    from .nn import checkpoint
    c = model.cfg
    checkpoint.save(model, path, {"input_size": list(c.input_size), "stem_channels": c.stem_channels,
                                  "blocks": [list(b) for b in c.blocks], "expansion": c.expansion,
                                  "bn_momentum": c.bn_momentum})


def load_model(path) -> RenderNet:
    from .nn import checkpoint
    manifest, _ = checkpoint.read_manifest(path)
    c = manifest["config"]
    cfg = NetConfig(tuple(c["input_size"]), c["stem_channels"], tuple(tuple(b) for b in c["blocks"]),
                    c["expansion"], c["bn_momentum"])
    model = RenderNet(cfg)
    checkpoint.load_into(model, path)
    model.trained = True
    return model
