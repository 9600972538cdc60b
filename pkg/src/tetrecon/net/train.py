"""Subgraph-batch training."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..features import apply_normalizer, fit_normalizer
from .graph import Graph, batch_plan, disjoint_union
from .loss import kl_loss
from .model import OccupancyModel
from .optim import Adam, scheduled_lr

log = logging.getLogger(__name__)


@dataclass
class Scene:
    graph: Graph
    features: np.ndarray    # raw (unnormalized) features, zero rows for infinite cells
    occupancy: np.ndarray   # ground-truth fractions
    volumes: np.ndarray     # 0 for infinite cells
    finite: np.ndarray      # bool mask


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-4
    lr_decay_every: int = 10
    lr_decay: float = 0.1
    steps_per_epoch: int = 0     # 0: enough steps to draw every finite cell once on average
    seed: int = 0


@dataclass
class History:
    epochs: list
    lrs: list
    losses: list


def merge_scenes(scenes):
    graph, offsets = disjoint_union([s.graph for s in scenes])
    cat = lambda f: np.concatenate([getattr(s, f) for s in scenes])
    return Scene(graph, cat("features"), cat("occupancy"), cat("volumes"), cat("finite")), offsets


def train(model, scenes, config=TrainConfig(), on_epoch=None):
    """Train in place; returns the per-epoch mean loss history.

    Each step samples ``batch_size`` centers uniformly among the finite cells of
    all scenes, evaluates every center on its own K-hop subgraph, and applies the
    volume-weighted loss to the centers.  The normalizer is fitted on the
    training cells when the model does not carry one yet.
    """
    if not scenes:
        raise ValueError("empty dataset")
    data, _ = merge_scenes(scenes)
    if model.normalizer is None:
        model.normalizer = fit_normalizer(data.features, data.finite)
    X = apply_normalizer(model.normalizer, data.features, data.finite)
    finite_ids = np.nonzero(data.finite)[0]
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params, lr=config.lr)
    steps = config.steps_per_epoch or max(1, math.ceil(len(finite_ids) / config.batch_size))
    hist = History([], [], [])
    for epoch in range(config.epochs):
        lr = scheduled_lr(config.lr, epoch, config.lr_decay_every, config.lr_decay)
        total = 0.0
        for _ in range(steps):
            centers = finite_ids[rng.integers(0, len(finite_ids), config.batch_size)]
            plan = batch_plan(data.graph, centers, model.n_layers)
            scores = model.forward(plan, X, "train", keep=True)
            loss, dscores = kl_loss(scores, data.occupancy[centers], data.volumes[centers])
            grads = model.backward(dscores)
            opt.step(model.params, grads, lr=lr)
            total += loss
        hist.epochs.append(epoch)
        hist.lrs.append(lr)
        hist.losses.append(total / steps)
        log.info("epoch %d lr %.3g loss %.6f", epoch, lr, total / steps)
        if on_epoch is not None:
            on_epoch(epoch, lr, total / steps)
    return hist
