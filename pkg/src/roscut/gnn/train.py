"""Pre-training over a graph collection and per-instance fine-tuning."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..graph import WeightedGraph
from ..relax import AssignmentMatrix
from ..seeds import EMBEDDING, PARAM_INIT, SHUFFLE, derive_seed
from .adam import AdamState, adam_step
from .model import GnnArchitecture, GnnParameters, NodeEmbeddings, init_parameters, loss_instance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    pretrain_epochs: int = 1
    tolerance: float = 1e-2
    patience: int = 100
    max_finetune_iters: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.tolerance <= 0:
            raise ConfigError("learning_rate and tolerance must be positive")
        if self.pretrain_epochs < 1 or self.patience < 1 or self.max_finetune_iters < 1:
            raise ConfigError("epochs, patience and max_finetune_iters must be >= 1")


@dataclass
class PretrainResult:
    params: GnnParameters
    losses: list[float]
    initial_params: GnnParameters

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses)) if self.losses else 0.0


@dataclass
class FinetuneResult:
    x: AssignmentMatrix
    iterations: int
    trace: list[float]
    best_f: float
    stopped_early: bool
    timed_out: bool = False
    params: GnnParameters | None = field(default=None, repr=False)


def instance_embeddings(arch: GnnArchitecture, g: WeightedGraph, seed: int, *keys: int) -> NodeEmbeddings:
    return NodeEmbeddings.random(arch.input_dim, g.node_count, derive_seed(seed, EMBEDDING, *keys), arch.embedding)


def pretrain(
    dataset: list[WeightedGraph],
    arch: GnnArchitecture,
    cfg: TrainConfig = TrainConfig(),
    params: GnnParameters | None = None,
) -> PretrainResult:
    """Adam with batch size one over a seeded shuffle of ``dataset``.

    Each visit draws fresh embeddings keyed on (seed, epoch, instance).
    """
    if not dataset:
        raise ConfigError("pre-training dataset is empty")
    if params is None:
        params = init_parameters(arch, derive_seed(cfg.seed, PARAM_INIT))
    initial = params.copy()
    state = AdamState.zeros_like(params.arrays())
    rng = np.random.default_rng(derive_seed(cfg.seed, SHUFFLE))
    losses: list[float] = []
    for epoch in range(cfg.pretrain_epochs):
        for idx in rng.permutation(len(dataset)):
            g = dataset[int(idx)]
            h0 = instance_embeddings(arch, g, cfg.seed, epoch, int(idx))
            fval, grads, _ = loss_instance(params, arch, g, h0)
            losses.append(fval)
            arrays, state = adam_step(state, params.arrays(), grads, cfg.learning_rate)
            params = params.replace(arrays)
        log.info("pretrain epoch %d: mean loss %.6g", epoch, np.mean(losses[-len(dataset):]))
    return PretrainResult(params, losses, initial)


def finetune(
    params: GnnParameters,
    arch: GnnArchitecture,
    g: WeightedGraph,
    cfg: TrainConfig = TrainConfig(),
    h0: NodeEmbeddings | None = None,
    deadline: float | None = None,
) -> FinetuneResult:
    """Adam on a single instance with patience-based early stopping.

    An iteration counts as progress when the loss beats the best seen so
    far by more than ``cfg.tolerance``; training stops after ``patience``
    iterations without progress. The returned matrix is the network output
    with the lowest loss observed.
    """
    params.check(arch)
    if h0 is None:
        h0 = instance_embeddings(arch, g, cfg.seed)
    state = AdamState.zeros_like(params.arrays())
    ref = np.inf
    stale = 0
    best_f, best_x, best_params = np.inf, None, params
    trace: list[float] = []
    iters = 0
    stopped_early = timed_out = False
    while True:
        fval, grads, x = loss_instance(params, arch, g, h0)
        trace.append(fval)
        if fval < best_f:
            best_f, best_x, best_params = fval, x, params
        if fval < ref - cfg.tolerance:
            ref = fval
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            stopped_early = True
            break
        if iters >= cfg.max_finetune_iters:
            break
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        arrays, state = adam_step(state, params.arrays(), grads, cfg.learning_rate)
        params = params.replace(arrays)
        iters += 1
    log.debug("finetune: %d iterations, best f=%.6g", iters, best_f)
    return FinetuneResult(best_x, iters, trace, float(best_f), stopped_early, timed_out, best_params)
