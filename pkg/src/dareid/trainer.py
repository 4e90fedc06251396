"""End-to-end training loop: sampler -> embedder/heads -> losses -> AMSGrad.

Runs are deterministic given (seed, config, data): the sampler rng for epoch
e is seeded from (seed, e+1) and parameter init from (seed, 0), so resuming
from a checkpoint at epoch k reproduces the uninterrupted run exactly.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import network
from .autodiff import NonFiniteError, Tensor, softmax_cross_entropy
from .evaluation import EvalConfig, evaluate_retrieval
from .losses import LossWeights, total_loss
from .network import ModelConfig, embed, head_logits, init_params
from .optimizer import LrSchedule, OptimState, amsgrad_step, lr_at_epoch
from .sampling import REAL, BatchSpec, build_identity_index, sample_batch

DISJOINT_NAMES = ("color", "type", "orientation")


class DivergenceError(Exception):
    """Total loss became non-finite; records the offending iteration."""

    def __init__(self, iteration, run_log):
        super().__init__(f"training diverged at iteration {iteration}")
        self.iteration = iteration
        self.run_log = run_log


@dataclass
class TrainConfig:
    model: ModelConfig
    batch: BatchSpec
    weights: LossWeights = field(default_factory=LossWeights)
    schedule: LrSchedule = field(default_factory=LrSchedule)
    epochs: int = 60
    iterations_per_epoch: Optional[int] = None
    seed: int = 0
    disjoint: tuple = DISJOINT_NAMES
    use_domain_loss: bool = True
    use_synthetic: bool = True
    triplet_on_logits: bool = False
    squared_triplet: bool = False
    triplet_reduction: str = "sum"
    num_orientation_bins: int = 6

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        unknown = set(self.disjoint) - set(DISJOINT_NAMES)
        if unknown:
            raise ValueError(f"unknown disjoint losses: {sorted(unknown)}")
        if not self.use_synthetic:
            # single-domain baseline: no synthetic rows to mask or discriminate
            self.disjoint = ()
            self.use_domain_loss = False


@dataclass
class TrainResult:
    params: object
    optim: OptimState
    run_log: list
    epochs_done: int
    config: TrainConfig


def _iteration_step(config, params, batch):
    feats = Tensor(batch.features)
    emb = embed(params, feats)
    id_logits = head_logits(params, emb, "id")
    disjoint_logits = {name: head_logits(params, emb, name)
                       for name in DISJOINT_NAMES}
    return total_loss(
        emb, id_logits, disjoint_logits, params.heads["domain"], batch,
        config.weights, enabled_disjoint=config.disjoint,
        use_domain=config.use_domain_loss,
        triplet_features=id_logits if config.triplet_on_logits else None,
        squared_triplet=config.squared_triplet,
        triplet_reduction=config.triplet_reduction)


def train(config, real_data, synth_data=None, resume_from=None):
    """Train from scratch or resume from a checkpoint dict."""
    dataset = list(real_data) + list(synth_data or [])
    index = build_identity_index(dataset)

    if resume_from is not None:
        params = network.params_from_checkpoint(resume_from)
        optim = OptimState.from_dict(resume_from["optim"])
        start_epoch = resume_from["epoch"]
    else:
        params = init_params(config.model, np.random.SeedSequence(
            [config.seed, 0]).generate_state(1)[0])
        optim = OptimState()
        start_epoch = 0

    rows = config.batch.n * config.batch.m * (2 if config.use_synthetic else 1)
    iters = config.iterations_per_epoch
    if iters is None:
        iters = max(1, math.ceil(len(dataset) / rows))

    run_log = []
    global_it = start_epoch * iters
    for epoch in range(start_epoch, config.epochs):
        rng = np.random.default_rng([config.seed, epoch + 1])
        lr = lr_at_epoch(config.schedule, epoch)
        for _ in range(iters):
            global_it += 1
            try:
                batch = sample_batch(dataset, index, config.batch, rng,
                                     config.num_orientation_bins,
                                     config.use_synthetic)
                breakdown, loss = _iteration_step(config, params, batch)
                if not np.isfinite(breakdown.total):
                    raise DivergenceError(global_it, run_log)
                params.zero_grad()
                loss.backward()
                amsgrad_step(optim, params.named(), lr)
            except (NonFiniteError, FloatingPointError):
                raise DivergenceError(global_it, run_log)
            run_log.append({"iteration": global_it, "epoch": epoch, "lr": lr,
                            **breakdown.as_dict()})
    return TrainResult(params, optim, run_log, config.epochs, config)


def embed_samples(params, samples):
    feats = np.stack([s.features for s in samples])
    return embed(params, Tensor(feats)).data


def evaluate(params, query_samples, gallery_samples, eval_config=None,
             exclude_self=False):
    """Embed both sets and delegate to the retrieval evaluator."""
    if query_samples and (len(query_samples[0].features)
                          != params.config.input_dim):
        raise ValueError("checkpoint input_dim does not match dataset")
    q = embed_samples(params, query_samples)
    g = embed_samples(params, gallery_samples)
    qids = np.array([s.id for s in query_samples])
    gids = np.array([s.id for s in gallery_samples])
    exclude = None
    if exclude_self:
        if len(query_samples) != len(gallery_samples):
            raise ValueError("self-exclusion requires query set == gallery set")
        exclude = np.eye(len(qids), dtype=bool)
    return evaluate_retrieval(q, g, qids, gids, eval_config or EvalConfig(),
                              exclude)


def id_accuracy(params, samples):
    """Top-1 accuracy of the ID head over a sample list."""
    emb = embed(params, Tensor(np.stack([s.features for s in samples])))
    logits = head_logits(params, emb, "id").data
    pred = logits.argmax(axis=1)
    truth = np.array([s.id for s in samples])
    return float((pred == truth).mean())


def domain_probe_accuracy(train_emb, train_dom, test_emb, test_dom,
                          seed=0, steps=400, lr=0.05):
    """Accuracy of a freshly trained logistic domain probe on held-out rows.

    The probe is independent of the model's own domain head; it measures how
    much domain information survives in the embeddings.
    """
    d = train_emb.shape[1]
    rng = np.random.default_rng(seed)
    w = Tensor(rng.normal(0.0, 0.01, size=(d, 2)), requires_grad=True)
    b = Tensor(np.zeros((1, 2)), requires_grad=True)
    x = Tensor(train_emb)
    labels = np.asarray(train_dom, dtype=np.int64)
    optim = OptimState(weight_decay=0.0)
    for _ in range(steps):
        loss = softmax_cross_entropy(x @ w + b, labels)
        w.zero_grad()
        b.zero_grad()
        loss.backward()
        amsgrad_step(optim, [("w", w), ("b", b)], lr)
    logits = np.asarray(test_emb) @ w.data + b.data
    pred = logits.argmax(axis=1)
    return float((pred == np.asarray(test_dom)).mean())
