"""Training loop: walk-augmented minibatches, accumulated SGD, early stopping.

Every epoch shuffles the entity set into node batches. Each batch becomes a
mixed list of walk-derived and original triplets, every triplet is scored
against its negative corruptions, and the accumulated sparse gradients are
applied in one step per batch. Validation MRR (filtered, optimistic) is
measured after every epoch; training stops early after `patience` epochs
without improvement and the best-validation state is returned.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import NewRelationRegistry, build_minibatch
from .errors import ConfigError, DataError
from .evaluation import EvalFilter, evaluate
from .graph import DatasetSplit
from .mining import Metapath
from .models import (
    EmbeddingState,
    ModelConfig,
    apply_update,
    init_state,
    loss_and_grad,
    negative_sample,
)
from .rules import RuleMap
from .sharing import SharingStrategy, SparseGrads
from .storage import Checkpoint, save_checkpoint


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    valid_mrr: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    state: EmbeddingState        # best validation state (last state if no validation)
    final_state: EmbeddingState
    log: list[EpochStats]
    registry: NewRelationRegistry


def _check_resume_config(config: ModelConfig, strategy: SharingStrategy, resume: Checkpoint) -> None:
    ours, theirs = asdict(config), asdict(resume.config)
    ours.pop("epochs"), theirs.pop("epochs")  # training longer is the point of resuming
    mismatched = [k for k in ours if ours[k] != theirs[k]]
    mismatched += [] if asdict(strategy) == asdict(resume.strategy) else ["strategy"]
    if mismatched:
        raise ConfigError(f"resume checkpoint disagrees on: {', '.join(sorted(mismatched))}")


def train(
    dataset: DatasetSplit,
    informative: dict[Metapath, float],
    rulemaps: dict[Metapath, RuleMap],
    config: ModelConfig,
    strategy: SharingStrategy = SharingStrategy(),
    l_max: int = 3,
    mint_new_relations: bool = True,
    rule_sampling: str = "normalized",
    original_edge_sample: int | None = None,
    patience: int = 2,
    checkpoint_dir: str | None = None,
    resume: Checkpoint | None = None,
    progress=None,
) -> TrainResult:
    """Fit embeddings on the walk-augmented training graph.

    `informative` maps metapath -> z score, `rulemaps` carries the mined
    rules for (a subset of) those metapaths. Rule-less informative metapaths
    are minted as new relations up front, in sorted order, so relation ids
    are fixed for a given mining result regardless of walk order.
    """
    config.validate()
    strategy.validate(config.scoring)
    graph = dataset.train
    if graph.num_triplets == 0:
        raise DataError("training graph has no triplets")

    if resume is not None:
        _check_resume_config(config, strategy, resume)
        registry = resume.registry
        state = resume.state
        best_state = resume.best_state
        best_mrr = resume.best_mrr
        bad_epochs = resume.bad_epochs
        first_epoch = resume.epoch + 1
        log = [EpochStats(**entry) for entry in resume.log]
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
    else:
        registry = NewRelationRegistry(graph.num_relations)
        if mint_new_relations:
            for metapath in sorted(informative):
                rule = rulemaps.get(metapath)
                if rule is None or not rule.entries:
                    registry.get_or_mint(metapath)
        rng = np.random.default_rng(config.seed)
        minted = {rid: m for rid, m in registry.items()}
        state = init_state(graph.num_entities, graph.num_relations, minted, config, strategy, rng)
        best_state = state.copy()
        best_mrr = -math.inf
        bad_epochs = 0
        first_epoch = 1
        log = []

    graph_filter = EvalFilter.from_graphs(dataset.graphs())
    has_valid = dataset.valid.num_triplets > 0

    for epoch in range(first_epoch, config.epochs + 1):
        order = rng.permutation(graph.num_entities)
        loss_sum = 0.0
        loss_count = 0
        for start in range(0, order.size, config.batch_nodes):
            nodes = order[start:start + config.batch_nodes]
            triplets = build_minibatch(
                graph, nodes, l_max, informative, rulemaps, registry, rng,
                mint_new_relations=mint_new_relations, rule_sampling=rule_sampling,
                original_edge_sample=original_edge_sample,
            )
            if not triplets:
                continue
            grads = SparseGrads()
            for triplet in triplets:
                negatives = negative_sample(triplet, graph.num_entities, config.negatives, rng)
                loss, g = loss_and_grad(triplet, negatives, state, strategy, config)
                grads.update(g)
                loss_sum += loss
                loss_count += 1
            apply_update(state, grads, config)

        valid_mrr = None
        if has_valid:
            result = evaluate(state, strategy, config.scoring, dataset.valid,
                              graph_filter, protocol="filtered", tie="optimistic")
            valid_mrr = result.mrr
            if valid_mrr > best_mrr:
                best_mrr = valid_mrr
                best_state = state.copy()
                bad_epochs = 0
            else:
                bad_epochs += 1
        else:
            best_state = state

        stats = EpochStats(epoch, loss_sum / max(loss_count, 1), valid_mrr)
        log.append(stats)
        if progress is not None:
            progress(stats)
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir, Checkpoint(
                state=state, best_state=best_state, config=config, strategy=strategy,
                registry=registry, rng_state=rng.bit_generator.state,
                epoch=epoch, best_mrr=best_mrr, bad_epochs=bad_epochs,
                log=[entry.to_dict() for entry in log],
            ))
        if has_valid and bad_epochs >= patience:
            break

    return TrainResult(state=best_state, final_state=state, log=log, registry=registry)
