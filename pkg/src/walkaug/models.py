"""Shallow embedding models: state, scoring, logistic loss, sparse SGD.

Two scorers over entity/relation vectors of one shared dimension:

  transe_l1 / transe_l2   s(h, r, t) = -|h + r - t| under the L1 / L2 norm
  distmult                s(h, r, t) = sum_i h_i * r_i * t_i

The distmult sum is computed as dot(h * t, r) so that swapping h and t
gives the bit-identical score. Losses are per-positive with k entity
corruptions:

  loss = weight * [softplus(-(margin + s_pos)) + mean_j softplus(margin + s_j)]

Gradients are collected per touched row (entities, relations, sharing
parameters) and applied by plain SGD with optional L2 shrinkage on exactly
the touched rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .graph import Triplet
from .mining import Metapath
from .sharing import (
    BasisParams,
    RnnParams,
    SharingStrategy,
    SparseGrads,
    relation_backward,
    relation_vector,
)

SCORINGS = ("transe_l1", "transe_l2", "distmult")

DEFAULT_BASIS_CAP = 64


def default_margin(scoring: str) -> float:
    return 0.0 if scoring == "distmult" else 12.0


@dataclass
class ModelConfig:
    scoring: str = "transe_l2"
    dim: int = 200
    margin: float | None = None      # None resolves per scorer
    negatives: int = 16
    lr: float = 0.1                  # embedding rows
    lr_dense: float = 0.01           # recurrence and basis parameters
    regularization: float = 0.0
    epochs: int = 50
    batch_nodes: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.margin is None:
            self.margin = default_margin(self.scoring)

    def validate(self) -> None:
        if self.scoring not in SCORINGS:
            raise ConfigError(f"unknown scoring {self.scoring!r}")
        if self.dim < 1:
            raise ConfigError(f"dimension must be positive, got {self.dim}")
        if self.negatives < 1:
            raise ConfigError(f"negative count must be positive, got {self.negatives}")
        if self.margin < 0:
            raise ConfigError(f"margin must be non-negative, got {self.margin}")
        if self.lr <= 0 or self.lr_dense <= 0:
            raise ConfigError("learning rates must be positive")
        if self.regularization < 0:
            raise ConfigError(f"regularization must be non-negative, got {self.regularization}")
        if self.epochs < 1 or self.batch_nodes < 1:
            raise ConfigError("epochs and batch size must be positive")


@dataclass
class EmbeddingState:
    """All learnable parameters plus the minted-relation id map."""

    entity_emb: np.ndarray    # (num_entities, d)
    relation_emb: np.ndarray  # (rows, d); rows include minted ids only for the free strategy
    num_original_relations: int
    minted_paths: dict[int, Metapath] = field(default_factory=dict)
    rnn: RnnParams | None = None
    basis: BasisParams | None = None

    def __post_init__(self):
        self._minted_ids = {m: rid for rid, m in self.minted_paths.items()}

    @property
    def dim(self) -> int:
        return int(self.entity_emb.shape[1])

    @property
    def num_entities(self) -> int:
        return int(self.entity_emb.shape[0])

    def minted_id_of(self, metapath: Metapath) -> int | None:
        return self._minted_ids.get(metapath)

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(
            self.entity_emb.copy(),
            self.relation_emb.copy(),
            self.num_original_relations,
            dict(self.minted_paths),
            self.rnn.copy() if self.rnn is not None else None,
            self.basis.copy() if self.basis is not None else None,
        )


def init_state(
    num_entities: int,
    num_relations: int,
    minted_paths: dict[int, Metapath],
    config: ModelConfig,
    strategy: SharingStrategy,
    rng,
) -> EmbeddingState:
    """Fresh parameters; the rng draw order is fixed so seeds reproduce."""
    strategy.validate(config.scoring)
    config.validate()
    d = config.dim
    bound = 6.0 / math.sqrt(d)
    entity = rng.uniform(-bound, bound, size=(num_entities, d))
    rows = num_relations + (len(minted_paths) if strategy.kind == "none" else 0)
    relation = rng.uniform(-bound, bound, size=(rows, d))

    rnn = None
    basis = None
    if strategy.kind == "rnn":
        wb = 1.0 / math.sqrt(d)
        rnn = RnnParams(
            w_in=rng.uniform(-wb, wb, size=(d, d)),
            w_rec=rng.uniform(-wb, wb, size=(d, d)),
            bias=np.zeros(d),
        )
    elif strategy.kind == "basis":
        count = strategy.basis_count or min(num_relations, DEFAULT_BASIS_CAP)
        vectors = rng.uniform(-bound, bound, size=(count, d))
        scale = math.sqrt(1.0 / count)
        keys: list[Metapath] = sorted(m for m in minted_paths.values())
        if strategy.basis_include_original:
            keys += [(rel,) for rel in range(num_relations)]
        coefficients = {key: rng.normal(0.0, scale, size=count) for key in keys}
        basis = BasisParams(vectors, coefficients, strategy.basis_include_original)

    return EmbeddingState(entity, relation, num_relations, dict(minted_paths), rnn, basis)


def score(h: np.ndarray, r: np.ndarray, t: np.ndarray, scoring: str) -> float:
    """Plausibility of one triplet from its three vectors (higher is better)."""
    if h.shape != r.shape or h.shape != t.shape:
        raise ValueError(f"vector shapes differ: {h.shape}, {r.shape}, {t.shape}")
    if scoring == "transe_l2":
        delta = h + r - t
        return float(-np.sqrt(delta @ delta))
    if scoring == "transe_l1":
        return float(-np.abs(h + r - t).sum())
    if scoring == "distmult":
        return float((h * t) @ r)
    raise ValueError(f"unknown scoring {scoring!r}")


def score_backward(
    h: np.ndarray, r: np.ndarray, t: np.ndarray, scoring: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ds/dh, ds/dr, ds/dt) for one triplet."""
    if scoring == "transe_l2":
        delta = h + r - t
        norm = math.sqrt(float(delta @ delta))
        if norm == 0.0:
            zero = np.zeros_like(h)
            return zero, zero.copy(), zero.copy()
        g = -delta / norm
        return g, g, -g
    if scoring == "transe_l1":
        g = -np.sign(h + r - t)
        return g, g, -g
    if scoring == "distmult":
        return r * t, h * t, h * r
    raise ValueError(f"unknown scoring {scoring!r}")


def negative_sample(triplet, num_entities: int, k: int, rng) -> list[Triplet]:
    """k corruptions of `triplet`, each replacing head or tail by a fair coin."""
    if k < 1:
        raise ValueError(f"need at least one negative, got {k}")
    if num_entities < 1:
        raise ValueError("cannot corrupt over an empty entity set")
    out = []
    for _ in range(k):
        corrupt_head = rng.random() < 0.5
        entity = int(rng.integers(num_entities))
        if corrupt_head:
            out.append(Triplet(entity, triplet.relation, triplet.tail))
        else:
            out.append(Triplet(triplet.head, triplet.relation, entity))
    return out


def _softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def loss_and_grad(
    positive,
    negatives,
    state: EmbeddingState,
    strategy: SharingStrategy,
    config: ModelConfig,
) -> tuple[float, SparseGrads]:
    """Weighted logistic loss of one positive against its corruptions.

    `positive` needs head/relation/tail and may carry a weight (default 1).
    All negatives must share the positive's relation; only entity rows
    differ, so the relation vector is built and backpropagated once.
    """
    weight = getattr(positive, "weight", 1.0)
    grads = SparseGrads()
    if weight == 0.0:
        return 0.0, grads

    scoring = config.scoring
    margin = config.margin
    h = state.entity_emb[positive.head]
    t = state.entity_emb[positive.tail]
    r = relation_vector(state, strategy, positive.relation)

    s_pos = score(h, r, t, scoring)
    total = _softplus(-(margin + s_pos))
    coeff = -weight * _sigmoid(-(margin + s_pos))
    dh, dr, dt = score_backward(h, r, t, scoring)
    grads.add_entity(positive.head, coeff * dh)
    grads.add_entity(positive.tail, coeff * dt)
    dr_total = coeff * dr

    k = len(negatives)
    for neg in negatives:
        if neg.relation != positive.relation:
            raise ValueError("negatives must share the positive's relation")
        hn = state.entity_emb[neg.head]
        tn = state.entity_emb[neg.tail]
        s_neg = score(hn, r, tn, scoring)
        total += _softplus(margin + s_neg) / k
        c = weight * _sigmoid(margin + s_neg) / k
        dh, dr, dt = score_backward(hn, r, tn, scoring)
        grads.add_entity(neg.head, c * dh)
        grads.add_entity(neg.tail, c * dt)
        dr_total += c * dr

    loss = weight * total
    if not math.isfinite(loss):
        ident = (positive.head, positive.relation, positive.tail)
        raise NumericError(f"non-finite loss {loss!r} for triplet {ident}", triplet=positive)
    relation_backward(state, strategy, positive.relation, dr_total, grads)
    return loss, grads


def apply_update(state: EmbeddingState, grads: SparseGrads, config: ModelConfig) -> None:
    """One SGD step; L2 shrinkage hits only the touched rows and parameters."""
    lr = config.lr
    reg = config.regularization
    for idx in sorted(grads.entity):
        row = state.entity_emb[idx]
        row -= lr * (grads.entity[idx] + reg * row)
    for idx in sorted(grads.relation):
        row = state.relation_emb[idx]
        row -= lr * (grads.relation[idx] + reg * row)
    lrd = config.lr_dense
    if grads.rnn_w_in is not None:
        rnn = state.rnn
        rnn.w_in -= lrd * (grads.rnn_w_in + reg * rnn.w_in)
        rnn.w_rec -= lrd * (grads.rnn_w_rec + reg * rnn.w_rec)
        rnn.bias -= lrd * (grads.rnn_bias + reg * rnn.bias)
    if grads.basis_vectors is not None:
        vectors = state.basis.vectors
        vectors -= lrd * (grads.basis_vectors + reg * vectors)
    for key in sorted(grads.basis_coef):
        coef = state.basis.coefficients[key]
        coef -= lrd * (grads.basis_coef[key] + reg * coef)
