"""Link prediction evaluation: per-triplet ranks pooled into MR/MRR/Hits@k.

For each evaluation triplet the true head (then tail) competes against
every entity as a replacement candidate. The filtered protocol removes
candidates that form a known true triplet in any split, except the positive
itself. Ties resolve optimistically (rank = 1 + number of strictly better
candidates) or pessimistically (1 + number of candidates at least as good,
the positive excluded).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import KnowledgeGraph, Triplet
from .models import EmbeddingState
from .sharing import SharingStrategy, relation_vector

PROTOCOLS = ("raw", "filtered")
TIE_POLICIES = ("optimistic", "pessimistic")

_EMPTY = np.empty(0, dtype=np.int64)


class EvalFilter:
    """Known-true candidate sets per (head, relation) and (relation, tail)."""

    def __init__(self):
        self._tails: dict[tuple[int, int], np.ndarray] = {}
        self._heads: dict[tuple[int, int], np.ndarray] = {}

    @classmethod
    def from_graphs(cls, graphs) -> "EvalFilter":
        tails: dict[tuple[int, int], set[int]] = {}
        heads: dict[tuple[int, int], set[int]] = {}
        for graph in graphs:
            for h, r, t in zip(graph.heads, graph.relations, graph.tails):
                tails.setdefault((int(h), int(r)), set()).add(int(t))
                heads.setdefault((int(r), int(t)), set()).add(int(h))
        out = cls()
        out._tails = {k: np.fromiter(sorted(v), np.int64) for k, v in tails.items()}
        out._heads = {k: np.fromiter(sorted(v), np.int64) for k, v in heads.items()}
        return out

    def known_tails(self, head: int, relation: int) -> np.ndarray:
        return self._tails.get((head, relation), _EMPTY)

    def known_heads(self, relation: int, tail: int) -> np.ndarray:
        return self._heads.get((relation, tail), _EMPTY)


@dataclass
class RankingResult:
    mr: float
    mrr: float
    hits: dict[int, float]
    protocol: str
    count: int
    head_ranks: np.ndarray | None = field(default=None, repr=False)
    tail_ranks: np.ndarray | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        out = {"mr": self.mr, "mrr": self.mrr, "protocol": self.protocol, "count": self.count}
        for k, v in sorted(self.hits.items()):
            out[f"hits{k}"] = v
        return out

    def table(self) -> str:
        lines = [
            f"{'metric':<10}{'value':>12}",
            f"{'mr':<10}{self.mr:>12.4f}",
            f"{'mrr':<10}{self.mrr:>12.4f}",
        ]
        for k, v in sorted(self.hits.items()):
            lines.append(f"{f'hits@{k}':<10}{v:>12.4f}")
        lines.append(f"{'ranked':<10}{self.count:>12d}")
        lines.append(f"{'protocol':<10}{self.protocol:>12}")
        return "\n".join(lines)


def _candidate_scores(
    state: EmbeddingState, r: np.ndarray, fixed: np.ndarray, side: str, scoring: str,
) -> np.ndarray:
    """Scores of every entity substituted on one side, `fixed` on the other."""
    emb = state.entity_emb
    if scoring == "transe_l2":
        target = fixed - r if side == "head" else fixed + r
        delta = emb - target
        return -np.sqrt(np.einsum("ij,ij->i", delta, delta))
    if scoring == "transe_l1":
        target = fixed - r if side == "head" else fixed + r
        return -np.abs(emb - target).sum(axis=1)
    if scoring == "distmult":
        return (emb * fixed) @ r
    raise ValueError(f"unknown scoring {scoring!r}")


def _rank(scores: np.ndarray, true_idx: int, known: np.ndarray | None, tie: str) -> int:
    pos = scores[true_idx]
    if tie == "optimistic":
        better = scores > pos
    else:
        better = scores >= pos
    if known is not None and known.size:
        better[known] = False
    better[true_idx] = False
    return 1 + int(np.count_nonzero(better))


def rank_triplet(
    triplet,
    state: EmbeddingState,
    strategy: SharingStrategy,
    scoring: str,
    graph_filter: EvalFilter | None = None,
    protocol: str = "filtered",
    tie: str = "optimistic",
) -> tuple[int, int]:
    """(head-corruption rank, tail-corruption rank) of one triplet."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if tie not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie!r}")
    if protocol == "filtered" and graph_filter is None:
        raise ValueError("filtered protocol needs an EvalFilter")
    h, rel, t = triplet.head, triplet.relation, triplet.tail
    r = relation_vector(state, strategy, rel)

    head_known = graph_filter.known_heads(rel, t) if protocol == "filtered" else None
    scores = _candidate_scores(state, r, state.entity_emb[t], "head", scoring)
    head_rank = _rank(scores, h, head_known, tie)

    tail_known = graph_filter.known_tails(h, rel) if protocol == "filtered" else None
    scores = _candidate_scores(state, r, state.entity_emb[h], "tail", scoring)
    tail_rank = _rank(scores, t, tail_known, tie)
    return head_rank, tail_rank


def compute_metrics(ranks, ks=(1, 3, 10), protocol: str = "filtered") -> RankingResult:
    """Aggregate a pool of ranks into MR, MRR and Hits@k."""
    arr = np.asarray(ranks, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty rank pool")
    hits = {int(k): float(np.mean(arr <= k)) for k in ks}
    return RankingResult(
        mr=float(arr.mean()),
        mrr=float((1.0 / arr).mean()),
        hits=hits,
        protocol=protocol,
        count=int(arr.size),
    )


def evaluate(
    state: EmbeddingState,
    strategy: SharingStrategy,
    scoring: str,
    graph: KnowledgeGraph,
    graph_filter: EvalFilter | None = None,
    protocol: str = "filtered",
    tie: str = "optimistic",
    ks=(1, 3, 10),
) -> RankingResult:
    """Rank every triplet of `graph` in both directions and pool the ranks."""
    head_ranks = np.empty(graph.num_triplets, dtype=np.int64)
    tail_ranks = np.empty(graph.num_triplets, dtype=np.int64)
    for i in range(graph.num_triplets):
        triplet = Triplet(int(graph.heads[i]), int(graph.relations[i]), int(graph.tails[i]))
        head_ranks[i], tail_ranks[i] = rank_triplet(
            triplet, state, strategy, scoring, graph_filter, protocol, tie,
        )
    result = compute_metrics(np.concatenate((head_ranks, tail_ranks)), ks, protocol)
    result.head_ranks = head_ranks
    result.tail_ranks = tail_ranks
    return result
