"""Knowledge graph triple store: name dictionaries, CSR adjacency, TSV loaders.

Graphs are directed multigraphs of (head, relation, tail) triplets over dense
integer ids. Duplicate triplets are kept as distinct edges. All triplet and
adjacency arrays are frozen after construction; every edge keeps a stable id
(its position in the input order) so downstream consumers can count distinct
edges exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError

INVERSE_SUFFIX = "^-1"


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int


class Dictionary:
    """Bijective name <-> dense-id map. Ids are assigned in first-seen order."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        """Return the id of `name`, inserting it if unseen."""
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._index[name] = idx
            self._names.append(name)
        return idx

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown name {name!r}") from None

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __iter__(self):
        # names in id order
        return iter(self._names)

    def __eq__(self, other):
        return isinstance(other, Dictionary) and self._names == other._names

    @classmethod
    def from_file(cls, path) -> "Dictionary":
        """Load an `id<TAB>name` file; ids must be exactly 0..n-1."""
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n").rstrip("\r")
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(
                        f"{path}:{lineno}: expected id<TAB>name, got {len(parts)} columns"
                    )
                try:
                    idx = int(parts[0])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: id {parts[0]!r} is not an integer") from None
                entries.append((idx, parts[1]))
        entries.sort()
        dct = cls()
        for expected, (idx, name) in enumerate(entries):
            if idx != expected:
                raise DataError(f"{path}: ids are not a contiguous 0-based range (saw {idx})")
            if name in dct:
                raise DataError(f"{path}: duplicate name {name!r}")
            dct.add(name)
        return dct

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for idx, name in enumerate(self._names):
                fh.write(f"{idx}\t{name}\n")


class KnowledgeGraph:
    """Immutable directed multigraph of (head, relation, tail) triplets.

    Out-adjacency is CSR over heads: slots `offsets[v]:offsets[v+1]` of
    `adj_relations` / `adj_tails` / `adj_edge_ids` hold the out-edges of v.
    Edge ids index the original `heads`/`relations`/`tails` arrays.
    """

    def __init__(
        self,
        heads,
        relations,
        tails,
        num_entities: int,
        num_relations: int,
        entity_dict: Dictionary | None = None,
        relation_dict: Dictionary | None = None,
        node_types: dict[int, int] | None = None,
    ):
        heads = np.ascontiguousarray(heads, dtype=np.int64)
        relations = np.ascontiguousarray(relations, dtype=np.int64)
        tails = np.ascontiguousarray(tails, dtype=np.int64)
        if not (heads.shape == relations.shape == tails.shape) or heads.ndim != 1:
            raise DataError("heads, relations and tails must be equal-length 1-d arrays")
        if num_entities < 0 or num_relations < 0:
            raise DataError("entity and relation counts must be non-negative")
        if heads.size:
            lo = min(heads.min(), tails.min())
            hi = max(heads.max(), tails.max())
            if lo < 0 or hi >= num_entities:
                raise DataError(f"entity id {lo if lo < 0 else hi} out of range [0, {num_entities})")
            if relations.min() < 0 or relations.max() >= num_relations:
                raise DataError("relation id out of range")

        self.num_entities = int(num_entities)
        self.num_relations = int(num_relations)
        self.heads = heads
        self.relations = relations
        self.tails = tails
        self.entity_dict = entity_dict
        self.relation_dict = relation_dict
        self.node_types = node_types

        order = np.argsort(heads, kind="stable")
        counts = np.bincount(heads, minlength=num_entities) if heads.size else np.zeros(num_entities, np.int64)
        self.offsets = np.zeros(num_entities + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        self.adj_relations = relations[order]
        self.adj_tails = tails[order]
        self.adj_edge_ids = order
        self.relation_counts = (
            np.bincount(relations, minlength=num_relations) if relations.size else np.zeros(num_relations, np.int64)
        )
        for arr in (self.heads, self.relations, self.tails, self.offsets,
                    self.adj_relations, self.adj_tails, self.adj_edge_ids,
                    self.relation_counts):
            arr.setflags(write=False)

    @property
    def num_triplets(self) -> int:
        return int(self.heads.size)

    def __len__(self) -> int:
        return self.num_triplets

    def out_degree(self, node: int) -> int:
        return int(self.offsets[node + 1] - self.offsets[node])

    def out_edges(self, node: int):
        """Views (relations, tails, edge_ids) of the out-edges of `node`."""
        lo, hi = self.offsets[node], self.offsets[node + 1]
        return self.adj_relations[lo:hi], self.adj_tails[lo:hi], self.adj_edge_ids[lo:hi]

    def out_edge_at(self, node: int, slot: int) -> tuple[int, int]:
        """The (relation, tail) of out-edge number `slot` of `node`."""
        pos = self.offsets[node] + slot
        return int(self.adj_relations[pos]), int(self.adj_tails[pos])

    def triplet(self, edge_id: int) -> Triplet:
        return Triplet(int(self.heads[edge_id]), int(self.relations[edge_id]), int(self.tails[edge_id]))

    def pair_keys(self) -> np.ndarray:
        """head * num_entities + tail for every edge, as int64."""
        return self.heads * np.int64(self.num_entities) + self.tails


def build_adjacency(
    triplets,
    num_entities: int,
    num_relations: int | None = None,
    entity_dict: Dictionary | None = None,
    relation_dict: Dictionary | None = None,
    node_types: dict[int, int] | None = None,
) -> KnowledgeGraph:
    """Build a KnowledgeGraph from an (n, 3) array or iterable of id triples."""
    arr = np.asarray(list(triplets) if not isinstance(triplets, np.ndarray) else triplets, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DataError(f"expected shape (n, 3) triplets, got {arr.shape}")
    if num_relations is None:
        if relation_dict is not None:
            num_relations = len(relation_dict)
        else:
            num_relations = int(arr[:, 1].max()) + 1 if arr.size else 0
    return KnowledgeGraph(
        arr[:, 0], arr[:, 1], arr[:, 2], num_entities, num_relations,
        entity_dict=entity_dict, relation_dict=relation_dict, node_types=node_types,
    )


def sample_edges(graph: KnowledgeGraph, p: float, seed: int = 0) -> KnowledgeGraph:
    """Keep every edge independently with probability p (p=1 returns `graph`)."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sampling probability must be in (0, 1], got {p}")
    if p == 1.0:
        return graph
    rng = np.random.default_rng(seed)
    keep = rng.random(graph.num_triplets) < p
    return KnowledgeGraph(
        graph.heads[keep], graph.relations[keep], graph.tails[keep],
        graph.num_entities, graph.num_relations,
        entity_dict=graph.entity_dict, relation_dict=graph.relation_dict,
        node_types=graph.node_types,
    )


@dataclass
class DatasetSplit:
    """Train/valid/test graphs over one shared pair of dictionaries."""

    train: KnowledgeGraph
    valid: KnowledgeGraph
    test: KnowledgeGraph

    @property
    def entity_dict(self) -> Dictionary | None:
        return self.train.entity_dict

    @property
    def relation_dict(self) -> Dictionary | None:
        return self.train.relation_dict

    @property
    def num_entities(self) -> int:
        return self.train.num_entities

    @property
    def num_relations(self) -> int:
        return self.train.num_relations

    def graphs(self) -> tuple[KnowledgeGraph, KnowledgeGraph, KnowledgeGraph]:
        return self.train, self.valid, self.test


def read_triples_file(path) -> list[tuple[str, str, str]]:
    """Read a `head<TAB>relation<TAB>tail` file into name triples."""
    rows = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, got {len(parts)}"
                )
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def _to_ids(rows, entity_dict: Dictionary, relation_dict: Dictionary) -> np.ndarray:
    arr = np.empty((len(rows), 3), dtype=np.int64)
    for i, (h, r, t) in enumerate(rows):
        arr[i, 0] = entity_dict.id_of(h)
        arr[i, 1] = relation_dict.id_of(r)
        arr[i, 2] = entity_dict.id_of(t)
    return arr


def load_tsv_dataset(
    train_path,
    valid_path,
    test_path,
    dict_paths: tuple | None = None,
    add_inverse: bool = False,
) -> DatasetSplit:
    """Load a three-file TSV dataset into a DatasetSplit.

    Without `dict_paths` (a pair: entity dict file, relation dict file), the
    dictionaries are built in first-seen order over train, then valid, then
    test. A None valid or test path yields an empty split. With
    `add_inverse`, every relation r gains a twin named r^-1 and a reversed
    copy of each training edge is appended to the training graph only;
    evaluation splits keep the original triplets.
    """
    splits = [read_triples_file(p) if p is not None else []
              for p in (train_path, valid_path, test_path)]
    if dict_paths is not None:
        entity_dict = Dictionary.from_file(dict_paths[0])
        relation_dict = Dictionary.from_file(dict_paths[1])
    else:
        entity_dict = Dictionary()
        relation_dict = Dictionary()
        for rows in splits:
            for h, r, t in rows:
                entity_dict.add(h)
                entity_dict.add(t)
                relation_dict.add(r)

    arrays = [_to_ids(rows, entity_dict, relation_dict) for rows in splits]
    train_arr, valid_arr, test_arr = arrays

    if add_inverse:
        base = len(relation_dict)
        for name in list(relation_dict):
            twin = name + INVERSE_SUFFIX
            if twin in relation_dict:
                raise DataError(f"relation name {twin!r} collides with an inverse twin")
            relation_dict.add(twin)
        if train_arr.size:
            flipped = np.column_stack(
                (train_arr[:, 2], train_arr[:, 1] + base, train_arr[:, 0])
            )
            train_arr = np.concatenate((train_arr, flipped))

    num_entities = len(entity_dict)
    num_relations = len(relation_dict)

    def build(arr):
        return build_adjacency(arr, num_entities, num_relations, entity_dict, relation_dict)

    return DatasetSplit(train=build(train_arr), valid=build(valid_arr), test=build(test_arr))
