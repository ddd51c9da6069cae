"""Metapath mining over relational self-joins.

A metapath is a tuple of relation ids. The miner grows a table of path
instances one hop at a time, scoring each metapath m by

    z_m = prod_i  (edges of type m_i covered by instances of m at hop i)
                  / (all edges of type m_i)

and deleting any group whose partial product already falls below the
threshold. The per-hop ratio can only shrink when a metapath is extended,
because every instance of the extension embeds an instance of the prefix,
so the pruning never discards a metapath that could still qualify.

When the graph is edge-sampled with probability p < 1, covered-edge counts
are corrected back to full-graph scale by solving for the root of an
occupancy residual (see `correction_residual`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, MiningLimitError, NumericError
from .graph import KnowledgeGraph, sample_edges
from .rootfind import brent

Metapath = tuple[int, ...]

DEFAULT_MAX_TABLE_ROWS = 200_000_000


@dataclass(frozen=True)
class PathGroup:
    """All instances of one metapath: parallel (src, dst) plus per-hop edge ids."""

    src: np.ndarray    # (n,)
    dst: np.ndarray    # (n,)
    edges: np.ndarray  # (n, length)

    @property
    def size(self) -> int:
        return int(self.src.size)

    @property
    def length(self) -> int:
        return int(self.edges.shape[1])


@dataclass(frozen=True)
class _RelIndex:
    """Edges of one relation sorted by source node, for range joins."""

    offsets: np.ndarray  # (num_entities + 1,)
    dst: np.ndarray      # (count,)
    edge: np.ndarray     # (count,)


class JoinTable:
    """Path instances grouped by metapath."""

    def __init__(self, groups: dict[Metapath, PathGroup], num_entities: int):
        self.groups = groups
        self.num_entities = num_entities
        self._index: dict[int, _RelIndex] | None = None

    @classmethod
    def from_graph(cls, graph: KnowledgeGraph) -> "JoinTable":
        """One group per relation that has at least one edge."""
        order = np.argsort(graph.relations, kind="stable")
        rels = graph.relations[order]
        groups: dict[Metapath, PathGroup] = {}
        bounds = np.searchsorted(rels, np.arange(graph.num_relations + 1))
        for rel in range(graph.num_relations):
            lo, hi = bounds[rel], bounds[rel + 1]
            if lo == hi:
                continue
            ids = order[lo:hi]
            groups[(rel,)] = PathGroup(graph.heads[ids], graph.tails[ids], ids[:, None])
        return cls(groups, graph.num_entities)

    @property
    def row_count(self) -> int:
        return sum(g.size for g in self.groups.values())

    def hop_index(self) -> dict[int, _RelIndex]:
        """Per-relation source index; only valid for a 1-hop table."""
        if self._index is None:
            index: dict[int, _RelIndex] = {}
            for key, group in self.groups.items():
                if len(key) != 1:
                    raise ValueError("hop index requires a table of single-relation groups")
                order = np.argsort(group.src, kind="stable")
                counts = np.bincount(group.src, minlength=self.num_entities)
                offsets = np.zeros(self.num_entities + 1, dtype=np.int64)
                np.cumsum(counts, out=offsets[1:])
                index[key[0]] = _RelIndex(offsets, group.dst[order], group.edges[order, 0])
            self._index = dict(sorted(index.items()))
        return self._index


def _extend_group(group: PathGroup, idx: _RelIndex) -> PathGroup | None:
    """Join every instance in `group` with the indexed relation's out-edges."""
    starts = idx.offsets[group.dst]
    counts = idx.offsets[group.dst + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return None
    rows = np.repeat(np.arange(group.size, dtype=np.int64), counts)
    first = np.zeros(group.size, dtype=np.int64)
    np.cumsum(counts[:-1], out=first[1:])
    within = np.arange(total, dtype=np.int64) - first[rows]
    take = starts[rows] + within
    edges = np.concatenate((group.edges[rows], idx.edge[take][:, None]), axis=1)
    return PathGroup(group.src[rows], idx.dst[take], edges)


def extend_join(current: JoinTable, base: JoinTable) -> JoinTable:
    """Extend every group of `current` by every relation of the 1-hop `base`."""
    out: dict[Metapath, PathGroup] = {}
    index = base.hop_index()
    for m, group in sorted(current.groups.items()):
        for rel, idx in index.items():
            extended = _extend_group(group, idx)
            if extended is not None:
                out[m + (rel,)] = extended
    return JoinTable(out, base.num_entities)


@dataclass(frozen=True)
class AssociationStats:
    """Per-hop coverage of one metapath."""

    metapath: Metapath
    hop: int
    edges_total: int          # edges of this hop's relation in the mined graph
    edges_covered: int        # of those, distinct edges used at this hop
    corrected_covered: float  # estimate at full-graph scale (== covered when p=1)
    association: float
    fallback: bool = False


@dataclass(frozen=True)
class MetapathInfo:
    metapath: Metapath
    z: float
    per_hop: tuple[AssociationStats, ...]
    instance_count: int


def correction_residual(
    x: float, p: float, length: int, type_count: int,
    instances_sampled: int, zero_observed: int,
) -> float:
    """Residual of the sampled-coverage balance at candidate coverage x.

    x plays the number of hop edges that would be covered on the full graph.
    Each of those survives sampling of its own hop with probability p but
    shows zero instances when all its continuations are lost, which happens
    with probability (1 - p^(length-1)) per continuation; the instance mass
    spreads as instances_sampled / (p^length * x) continuations per edge.
    The residual compares the implied number of observed zero-instance edges
    of this type against the actual count.
    """
    expected_zero = float(type_count) - x
    if x > 0.0:
        a = 1.0 - p ** (length - 1)
        if a <= 0.0:
            a = 0.0
        c = instances_sampled / (p ** length * x)
        expected_zero += x * a ** c  # 0^0 == 1 covers the p=1, no-instances case
    return p * expected_zero - zero_observed


def solve_correction(
    p: float, length: int, type_count: int,
    instances_sampled: int, zero_observed: int, covered_observed: int,
) -> tuple[float, bool]:
    """Estimate full-graph covered-edge count from sampled observations.

    Returns (estimate, fallback). With p=1 the balance is exact and the
    estimate is type_count - zero_observed. Otherwise the residual is
    bracketed on [max(covered_observed, 1), type_count] and solved with
    Brent's method; when no sign change exists the naive rescale
    covered_observed / p (clipped to type_count) is returned with
    fallback=True.
    """
    if p == 1.0:
        return float(type_count - zero_observed), False
    if covered_observed >= type_count:
        return float(type_count), False
    lo = float(max(covered_observed, 1))
    hi = float(type_count)
    if lo >= hi:
        return hi, False

    def f(x):
        return correction_residual(x, p, length, type_count, instances_sampled, zero_observed)

    flo, fhi = f(lo), f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise NumericError(
            f"correction residual is not finite on [{lo}, {hi}] "
            f"(p={p}, length={length}, type_count={type_count})"
        )
    if flo == 0.0:
        return lo, False
    if fhi == 0.0:
        return hi, False
    if (flo > 0) == (fhi > 0):
        return min(covered_observed / p, hi), True
    return brent(f, lo, hi, fa=flo, fb=fhi, ftol=1e-9, max_iter=200), False


def _group_association(
    graph: KnowledgeGraph, metapath: Metapath, group: PathGroup, hop: int,
    p: float, full_type_counts: np.ndarray,
) -> AssociationStats:
    rel = metapath[hop]
    sampled_total = int(graph.relation_counts[rel])
    covered = int(np.unique(group.edges[:, hop]).size)
    full_total = int(full_type_counts[rel])
    if full_total == 0:
        raise ValueError(f"relation {rel} has no edges; association is undefined")
    if p == 1.0:
        return AssociationStats(metapath, hop, sampled_total, covered,
                                float(covered), covered / full_total)
    estimate, fallback = solve_correction(
        p, len(metapath), full_total, group.size, sampled_total - covered, covered,
    )
    return AssociationStats(metapath, hop, sampled_total, covered,
                            estimate, min(estimate / full_total, 1.0), fallback)


def compute_association(
    graph: KnowledgeGraph, metapath: Metapath, join_table: JoinTable, hop: int,
    p: float = 1.0, full_type_counts: np.ndarray | None = None,
) -> AssociationStats:
    """Coverage ratio of hop `hop` of `metapath` in `join_table` over `graph`.

    `graph` must be the graph the table was joined on (the sampled graph when
    p < 1); `full_type_counts` are the per-relation edge counts of the
    unsampled graph and default to the counts of `graph` (valid only at p=1).
    """
    if not 0 <= hop < len(metapath):
        raise ValueError(f"hop {hop} out of range for metapath of length {len(metapath)}")
    group = join_table.groups.get(metapath)
    if group is None:
        raise ValueError(f"metapath {metapath} has no instances in the join table")
    if full_type_counts is None:
        if p != 1.0:
            raise ValueError("full_type_counts is required when p < 1")
        full_type_counts = graph.relation_counts
    return _group_association(graph, metapath, group, hop, p, full_type_counts)


def mine_informative_metapaths(
    graph: KnowledgeGraph,
    l_max: int = 3,
    threshold: float = 0.2,
    p: float = 1.0,
    seed: int = 0,
    max_table_rows: int = DEFAULT_MAX_TABLE_ROWS,
) -> dict[Metapath, MetapathInfo]:
    """All metapaths of length 2..l_max whose score z_m reaches `threshold`.

    Edge sampling (p < 1) mines on a Bernoulli subgraph and corrects the
    coverage counts back to full-graph scale. Groups are dropped as soon as
    their partial score falls below the threshold; the working table may
    hold at most `max_table_rows` instances per level.
    """
    if l_max < 2:
        raise ValueError(f"l_max must be at least 2, got {l_max}")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sampling probability must be in (0, 1], got {p}")

    mined = sample_edges(graph, p, seed)
    full_counts = graph.relation_counts
    base = JoinTable.from_graph(mined)
    index = base.hop_index()
    current = dict(sorted(base.groups.items()))
    result: dict[Metapath, MetapathInfo] = {}

    for length in range(2, l_max + 1):
        nxt: dict[Metapath, PathGroup] = {}
        level_rows = 0
        for m, group in current.items():
            for rel, idx in index.items():
                extended = _extend_group(group, idx)
                if extended is None:
                    continue
                candidate = m + (rel,)
                z = 1.0
                per_hop = []
                keep = True
                for hop in range(length):
                    stats = _group_association(mined, candidate, extended, hop, p, full_counts)
                    z *= stats.association
                    per_hop.append(stats)
                    if z < threshold:
                        keep = False
                        break
                if not keep:
                    continue
                level_rows += extended.size
                if level_rows > max_table_rows:
                    raise MiningLimitError(
                        f"metapath table exceeds {max_table_rows} rows at length {length}"
                    )
                result[candidate] = MetapathInfo(candidate, z, tuple(per_hop), extended.size)
                nxt[candidate] = extended
        current = nxt
        if not current:
            break
    return result


def metapath_name(metapath: Metapath, relation_dict=None) -> str:
    if relation_dict is None:
        return "|".join(str(r) for r in metapath)
    return "|".join(relation_dict.name_of(r) for r in metapath)


def write_metapath_report(path, infos: dict[Metapath, MetapathInfo], relation_dict=None) -> None:
    """TSV rows `metapath<TAB>z<TAB>instance_count`, z descending then by name."""
    rows = [
        (metapath_name(info.metapath, relation_dict), info.z, info.instance_count)
        for info in infos.values()
    ]
    rows.sort(key=lambda row: (-row[1], row[0]))
    with open(path, "w", encoding="utf-8") as fh:
        for name, z, count in rows:
            fh.write(f"{name}\t{z!r}\t{count}\n")


def read_metapath_report(path, relation_dict=None) -> dict[Metapath, float]:
    """Parse a report written by `write_metapath_report` into {metapath: z}."""
    out: dict[Metapath, float] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            names = parts[0].split("|")
            try:
                if relation_dict is None:
                    metapath = tuple(int(n) for n in names)
                else:
                    metapath = tuple(relation_dict.id_of(n) for n in names)
                z = float(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            out[metapath] = z
    return out
