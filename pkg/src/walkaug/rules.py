"""Metapath-to-relation rules scored by pair confidence.

A metapath m implies a relation q with confidence

    conf(m -> q) = |{(h, t) : m connects h to t and (h, q, t) is an edge}|
                   / |{(h, t) : m connects h to t}|

where both sides count distinct entity pairs. A rule map keeps, per
metapath, every relation whose confidence reaches the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .graph import KnowledgeGraph
from .mining import JoinTable, Metapath, metapath_name


@dataclass
class RuleMap:
    """Relations implied by one metapath, with their confidences."""

    metapath: Metapath
    entries: dict[int, float] = field(default_factory=dict)
    threshold: float = 0.5

    def __bool__(self) -> bool:
        return bool(self.entries)

    def sorted_entries(self) -> list[tuple[int, float]]:
        return sorted(self.entries.items())


def _pair_frontier(graph: KnowledgeGraph, metapath: Metapath) -> tuple[np.ndarray, np.ndarray]:
    """Distinct (src, dst) pairs connected by `metapath`, deduped per hop."""
    index = JoinTable.from_graph(graph).hop_index()
    n = np.int64(graph.num_entities)
    empty = (np.empty(0, np.int64), np.empty(0, np.int64))

    idx = index.get(metapath[0])
    if idx is None:
        return empty
    mask = graph.relations == metapath[0]
    src, dst = graph.heads[mask], graph.tails[mask]
    keys = np.unique(src * n + dst)
    src, dst = keys // n, keys % n

    for rel in metapath[1:]:
        idx = index.get(rel)
        if idx is None:
            return empty
        starts = idx.offsets[dst]
        counts = idx.offsets[dst + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return empty
        rows = np.repeat(np.arange(src.size, dtype=np.int64), counts)
        first = np.zeros(src.size, dtype=np.int64)
        np.cumsum(counts[:-1], out=first[1:])
        take = starts[rows] + (np.arange(total, dtype=np.int64) - first[rows])
        keys = np.unique(src[rows] * n + idx.dst[take])
        src, dst = keys // n, keys % n
    return src, dst


def metapath_pairs(graph: KnowledgeGraph, metapath: Metapath) -> np.ndarray:
    """Sorted unique keys head * num_entities + tail of pairs `metapath` connects."""
    if not metapath:
        raise ValueError("metapath must contain at least one relation")
    src, dst = _pair_frontier(graph, metapath)
    return src * np.int64(graph.num_entities) + dst


def compute_rule_confidence(graph: KnowledgeGraph, metapath: Metapath, relation: int) -> float | None:
    """conf(metapath -> relation), or None when the metapath connects no pairs."""
    keys = metapath_pairs(graph, metapath)
    if keys.size == 0:
        return None
    mask = graph.relations == relation
    rel_keys = np.unique(graph.heads[mask] * np.int64(graph.num_entities) + graph.tails[mask])
    matched = np.intersect1d(keys, rel_keys, assume_unique=True)
    return matched.size / keys.size


def build_rulemaps(
    graph: KnowledgeGraph,
    metapaths,
    conf_threshold: float = 0.5,
) -> dict[Metapath, RuleMap]:
    """One RuleMap per metapath, keeping relations with conf >= conf_threshold.

    `metapaths` is any iterable of metapaths (a mined {metapath: info} dict
    works as-is). Metapaths that connect no pairs get an empty map.
    """
    if not 0.0 < conf_threshold <= 1.0:
        raise ValueError(f"confidence threshold must be in (0, 1], got {conf_threshold}")
    n = np.int64(graph.num_entities)
    graph_keys = graph.heads * n + graph.tails
    out: dict[Metapath, RuleMap] = {}
    for metapath in sorted(metapaths):
        keys = metapath_pairs(graph, metapath)
        entries: dict[int, float] = {}
        if keys.size:
            hit = np.isin(graph_keys, keys)
            if hit.any():
                # one key per distinct (relation, head, tail)
                combo = np.unique(graph.relations[hit] * (n * n) + graph_keys[hit])
                rels, counts = np.unique(combo // (n * n), return_counts=True)
                for rel, count in zip(rels, counts):
                    conf = count / keys.size
                    if conf >= conf_threshold:
                        entries[int(rel)] = float(conf)
        out[metapath] = RuleMap(metapath, entries, conf_threshold)
    return out


def write_rules_report(path, rulemaps: dict[Metapath, RuleMap], relation_dict=None) -> None:
    """TSV rows `metapath<TAB>relation<TAB>confidence`, sorted for stable diffs."""

    def rel_name(rel):
        return str(rel) if relation_dict is None else relation_dict.name_of(rel)

    rows = []
    for metapath, rule in rulemaps.items():
        for rel, conf in rule.entries.items():
            rows.append((metapath_name(metapath, relation_dict), -conf, rel_name(rel), conf))
    rows.sort()
    with open(path, "w", encoding="utf-8") as fh:
        for name, _, rel, conf in rows:
            fh.write(f"{name}\t{rel}\t{conf!r}\n")


def read_rules_report(path, relation_dict=None, conf_threshold: float = 0.5) -> dict[Metapath, RuleMap]:
    """Parse a report written by `write_rules_report`."""
    out: dict[Metapath, RuleMap] = {}
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
                    metapath = tuple(int(x) for x in names)
                    rel = int(parts[1])
                else:
                    metapath = tuple(relation_dict.id_of(x) for x in names)
                    rel = relation_dict.id_of(parts[1])
                conf = float(parts[2])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if conf < conf_threshold:
                continue
            rule = out.setdefault(metapath, RuleMap(metapath, {}, conf_threshold))
            rule.entries[rel] = conf
    return out
