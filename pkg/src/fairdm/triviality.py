"""Ambiguity graphs, class partitions and triviality certificates.

Two classes are *ambiguous* when some column (an observable of the context, or
an outcome of a classifier) carries positive mass for both. A context is
``eps``-trivial when its classes split into blocks that the observables tell
apart perfectly and, inside every block, the groups' conditional base rates are
within multiplicative distance ``eps`` of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import networkx as nx
import numpy as np

from fairdm.context import Classifier, Context, JointOutcomeModel, mult_distance_array, safe_divide
from fairdm.errors import GuardError
from fairdm.metrics import Witness

MAX_COMPONENTS = 12


@dataclass(frozen=True)
class AmbiguityGraph:
    vertices: tuple
    edges: frozenset  # of (i, j) label pairs, i before j in vertex order
    flavor: str  # "observable" or "outcome"

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    def components(self) -> list[tuple]:
        """Connected components, members and components both in vertex order."""
        order = {v: i for i, v in enumerate(self.vertices)}
        comps = [tuple(sorted(c, key=order.__getitem__)) for c in nx.connected_components(self.to_networkx())]
        return sorted(comps, key=lambda c: order[c[0]])


def ambiguity_graph(source: Context | JointOutcomeModel) -> AmbiguityGraph:
    if isinstance(source, Context):
        flavor = "observable"
    elif isinstance(source, JointOutcomeModel):
        flavor = "outcome"
    else:
        raise TypeError(f"expected a Context or JointOutcomeModel, got {type(source).__name__}")
    present = source.mass.sum(axis=0) > 0  # [class, column]
    shared = (present.astype(int) @ present.T.astype(int)) > 0
    classes = source.classes
    edges = frozenset((classes[i], classes[j]) for i, j in combinations(range(len(classes)), 2) if shared[i, j])
    return AmbiguityGraph(classes, edges, flavor)


def ambiguity_distance(graph: AmbiguityGraph, i, j) -> float:
    """Length of the shortest chain of pairwise-ambiguous classes from ``i`` to ``j`` (``inf`` if none)."""
    for v in (i, j):
        if v not in graph.vertices:
            raise KeyError(f"unknown class {v!r}")
    try:
        return nx.shortest_path_length(graph.to_networkx(), i, j)
    except nx.NetworkXNoPath:
        return math.inf


def subgroup_perfect_prediction(model: JointOutcomeModel) -> frozenset | None:
    """A proper class subset whose outcomes never overlap the rest's, or ``None`` if there is none."""
    if len(model.classes) < 2:
        raise ValueError("subgroup perfect prediction needs at least two classes")
    comps = ambiguity_graph(model).components()
    return frozenset(comps[0]) if len(comps) > 1 else None


@dataclass(frozen=True)
class Partition:
    blocks: tuple  # tuple of tuples of class labels

    def __post_init__(self):
        blocks = tuple(tuple(b) for b in self.blocks)
        if any(not b for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = [c for b in blocks for c in b]
        if len(flat) != len(set(flat)):
            raise ValueError("partition blocks must be disjoint")
        object.__setattr__(self, "blocks", blocks)

    def check_covers(self, classes: Sequence) -> None:
        flat = {c for b in self.blocks for c in b}
        if flat != set(classes):
            raise ValueError(f"partition covers {sorted(map(str, flat))}, context has {sorted(map(str, classes))}")

    def block_of(self) -> dict:
        return {c: i for i, b in enumerate(self.blocks) for c in b}

    def to_list(self) -> list[list]:
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class TrivialityCertificate:
    partition: Partition
    epsilon: float
    per_block_witness: tuple  # Witness (group pair, class) or None per block

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "partition": self.partition.to_list(),
            "witnesses": [
                None if w is None else {"groups": [w.group_x, w.group_y], "class": w.first}
                for w in self.per_block_witness
            ],
        }


def _block_indices(ctx: Context, partition: Partition) -> list[list[int]]:
    partition.check_covers(ctx.classes)
    return [[ctx.class_index(c) for c in block] for block in partition.blocks]


def partition_distinguishability_ok(ctx: Context, partition: Partition) -> bool:
    """True iff no observable with positive mass is shared by classes from two different blocks."""
    present = ctx.mass.sum(axis=0) > 0  # [class, observable]
    touched = np.array([present[idx].any(axis=0) for idx in _block_indices(ctx, partition)])
    return bool(np.all(touched.sum(axis=0) <= 1))


def partition_conditional_base_rate_error(ctx: Context, partition: Partition) -> tuple[float, tuple]:
    """Worst multiplicative gap, over blocks, group pairs and classes, of base rates conditioned on the block."""
    gc = ctx.group_class
    worst, witnesses = 0.0, []
    for idx in _block_indices(ctx, partition):
        cond = safe_divide(gc[:, idx], gc[:, idx].sum(axis=1, keepdims=True))
        block_best, block_witness = 0.0, None
        for x, y in combinations(range(len(ctx.groups)), 2):
            dist = mult_distance_array(cond[x], cond[y])
            j = int(np.argmax(dist))
            if block_witness is None or dist[j] > block_best:
                block_best = float(dist[j])
                block_witness = Witness(ctx.groups[x], ctx.groups[y], ctx.classes[idx[j]])
        witnesses.append(block_witness)
        worst = max(worst, block_best)
    return worst, tuple(witnesses)


def set_partitions(n: int) -> Iterator[list[int]]:
    """All set partitions of ``range(n)`` as restricted growth strings, in lexicographic order."""
    if n == 0:
        yield []
        return
    rgs = [0] * n

    def extend(pos: int, top: int):
        if pos == n:
            yield list(rgs)
            return
        for v in range(top + 2):
            rgs[pos] = v
            yield from extend(pos + 1, max(top, v))

    rgs[0] = 0
    yield from extend(1, 0)


def triviality_error(ctx: Context) -> TrivialityCertificate:
    """Smallest ``eps`` for which the context is ``eps``-trivial, with a partition achieving it.

    Candidate partitions are all coarsenings of the connected components of the
    observable ambiguity graph (exactly the partitions whose blocks the
    observables separate). Ties prefer fewer blocks, then the lexicographically
    smallest block layout.
    """
    comps = ambiguity_graph(ctx).components()
    if len(comps) > MAX_COMPONENTS:
        raise GuardError(f"{len(comps)} ambiguity components exceed the limit of {MAX_COMPONENTS}")
    order = {c: i for i, c in enumerate(ctx.classes)}
    best_key, best = None, None
    for rgs in set_partitions(len(comps)):
        blocks = [[] for _ in range(max(rgs) + 1)]
        for comp, b in zip(comps, rgs):
            blocks[b].extend(comp)
        blocks = [tuple(sorted(b, key=order.__getitem__)) for b in blocks]
        blocks.sort(key=lambda b: order[b[0]])
        partition = Partition(tuple(blocks))
        eps, witnesses = partition_conditional_base_rate_error(ctx, partition)
        key = (eps, len(blocks), tuple(tuple(order[c] for c in b) for b in blocks))
        if best_key is None or key < best_key:
            best_key, best = key, TrivialityCertificate(partition, eps, witnesses)
    return best


def synthesize_trivial_classifier(ctx: Context, partition: Partition) -> Classifier:
    """Deterministic classifier that outputs the index of the block an observable's classes belong to.

    Observables with no mass are sent to block 0.
    """
    if not partition_distinguishability_ok(ctx, partition):
        raise ValueError("partition is not separated by the observables")
    block_of = partition.block_of()
    present = ctx.mass.sum(axis=0) > 0
    outcomes = tuple(str(i) for i in range(len(partition.blocks)))
    channel = np.zeros((len(ctx.observables), len(outcomes)))
    for v in range(len(ctx.observables)):
        classes = np.flatnonzero(present[:, v])
        block = block_of[ctx.classes[classes[0]]] if classes.size else 0
        channel[v, block] = 1.0
    return Classifier(ctx.observables, outcomes, channel)

