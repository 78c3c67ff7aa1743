"""Short-cycle counts X_1..X_kmax under pairing-model conventions.

X_1 counts loops, X_2 counts pairs of parallel pairs, and for k >= 3 each
simple k-cycle contributes the product of its edge multiplicities.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import networkx as nx

from starfactor.errors import GraphError
from starfactor.pairing import MultiGraph, is_simple


@dataclass(frozen=True)
class CycleCensus:
    kmax: int
    counts: tuple

    def __getitem__(self, k: int) -> int:
        if not 1 <= k <= self.kmax:
            raise IndexError(f"cycle length {k} outside 1..{self.kmax}")
        return self.counts[k - 1]

    def as_dict(self) -> dict:
        return {k: self.counts[k - 1] for k in range(1, self.kmax + 1)}


def census(graph: MultiGraph, kmax: int) -> CycleCensus:
    if kmax < 1:
        raise ValueError(f"kmax must be at least 1, got {kmax}")
    counts = [0] * (kmax + 1)
    counts[1] = nx.number_of_selfloops(graph.graph)
    if kmax >= 2:
        counts[2] = sum(comb(m, 2) for _, _, m in graph.edges)
    if kmax >= 3:
        neighbors = graph.neighbors

        def walk(root, path, on_path, weight):
            last = path[-1]
            length = len(path)
            for w, m in neighbors[last]:
                if w == root:
                    # each cycle once: smallest vertex as root, second vertex below the last
                    if length >= 3 and path[1] < last:
                        counts[length] += weight * m
                elif w > root and w not in on_path and length < kmax:
                    path.append(w)
                    on_path.add(w)
                    walk(root, path, on_path, weight * m)
                    on_path.discard(w)
                    path.pop()

        for root in range(graph.n):
            walk(root, [root], {root}, 1)
    return CycleCensus(kmax=kmax, counts=tuple(counts[1:]))


def census_trace_check(graph: MultiGraph) -> tuple:
    """(X_3, X_4) of a simple graph from exact traces of adjacency powers"""
    if not is_simple(graph):
        raise GraphError("the trace method requires a simple graph")
    adjacency = graph.adjacency_matrix()
    square = adjacency.dot(adjacency)
    cube = square.dot(adjacency)
    trace3 = sum(cube[i, i] for i in range(graph.n))
    trace4 = sum(square[i, j] * square[i, j] for i in range(graph.n) for j in range(graph.n))
    edges = graph.edge_total
    paths = sum(deg * (deg - 1) for deg in graph.degrees())
    # closed 4-walks that are not 4-cycles: back-and-forth on one edge or along a 2-path
    return int(trace3 // 6), int((trace4 - 2 * edges - 2 * paths) // 8)
