"""Pairing (configuration) model for random d-regular pseudographs.

Points are labelled globally: point j of cell i has index i*d + j. A pairing
is a perfect matching of the d*n points; projecting each cell to a vertex
turns it into a d-regular multigraph with loops.

Random pairings use numpy's PCG64 generator. A run with master seed S draws
sample i from ``PCG64(derive_seed(S, i))``, where ``derive_seed`` hashes
``(S, i)`` through ``numpy.random.SeedSequence``. Results are therefore
identical whatever order or worker the samples are produced in.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

import networkx as nx
import numpy as np
from tqdm import tqdm

from starfactor.errors import PairingError, SizeExplosionError

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 16
IRREGULAR = -1


def matchings_count(m: int) -> int:
    """Number of perfect matchings of 2m points, (2m)!/(m! 2^m)"""
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    return math.factorial(2 * m) // (math.factorial(m) * 2 ** m)


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed of sample ``index`` in a run with ``master_seed``"""
    sequence = np.random.SeedSequence([int(master_seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class PairingSpace:
    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise PairingError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if (self.n * self.d) % 2:
            raise PairingError(f"n * d must be even, got n={self.n}, d={self.d}")

    @property
    def point_count(self) -> int:
        return self.n * self.d

    @property
    def pair_count(self) -> int:
        return self.n * self.d // 2

    @property
    def pairing_count(self) -> int:
        return matchings_count(self.pair_count)

    def cell_of(self, point: int) -> int:
        return point // self.d

    def cell_points(self, cell: int) -> range:
        return range(cell * self.d, (cell + 1) * self.d)


@dataclass(frozen=True)
class Pairing:
    """Perfect matching stored as ascending pairs sorted by first point"""
    pairs: tuple

    def __post_init__(self):
        canonical = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        object.__setattr__(self, 'pairs', canonical)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def validate(self, space: PairingSpace):
        if len(self.pairs) != space.pair_count:
            raise PairingError(f"expected {space.pair_count} pairs, got {len(self.pairs)}")
        seen = [point for pair in self.pairs for point in pair]
        if sorted(seen) != list(range(space.point_count)):
            raise PairingError("pairing does not cover every point exactly once")
        return self

    def partners(self) -> np.ndarray:
        """partners()[x] is the point matched with x"""
        size = 2 * len(self.pairs)
        result = np.full(size, -1, dtype=np.int64)
        for a, b in self.pairs:
            result[a] = b
            result[b] = a
        return result

    def to_text(self) -> str:
        return ''.join(f"{a} {b}\n" for a, b in self.pairs)

    @classmethod
    def from_text(cls, text: str) -> Pairing:
        pairs = []
        for number, line in enumerate(text.splitlines(), start=1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            if len(fields) != 2:
                raise PairingError(f"line {number}: expected 'a b', got {line!r}")
            try:
                pairs.append((int(fields[0]), int(fields[1])))
            except ValueError:
                raise PairingError(f"line {number}: non-integer point in {line!r}")
        return cls(tuple(pairs))


@dataclass(frozen=True)
class MultiGraph:
    """Undirected multigraph on vertices 0..n-1.

    A hashable snapshot of an ``nx.MultiGraph``: ``edges`` holds
    ``(u, v, multiplicity)`` with ``u < v`` and ``loops`` holds ``(v, count)``;
    both are sorted and never contain zero entries. ``d`` is the common degree
    when the graph is regular, otherwise None. Degrees, edge counts, relabeling
    and the adjacency matrix come from the networkx graph in ``graph``.
    """
    n: int
    edges: tuple = ()
    loops: tuple = ()
    d: Optional[int] = None

    @classmethod
    def from_networkx(cls, graph: nx.MultiGraph, n: Optional[int] = None) -> MultiGraph:
        """Snapshot of ``graph``, whose nodes must lie in 0..n-1 (n defaults to its node count)"""
        n = graph.number_of_nodes() if n is None else n
        for v in graph.nodes:
            if not (isinstance(v, (int, np.integer)) and 0 <= v < n):
                raise PairingError(f"vertex {v!r} outside vertex range 0..{n - 1}")
        pairs = {(min(u, v), max(u, v)) for u, v in graph.edges() if u != v}
        edges = tuple(sorted((int(u), int(v), graph.number_of_edges(u, v)) for u, v in pairs))
        loops = tuple(sorted((int(v), graph.number_of_edges(v, v)) for v in nx.nodes_with_selfloops(graph)))
        degree = dict(graph.degree)
        degrees = {degree.get(v, 0) for v in range(n)}
        d = degrees.pop() if len(degrees) == 1 else None
        return cls(n=n, edges=edges, loops=loops, d=d)

    @classmethod
    def from_counts(cls, n, edge_counts, loop_counts=None) -> MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(n))
        for (u, v), mult in dict(edge_counts).items():
            if u == v:
                raise PairingError(f"edge ({u}, {v}) is a loop; pass it in loop_counts")
            if not (0 <= u < n and 0 <= v < n):
                raise PairingError(f"edge ({u}, {v}) outside vertex range 0..{n - 1}")
            if mult < 0:
                raise PairingError("multiplicities and loop counts must be nonnegative")
            graph.add_edges_from([(u, v)] * mult)
        for v, count in dict(loop_counts or {}).items():
            if not 0 <= v < n:
                raise PairingError(f"loop at {v} outside vertex range 0..{n - 1}")
            if count < 0:
                raise PairingError("multiplicities and loop counts must be nonnegative")
            graph.add_edges_from([(v, v)] * count)
        return cls.from_networkx(graph, n)

    @classmethod
    def from_edge_list(cls, n, edge_list) -> MultiGraph:
        """Build from (u, v) pairs; repeats add multiplicity and u == v adds a loop"""
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(n))
        for u, v in edge_list:
            if not (0 <= u < n and 0 <= v < n):
                raise PairingError(f"edge ({u}, {v}) outside vertex range 0..{n - 1}")
            graph.add_edge(u, v)
        return cls.from_networkx(graph, n)

    @cached_property
    def graph(self) -> nx.MultiGraph:
        """Frozen networkx view with one parallel edge per unit of multiplicity"""
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(self.n))
        for u, v, m in self.edges:
            graph.add_edges_from([(u, v)] * m)
        for v, c in self.loops:
            graph.add_edges_from([(v, v)] * c)
        return nx.freeze(graph)

    @cached_property
    def neighbors(self) -> tuple:
        """Per vertex, the sorted (neighbor, multiplicity) pairs; loops excluded"""
        graph = self.graph
        return tuple(
            tuple(sorted((w, graph.number_of_edges(v, w)) for w in graph.neighbors(v) if w != v))
            for v in range(self.n))

    def multiplicity(self, u: int, v: int) -> int:
        if u == v:
            return 0
        return self.graph.number_of_edges(u, v)

    def loop_count(self, v: int) -> int:
        return self.graph.number_of_edges(v, v)

    def degree(self, v: int) -> int:
        """Degree of v; a loop contributes 2"""
        return self.graph.degree(v)

    def degrees(self) -> list:
        return [self.graph.degree(v) for v in range(self.n)]

    @property
    def edge_total(self) -> int:
        """Number of pairs, loops included"""
        return self.graph.number_of_edges()

    def relabel(self, permutation) -> MultiGraph:
        """Graph with vertex v renamed permutation[v]"""
        if sorted(permutation) != list(range(self.n)):
            raise PairingError(f"relabeling must be a permutation of 0..{self.n - 1}")
        mapping = {v: int(permutation[v]) for v in range(self.n)}
        return MultiGraph.from_networkx(nx.relabel_nodes(self.graph, mapping, copy=True), self.n)

    def scaled(self, factor: int) -> MultiGraph:
        """Every edge multiplicity multiplied by ``factor``"""
        edge_counts = {(u, v): m * factor for u, v, m in self.edges}
        return MultiGraph.from_counts(self.n, edge_counts, dict(self.loops))

    def adjacency_matrix(self) -> np.ndarray:
        """Exact integer adjacency (object dtype, loops on the diagonal counted twice)"""
        matrix = nx.to_numpy_array(self.graph, nodelist=list(range(self.n)), dtype=np.int64,
                                   weight=None, nonedge=0).astype(object)
        for v, c in self.loops:
            matrix[v, v] = 2 * c
        return matrix

    def to_text(self) -> str:
        header = self.d if self.d is not None else IRREGULAR
        lines = [f"{self.n} {header}"]
        lines.extend(f"{u} {v} {m}" for u, v, m in self.edges)
        lines.extend(f"{v} {v} {c}" for v, c in self.loops)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> MultiGraph:
        rows = [line.split() for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith('#')]
        if not rows or len(rows[0]) != 2:
            raise PairingError("graph text must start with an 'n d' header")
        try:
            n, declared = int(rows[0][0]), int(rows[0][1])
            triples = [tuple(int(field) for field in row) for row in rows[1:]]
        except ValueError:
            raise PairingError("graph text contains a non-integer field")
        edge_counts = Counter()
        loop_counts = Counter()
        for triple in triples:
            if len(triple) != 3:
                raise PairingError(f"expected 'u v mult', got {' '.join(map(str, triple))!r}")
            u, v, m = triple
            if u == v:
                loop_counts[u] += m
            else:
                edge_counts[(min(u, v), max(u, v))] += m
        graph = cls.from_counts(n, edge_counts, loop_counts)
        if declared != IRREGULAR and graph.d != declared:
            raise PairingError(f"header declares degree {declared} but the graph is not {declared}-regular")
        return graph


def sample_uniform(space: PairingSpace, seed: int) -> Pairing:
    """Uniform random pairing: match the lowest unmatched point with a uniform other one"""
    rng = make_rng(seed)
    unmatched = list(range(space.point_count))
    # partner offsets for every step, drawn in one call: step i chooses among N-1-2i points
    offsets = rng.integers(0, np.arange(space.point_count - 1, 0, -2)) if space.point_count else []
    pairs = []
    for offset in offsets:
        first = unmatched.pop(0)
        partner = unmatched.pop(int(offset))
        pairs.append((first, partner))
    return Pairing(tuple(pairs))


def _check_cap(space: PairingSpace, cap: int):
    if space.point_count > cap:
        raise SizeExplosionError(
            f"exhaustive enumeration of d*n = {space.point_count} points exceeds the cap of {cap} "
            f"({space.pairing_count:,} pairings)",
            size=space.point_count, cap=cap)


def _matchings(points: tuple) -> Iterator[tuple]:
    if not points:
        yield ()
        return
    first = points[0]
    for i in range(1, len(points)):
        remaining = points[1:i] + points[i + 1:]
        for tail in _matchings(remaining):
            yield ((first, points[i]),) + tail


def enumerate_pair_tuples(space: PairingSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[tuple]:
    """Every pairing once, as an already canonical tuple of pairs"""
    _check_cap(space, cap)
    return _matchings(tuple(range(space.point_count)))


def enumerate_all(space: PairingSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[Pairing]:
    for pairs in enumerate_pair_tuples(space, cap):
        yield Pairing(pairs)


def project(space: PairingSpace, pairing: Pairing) -> MultiGraph:
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(space.n))
    graph.add_edges_from((a // space.d, b // space.d) for a, b in pairing.pairs)
    return MultiGraph.from_networkx(graph, space.n)


def projection_key(d: int, pairs: tuple) -> tuple:
    """Sorted cell pairs of a pairing; equal keys project to the same multigraph"""
    return tuple(sorted((a // d, b // d) for a, b in pairs))


def graph_from_key(n: int, key: tuple) -> MultiGraph:
    return MultiGraph.from_edge_list(n, key)


def projection_census(space: PairingSpace, cap: int = DEFAULT_ENUMERATION_CAP, progress: bool = False) -> Counter:
    """Map each projected multigraph to the number of pairings producing it"""
    keys = Counter()
    for pairs in tqdm(enumerate_pair_tuples(space, cap), total=space.pairing_count,
                      desc=f"Enumerating pairings n={space.n} d={space.d}", disable=not progress):
        keys[projection_key(space.d, pairs)] += 1
    logger.info(f"Enumerated {sum(keys.values()):,} pairings into {len(keys):,} distinct multigraphs")
    return Counter({graph_from_key(space.n, key): count for key, count in keys.items()})


def is_simple(graph: MultiGraph) -> bool:
    return nx.number_of_selfloops(graph.graph) == 0 and all(m <= 1 for _, _, m in graph.edges)
