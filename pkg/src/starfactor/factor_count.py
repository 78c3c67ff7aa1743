"""Counting 3-star factors of multigraphs at the pairing level.

Parallel edges are distinguishable, so a star edge of multiplicity m
contributes a factor m to every factor that uses it. Loops are never star
edges.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from itertools import combinations

from starfactor.errors import SizeExplosionError
from starfactor.pairing import MultiGraph

logger = logging.getLogger(__name__)

ORACLE_MAX_VERTICES = 12
STAR_SIZE = 4


def _lowest_unset(mask: int) -> int:
    return (~mask & (mask + 1)).bit_length() - 1


def _free(neighbors, covered: int, exclude: int = -1) -> list:
    return [(w, m) for w, m in neighbors if w != exclude and not covered >> w & 1]


def count_3star_factors(graph: MultiGraph) -> int:
    """Number of 3-star factors of ``graph``, weighted by edge multiplicities"""
    n = graph.n
    if n == 0 or n % STAR_SIZE:
        return 0
    neighbors = graph.neighbors
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def extend(covered: int) -> int:
        if covered == full:
            return 1
        v = _lowest_unset(covered)
        free = _free(neighbors[v], covered)
        total = 0
        # v as the center
        for (a, ma), (b, mb), (c, mc) in combinations(free, 3):
            total += ma * mb * mc * extend(covered | 1 << v | 1 << a | 1 << b | 1 << c)
        # v as a leaf of center c
        for c, mvc in free:
            leaves = _free(neighbors[c], covered, exclude=v)
            for (a, ma), (b, mb) in combinations(leaves, 2):
                total += mvc * ma * mb * extend(covered | 1 << v | 1 << c | 1 << a | 1 << b)
        return total

    return extend(0)


def has_3star_factor(graph: MultiGraph) -> bool:
    n = graph.n
    if n == 0 or n % STAR_SIZE:
        return False
    neighbors = graph.neighbors
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def extend(covered: int) -> bool:
        if covered == full:
            return True
        v = _lowest_unset(covered)
        free = _free(neighbors[v], covered)
        for (a, _), (b, _), (c, _) in combinations(free, 3):
            if extend(covered | 1 << v | 1 << a | 1 << b | 1 << c):
                return True
        for c, _ in free:
            leaves = _free(neighbors[c], covered, exclude=v)
            for (a, _), (b, _) in combinations(leaves, 2):
                if extend(covered | 1 << v | 1 << c | 1 << a | 1 << b):
                    return True
        return False

    return extend(0)


def star_realizations(graph: MultiGraph, block) -> int:
    """Ways the 4 vertices of ``block`` carry a 3-star, summed over the choice of center"""
    total = 0
    for center in block:
        weight = 1
        for leaf in block:
            if leaf != center:
                weight *= graph.multiplicity(center, leaf)
        total += weight
    return total


def _four_partitions(vertices: tuple):
    if not vertices:
        yield ()
        return
    first, rest = vertices[0], vertices[1:]
    for trio in combinations(rest, 3):
        remaining = tuple(v for v in rest if v not in trio)
        for tail in _four_partitions(remaining):
            yield ((first,) + trio,) + tail


def oracle_count(graph: MultiGraph) -> int:
    """Brute-force factor count over all partitions of the vertices into blocks of 4"""
    if graph.n > ORACLE_MAX_VERTICES:
        raise SizeExplosionError(
            f"oracle_count supports at most {ORACLE_MAX_VERTICES} vertices, got {graph.n}",
            size=graph.n, cap=ORACLE_MAX_VERTICES)
    if graph.n == 0 or graph.n % STAR_SIZE:
        return 0
    total = 0
    for partition in _four_partitions(tuple(range(graph.n))):
        product = 1
        for block in partition:
            product *= star_realizations(graph, block)
            if not product:
                break
        total += product
    return total
