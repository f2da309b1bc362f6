"""Perfect matchings, stability, and symmetric-difference cycle structure.

The symmetric difference of two perfect matchings on the same agents is a
disjoint union of even cycles of length at least 4 that alternate between
the two matchings.  Matchings at symmetric-difference distance one cycle
from a reference are the building blocks of the census experiments; the
``combine`` operation merges vertex-disjoint differences into one matching.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Iterator, Sequence

import numpy as np

from .instances import PreferenceProfile


class DisjointnessError(ValueError):
    """Symmetric differences overlap where vertex-disjointness is required."""


@dataclass(frozen=True)
class Matching:
    """A perfect matching stored as a fixed-point-free involution."""

    partner: tuple[int, ...]

    def __post_init__(self):
        n = len(self.partner)
        if n % 2 != 0:
            raise ValueError("a perfect matching needs an even number of agents")
        for i, j in enumerate(self.partner):
            if not 0 <= j < n or j == i or self.partner[j] != i:
                raise ValueError("partner array is not a fixed-point-free involution")

    @property
    def n(self) -> int:
        return len(self.partner)

    def __getitem__(self, i: int) -> int:
        return self.partner[i]

    def pairs(self) -> list[tuple[int, int]]:
        """Unordered pairs as (min, max), sorted by the smaller endpoint."""
        return [(i, j) for i, j in enumerate(self.partner) if i < j]

    @staticmethod
    def from_pairs(n: int, pairs: Sequence[tuple[int, int]]) -> "Matching":
        partner = [-1] * n
        for i, j in pairs:
            partner[i] = j
            partner[j] = i
        if any(p < 0 for p in partner):
            raise ValueError("pairs do not cover all agents")
        return Matching(tuple(partner))

    @staticmethod
    def consecutive(n: int) -> "Matching":
        """The reference matching pairing (0,1), (2,3), ..."""
        return Matching.from_pairs(n, [(2 * k, 2 * k + 1) for k in range(n // 2)])

    def to_text(self) -> str:
        """Text form ``1-2 3-4 ...`` (1-indexed, sorted by smaller endpoint)."""
        return " ".join(f"{i + 1}-{j + 1}" for i, j in self.pairs())

    @staticmethod
    def from_text(text: str, n: int | None = None) -> "Matching":
        pairs = []
        for tok in text.split():
            a, _, b = tok.partition("-")
            pairs.append((int(a) - 1, int(b) - 1))
        if n is None:
            n = 2 * len(pairs)
        return Matching.from_pairs(n, pairs)


def _canonical_cycle(cycle: list[int]) -> tuple[int, ...]:
    """Rotate to minimum vertex first, then pick the lexicographically
    smaller of the two traversal directions."""
    k = cycle.index(min(cycle))
    fwd = cycle[k:] + cycle[:k]
    rev = [fwd[0]] + fwd[1:][::-1]
    return tuple(fwd if fwd <= rev else rev)


@dataclass(frozen=True)
class CycleDecomposition:
    """Canonical even cycles of a symmetric difference of two matchings."""

    cycles: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for cyc in self.cycles:
            if len(cyc) < 4 or len(cyc) % 2 != 0:
                raise ValueError("difference cycles have even length >= 4")
            if seen & set(cyc):
                raise ValueError("difference cycles must be vertex-disjoint")
            seen.update(cyc)

    @property
    def mu(self) -> int:
        """Number of cycles."""
        return len(self.cycles)

    @property
    def vertex_set(self) -> frozenset[int]:
        return frozenset(v for cyc in self.cycles for v in cyc)

    @property
    def total_length(self) -> int:
        """Total edge count of the symmetric difference."""
        return sum(len(cyc) for cyc in self.cycles)

    @property
    def half_lengths(self) -> tuple[int, ...]:
        return tuple(len(cyc) // 2 for cyc in self.cycles)

    def is_empty(self) -> bool:
        return not self.cycles


def symmetric_difference(m1: Matching, m2: Matching) -> CycleDecomposition:
    """Decompose the edges in exactly one of the matchings into cycles."""
    if m1.n != m2.n:
        raise ValueError("matchings must cover the same agents")
    seen = [False] * m1.n
    cycles = []
    for start in range(m1.n):
        if seen[start] or m1[start] == m2[start]:
            continue
        cyc = []
        v, use_first = start, True
        while not seen[v]:
            seen[v] = True
            cyc.append(v)
            v = m1[v] if use_first else m2[v]
            use_first = not use_first
        cycles.append(_canonical_cycle(cyc))
    cycles.sort(key=lambda c: c[0])
    return CycleDecomposition(tuple(cycles))


@dataclass(frozen=True)
class OrientedDifference:
    """A cycle decomposition with each difference vertex classified by
    whether its new partner improves on the old one.

    ``a_side`` holds vertices whose utility for the new partner is lower
    (better); ``b_side`` the rest.  A realizable orientation alternates
    sides around every cycle, so the two sides have equal size; ``valid``
    is False when alternation fails (a zero-probability configuration when
    both matchings are stable).
    """

    decomposition: CycleDecomposition
    a_side: frozenset[int]
    b_side: frozenset[int]
    valid: bool

    def side(self, v: int) -> str:
        if v in self.a_side:
            return "A"
        if v in self.b_side:
            return "B"
        raise KeyError(f"vertex {v} is not in the difference set")


def orient(
    m: Matching, m1: Matching, x: np.ndarray, y: np.ndarray
) -> OrientedDifference:
    """Classify difference vertices of ``m1`` vs ``m`` by comparing the
    matched-partner utility vectors ``x`` (under ``m``) and ``y`` (under
    ``m1``)."""
    dec = symmetric_difference(m, m1)
    a_side, b_side = set(), set()
    for v in dec.vertex_set:
        if y[v] == x[v]:
            raise ValueError(f"difference vertex {v} has equal old/new utility")
        (a_side if y[v] < x[v] else b_side).add(v)
    valid = True
    for cyc in dec.cycles:
        for k, v in enumerate(cyc):
            w = cyc[(k + 1) % len(cyc)]
            if (v in a_side) == (w in a_side):
                valid = False
    return OrientedDifference(dec, frozenset(a_side), frozenset(b_side), valid)


def blocking_pairs(p: PreferenceProfile, m: Matching) -> list[tuple[int, int]]:
    """All unordered pairs (i, j) not matched together where each strictly
    prefers the other to their current partner."""
    if p.n != m.n:
        raise ValueError("profile and matching sizes differ")
    pos = p.rank_matrix()
    own = np.array([pos[i, m[i]] for i in range(m.n)])
    out = []
    for i in range(m.n):
        for j in range(i + 1, m.n):
            if m[i] != j and pos[i, j] < own[i] and pos[j, i] < own[j]:
                out.append((i, j))
    return out


def is_stable(p: PreferenceProfile, m: Matching) -> bool:
    """True when no blocking pair exists."""
    if p.n != m.n:
        raise ValueError("profile and matching sizes differ")
    pos = p.rank_matrix()
    own = pos[np.arange(m.n), np.array(m.partner)]
    better = pos < own[:, None]
    blocked = better & better.T
    blocked[np.arange(m.n), np.array(m.partner)] = False
    return not blocked.any()


def single_cycle_neighbors(m: Matching, nu: int) -> Iterator[Matching]:
    """Yield every matching whose symmetric difference with ``m`` is one
    cycle of length ``2 * nu``, each exactly once.

    Streaming iterator: the number of neighbors grows like n^nu / (2 nu),
    so census experiments consume it lazily.
    """
    n = m.n
    if not 2 <= nu <= n // 2:
        raise ValueError(f"cycle half-length must be in [2, {n // 2}], got {nu}")
    edges = m.pairs()
    for combo in combinations(range(len(edges)), nu):
        first, rest = combo[0], combo[1:]
        for perm in permutations(rest):
            order = (first,) + perm
            # Orientation of the first edge is pinned; flipping it reproduces
            # the same cycle traversed backwards.
            for bits in product((0, 1), repeat=nu - 1):
                orient_bits = (0,) + bits
                ends = []
                for e_idx, bit in zip(order, orient_bits):
                    a, b = edges[e_idx]
                    ends.append((a, b) if bit == 0 else (b, a))
                partner = list(m.partner)
                for k in range(nu):
                    _, exit_v = ends[k]
                    enter_v, _ = ends[(k + 1) % nu]
                    partner[exit_v] = enter_v
                    partner[enter_v] = exit_v
                yield Matching(tuple(partner))


def combine(m: Matching, m1: Matching, m2: Matching) -> Matching:
    """Merge two vertex-disjoint differences: the result agrees with ``m1``
    on its difference vertices, with ``m2`` on its own, and with ``m``
    elsewhere."""
    if not (m.n == m1.n == m2.n):
        raise ValueError("matchings must cover the same agents")
    v1 = {i for i in range(m.n) if m1[i] != m[i]}
    v2 = {i for i in range(m.n) if m2[i] != m[i]}
    if v1 & v2:
        raise DisjointnessError("symmetric differences share vertices")
    partner = list(m.partner)
    for i in v1:
        partner[i] = m1[i]
    for i in v2:
        partner[i] = m2[i]
    return Matching(tuple(partner))


def iter_perfect_matchings(n: int) -> Iterator[Matching]:
    """Enumerate all (n-1)!! perfect matchings on n agents."""
    partner = [-1] * n

    def rec(i: int) -> Iterator[Matching]:
        while i < n and partner[i] >= 0:
            i += 1
        if i >= n:
            yield Matching(tuple(partner))
            return
        for j in range(i + 1, n):
            if partner[j] < 0:
                partner[i], partner[j] = j, i
                yield from rec(i + 1)
                partner[i] = partner[j] = -1

    yield from rec(0)
