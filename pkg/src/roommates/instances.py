"""Problem instances: utility arrays, ranked preference profiles, and file I/O.

An instance of the roommates problem on ``n`` agents (``n`` even) is a strict
ranking, per agent, of the other ``n - 1`` agents.  Random instances are
generated from an array of independent Unif[0,1] utilities ``u[i, j]``; agent
``i`` prefers ``a`` to ``b`` exactly when ``u[i, a] < u[i, b]`` (lower is
better, rank 0 is best).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence


class InvalidInstanceError(ValueError):
    """Agent count not an even integer >= 4, or malformed instance data."""


class TieError(ValueError):
    """Two entries in one agent's utility row coincide (null event for a
    continuous generator; signals a broken generator or a bad file)."""


class InstanceParseError(ValueError):
    """Instance text did not parse; message carries line and agent context."""


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Distinct ``stream_id`` values give statistically independent streams;
    the same ``(master_seed, stream_id)`` always reproduces the identical
    sequence, independent of thread or process layout.  Backed by the
    counter-based Philox generator keyed through ``SeedSequence`` hashing.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> Generator:
        seq = SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        return Generator(Philox(seq))

    def substream(self, stream_id: int) -> "RngStream":
        """Derive a child stream by combining ids (stable hash mixing)."""
        mixed = (self.stream_id * 0x9E3779B97F4A7C15 + stream_id) % (1 << 63)
        return RngStream(self.master_seed, mixed)


def _check_n(n: int) -> None:
    if n % 2 != 0 or n < 4:
        raise InvalidInstanceError(f"agent count must be an even integer >= 4, got {n}")


@dataclass(frozen=True)
class UtilityMatrix:
    """Off-diagonal array of utilities in [0,1]; diagonal entries are NaN.

    Row ``i`` restricted to a matching's partner column carries the vector of
    matched-partner utilities used throughout the estimators.
    """

    n: int
    u: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        if self.u.shape != (self.n, self.n):
            raise InvalidInstanceError(f"utility array must be {self.n}x{self.n}")
        off = ~np.eye(self.n, dtype=bool)
        vals = self.u[off]
        if np.any(vals < 0.0) or np.any(vals > 1.0) or np.any(np.isnan(vals)):
            raise InvalidInstanceError("off-diagonal utilities must lie in [0,1]")
        for i in range(self.n):
            row = np.delete(self.u[i], i)
            if np.unique(row).size != row.size:
                raise TieError(f"tied utilities in row of agent {i}")
        self.u.setflags(write=False)

    def row(self, i: int) -> np.ndarray:
        return self.u[i]


@dataclass(frozen=True)
class PreferenceProfile:
    """Strict ranked preferences: ``ranks[i]`` lists the other agents, most
    preferred first.  Agents are 0-indexed internally (1-indexed in files)."""

    n: int
    ranks: tuple[tuple[int, ...], ...]
    _position: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_n(self.n)
        if len(self.ranks) != self.n:
            raise InvalidInstanceError("one ranking row required per agent")
        pos = np.full((self.n, self.n), self.n, dtype=np.int32)
        for i, row in enumerate(self.ranks):
            if sorted(row) != [a for a in range(self.n) if a != i]:
                raise InvalidInstanceError(
                    f"agent {i}: ranking must be a permutation of the other agents"
                )
            for r, a in enumerate(row):
                pos[i, a] = r
        pos.setflags(write=False)
        object.__setattr__(self, "_position", pos)

    def rank_of(self, i: int, a: int) -> int:
        """Position of agent ``a`` in ``i``'s list (0 = most preferred)."""
        if a == i:
            raise ValueError("an agent does not rank itself")
        return int(self._position[i, a])

    def prefers(self, i: int, a: int, b: int) -> bool:
        return self.rank_of(i, a) < self.rank_of(i, b)

    def pref_matrix(self) -> np.ndarray:
        """(n, n-1) int array of rankings, row i = agents in i's order."""
        return np.asarray(self.ranks, dtype=np.int32)

    def rank_matrix(self) -> np.ndarray:
        """(n, n) int array, entry (i, a) = rank of a in i's list; n on the
        diagonal as a sentinel."""
        return self._position


def sample_utilities(n: int, rng: RngStream | Generator) -> UtilityMatrix:
    """Draw all n(n-1) off-diagonal utilities i.i.d. uniform on [0,1]."""
    _check_n(n)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = gen.random((n, n))
    np.fill_diagonal(u, np.nan)
    return UtilityMatrix(n, u)


def rank_from_utilities(um: UtilityMatrix) -> PreferenceProfile:
    """Convert utilities to the profile ranking each row ascending."""
    n = um.n
    rows = []
    for i in range(n):
        others = np.array([a for a in range(n) if a != i])
        vals = um.u[i, others]
        order = np.argsort(vals, kind="stable")
        svals = vals[order]
        if np.any(svals[1:] == svals[:-1]):
            raise TieError(f"tied utilities in row of agent {i}")
        rows.append(tuple(int(a) for a in others[order]))
    return PreferenceProfile(n, tuple(rows))


def sample_profile(n: int, rng: RngStream | Generator) -> PreferenceProfile:
    """Draw a uniform profile: each agent's list an independent uniform
    permutation.  Implemented as the rank of a fresh utility array, so the
    two generation routes are coupled through the same uniforms."""
    return rank_from_utilities(sample_utilities(n, rng))


def serialize_instance(profile: PreferenceProfile) -> str:
    """Instance text: line 1 is n; line i+1 is ``i: a b c ...`` (1-indexed,
    most preferred first).  Newline-terminated UTF-8."""
    lines = [str(profile.n)]
    for i, row in enumerate(profile.ranks):
        lines.append(f"{i + 1}: " + " ".join(str(a + 1) for a in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> PreferenceProfile:
    """Parse the instance format; raises InstanceParseError naming the line
    and agent on malformed input."""
    lines = text.splitlines()
    if not lines:
        raise InstanceParseError("line 1: empty input, expected agent count")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise InstanceParseError(f"line 1: expected agent count, got {lines[0]!r}") from None
    if n % 2 != 0 or n < 4:
        raise InstanceParseError(f"line 1: agent count must be even and >= 4, got {n}")
    if len(lines) < n + 1:
        raise InstanceParseError(f"expected {n} ranking lines, found {len(lines) - 1}")
    rows: list[tuple[int, ...]] = []
    for i in range(n):
        lineno = i + 2
        raw = lines[i + 1]
        head, sep, tail = raw.partition(":")
        if not sep:
            raise InstanceParseError(f"line {lineno}: missing ':' separator")
        try:
            agent = int(head.strip())
        except ValueError:
            raise InstanceParseError(f"line {lineno}: bad agent label {head!r}") from None
        if agent != i + 1:
            raise InstanceParseError(f"line {lineno}: expected agent {i + 1}, got {agent}")
        try:
            entries = [int(tok) for tok in tail.split()]
        except ValueError:
            raise InstanceParseError(f"line {lineno}: agent {agent}: non-integer entry") from None
        if len(entries) != len(set(entries)):
            raise InstanceParseError(f"line {lineno}: agent {agent}: duplicate entry")
        if sorted(entries) != [a for a in range(1, n + 1) if a != agent]:
            raise InstanceParseError(
                f"line {lineno}: agent {agent}: ranking is not a permutation "
                f"of the other {n - 1} agents"
            )
        rows.append(tuple(a - 1 for a in entries))
    return PreferenceProfile(n, tuple(rows))
