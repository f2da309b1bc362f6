"""Deciding and counting stable matchings.

``irving_solve`` is the polynomial-time two-phase decision procedure
(proposal rounds, then all-or-nothing rotation elimination).  It is
deliberately cross-checked against ``enumerate_stable``, an independent
pruned exhaustive search that never reduces preference tables, so the two
share no logic beyond the blocking-pair definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import PreferenceProfile
from .matchings import Matching, symmetric_difference


class ResourceCapError(RuntimeError):
    """Exhaustive enumeration requested beyond the configured agent cap."""


@dataclass(frozen=True)
class SolveResult:
    """Outcome of the decision procedure.

    ``matching`` is a stable matching when one exists (which particular one
    is unspecified), else None.  The counters record phase-1 proposal events
    and phase-2 rotation eliminations.
    """

    matching: Matching | None
    phase1_proposals: int
    eliminated_rotations: int

    @property
    def found(self) -> bool:
        return self.matching is not None


@dataclass(frozen=True)
class CensusResult:
    """Exhaustive stable-matching count, optionally with the matchings and
    a histogram of their distances to a reference matching keyed by
    (cycle count, total symmetric-difference edge count)."""

    X: int
    stable_list: tuple[Matching, ...] | None = None
    per_distance: dict[tuple[int, int], int] | None = None

    def single_cycle_marginal(self, nu: int) -> int:
        """Count of stable matchings one cycle of length 2*nu from the
        reference (requires per_distance)."""
        if self.per_distance is None:
            raise ValueError("census was run without a reference matching")
        return self.per_distance.get((1, 2 * nu), 0)


def irving_decide(pref: np.ndarray, score: np.ndarray):
    """Array-level core of the decision procedure.

    ``pref``: (n, n-1) rows of agents in preference order (best first).
    ``score``: (n, n) numbers consistent with that order: score[i][j] is
    lower the more i prefers j (raw utilities and rank positions both
    qualify).  Working with score thresholds instead of rank positions
    keeps the hot path free of an auxiliary rank-matrix build.
    Returns (partner list or None, proposal count, rotation count).
    """
    n = pref.shape[0]
    last_pos = n - 2
    inf = float("inf")
    # worst_score[y]: y's table is truncated strictly below this utility
    worst_score = [inf] * n
    # worst_pos[x]: last admissible position in x's own row
    worst_pos = [last_pos] * n
    holder = [-1] * n
    nxt = [0] * n
    proposals = 0

    # Phase 1: proposal chains with truncation below each held proposal.
    # An agent is exhausted once its pointer enters the region of its own
    # row lying strictly below its held proposal.
    for x0 in range(n):
        x = x0
        while x != -1:
            row = pref[x]
            pos = nxt[x]
            thr = worst_score[x]
            y = -1
            while pos <= last_pos:
                y = row[pos]
                if score[x, y] > thr:
                    pos = n
                    break
                if score[y, x] <= worst_score[y]:
                    break
                pos += 1
            nxt[x] = pos
            if pos > last_pos:
                return None, proposals, 0  # rejected by every admissible agent
            y = int(y)
            proposals += 1
            h = holder[y]
            holder[y] = x
            worst_score[y] = score[y, x]
            if h == -1:
                x = -1
            else:
                nxt[h] += 1
                x = h
    # At phase-1 end each agent holds exactly one proposal, sitting at the
    # end of its reduced row; recover those positions in one pass.
    worst_pos = (pref == np.asarray(holder, dtype=pref.dtype)[:, None]).argmax(axis=1).tolist()

    # Phase-2 table: entry (i, j) is alive iff both sides admit it.
    def first_alive(i):
        pos = fp[i]
        w = worst_pos[i]
        row = pref[i]
        while pos <= w:
            z = row[pos]
            if score[z, i] <= worst_score[z]:
                fp[i] = pos
                return int(z)
            pos += 1
        fp[i] = pos
        return None

    def second_alive(i):
        if first_alive(i) is None:
            return None
        pos = fp[i] + 1
        w = worst_pos[i]
        row = pref[i]
        while pos <= w:
            z = row[pos]
            if score[z, i] <= worst_score[z]:
                return int(z)
            pos += 1
        return None

    def last_alive(i):
        pos = min(lp[i], worst_pos[i])
        row = pref[i]
        while pos >= 0:
            z = row[pos]
            if score[z, i] <= worst_score[z]:
                lp[i] = pos
                return int(z)
            pos -= 1
        lp[i] = pos
        return None

    fp = [0] * n
    lp = list(worst_pos)
    rotations = 0
    p0 = 0
    while True:
        advanced = True
        while p0 < n and advanced:
            if first_alive(p0) is None:
                return None, proposals, rotations
            if second_alive(p0) is not None:
                advanced = False
            else:
                p0 += 1
        if p0 == n:
            break
        # Hunt an all-or-nothing rotation: x -> last(second(x)) cycles.
        seq = [p0]
        pos_in_seq = {p0: 0}
        while True:
            q = second_alive(seq[-1])
            nxt_x = last_alive(q)
            if nxt_x in pos_in_seq:
                cycle = seq[pos_in_seq[nxt_x]:]
                break
            pos_in_seq[nxt_x] = len(seq)
            seq.append(nxt_x)
        rot = [(x, second_alive(x)) for x in cycle]
        rotations += 1
        # Each y accepts the proposal of its rotation partner x, truncating
        # its list below x; agents cut loose may end up with empty lists.
        dropped: list[int] = []
        for x, y in rot:
            row = pref[y]
            old_w = worst_pos[y]
            pos = old_w
            while row[pos] != x:
                z = row[pos]
                if score[z, y] <= worst_score[z]:
                    dropped.append(int(z))
                pos -= 1
            worst_pos[y] = pos
            worst_score[y] = score[y, x]
        for z in dropped:
            if first_alive(z) is None:
                return None, proposals, rotations

    partner = [int(pref[i][fp[i]]) for i in range(n)]
    for i, j in enumerate(partner):
        if partner[j] != i:  # cannot happen for a stable table
            raise AssertionError("phase 2 terminated on an inconsistent table")
    return partner, proposals, rotations


def irving_solve(p: PreferenceProfile) -> SolveResult:
    """Decide whether a stable matching exists; return one if so."""
    partner, proposals, rotations = irving_decide(p.pref_matrix(), p.rank_matrix())
    matching = Matching(tuple(partner)) if partner is not None else None
    return SolveResult(matching, proposals, rotations)


_DEFAULT_ENUM_CAP = 20


def enumerate_stable(
    p: PreferenceProfile,
    limit: int | None = None,
    *,
    materialize: bool = True,
    reference: Matching | None = None,
    prune: bool = True,
) -> CensusResult:
    """Count (and optionally list) every stable matching by depth-first
    search over perfect matchings.

    The search always matches the lowest-index unmatched agent next and
    discards any partial matching whose fully-decided pairs already contain
    a blocking pair: such a pair blocks every extension.  ``limit`` raises
    the default agent cap of 20.  ``prune=False`` runs the plain exhaustive
    search (used to validate the pruning).
    """
    cap = limit if limit is not None else _DEFAULT_ENUM_CAP
    if p.n > cap:
        raise ResourceCapError(
            f"enumeration over {p.n} agents exceeds the cap of {cap}; "
            "pass a higher limit to override"
        )
    n = p.n
    rk = p.rank_matrix().tolist()
    partner = [-1] * n
    found: list[Matching] = []
    count = 0

    def blocked_by_decided(i: int, j: int) -> bool:
        ri, rj = rk[i], rk[j]
        own_i, own_j = ri[j], rj[i]
        for a in range(n):
            pa = partner[a]
            if pa == -1 or a == i or a == j:
                continue
            ra = rk[a]
            if ra[i] < ra[pa] and ri[a] < own_i:
                return True
            if ra[j] < ra[pa] and rj[a] < own_j:
                return True
        return False

    def full_check() -> bool:
        for i in range(n):
            ri = rk[i]
            own = ri[partner[i]]
            for j in range(i + 1, n):
                if partner[i] != j and ri[j] < own and rk[j][i] < rk[j][partner[j]]:
                    return False
        return True

    def dfs(lowest: int) -> None:
        nonlocal count
        i = lowest
        while i < n and partner[i] != -1:
            i += 1
        if i == n:
            # with pruning on, every decided pair was vetted on the way down
            if prune or full_check():
                count += 1
                if materialize:
                    found.append(Matching(tuple(partner)))
            return
        for j in range(i + 1, n):
            if partner[j] != -1:
                continue
            partner[i] = j
            partner[j] = i
            if not prune or not blocked_by_decided(i, j):
                dfs(i + 1)
            partner[i] = -1
            partner[j] = -1

    dfs(0)
    per_distance = None
    if reference is not None:
        if not materialize:
            raise ValueError("distance histogram requires materialized matchings")
        per_distance = {}
        for m in found:
            dec = symmetric_difference(reference, m)
            key = (dec.mu, dec.total_length)
            per_distance[key] = per_distance.get(key, 0) + 1
    return CensusResult(
        X=count,
        stable_list=tuple(found) if materialize else None,
        per_distance=per_distance,
    )
