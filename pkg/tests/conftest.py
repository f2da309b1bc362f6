import math

import numpy as np
import pytest

from roommates.instances import PreferenceProfile
from roommates.matchings import Matching
from roommates.solvers import enumerate_stable


def make_partner_first_profile(n: int) -> PreferenceProfile:
    """Everyone ranks their reference-matching partner first; the unique
    stable matching is the reference."""
    ref = Matching.consecutive(n)
    rows = []
    for i in range(n):
        others = [a for a in range(n) if a not in (i, ref[i])]
        rows.append(tuple([ref[i]] + others))
    return PreferenceProfile(n, tuple(rows))


@pytest.fixture(scope="session")
def no_stable_profile_4() -> PreferenceProfile:
    """The classic 4-agent instance admitting no stable matching."""
    return PreferenceProfile(4, ((1, 2, 3), (2, 0, 3), (0, 1, 3), (0, 1, 2)))


def relabel_profile(p: PreferenceProfile, sigma: list[int]) -> PreferenceProfile:
    rows = [None] * p.n
    for i, row in enumerate(p.ranks):
        rows[sigma[i]] = tuple(sigma[a] for a in row)
    return PreferenceProfile(p.n, tuple(rows))


def relabel_matching(m: Matching, sigma: list[int]) -> Matching:
    partner = [0] * m.n
    for i in range(m.n):
        partner[sigma[i]] = sigma[m[i]]
    return Matching(tuple(partner))


def reference_stability_masks(U: np.ndarray, m: Matching) -> np.ndarray:
    """Vectorized stability of matching ``m`` for a batch of utility arrays
    U of shape (B, n, n): independent double-loop over pairs, used as the
    brute-force oracle in several tests."""
    n = m.n
    x = U[:, np.arange(n), np.array(m.partner)]
    ok = np.ones(U.shape[0], dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if m[i] == j:
                continue
            ok &= ~((U[:, i, j] < x[:, i]) & (U[:, j, i] < x[:, j]))
    return ok


def profile_from_utilities_fast(U: np.ndarray) -> PreferenceProfile:
    """Rank one (n, n) utility array (diagonal ignored) without the
    UtilityMatrix validation overhead; test-side helper."""
    n = U.shape[0]
    rows = []
    for i in range(n):
        others = np.array([a for a in range(n) if a != i])
        rows.append(tuple(int(a) for a in others[np.argsort(U[i, others])]))
    return PreferenceProfile(n, tuple(rows))


@pytest.fixture(scope="session")
def rejection_oracle_8():
    """Instances of size 8 drawn uniformly and kept when the reference
    matching is stable: the ground-truth conditional ensemble.  Returns the
    kept utility arrays plus their stable-matching counts and single-cycle
    stable-neighbor counts for half-lengths 2 and 3."""
    from roommates.experiments import stable_single_cycle_neighbors

    n = 8
    m = Matching.consecutive(n)
    gen = np.random.default_rng(8261)
    kept = []
    total = 0
    while total < 1_200_000:
        U = gen.random((100_000, n, n))
        total += len(U)
        mask = reference_stability_masks(U, m)
        kept.append(U[mask])
    kept = np.concatenate(kept)
    counts = np.empty(len(kept), dtype=np.int64)
    xcirc = np.zeros((len(kept), 2), dtype=np.int64)
    for k, Uk in enumerate(kept):
        Un = Uk.copy()
        np.fill_diagonal(Un, np.nan)
        profile = profile_from_utilities_fast(Un)
        counts[k] = enumerate_stable(profile, materialize=False).X
        for nu, _ in stable_single_cycle_neighbors(Un, m, 3):
            xcirc[k, nu - 2] += 1
    return {"n": n, "draws": total, "U": kept, "X": counts, "xcirc": xcirc}


@pytest.fixture(scope="session")
def census_50():
    """Shared conditional census at n=50 (acceptance-scale run)."""
    from roommates.experiments import ExperimentConfig, run_conditional_census

    config = ExperimentConfig(
        kind="census",
        n_grid=(50,),
        samples=1600,
        master_seed=901,
        workers=2,
        nu_cap=5,
    )
    return run_conditional_census(config)[0]


def two_sided_z(mean_a, se_a, mean_b, se_b) -> float:
    return (mean_a - mean_b) / math.sqrt(se_a**2 + se_b**2 + 1e-300)
