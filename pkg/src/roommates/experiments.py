"""Seeded, parallel experiment harness with CSV output.

Every experiment is a pure function of its config: replicates are cut into
fixed chunks, each chunk draws from a stream derived by hashing
(master_seed, experiment, n, chunk index), and partial results merge in
chunk order.  Worker count changes wall time only, never an output byte.
Wall-clock timings live in the JSON sidecar, not the CSV, for that reason.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._numerics import ess_from_log_weights
from .estimators import (
    Estimate,
    _conditional_x_batch,
    _fill_conditional_pairs,
    _proposal,
)
from .combinatorics import double_factorial
from ._numerics import stability_log_rows
from .instances import RngStream, UtilityMatrix, rank_from_utilities
from .matchings import Matching
from .solvers import enumerate_stable, irving_decide

MERTENS_COEFF = math.e * math.sqrt(2.0 / math.pi)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment run depends on.

    ``workers`` parallelizes chunk execution only; ``chunk_size`` of 0
    picks a per-experiment default.  ``enum_cap`` bounds the agent count up
    to which the census materializes the full stable-matching count.
    """

    kind: str
    n_grid: tuple[int, ...]
    replicates: int = 1000
    samples: int = 20000
    master_seed: int = 0
    workers: int = 1
    output: str = "experiment.csv"
    proposal_rate: float | None = None
    nu_cap: int = 5
    chunk_size: int = 0
    enum_cap: int = 12

    def __post_init__(self):
        if self.kind not in ("scaling", "census", "ex-scaling"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        for n in self.n_grid:
            if n % 2 != 0 or n < 4:
                raise ConfigError(f"n values must be even integers >= 4, got {n}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.nu_cap < 2:
            raise ConfigError("nu_cap must be >= 2")
        for n in self.n_grid:
            if self.kind == "census" and self.nu_cap > n // 2:
                raise ConfigError(f"nu_cap {self.nu_cap} exceeds n/2 for n={n}")

    def config_hash(self) -> str:
        """Hash of the data-determining fields only: worker count and output
        path affect neither a single emitted byte nor the hash."""
        payload = asdict(self)
        payload.pop("workers")
        payload.pop("output")
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()[:16]


@dataclass(frozen=True)
class ScalingRow:
    n: int
    replicates: int
    count_exists: int
    p_hat: float
    stderr: float
    mertens_prediction: float
    wall_time: float


@dataclass(frozen=True)
class ConditionalCensusRow:
    n: int
    samples: int
    ess: float
    mean_X: float | None
    stderr_X: float | None
    mean_X_circ_le: float
    stderr_X_circ_le: float
    mean_X_circ_by_nu: dict[int, float]
    d1_rate: float
    d3_rate: float
    combine_fail_per_pair: float
    gpi_rate: float
    wall_time: float


_KIND_IDS = {"scaling": 1, "census": 2, "ex-scaling": 3}


def _chunk_stream(master_seed: int, kind: str, n: int, chunk: int) -> RngStream:
    sid = (_KIND_IDS[kind] << 52) | (n << 32) | chunk
    return RngStream(master_seed, sid)


def _random_pref_score(gen: np.random.Generator, n: int):
    """Uniform utilities with a sentinel diagonal; the argsort rows (self
    excluded) are the preference lists and the raw utilities serve as the
    comparison scores, so no rank matrix is ever built."""
    u = gen.random((n, n))
    np.fill_diagonal(u, 2.0)
    pref = np.argsort(u, axis=1)[:, : n - 1]
    return pref, u


def _scaling_chunk(args) -> int:
    master_seed, n, chunk_id, count = args
    gen = _chunk_stream(master_seed, "scaling", n, chunk_id).generator()
    exists = 0
    for _ in range(count):
        pref, score = _random_pref_score(gen, n)
        partner, _, _ = irving_decide(pref, score)
        if partner is not None:
            exists += 1
    return exists


def _ex_chunk(args) -> np.ndarray:
    master_seed, n, chunk_id, count, rate = args
    gen = _chunk_stream(master_seed, "ex-scaling", n, chunk_id).generator()
    prop = _proposal(n, rate)
    partner = np.array(Matching.consecutive(n).partner)
    log_df = double_factorial(n - 1).log_value
    X = prop.sample(gen, (count, n))
    return log_df + stability_log_rows(X, partner) - prop.log_pdf(X).sum(axis=1)


def _chunks(total: int, size: int) -> list[int]:
    return [min(size, total - lo) for lo in range(0, total, size)]


def _run_chunks(worker, arglist, workers: int):
    if workers <= 1 or len(arglist) <= 1:
        return [worker(a) for a in arglist]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, arglist))


def run_scaling(config: ExperimentConfig) -> list[ScalingRow]:
    """Existence frequency of a stable matching across the n grid."""
    if config.kind != "scaling":
        raise ConfigError("config kind must be 'scaling'")
    chunk_size = config.chunk_size or 256
    rows = []
    for n in config.n_grid:
        t0 = time.perf_counter()
        sizes = _chunks(config.replicates, chunk_size)
        args = [
            (config.master_seed, n, ci, cnt) for ci, cnt in enumerate(sizes)
        ]
        counts = _run_chunks(_scaling_chunk, args, config.workers)
        exists = int(sum(counts))
        p = exists / config.replicates
        stderr = math.sqrt(p * (1.0 - p) / config.replicates)
        rows.append(
            ScalingRow(
                n=n,
                replicates=config.replicates,
                count_exists=exists,
                p_hat=p,
                stderr=stderr,
                mertens_prediction=MERTENS_COEFF * n ** -0.25,
                wall_time=time.perf_counter() - t0,
            )
        )
    return rows


@dataclass(frozen=True)
class ExpectedCountRow:
    n: int
    samples: int
    estimate: float
    stderr: float
    ess: float
    degenerate: bool
    wall_time: float


def run_ex_scaling(config: ExperimentConfig) -> list[ExpectedCountRow]:
    """Importance-sampling estimate of the expected stable-matching count
    across the n grid."""
    if config.kind != "ex-scaling":
        raise ConfigError("config kind must be 'ex-scaling'")
    chunk_size = config.chunk_size or 8192
    rows = []
    for n in config.n_grid:
        t0 = time.perf_counter()
        sizes = _chunks(config.samples, chunk_size)
        args = [
            (config.master_seed, n, ci, cnt, config.proposal_rate)
            for ci, cnt in enumerate(sizes)
        ]
        logw = np.concatenate(_run_chunks(_ex_chunk, args, config.workers))
        shift = float(np.max(logw))
        w = np.exp(logw - shift)
        mean = math.exp(shift) * float(w.mean())
        stderr = math.exp(shift) * float(w.std(ddof=1)) / math.sqrt(len(logw))
        ess = ess_from_log_weights(logw)
        rows.append(
            ExpectedCountRow(
                n=n,
                samples=config.samples,
                estimate=mean,
                stderr=stderr,
                ess=ess,
                degenerate=ess < 0.01 * config.samples,
                wall_time=time.perf_counter() - t0,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Conditional census: stable single-cycle neighbors of a conditioned matching.


def _neighbor_is_stable(U: np.ndarray, x: np.ndarray, new_partner: dict[int, int]) -> bool:
    """Full stability check of the matching that differs from the reference
    on ``new_partner``, valid when the reference itself is stable: a pair
    with both members outside the difference can never newly block."""
    y = x.copy()
    for v, p in new_partner.items():
        y[v] = U[v, p]
    for v in new_partner:
        with np.errstate(invalid="ignore"):
            mask = (U[v, :] < y[v]) & (U[:, v] < y)
        if mask.any():
            return False
    return True


def stable_single_cycle_neighbors(
    U: np.ndarray, m: Matching, nu_cap: int
) -> list[tuple[int, dict[int, int]]]:
    """All stable matchings differing from ``m`` by one cycle of half-length
    at most ``nu_cap``, for an instance (utility array ``U``) in which ``m``
    is stable.  Returns (half-length, new-partner map) pairs.

    Searches oriented cycles directly: along a realizable cycle the
    improving and worsening vertices alternate, and every improving vertex
    must rank its new partner above its old one, which at typical scale
    leaves about sqrt(n) candidates per step instead of n.
    """
    n = m.n
    partner = list(m.partner)
    x = U[np.arange(n), np.array(partner)]
    with np.errstate(invalid="ignore"):
        admire = U < x[:, None]
    admirer_lists = [np.nonzero(admire[:, b])[0].tolist() for b in range(n)]
    # for each b: admirers sorted by b's utility for them, to count/identify
    # agents that would block b's candidate new match
    covet = []
    for b in range(n):
        pairs = sorted((float(U[b, j]), j) for j in admirer_lists[b])
        covet.append(pairs)
    Ul = U.tolist()
    xl = x.tolist()
    out: list[tuple[int, dict[int, int]]] = []
    used = [False] * n
    ys: dict[int, float] = {}

    def in_path_blocked(v: int, yv: float) -> bool:
        for j, yj in ys.items():
            if j != v and Ul[v][j] < yv and Ul[j][v] < yj:
                return True
        return False

    def extend(a1: int, last_b: int, depth: int, new_partner: dict[int, int]) -> None:
        # try to close the cycle back to a1
        if depth >= 2:
            y_close = Ul[last_b][a1]
            if y_close > xl[last_b] and Ul[a1][last_b] < xl[a1]:
                cand = dict(new_partner)
                cand[last_b] = a1
                cand[a1] = last_b
                if _neighbor_is_stable(U, x, cand):
                    out.append((depth, cand))
        if depth >= nu_cap:
            return
        budget = nu_cap - depth - 1
        for a2 in admirer_lists[last_b]:
            if a2 <= a1 or used[a2]:
                continue
            yb = Ul[last_b][a2]
            if yb <= xl[last_b]:
                continue
            ya = Ul[a2][last_b]
            # exact blocking against committed vertices
            if in_path_blocked(last_b, yb) or in_path_blocked(a2, ya):
                continue
            # agents outside the path that would block b's new match can
            # only be absorbed as future improving vertices
            pending = 0
            dead = False
            for val, j in covet[last_b]:
                if val >= yb:
                    break
                if j == a2 or j == a1 or j in ys:
                    continue  # committed vertices handled exactly above
                if used[j]:
                    continue
                pending += 1
                if pending > budget:
                    dead = True
                    break
            if dead:
                continue
            b2 = partner[a2]
            used[a2] = used[b2] = True
            ys[last_b] = yb
            ys[a2] = ya
            new_partner[last_b] = a2
            new_partner[a2] = last_b
            extend(a1, b2, depth + 1, new_partner)
            del new_partner[last_b], new_partner[a2]
            del ys[last_b], ys[a2]
            used[a2] = used[b2] = False

    for a1 in range(n):
        b1 = partner[a1]
        used[a1] = used[b1] = True
        extend(a1, b1, 1, {})
        used[a1] = used[b1] = False
    return out


def _census_chunk(args) -> dict[str, np.ndarray]:
    master_seed, n, chunk_id, count, rate, nu_cap, enum_cap = args
    gen = _chunk_stream(master_seed, "census", n, chunk_id).generator()
    m = Matching.consecutive(n)
    X, logw = _conditional_x_batch(m, count, gen, rate)
    logn = math.log(n)
    pair_idx = np.arange(0, n, 2)
    xcirc = np.zeros((count, nu_cap - 1), dtype=np.int32)
    d1 = np.zeros(count, dtype=bool)
    d3 = np.zeros(count, dtype=bool)
    disjoint_pairs = np.zeros(count, dtype=np.int64)
    failing_pairs = np.zeros(count, dtype=np.int64)
    full_X = np.full(count, -1, dtype=np.int64)
    gpi = np.zeros(count, dtype=bool)
    for k in range(count):
        xk = X[k]
        sum_x = float(xk.sum())
        pair_sum = float((xk[pair_idx] * xk[pair_idx + 1]).sum())
        sq = float((xk * xk).sum())
        gpi[k] = (
            abs(sum_x - math.sqrt(n)) <= 10.0 * logn
            and float(xk.max()) <= logn**2 / math.sqrt(n)
            and abs(pair_sum - 0.5) <= n ** (-1.0 / 3.0)
            and abs(sq - 2.0) <= n ** (-1.0 / 3.0)
        )
        U = _fill_conditional_pairs(m, xk, gen)
        found = stable_single_cycle_neighbors(U, m, nu_cap)
        for nu, _ in found:
            xcirc[k, nu - 2] += 1
        if len(found) >= 2:
            vsets = [frozenset(np_map) for _, np_map in found]
            for a in range(len(found)):
                for b in range(a + 1, len(found)):
                    if vsets[a] & vsets[b]:
                        d1[k] = True
                    else:
                        disjoint_pairs[k] += 1
                        merged = dict(found[a][1])
                        merged.update(found[b][1])
                        if not _neighbor_is_stable(U, X[k], merged):
                            d3[k] = True
                            failing_pairs[k] += 1
        if n <= enum_cap:
            profile = rank_from_utilities(UtilityMatrix(n, U))
            full_X[k] = enumerate_stable(profile, materialize=False).X
    return {
        "logw": logw,
        "xcirc": xcirc,
        "d1": d1,
        "d3": d3,
        "disjoint_pairs": disjoint_pairs,
        "failing_pairs": failing_pairs,
        "gpi": gpi,
        "full_X": full_X,
    }


def run_conditional_census(config: ExperimentConfig) -> list[ConditionalCensusRow]:
    """Weighted census of stable single-cycle neighbors under instances
    conditioned on the reference matching being stable."""
    if config.kind != "census":
        raise ConfigError("config kind must be 'census'")
    chunk_size = config.chunk_size or 128
    rows = []
    for n in config.n_grid:
        t0 = time.perf_counter()
        sizes = _chunks(config.samples, chunk_size)
        args = [
            (
                config.master_seed,
                n,
                ci,
                cnt,
                config.proposal_rate,
                config.nu_cap,
                config.enum_cap,
            )
            for ci, cnt in enumerate(sizes)
        ]
        parts = _run_chunks(_census_chunk, args, config.workers)
        logw = np.concatenate([p["logw"] for p in parts])
        xcirc = np.concatenate([p["xcirc"] for p in parts])
        d1 = np.concatenate([p["d1"] for p in parts])
        d3 = np.concatenate([p["d3"] for p in parts])
        pairs = np.concatenate([p["disjoint_pairs"] for p in parts])
        fails = np.concatenate([p["failing_pairs"] for p in parts])
        gpi = np.concatenate([p["gpi"] for p in parts])
        full_X = np.concatenate([p["full_X"] for p in parts])
        w = np.exp(logw - float(np.max(logw)))
        wn = w / w.sum()

        def wmean(values: np.ndarray) -> tuple[float, float]:
            mu = float(np.sum(wn * values))
            return mu, float(math.sqrt(np.sum((wn * (values - mu)) ** 2)))

        by_nu = {
            nu: float(np.sum(wn * xcirc[:, nu - 2])) for nu in range(2, config.nu_cap + 1)
        }
        circ_le, circ_se = wmean(xcirc.sum(axis=1))
        mean_X, stderr_X = (
            wmean(full_X.astype(float)) if n <= config.enum_cap else (None, None)
        )
        rows.append(
            ConditionalCensusRow(
                n=n,
                samples=config.samples,
                ess=ess_from_log_weights(logw),
                mean_X=mean_X,
                stderr_X=stderr_X,
                mean_X_circ_le=circ_le,
                stderr_X_circ_le=circ_se,
                mean_X_circ_by_nu=by_nu,
                d1_rate=float(np.sum(wn * d1)),
                d3_rate=float(np.sum(wn * d3)),
                combine_fail_per_pair=(
                    float(np.sum(wn * fails) / np.sum(wn * pairs))
                    if np.sum(wn * pairs) > 0
                    else float("nan")
                ),
                gpi_rate=float(np.sum(wn * gpi)),
                wall_time=time.perf_counter() - t0,
            )
        )
    return rows


def reference_with_cycles(n: int, lengths: list[int]) -> tuple[Matching, Matching]:
    """The reference matching together with the matching that differs from
    it by disjoint cycles of the given even lengths, laid out on leading
    blocks of consecutive pairs."""
    if any(ln < 4 or ln % 2 != 0 for ln in lengths):
        raise ConfigError(f"cycle lengths must be even and >= 4, got {lengths}")
    if sum(lengths) > n:
        raise ConfigError(f"cycle lengths {lengths} do not fit on {n} agents")
    m = Matching.consecutive(n)
    partner = list(m.partner)
    base = 0
    for ln in lengths:
        nu = ln // 2
        for i in range(nu - 1):
            a, b = base + 2 * i + 1, base + 2 * i + 2
            partner[a], partner[b] = b, a
        a, b = base + 2 * nu - 1, base
        partner[a], partner[b] = b, a
        base += ln
    return m, Matching(tuple(partner))


def gpi_weighted_frequency(
    n: int,
    samples: int,
    rng: RngStream,
    *,
    proposal_rate: float | None = None,
    batch_size: int = 4096,
) -> Estimate:
    """Weighted frequency of the quasirandomness event over partner-utility
    vectors conditioned on the reference matching being stable."""
    if n % 2 != 0 or n < 4:
        raise ConfigError(f"n must be an even integer >= 4, got {n}")
    m = Matching.consecutive(n)
    gen = rng.generator()
    logn = math.log(n)
    tol = n ** (-1.0 / 3.0)
    pair_idx = np.arange(0, n, 2)
    logw_all = []
    flags_all = []
    done = 0
    while done < samples:
        b = min(batch_size, samples - done)
        X, logw = _conditional_x_batch(m, b, gen, proposal_rate)
        sum_x = X.sum(axis=1)
        max_x = X.max(axis=1)
        pair_sum = (X[:, pair_idx] * X[:, pair_idx + 1]).sum(axis=1)
        sq = (X * X).sum(axis=1)
        flags = (
            (np.abs(sum_x - math.sqrt(n)) <= 10.0 * logn)
            & (max_x <= logn**2 / math.sqrt(n))
            & (np.abs(pair_sum - 0.5) <= tol)
            & (np.abs(sq - 2.0) <= tol)
        )
        logw_all.append(logw)
        flags_all.append(flags)
        done += b
    logw = np.concatenate(logw_all)
    flags = np.concatenate(flags_all).astype(float)
    w = np.exp(logw - float(np.max(logw)))
    wn = w / w.sum()
    mean = float(np.sum(wn * flags))
    stderr = float(math.sqrt(np.sum((wn * (flags - mean)) ** 2)))
    ess = ess_from_log_weights(logw)
    return Estimate(mean, stderr, samples, ess, degenerate=ess < 0.01 * samples)


# ---------------------------------------------------------------------------
# Output writers.


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _scaling_table(rows: list[ScalingRow]):
    cols = ["n", "replicates", "count_exists", "p_hat", "stderr", "mertens_prediction"]
    data = [
        [r.n, r.replicates, r.count_exists, r.p_hat, r.stderr, r.mertens_prediction]
        for r in rows
    ]
    return cols, data


def _ex_table(rows: list[ExpectedCountRow]):
    cols = ["n", "samples", "estimate", "stderr", "ess", "degenerate"]
    data = [[r.n, r.samples, r.estimate, r.stderr, r.ess, r.degenerate] for r in rows]
    return cols, data


def _census_table(rows: list[ConditionalCensusRow], nu_cap: int):
    cols = ["n", "samples", "ess", "mean_X", "stderr_X", "xcirc_le", "xcirc_le_stderr"]
    cols += [f"xcirc_{nu}" for nu in range(2, nu_cap + 1)]
    cols += ["d1_rate", "d3_rate", "combine_fail_per_pair", "gpi_rate"]
    data = []
    for r in rows:
        row = [r.n, r.samples, r.ess, r.mean_X, r.stderr_X, r.mean_X_circ_le, r.stderr_X_circ_le]
        row += [r.mean_X_circ_by_nu[nu] for nu in range(2, nu_cap + 1)]
        row += [r.d1_rate, r.d3_rate, r.combine_fail_per_pair, r.gpi_rate]
        data.append(row)
    return cols, data


def write_experiment(config: ExperimentConfig, rows, csv_path: str) -> None:
    """Write the data CSV (deterministic) and its JSON sidecar (config echo,
    seed, versions, wall time)."""
    if config.kind == "scaling":
        cols, data = _scaling_table(rows)
    elif config.kind == "ex-scaling":
        cols, data = _ex_table(rows)
    else:
        cols, data = _census_table(rows, config.nu_cap)
    lines = [f"# kind={config.kind} config_hash={config.config_hash()} schema=1"]
    lines.append(",".join(cols))
    for row in data:
        lines.append(",".join(_fmt(v) for v in row))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    import roommates

    sidecar = {
        "config": asdict(config),
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "stable_roommates": roommates.__version__,
        },
        "wall_time_s": {str(r.n): r.wall_time for r in rows},
        "total_wall_time_s": sum(r.wall_time for r in rows),
    }
    with open(csv_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config: ExperimentConfig) -> list:
    """Dispatch on config.kind, write outputs, return the rows."""
    if config.kind == "scaling":
        rows = run_scaling(config)
    elif config.kind == "ex-scaling":
        rows = run_ex_scaling(config)
    else:
        rows = run_conditional_census(config)
    write_experiment(config, rows, config.output)
    return rows
