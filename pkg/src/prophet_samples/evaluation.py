"""Exact and Monte Carlo evaluation of threshold rules against the prophet.

Monte Carlo runs are deterministic for a fixed (seed, reps) pair at any worker
count: replications are grouped into fixed-size chunks, each chunk draws from
its own counter-based Philox substream keyed by (seed, purpose, chunk index),
and aggregation uses exact compensated summation, so scheduling cannot change
a single output bit.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algorithms import (
    ThresholdRule,
    beta_moments,
    effective_rank,
    rule_to_config,
    static_threshold_values,
    threshold_value_with_rank_law,
)
from .distributions import Instance, ValueDist

_MASK64 = (1 << 64) - 1

# Purpose tags keep the substreams of different estimators disjoint.
_TAG_MC = 0x4D43
_TAG_SEMI = 0x5345
_TAG_DOM = 0x444F

_SEMI_CHUNK = 4096
_DOM_TOL = 1e-9
_EXACT_ENUM_CAP = 300_000


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *tags: int) -> int:
    """Stable 64-bit sub-seed from a base seed and integer tags."""
    h = seed & _MASK64
    for t in tags:
        h = _splitmix64(h ^ (t & _MASK64))
    return h


def _substream(seed: int, tag: int, chunk: int) -> np.random.Generator:
    bitgen = np.random.Philox(counter=[0, 0, chunk, 0], key=[seed & _MASK64, tag])
    return np.random.Generator(bitgen)


def _mc_chunk_size(n: int, k: int) -> int:
    """Rows per chunk; a pure function of the config so schedules cannot vary it."""
    return max(1, min(65536, (1 << 21) // max(1, n * (k + 2))))


def _map_chunks(worker: Callable[[int], tuple], chunks: int, threads: int) -> list:
    if threads <= 1 or chunks <= 1:
        return [worker(c) for c in range(chunks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(worker, range(chunks)))


# -- reports ---------------------------------------------------------------------


@dataclass(frozen=True)
class RatioReport:
    """Algorithm value vs. the prophet's expected maximum.

    ci_halfwidth is a 95% normal halfwidth on alg_value (0 for exact
    evaluations); divide by prophet_value for the halfwidth on the ratio.
    """

    alg_value: float
    prophet_value: float
    ratio: float
    ci_halfwidth: float
    reps: int
    seed: int

    def __post_init__(self) -> None:
        if not self.prophet_value > 0.0:
            raise ValueError("prophet_value must be positive")
        if self.ci_halfwidth < 0.0:
            raise ValueError("ci_halfwidth must be nonnegative")

    @property
    def ratio_ci_halfwidth(self) -> float:
        return self.ci_halfwidth / self.prophet_value


@dataclass(frozen=True)
class DominanceReport:
    """Worst-case tail ratio Pr[ALG >= x] / Pr[max >= x] over a grid."""

    gamma: float
    grid: tuple[float, ...]
    worst_x: float
    worst_ratio: float
    mode: str = "exact"
    reps: int = 0
    seed: int = 0

    @property
    def passed(self) -> bool:
        return self.worst_ratio >= self.gamma - _DOM_TOL


RATIO_CSV_HEADER = "instance_id,rule,k,l,reps,seed,alg_value,prophet_value,ratio,ci"


def ratio_csv_row(instance_id: str, rule: ThresholdRule, k: int, report: RatioReport) -> str:
    rank = effective_rank(rule)
    rule_name = rule_to_config(rule)["rule"]
    return ",".join(
        [
            instance_id,
            rule_name,
            str(k),
            "" if rank is None else str(rank),
            str(report.reps),
            str(report.seed),
            repr(report.alg_value),
            repr(report.prophet_value),
            repr(report.ratio),
            repr(report.ci_halfwidth),
        ]
    )


def _finalize_ratio(
    parts: list[tuple[int, float, float]],
    prophet: float,
    reps: int,
    seed: int,
) -> RatioReport:
    total = math.fsum(p[1] for p in parts)
    total_sq = math.fsum(p[2] for p in parts)
    alg = total / reps
    if reps > 1:
        var = max(0.0, (total_sq - reps * alg * alg) / (reps - 1))
        ci = 1.96 * math.sqrt(var / reps)
    else:
        ci = 0.0
    return RatioReport(
        alg_value=alg,
        prophet_value=prophet,
        ratio=alg / prophet,
        ci_halfwidth=ci,
        reps=reps,
        seed=seed,
    )


# -- full Monte Carlo -------------------------------------------------------------


def _simulate_chunk(
    inst: Instance,
    rule: ThresholdRule,
    k: int,
    rows: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate `rows` replications; returns (accepted value, realized max).

    Draw order is fixed per configuration: pooled samples, sample ranks,
    values, value ranks, then any threshold rank. Latent ranks are drawn only
    when the instance has atoms; without atoms ties are a null event.
    """
    n = inst.n
    ranked = inst.has_atoms
    rank = effective_rank(rule)

    if rank is not None:
        if not 1 <= rank <= n * k:
            raise ValueError(f"rank {rank} outside [1, {n * k}]")
        samples = np.concatenate(
            [box.sample_many(rng, (rows, k)) for box in inst.boxes], axis=1
        )
        sample_ranks = rng.random((rows, n * k)) if ranked else None

    values = np.stack([box.sample_many(rng, rows) for box in inst.boxes], axis=1)
    value_ranks = rng.random((rows, n)) if ranked else None

    if rank is not None:
        if ranked:
            order = np.lexsort((sample_ranks, samples), axis=-1)
            pick = order[:, n * k - rank]
            rows_idx = np.arange(rows)
            thresh = samples[rows_idx, pick]
            thresh_rank = sample_ranks[rows_idx, pick]
        else:
            thresh = np.partition(samples, n * k - rank, axis=1)[:, n * k - rank]
            thresh_rank = None
    else:
        thresh = np.full(rows, rule.t)
        thresh_rank = rng.random(rows) if ranked else None

    out = np.zeros(rows)
    alive = np.ones(rows, dtype=bool)
    for i in range(n):
        vi = values[:, i]
        win = vi > thresh
        if ranked:
            win = win | ((vi == thresh) & (value_ranks[:, i] > thresh_rank))
        take = alive & win
        out[take] = vi[take]
        alive &= ~take
    return out, values.max(axis=1)


def mc_ratio(
    inst: Instance,
    rule: ThresholdRule,
    k: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> RatioReport:
    """Plain Monte Carlo competitive-ratio estimate with an exact denominator."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    prophet = inst.prophet_expectation()
    chunk = _mc_chunk_size(inst.n, k)
    chunks = (reps + chunk - 1) // chunk

    def worker(c: int) -> tuple[int, float, float]:
        rows = min(chunk, reps - c * chunk)
        rng = _substream(seed, _TAG_MC, c)
        accepted, _ = _simulate_chunk(inst, rule, k, rows, rng)
        return rows, float(np.sum(accepted)), float(np.sum(accepted * accepted))

    parts = _map_chunks(worker, chunks, threads)
    return _finalize_ratio(parts, prophet, reps, seed)


# -- semi-exact ordinal evaluation --------------------------------------------------


@dataclass(frozen=True)
class _LevelStructure:
    """Descending strata of the pooled sample distribution.

    Each stratum is either an atom or an open interval between adjacent
    instance breakpoints; box_probs[i, j] is the chance one sample of box i
    lands in stratum j. Sampling per-stratum counts is an exact factorization
    of drawing k samples per box, and within an interval stratum the points
    are conditionally iid uniform.
    """

    is_atom: np.ndarray
    los: np.ndarray
    his: np.ndarray
    box_probs: np.ndarray


def _level_structure(inst: Instance) -> _LevelStructure:
    breaks = inst.breakpoints()
    levels: list[tuple[bool, float, float]] = []
    for idx in range(len(breaks) - 1, -1, -1):
        b = breaks[idx]
        if any(box.mass_at(b) > 0.0 for box in inst.boxes):
            levels.append((True, b, b))
        if idx > 0:
            a = breaks[idx - 1]
            levels.append((False, a, b))
    probs = np.zeros((inst.n, len(levels)))
    for i, box in enumerate(inst.boxes):
        for j, (atom, a, b) in enumerate(levels):
            if atom:
                probs[i, j] = box.mass_at(a)
            else:
                total = 0.0
                for w, lo, hi in box.segments:
                    if lo < hi and lo <= a and b <= hi:
                        total += w * (b - a) / (hi - lo)
                probs[i, j] = total
    keep = probs.sum(axis=0) > 0.0
    levels = [lv for lv, used in zip(levels, keep) if used]
    probs = probs[:, keep]
    return _LevelStructure(
        is_atom=np.array([lv[0] for lv in levels]),
        los=np.array([lv[1] for lv in levels]),
        his=np.array([lv[2] for lv in levels]),
        box_probs=probs,
    )


def semi_exact_ordinal(
    inst: Instance,
    k: int,
    rank: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> RatioReport:
    """Monte Carlo over the sample pool only; the inner value is exact.

    Per replication the rank-th highest sample is drawn from its exact law
    (stratum counts, then an order-statistic Beta within the stratum) and the
    walk value at that threshold is evaluated in closed form, including tie
    masses when the threshold lands on an atom. The confidence interval
    reflects threshold randomness alone.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not 1 <= rank <= inst.n * k:
        raise ValueError(f"rank {rank} outside [1, {inst.n * k}]")
    prophet = inst.prophet_expectation()
    struct = _level_structure(inst)
    chunks = (reps + _SEMI_CHUNK - 1) // _SEMI_CHUNK
    atom_cache: dict[tuple[int, int, int], float] = {}

    def atom_value(level: int, count: int, r: int) -> float:
        key = (level, count, r)
        if key not in atom_cache:
            atom_cache[key] = threshold_value_with_rank_law(
                inst, float(struct.los[level]), alpha=count + 1 - r, beta=r
            )
        return atom_cache[key]

    def worker(c: int) -> tuple[int, float, float]:
        rows = min(_SEMI_CHUNK, reps - c * _SEMI_CHUNK)
        rng = _substream(seed, _TAG_SEMI, c)
        counts = np.zeros((rows, len(struct.is_atom)), dtype=np.int64)
        for i in range(inst.n):
            counts += rng.multinomial(k, struct.box_probs[i], size=rows)
        cum = np.cumsum(counts, axis=1)
        lvl = np.argmax(cum >= rank, axis=1)
        rows_idx = np.arange(rows)
        n_at = counts[rows_idx, lvl]
        r = rank - (cum[rows_idx, lvl] - n_at)

        out = np.zeros(rows)
        interval = ~struct.is_atom[lvl]
        if np.any(interval):
            a = struct.los[lvl[interval]]
            b = struct.his[lvl[interval]]
            n_i = n_at[interval].astype(float)
            r_i = r[interval].astype(float)
            pos = rng.beta(n_i + 1.0 - r_i, r_i)
            thresholds = a + (b - a) * pos
            out[interval] = static_threshold_values(inst, thresholds)
        atom_rows = np.nonzero(~interval)[0]
        if atom_rows.size:
            triples = np.stack(
                [lvl[atom_rows], n_at[atom_rows], r[atom_rows]], axis=1
            )
            uniq, inverse = np.unique(triples, axis=0, return_inverse=True)
            vals = np.array([atom_value(int(a_), int(b_), int(c_)) for a_, b_, c_ in uniq])
            out[atom_rows] = vals[inverse]
        return rows, float(np.sum(out)), float(np.sum(out * out))

    parts = _map_chunks(worker, chunks, threads)
    return _finalize_ratio(parts, prophet, reps, seed)


# -- exact single-sample evaluation ---------------------------------------------------


def _discrete_supports(inst: Instance) -> list[list[tuple[float, float]]]:
    if not inst.is_discrete:
        raise ValueError("exact evaluation requires an all-atoms instance")
    return [sorted(box.atoms().items()) for box in inst.boxes]


def exact_single_sample_value(inst: Instance) -> float:
    """Exact value of the max-sample rule with one sample per box.

    Enumerates every sample vector over the atom supports; tie masses between
    the chosen threshold and equal realized values integrate exactly through
    the Beta order-statistic law of the maximum's latent rank.
    """
    supports = _discrete_supports(inst)
    if inst.n > 6 or any(len(s) > 6 for s in supports):
        raise ValueError("supports too large for exact enumeration")
    cache: dict[tuple[float, int], float] = {}
    total = 0.0
    for combo in itertools.product(*supports):
        prob = 1.0
        for _, p in combo:
            prob *= p
        vals = [v for v, _ in combo]
        t = max(vals)
        m = sum(1 for v in vals if v == t)
        key = (t, m)
        if key not in cache:
            cache[key] = threshold_value_with_rank_law(inst, t, alpha=m, beta=1)
        total += prob * cache[key]
    return total


# -- stochastic dominance ---------------------------------------------------------------


def _exact_selected_distribution(
    inst: Instance, rule: ThresholdRule, k: int
) -> dict[float, float]:
    """Exact law of the accepted value (all-atoms instances).

    Enumerates the k*n pooled sample draws for ordinal rules; explicit
    thresholds need no enumeration. Returns atom -> probability; the missing
    mass is the no-selection event.
    """
    supports = _discrete_supports(inst)
    rank = effective_rank(rule)

    def accumulate(t: float, m: int, j: int, weight: float, dist: dict[float, float]):
        alpha, beta = (m + 1 - j, j) if m > 0 else (1, 1)
        moments = beta_moments(alpha, beta, inst.n + 1)
        alive = np.array([1.0])
        for box in inst.boxes:
            for v, p in box.atoms().items():
                if v > t:
                    sel = alive * p
                elif v == t:
                    sel = np.convolve(alive, np.array([p, -p]))
                else:
                    continue
                dist[v] = dist.get(v, 0.0) + weight * float(
                    np.dot(sel, moments[: len(sel)])
                )
            mass_t = box.mass_at(t)
            alive = np.convolve(alive, np.array([box.cdf_left(t), mass_t]))

    dist: dict[float, float] = {}
    if rank is None:
        accumulate(rule.t, 1 if any(b.mass_at(rule.t) > 0 for b in inst.boxes) else 0, 1, 1.0, dist)
        return dist

    slots = [s for s in supports for _ in range(k)]
    combos = 1
    for s in slots:
        combos *= len(s)
    if combos > _EXACT_ENUM_CAP:
        raise ValueError(f"{combos} sample combinations exceed the enumeration cap")
    if not 1 <= rank <= len(slots):
        raise ValueError(f"rank {rank} outside [1, {len(slots)}]")
    for combo in itertools.product(*slots):
        prob = 1.0
        for _, p in combo:
            prob *= p
        pool = sorted((v for v, _ in combo), reverse=True)
        t = pool[rank - 1]
        gt = sum(1 for v in pool if v > t)
        m = sum(1 for v in pool if v == t)
        accumulate(t, m, rank - gt, prob, dist)
    return dist


def dominance_check(
    inst: Instance,
    rule: ThresholdRule,
    k: int,
    gamma: float,
    mode: str = "exact",
    reps: int = 0,
    seed: int = 0,
    threads: int = 1,
) -> DominanceReport:
    """Verify Pr[ALG >= x] >= gamma * Pr[max >= x] across a value grid.

    Exact mode enumerates all-atoms instances; mc mode compares empirical
    tails on the breakpoint/midpoint grid. Grid points where the prophet tail
    vanishes are excluded.
    """
    if mode == "exact":
        selected = _exact_selected_distribution(inst, rule, k)
        grid = [x for x in inst.support_atoms() if x > 0.0]
        alg_tail = []
        max_tail = []
        for x in grid:
            alg_tail.append(math.fsum(p for v, p in selected.items() if v >= x))
            max_tail.append(inst.max_exceedance(x))
        pairs = [
            (x, a / m_) for x, a, m_ in zip(grid, alg_tail, max_tail) if m_ > 0.0
        ]
    elif mode == "mc":
        if reps < 1:
            raise ValueError("mc mode requires reps >= 1")
        breaks = [b for b in inst.breakpoints() if b > 0.0]
        mids = [0.5 * (a + b) for a, b in zip(breaks, breaks[1:])]
        grid = sorted(set(breaks) | set(mids))
        gx = np.array(grid)
        chunk = _mc_chunk_size(inst.n, k)
        chunks = (reps + chunk - 1) // chunk

        def worker(c: int) -> tuple[np.ndarray, np.ndarray]:
            rows = min(chunk, reps - c * chunk)
            rng = _substream(seed, _TAG_DOM, c)
            accepted, maxima = _simulate_chunk(inst, rule, k, rows, rng)
            alg_ge = (accepted[:, None] >= gx[None, :]).sum(axis=0)
            max_ge = (maxima[:, None] >= gx[None, :]).sum(axis=0)
            return alg_ge, max_ge

        parts = _map_chunks(worker, chunks, threads)
        alg_counts = np.sum([p[0] for p in parts], axis=0)
        max_counts = np.sum([p[1] for p in parts], axis=0)
        pairs = [
            (x, a / m_)
            for x, a, m_ in zip(grid, alg_counts, max_counts)
            if m_ > 0
        ]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if not pairs:
        raise ValueError("no grid point has positive prophet tail")
    worst_x, worst_ratio = min(pairs, key=lambda it: (it[1], -it[0]))
    return DominanceReport(
        gamma=gamma,
        grid=tuple(x for x, _ in pairs),
        worst_x=worst_x,
        worst_ratio=worst_ratio,
        mode=mode,
        reps=reps,
        seed=seed,
    )


# -- adversarial benchmark instances ------------------------------------------------------


def case1_instance(k: int) -> Instance:
    """Two boxes: U(1, 2), then U(0, 1) with a rare huge spike.

    The spike segment U(k^3, k^3 + 1) has weight 1/k^2, so the prophet value
    is at least k while an over-eager threshold rule settles for the first
    box.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    spike_w = 1.0 / (k * k)
    base = float(k) ** 3
    return Instance(
        (
            ValueDist.uniform(1.0, 2.0),
            ValueDist(((1.0 - spike_w, 0.0, 1.0), (spike_w, base, base + 1.0))),
        )
    )


def case2_instance(k: int, n: int) -> Instance:
    """n identical boxes U(k, k + 1): near-equal values punish low thresholds."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return Instance(tuple(ValueDist.uniform(float(k), float(k) + 1.0) for _ in range(n)))


def default_case2_boxes(k: int) -> int:
    """Integer floor of k**(1/4), clamped below at 2."""
    n = max(2, int(round(k ** 0.25)))
    while n ** 4 > k:
        n -= 1
    while (n + 1) ** 4 <= k:
        n += 1
    return max(2, n)


@dataclass(frozen=True)
class SweepRow:
    rank: int
    case1: RatioReport
    case2: RatioReport

    @property
    def min_ratio(self) -> float:
        return min(self.case1.ratio, self.case2.ratio)


def ordinal_upper_bound_sweep(
    k: int,
    ranks: Sequence[int],
    reps: int,
    seed: int,
    threads: int = 1,
) -> list[SweepRow]:
    """Per-rank minimum ratio over the two adversarial benchmark instances."""
    inst1 = case1_instance(k)
    inst2 = case2_instance(k, default_case2_boxes(k))
    rows = []
    for idx, rank in enumerate(ranks):
        r1 = semi_exact_ordinal(
            inst1, k, rank, reps, derive_seed(seed, 1, idx), threads=threads
        )
        r2 = semi_exact_ordinal(
            inst2, k, rank, reps, derive_seed(seed, 2, idx), threads=threads
        )
        rows.append(SweepRow(rank=rank, case1=r1, case2=r2))
    return rows


# -- diagnostics sweeps ---------------------------------------------------------------------


def diagnostics_sandwich_sweep(probes: int, seed: int) -> tuple[int, float]:
    """Probe random (instance, threshold) pairs against the CDF sandwich.

    Returns (violations beyond 1e-12, worst excess). Thresholds cover below,
    inside, and above the supports, including exact breakpoints, and each
    probe also exercises the loud check in threshold_diagnostics.
    """
    from .algorithms import threshold_diagnostics

    rng = np.random.Generator(np.random.Philox(key=[seed & _MASK64, 0x53414E]))
    violations = 0
    worst = -math.inf
    for _ in range(probes):
        inst = random_mixture_instance(rng)
        breaks = inst.breakpoints()
        lo, hi = breaks[0], breaks[-1]
        roll = rng.random()
        if roll < 0.2:
            t = float(breaks[rng.integers(0, len(breaks))])
        else:
            t = float(rng.uniform(lo - 1.0, hi + 1.0))
        diag = threshold_diagnostics(inst, t)
        excess = max(
            (1.0 - diag.g) - diag.f_of_t, diag.f_of_t - math.exp(-diag.g)
        )
        worst = max(worst, excess)
        if excess > 1e-12:
            violations += 1
    return violations, worst


# -- randomized instance corpora -----------------------------------------------------------

_DISCRETE_POOL = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)


def random_discrete_instance(
    rng: np.random.Generator,
    max_boxes: int = 5,
    max_support: int = 4,
    pool: Sequence[float] = _DISCRETE_POOL,
) -> Instance:
    """Small all-atoms instance; shared pool values make cross-box ties common.

    Redraws the rare all-zero-values instance, which has no prophet tail to
    compare against.
    """
    while True:
        n = int(rng.integers(1, max_boxes + 1))
        boxes = []
        for _ in range(n):
            s = int(rng.integers(1, max_support + 1))
            vals = rng.choice(np.asarray(pool, dtype=float), size=s, replace=False)
            weights = rng.random(s) + 0.05
            weights = weights / weights.sum()
            boxes.append(ValueDist(tuple((w, v, v) for w, v in zip(weights, vals))))
        inst = Instance(tuple(boxes))
        if max(inst.support_atoms()) > 0.0:
            return inst


def random_mixture_instance(
    rng: np.random.Generator,
    max_boxes: int = 5,
    max_segments: int = 3,
) -> Instance:
    """Mixture instance with heterogeneous scales and wide uniform segments."""
    n = int(rng.integers(2, max_boxes + 1))
    boxes = []
    for _ in range(n):
        segs = int(rng.integers(1, max_segments + 1))
        weights = rng.random(segs) + 0.1
        weights = weights / weights.sum()
        parts = []
        for w in weights:
            if rng.random() < 0.25:
                v = float(rng.uniform(0.0, 3.0))
                parts.append((float(w), v, v))
            else:
                lo = float(rng.uniform(0.0, 2.0))
                width = float(rng.uniform(0.5, 2.5))
                parts.append((float(w), lo, lo + width))
        boxes.append(ValueDist(tuple(parts)))
    return Instance(tuple(boxes))
