"""Finite integer-support distributions and the distance/tail toolkit.

CountDist is a dense pmf over consecutive integers. Binomial pmfs are computed
in log space with log-gamma so n up to 1e6 stays accurate; normal CDF values
go through scipy's erf-based ndtr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, ndtr

_MASS_TOL = 1e-10


@dataclass(frozen=True)
class CountDist:
    """Distribution over consecutive integers starting at ``offset``."""

    offset: int
    masses: np.ndarray

    def __post_init__(self) -> None:
        masses = np.asarray(self.masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a nonempty 1-d array")
        if np.any(masses < -1e-15):
            raise ValueError("masses must be nonnegative")
        total = float(np.sum(masses))
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1")
        masses = np.maximum(masses, 0.0)
        masses.setflags(write=False)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "masses", masses)

    @property
    def upper(self) -> int:
        """Largest support point."""
        return self.offset + len(self.masses) - 1

    def pmf(self, i: int) -> float:
        j = i - self.offset
        if 0 <= j < len(self.masses):
            return float(self.masses[j])
        return 0.0

    def pmf_on(self, lo: int, hi: int) -> np.ndarray:
        """Dense pmf over the inclusive integer range [lo, hi]."""
        out = np.zeros(hi - lo + 1)
        a = max(lo, self.offset)
        b = min(hi, self.upper)
        if a <= b:
            out[a - lo : b - lo + 1] = self.masses[a - self.offset : b - self.offset + 1]
        return out

    def mean(self) -> float:
        idx = np.arange(self.offset, self.upper + 1, dtype=float)
        return float(np.sum(idx * self.masses))

    def expectation_of(self, values: np.ndarray) -> float:
        """Sum of masses[i] * values[i] over the support (values aligned to it)."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.masses.shape:
            raise ValueError("values must align with the support")
        return float(np.sum(self.masses * values))


def point_mass(value: int) -> CountDist:
    return CountDist(value, np.array([1.0]))


def binom_pmf_rows(n: int, ps: np.ndarray) -> np.ndarray:
    """Row r holds the Bin(n, ps[r]) pmf over {0..n}; log-space, renormalized."""
    ps = np.asarray(ps, dtype=float)
    i = np.arange(n + 1, dtype=float)
    lg = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    rows = np.zeros((len(ps), n + 1))
    interior = (ps > 0.0) & (ps < 1.0)
    if np.any(interior):
        pi = ps[interior][:, None]
        rows[interior] = np.exp(
            lg[None, :] + i[None, :] * np.log(pi) + (n - i)[None, :] * np.log1p(-pi)
        )
    rows[ps == 0.0, 0] = 1.0
    rows[ps == 1.0, n] = 1.0
    return rows / rows.sum(axis=1, keepdims=True)


def binom(n: int, p: float) -> CountDist:
    """Exact binomial pmf over {0..n}, renormalized after log-space evaluation."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if n == 0 or p == 0.0:
        return point_mass(0)
    if p == 1.0:
        return point_mass(n)
    return CountDist(0, binom_pmf_rows(n, np.array([p]))[0])


def convolve(a: CountDist, b: CountDist) -> CountDist:
    """Distribution of the independent sum."""
    return CountDist(a.offset + b.offset, np.convolve(a.masses, b.masses))


def sum_of_binomials(specs: Sequence[tuple[int, float]]) -> CountDist:
    """Left-fold of convolve over binom(n_i, p_i)."""
    if not specs:
        raise ValueError("need at least one (n, p) spec")
    out = binom(*specs[0])
    for n, p in specs[1:]:
        out = convolve(out, binom(n, p))
    return out


@dataclass(frozen=True)
class NormalSpec:
    mu: float
    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def _normal_bin_masses(spec: NormalSpec, lo: int, hi: int) -> np.ndarray:
    """Mass of [i - 0.5, i + 0.5] per integer bin, tails not yet folded."""
    edges = np.arange(lo, hi + 2, dtype=float) - 0.5
    cdf = ndtr((edges - spec.mu) / spec.sigma)
    return np.diff(cdf)


def discretized_normal(spec: NormalSpec, lo: int, hi: int) -> CountDist:
    """Normal rounded to integer bins on [lo, hi], exterior tails folded in."""
    if hi < lo:
        raise ValueError("hi must be >= lo")
    masses = _normal_bin_masses(spec, lo, hi)
    left_tail = float(ndtr((lo - 0.5 - spec.mu) / spec.sigma))
    right_tail = float(1.0 - ndtr((hi + 0.5 - spec.mu) / spec.sigma))
    masses = masses.copy()
    masses[0] += left_tail
    masses[-1] += right_tail
    return CountDist(lo, masses / masses.sum())


# -- distances -----------------------------------------------------------------


def tv_distance(a: CountDist, b: CountDist) -> float:
    """Total variation distance: half the L1 gap, the sup-over-events value."""
    lo = min(a.offset, b.offset)
    hi = max(a.upper, b.upper)
    return float(0.5 * np.abs(a.pmf_on(lo, hi) - b.pmf_on(lo, hi)).sum())


def tv_binom_vs_normal(n: int, p: float) -> float:
    """Unhalved L1 gap between Bin(n, p) and its bin-rounded matching normal.

    This is the full-line sum: integer bins on [0, n] plus the normal mass
    falling outside them (where the binomial pmf is zero). Note the missing
    1/2 relative to tv_distance; both conventions are deliberate.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    spec = NormalSpec(mu=n * p, sigma2=n * p * (1.0 - p))
    bin_masses = binom(n, p).masses
    norm_masses = _normal_bin_masses(spec, 0, n)
    core = float(np.abs(bin_masses - norm_masses).sum())
    left_tail = float(ndtr((-0.5 - spec.mu) / spec.sigma))
    right_tail = float(1.0 - ndtr((n + 0.5 - spec.mu) / spec.sigma))
    return core + left_tail + right_tail


def tv_same_mean_normals(s1: NormalSpec, s2: NormalSpec) -> float:
    """Exact TV distance between two same-mean normals.

    The densities cross at mu +/- t with t^2 = 2 ln(s_hi/s_lo) * s_lo^2 s_hi^2
    / (s_hi^2 - s_lo^2); integrating between the crossings gives
    2 * (Phi(t/s_lo) - Phi(t/s_hi)).
    """
    if s1.mu != s2.mu:
        raise ValueError("means must match")
    if s1.sigma2 == s2.sigma2:
        return 0.0
    lo, hi = sorted((s1.sigma, s2.sigma))
    t2 = 2.0 * math.log(hi / lo) * (lo * lo * hi * hi) / (hi * hi - lo * lo)
    t = math.sqrt(t2)
    return float(2.0 * (ndtr(t / lo) - ndtr(t / hi)))


# -- tail verification -----------------------------------------------------------


@dataclass(frozen=True)
class ChernoffReport:
    mu: float
    delta: float
    empirical: float
    bound: float
    stderr: float
    reps: int
    passed: bool


def chernoff_check(
    ps: Sequence[float], delta: float, reps: int, rng: np.random.Generator
) -> ChernoffReport:
    """Empirical two-sided tail of a Bernoulli sum against 2 exp(-delta^2 mu / 3).

    Passes when the observed frequency of |X - mu| >= delta * mu is below the
    bound plus three Monte Carlo standard errors.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if reps < 10_000:
        raise ValueError("reps must be >= 10000")
    ps = np.asarray(ps, dtype=float)
    if np.any((ps < 0.0) | (ps > 1.0)):
        raise ValueError("Bernoulli parameters must be in [0, 1]")
    mu = float(ps.sum())
    totals = np.zeros(reps)
    values, counts = np.unique(ps, return_counts=True)
    for p, cnt in zip(values, counts):
        if p == 0.0:
            continue
        totals += rng.binomial(int(cnt), p, size=reps)
    gap = np.abs(totals - mu)
    hits = gap >= delta * mu if mu > 0.0 else gap > 0.0
    empirical = float(hits.mean())
    bound = 2.0 * math.exp(-delta * delta * mu / 3.0)
    stderr = math.sqrt(max(empirical * (1.0 - empirical), 1.0 / reps) / reps)
    return ChernoffReport(
        mu=mu,
        delta=delta,
        empirical=empirical,
        bound=bound,
        stderr=stderr,
        reps=reps,
        passed=empirical <= bound + 3.0 * stderr,
    )
