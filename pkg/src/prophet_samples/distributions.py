"""Box value distributions, online instances, and pooled sample sets.

A box's value distribution is a finite mixture of uniform segments; a segment
with ``lo == hi`` is an atom. This family is closed under everything the
benchmark suite needs: point masses, scaled Bernoullis, shifted uniforms, and
rare-spike mixtures. All arithmetic is plain binary64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
from numpy.polynomial.legendre import leggauss

WEIGHT_TOL = 1e-12


@lru_cache(maxsize=128)
def _gauss_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(count)
    return nodes, weights


def gauss_legendre_integral(func, lo: float, hi: float, nodes: int) -> float:
    """Integrate func over [lo, hi] with a fixed Gauss-Legendre rule.

    Exact for polynomials of degree <= 2*nodes - 1, which is how the exact
    evaluators avoid Monte Carlo noise.
    """
    if hi <= lo:
        return 0.0
    x, w = _gauss_nodes(nodes)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return float(half * np.sum(w * func(mid + half * x)))


@dataclass(frozen=True)
class ValueDist:
    """Finite mixture of uniform segments ``(weight, lo, hi)``.

    Segments are stored sorted by ``(lo, hi)``. Weights must be in [0, 1] and
    sum to 1 within 1e-12; all bounds are finite and nonnegative.
    """

    segments: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        segs = tuple(
            sorted(
                ((float(w), float(lo), float(hi)) for w, lo, hi in self.segments),
                key=lambda s: (s[1], s[2]),
            )
        )
        if not segs:
            raise ValueError("distribution needs at least one segment")
        total = 0.0
        for w, lo, hi in segs:
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"segment weight {w} outside [0, 1]")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"segment bounds ({lo}, {hi}) must be finite")
            if lo < 0.0:
                raise ValueError(f"segment lower bound {lo} is negative")
            if hi < lo:
                raise ValueError(f"segment bounds ({lo}, {hi}) are inverted")
            total += w
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"segment weights sum to {total!r}, expected 1")
        object.__setattr__(self, "segments", segs)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def atom(value: float) -> "ValueDist":
        return ValueDist(((1.0, value, value),))

    @staticmethod
    def uniform(lo: float, hi: float) -> "ValueDist":
        return ValueDist(((1.0, lo, hi),))

    @staticmethod
    def discrete(masses: Mapping[float, float]) -> "ValueDist":
        """All-atoms distribution from a value -> probability mapping."""
        return ValueDist(tuple((p, v, v) for v, p in masses.items()))

    # -- structure ---------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return all(lo == hi for _, lo, hi in self.segments)

    def atoms(self) -> dict[float, float]:
        """Atom value -> mass (zero-width segments only)."""
        out: dict[float, float] = {}
        for w, lo, hi in self.segments:
            if lo == hi:
                out[lo] = out.get(lo, 0.0) + w
        return out

    def breakpoints(self) -> list[float]:
        pts = {lo for _, lo, _ in self.segments} | {hi for _, _, hi in self.segments}
        return sorted(pts)

    def support_max(self) -> float:
        return max(hi for _, _, hi in self.segments)

    def support_min(self) -> float:
        return min(lo for _, lo, _ in self.segments)

    # -- exact functionals ---------------------------------------------------

    def cdf(self, x):
        """Right-continuous CDF; accepts scalars or arrays."""
        arr = np.asarray(x, dtype=float)
        out = np.zeros_like(arr)
        for w, lo, hi in self.segments:
            if lo == hi:
                out += w * (arr >= lo)
            else:
                out += w * np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def mass_at(self, x):
        """Atom mass exactly at x (0 for interior of intervals)."""
        arr = np.asarray(x, dtype=float)
        out = np.zeros_like(arr)
        for w, lo, hi in self.segments:
            if lo == hi:
                out += w * (arr == lo)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, x):
        """Left limit Pr[v < x]."""
        arr = np.asarray(x, dtype=float)
        out = self.cdf(arr) - self.mass_at(arr)
        return float(out) if np.ndim(out) == 0 else out

    def tail_expectation(self, t):
        """E[v * 1{v > t}], exact closed form per segment."""
        arr = np.asarray(t, dtype=float)
        out = np.zeros_like(arr)
        for w, lo, hi in self.segments:
            if lo == hi:
                out += w * lo * (arr < lo)
            else:
                cut = np.clip(arr, lo, hi)
                out += w * (hi * hi - cut * cut) / (2.0 * (hi - lo))
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return math.fsum(w * 0.5 * (lo + hi) for w, lo, hi in self.segments)

    # -- sampling ------------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> float:
        """One draw. Consumes exactly two uniforms (segment pick, position)."""
        u = rng.random()
        pos = rng.random()
        acc = 0.0
        for w, lo, hi in self.segments:
            acc += w
            if u <= acc or (w, lo, hi) == self.segments[-1]:
                return lo + (hi - lo) * pos
        return self.segments[-1][1]

    def sample_many(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Vectorized draws with a fixed (choice, position) call pattern."""
        weights = np.array([w for w, _, _ in self.segments])
        los = np.array([lo for _, lo, _ in self.segments])
        his = np.array([hi for _, _, hi in self.segments])
        if len(self.segments) == 1:
            idx = np.zeros(shape, dtype=np.intp)
        else:
            idx = rng.choice(len(self.segments), size=shape, p=weights / weights.sum())
        pos = rng.random(shape)
        return los[idx] + (his[idx] - los[idx]) * pos


@dataclass(frozen=True)
class Instance:
    """Ordered sequence of independent boxes; order is the arrival order."""

    boxes: tuple[ValueDist, ...]

    def __post_init__(self) -> None:
        boxes = tuple(self.boxes)
        if not boxes:
            raise ValueError("instance needs at least one box")
        object.__setattr__(self, "boxes", boxes)

    @property
    def n(self) -> int:
        return len(self.boxes)

    @property
    def has_atoms(self) -> bool:
        return any(not all(lo < hi for _, lo, hi in b.segments) for b in self.boxes)

    @property
    def is_discrete(self) -> bool:
        return all(b.is_discrete for b in self.boxes)

    def breakpoints(self) -> list[float]:
        pts: set[float] = set()
        for b in self.boxes:
            pts.update(b.breakpoints())
        return sorted(pts)

    def support_atoms(self) -> list[float]:
        vals: set[float] = set()
        for b in self.boxes:
            vals.update(b.atoms())
        return sorted(vals)

    def product_cdf(self, x):
        """CDF of the maximum: product of the per-box CDFs."""
        arr = np.asarray(x, dtype=float)
        out = np.ones_like(arr)
        for b in self.boxes:
            out = out * b.cdf(arr)
        return float(out) if out.ndim == 0 else out

    def max_exceedance(self, x):
        """Pr[max_i v_i >= x] = 1 - prod_i Pr[v_i < x]."""
        arr = np.asarray(x, dtype=float)
        out = np.ones_like(arr)
        for b in self.boxes:
            out = out * b.cdf_left(arr)
        res = 1.0 - out
        return float(res) if np.ndim(res) == 0 else res

    def prophet_expectation(self) -> float:
        """Exact E[max_i v_i] as the integral of 1 - prod F_i.

        Between consecutive breakpoints every per-box CDF is linear, so the
        integrand is a polynomial of degree <= n; ceil((n+1)/2) Gauss nodes
        integrate it exactly.
        """
        pts = [0.0] + [p for p in self.breakpoints() if p > 0.0]
        nodes = (self.n + 2) // 2
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            total += gauss_legendre_integral(
                lambda x: 1.0 - self.product_cdf(x), a, b, nodes
            )
        return total

    def sample_values(self, rng: np.random.Generator) -> np.ndarray:
        """One realized value per box, in arrival order."""
        return np.array([b.sample(rng) for b in self.boxes])


@dataclass(frozen=True)
class SampleSet:
    """Pooled multiset of k samples per box, stripped of box identities."""

    values: tuple[float, ...]
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        vals = tuple(sorted((float(v) for v in self.values), reverse=True))
        if len(vals) % self.k != 0:
            raise ValueError(f"sample count {len(vals)} is not a multiple of k={self.k}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def occurrences(self, x: float) -> int:
        """Exact multiset count of x."""
        return sum(1 for v in self.values if v == x)


def draw_sample_set(inst: Instance, k: int, rng: np.random.Generator) -> SampleSet:
    """k independent draws per box, pooled without identities."""
    if k < 1:
        raise ValueError("k must be >= 1")
    vals: list[float] = []
    for b in inst.boxes:
        vals.extend(b.sample_many(rng, k).tolist())
    return SampleSet(tuple(vals), k)


# -- JSON interchange --------------------------------------------------------
# Instance description file: {"boxes": [{"segments": [[w, lo, hi], ...]}, ...]}


def instance_to_json(inst: Instance) -> dict:
    return {"boxes": [{"segments": [list(s) for s in b.segments]} for b in inst.boxes]}


def instance_from_json(obj: Mapping) -> Instance:
    try:
        boxes = obj["boxes"]
    except (KeyError, TypeError):
        raise ValueError("instance JSON must contain a 'boxes' array") from None
    dists = []
    for i, box in enumerate(boxes):
        try:
            segs = box["segments"]
        except (KeyError, TypeError):
            raise ValueError(f"box {i} must contain a 'segments' array") from None
        dists.append(ValueDist(tuple((s[0], s[1], s[2]) for s in segs)))
    return Instance(tuple(dists))


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(json.load(fh))


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_json(inst), fh, indent=2)
        fh.write("\n")
