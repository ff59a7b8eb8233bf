"""Hyperbolic-time detection, frequency statistics, and contraction checks.

A time h is sigma-hyperbolic for an orbit when every trailing window of its
log ||Df^-1|| stream is dominated by the geometric budget:

    sum_{j=h-k}^{h-1} log ||Df(x_j)^-1||  <=  k log sigma   for all 1 <= k <= h.

With prefix sums T_m of the shifted stream log ||Df^-1|| - log sigma this
reads T_h <= T_m for every m < h, so one forward pass with a running minimum
finds all hyperbolic times in O(n). IEEE subtraction is monotone in its
second operand, so comparing T_h against the running minimum accepts exactly
when every windowed comparison of the exhaustive check does; the two paths
are bit-identical, which scan_naive exists to demonstrate.

Equality is broken toward rejection with a 1e-12 slack, making boundary
verdicts deterministic across summation orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .maps import MapModel
from .orbits import OrbitRecord, iterate
from .rng import substream

EQUALITY_SLACK = 1e-12


def _validate_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.0 < sigma < 1.0:
        raise ConfigError("sigma must lie in (0, 1)")
    return sigma


@dataclass
class HyperbolicTimeRecord:
    sigma: float
    n: int
    times: np.ndarray  # sorted, 1-based
    theta: float  # len(times) / n
    depths: np.ndarray  # windows verified per accepted time (all of them)

    @property
    def count(self) -> int:
        return int(self.times.size)


def _shifted_prefix(log_dfinv, sigma: float):
    a = np.asarray(log_dfinv, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ConfigError("hyperbolic-time scan needs a nonempty derivative stream")
    return np.cumsum(a - math.log(sigma))


def _eligible_horizon(n: int, flags) -> int:
    """Times whose windows reach a flagged (singular) step are rejected; the
    k = h window spans [0, h-1], so every time past the first flag is out."""
    if flags is None or len(flags) == 0:
        return n
    return min(int(j) for j in flags)


def _record(sigma: float, n: int, times: np.ndarray) -> HyperbolicTimeRecord:
    return HyperbolicTimeRecord(
        sigma=sigma, n=n, times=times, theta=times.size / n, depths=times.copy()
    )


def scan_stream(log_dfinv, sigma: float, flags=()) -> HyperbolicTimeRecord:
    """All sigma-hyperbolic times of a log ||Df^-1|| stream, in O(n)."""
    sigma = _validate_sigma(sigma)
    t = _shifted_prefix(log_dfinv, sigma)
    n = t.size
    runmin = np.minimum.accumulate(np.concatenate([[0.0], t[:-1]]))
    hit = (t - runmin) <= -EQUALITY_SLACK
    times = np.flatnonzero(hit).astype(np.int64) + 1
    horizon = _eligible_horizon(n, flags)
    return _record(sigma, n, times[times <= horizon])


def scan_naive(log_dfinv, sigma: float, flags=()) -> HyperbolicTimeRecord:
    """Exhaustive check of every window; the reference for scan_stream."""
    sigma = _validate_sigma(sigma)
    t = _shifted_prefix(log_dfinv, sigma)
    n = t.size
    prior = np.concatenate([[0.0], t[:-1]])
    times = [
        h
        for h in range(1, n + 1)
        if all(t[h - 1] - prior[m] <= -EQUALITY_SLACK for m in range(h))
    ]
    horizon = _eligible_horizon(n, flags)
    times = np.array([h for h in times if h <= horizon], dtype=np.int64)
    return _record(sigma, n, times)


def scan_hyperbolic_times(orbit: OrbitRecord, sigma: float) -> HyperbolicTimeRecord:
    return scan_stream(orbit.log_dfinv, sigma, flags=orbit.flags)


@dataclass
class FrequencyReport:
    map_name: str
    sigma: float
    n: int
    seed: int
    thetas: np.ndarray
    counts: np.ndarray
    mean: float
    pct5: float
    positive: bool  # 5th percentile > 0

    def csv_table(self):
        names = ("seed", "sigma", "n", "count", "theta")
        rows = [
            (i, self.sigma, self.n, int(self.counts[i]), f"{self.thetas[i]:.17g}")
            for i in range(self.thetas.size)
        ]
        return names, rows

    def json_summary(self) -> dict:
        return {
            "map": self.map_name,
            "sigma": self.sigma,
            "n": self.n,
            "seed": self.seed,
            "samples": int(self.thetas.size),
            "mean-theta": self.mean,
            "pct5-theta": self.pct5,
            "positive-frequency": self.positive,
        }


def ht_frequency(
    map_model: MapModel, sigma: float, n: int, samples: int = 100, seed: int = 0
) -> FrequencyReport:
    """Per-seed hyperbolic-time frequency over Lebesgue-random starts."""
    sigma = _validate_sigma(sigma)
    if n < 1 or samples < 1:
        raise ConfigError("ht_frequency needs n >= 1 and samples >= 1")
    thetas = np.empty(samples)
    counts = np.empty(samples, dtype=np.int64)
    for i in range(samples):
        orbit = iterate(map_model, None, n, seed=(seed, "ht-frequency", i))
        rec = scan_hyperbolic_times(orbit, sigma)
        thetas[i] = rec.theta
        counts[i] = rec.count
    pct5 = float(np.percentile(thetas, 5.0))
    return FrequencyReport(
        map_name=map_model.name,
        sigma=sigma,
        n=n,
        seed=seed,
        thetas=thetas,
        counts=counts,
        mean=float(thetas.mean()),
        pct5=pct5,
        positive=pct5 > 0.0,
    )


@dataclass
class MembershipReport:
    sigma: float
    n: int
    averages: dict  # checkpoint -> running Birkhoff average of log ||Df^-1||
    member: bool  # final average < log sigma

    def json_summary(self) -> dict:
        return {
            "sigma": self.sigma,
            "n": self.n,
            "averages": {str(k): v for k, v in self.averages.items()},
            "member": self.member,
        }


def expanding_membership(orbit: OrbitRecord, sigma: float) -> MembershipReport:
    """Running averages of log ||Df^-1|| at n/4, n/2, n against log sigma."""
    sigma = _validate_sigma(sigma)
    a = np.asarray(orbit.log_dfinv, dtype=float)
    n = a.size
    cs = np.cumsum(a)
    checkpoints = sorted({max(1, n // 4), max(1, n // 2), n})
    averages = {int(m): float(cs[m - 1] / m) for m in checkpoints}
    return MembershipReport(
        sigma=sigma, n=n, averages=averages, member=averages[n] < math.log(sigma)
    )


@dataclass
class ContractionReport:
    sigma: float
    h: int
    delta: float | None  # ball radius actually used; None when inconclusive
    max_ratio: float  # worst d(y_k, z_k) / (sigma^{k/2} d(y_0, z_0)), k = 0..h
    pairs: int
    inconclusive: bool
    skipped_deltas: tuple = ()


def _interval_hits(lo: float, hi: float, points) -> bool:
    return any(lo <= s <= hi for s in points)


def contraction_check(
    map_model: MapModel,
    orbit: OrbitRecord,
    h: int,
    sigma: float,
    delta_ladder=(0.1, 0.05, 0.01),
    pairs: int = 1000,
    seed: int = 0,
) -> ContractionReport:
    """Backward contraction of a ball at a hyperbolic time.

    Samples point pairs in B(f^h(x), delta), pulls them back through the
    orbit's branch word, and compares each depth-k distance against
    sigma^{k/2} times the base distance. The guaranteed radius is existential,
    so the ladder descends until a delta works: the ball must avoid the wrap
    cut, every pulled-back interval must clear the map's singular points, and
    every sampled pair must satisfy the bound. When no rung qualifies the
    result is flagged inconclusive.
    """
    sigma = _validate_sigma(sigma)
    if not 1 <= h <= orbit.n:
        raise ConfigError("h must lie in 1..n")
    rec = scan_stream(orbit.log_dfinv[:h], sigma)
    if h not in rec.times:
        raise ConfigError(f"{h} is not a verified {sigma}-hyperbolic time of this orbit")
    center = float(orbit.points[h]) if h < orbit.n else orbit.end.to_float()
    word = [int(b) for b in orbit.symbols[:h]]
    skipped = []
    last_deep = float("nan")
    for delta in delta_ladder:
        delta = float(delta)
        lo, hi = center - delta, center + delta
        if lo < 0.0 or hi > 1.0:  # ball tears at the wrap cut
            skipped.append(delta)
            continue
        ok = True
        plo, phi = lo, hi
        for b in reversed(word):
            plo = float(map_model.inverse_float(b, np.array([plo]))[0])
            phi = float(map_model.inverse_float(b, np.array([phi]))[0])
            if _interval_hits(plo, phi, map_model.singular_points):
                ok = False
                break
        if not ok:
            skipped.append(delta)
            continue
        rng = substream(seed, "contraction", h)
        u = rng.random((pairs, 2))
        ys = lo + (hi - lo) * u[:, 0]
        zs = lo + (hi - lo) * u[:, 1]
        base = np.abs(ys - zs)
        keep = base > 0.0
        ys, zs, base = ys[keep], zs[keep], base[keep]
        deep = 0.0  # worst pullback ratio over depths k >= 1
        for k in range(1, h + 1):
            b = word[h - k]
            ys = map_model.inverse_float(b, ys)
            zs = map_model.inverse_float(b, zs)
            ratios = np.abs(ys - zs) / (sigma ** (k / 2.0) * base)
            deep = max(deep, float(ratios.max()))
        last_deep = deep
        if deep <= 1.0 + 1e-9:
            return ContractionReport(
                sigma=sigma,
                h=h,
                delta=delta,
                max_ratio=max(1.0, deep),  # k = 0 contributes the identity ratio
                pairs=int(base.size),
                inconclusive=False,
                skipped_deltas=tuple(skipped),
            )
        skipped.append(delta)
    return ContractionReport(
        sigma=sigma,
        h=h,
        delta=None,
        max_ratio=last_deep,
        pairs=0,
        inconclusive=True,
        skipped_deltas=tuple(skipped),
    )
