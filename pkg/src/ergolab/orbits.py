"""Orbit generation and dynamical-ball geometry.

iterate() runs the exact point arithmetic and records float64 samples plus
the derivative streams log||Df^-1|| and log|det Df| (entry j evaluated at
f^j(x), exactly n entries). Steps whose derivative data is non-finite
(singular-point hits) are flagged, not fatal.

dyn_ball() computes the connected component of {y : d(f^j x, f^j y) <= delta,
j < n} containing x by pulling the delta-interval at f^(n-1)(x) back through
the orbit's branch word in 128-bit integer arithmetic, intersecting with the
delta-ball at every level. If an intermediate interval strictly contains a
branch cut the pullback stops being the exact component; the ball is returned
with boundary_level set so callers (the Gibbs certifier) can truncate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .fixedpoint import FRAC_BITS, HALF, ONE, CirclePoint, TorusPoint
from .maps import LOG2, MapModel
from .rng import substream


@dataclass
class OrbitRecord:
    map_name: str
    map_params: dict
    n: int
    seed: int | None
    start: object
    end: object
    points: np.ndarray  # (n,) or (n, 2) float64 samples of x, f(x), ...
    log_dfinv: np.ndarray
    log_det: np.ndarray
    symbols: np.ndarray  # branch index of each sample, int8
    flags: list = field(default_factory=list)

    def __len__(self):
        return self.n


def _resolve_point(map_model: MapModel, x, seed):
    """Starting point policy: CirclePoints pass through verbatim; floats and
    Fractions are exact without a seed and trailing-bit dithered with one;
    None draws a Lebesgue-random point from the seed substream."""
    if map_model.dimension == 2:
        comps = getattr(map_model, "components")
        if x is None:
            xs = (None, None)
        elif isinstance(x, (tuple, TorusPoint)) and len(x) == 2:
            xs = tuple(x)
        else:
            raise ConfigError("product maps need a coordinate pair or None")
        return TorusPoint(
            _resolve_point(comps[0], xs[0], None if seed is None else (seed, 0)),
            _resolve_point(comps[1], xs[1], None if seed is None else (seed, 1)),
        )
    if isinstance(x, CirclePoint):
        return x
    if x is None:
        if seed is None:
            raise ConfigError("a random starting point needs a seed")
        labels = seed if isinstance(seed, tuple) else (seed,)
        return CirclePoint.random(substream(labels[0], "start", *labels[1:]))
    if isinstance(x, Fraction):
        return CirclePoint.from_fraction(x.numerator, x.denominator)
    xf = float(x)
    if seed is None:
        return CirclePoint.from_float(xf)
    labels = seed if isinstance(seed, tuple) else (seed,)
    return CirclePoint.dithered(xf, substream(labels[0], "start", *labels[1:]))


def _iterate_shift(map_model: MapModel, p: CirclePoint, n: int, seed) -> OrbitRecord:
    """Bit-shift maps: the whole orbit is a sliding window over one bit stream,
    so samples, symbols and the end point come out of one vectorized pass."""
    tail_bytes = n // 8 + 16
    tb, _ = p.tail.take_bytes(tail_bytes)
    stream = p.frac.to_bytes(16, "big") + tb
    arr = np.frombuffer(stream, dtype=np.uint8)
    cols = np.lib.stride_tricks.sliding_window_view(arr, 8).astype(np.uint64)
    shifts = (np.uint64(8) * np.arange(7, -1, -1, dtype=np.uint64))[None, :]
    w64 = (cols << shifts).sum(axis=1, dtype=np.uint64)
    idx = np.arange(n, dtype=np.int64)
    q = idx >> 3
    r = (idx & 7).astype(np.uint64)
    w = w64[q]
    # bits [j, j+64) of the stream; uint64 -> float64 conversion rounds to
    # nearest, matching the window rounding of to_float to the last ulp
    nxt = arr[q + 8].astype(np.uint64)
    full = (w << r) | (nxt >> (np.uint64(8) - r))
    # near-1 windows can round up to 1.0 in the conversion; keep samples in [0,1)
    pts = np.minimum(full.astype(np.float64) * 2.0**-64, np.nextafter(1.0, 0.0))
    syms = (w >> (np.uint64(63) - r)).astype(np.int8) & np.int8(1)
    q, s = divmod(n, 8)
    frac_end = (int.from_bytes(stream[q : q + 17], "big") >> (8 - s)) & (ONE - 1)
    ldet = np.full(n, LOG2)
    ldf = np.full(n, -LOG2)
    return OrbitRecord(
        map_name=map_model.name,
        map_params=dict(map_model.params),
        n=n,
        seed=seed,
        start=p,
        end=CirclePoint(frac_end, p.tail.drop(n)),
        points=pts,
        log_dfinv=ldf,
        log_det=ldet,
        symbols=syms,
        flags=[],
    )


def iterate(map_model: MapModel, x, n: int, seed: int | None = None) -> OrbitRecord:
    """n-step orbit record; deterministic given (map, x, n, seed)."""
    if n < 1:
        raise ConfigError("orbit length must be >= 1")
    p = _resolve_point(map_model, x, seed)
    if map_model.bit_shift and map_model.dimension == 1:
        return _iterate_shift(map_model, p, n, seed)
    dim = map_model.dimension
    pts = np.empty((n, dim) if dim == 2 else n, dtype=float)
    ldf = np.empty(n, dtype=float)
    ldet = np.empty(n, dtype=float)
    syms = np.empty(n, dtype=np.int8)
    flags: list[int] = []
    start = p
    for j in range(n):
        if dim == 2:
            xf = p.to_floats()
            pts[j, 0], pts[j, 1] = xf
        else:
            xf = p.to_float()
            pts[j] = xf
        a = map_model.log_det(xf)
        b = map_model.deriv_norm_inv(xf)
        ldet[j] = a
        ldf[j] = math.log(b) if b > 0.0 else math.inf
        syms[j] = map_model.branch_index(xf)
        if not (math.isfinite(ldet[j]) and math.isfinite(ldf[j])):
            flags.append(j)
        p = map_model.eval(p)
    return OrbitRecord(
        map_name=map_model.name,
        map_params=dict(map_model.params),
        n=n,
        seed=seed,
        start=start,
        end=p,
        points=pts,
        log_dfinv=ldf,
        log_det=ldet,
        symbols=syms,
        flags=flags,
    )


@dataclass
class DynBall:
    """1D dynamical ball as an un-wrapped window-integer interval [lo, hi]."""

    n: int
    delta: float
    lo: int
    hi: int
    boundary_level: int | None = None

    @property
    def exact(self) -> bool:
        return self.boundary_level is None

    def length(self) -> float:
        return float(Fraction(self.hi - self.lo, ONE))

    def bounds_float(self) -> tuple[float, float]:
        return (float(Fraction(self.lo, ONE)), float(Fraction(self.hi, ONE)))

    def contains_frac(self, w: int) -> bool:
        for k in (-ONE, 0, ONE):
            if self.lo <= w + k <= self.hi:
                return True
        return False


@dataclass
class DynBox:
    """2D dynamical ball for product maps (max metric): coordinate intervals."""

    x: DynBall
    y: DynBall

    @property
    def exact(self) -> bool:
        return self.x.exact and self.y.exact

    def mass_lebesgue(self) -> float:
        return self.x.length() * self.y.length()


def _cut_inside(lo: int, hi: int, cuts=(0, HALF)) -> bool:
    for c in cuts:
        k = ((lo - c) // ONE + 1) * ONE + c
        if lo < k < hi:
            return True
    return False


def dyn_ball(map_model: MapModel, x, n: int, delta: float, seed=None):
    """Connected component of the (n, delta) dynamical ball containing x."""
    if delta <= 0.0 or n < 1:
        raise ConfigError("dyn_ball needs delta > 0 and n >= 1")
    if delta >= 0.25:
        raise ConfigError("delta must be below the branch injectivity scale 1/4")
    if map_model.dimension == 2:
        p = _resolve_point(map_model, x, seed)
        mx, my = map_model.components
        return DynBox(dyn_ball(mx, p.x, n, delta), dyn_ball(my, p.y, n, delta))

    p = _resolve_point(map_model, x, seed)
    d = round(delta * ONE)
    windows = []
    syms = []
    q = p
    for _ in range(n):
        w = q.frac
        windows.append(w)
        syms.append(map_model.branch_index_frac(w))
        q = map_model.eval(q)

    boundary = None
    lo, hi = windows[n - 1] - d, windows[n - 1] + d
    if _cut_inside(lo, hi):
        boundary = n - 1
    for j in range(n - 1, 0, -1):
        # normalize to [0, ONE] before applying the increasing branch inverse
        shift = (lo // ONE) * ONE
        lo_n, hi_n = lo - shift, hi - shift
        if hi_n > ONE:  # interior cut already flagged; clamp for the pullback
            hi_n = ONE
        b = syms[j - 1]
        plo = map_model.inverse_frac(b, lo_n)
        phi = map_model.inverse_frac(b, hi_n)
        v = windows[j - 1]
        lo = max(v - d, min(plo, v))
        hi = min(v + d, max(phi, v))
        if boundary is None and _cut_inside(lo, hi):
            boundary = j - 1
    return DynBall(n=n, delta=delta, lo=lo, hi=hi, boundary_level=boundary)
