"""Combinatorial pressure and entropy, local entropy, and the Pesin defect.

Separated-set pressure on the doubling map has an exact path: the dynamical
metric d_n is translation invariant there and its epsilon-ball at 0 is the
single interval [-eps 2^{1-n}, eps 2^{1-n}], so a set is (n,eps)-separated
iff pairwise base distances exceed r = eps 2^{1-n}. Maximal sets are uniform
grids with ceil(1/r)-1 points, and the ladder values are exactly linear in
1/n, which the declared extrapolation rule recovers without bias.

Other full-branch maps go through a greedy sweep over an adaptive grid: the
depth-n cylinder partition is bisected metrically until every piece has
d_n-diameter at most eps/2, so piece midpoints form a grid of d_n-pitch
eps/2 and the greedy scan returns a maximal separated set over it. Metric
bisection (rather than deeper cylinder refinement) keeps the grid near
2^n/eps points even when a neutral fixed point slows cylinder contraction
to a polynomial rate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, UnsupportedError
from .fixedpoint import ONE, CirclePoint
from .maps import LOG2, MapModel
from .measures import EmpiricalMeasure, UlamMeasure, partition_entropy, pushforward
from .orbits import dyn_ball
from .potentials import Potential, make_potential
from .transfer import conformal_solve

MAX_EXACT_GRID = 1 << 24
MAX_LEAVES = 1 << 22


def _fit_top_half(ns, values):
    """Least-squares v = P + c/n over the top half of the n ladder."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    top = len(ns) // 2
    xs, ys = 1.0 / ns[top:], values[top:]
    if xs.size < 2:
        warnings.warn("n ladder too coarse to extrapolate; reporting the deepest value")
        return float(ys[-1]), float("inf")
    A = np.vstack([np.ones_like(xs), xs]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    fit = A @ coef
    resid = float(np.abs(fit - ys).max())
    # leave-one-out intercept spread as the uncertainty proxy
    if xs.size >= 3:
        intercepts = []
        for k in range(xs.size):
            m = np.ones(xs.size, dtype=bool)
            m[k] = False
            c, *_ = np.linalg.lstsq(A[m], ys[m], rcond=None)
            intercepts.append(c[0])
        spread = float(np.ptp(intercepts))
    else:
        spread = abs(float(coef[1])) / ns[-1]
    return float(coef[0]), resid + spread


@dataclass
class PressureEstimate:
    method: str  # "separated" | "spectral"
    eps_ladder: tuple
    n_ladder: tuple
    values: np.ndarray  # shape (len(eps), len(n)); (1/n) log sum e^{S_n phi}
    value: float
    uncertainty: float
    counts: np.ndarray | None = None  # separated-set cardinalities, same shape

    def json_summary(self) -> dict:
        return {
            "method": self.method,
            "eps-ladder": list(self.eps_ladder),
            "n-ladder": list(self.n_ladder),
            "values": [[float(v) for v in row] for row in np.atleast_2d(self.values)],
            "value": self.value,
            "uncertainty": self.uncertainty,
        }


@dataclass
class EntropyEstimate:
    eps_ladder: tuple
    n_ladder: tuple
    values: np.ndarray
    value: float
    uncertainty: float
    spanning_counts: np.ndarray
    separated_counts: np.ndarray


@dataclass
class LocalEntropyEstimate:
    delta_ladder: tuple
    n_ladder: tuple
    values: np.ndarray  # shape (len(delta), len(n)); -(1/n) log nu(B)
    value: float
    uncertainty: float
    variance_flags: np.ndarray  # bool, same shape
    boundary_flags: np.ndarray  # bool, same shape


def _exact_separation_radius(eps: float, n: int) -> float:
    return eps * 2.0 ** (1 - n)


def _exact_counts(eps: float, n: int):
    r = _exact_separation_radius(eps, n)
    k_sep = math.ceil(1.0 / r) - 1
    k_span = math.ceil(1.0 / (2.0 * r))
    return k_sep, k_span


def _exact_separated_value(map_model: MapModel, potential: Potential, n: int, eps: float):
    k_sep, _ = _exact_counts(eps, n)
    if k_sep > MAX_EXACT_GRID:
        raise ConfigError(
            f"exact separated grid needs {k_sep} points at (n={n}, eps={eps}); shrink the ladder"
        )
    best = -math.inf
    for offset in (0.0, 0.5):
        x = (np.arange(k_sep) + offset) / k_sep
        s = np.zeros(k_sep)
        for _ in range(n):
            s += potential(x)
            x = map_model.eval_float(x)
        best = max(best, float(logsumexp(s)))
    return best / n, k_sep


def _orbit_matrix(map_model: MapModel, xs: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((xs.size, n))
    cur = xs.copy()
    for j in range(n):
        out[:, j] = cur
        cur = map_model.eval_float(cur)
    return out


def _image_gaps(lo: np.ndarray, ro: np.ndarray) -> np.ndarray:
    """Per-level image lengths of intervals from their endpoint orbits.

    Every tracked interval sits inside one depth-n cylinder, so each of its
    first n images is an interval of length at most 1/2 (one branch cell) and
    the circle difference of the endpoint orbits recovers it. A right endpoint
    whose orbit hits a branch cut reads 0 where the left-limit is 1; the two
    agree mod 1, and values pushed just past 1 by rounding fold back to ~0-.
    """
    g = (ro - lo) % 1.0
    return np.where(g > 0.875, g - 1.0, g)


def _cylinder_leaves(map_model: MapModel, n: int, eps: float):
    """Sorted grid of points with d_n-pitch at most eps/2.

    Depth-n cylinder endpoints (the preimage tree of 0) seed the grid; every
    interval whose worst image length over the first n iterates exceeds eps/2
    is bisected at its metric midpoint, with the midpoint orbit computed to
    split the endpoint-orbit bookkeeping. Metric bisection keeps the leaf
    count near (2^n)/eps even when a neutral fixed point makes cylinder
    refinement arbitrarily deep.
    """
    target = eps / 2.0
    pts = np.array([0.0])
    for _ in range(n):
        pts = np.concatenate(
            [map_model.inverse_float(0, pts), map_model.inverse_float(1, pts)]
        )
    pts = np.sort(pts)
    u = pts
    v = np.roll(pts, -1)
    v[-1] = 1.0
    lo = _orbit_matrix(map_model, pts, n)
    ro = np.roll(lo, -1, axis=0)
    leaves = []
    total = 0
    for _ in range(200):
        done = _image_gaps(lo, ro).max(axis=1) <= target
        if done.any():
            leaves.append(0.5 * (u[done] + v[done]))
            total += leaves[-1].size
        live = ~done
        if not live.any():
            return np.sort(np.concatenate(leaves))
        u, v, lo, ro = u[live], v[live], lo[live], ro[live]
        if total + 2 * u.size > MAX_LEAVES:
            raise ConfigError("grid refinement exceeded the leaf budget; coarsen the ladder")
        m = 0.5 * (u + v)
        mo = _orbit_matrix(map_model, m, n)
        u, v = np.concatenate([u, m]), np.concatenate([m, v])
        lo, ro = np.vstack([lo, mo]), np.vstack([mo, ro])
    raise ConfigError("grid refinement failed to terminate")


def _circle_gap(u: np.ndarray) -> np.ndarray:
    u = np.abs(u)
    return np.minimum(u, 1.0 - u)


def _greedy_sweep(orbits: np.ndarray, xs: np.ndarray, eps: float):
    """Left-to-right maximal (n, eps)-separated subset of the candidates.

    A pair separated at any single level is separated in d_n, so accepted
    points are indexed by eps-buckets of their level-0 and level-(n-1)
    positions; a candidate is compared only against the 3x3 neighborhood,
    the points that could be eps-close at both of those levels.
    """
    n = orbits.shape[1]
    nb = max(int(math.ceil(1.0 / eps)), 1)
    k0 = np.minimum((xs / eps).astype(np.int64), nb - 1)
    kn = np.minimum((orbits[:, n - 1] / eps).astype(np.int64), nb - 1)
    buckets: dict = {}
    accepted: list = []
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)]
    for i in range(xs.shape[0]):
        cand: list = []
        for d0, dn in offsets:
            cand += buckets.get(((k0[i] + d0) % nb, (kn[i] + dn) % nb), ())
        if cand:
            gap = _circle_gap(orbits[cand] - orbits[i]).max(axis=1)
            if gap.min() <= eps:
                continue
        accepted.append(i)
        buckets.setdefault((int(k0[i]), int(kn[i])), []).append(i)
    return np.array(accepted, dtype=np.int64)


def _greedy_separated_value(map_model: MapModel, potential: Potential | None, n: int, eps: float):
    xs = _cylinder_leaves(map_model, n, eps)
    orbits = _orbit_matrix(map_model, xs, n)
    idx = _greedy_sweep(orbits, xs, eps)
    count = int(idx.size)
    if potential is None:
        return math.log(count) / n, count
    s = np.zeros(idx.size)
    for j in range(n):
        s += potential(orbits[idx, j])
    return float(logsumexp(s)) / n, count


def _validate_ladders(eps_ladder, n_ladder):
    eps_ladder = tuple(float(e) for e in eps_ladder)
    n_ladder = tuple(int(n) for n in n_ladder)
    if not eps_ladder or not n_ladder:
        raise ConfigError("ladders must be non-empty")
    if any(e <= 0 or e >= 0.25 for e in eps_ladder):
        raise ConfigError("eps ladder must lie in (0, 0.25)")
    if any(n < 1 for n in n_ladder) or list(n_ladder) != sorted(n_ladder):
        raise ConfigError("n ladder must be positive and ascending")
    return eps_ladder, n_ladder


def pressure_separated(
    map_model: MapModel,
    potential: Potential,
    eps_ladder=(0.05, 0.02, 1.0 / 128),
    n_ladder=tuple(range(10, 17)),
) -> PressureEstimate:
    """Separated-set pressure ladder with linear-in-1/n extrapolation."""
    if map_model.dimension != 1:
        raise ConfigError("separated-set pressure is 1D")
    eps_ladder, n_ladder = _validate_ladders(eps_ladder, n_ladder)
    values = np.empty((len(eps_ladder), len(n_ladder)))
    counts = np.empty_like(values, dtype=np.int64)
    for a, eps in enumerate(eps_ladder):
        for b, n in enumerate(n_ladder):
            if map_model.bit_shift:
                v, k = _exact_separated_value(map_model, potential, n, eps)
            else:
                v, k = _greedy_separated_value(map_model, potential, n, eps)
            values[a, b] = v
            counts[a, b] = k
    # extrapolate at the finest separation scale
    value, unc = _fit_top_half(n_ladder, values[-1])
    return PressureEstimate(
        method="separated",
        eps_ladder=eps_ladder,
        n_ladder=n_ladder,
        values=values,
        value=value,
        uncertainty=unc,
        counts=counts,
    )


def pressure_spectral(map_model: MapModel, potential: Potential, n_cells: int = 1 << 12) -> PressureEstimate:
    """Pressure as log lambda of the transfer operator, with a refinement gap
    as the uncertainty."""
    coarse = conformal_solve(map_model, potential, n_cells // 2)
    fine = conformal_solve(map_model, potential, n_cells)
    return PressureEstimate(
        method="spectral",
        eps_ladder=(),
        n_ladder=(n_cells // 2, n_cells),
        values=np.array([[coarse.pressure, fine.pressure]]),
        value=fine.pressure,
        uncertainty=abs(fine.pressure - coarse.pressure),
    )


def entropy_spanning(
    map_model: MapModel,
    eps_ladder=(0.05, 0.02),
    n_ladder=tuple(range(6, 13)),
) -> EntropyEstimate:
    """Topological entropy from greedy spanning sets.

    The greedy packing scan doubles as a cover: every rejected candidate is
    within eps of an accepted one in d_n, so the accepted set spans the grid
    and its cardinality bounds the separated count from below by construction.
    On the doubling map both counts are exact: spanning ceil(1/2r), separated
    ceil(1/r) - 1 at base radius r = eps 2^{1-n}.
    """
    if map_model.dimension != 1:
        raise ConfigError("spanning-set entropy is 1D")
    eps_ladder, n_ladder = _validate_ladders(eps_ladder, n_ladder)
    values = np.empty((len(eps_ladder), len(n_ladder)))
    span = np.empty_like(values, dtype=np.int64)
    sep = np.empty_like(span)
    for a, eps in enumerate(eps_ladder):
        for b, n in enumerate(n_ladder):
            if map_model.bit_shift:
                k_sep, k_span = _exact_counts(eps, n)
            else:
                _, k_greedy = _greedy_separated_value(map_model, None, n, eps)
                k_sep = k_span = k_greedy
            if k_span > k_sep:
                raise ConfigError("spanning count exceeded separated count")
            span[a, b], sep[a, b] = k_span, k_sep
            values[a, b] = math.log(k_span) / n
    value, unc = _fit_top_half(n_ladder, values[-1])
    return EntropyEstimate(
        eps_ladder=eps_ladder,
        n_ladder=n_ladder,
        values=values,
        value=value,
        uncertainty=unc,
        spanning_counts=span,
        separated_counts=sep,
    )


def _ball_reference_mass(nu, ball) -> float:
    """Reference-measure mass of a window interval (Lebesgue when nu is None)."""
    lo, hi = ball.lo, ball.hi
    if nu is None:
        return (hi - lo) / float(ONE)
    mass = float(nu._window_interval_mass(max(lo, 0), min(hi, ONE)))
    if lo < 0:
        mass += float(nu._window_interval_mass(lo + ONE, ONE))
    if hi > ONE:
        mass += float(nu._window_interval_mass(0, hi - ONE))
    return mass


def local_entropy(
    map_model: MapModel,
    nu,
    x,
    delta_ladder=(0.1, 0.05, 0.02),
    n_ladder=tuple(range(4, 21, 4)),
    samples: int = 100_000,
    seed: int = 0,
) -> LocalEntropyEstimate:
    """-(1/n) log nu(B(x, n, delta)) ladder with the plateau extrapolation.

    1D reference measures (Lebesgue or Ulam) are integrated exactly on the
    dyn_ball interval; product maps fall back to Monte Carlo membership.
    """
    delta_ladder = tuple(float(d) for d in delta_ladder)
    n_ladder = tuple(int(n) for n in n_ladder)
    if not delta_ladder or not n_ladder:
        raise ConfigError("ladders must be non-empty")
    shape = (len(delta_ladder), len(n_ladder))
    values = np.empty(shape)
    var_flags = np.zeros(shape, dtype=bool)
    bnd_flags = np.zeros(shape, dtype=bool)
    if map_model.dimension == 1:
        if nu is not None and not isinstance(nu, UlamMeasure):
            raise UnsupportedError("reference measure must be Lebesgue (None) or an UlamMeasure")
        for a, delta in enumerate(delta_ladder):
            for b, n in enumerate(n_ladder):
                ball = dyn_ball(map_model, x, n, delta)
                bnd_flags[a, b] = ball.boundary_level is not None
                mass = _ball_reference_mass(nu, ball)
                values[a, b] = -math.log(mass) / n if mass > 0 else math.inf
    else:
        values, var_flags = _local_entropy_mc(
            map_model, nu, x, delta_ladder, n_ladder, samples, seed
        )
    value, unc = _fit_top_half(n_ladder, values[-1])
    return LocalEntropyEstimate(
        delta_ladder=delta_ladder,
        n_ladder=n_ladder,
        values=values,
        value=value,
        uncertainty=unc,
        variance_flags=var_flags,
        boundary_flags=bnd_flags,
    )


def _local_entropy_mc(map_model, nu, x, delta_ladder, n_ladder, samples, seed):
    from .orbits import iterate
    from .rng import substream

    rng = substream(seed, "local-entropy")
    if nu is None:
        pts = rng.random((samples, 2))
    else:
        pts = nu.sample(rng, samples)
    orb = iterate(map_model, x, max(n_ladder), seed=seed)
    xa, ya = pts[:, 0].copy(), pts[:, 1].copy()
    mx, my = map_model.components
    shape = (len(delta_ladder), len(n_ladder))
    values = np.empty(shape)
    flags = np.zeros(shape, dtype=bool)
    worst = np.zeros(samples)
    n_seen = 0
    for b, n in enumerate(n_ladder):
        while n_seen < n:
            cx, cy = orb.points[n_seen]
            gap = np.maximum(_circle_gap(xa - cx), _circle_gap(ya - cy))
            worst = np.maximum(worst, gap)
            xa = mx.eval_float(xa)
            ya = my.eval_float(ya)
            n_seen += 1
        for a, delta in enumerate(delta_ladder):
            frac = float(np.count_nonzero(worst <= delta)) / samples
            flags[a, b] = frac < 10.0 / samples
            values[a, b] = -math.log(frac) / n if frac > 0 else math.inf
    return values, flags


@dataclass
class DefectReport:
    entropy: float
    entropy_ladder: dict
    entropy_uncertainty: float
    psi_integral: float
    psi_uncertainty: float
    lyapunov_sum: float
    defect: float
    pressure: float
    kr_verdicts: dict
    method: str
    flags: list = field(default_factory=list)

    def json_summary(self) -> dict:
        def est(value, method, ladder, unc):
            return {"value": value, "method": method, "ladder": ladder, "uncertainty": unc}

        return {
            "entropy": est(self.entropy, self.method, self.entropy_ladder, self.entropy_uncertainty),
            "psi-integral": est(self.psi_integral, "quadrature", None, self.psi_uncertainty),
            "lyapunov-sum": est(self.lyapunov_sum, "negated psi integral", None, self.psi_uncertainty),
            "defect": est(
                self.defect, "entropy + psi integral", None,
                self.entropy_uncertainty + self.psi_uncertainty,
            ),
            "pressure": self.pressure,
            "kr-verdicts": {str(r): bool(v) for r, v in self.kr_verdicts.items()},
            "flags": list(self.flags),
        }


def pesin_defect(
    map_model: MapModel,
    mu,
    resolution: int = 2,
    q_ladder=(5, 6, 8, 10),
    r_ladder=(0.5, 0.2, 0.1, 0.05),
    pressure: float | None = None,
) -> DefectReport:
    """Entropy-formula defect h + int psi dmu with K_r membership verdicts.

    psi = -log|det Df| is the geometric potential; for expanding-side maps
    all exponents are nonnegative so the Lyapunov sum is -int psi. Pressure
    defaults to 0 (the psi-potential convention on expanding families) and
    must be supplied otherwise.
    """
    q_ladder = tuple(int(q) for q in q_ladder)
    if not q_ladder or list(q_ladder) != sorted(q_ladder):
        raise ConfigError("q ladder must be ascending")
    psi = make_potential("geometric", map_model)
    flags = []

    if isinstance(mu, EmpiricalMeasure):
        if mu.n_atoms == 1:
            # a point mass has zero entropy for every partition ladder
            ladder = {q: 0.0 for q in q_ladder}
            h, h_unc = 0.0, 0.0
        elif not mu.ordered:
            raise UnsupportedError("empirical measure lacks orbit provenance")
        else:
            ladder = {
                q: partition_entropy(mu, resolution, block=q, map_model=map_model) for q in q_ladder
            }
            h, h_unc = _fit_top_half(q_ladder, [ladder[q] for q in q_ladder])
        if mu.dimension != 1:
            raise UnsupportedError("defect analysis is 1D")
        vals = map_model.log_det_arr(mu.points)
        psi_int = -float(np.dot(mu.weights, vals))
        psi_unc = float(np.std(vals) / math.sqrt(mu.n_atoms))
        method = f"block entropy, resolution {resolution}"
    elif isinstance(mu, UlamMeasure):
        drift = float(np.abs(pushforward(mu, map_model).masses - mu.masses).sum())
        if drift > 1e-6:
            raise UnsupportedError(
                f"Ulam measure is not invariant (pushforward drift {drift:.2e})"
            )
        ladder = {
            q: partition_entropy(mu, resolution, block=q, map_model=map_model) for q in q_ladder
        }
        h, h_unc = _fit_top_half(q_ladder, [ladder[q] for q in q_ladder])
        psi_int = -mu.integrate(lambda t: map_model.log_det_arr(t))
        psi_unc = 0.0
        method = f"block entropy, resolution {resolution}"
    else:
        raise UnsupportedError("measure lacks orbit provenance and is not Ulam-invariant")

    if pressure is None:
        if map_model.expanding:
            pressure = 0.0
        else:
            flags.append("pressure from spectral solve (map not uniformly expanding)")
            pressure = conformal_solve(map_model, psi, 1 << 10).pressure
    defect = h + psi_int
    verdicts = {r: defect >= pressure - r for r in r_ladder}
    return DefectReport(
        entropy=h,
        entropy_ladder={str(q): ladder[q] for q in q_ladder},
        entropy_uncertainty=h_unc,
        psi_integral=psi_int,
        psi_uncertainty=psi_unc,
        lyapunov_sum=-psi_int,
        defect=defect,
        pressure=pressure,
        kr_verdicts=verdicts,
        method=method,
        flags=flags,
    )
