"""Transfer operator discretization, conformal measures, and Gibbs checks.

The operator L g(x) = sum over preimages y of e^{phi(y)} g(y) is discretized
collocation-style on N uniform cells: row i holds the branch preimages of the
cell center x_i, weighted by e^{phi} there. The dual eigenproblem
L* nu = lambda nu is solved by power iteration with L1 renormalization; the
leading eigenvalue gives pressure log lambda.

The construction is exact for piecewise-linear full-branch maps: for the
doubling map with phi = -log 2 the matrix is doubly stochastic, the uniform
vector is an exact fixed point, and the solver converges in one step with
residual 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse

from .errors import ConfigError, ConvergenceError
from .fixedpoint import ONE, CirclePoint
from .maps import MapModel
from .measures import UlamMeasure
from .orbits import dyn_ball
from .potentials import Potential
from .rng import substream


def _branch_cells(map_model: MapModel, n_cells: int) -> list[range]:
    """Cell index ranges of each branch domain (branch cut at 1/2)."""
    if n_cells % 2:
        raise ConfigError("resolution must be even to respect the branch cut")
    half = n_cells // 2
    return [range(0, half), range(half, n_cells)]


class TransferDiscretization:
    """Sparse N x N collocation matrix for L_phi on piecewise-constant data."""

    def __init__(self, map_model: MapModel, potential: Potential, n_cells: int):
        if map_model.dimension != 1:
            raise ConfigError("transfer discretization is 1D")
        if n_cells < 2 or n_cells % 2:
            raise ConfigError(f"resolution must be even, got {n_cells}")
        self.map_model = map_model
        self.potential = potential
        self.n_cells = n_cells
        centers = (np.arange(n_cells) + 0.5) / n_cells
        rows, cols, data = [], [], []
        for b in range(map_model.branch_count):
            y = map_model.inverse_float(b, centers)
            w = np.exp(potential(y))
            if not np.all(np.isfinite(w) | (w == 0.0)):
                raise ConfigError("potential produced non-finite weights")
            rows.append(np.arange(n_cells))
            cols.append(np.minimum((y * n_cells).astype(np.int64), n_cells - 1))
            data.append(w)
        self.matrix = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_cells, n_cells),
        )

    @property
    def resolution(self) -> int:
        return self.n_cells


def transfer_apply(disc: TransferDiscretization, g: np.ndarray) -> np.ndarray:
    """One application of the discretized operator to cell values g."""
    g = np.asarray(g, dtype=float)
    if g.shape != (disc.n_cells,):
        raise ConfigError(f"cell function has {g.shape}, expected ({disc.n_cells},)")
    return disc.matrix @ g


@dataclass
class ConformalSolution:
    leading: float  # lambda
    measure: UlamMeasure  # dual eigenvector, mass 1
    residual: float
    pressure: float
    iterations: int
    disc: TransferDiscretization
    flags: list = field(default_factory=list)

    def json_summary(self, cells_csv_path=None) -> dict:
        return {
            "lambda": self.leading,
            "pressure": self.pressure,
            "residual": self.residual,
            "N": self.disc.n_cells,
            "potential-name": self.disc.potential.name,
            "cells-csv-path": cells_csv_path,
            "iterations": self.iterations,
            "flags": list(self.flags),
        }


def conformal_solve(
    map_model: MapModel,
    potential: Potential,
    n_cells: int,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    start: np.ndarray | None = None,
) -> ConformalSolution:
    """Leading dual eigenpair of the transfer matrix by power iteration."""
    if n_cells < 2 or (n_cells & (n_cells - 1)) != 0:
        raise ConfigError(f"conformal_solve needs a power-of-2 resolution, got {n_cells}")
    disc = TransferDiscretization(map_model, potential, n_cells)
    mt = disc.matrix.T.tocsr()
    if start is None:
        v = np.full(n_cells, 1.0 / n_cells)
    else:
        v = np.asarray(start, dtype=float)
        if v.shape != (n_cells,) or (v < 0).any() or v.sum() <= 0:
            raise ConfigError("start vector must be a nonnegative mass distribution")
        v = v / v.sum()
    flags = []
    if not map_model.expanding:
        flags.append("no spectral gap guarantee")
    lam = float("nan")
    for it in range(1, max_iter + 1):
        w = mt @ v
        lam = float(w.sum())
        if lam <= 0:
            raise ConvergenceError("transfer matrix lost all mass", residual=lam, iterations=it)
        residual = float(np.abs(w - lam * v).sum())
        v = w / lam
        if residual <= tol:
            nu = UlamMeasure(v, map_model=map_model)
            return ConformalSolution(
                leading=lam,
                measure=nu,
                residual=residual,
                pressure=math.log(lam),
                iterations=it,
                disc=disc,
                flags=flags,
            )
    raise ConvergenceError(
        f"power iteration did not reach {tol:g} in {max_iter} steps",
        residual=residual,
        iterations=max_iter,
    )


def jacobian_check(sol: ConformalSolution, n_samples: int = 200, seed: int = 0) -> float:
    """Max relative error of nu(T(A)) = int_A lambda e^{-phi} dnu over random
    cell unions A inside single branches."""
    disc = sol.disc
    m = disc.map_model
    n = disc.n_cells
    nu = sol.measure
    phi_centers = disc.potential((np.arange(n) + 0.5) / n)
    rng = substream(seed, "jacobian-check")
    worst = 0.0
    branches = _branch_cells(m, n)
    for _ in range(n_samples):
        b = int(rng.integers(m.branch_count))
        cells = branches[b]
        i0 = int(rng.integers(cells.start, cells.stop))
        span = int(rng.integers(1, min(9, cells.stop - i0) + 1))
        lo, hi = i0 / n, (i0 + span) / n
        img_lo = float(m.eval_float(np.array([lo]))[0])
        img_hi = float(m.eval_float(np.array([hi]))[0])
        if hi == 1.0 or img_hi == 0.0:
            img_hi = 1.0  # right endpoint of the branch image
        lhs = nu.mass_of_interval(img_lo, img_hi)
        rhs = sol.leading * float(
            np.dot(np.exp(-phi_centers[i0 : i0 + span]), nu.masses[i0 : i0 + span])
        )
        err = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        worst = max(worst, err)
    return worst


def _cell_nodes(nu: UlamMeasure, lo: int, hi: int):
    """Per-cell overlap masses and midpoint nodes for window interval [lo, hi].

    Splits a wrapped interval; cell edges are the exact window edges used by
    the measure, so the masses sum to the exact interval mass.
    """
    n = nu.resolution
    segments = []
    if lo < 0:
        segments.append((lo + ONE, ONE))
        lo = 0
    if hi > ONE:
        segments.append((0, hi - ONE))
        hi = ONE
    if hi > lo:
        segments.append((lo, hi))
    masses, nodes = [], []
    for a, b in segments:
        i = min(int(a * n // ONE), n - 1)
        j = min(int((b * n - 1) // ONE), n - 1)
        for c in range(i, j + 1):
            c_lo, c_hi = ONE * c // n, ONE * (c + 1) // n
            s, t = max(a, c_lo), min(b, c_hi)
            if t > s:
                masses.append(float(nu.masses[c]) * (t - s) / (c_hi - c_lo))
                nodes.append(float(Fraction(s + t, 2 * ONE)))
    return np.array(masses), np.array(nodes)


def _ball_mass(sol: ConformalSolution, x: CirclePoint, n: int, ball) -> float:
    """nu-mass of a depth-n dynamical ball around x.

    The ball maps bijectively onto the base-scale interval at f^{n-1}(x);
    since nu is conformal the pullback has density lambda^{-k} e^{S_k phi(w)}
    against nu on that interval. Integrating there keeps the mass resolvable
    on the cell grid even when the ball itself is far below cell width.
    """
    m = sol.disc.map_model
    k = n - 1
    word = []
    q = x
    for _ in range(k):
        word.append(m.branch_index_frac(q.frac))
        q = m.eval(q)
    d = round(ball.delta * ONE)
    masses, nodes = _cell_nodes(sol.measure, q.frac - d, q.frac + d)
    if k == 0:
        return float(masses.sum())
    s = np.zeros_like(nodes)
    y = nodes
    for b in reversed(word):
        y = m.inverse_float(b, y)
        s += sol.disc.potential(y)
    return float(np.dot(masses, np.exp(s))) * sol.leading**-k


@dataclass
class GibbsReport:
    ns: np.ndarray
    ratios: np.ndarray  # r_n, truncated if the ball hit a branch boundary
    alpha: float
    delta_min: float
    epsilon: float
    pressure: float
    truncated_at: int | None = None

    @property
    def complete(self) -> bool:
        return self.truncated_at is None


def gibbs_check(sol: ConformalSolution, x, n_max: int, epsilon: float) -> GibbsReport:
    """Ratios r_n = nu(B(x, n, eps)) / exp(S_n phi(x) - P n), n = 1..n_max.

    The ball mass is computed on the exact window interval from dyn_ball;
    S_n phi accumulates the potential along the exact orbit samples.
    """
    disc = sol.disc
    m = disc.map_model
    if not isinstance(x, CirclePoint):
        x = CirclePoint.from_float(float(x))
    ratios = []
    truncated = None
    # orbit samples for the Birkhoff sums
    pts = np.empty(n_max)
    q = x
    for j in range(n_max):
        pts[j] = q.to_float()
        q = m.eval(q)
    phis = disc.potential(pts)
    s = np.concatenate([[0.0], np.cumsum(phis)])
    for n in range(1, n_max + 1):
        ball = dyn_ball(m, x, n, epsilon)
        if ball.boundary_level is not None:
            truncated = n
            break
        denom = math.exp(s[n] - sol.pressure * n)
        ratios.append(_ball_mass(sol, x, n, ball) / denom)
    r = np.array(ratios)
    if r.size == 0:
        raise ConfigError("ball collided with a branch boundary at n = 1; shrink epsilon")
    ns = np.arange(1, r.size + 1)
    alpha = float(min(1.0, r.min()))
    # smallest delta with alpha e^{-n delta} <= r_n <= e^{n delta}; the lower
    # bound is free at delta = 0 by the choice of alpha
    delta_min = float((np.maximum(np.log(np.maximum(r, 1e-300)), 0.0) / ns).max())
    return GibbsReport(
        ns=ns,
        ratios=r,
        alpha=alpha,
        delta_min=delta_min,
        epsilon=epsilon,
        pressure=sol.pressure,
        truncated_at=truncated,
    )
