"""Orbit records and dynamical balls.

The doubling ball has a closed form: pulling a 2*delta interval back n-1
times through constant-slope-2 branches gives length 2*delta*2^-(n-1),
exactly representable in the window grid when delta is dyadic. That exact
value anchors the pullback code; a brute-force membership scan checks the
set semantics on nonlinear families.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from ergolab.errors import ConfigError
from ergolab.fixedpoint import ONE, CirclePoint
from ergolab.maps import LOG2, make_map
from ergolab.orbits import DynBall, dyn_ball, iterate
from ergolab.rng import substream


def reference_orbit(m, p, n):
    pts = np.empty(n)
    syms = np.empty(n, dtype=np.int8)
    q = p
    for j in range(n):
        xf = q.to_float()
        pts[j] = xf
        syms[j] = m.branch_index(xf)
        q = m.eval(q)
    return pts, syms, q


class TestIterate:
    def test_shapes_and_ranges(self):
        m = make_map("doubling")
        rec = iterate(m, None, 257, seed=1)
        assert len(rec) == 257
        assert rec.points.shape == (257,)
        assert rec.log_dfinv.shape == rec.log_det.shape == rec.symbols.shape == (257,)
        assert ((rec.points >= 0) & (rec.points < 1)).all()
        assert rec.flags == []

    def test_fast_doubling_path_matches_stepwise_eval(self):
        m = make_map("doubling")
        for start in (CirclePoint.from_fraction(1, 3), CirclePoint.from_float(0.3), None):
            rec = iterate(m, start, 600, seed=5)
            pts, syms, end = reference_orbit(m, rec.start, 600)
            assert np.abs(rec.points - pts).max() <= 2.0**-52
            assert np.array_equal(rec.symbols, syms)
            assert rec.end.frac == end.frac
            assert rec.end.tail.fingerprint() == end.tail.fingerprint()

    def test_doubling_derivative_streams(self):
        rec = iterate(make_map("doubling"), 0.3, 64)
        assert (rec.log_det == LOG2).all()
        assert (rec.log_dfinv == -LOG2).all()

    def test_million_iterates_no_collapse(self):
        rec = iterate(make_map("doubling"), None, 1_000_000, seed=2024)
        assert rec.end.frac != 0
        # Lebesgue statistics: mean within 4 sigma of 1/2
        assert abs(rec.points.mean() - 0.5) < 4 * (12 * 1e6) ** -0.5
        assert abs(rec.symbols.mean() - 0.5) < 4 * (4 * 1e6) ** -0.5

    def test_rational_start_exactly_periodic(self):
        rec = iterate(make_map("doubling"), Fraction(1, 3), 8)
        third = CirclePoint.from_fraction(1, 3).to_float()
        two_thirds = CirclePoint.from_fraction(2, 3).to_float()
        np.testing.assert_array_equal(rec.points[0::2], third)
        np.testing.assert_array_equal(rec.points[1::2], two_thirds)
        assert rec.end.frac == rec.start.frac

    def test_seed_determinism(self):
        m = make_map("nue_deform", a=0.2)
        a = iterate(m, None, 300, seed=9)
        b = iterate(m, None, 300, seed=9)
        c = iterate(m, None, 300, seed=10)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.log_dfinv, b.log_dfinv)
        assert not np.array_equal(a.points, c.points)

    def test_float_start_exact_without_seed(self):
        rec = iterate(make_map("doubling"), 0.3, 4)
        assert rec.points[0] == 0.3 and rec.points[1] == 0.6

    def test_float_start_dithered_with_seed(self):
        m = make_map("doubling")
        a = iterate(m, 0.3, 200, seed=1)
        b = iterate(m, 0.3, 200, seed=2)
        assert abs(a.points[0] - 0.3) < 2.0**-60
        assert a.end.frac != b.end.frac  # dithering decouples deep iterates

    def test_none_start_requires_seed(self):
        with pytest.raises(ConfigError):
            iterate(make_map("doubling"), None, 10)

    def test_intermittent_orbit_finite_and_unflagged(self):
        rec = iterate(make_map("intermittent", alpha=1.0), 0.001, 2000)
        assert rec.flags == []
        assert np.isfinite(rec.log_det).all()
        assert (rec.log_dfinv <= 0).all()  # |f'| >= 1 everywhere

    def test_manneville_singular_hit_is_flagged(self):
        rec = iterate(make_map("manneville"), 0.5, 3)
        assert 0 in rec.flags
        assert math.isinf(rec.log_det[0])
        assert rec.points[1] == 0.0  # sqrt(0): orbit lands on the fixed endpoint

    def test_product_orbit(self):
        m = make_map("product", x={"family": "doubling"}, y={"family": "doubling"})
        rec = iterate(m, (0.3, 0.25), 5)
        assert rec.points.shape == (5, 2)
        assert rec.points[1, 0] == 0.6 and rec.points[1, 1] == 0.5
        assert rec.log_det[0] == pytest.approx(2 * LOG2, abs=1e-15)


def orbit_sup_dist(m, x0: CirclePoint, y0: CirclePoint, n: int) -> float:
    d = 0.0
    x, y = x0, y0
    for _ in range(n):
        d = max(d, x.dist(y))
        x, y = m.eval(x), m.eval(y)
    return d


class TestDynBall:
    def test_doubling_length_closed_form(self):
        m = make_map("doubling")
        for n in (1, 3, 5, 9):
            ball = dyn_ball(m, 0.3, n, 0.1)
            assert ball.length() == 0.2 * 0.5 ** (n - 1)
            assert ball.exact

    def test_ball_is_centered_interval_for_doubling(self):
        ball = dyn_ball(make_map("doubling"), 0.3, 4, 0.05)
        w = CirclePoint.from_float(0.3).frac
        assert ball.lo < w < ball.hi
        # symmetric up to integer-halving parity slack (constant slope)
        assert abs((ball.hi - w) - (w - ball.lo)) <= 4

    def test_membership_semantics_doubling(self):
        m = make_map("doubling")
        n, delta = 5, 0.1
        x = CirclePoint.from_float(0.3)
        ball = dyn_ball(m, x, n, delta)
        lo, hi = ball.bounds_float()
        for t in np.linspace(lo, hi, 41):
            y = CirclePoint.from_float(float(t))
            assert orbit_sup_dist(m, x, y, n) <= delta * (1 + 1e-12)
        eps = (hi - lo) * 1e-3
        for t in (lo - eps, hi + eps):
            y = CirclePoint.from_float(float(t))
            assert orbit_sup_dist(m, x, y, n) > delta

    def test_membership_semantics_intermittent(self):
        m = make_map("intermittent", alpha=1.0)
        n, delta = 4, 0.04
        x = CirclePoint.from_float(0.1)  # short orbit stays clear of the cuts
        ball = dyn_ball(m, x, n, delta)
        assert ball.exact
        lo, hi = ball.bounds_float()
        inside_sup = max(
            orbit_sup_dist(m, x, CirclePoint.from_float(float(t)), n)
            for t in np.linspace(lo + 1e-12, hi - 1e-12, 31)
        )
        assert inside_sup <= delta * (1 + 1e-9)
        out = max(
            orbit_sup_dist(m, x, CirclePoint.from_float(t), n)
            for t in (lo - 1e-5, hi + 1e-5)
        )
        assert out > inside_sup
        assert out > delta * (1 - 1e-6)

    def test_branch_cut_collision_flagged(self):
        ball = dyn_ball(make_map("doubling"), 0.05, 1, 0.2)
        assert ball.boundary_level == 0
        assert not ball.exact

    def test_validation(self):
        m = make_map("doubling")
        with pytest.raises(ConfigError):
            dyn_ball(m, 0.3, 5, 0.25)
        with pytest.raises(ConfigError):
            dyn_ball(m, 0.3, 0, 0.1)

    def test_product_ball_mass(self):
        m = make_map("product", x={"family": "doubling"}, y={"family": "doubling"})
        box = dyn_ball(m, (0.3, 0.3), 3, 0.1)
        assert box.mass_lebesgue() == pytest.approx((0.2 * 0.25) ** 2, abs=1e-18)

    def test_contains_frac_wraps(self):
        ball = DynBall(n=1, delta=0.1, lo=-ONE // 20, hi=ONE // 20)
        assert ball.contains_frac(ONE - ONE // 40)
        assert ball.contains_frac(ONE // 40)
        assert not ball.contains_frac(ONE // 2)
