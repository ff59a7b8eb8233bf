"""Measure-kit oracles.

The weak* distance values are frozen from closed-form sums over the declared
basis (worked by hand below), the Lebesgue comparison against direct
quadrature, and the entropy values against exact cylinder masses.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from ergolab.errors import ConfigError, UnsupportedError
from ergolab.maps import LOG2, make_map
from ergolab.measures import (
    EmpiricalMeasure,
    TestFunctionBasis as FnBasis,
    UlamMeasure,
    birkhoff,
    default_basis,
    empirical,
    partition_entropy,
    pushforward,
    weak_star_dist,
)
from ergolab.orbits import iterate
from ergolab.potentials import make_potential
from ergolab.rng import substream


class TestBasis:
    def test_ranges_and_determinism(self):
        basis = FnBasis(K=8)
        x = np.linspace(0, 1, 257)
        vals = basis.eval_all(x)
        assert vals.shape == (17, 257)
        assert vals.min() >= 0.0 and vals.max() <= 1.0
        assert np.array_equal(vals, FnBasis(K=8).eval_all(x))

    def test_weights_are_dyadic(self):
        basis = FnBasis(K=4)
        np.testing.assert_array_equal(basis.weights, 0.5 ** np.arange(9))

    def test_2d_diagonal_order(self):
        basis = FnBasis(K=3, dimension=2)
        assert basis.pairs[:6] == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
        assert len(basis.pairs) == basis.size == 7
        pts = np.column_stack([np.linspace(0, 1, 50), np.linspace(0, 0.5, 50)])
        vals = basis.eval_all(pts)
        assert vals.shape == (7, 50)
        assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_cell_averages_match_quadrature(self):
        basis = FnBasis(K=5)
        fine = np.linspace(0, 1, 20_001)
        mids = 0.5 * (fine[:-1] + fine[1:])
        vals = basis.eval_all(mids)
        avg = basis._axis_cell_averages(4)
        for i in range(basis.size):
            want = vals[i].reshape(4, -1).mean(axis=1)
            np.testing.assert_allclose(avg[i], want, atol=1e-8)


class TestWeakStarDist:
    def test_identity(self):
        mu = EmpiricalMeasure.dirac(0.3)
        assert weak_star_dist(mu, mu) == 0.0

    def test_delta_pair_closed_form(self):
        # phi at 0 and 1/2 differ only on cos terms with odd k, by exactly 1;
        # sum of 2^-(2k-1) over odd k <= K gives 1/2 + 1/32 + 1/512 + ...
        d0 = EmpiricalMeasure.dirac(0.0)
        dh = EmpiricalMeasure.dirac(0.5)
        got = weak_star_dist(d0, dh, FnBasis(K=6))
        assert got == pytest.approx(0.5 + 1 / 32 + 1 / 512, abs=1e-12)
        got32 = weak_star_dist(d0, dh, FnBasis(K=32))
        assert got32 == pytest.approx((0.5 + 1 / 32 + 1 / 512) * (1 + 1 / 4096 / (1 - 1 / 4096)), rel=1e-6)

    def test_delta_vs_lebesgue_quadrature(self):
        d0 = EmpiricalMeasure.dirac(0.0)
        leb = UlamMeasure.lebesgue(4096)
        basis = default_basis(1)
        got = weak_star_dist(d0, leb, basis)
        # midpoint-rule oracle; uniform grids integrate these harmonics exactly
        xs = (np.arange(8192) + 0.5) / 8192
        grid = basis.eval_all(xs)
        at0 = basis.eval_all(np.array([0.0]))[:, 0]
        want = float(np.dot(basis.weights, np.abs(at0 - grid.mean(axis=1))))
        assert got == pytest.approx(want, abs=1e-9)

    def test_symmetry_and_triangle(self):
        rng = substream(60, "wsd")
        ms = [EmpiricalMeasure(rng.random(20)) for _ in range(3)]
        a, b, c = ms
        assert weak_star_dist(a, b) == weak_star_dist(b, a)
        assert weak_star_dist(a, c) <= weak_star_dist(a, b) + weak_star_dist(b, c) + 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            weak_star_dist(EmpiricalMeasure.dirac(0.3), EmpiricalMeasure.dirac((0.3, 0.4)))


class TestEmpirical:
    def test_two_point_orbit(self):
        rec = iterate(make_map("doubling"), Fraction(1, 3), 2)
        mu = empirical(rec)
        atoms = dict(mu.atoms())
        assert len(atoms) == 2
        np.testing.assert_allclose(sorted(atoms), [1 / 3, 2 / 3], atol=1e-15)
        assert set(atoms.values()) == {0.5}

    def test_fixed_point_orbit_is_dirac(self):
        rec = iterate(make_map("doubling"), Fraction(0, 1), 10)
        mu = empirical(rec)
        assert mu.n_atoms == 10
        assert weak_star_dist(mu, EmpiricalMeasure.dirac(0.0)) == 0.0

    def test_histogram_uniformity(self):
        n = 100_000
        rec = iterate(make_map("doubling"), None, n, seed=314)
        mu = empirical(rec)
        hist = UlamMeasure.from_points(mu, 16)
        bound = 3.0 * math.sqrt(1.0 / (n * 16))
        assert np.abs(hist.masses - 1 / 16).max() < bound

    def test_mass_validation(self):
        with pytest.raises(ConfigError):
            EmpiricalMeasure([0.1, 0.2], weights=[0.6, 0.6])
        with pytest.raises(ConfigError):
            EmpiricalMeasure([0.1, 0.2], weights=[1.2, -0.2])


class TestUlam:
    def test_lebesgue_mass_of_interval(self):
        leb = UlamMeasure.lebesgue(128)
        assert leb.mass_of_interval(0.25, 0.75) == pytest.approx(0.5, abs=1e-15)
        assert leb.mass_of_interval(0.1003, 0.1007) == pytest.approx(0.0004, abs=1e-12)

    def test_sampling_matches_masses(self):
        m = np.zeros(8)
        m[2], m[5] = 0.75, 0.25
        ulam = UlamMeasure(m)
        pts = ulam.sample(substream(61, "ulam-sample"), 40_000)
        frac_cell2 = ((pts >= 0.25) & (pts < 0.375)).mean()
        assert frac_cell2 == pytest.approx(0.75, abs=0.01)
        assert ((pts >= 0.625) & (pts < 0.75)).mean() == pytest.approx(0.25, abs=0.01)

    def test_integrate_smooth(self):
        leb = UlamMeasure.lebesgue(256)
        got = leb.integrate(lambda x: np.cos(2 * np.pi * x) ** 2)
        assert got == pytest.approx(0.5, abs=1e-6)

    def test_moments_closed_form_vs_empirical_sampling(self):
        masses = np.array([0.4, 0.1, 0.3, 0.2])
        ulam = UlamMeasure(masses)
        basis = FnBasis(K=6)
        pts = ulam.sample(substream(62, "ulam-mom"), 200_000)
        emp = EmpiricalMeasure(pts)
        assert np.abs(ulam.moments(basis) - emp.moments(basis)).max() < 0.01


class TestBirkhoff:
    def test_doubling_log_det_exact(self):
        rec = iterate(make_map("doubling"), None, 5000, seed=77)
        assert birkhoff(rec, "log_det") == pytest.approx(LOG2, abs=1e-15)

    def test_flagged_steps_excluded(self):
        rec = iterate(make_map("manneville"), 0.5, 50)
        with pytest.warns(UserWarning, match="1 flagged"):
            v = birkhoff(rec, "log_det")
        assert math.isfinite(v)

    def test_callable_observable(self):
        rec = iterate(make_map("doubling"), None, 50_000, seed=78)
        v = birkhoff(rec, lambda x: np.sin(2 * np.pi * x))
        assert abs(v) < 0.02

    def test_intermittent_alpha2_slow_lyapunov(self):
        # mean of log|f'| over Lebesgue-random orbits shrinks with n
        m = make_map("intermittent", alpha=2.0)
        vals = []
        for n in (1000, 10_000, 100_000):
            rec = iterate(m, None, n, seed=404)
            vals.append(birkhoff(rec, "log_det"))
        assert 0 < vals[2] < 0.2
        assert vals[0] > vals[1] > vals[2]

    def test_nue_lyapunov_stable_across_seeds(self):
        m = make_map("nue_deform", a=0.2)
        vals = [birkhoff(iterate(m, None, 100_000, seed=s), "log_det") for s in range(10)]
        assert min(vals) > 0
        assert (max(vals) - min(vals)) / np.mean(vals) < 0.02


class TestPartitionEntropy:
    def test_lebesgue_doubling_exact_log2(self):
        leb = UlamMeasure.lebesgue(64, map_model=make_map("doubling"))
        for q in (1, 5, 12):
            h = partition_entropy(leb, 2, q)
            assert h == pytest.approx(LOG2, abs=1e-12)

    def test_dirac_zero(self):
        d = EmpiricalMeasure(np.full(10, 0.0), ordered=True)
        assert partition_entropy(d, 8, 3) == 0.0

    def test_empirical_orbit_near_log2(self):
        rec = iterate(make_map("doubling"), None, 100_000, seed=99)
        h = partition_entropy(empirical(rec), 2, 10)
        assert h == pytest.approx(LOG2, abs=0.02)

    def test_monotone_in_block(self):
        leb = UlamMeasure.lebesgue(16, map_model=make_map("doubling"))
        hs = [partition_entropy(leb, 4, q) for q in (1, 2, 4, 8)]
        for a, b in zip(hs, hs[1:]):
            assert b <= a + 1e-12

    def test_cylinder_bound(self):
        leb = UlamMeasure.lebesgue(4, map_model=make_map("doubling"))
        with pytest.raises(ConfigError):
            partition_entropy(leb, 1024, 4)

    def test_unordered_blocks_rejected(self):
        mu = EmpiricalMeasure(np.array([0.1, 0.9, 0.4]))
        with pytest.raises(UnsupportedError):
            partition_entropy(mu, 4, 2)


class TestPushforward:
    def test_dirac_at_fixed_point(self):
        d0 = EmpiricalMeasure.dirac(0.0)
        img = pushforward(d0, make_map("doubling"))
        assert weak_star_dist(img, d0) == 0.0

    def test_lebesgue_invariant_under_doubling(self):
        leb = UlamMeasure.lebesgue(1024)
        img = pushforward(leb, make_map("doubling"))
        assert np.abs(img.masses - 1 / 1024).max() < 1e-12

    def test_orbit_shift_identity(self):
        m = make_map("doubling")
        rec = iterate(m, None, 200, seed=55)
        shifted = iterate(m, rec.start, 201, seed=55)
        mu_fwd = pushforward(empirical(rec), m)
        mu_shift = EmpiricalMeasure(shifted.points[1:], ordered=True)
        # same atoms up to float evaluation noise, far below 2/n
        assert weak_star_dist(mu_fwd, mu_shift) < 2.0 / 200

    def test_ulam_eigen_invariance_weak_star(self):
        leb = UlamMeasure.lebesgue(4096)
        img = pushforward(leb, make_map("doubling"))
        assert weak_star_dist(img, leb) <= 1e-8

    def test_2d_product_pushforward(self):
        m = make_map("product", x={"family": "doubling"}, y={"family": "doubling"})
        leb = UlamMeasure.lebesgue(32, dimension=2)
        img = pushforward(leb, m, nodes=4)
        assert np.abs(img.masses - 32.0**-2).max() < 1e-12


def test_potentials_registry():
    m = make_map("doubling")
    zero = make_potential("zero")
    assert np.array_equal(zero(np.array([0.1, 0.9])), [0.0, 0.0])
    nlb = make_potential("neg_log_branches", m)
    assert nlb(np.array([0.3]))[0] == -LOG2
    cos = make_potential("cosine", amplitude=0.25)
    np.testing.assert_allclose(cos(np.array([0.0, 0.5])), [0.25, -0.25], atol=1e-15)
    geo = make_potential("geometric", m)
    assert geo(np.array([0.7]))[0] == -LOG2
    with pytest.raises(ConfigError):
        make_potential("entropy-ish")
