"""Pseudo-basin masses, weak-SRB verdicts, LDP rates, and clustering."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ergolab.errors import ConfigError, UnsupportedError
from ergolab.maps import make_map
from ergolab.measures import EmpiricalMeasure, UlamMeasure, default_basis
from ergolab.srb import (
    ldp_rate,
    pseudo_basin_mass,
    srb_cluster,
    weak_srb_scan,
    weak_srb_verdict,
)

LOG2 = math.log(2.0)


def cylinder_fraction(n, eps, target_moments, chunk=1 << 15):
    """Exhaustive doubling-map oracle: fraction of n-cylinder midpoints whose
    time-n empirical measure lands within eps of the target."""
    basis = default_basis(1)
    total = 1 << n
    mids = (2.0 * np.arange(total) + 1.0) / (2.0 * total)
    hits = 0
    for s in range(0, total, chunk):
        x = mids[s : s + chunk].copy()
        moments = np.zeros((basis.size, x.size))
        for _ in range(n):
            moments += basis.eval_all(x)
            x = (2.0 * x) % 1.0
        dist = basis.weights @ np.abs(moments / n - target_moments[:, None])
        hits += int((dist < eps).sum())
    return hits / total


@pytest.fixture(scope="module")
def dirac_estimate():
    doubling = make_map("doubling")
    return pseudo_basin_mass(
        doubling, EmpiricalMeasure.dirac(0.0), 0.1, (12, 14, 16, 18, 20),
        samples=20_000, seed=0,
    )


class TestPseudoBasin:
    def test_lebesgue_doubling_no_decay(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(256)
        est = pseudo_basin_mass(doubling, leb, 0.1, (500, 1000, 2000, 4000),
                                samples=100, seed=0)
        assert np.all(est.masses == 1.0)
        assert abs(est.rate) <= 0.01
        assert est.flags == []

    def test_dirac_decays(self, dirac_estimate):
        est = dirac_estimate
        assert np.all(est.masses > 0)
        assert est.rate <= -0.2
        assert est.masses[-1] < est.masses[0]

    def test_dirac_mass_matches_cylinder_oracle(self, dirac_estimate):
        target = EmpiricalMeasure.dirac(0.0).moments(default_basis(1))
        oracle = cylinder_fraction(20, 0.1, target)
        lo, hi = dirac_estimate.wilson[-1]
        assert lo <= oracle <= hi

    def test_lebesgue_mass_matches_cylinder_oracle(self):
        # eps must be resolved at cylinder depth: near the bulk of the
        # distance distribution, boundary cylinders quantize the midpoint
        # count away from the true mass faster than Wilson bars shrink
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(256)
        target = leb.moments(default_basis(1))
        est = pseudo_basin_mass(doubling, leb, 0.3, (12, 16),
                                samples=2000, seed=3)
        for j, n in enumerate(est.n_ladder):
            oracle = cylinder_fraction(n, 0.3, target)
            assert est.wilson[j, 0] <= oracle <= est.wilson[j, 1]

    def test_dirac_horizon_one_large_eps(self):
        nue = make_map("nue_deform", a=0.2)
        est = pseudo_basin_mass(nue, EmpiricalMeasure.dirac(0.37), 2.5, (1,),
                                samples=50, seed=1)
        assert est.masses.tolist() == [1.0]

    def test_monotone_in_eps_on_shared_samples(self, dirac_estimate):
        doubling = make_map("doubling")
        smaller = pseudo_basin_mass(
            doubling, EmpiricalMeasure.dirac(0.0), 0.05, (12, 14, 16, 18, 20),
            samples=20_000, seed=0,
        )
        assert np.array_equal(smaller.dists, dirac_estimate.dists)
        assert np.all(smaller.masses <= dirac_estimate.masses)

    def test_determinism(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(64)
        a = pseudo_basin_mass(doubling, leb, 0.1, (100, 200, 400), samples=50, seed=7)
        b = pseudo_basin_mass(doubling, leb, 0.1, (100, 200, 400), samples=50, seed=7)
        assert np.array_equal(a.dists, b.dists)
        assert a.json_summary() == b.json_summary()

    def test_zero_hit_rungs_flagged(self):
        doubling = make_map("doubling")
        est = pseudo_basin_mass(doubling, EmpiricalMeasure.dirac(0.0), 0.1,
                                (8, 12, 16, 20), samples=300, seed=0)
        assert est.rate == float("-inf")
        assert est.fit_ns == ()
        assert any("lower bound" in f for f in est.flags)

    def test_mass_inside_own_wilson(self, dirac_estimate):
        est = dirac_estimate
        assert np.all((est.masses >= 0) & (est.masses <= 1))
        assert np.all(est.wilson[:, 0] <= est.masses)
        assert np.all(est.masses <= est.wilson[:, 1])

    def test_wilson_closed_form(self, dirac_estimate):
        # 95% Wilson: center (k + z^2/2)/(m + z^2), z = 1.95996...
        z = 1.959963984540054
        m = dirac_estimate.samples
        for j in range(len(dirac_estimate.n_ladder)):
            k = dirac_estimate.masses[j] * m
            center = (k + z * z / 2) / (m + z * z)
            half = z * math.sqrt(k * (m - k) / m + z * z / 4) / (m + z * z)
            assert dirac_estimate.wilson[j, 0] == pytest.approx(center - half, abs=1e-12)
            assert dirac_estimate.wilson[j, 1] == pytest.approx(center + half, abs=1e-12)

    def test_ulam_reference_sampler(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(256)
        est = pseudo_basin_mass(doubling, leb, 0.1, (200, 400), samples=60,
                                seed=2, nu=UlamMeasure.lebesgue(64))
        assert est.nu_label == "ulam[64]"
        assert np.all(est.masses == 1.0)

    def test_validation(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(64)
        with pytest.raises(ConfigError):
            pseudo_basin_mass(doubling, leb, 0.0, (10, 20))
        with pytest.raises(ConfigError):
            pseudo_basin_mass(doubling, leb, 0.1, (20, 10))
        with pytest.raises(ConfigError):
            pseudo_basin_mass(doubling, leb, 0.1, (10, 20), samples=0)
        with pytest.raises(UnsupportedError):
            pseudo_basin_mass(doubling, leb, 0.1, (10, 20), nu="lebesgue")

    def test_csv_table(self, dirac_estimate):
        names, rows = dirac_estimate.csv_table()
        assert names == ("seed", "n", "dist", "hit")
        assert len(rows) == dirac_estimate.samples * len(dirac_estimate.n_ladder)
        hits = sum(r[3] for r in rows if r[1] == 20)
        assert hits == round(dirac_estimate.masses[-1] * dirac_estimate.samples)


class TestVerdict:
    def test_lebesgue_doubling_positive(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(256)
        ests, verdict = weak_srb_scan(doubling, leb, (0.2, 0.1, 0.05),
                                      (500, 1000, 2000, 4000), samples=100, seed=0)
        assert verdict.positive
        assert all(r == 0.0 for r in verdict.rates.values())
        assert verdict.horizon == 4000
        assert verdict.threshold == -0.02
        assert verdict.eps_ladder == (0.2, 0.1, 0.05)
        for tighter, looser in zip(ests[2].masses, ests[1].masses):
            assert tighter <= looser

    def test_dirac_doubling_negative(self, dirac_estimate):
        verdict = weak_srb_verdict([dirac_estimate])
        assert not verdict.positive
        assert verdict.rates[0.1] <= -0.2

    def test_deformed_positive_across_masters(self):
        nue = make_map("nue_deform", a=0.2)
        leb = UlamMeasure.lebesgue(256)
        rates = []
        for master in (0, 1):
            _, verdict = weak_srb_scan(nue, leb, (0.2, 0.1),
                                       (1000, 2000, 4000, 8000, 10_000),
                                       samples=60, seed=master)
            assert verdict.positive
            rates.append(verdict.rates)
        assert rates[0] == rates[1]

    def test_mismatched_estimates_rejected(self):
        doubling = make_map("doubling")
        leb = UlamMeasure.lebesgue(64)
        a = pseudo_basin_mass(doubling, leb, 0.1, (50, 100), samples=30, seed=0)
        b = pseudo_basin_mass(doubling, leb, 0.2, (50, 150), samples=30, seed=0)
        with pytest.raises(ConfigError):
            weak_srb_verdict([a, b])
        with pytest.raises(ConfigError):
            weak_srb_verdict([a, a])
        with pytest.raises(ConfigError):
            weak_srb_verdict([])

    def test_json_summary(self, dirac_estimate):
        js = weak_srb_verdict([dirac_estimate]).json_summary()
        assert js["positive"] is False
        assert js["resolution"]["threshold"] == -0.02
        assert js["resolution"]["horizon"] == 20


class TestLdpRate:
    def test_exact_rates_frozen(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.9, samples=1000, seed=0)
        assert rep.k_min == (8, 11, 15, 18, 22)
        expected = (-0.6931472, -0.4794014, -0.5160713, -0.4255543, -0.4553509)
        assert np.allclose(rep.exact_rates, expected, atol=1e-7)
        assert rep.limit_rate == pytest.approx(-0.3680642071684971, abs=1e-12)

    def test_boundary_word_included(self):
        # 18 zeros in 20 digits is frequency 0.9 exactly, so it counts:
        # C(20,18) + C(20,19) + C(20,20) = 211 words
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.9, n_ladder=(20,), samples=1000, seed=0)
        assert rep.exact_fractions[0] == pytest.approx(211 / 2**20, rel=1e-12)

    def test_finite_n_near_limit(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.9, n_ladder=(20,), samples=1000, seed=0)
        gap = abs(rep.exact_rates[0] - rep.limit_rate) / abs(rep.limit_rate)
        assert gap < 0.20

    def test_degenerate_full_frequency(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 1.0, n_ladder=(8, 16, 24), samples=1000, seed=0)
        assert np.allclose(rep.exact_rates, -LOG2, atol=1e-15)
        assert rep.limit_rate == pytest.approx(-LOG2, abs=1e-15)

    def test_secondary_threshold(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.75, n_ladder=(20,), samples=1000, seed=0)
        assert rep.exact_rates[0] == pytest.approx(-0.1938938, abs=1e-7)
        assert rep.limit_rate == pytest.approx(-0.1308120, abs=1e-7)

    def test_mc_within_wilson(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.9, samples=200_000, seed=0)
        assert np.all(rep.within_wilson)

    def test_validation(self):
        doubling = make_map("doubling")
        with pytest.raises(ConfigError):
            ldp_rate(doubling, 0.5)
        with pytest.raises(ConfigError):
            ldp_rate(doubling, 1.1)
        with pytest.raises(ConfigError):
            ldp_rate(doubling, 0.9, n_ladder=(8, 30))
        with pytest.raises(UnsupportedError):
            ldp_rate(make_map("nue_deform", a=0.1), 0.9)

    def test_tables(self):
        doubling = make_map("doubling")
        rep = ldp_rate(doubling, 0.9, n_ladder=(8, 12), samples=1000, seed=0)
        names, rows = rep.csv_table()
        assert names[0] == "n" and len(rows) == 2
        js = rep.json_summary()
        assert js["p0"] == 0.9
        assert len(js["exact-rates"]) == 2


class TestCluster:
    def test_doubling_single_cluster(self):
        doubling = make_map("doubling")
        rep = srb_cluster(doubling, 10_000, samples=50, eps=0.05, seed=0)
        assert rep.n_clusters == 1
        assert rep.cluster_masses == (1.0,)
        assert rep.stabilized
        assert rep.flags == []
        leb = UlamMeasure.lebesgue(256)
        assert rep.centroid_dist_to(leb)[0] < 0.02

    def test_intermittent_drifts_to_dirac(self):
        ter = make_map("intermittent", alpha=2.0)
        delta0 = EmpiricalMeasure.dirac(0.0)
        dists = []
        for horizon in (1000, 10_000):
            rep = srb_cluster(ter, horizon, samples=50, eps=0.05, seed=0)
            dists.append(float(rep.centroid_dist_to(delta0).min()))
        assert dists[1] < dists[0]

    def test_short_horizon_flagged_unstable(self):
        ter = make_map("intermittent", alpha=2.0)
        rep = srb_cluster(ter, 1000, samples=50, eps=0.05, seed=0)
        assert not rep.stabilized
        assert any("stabilization" in f for f in rep.flags)

    def test_periodic_seed_zero_diameter(self):
        doubling = make_map("doubling")
        rep = srb_cluster(doubling, 1000, samples=50, eps=0.05,
                          starts=[Fraction(1, 3)] * 50)
        assert rep.n_clusters == 1
        assert rep.dist_matrix.max() == 0.0
        assert rep.max_centroid_dist < 1e-15

    def test_two_point_masses_split(self):
        doubling = make_map("doubling")
        starts = [Fraction(1, 3)] * 25 + [Fraction(0)] * 25
        rep = srb_cluster(doubling, 500, samples=50, eps=0.05, starts=starts)
        assert rep.n_clusters == 2
        assert rep.cluster_masses == (0.5, 0.5)
        assert rep.labels[:25].max() == 0
        assert rep.labels[25:].min() == 1

    def test_masses_sum_to_one(self):
        doubling = make_map("doubling")
        rep = srb_cluster(doubling, 2000, samples=60, eps=0.05, seed=4)
        assert abs(sum(rep.cluster_masses) - 1.0) < 1e-12
        assert rep.max_centroid_dist <= rep.eps

    def test_samples_within_radius_of_centroid(self):
        doubling = make_map("doubling")
        rep = srb_cluster(doubling, 5000, samples=50, eps=0.05, seed=1)
        names, rows = rep.csv_table()
        assert names == ("seed", "cluster", "dist-to-centroid")
        assert len(rows) == 50
        assert max(r[2] for r in rows) == pytest.approx(rep.max_centroid_dist)

    def test_validation(self):
        doubling = make_map("doubling")
        with pytest.raises(ConfigError):
            srb_cluster(doubling, 1000, samples=10)
        with pytest.raises(ConfigError):
            srb_cluster(doubling, 1, samples=50)
        with pytest.raises(ConfigError):
            srb_cluster(doubling, 1000, samples=50, eps=0.0)
        with pytest.raises(ConfigError):
            srb_cluster(doubling, 1000, samples=50, starts=[0.5])

    def test_json_summary(self):
        doubling = make_map("doubling")
        rep = srb_cluster(doubling, 2000, samples=50, eps=0.05, seed=0)
        js = rep.json_summary()
        assert js["clusters"] == 1
        assert js["cluster-masses"] == [1.0]
        assert js["stabilized"] is True
