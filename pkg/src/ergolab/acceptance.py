"""Cross-module acceptance checks at desk scale.

Each criterion is a self-contained run with an explicit pass condition and
a runtime budget; the suite executes them in order and renders one line
per criterion. Numeric tolerances live here, next to the checks they
govern, so the suite output is the single source of truth for what the
package promises.
"""

import time
from dataclasses import dataclass

import numpy as np

from .hyperbolic import ht_frequency, scan_hyperbolic_times, scan_naive, scan_stream
from .maps import make_map
from .measures import EmpiricalMeasure, UlamMeasure, empirical
from .orbits import iterate
from .potentials import make_potential
from .pressure import pesin_defect, pressure_separated, entropy_spanning
from .reports import csv_bytes, render_report, report_bytes
from .srb import ldp_rate, pseudo_basin_mass, srb_cluster, weak_srb_scan
from .transfer import conformal_solve, gibbs_check, jacobian_check
from .fixedpoint import CirclePoint


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: str
    metrics: dict
    elapsed: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} [{tag}] {self.title}: "
                f"{self.details} ({self.elapsed:.1f}s of {self.budget:.0f}s)")


def _criterion_1(seed):
    """Separated-set pressure agrees with the spectral one for three potentials."""
    doubling = make_map("doubling")
    rows, ok = [], True
    for name, params, sep_tol in (
        ("zero", {}, 0.02),
        ("neg_log_branches", {}, 0.02),
        ("cosine", {"amplitude": 1.0}, 0.02),
    ):
        phi = make_potential(name, doubling, **params)
        sep = pressure_separated(doubling, phi)
        sol = conformal_solve(doubling, phi, 1 << 12)
        diff = abs(sep.value - sol.pressure)
        good = diff <= sep_tol
        if name == "neg_log_branches":
            good = good and abs(sol.pressure) <= 1e-3 and abs(sep.value) <= 0.03
        ok = ok and good
        rows.append(f"{name}: sep={sep.value:+.6f} spectral={sol.pressure:+.6f}")
    return ok, "; ".join(rows), {}


def _criterion_2(seed):
    """Conformal solve is exact for the constant potential at N = 2^12."""
    doubling = make_map("doubling")
    phi = make_potential("neg_log_branches", doubling)
    sol = conformal_solve(doubling, phi, 1 << 12)
    lam_err = abs(sol.leading - 1.0)
    cell_err = float(np.max(np.abs(sol.measure.masses - 1.0 / 4096)))
    jac_err = jacobian_check(sol)
    ok = lam_err <= 1e-10 and cell_err <= 1e-10 and jac_err <= 1e-8
    return ok, (f"lambda err {lam_err:.2e}, cell err {cell_err:.2e}, "
                f"jacobian err {jac_err:.2e}"), {
        "lambda-error": lam_err, "cell-error": cell_err, "jacobian-error": jac_err}


def _criterion_3(seed):
    """Gibbs ratios are the constant 0.4 on the exact-geometry path."""
    doubling = make_map("doubling")
    phi = make_potential("neg_log_branches", doubling)
    sol = conformal_solve(doubling, phi, 1 << 12)
    rep = gibbs_check(sol, CirclePoint.from_fraction(1, 3), 30, 0.1)
    spread = float(np.max(np.abs(rep.ratios - 0.4)))
    ok = rep.complete and rep.ratios.size == 30 and spread <= 1e-6
    return ok, f"r_n spread around 0.4 is {spread:.2e} over n <= 30", {
        "ratio-spread": spread}


def _criterion_4(seed):
    """Pesin defect small for Lebesgue seeds; exact for the fixed-point orbit."""
    doubling = make_map("doubling")
    worst = 0.0
    for i in range(20):
        orbit = iterate(doubling, None, 100_000, seed=(seed, "pesin", i))
        rep = pesin_defect(doubling, empirical(orbit), resolution=2,
                           q_ladder=(5, 6, 8, 10))
        worst = max(worst, abs(rep.defect))
    control = pesin_defect(
        doubling, empirical(iterate(doubling, 0.0, 1000)),
        resolution=2, q_ladder=(5, 6, 8, 10),
    )
    control_err = abs(control.defect + 0.6931471805599453)
    ok = worst <= 0.05 and control_err <= 1e-6 and control.kr_verdicts[0.5] is False
    return ok, (f"worst |defect| {worst:.4f} over 20 seeds; "
                f"fixed-point control defect err {control_err:.1e}, "
                f"K_0.5 {control.kr_verdicts[0.5]}"), {
        "worst-defect": worst, "control-error": control_err}


def _criterion_5(seed):
    """Linear-time hyperbolic scan equals the quadratic oracle; doubling is all times."""
    rng = np.random.default_rng(20250816)
    mismatches = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 40))
        a = rng.normal(loc=-0.2, scale=0.7, size=n)
        sigma = float(rng.uniform(0.5, 0.99))
        if scan_stream(a, sigma).times.tolist() != scan_naive(a, sigma).times.tolist():
            mismatches += 1
    doubling = make_map("doubling")
    orbit = iterate(doubling, None, 1000, seed=seed)
    theta = scan_hyperbolic_times(orbit, 0.75).theta
    ok = mismatches == 0 and theta == 1.0
    return ok, f"{mismatches} scan mismatches in 10^4 streams; doubling theta = {theta}", {
        "mismatches": mismatches, "theta": theta}


def _criterion_6(seed):
    """Positive hyperbolic-time density for the deformation, stable in the master seed."""
    nue = make_map("nue_deform", a=0.2)
    reps = [ht_frequency(nue, 0.9, 10_000, samples=100, seed=s)
            for s in (seed, seed + 1)]
    drift = abs(reps[0].mean - reps[1].mean) / reps[0].mean
    ok = all(r.pct5 > 0 for r in reps) and drift <= 0.05
    return ok, (f"pct5 = {reps[0].pct5:.4f}/{reps[1].pct5:.4f}, "
                f"mean drift {100 * drift:.2f}%"), {
        "pct5": [r.pct5 for r in reps], "mean-drift": drift}


def _criterion_7(seed):
    """LDP rates: exact binomial vs limit vs Monte Carlo; basin rates both ways."""
    doubling = make_map("doubling")
    ldp = ldp_rate(doubling, 0.9, samples=1_000_000, seed=seed)
    j20 = ldp.n_ladder.index(20)
    gap = abs(ldp.exact_rates[j20] - ldp.limit_rate) / abs(ldp.limit_rate)
    dirac = pseudo_basin_mass(doubling, EmpiricalMeasure.dirac(0.0), 0.1,
                              (12, 14, 16, 18, 20), samples=20_000, seed=seed)
    leb = pseudo_basin_mass(doubling, UlamMeasure.lebesgue(256), 0.1,
                            (500, 1000, 2000, 4000, 8000, 10_000),
                            samples=200, seed=seed)
    ok = (gap <= 0.20 and bool(np.all(ldp.within_wilson))
          and dirac.rate <= -0.1 and leb.rate >= -0.02)
    return ok, (f"n=20 rate within {100 * gap:.1f}% of limit; MC in Wilson: "
                f"{bool(np.all(ldp.within_wilson))}; dirac rate {dirac.rate:.3f}; "
                f"lebesgue rate {leb.rate:.4f}"), {
        "rate-gap": gap, "dirac-rate": dirac.rate, "lebesgue-rate": leb.rate}


def _criterion_8(seed):
    """One cluster at Lebesgue for doubling; intermittent centroids drift to delta_0."""
    doubling = make_map("doubling")
    rep = srb_cluster(doubling, 100_000, samples=50, eps=0.05, seed=seed)
    leb_dist = float(rep.centroid_dist_to(UlamMeasure.lebesgue(256))[0])
    ter = make_map("intermittent", alpha=2.0)
    delta0 = EmpiricalMeasure.dirac(0.0)
    drift = [
        float(srb_cluster(ter, h, samples=50, eps=0.05, seed=seed)
              .centroid_dist_to(delta0).min())
        for h in (1000, 10_000, 100_000)
    ]
    ok = (rep.n_clusters == 1 and leb_dist <= 0.02
          and drift[0] > drift[1] > drift[2])
    return ok, (f"doubling: {rep.n_clusters} cluster at {leb_dist:.4f} from "
                f"Lebesgue; intermittent dist to delta_0 "
                + " > ".join(f"{d:.4f}" for d in drift)), {
        "lebesgue-dist": leb_dist, "dirac-drift": drift}


def _criterion_9(seed):
    """Cluster centroids converge to the unperturbed one as a -> 0."""
    base = srb_cluster(make_map("doubling"), 10_000, samples=50, eps=0.05, seed=seed)
    w = base.basis_weights
    c0 = base.centroid_moments[0]
    gaps = []
    for a in (0.02, 0.01, 0.005):
        rep = srb_cluster(make_map("nue_deform", a=a), 10_000, samples=50,
                          eps=0.05, seed=seed)
        gaps.append(float(np.dot(w, np.abs(rep.centroid_moments[0] - c0))))
    ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 0.05
    return ok, "centroid gaps " + " > ".join(f"{g:.6f}" for g in gaps), {"gaps": gaps}


def _determinism_artifacts(seed) -> dict:
    """Representative reports rendered through the real serialization path."""
    doubling = make_map("doubling")
    nue = make_map("nue_deform", a=0.2)
    leb = UlamMeasure.lebesgue(256)
    out = {}

    sol = conformal_solve(doubling, make_potential("neg_log_branches", doubling), 1 << 10)
    out["conformal.json"] = report_bytes(render_report(
        {"map": {"family": "doubling"}}, sol.json_summary("conformal-cells.csv")))
    out["conformal-cells.csv"] = csv_bytes(
        ("cell", "mass"), list(enumerate(sol.measure.masses)))

    freq = ht_frequency(nue, 0.9, 2000, samples=20, seed=seed)
    out["hyp-times.json"] = report_bytes(render_report(
        {"map": {"family": "nue_deform", "a": "0.2"}}, freq.json_summary()))
    out["hyp-times.csv"] = csv_bytes(*freq.csv_table())

    ests, verdict = weak_srb_scan(doubling, leb, (0.1,), (100, 200, 400),
                                  samples=50, seed=seed)
    out["srb-scan.json"] = report_bytes(render_report(
        {"map": {"family": "doubling"}},
        {"verdict": verdict.json_summary(),
         "estimates": [e.json_summary() for e in ests]}))
    out["srb-scan-dists.csv"] = csv_bytes(*ests[0].csv_table())

    ldp = ldp_rate(doubling, 0.9, n_ladder=(8, 12, 16), samples=100_000, seed=seed)
    out["ldp.json"] = report_bytes(render_report({}, ldp.json_summary()))
    out["ldp.csv"] = csv_bytes(*ldp.csv_table())

    ent = entropy_spanning(doubling, eps_ladder=(0.05,), n_ladder=tuple(range(6, 11)))
    out["entropy.json"] = report_bytes(render_report(
        {"map": {"family": "doubling"}},
        {"value": ent.value, "uncertainty": ent.uncertainty,
         "values": ent.values, "spanning-counts": ent.spanning_counts}))
    return out


def _criterion_10(seed):
    """Equal (config, seed) runs serialize byte-for-byte."""
    first = _determinism_artifacts(seed)
    second = _determinism_artifacts(seed)
    bad = sorted(k for k in first if first[k] != second[k])
    ok = not bad and sorted(first) == sorted(second)
    detail = "all artifacts byte-identical" if ok else f"diverged: {', '.join(bad)}"
    return ok, f"{len(first)} artifacts re-rendered; {detail}", {
        "artifacts": sorted(first), "diverged": bad}


CRITERIA = (
    (1, "pressure agreement across potentials", 120.0, _criterion_1),
    (2, "conformal exactness at N = 2^12", 10.0, _criterion_2),
    (3, "Gibbs ratio certification", 5.0, _criterion_3),
    (4, "Pesin defect on Lebesgue seeds", 180.0, _criterion_4),
    (5, "hyperbolic-time scan correctness", 60.0, _criterion_5),
    (6, "deformation hyperbolic-time frequency", 120.0, _criterion_6),
    (7, "large-deviation and basin rates", 180.0, _criterion_7),
    (8, "unique physical-measure clustering", 300.0, _criterion_8),
    (9, "statistical-stability regression", 300.0, _criterion_9),
    (10, "byte-for-byte determinism", 60.0, _criterion_10),
)


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    for num, title, budget, fn in CRITERIA:
        if num == number:
            start = time.perf_counter()
            passed, details, metrics = fn(seed)
            elapsed = time.perf_counter() - start
            if elapsed > budget:
                passed = False
                details += f"; exceeded the {budget:.0f}s budget"
            return CriterionResult(num, title, passed, details, metrics,
                                   elapsed, budget)
    raise ValueError(f"no acceptance criterion {number}")


def run_suite(seed: int = 0, numbers=None):
    wanted = tuple(numbers) if numbers else tuple(num for num, *_ in CRITERIA)
    return [run_criterion(num, seed) for num in wanted]
