"""Acceptance battery: one test per criterion, each at its stated tolerance.

Every test runs the corresponding criterion end to end through the public
entry points and asserts the structured verdict, so `pytest -v` on this
module is the pass/fail table for the package's promises. The per-criterion
runtime budgets are enforced inside run_criterion itself.
"""

from ergolab.acceptance import run_criterion


def check(number):
    result = run_criterion(number)
    assert result.passed, result.line()


def test_01_pressure_agreement_across_potentials():
    check(1)


def test_02_conformal_exactness_at_4096_cells():
    check(2)


def test_03_gibbs_ratio_certification():
    check(3)


def test_04_pesin_defect_on_lebesgue_seeds():
    check(4)


def test_05_hyperbolic_time_scan_correctness():
    check(5)


def test_06_deformation_hyperbolic_time_frequency():
    check(6)


def test_07_large_deviation_and_basin_rates():
    check(7)


def test_08_unique_physical_measure_clustering():
    check(8)


def test_09_statistical_stability_regression():
    check(9)


def test_10_byte_for_byte_determinism():
    check(10)
