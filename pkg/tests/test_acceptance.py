"""The acceptance battery, one test per criterion, one printed line each.

Run with ``pytest -s tests/test_acceptance.py`` to see every line, or use the
CLI equivalent ``freeze-lab verify``.  A6 pins the zone-Z1 Gibbs ratio to the
asserted constant 0.25; the solved model (cross-validated by the independent
finite-state oracle) converges to the equal mix instead, so that criterion
fails honestly — its detail line records both the observed ratio and the
mass-identity prediction it does converge to.
"""

import pytest

from freeze_lab.acceptance import criterion_names, run_criterion


def _run(name: str):
    result = run_criterion(name)
    status = "PASS" if result.passed else "FAIL"
    print(f"{result.name} {status} ({result.seconds:.1f}s): {result.detail}")
    assert result.passed, f"{result.name} failed: {result.detail}"


def test_names_cover_battery():
    assert criterion_names() == [f"A{k}" for k in range(1, 11)]


def test_a1_exact_zero_temperature_anchor():
    _run("A1")


def test_a2_oracle_equivalence():
    _run("A2")


def test_a3_rate_consistency_on_draws():
    _run("A3")


def test_a4_pressure_decay_rate():
    _run("A4")


def test_a5_eigenmeasure_selection():
    _run("A5")


def test_a6_gibbs_ratio_z1():
    _run("A6")


def test_a7_gibbs_decay_z2():
    _run("A7")


def test_a8_boundary_zone_prefactor():
    _run("A8")


def test_a9_log_scale_subaction():
    _run("A9")


def test_a10_series_self_tests():
    _run("A10")
