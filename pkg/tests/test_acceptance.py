"""Acceptance gate: every headline criterion at its stated tolerance.

Each criterion prints one PASS/FAIL line (run pytest with -s to see them
live; they also appear in captured output).  The criteria consume the
records of a single full verification run at the default configuration
(N = 32, M_t = 64), so the numbers asserted here are exactly the numbers
in the shipped report.
"""

import json

import numpy as np
import pytest

from looplab.harness import Config, run_suite

SEED = 2026


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    cfg = Config(seed=SEED, output_dir=str(out))
    report = run_suite(cfg, "all", write=True)
    return cfg, report


@pytest.fixture(scope="module")
def records(full_run):
    _, report = full_run
    return {r.name: r for r in report.records}


def _criterion(num: int, label: str, pieces) -> None:
    """Print the one-line verdict, then assert every piece."""
    ok = all(p.passed for p in pieces)
    print(f"[ACCEPTANCE {num:02d}] {label}: {'PASS' if ok else 'FAIL'}")
    for p in pieces:
        status = "pass" if p.passed else "FAIL"
        print(
            f"    {status} {p.name}: computed={p.computed:.6g} bound={p.bound:.6g} "
            f"margin={p.margin:.6g}"
        )
    assert ok, f"criterion {num} failed: " + ", ".join(
        f"{p.name} (computed {p.computed:.6g} vs bound {p.bound:.6g})"
        for p in pieces
        if not p.passed
    )


def test_criterion_01_aps_closed_form_identity(records):
    _criterion(
        1,
        "APS boundary defect and time-derivative mass closed forms",
        [
            records["aps.q_boundary_defect_closed_form"],
            records["aps.q_defect_inequality"],
            records["aps.q_dt_mass_closed_form"],
        ],
    )


def test_criterion_02_right_inverse(records):
    _criterion(
        2,
        "D(P g) = g on refined grids with vanishing APS boundary",
        [
            records["aps.right_inverse_residual"],
            records["aps.right_inverse_boundary"],
        ],
    )


def test_criterion_03_uniformity_in_eps(records):
    _criterion(
        3,
        "P, Q and restriction-bound estimates uniform across the eps sweep",
        [
            records["aps.uniformity_p_variation"],
            records["aps.uniformity_q_variation"],
            records["aps.uniformity_restriction_variation"],
            records["aps.uniformity_p_no_growth"],
            records["aps.uniformity_q_no_growth"],
            records["aps.uniformity_restriction_no_growth"],
        ],
    )


def test_criterion_04_end_vanishing_sobolev(records):
    _criterion(
        4,
        "int |f|^4 <= eps (int |grad f|^2)^2 for one-end-vanishing fields",
        [records["aps.end_vanishing_l4"]],
    )


def test_criterion_05_contraction_solver(records):
    _criterion(
        5,
        "Picard contraction for small data; ||v*|| monotone in eps",
        [
            records["contraction.small_data_ratio"],
            records["contraction.small_data_residual"],
            records["contraction.vstar_monotone"],
        ],
    )


def test_criterion_06_energy_identity(records):
    _criterion(
        6,
        "action increment equals energy on cylinders and flow trajectories",
        [
            records["contraction.energy_identity"],
            records["flow.linear_energy_closed_form"],
            records["flow.linear_energy_identity"],
            records["flow.nonlinear_energy_identity"],
        ],
    )


def test_criterion_07_gradient_consistency(records):
    _criterion(
        7,
        "action gradient against central finite differences",
        [records["norms.gradient_finite_difference"]],
    )


def test_criterion_08_critical_point_existence(records):
    _criterion(
        8,
        "winding-1 and winding-2 orbits found and matched to the oracle",
        [
            records["orbits.winding1_radius"],
            records["orbits.winding1_action"],
            records["orbits.winding1_gradient"],
            records["orbits.winding1_above_beta"],
            records["orbits.winding2_radius"],
            records["orbits.winding2_action"],
            records["orbits.winding2_gradient"],
            records["orbits.winding2_above_beta"],
        ],
    )


def test_criterion_09_cycle_geometry(records):
    _criterion(
        9,
        "beta > 0 on the sphere, box boundary nonpositive, transverse point",
        [
            records["orbits.beta_positive"],
            records["orbits.sigma_boundary_nonpositive"],
            records["orbits.transversality_full_rank"],
            records["orbits.intersection_unique"],
        ],
    )


def test_criterion_10_resonance_contrast(records):
    _criterion(
        10,
        "energy/norm equivalence: positive bound off resonance, collapse on it",
        [
            records["flow.equivalence_bounds"],
            records["flow.equivalence_positive_lower_bound"],
            records["flow.equivalence_resonant_degenerates"],
        ],
    )


def test_criterion_11_determinism_and_coverage(full_run):
    cfg, report = full_run
    rerun = run_suite(Config(seed=SEED, output_dir=cfg.output_dir), "all", write=True)
    identical = report.to_json() == rerun.to_json()
    coverage_ok = report.coverage_complete
    exit_ok = report.exit_code == 0

    class _Piece:
        def __init__(self, name, passed, computed, bound):
            self.name, self.passed, self.computed, self.bound = name, passed, computed, bound
            self.margin = bound - computed

    pieces = [
        _Piece("run_suite_all_exits_zero", exit_ok, float(report.exit_code), 0.0),
        _Piece("coverage_complete", coverage_ok, 0.0 if coverage_ok else 1.0, 0.5),
        _Piece("rerun_bit_identical", identical, 0.0 if identical else 1.0, 0.5),
    ]
    ok = all(p.passed for p in pieces)
    print(f"[ACCEPTANCE 11] determinism, coverage, overall exit: {'PASS' if ok else 'FAIL'}")
    for p in pieces:
        print(f"    {'pass' if p.passed else 'FAIL'} {p.name}: computed={p.computed:.6g}")
    if not coverage_ok:
        missing = [k for k, v in report.coverage_counts.items() if v == 0]
        print(f"    uncovered operations: {missing}")
    assert ok, "criterion 11 failed: " + ", ".join(p.name for p in pieces if not p.passed)
