"""Acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line; the lines are printed as they happen
(visible with ``-s``) and again in the terminal summary.
Run directly with ``python tests/test_acceptance.py`` for the lines alone.
"""

from __future__ import annotations

import os

import pytest

from combagg import verify

RESULTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    RESULTS[number] = line
    print(line)


def test_01_sandpile_shape():
    reps = [verify.check_shape(n) for n in (10**3, 10**4, 10**5)]
    ok = all(r["pass"] for r in reps) and reps[-1]["wall_s"] < 120
    detail = "; ".join(
        f"n={r['n']} symdiff={r['sym_diff']} far={len(r['far_from_boundary'])} "
        f"dx={r['x_extent_error']:.2f} dh={r['tooth_height_error']:.2f}"
        for r in reps
    )
    record(1, ok, f"{detail}; n=1e5 in {reps[-1]['wall_s']:.1f}s")
    assert ok


def test_02_odometer_sandwich():
    reps = [verify.check_sandwich(n) for n in (10**3, 10**4)]
    ok = all(r["pass"] for r in reps)
    detail = "; ".join(
        f"n={r['n']} max(u-gamma)={r['max_u_minus_gamma']:.2e} max(gamma-2-u)={r['max_gamma_minus_a_minus_u']:.2e}"
        for r in reps
    )
    record(2, ok, detail)
    assert ok


def test_03_abelian():
    r = verify.check_abelian(10**3)
    record(3, r["pass"], f"sup|u_sweep - u_queue| = {r['sweep_vs_queue']:.2e}, block vs queue {r['block_vs_queue']:.2e}")
    assert r["pass"]


def test_04_recursion_identities():
    r = verify.check_recursion(50)
    record(4, r["pass"], f"max relative residual {r['max_relative_residual']:.2e} over 50 t")
    assert r["pass"]


def test_05_idla_inner_bound():
    r = verify.check_idla_inner(10**4, 0.15, trials=20, seed=0, jobs=os.cpu_count() or 1)
    record(
        5,
        r["pass"],
        f"{r['contained']}/20 seeds contain B_(0.85n) (need 19); smallest eps with 20/20 = {r['smallest_eps_all_contained']:.2f}",
    )
    assert r["pass"]


def test_06_expected_M():
    r = verify.check_expected_M(200)
    worst = max(t["z_score"] for t in r["targets"])
    record(6, r["pass"], f"5 targets, worst |MC - Green ratio| = {worst:.2f} SE (limit 4)")
    assert r["pass"]


def test_07_rotor_odometer_inequality():
    r = verify.check_rotor_bound_all((500, 2000))
    record(7, r["pass"], f"min slack {r['min_slack']:.4f} over n in (500, 2000) and 3 presets")
    assert r["pass"]


def test_08_tree_identity():
    r = verify.check_tree_identity(500, 20)
    record(8, r["pass"], f"identity error {r['max_identity_error']:.1e}, |gap - 1| {r['max_gap_error']:.1e}")
    assert r["pass"]


def test_09_rotor_inner_region():
    r = verify.check_rotor_region(10**4)
    missing = {x["rotors"]: x["missing"] for x in r["runs"]}
    record(9, r["pass"], f"|inner region| = {r['inner_size']}, missing per preset {missing}")
    assert r["pass"]


def test_10_line_regular():
    r = verify.check_line_regular((999, 10**4))
    record(10, r["pass"], "S_(n/3) in R_n for " + ", ".join(f"{x['n']}/{x['rotors']}" for x in r["runs"] if x["contained"]))
    assert r["pass"]


def test_11_g_closed_form():
    r = verify.check_g_closed_form()
    disc = ", ".join(f"{d:.3f}" for d in r["discrepancy"])
    exact = ", ".join(f"{d:.1e}" for d in r["discrepancy_exact_centre"])
    record(
        11,
        r["pass"],
        f"recursion {r['recursion_residual']:.1e}, boundary zero {r['boundary_zero_residual']:.1e}, "
        f"discrepancy {disc} (decreasing={r['decreasing']}); centre-consistent b gives {exact}",
    )
    assert r["pass"]


def test_12_ratio_on_inner_boundary():
    r = verify.check_lambda_ratio(10**5, 0.2)
    record(12, r["pass"], f"min f/g on inner boundary = {r['min_ratio']:.4f} at {tuple(r['at'])}, bound eps/4 = 0.05")
    assert r["pass"]


def test_13_potential_kernel():
    r = verify.check_kernel(40)
    record(
        13,
        r["pass"],
        f"series vs DP {r['max_coefficient_error']:.1e}, A((1,0)) = {r['A_1_0']:.4f}, A((0,5)) = {r['A_0_5']:.4f} (need <= 0.1)",
    )
    assert r["pass"]


def test_14_interval_green():
    r = verify.check_interval_green((1, 10, 100))
    record(14, r["pass"], f"max |exact - solve| = {r['max_error']:.1e}")
    assert r["pass"]


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
