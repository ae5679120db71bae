from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from combagg.lattice import ORIGIN, GraphKind, Region, degree
from combagg.potential import weight_function
from combagg.rotor import (
    RotorError,
    RotorState,
    check_rotor_bound,
    exit_distribution,
    expected_exit_distance,
    line_regular_check,
    rotor_aggregate,
    rotor_aggregate_reference,
    rotor_aggregate_round_robin,
    rotor_inner_region,
    rotor_step,
    rotor_weight,
    toward_origin_index,
    weight_audit,
    wtilde,
    wtilde_all,
)
from combagg.shape import L_SHAPE, ball_region
from combagg.verify import check_tree_identity


def _presets(n, kind=GraphKind.COMB2):
    box = ball_region(4 * n) if kind is GraphKind.COMB2 else Region([(x, 0) for x in range(-n - 3, n + 4)], kind)
    return [RotorState("all-first", kind=kind), RotorState("toward-origin", kind=kind), RotorState.random(n, box, kind)]


def _same(a, b):
    return a.cluster == b.cluster and a.odometer == b.odometer and a.rotors.touched() == b.rotors.touched()


def test_rotor_step_trace():
    s = RotorState()
    assert rotor_step(ORIGIN, s) == (0, 1)
    assert s.index(ORIGIN) == 1
    assert [rotor_step(ORIGIN, s) for _ in range(3)] == [(-1, 0), (0, -1), (1, 0)]
    assert rotor_step((2, 5), s) == (2, 4)
    assert rotor_step((2, 5), s) == (2, 6)


def test_toward_origin_points_home():
    from combagg.lattice import comb_distance, neighbors

    for v in [(3, 0), (-2, 0), (4, 7), (-1, -3)]:
        w = neighbors(v)[toward_origin_index(v)]
        assert comb_distance(ORIGIN, w) == comb_distance(ORIGIN, v) - 1
    for x in (-3, 5):
        w = neighbors((x, 0), GraphKind.LINE)[toward_origin_index((x, 0), GraphKind.LINE)]
        assert abs(w[0]) == abs(x) - 1


def test_small_aggregates():
    assert set(rotor_aggregate(1).cluster) == {ORIGIN}
    assert set(rotor_aggregate(2).cluster) == {(0, 0), (0, 1)}
    assert set(rotor_aggregate(3).cluster) == {(0, 0), (0, 1), (-1, 0)}
    with pytest.raises(ValueError):
        rotor_aggregate(0)


@pytest.mark.parametrize("which", range(3))
def test_kernel_matches_reference_and_round_robin(which):
    initial = _presets(300)[which]
    fast = rotor_aggregate(300, initial)
    assert _same(fast, rotor_aggregate_reference(300, initial))
    assert _same(fast, rotor_aggregate_round_robin(300, initial))


@pytest.mark.parametrize("which", range(3))
def test_line_sweep_matches_stepwise(which):
    for n in (1, 2, 5, 64, 401):
        initial = _presets(n, GraphKind.LINE)[which]
        assert _same(rotor_aggregate(n, initial), rotor_aggregate(n, initial, stepwise=True))


@given(st.integers(1, 200), st.integers(0, 10**6))
def test_line_sweep_random_rotors(n, seed):
    box = Region([(x, 0) for x in range(-n - 3, n + 4)], GraphKind.LINE)
    initial = RotorState.random(seed, box, GraphKind.LINE)
    assert _same(rotor_aggregate(n, initial), rotor_aggregate(n, initial, stepwise=True))


def test_run_invariants_and_determinism():
    for initial in _presets(2000):
        run = rotor_aggregate(2000, initial)
        assert len(run.cluster) == 2000 and ORIGIN in run.cluster
        assert run.cluster.is_connected()
        assert all(isinstance(c, int) and c > 0 for c in run.odometer.values())
        for v, m in run.odometer.items():
            assert run.rotors.index(v) == (initial.initial(v) + m) % degree(v)
        again = rotor_aggregate(2000, initial)
        assert _same(run, again)


def test_step_cap():
    with pytest.raises(RotorError):
        rotor_aggregate(200, step_cap=3)


def test_state_csv_round_trip(tmp_path):
    run = rotor_aggregate(100, _presets(100)[2])
    path = tmp_path / "rotors.csv"
    run.rotors.to_csv(path)
    back = RotorState.parse(f"file:{path}")
    for v, i in run.rotors.touched().items():
        assert back.initial(v) == i
    with pytest.raises(ValueError):
        RotorState.parse("sideways")


def test_weight_audit_constant_h():
    assert weight_audit(100, lambda v: 1.0) == 0.0
    assert rotor_weight((0, 0), 7, lambda v: 1.0) == 0.0


def test_weight_audit_green_weight():
    ball = ball_region(100)
    h = weight_function(ball, ORIGIN)
    assert weight_audit(100, h) <= 1e-9 * max(1.0, float(np.abs(h.values).max()))


@pytest.mark.parametrize("preset", ["toward-origin", "custom"])
def test_weight_audit_random_h(preset):
    rng = np.random.default_rng(8)
    ball = ball_region(200)
    pick = rng.choice(len(ball), 40, replace=False)
    h = {(int(ball.xs[i]), int(ball.ys[i])): float(rng.normal()) for i in pick}
    initial = RotorState.random(1, ball) if preset == "custom" else RotorState(preset)
    assert weight_audit(50, h, initial) <= 1e-9


def test_wtilde_single_site():
    full, restricted = wtilde(ORIGIN, Region([ORIGIN]))
    assert full == pytest.approx(1.0) and restricted == 0.0
    assert expected_exit_distance(ORIGIN, Region([ORIGIN])) == 1.0


def test_wtilde_gap_is_exit_flux():
    ball = ball_region(100)
    full, restricted = wtilde_all(ball)
    assert np.all(full >= restricted)
    assert np.max(np.abs(full - restricted - 1.0)) <= 1e-9
    f0, r0 = wtilde((2, 1), ball)
    i = ball.index_of([2], [1])[0]
    assert f0 == pytest.approx(full[i], abs=1e-9) and r0 == pytest.approx(restricted[i], abs=1e-9)


def test_exit_distribution_sums_to_one():
    ball = ball_region(100)
    dist = exit_distribution((1, 2), ball)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    outer, _ = ball.boundary()
    assert set(dist) <= set(outer)


def test_tree_identity():
    rep = check_tree_identity(500)
    assert rep["pass"], rep


def test_exit_distance_bound():
    n = 1000
    ball = ball_region(n)
    rng = np.random.default_rng(4)
    for i in rng.choice(len(ball), 20, replace=False):
        x, y = int(ball.xs[i]), int(ball.ys[i])
        assert expected_exit_distance((x, y), ball) <= abs(x) + abs(y) + L_SHAPE * n ** (2 / 3) + 1


def test_rotor_bound_small():
    assert check_rotor_bound(1)["min_slack"] >= 0
    assert check_rotor_bound(500, "all-first")["min_slack"] >= -1e-6


def test_inner_region():
    for n in (5, 18):
        assert len(rotor_inner_region(n)) == 0
    inner = rotor_inner_region(10**4)
    assert len(inner) > 0
    assert inner.issubset(ball_region(10**4))
    assert Region.from_arrays(-inner.xs, inner.ys) == inner
    assert Region.from_arrays(inner.xs, -inner.ys) == inner


def test_line_regular_small():
    rep = line_regular_check(3)
    assert rep["contained"] and rep["sandpile_size"] == 1
    assert line_regular_check(999, "toward-origin")["contained"]
