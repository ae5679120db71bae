from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from combagg.fields import LatticeField
from combagg.lattice import GraphKind, Region
from combagg.shape import (
    K_SHAPE,
    L_SHAPE,
    ShapeSpec,
    ball_region,
    cubic_mass,
    extents,
    gamma,
    gamma_array,
    gamma_line,
    in_ball,
    mass_profile,
    solve_t,
    solve_t_radical,
)
from combagg.verify import check_recursion


def test_constants():
    assert K_SHAPE == pytest.approx(1.5 ** (2 / 3), rel=1e-15)
    assert L_SHAPE == pytest.approx(0.5 * 1.5 ** (1 / 3), rel=1e-15)


def test_solve_t_examples():
    assert solve_t(7 / 3) == pytest.approx(2.0, rel=1e-14)
    t = solve_t(1e9)
    assert t / 1e3 == pytest.approx(2 * (2 / 3) ** (1 / 3), rel=0.01)
    with pytest.raises(ValueError):
        solve_t(0.0)


def test_solve_t_residual_log_spaced():
    for n in np.logspace(0, 9, 100):
        t = solve_t(n)
        assert abs(n - cubic_mass(t)) <= 1e-10 * n
        assert solve_t_radical(n) == pytest.approx(t, rel=1e-10)


@given(st.floats(1e-3, 1e12))
def test_shape_spec_identity(n):
    spec = ShapeSpec.from_n(n)
    assert spec.t > 0
    assert cubic_mass(spec.t) == pytest.approx(n, rel=1e-12)


def test_gamma_line_examples():
    assert gamma_line(4, 2) == 0
    assert gamma_line(4, 0) == 2
    assert gamma_line(2, 0) == 0.5


def test_gamma_examples():
    assert gamma(7 / 3, (0, 0)) == pytest.approx(25 / 72, rel=1e-12)
    spec = ShapeSpec.from_n(7 / 3)
    assert mass_profile(0, spec) == pytest.approx(5 / 3, rel=1e-12)
    _, height = extents(7 / 3)
    assert height(0) == pytest.approx(5 / 6, rel=1e-12)


def test_gamma_small_at_tooth_tip():
    spec = ShapeSpec.from_n(5000)
    for x in range(-15, 16):
        y = round(float(mass_profile(x, spec)) / 2)
        assert gamma(spec, (x, y)) <= 0.5


def test_recursion_identities():
    assert check_recursion()["pass"]


def test_recursion_centre_consistent():
    # n_0 from the centre balance equals the profile value
    for t in (0.5, 3.0, 40.0):
        spec = ShapeSpec.from_t(t)
        n0, n1 = mass_profile(0, spec), mass_profile(1, spec)
        assert n0 == pytest.approx(spec.n + n1**2 / 4 - n0**2 / 4, rel=1e-12)


def test_gamma_laplacian_on_window():
    n = 3000.0
    xs, ys = np.meshgrid(np.arange(-100, 100), np.arange(-100, 100), indexing="ij")
    window = Region.from_arrays(xs.ravel(), ys.ravel())
    inner = Region.from_arrays(xs[1:-1, 1:-1].ravel(), ys[1:-1, 1:-1].ravel())
    g = LatticeField(window, gamma_array(n, window.xs, window.ys))
    lap = g.laplacian(inner)
    expect = (1.0 - n * ((inner.xs == 0) & (inner.ys == 0))) / inner.degrees()
    assert np.max(np.abs(lap - expect)) <= 1e-9


def test_gamma_nonnegative():
    xs, ys = np.meshgrid(np.arange(-60, 61), np.arange(-400, 401), indexing="ij")
    assert np.all(gamma_array(1e4, xs, ys) >= 0)


def test_ball_membership_examples():
    assert in_ball(1000, (13, 0)) and not in_ball(1000, (14, 0))
    assert in_ball(1000, (0, 57)) and not in_ball(1000, (0, 58))
    assert in_ball(1000, (5, 21)) and not in_ball(1000, (5, 22))
    ball = ball_region(1000)
    assert (13, 0) in ball and (14, 0) not in ball and (5, 21) in ball and (5, 22) not in ball


@given(st.floats(1.0, 1e5))
def test_ball_region_matches_predicate_and_symmetric(n):
    ball = ball_region(n)
    x0, x1, y0, y1 = ball.extent()
    xs, ys = np.meshgrid(np.arange(x0 - 1, x1 + 2), np.arange(y0 - 1, y1 + 2), indexing="ij")
    member = ball.contains_many(xs.ravel(), ys.ravel())
    pred = np.array([in_ball(n, (int(a), int(b))) for a, b in zip(xs.ravel(), ys.ravel())])
    assert np.array_equal(member, pred)
    assert Region.from_arrays(-ball.xs, ball.ys) == ball
    assert Region.from_arrays(ball.xs, -ball.ys) == ball


def test_extents():
    xmax, _ = extents(cubic_mass(2.0))
    assert xmax == pytest.approx(1.5)
    xmax, _ = extents(1e6)
    assert abs(xmax - K_SHAPE * 100) <= 2


def test_line_kind_unaffected():
    assert GraphKind.LINE is not GraphKind.COMB2
