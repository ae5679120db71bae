"""Acceptance routines.

Each ``check_*`` function runs one property at desk scale and returns a
JSON-ready dict with a boolean ``pass`` and the measured quantities.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from .idla import estimate_M, expected_M, idla_campaign
from .lattice import bfs_distances
from .potential import (
    A_gf,
    closed_form_discrepancy,
    g_tooth,
    green_series_coefficients,
    interval_green,
    interval_region,
    min_ratio_on_inner_boundary,
    return_prob_dp,
    stopped_green,
)
from .rotor import (
    RotorState,
    check_rotor_bound,
    expected_exit_distance,
    line_regular_check,
    rotor_aggregate,
    rotor_inner_region,
    wtilde,
    wtilde_all,
)
from .sandpile import Schedule, abelian_check, point_mass, sandpile
from .shape import K_SHAPE, ShapeSpec, ball_region, gamma_array, mass_profile

log = logging.getLogger(__name__)

ROTOR_PRESETS = ("all-first", "toward-origin", "custom")


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        out["wall_s"] = round(time.perf_counter() - t0, 3)
        log.info("%s pass=%s", fn.__name__, out["pass"])
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _preset(name: str, n: int, seed: int = 0) -> RotorState:
    if name == "custom":
        # seeded random rotors on a box comfortably larger than the cluster
        return RotorState.random(seed, ball_region(4 * n))
    return RotorState.parse(name)


# -- sandpile ---------------------------------------------------------------------

@_timed
def check_shape(n: int, dist: int = 6, slack: float = 3.0) -> dict:
    """Symmetric difference near the boundary, x-extent and central tooth height."""
    res = sandpile(n)
    ball = ball_region(n)
    diff = res.cluster ^ ball
    outer, inner = ball.boundary()
    near = bfs_distances(list(outer) + list(inner), dist)
    far = [list(v) for v in diff if v not in near]
    spec = ShapeSpec.from_n(n)
    x_err = abs(res.cluster.extent()[1] - K_SHAPE * float(np.cbrt(n)))
    top = res.cluster.column_height(0)[1]
    h_err = abs(top - float(mass_profile(0, spec)) / 2.0)
    # width of the layer where the cluster and the ball disagree
    width = 0
    if len(diff):
        width = max(bfs_distances(list(outer) + list(inner), dist + 50).get(v, dist + 51) for v in diff)
    return {
        "check": "shape",
        "n": n,
        "sym_diff": len(diff),
        "boundary_layer_width": int(width),
        "far_from_boundary": far[:20],
        "x_extent_error": x_err,
        "tooth_height_error": h_err,
        "pass": not far and x_err <= slack and h_err <= slack,
    }


@_timed
def check_sandwich(n: int, a: float = 2.0, tol: float = 1e-6) -> dict:
    """``gamma_n - a <= u_n <= gamma_n`` (the upper bound everywhere, the lower on the ball)."""
    res = sandpile(n)
    support = res.odometer.region
    u = res.u.at(support.xs, support.ys)
    upper = float(np.max(u - gamma_array(n, support.xs, support.ys)))
    ball = ball_region(n)
    lower = float(np.max(gamma_array(n, ball.xs, ball.ys) - a - res.u.at(ball.xs, ball.ys)))
    return {
        "check": "sandwich",
        "n": n,
        "max_u_minus_gamma": upper,
        "max_gamma_minus_a_minus_u": lower,
        "pass": upper <= tol and lower <= tol,
    }


@_timed
def check_abelian(n: int, tol: float = 1e-6) -> dict:
    diff = abelian_check(point_mass(n), Schedule.SWEEP_BOX, Schedule.UNSTABLE_QUEUE, stop_tol=1e-10)
    block = abelian_check(point_mass(n), Schedule.BLOCK, Schedule.UNSTABLE_QUEUE, stop_tol=1e-10)
    return {
        "check": "abelian",
        "n": n,
        "sweep_vs_queue": diff,
        "block_vs_queue": block,
        "pass": diff <= tol and block <= tol,
    }


@_timed
def check_recursion(samples: int = 50, seed: int = 0, tol: float = 1e-12) -> dict:
    """The mass profile satisfies the tooth-balance recursion for random ``t``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in rng.uniform(0.0, 100.0, samples):
        t = float(t) or 1.0
        spec = ShapeSpec.from_t(t)
        nx = mass_profile(np.arange(0, 52), spec)
        # residuals relative to the size of the terms that cancel
        r0 = abs(nx[0] - (spec.n + nx[1] ** 2 / 4 - nx[0] ** 2 / 4))
        s0 = spec.n + nx[1] ** 2 / 4 + nx[0] ** 2 / 4
        x = np.arange(1, 51)
        terms = nx[x - 1] ** 2 / 8 - nx[x] ** 2 / 4 + nx[x + 1] ** 2 / 8
        rx = np.abs(nx[x] - terms)
        sx = nx[x] + nx[x - 1] ** 2 / 8 + nx[x] ** 2 / 4 + nx[x + 1] ** 2 / 8
        worst = max(worst, r0 / s0, float(np.max(rx / sx)))
    return {"check": "recursion", "samples": samples, "max_relative_residual": worst, "pass": worst <= tol}


# -- IDLA ---------------------------------------------------------------------------

@_timed
def check_idla_inner(n: int, eps: float, trials: int = 20, seed: int = 0, jobs: int = 1, need: int | None = None) -> dict:
    records = idla_campaign(n, range(seed, seed + trials), eps, jobs)
    contained = sum(r["contained"] for r in records)
    need = trials - 1 if need is None else need
    crit = max(r["critical_eps"] for r in records)
    return {
        "check": "idla-inner",
        "n": n,
        "eps": eps,
        "trials": trials,
        "contained": contained,
        "required": need,
        "smallest_eps_all_contained": crit,
        "records": records,
        "pass": contained >= need,
    }


DEFAULT_M_TARGETS = ((0, 0), (1, 0), (3, 0), (0, 3), (2, -2))


@_timed
def check_expected_M(n: int = 200, targets=DEFAULT_M_TARGETS, trials: int = 4000, seed: int = 0, k: float = 4.0) -> dict:
    rows = []
    ok = True
    for i, z in enumerate(targets):
        mean, se = estimate_M(n, z, trials, seed + i)
        exact = expected_M(n, z)
        z_score = 0.0 if se == 0 else abs(mean - exact) / se
        good = abs(mean - exact) <= k * se + 1e-9
        ok &= good
        rows.append({"z": list(z), "mc": mean, "se": se, "green": exact, "z_score": z_score, "pass": good})
    return {"check": "expected-M", "n": n, "trials": trials, "targets": rows, "pass": bool(ok)}


# -- rotor ----------------------------------------------------------------------------

@_timed
def check_rotor_bound_all(sizes=(500, 2000), presets=ROTOR_PRESETS, tol: float = 1e-6) -> dict:
    rows = []
    for n in sizes:
        sand = sandpile(n)
        wt, _ = wtilde_all(sand.cluster)
        for p in presets:
            r = check_rotor_bound(n, _preset(p, n), sand=sand, wt=wt)
            r["rotors"] = p
            rows.append(r)
    worst = min(r["min_slack"] for r in rows)
    return {"check": "rotor-bound", "runs": rows, "min_slack": worst, "pass": worst >= -tol}


@_timed
def check_tree_identity(n: int = 500, samples: int = 20, seed: int = 0, tol: float = 1e-8, gap_tol: float = 1e-9) -> dict:
    region = ball_region(n)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(region), size=min(samples, len(region)), replace=False)
    worst = 0.0
    worst_gap = 0.0
    for i in picks:
        y = (int(region.xs[i]), int(region.ys[i]))
        full, restricted = wtilde(y, region)
        e = expected_exit_distance(y, region)
        worst = max(worst, abs(restricted - (2.0 * e - 2.0)))
        worst_gap = max(worst_gap, abs(full - restricted - 1.0))
    return {
        "check": "tree-identity",
        "n": n,
        "samples": len(picks),
        "max_identity_error": worst,
        "max_gap_error": worst_gap,
        "pass": worst <= tol and worst_gap <= gap_tol,
    }


@_timed
def check_rotor_region(n: int = 10**4, presets=ROTOR_PRESETS) -> dict:
    inner = rotor_inner_region(n)
    rows = []
    for p in presets:
        run = rotor_aggregate(n, _preset(p, n))
        missing = inner - run.cluster
        rows.append({"rotors": p, "missing": len(missing), "cluster_size": len(run.cluster)})
    return {
        "check": "rotor-region",
        "n": n,
        "inner_size": len(inner),
        "runs": rows,
        "pass": all(r["missing"] == 0 for r in rows),
    }


@_timed
def check_line_regular(sizes=(999, 10**4), presets=("all-first", "toward-origin")) -> dict:
    rows = []
    for n in sizes:
        for p in presets:
            r = line_regular_check(n, p)
            r["missing"] = len(r["missing"])
            rows.append(r)
    return {"check": "line-regular", "runs": rows, "pass": all(r["contained"] for r in rows)}


# -- potential ---------------------------------------------------------------------------

@_timed
def check_g_closed_form(sizes=(10**3, 10**4, 10**5), eps: float = 0.2, seed: int = 0, tol: float = 1e-9) -> dict:
    rng = np.random.default_rng(seed)
    n0 = sizes[-1]
    big_k = K_SHAPE * float(np.cbrt(n0))
    xs = rng.uniform(0.0, big_k, 100)
    ys = rng.integers(0, 200, 100).astype(float)
    g = lambda x, y: g_tooth(n0, x, y)
    scale = np.maximum(1.0, np.abs(g(xs, ys)))
    rec = float(np.max(np.abs(2 * g(xs, ys) - g(xs, ys + 1) - g(xs, ys - 1) - 1.0) / scale))
    bx = np.array([3.0, 6.0, 9.0, 30.0])
    zero = float(np.max(np.abs(g(bx, bx * bx / 3.0))))
    disc = [closed_form_discrepancy(n, eps) for n in sizes]
    exact = [closed_form_discrepancy(n, eps, exact_centre=True) for n in sizes]
    decreasing = all(b < a for a, b in zip(disc, disc[1:]))
    return {
        "check": "g-closed-form",
        "recursion_residual": rec,
        "boundary_zero_residual": zero,
        "sizes": list(sizes),
        "discrepancy": disc,
        "discrepancy_exact_centre": exact,
        "decreasing": decreasing,
        "pass": rec <= tol and zero <= tol and decreasing,
    }


@_timed
def check_lambda_ratio(n: int = 10**5, eps: float = 0.2) -> dict:
    ratio, at = min_ratio_on_inner_boundary(n, eps)
    return {
        "check": "lambda-ratio",
        "n": n,
        "eps": eps,
        "min_ratio": ratio,
        "at": list(at),
        "bound": eps / 4,
        "pass": ratio >= eps / 4,
    }


@_timed
def check_kernel(t_max: int = 40, tol: float = 1e-10) -> dict:
    exact = np.array([float(c) for c in green_series_coefficients(t_max)])
    dp = return_prob_dp(t_max)
    err = float(np.max(np.abs(exact - dp)))
    z = 1.0 - 1e-6
    a10 = A_gf((1, 0), z)
    a05 = A_gf((0, 5), z)
    return {
        "check": "kernel",
        "t_max": t_max,
        "max_coefficient_error": err,
        "A_1_0": a10,
        "A_0_5": a05,
        "pass": err <= tol and 1.9 <= a10 <= 2.0 and a05 <= 0.1,
    }


@_timed
def check_interval_green(sizes=(1, 10, 100), tol: float = 1e-10) -> dict:
    worst = 0.0
    for b in sizes:
        region = interval_region(b)
        for y in range(-b, b + 1):
            g = stopped_green(region, (y, 0))
            worst = max(worst, abs(g[(y, 0)] - interval_green(b, y)))
    return {"check": "interval-green", "sizes": list(sizes), "max_error": worst, "pass": worst <= tol}


# -- CLI groups ------------------------------------------------------------------------------

def _group(name: str, parts: list[dict]) -> dict:
    return {"check": name, "parts": parts, "pass": all(p["pass"] for p in parts)}


def run_check(name: str, *, n=None, eps=None, trials=None, seed=0, jobs=1, t_max=None) -> dict:
    """Dispatch one named acceptance check; ``n`` overrides the default sizes."""
    if name == "shape":
        sizes = [n] if n else [10**3, 10**4, 10**5]
        parts = [check_shape(s) for s in sizes]
        parts += [check_sandwich(s) for s in (sizes if n else sizes[:2])]
        parts.append(check_recursion(seed=seed))
        return _group(name, parts)
    if name == "abelian":
        return check_abelian(n or 10**3)
    if name == "idla-inner":
        t = trials or 20
        return check_idla_inner(n or 10**4, 0.15 if eps is None else eps, t, seed, jobs)
    if name == "rotor-bound":
        sizes = (n,) if n else (500, 2000)
        return _group(name, [check_rotor_bound_all(sizes), check_tree_identity(n or 500, seed=seed)])
    if name == "rotor-region":
        return check_rotor_region(n or 10**4)
    if name == "line-regular":
        return check_line_regular((n,) if n else (999, 10**4))
    if name == "kernel":
        return check_kernel(t_max or 40)
    if name == "green-consistency":
        return _group(
            name,
            [
                check_expected_M(n or 200, trials=trials or 4000, seed=seed),
                check_g_closed_form(),
                check_lambda_ratio(eps=0.2 if eps is None else eps),
                check_interval_green(),
            ],
        )
    raise ValueError(f"unknown check {name!r}")


CHECKS = ("shape", "abelian", "idla-inner", "rotor-bound", "rotor-region", "line-regular", "kernel", "green-consistency")
