"""Generating functions of the comb walk and the Abel-type potential kernel.

With ``s = sqrt(1 - z^2)``:

    F1(z) = (1 - s) / z
    F2(z) = (1 + s - sqrt(2) sqrt(s^2 + s)) / z
    G(o, o | z) = sqrt(2) / sqrt(s^2 + s)

and ``G(x, o | z) = F1^|x2| F2^|x1| G(o, o | z)``. Both F's are evaluated in
rationalised form to avoid cancellation near ``z = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

DP_MAX_STEPS = 64


@dataclass(frozen=True)
class KernelPoint:
    z: float
    F1: float
    F2: float
    G: float


def _check_z(z: float) -> float:
    z = float(z)
    if not 0.0 < z < 1.0:
        raise ValueError(f"z must lie in (0, 1), got {z!r}")
    return z


def kernel_eval(z: float) -> KernelPoint:
    z = _check_z(z)
    s = math.sqrt((1.0 - z) * (1.0 + z))
    root = math.sqrt(2.0) * math.sqrt(s * s + s)
    # (1 - s)(1 + s) = z^2 and (1 + s)^2 - 2(s^2 + s) = z^2
    f1 = z / (1.0 + s)
    f2 = z / (1.0 + s + root)
    return KernelPoint(z=z, F1=f1, F2=f2, G=2.0 / root)


def green_gf(x, z: float) -> float:
    """``G(x, o | z) = sum_t P_x[X_t = o] z^t``."""
    p = kernel_eval(z)
    return p.G * p.F1 ** abs(int(x[1])) * p.F2 ** abs(int(x[0]))


def A_gf(x, z: float) -> float:
    """``A(x, o | z) = G(o, o | z) (1 - F1^|x2| F2^|x1|)``."""
    p = kernel_eval(z)
    # 1 - F1^a F2^b through log1p/expm1 keeps digits as z -> 1
    log_prod = abs(int(x[1])) * math.log(p.F1) + abs(int(x[0])) * math.log(p.F2)
    return p.G * -math.expm1(log_prod)


def _sqrt_one_minus_u(m: int) -> list[Fraction]:
    # sqrt(1 - u) = sum binom(1/2, j) (-u)^j
    out = [Fraction(1)]
    for j in range(1, m + 1):
        out.append(out[-1] * (Fraction(2 * j - 3, 2 * j)))
    return out


def _power_series(f: list[Fraction], alpha: Fraction) -> list[Fraction]:
    """Coefficients of ``f(u)^alpha`` for ``f[0] == 1``."""
    g = [Fraction(1)]
    for m in range(1, len(f)):
        acc = sum(((alpha + 1) * k - m) * f[k] * g[m - k] for k in range(1, m + 1))
        g.append(acc / m)
    return g


def green_series_coefficients(t_max: int) -> list[Fraction]:
    """Exact ``p_t(o, o)`` for ``t = 0..t_max`` read off the series of ``G(o, o | z)``."""
    m = t_max // 2
    s = _sqrt_one_minus_u(m)
    # w/2 = (1 - u + s)/2 in the variable u = z^2, with constant term 1
    half_w = [Fraction(1)] + [Fraction(0)] * m
    half_w[0] = (1 + s[0]) / 2
    for j in range(1, m + 1):
        half_w[j] = s[j] / 2
    if m >= 1:
        half_w[1] -= Fraction(1, 2)
    g = _power_series(half_w, Fraction(-1, 2))
    out = [Fraction(0)] * (t_max + 1)
    for j, c in enumerate(g):
        out[2 * j] = c
    return out


def return_prob_dp(t_max: int, start=(0, 0)) -> np.ndarray:
    """``P_start[X_t = o]`` for ``t = 0..t_max`` by forward dynamics on a finite window."""
    if not 0 <= t_max <= DP_MAX_STEPS:
        raise ValueError(f"t_max must lie in [0, {DP_MAX_STEPS}]")
    x0, y0 = int(start[0]), int(start[1])
    w = t_max + max(abs(x0), abs(y0)) + 1
    size = 2 * w + 1
    p = np.zeros((size, size))
    p[x0 + w, y0 + w] = 1.0
    out = np.empty(t_max + 1)
    out[0] = p[w, w]
    for t in range(1, t_max + 1):
        nxt = np.zeros_like(p)
        back = p[:, w].copy()
        tooth = p.copy()
        tooth[:, w] = 0.0
        nxt[:, 1:] += 0.5 * tooth[:, :-1]
        nxt[:, :-1] += 0.5 * tooth[:, 1:]
        nxt[1:, w] += 0.25 * back[:-1]
        nxt[:-1, w] += 0.25 * back[1:]
        nxt[:, w + 1] += 0.25 * back
        nxt[:, w - 1] += 0.25 * back
        p = nxt
        out[t] = p[w, w]
    return out
