"""The dome with a lightning rod: semi-mixed level set, O(1) negative Besov norm."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from ..errors import InvalidInputError
from ..fields import Grid3, ScalarField, scalar_superlevel
from ..lp import besov_11_fd, besov_inf_inf, build_lp_bank, dual_lower_bound, pairing
from ..sparse import semi_mixed

SMOOTHING = 0.1
DOME_PEAK = 2.0
DOME_SUPPORT = 2.0
LEVEL_FRACTION = 0.75


def _int_smoothstep(t):
    """Antiderivative of the quintic smoothstep, zero at 0 and 1/2 at 1."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (2.5 + t * (-3.0 + t))


def dome_vertices(n_rod: int):
    return [(0.0, 2.0), (1.0 / n_rod, 1.0), (1.0, 1.0), (2.0, 0.0)]


def dome_profile(rho, n_rod: int):
    """Polygon through (0,2), (1/n,1), (1,1), (2,0), (inf,0) with rounded corners.

    Each interior corner is smoothed by blending the two slopes with a quintic
    step over a window of half-width 10% of the shorter adjacent segment, so
    the slope stays between its neighbours' and the profile is non-increasing.
    """
    rho = np.asarray(rho, dtype=float)
    verts = dome_vertices(n_rod) + [(math.inf, 0.0)]
    xs = [v[0] for v in verts]
    slopes = [(verts[k + 1][1] - verts[k][1]) / (verts[k + 1][0] - verts[k][0]) if k < 3 else 0.0
              for k in range(4)]
    # piecewise linear slope field, then blend across each interior corner
    g = np.full(rho.shape, 0.0)
    g = np.where(rho < xs[1], 2.0 + slopes[0] * rho, g)
    g = np.where((rho >= xs[1]) & (rho < xs[2]), 1.0, g)
    g = np.where((rho >= xs[2]) & (rho < xs[3]), 1.0 + slopes[2] * (rho - 1.0), g)
    for k in (1, 2, 3):
        seg_left = xs[k] - xs[k - 1]
        seg_right = xs[k + 1] - xs[k]
        w = SMOOTHING * min(seg_left, seg_right)
        a, b = slopes[k - 1], slopes[k]
        yk = verts[k][1]
        lo = xs[k] - w
        inside = (rho > lo) & (rho < xs[k] + w)
        tau = (rho - lo) / (2.0 * w)
        y_lo = yk - a * w
        blended = y_lo + a * (rho - lo) + (b - a) * 2.0 * w * _int_smoothstep(tau)
        g = np.where(inside, blended, g)
    return g


def corner_windows(n_rod: int):
    """``(vertex, half-width)`` for each smoothed corner."""
    xs = [v[0] for v in dome_vertices(n_rod)] + [math.inf]
    return [(xs[k], SMOOTHING * min(xs[k] - xs[k - 1], xs[k + 1] - xs[k])) for k in (1, 2, 3)]


def build_dome_lightning_rod(n_rod: int, grid: Grid3, center=(0.0, 0.0, 0.0), strict: bool = True) -> ScalarField:
    """``f(x) = g(|x - center|)`` sampled at cell centres.

    With ``strict`` the grid must put at least 4 voxels across the rod
    radius ``1/n_rod``; the error message names the smallest such grid.
    """
    if n_rod < 4:
        raise InvalidInputError(f"rod parameter must be >= 4, got {n_rod}")
    if strict and grid.h > 1.0 / (4.0 * n_rod) + 1e-15:
        need = 1 << math.ceil(math.log2(4.0 * n_rod * grid.L))
        raise InvalidInputError(f"grid spacing {grid.h:.4g} does not resolve the rod 1/{n_rod} with 4 voxels; "
                                f"need n >= {need} at L = {grid.L:g}")
    return ScalarField(grid, dome_profile(grid.radius(center), n_rod))


def dome_l2_squared(n_rod: int) -> float:
    """``int g(|x|)^2 dx`` by adaptive radial quadrature."""
    pts = sorted({x for x, w in corner_windows(n_rod)} | {x + w for x, w in corner_windows(n_rod)}
                 | {x - w for x, w in corner_windows(n_rod)})
    val, _ = integrate.quad(lambda s: 4.0 * math.pi * s * s * float(dome_profile(s, n_rod)) ** 2,
                            0.0, DOME_SUPPORT + 0.5, points=pts, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def default_dome_grid() -> Grid3:
    # support radius 2 sits in a sub-box of side L/2
    return Grid3(64, 8.0)


def rod_zoom_grid(n_rod: int, n: int = 64) -> Grid3:
    """Periodic box of side ``16 / n_rod`` around the tip: scale ``2/n_rod`` is ``L/8``."""
    return Grid3(n, 16.0 / n_rod)


@dataclass
class CounterexampleRow:
    n: int
    r: float
    r_linf: float
    besov_lower_bound: float
    ratio: float
    besov_m1_direct: float
    l2_squared_grid: float
    l2_squared_radial: float
    b11_norm: float
    set_fraction: float
    complement_fraction: float
    rod_voxels: float


def counterexample_row(n_rod: int, grid: Grid3 | None = None, zoom_n: int = 64) -> CounterexampleRow:
    grid = grid or default_dome_grid()
    bank = build_lp_bank(grid)
    f = build_dome_lightning_rod(n_rod, grid, strict=False)
    r = 2.0 / n_rod
    r_linf = r * DOME_PEAK  # the analytic peak at the tip, not the sampled one
    bound = dual_lower_bound(f, f, 1.0)
    zoom = rod_zoom_grid(n_rod, zoom_n)
    fz = build_dome_lightning_rod(n_rod, zoom, strict=True)
    S = scalar_superlevel(fz, LEVEL_FRACTION * DOME_PEAK)
    a = semi_mixed(S, r, 0.5)
    b = semi_mixed(S.complement(), r, 0.5)
    return CounterexampleRow(
        n=n_rod, r=r, r_linf=r_linf, besov_lower_bound=bound, ratio=bound / r_linf,
        besov_m1_direct=besov_inf_inf(f, -1.0, bank).value,
        l2_squared_grid=pairing(f, f), l2_squared_radial=dome_l2_squared(n_rod),
        b11_norm=besov_11_fd(f, 1.0), set_fraction=a.ratio, complement_fraction=b.ratio,
        rod_voxels=(1.0 / n_rod) / grid.h,
    )


def counterexample_report(n_list=(8, 16, 32, 64), grid: Grid3 | None = None, zoom_n: int = 64):
    """One row per rod parameter: ``(n, r||f||_inf, dual lower bound, ratio, ...)``.

    Norms are computed on ``grid`` (default 64^3 on a box of side 8, where
    the rod is not resolved); the level set at ``3/4 ||f||_inf`` is examined on
    a zoomed box that resolves the rod with 4 voxels.
    """
    return [counterexample_row(int(n), grid, zoom_n) for n in n_list]


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
