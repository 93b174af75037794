"""Mollified logarithm: sup norm grows like log(1/eps) while B^0_{inf,inf} stays bounded.

Two routes are provided.  ``build_mollified_log`` samples the field on a
periodic grid and is limited by resolution.  ``radial_*`` functions work on
the whole space through one-dimensional Hankel-type integrals and reach
``eps = 1/64`` with quadrature accuracy.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .. import _fft
from ..errors import InvalidInputError
from ..fields import Grid3, ScalarField, linf_norm
from ..lp import besov_inf_inf, build_lp_bank, lp_multiplier

# mean of log(1/|y|) over the unit cube centred at the origin
CUBE_LOG_MEAN = 0.7869994422569695
MIN_VOXELS = 4
_GL_NODES = 2048
KAPPA_CUT = 1000.0


def mollifier_profile(rho):
    """Unnormalised standard bump ``exp(-1/(1-|x|^2))`` on the unit ball."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    m = rho < 1.0
    out[m] = np.exp(-1.0 / (1.0 - rho[m] ** 2))
    return out


@lru_cache(maxsize=1)
def mollifier_mass() -> float:
    val, _ = integrate.quad(lambda r: 4.0 * math.pi * r * r * float(mollifier_profile(r)), 0.0, 1.0,
                            epsabs=1e-15, epsrel=1e-13)
    return val


def log_plus(rho):
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(rho < 1.0, -np.log(rho), 0.0)


# -- grid route ------------------------------------------------------------------

def _singular_center(grid: Grid3):
    return grid.center_of((grid.n // 2,) * 3)


def build_mollified_log(eps_m: float, grid: Grid3) -> ScalarField:
    """``rho_eps * log+(1/|x|)`` on the grid, singularity at a cell centre.

    The singular voxel carries the voxel mean of the logarithm; the sampled
    mollifier is normalised to unit discrete mass and applied by FFT.
    """
    if not eps_m >= MIN_VOXELS * grid.h - 1e-12:
        raise InvalidInputError(f"mollifier radius {eps_m!r} below {MIN_VOXELS} voxels (h = {grid.h:.4g})")
    if 1.0 + eps_m > grid.L / 4.0 + 1e-12:
        raise InvalidInputError(f"support 1 + eps = {1 + eps_m:g} exceeds L/4 = {grid.L / 4:g}")
    c = _singular_center(grid)
    rad = grid.radius(c)
    base = log_plus(rad)
    k = (grid.n // 2,) * 3
    base[k] = math.log(1.0 / grid.h) + CUBE_LOG_MEAN
    ker = mollifier_profile(grid.radius(grid.center_of((0, 0, 0))) / eps_m)
    ker /= ker.sum()
    out = _fft.irfftn(_fft.rfftn(base) * _fft.rfftn(ker), grid.n)
    # exact zeros outside the support
    out[rad >= 1.0 + eps_m] = 0.0
    return ScalarField(grid, out)


# -- radial route -----------------------------------------------------------------

def log_plus_hat(k):
    """Fourier transform of ``log+(1/|x|)``: ``4 pi (Si(k) - sin k) / k^3``."""
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    small = k < 1e-2
    ks = k[small]
    out[small] = 4.0 * math.pi * (1.0 / 9.0 - ks ** 2 / 150.0 + ks ** 4 / 5880.0)
    kb = k[~small]
    si, _ = special.sici(kb)
    out[~small] = 4.0 * math.pi * (si - np.sin(kb)) / kb ** 3
    return out


@lru_cache(maxsize=4)
def _gauss_legendre(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


def _gl_unit():
    x, w = _gauss_legendre(_GL_NODES)
    return 0.5 * (x + 1.0), 0.5 * w


def mollifier_hat(kappa):
    """Fourier transform of the normalised unit mollifier at ``kappa``."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    r, w = _gl_unit()
    wr = w * r * mollifier_profile(r)
    out = np.zeros_like(kappa)
    for s in range(0, kappa.size, 256):
        kk = kappa[s:s + 256, None]
        sinc = np.sinc(kk * r[None, :] / math.pi)  # sin(kr)/(kr)
        out[s:s + 256] = 4.0 * math.pi * (sinc * (wr * r)[None, :]).sum(axis=1)
    out /= mollifier_mass()
    # beyond KAPPA_CUT the transform is below round-off
    out[kappa > KAPPA_CUT] = 0.0
    return out


def _block_negligible(eps_m: float, j: int) -> bool:
    return j >= 2 and 0.75 * 2.0 ** j * eps_m > KAPPA_CUT


def radial_sup(eps_m: float) -> float:
    """``f_eps(0) = ||f_eps||_inf``; both factors are radially non-increasing."""
    if not 0.0 < eps_m < 1.0:
        raise InvalidInputError("radial route needs 0 < eps < 1")
    val, _ = integrate.quad(lambda t: 4.0 * math.pi * t * t * float(mollifier_profile(t)) * math.log(1.0 / (eps_m * t)),
                            0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return val / mollifier_mass()


def radial_block(eps_m: float, j: int, s: np.ndarray, nodes: int = 1024) -> np.ndarray:
    """``Delta_j f_eps`` at radii ``s`` (blocks as on the grid, no top block)."""
    lo = (3.0 / 4.0) * 2.0 ** j if j >= 0 else 0.0
    hi = (8.0 / 3.0) * 2.0 ** j if j >= 0 else 4.0 / 3.0
    x, w = _gauss_legendre(nodes)
    k = lo + (hi - lo) * 0.5 * (x + 1.0)
    w = w * 0.5 * (hi - lo)
    phi = np.asarray(lp_multiplier(k, j, math.inf), dtype=float)
    g = w * phi * log_plus_hat(k) * mollifier_hat(eps_m * k) * k * k / (2.0 * math.pi ** 2)
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    for a in range(0, s.size, 512):
        ss = s[a:a + 512, None]
        out[a:a + 512] = (g[None, :] * np.sinc(ss * k[None, :] / math.pi)).sum(axis=1)
    return out


def radial_block_sups(eps_m: float, rel_tol: float = 1e-8, nscan: int = 2001):
    """Sup over radius of every block until blocks fall below ``rel_tol`` of the largest."""
    sups = []
    j = -1
    while True:
        reach = min(3.0, 64.0 * 2.0 ** (-max(j, 0)))
        s = np.linspace(0.0, reach, nscan)
        v = np.abs(radial_block(eps_m, j, s))
        sups.append(float(v.max()))
        top = max(sups)
        if _block_negligible(eps_m, j + 1) or (j >= 2 and sups[-1] < rel_tol * top):
            break
        j += 1
    return np.array(sups)


def radial_reconstruction_at_origin(eps_m: float) -> float:
    """``sum_j Delta_j f_eps(0)``; should reproduce ``f_eps(0)``."""
    total = 0.0
    j = -1
    while True:
        v = float(radial_block(eps_m, j, np.zeros(1))[0])
        total += v
        if _block_negligible(eps_m, j + 1):
            return total
        j += 1


@dataclass
class MollifiedRow:
    eps: float
    linf: float
    besov0: float
    ratio: float
    j_star: int
    method: str


def mollified_log_row(eps_m: float, method: str = "radial", grid: Grid3 | None = None, scale: float = 1.0):
    if method == "radial":
        sups = abs(scale) * radial_block_sups(eps_m)
        linf = abs(scale) * radial_sup(eps_m)
        k = int(np.argmax(sups))
        b0, js = float(sups[k]), k - 1
    elif method == "grid":
        if grid is None:
            raise InvalidInputError("grid method needs a grid")
        f = build_mollified_log(eps_m, grid) * scale
        linf = linf_norm(f)
        bn = besov_inf_inf(f, 0.0, build_lp_bank(grid))
        b0, js = bn.value, bn.j
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return MollifiedRow(float(eps_m), float(linf), b0, float(linf / b0), int(js), method)


def mollified_log_report(eps_list=(1 / 8, 1 / 16, 1 / 32, 1 / 64), method: str = "radial",
                         grid: Grid3 | None = None, scale: float = 1.0):
    """Rows ``(eps, ||f||_inf, ||f||_B0, ratio)`` sorted by ``eps`` descending."""
    eps_sorted = sorted((float(e) for e in eps_list), reverse=True)
    return [mollified_log_row(e, method, grid, scale) for e in eps_sorted]


def linear_fit_r2(x, y) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
