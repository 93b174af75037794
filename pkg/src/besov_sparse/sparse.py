"""1D/3D sparseness and semi-mixedness of voxel level sets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import _fft
from .errors import DegenerateError, InvalidInputError
from .fields import Grid3, LevelSet

REMARK_TOLERANCE = 0.05
REMARK_SCALES = (1.0, 0.5, 0.25, 0.125)
_DUST = 1e-12


@dataclass
class SparsenessReport:
    kind: str  # "oneD", "threeD" or "semiMixed"
    scale: float
    ratio: float
    location: list
    delta_target: float | None = None
    direction: list | None = None
    passed: bool | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def fibonacci_sphere(ndir: int) -> np.ndarray:
    """``ndir`` near-uniform unit vectors (golden-angle spiral)."""
    i = np.arange(ndir) + 0.5
    z = 1.0 - 2.0 * i / ndir
    rho = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _check_scale(grid, r):
    if not 0.0 < r <= grid.L / 4.0 + 1e-12:
        raise InvalidInputError(f"scale must lie in (0, L/4], got {r!r}")


def segment_fractions(S: LevelSet, x0, r: float, dirs: np.ndarray) -> np.ndarray:
    """Fraction of ``(x0 - r d, x0 + r d)`` inside ``S`` for each row ``d``.

    Sampled at ``ceil(4 r / h)`` midpoints with nearest-voxel membership.
    """
    g = S.grid
    m = max(1, math.ceil(4.0 * r / g.h - 1e-9))
    s = (np.arange(m) + 0.5) / m * 2.0 - 1.0  # in (-1, 1)
    pts = np.asarray(x0, float)[None, None, :] + r * s[None, :, None] * dirs[:, None, :]
    idx = np.floor((pts + 0.5 * g.L) / g.h).astype(int) % g.n
    inside = S.mask[idx[..., 0], idx[..., 1], idx[..., 2]]
    return inside.mean(axis=1)


def sparseness_1d(S: LevelSet, x0, r: float, ndir: int = 64, delta: float | None = None,
                  directions: np.ndarray | None = None) -> SparsenessReport:
    """Least filled segment through ``x0`` over the sampled directions."""
    _check_scale(S.grid, r)
    if directions is None:
        if ndir < 26:
            raise InvalidInputError("need at least 26 directions")
        directions = fibonacci_sphere(ndir)
    dirs = np.asarray(directions, float)
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    fr = segment_fractions(S, x0, r, dirs)
    k = int(np.argmin(fr))
    ratio = float(fr[k])
    return SparsenessReport(
        kind="oneD", scale=r, ratio=ratio, location=[float(c) for c in x0],
        delta_target=delta, direction=[float(c) for c in dirs[k]],
        passed=None if delta is None else ratio <= delta,
        extra={"ndir": len(dirs)},
    )


def ball_mask(grid: Grid3, x0, r: float) -> np.ndarray:
    """Cell centres strictly within periodic distance ``r`` of ``x0``.

    A 1e-9 voxel guard keeps lattice distances equal to ``r`` out of the ball
    regardless of rounding in the coordinates.
    """
    return grid.radius(x0) < r - 1e-9 * grid.h


def sparseness_3d(S: LevelSet, x0, r: float, delta: float | None = None) -> SparsenessReport:
    _check_scale(S.grid, r)
    ball = ball_mask(S.grid, x0, r)
    nb = int(np.count_nonzero(ball))
    if nb == 0:
        raise DegenerateError(f"ball of radius {r} around {tuple(x0)} contains no voxel centres")
    ratio = np.count_nonzero(ball & S.mask) / nb
    return SparsenessReport(
        kind="threeD", scale=r, ratio=float(ratio), location=[float(c) for c in x0],
        delta_target=delta, passed=None if delta is None else ratio <= delta,
        extra={"ball_voxels": nb},
    )


@lru_cache(maxsize=16)
def _ball_kernel_hat(grid: Grid3, r: float):
    """Normalised centred ball indicator in Fourier space and its voxel count."""
    # centred on voxel (0, 0, 0) so the convolution needs no shift
    ker = ball_mask(grid, grid.center_of((0, 0, 0)), r)
    nb = int(np.count_nonzero(ker))
    if nb == 0:
        raise DegenerateError(f"ball of radius {r} contains no voxel centres")
    kh = _fft.rfftn(ker / nb)
    kh.setflags(write=False)
    return kh, nb


def local_fractions(S: LevelSet, r: float) -> np.ndarray:
    """``m(S cap B(x, r)) / m(B(x, r))`` at every voxel centre ``x``."""
    _check_scale(S.grid, r)
    g = S.grid
    kh, _ = _ball_kernel_hat(g, float(r))
    frac = _fft.irfftn(_fft.rfftn(S.mask.astype(np.float64)) * kh, g.n)
    frac[np.abs(frac) < _DUST] = 0.0
    frac[np.abs(frac - 1.0) < _DUST] = 1.0
    return np.clip(frac, 0.0, 1.0)


def semi_mixed(S: LevelSet, r: float, delta: float) -> SparsenessReport:
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"ratio must lie in (0, 1), got {delta!r}")
    frac = local_fractions(S, r)
    k = np.unravel_index(int(np.argmax(frac)), frac.shape)
    mx = float(frac[k])
    return SparsenessReport(
        kind="semiMixed", scale=r, ratio=mx,
        location=[float(c) for c in S.grid.center_of(k)],
        delta_target=delta, passed=mx <= delta,
        extra={"global_fraction": S.volume_fraction},
    )


def mixed(S: LevelSet, r: float, delta: float):
    """Semi-mixedness of ``S`` and of its complement; mixed iff both pass."""
    a = semi_mixed(S, r, delta)
    b = semi_mixed(S.complement(), r, delta)
    return a, b


def is_mixed(pair) -> bool:
    return bool(pair[0].passed and pair[1].passed)


def remark_3d_implies_1d(S: LevelSet, x0, r: float, delta: float, ndir: int = 64,
                         tol: float = REMARK_TOLERANCE) -> SparsenessReport:
    """Search for a 1D witness at ratio ``delta**(1/3) + tol`` at scales ``r, r/2, r/4, r/8``.

    If ``S`` is not 3D ``delta``-sparse around ``x0`` at scale ``r`` the check
    is vacuous and passes.
    """
    three = sparseness_3d(S, x0, r, delta)
    target = delta ** (1.0 / 3.0) + tol
    if not three.passed:
        return SparsenessReport(kind="oneD", scale=r, ratio=three.ratio, location=list(three.location),
                                delta_target=target, passed=True, extra={"vacuous": True, "ratio_3d": three.ratio})
    dirs = fibonacci_sphere(ndir)
    best = None
    for q in REMARK_SCALES:
        rho = r * q
        fr = segment_fractions(S, x0, rho, dirs)
        k = int(np.argmin(fr))
        if best is None or fr[k] < best[0]:
            best = (float(fr[k]), rho, dirs[k])
        if fr[k] <= target:
            break
    ratio, rho, d = best
    return SparsenessReport(
        kind="oneD", scale=rho, ratio=ratio, location=[float(c) for c in x0],
        delta_target=target, direction=[float(c) for c in d], passed=ratio <= target,
        extra={"vacuous": False, "ratio_3d": three.ratio, "tolerance": tol, "ndir": ndir},
    )
