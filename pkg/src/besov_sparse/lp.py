"""Littlewood-Paley blocks and Besov norms on the periodic grid.

The dyadic partition uses a radial profile ``chi`` equal to 1 on
``|xi| <= 3/4`` and 0 on ``|xi| >= 4/3`` with a quintic transition in
``log2|xi|``.  Blocks are

    phi_{-1}  = chi(xi)
    phi_j     = chi(xi / 2^{j+1}) - chi(xi / 2^j)      0 <= j < jmax
    phi_jmax  = 1 - chi(xi / 2^jmax)

so the sum telescopes to exactly one on every mode.  Within the Nyquist
sphere the top block is still supported in its ring ``[3/4, 8/3] * 2^jmax``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _fft
from .errors import DegenerateError, InvalidInputError
from .fields import Grid3, ScalarField, Field

RING_INNER = 3.0 / 4.0
RING_OUTER = 8.0 / 3.0
_CHI_LO = math.log2(3.0 / 4.0)
_CHI_HI = math.log2(4.0 / 3.0)


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def chi(xi):
    """Low-pass profile: 1 for |xi| <= 3/4, 0 for |xi| >= 4/3."""
    xi = np.abs(np.asarray(xi, dtype=float))
    with np.errstate(divide="ignore"):
        lg = np.log2(xi)
    t = (lg - _CHI_LO) / (_CHI_HI - _CHI_LO)
    return 1.0 - smoothstep5(t)


def lp_multiplier(xi, j, jmax):
    """Block weight ``phi_j`` at radial frequency ``xi`` for a bank topped at ``jmax``."""
    if j == -1:
        return chi(xi)
    if j == jmax:
        return 1.0 - chi(np.asarray(xi, dtype=float) / 2.0 ** j)
    return chi(np.asarray(xi, dtype=float) / 2.0 ** (j + 1)) - chi(np.asarray(xi, dtype=float) / 2.0 ** j)


def top_block_index(grid: Grid3) -> int:
    """Smallest ``j >= 0`` whose outer ring radius reaches the Nyquist frequency."""
    kn = grid.k_nyquist
    j = 0
    while RING_OUTER * 2.0 ** j < kn:
        j += 1
    return j


@dataclass(frozen=True, eq=False)
class LPBank:
    grid: Grid3
    jmax: int
    multipliers: tuple = field(repr=False)

    jmin = -1

    @property
    def indices(self):
        return range(self.jmin, self.jmax + 1)

    def weight(self, j) -> np.ndarray:
        if not self.jmin <= j <= self.jmax:
            raise InvalidInputError(f"block index {j} outside [{self.jmin}, {self.jmax}]")
        return self.multipliers[j - self.jmin]


@lru_cache(maxsize=8)
def build_lp_bank(grid: Grid3) -> LPBank:
    if grid.n < 8:
        raise InvalidInputError("grid too small for two dyadic rings")
    jmax = top_block_index(grid)
    if jmax < 1:
        raise InvalidInputError("grid too small for two dyadic rings")
    kmag = grid.kmag
    mults = []
    for j in range(-1, jmax + 1):
        w = np.asarray(lp_multiplier(kmag, j, jmax), dtype=np.float64)
        w.setflags(write=False)
        mults.append(w)
    return LPBank(grid, jmax, tuple(mults))


def _check_bank(f, bank):
    if f.grid != bank.grid:
        raise InvalidInputError("field and bank live on different grids")


def dealias(f: Field) -> Field:
    """Zero every mode with ``|xi|`` above two thirds of the Nyquist frequency."""
    g = f.grid
    keep = g.kmag <= (2.0 / 3.0) * g.k_nyquist
    out = _fft.irfftn(_fft.rfftn(f.data) * keep, g.n)
    return type(f)(g, out)


def lp_block(f: ScalarField, bank: LPBank, j: int) -> ScalarField:
    _check_bank(f, bank)
    w = bank.weight(j)
    return ScalarField(f.grid, _fft.irfftn(_fft.rfftn(f.data) * w, f.grid.n))


def lp_reconstruct(f: ScalarField, bank: LPBank) -> ScalarField:
    """Sum of all blocks, computed block by block in physical space."""
    _check_bank(f, bank)
    fh = _fft.rfftn(f.data)
    acc = np.zeros(f.grid.shape)
    for j in bank.indices:
        acc += _fft.irfftn(fh * bank.weight(j), f.grid.n)
    return ScalarField(f.grid, acc)


def block_sup_norms(f: Field, bank: LPBank, subtract_mean: bool = False) -> np.ndarray:
    """``max |Delta_j f|`` for every block (max over components for vectors)."""
    _check_bank(f, bank)
    data = f.data if f.ncomp == 3 else f.data[None]
    out = np.zeros(bank.jmax + 2)
    n = f.grid.n
    for comp in data:
        fh = _fft.rfftn(comp)
        if subtract_mean:
            fh[0, 0, 0] = 0.0
        for idx, j in enumerate(bank.indices):
            blk = _fft.irfftn(fh * bank.weight(j), n)
            out[idx] = max(out[idx], float(np.max(np.abs(blk))))
    return out


class BesovNorm(NamedTuple):
    value: float
    j: int


def besov_from_blocks(sups: np.ndarray, s: float, jmin: int = -1) -> BesovNorm:
    js = np.arange(jmin, jmin + len(sups))
    weighted = np.exp2(js * float(s)) * sups
    k = int(np.argmax(weighted))
    return BesovNorm(float(weighted[k]), int(js[k]))


def besov_inf_inf(f: Field, s: float, bank: LPBank, subtract_mean: bool = False) -> BesovNorm:
    """``sup_j 2^{js} ||Delta_j f||_inf`` with the attaining block."""
    return besov_from_blocks(block_sup_norms(f, bank, subtract_mean), s, bank.jmin)


def block_kernel_l1(bank: LPBank, j: int) -> float:
    """l1 norm of the physical-space kernel of block ``j`` (operator norm on sup)."""
    n = bank.grid.n
    ker = _fft.irfftn(bank.weight(j).astype(complex), n)
    return float(np.sum(np.abs(ker)))


# -- finite-difference B^eps_{1,1} -----------------------------------------

def exact_sum(a: np.ndarray) -> float:
    """Sum that does not depend on element order (sorted before reduction)."""
    return float(np.sort(np.asarray(a, dtype=np.float64), axis=None).sum())


def shift_directions() -> np.ndarray:
    """The 26 unit directions: axes, face diagonals and cube diagonals."""
    dirs = [d for d in np.ndindex(3, 3, 3) if d != (1, 1, 1)]
    v = np.array(dirs, dtype=float) - 1.0
    return v / np.linalg.norm(v, axis=1)[:, None]


@lru_cache(maxsize=32)
def shift_schedule(grid: Grid3, hmax: float):
    """Per dyadic level ``t_m = hmax 2^-m``: the distinct grid shifts with ``|h| <= t_m``."""
    nlev = int(round(math.log2(grid.n / 4)))
    dirs = shift_directions()
    levels = []
    for m in range(nlev + 1):
        t = hmax / 2.0 ** m
        vox = np.trunc(np.round(t * dirs / grid.h, 9)).astype(int)
        uniq = {tuple(v) for v in vox if any(v)}
        levels.append((t, tuple(sorted(uniq))))
    return tuple(levels)


def _diff_l1(a, shift, order, dv):
    fwd = np.roll(a, shift=tuple(-s for s in shift), axis=(0, 1, 2))
    if order == 1:
        d = fwd - a
    else:
        bwd = np.roll(a, shift=shift, axis=(0, 1, 2))
        d = fwd - 2.0 * a + bwd
    return exact_sum(np.abs(d)) * dv


def besov_11_fd(f: ScalarField, eps: float, hmax: float | None = None) -> float:
    """Finite-difference ``B^eps_{1,1}`` norm.

    ``||f||_1 + ln2 * sum_m t_m^-eps * omega(t_m)`` where ``omega(t)`` is the
    largest ``L^1`` norm of a first (``eps < 1``) or second (``eps = 1``)
    periodic difference over the sampled shifts with ``|h| <= t``.
    """
    if not 0.0 < eps <= 1.0:
        raise InvalidInputError(f"smoothness must lie in (0, 1], got {eps!r}")
    g = f.grid
    if hmax is None:
        hmax = g.L / 4.0
    if not 0.0 < hmax <= g.L / 4.0 + 1e-12:
        raise InvalidInputError(f"hmax must lie in (0, L/4], got {hmax!r}")
    order = 2 if eps == 1.0 else 1
    dv = g.voxel_volume
    a = np.asarray(f.data)
    sched = shift_schedule(g, float(hmax))
    per_level = []
    for t, shifts in sched:
        per_level.append(max((_diff_l1(a, s, order, dv) for s in shifts), default=0.0))
    # omega is a sup over |h| <= t, so it accumulates finer shells
    omega = np.maximum.accumulate(np.array(per_level)[::-1])[::-1]
    total = exact_sum(np.abs(a)) * dv
    for (t, _), w in zip(sched, omega):
        total += t ** (-eps) * w * math.log(2.0)
    return total


def pairing(u: ScalarField, f: ScalarField) -> float:
    """Voxel quadrature of ``int u f``."""
    if u.grid != f.grid:
        raise InvalidInputError("fields live on different grids")
    return exact_sum(u.data * f.data) * u.grid.voxel_volume


def dual_lower_bound(u: ScalarField, f: ScalarField, eps: float, hmax: float | None = None) -> float:
    """``|int u f| / ||f||_{B^eps_{1,1}}``; multiply by the duality constant for a bound."""
    norm = besov_11_fd(f, eps, hmax)
    if norm == 0.0:
        raise DegenerateError("test function has zero B^eps_{1,1} norm")
    return abs(pairing(u, f)) / norm
