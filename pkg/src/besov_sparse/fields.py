"""Periodic grids, field containers, super-level sets and BSF1 field files.

Arrays are stored with shape ``(n, n, n)`` indexed ``[i1, i2, i3]`` so the
first axis is the x1 direction.  Flattening in Fortran order therefore gives
the x-fastest ordering used on disk.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

from .errors import FormatError, InvalidInputError

#: volume of the unit ball in R^3
UNIT_BALL_VOLUME = 4.0 * math.pi / 3.0

MAGIC = b"BSF1"
VERSION = 1
_HEADER = struct.Struct("<4sBBH3Id")


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` cells per side on a box of side ``L``.

    Cell centers sit at ``(k + 1/2) * L/n - L/2`` so the box is centred on the
    origin and the origin itself is a cell corner.
    """

    n: int
    L: float = 2.0 * math.pi

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_pow2(int(self.n)) or self.n < 8:
            raise InvalidInputError(f"grid size must be a power of two >= 8, got {self.n!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidInputError(f"box length must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def voxel_volume(self) -> float:
        return self.h ** 3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        """1D cell-centre coordinates along any axis."""
        return (np.arange(self.n) + 0.5) * self.h - 0.5 * self.L

    def mesh(self):
        """Broadcastable coordinate arrays ``(x1, x2, x3)``."""
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Periodic (minimum image) distance of every cell centre to ``center``."""
        d2 = 0.0
        for a, c in zip(self.mesh(), center):
            d = self.min_image(a - c)
            d2 = d2 + d * d
        return np.sqrt(d2)

    def min_image(self, d):
        return d - self.L * np.round(d / self.L)

    def index_of(self, point) -> tuple:
        """Index of the voxel containing ``point`` (periodic)."""
        p = np.asarray(point, dtype=float)
        idx = np.floor((p + 0.5 * self.L) / self.h).astype(int) % self.n
        return tuple(int(i) for i in idx)

    def center_of(self, index) -> np.ndarray:
        return (np.asarray(index, dtype=float) + 0.5) * self.h - 0.5 * self.L

    @cached_property
    def k1d(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * math.pi / self.L * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def k1d_half(self) -> np.ndarray:
        return 2.0 * math.pi / self.L * np.fft.rfftfreq(self.n, d=1.0 / self.n)

    def kvec(self):
        """Wavevector components broadcastable over the rfft layout."""
        k = self.k1d
        return k[:, None, None], k[None, :, None], self.k1d_half[None, None, :]

    @cached_property
    def kmag(self) -> np.ndarray:
        """|xi| on the rfft layout ``(n, n, n//2 + 1)``."""
        k1, k2, k3 = self.kvec()
        return np.sqrt(k1 * k1 + k2 * k2 + k3 * k3)

    @property
    def k_nyquist(self) -> float:
        return 0.5 * self.n * 2.0 * math.pi / self.L


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != self.grid.shape:
            raise InvalidInputError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("field contains non-finite samples")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def ncomp(self):
        return 1

    def __mul__(self, c):
        return ScalarField(self.grid, self.data * float(c))

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(x1, x2, x3)`` at cell centres."""
        vals = np.broadcast_to(func(*grid.mesh()), grid.shape)
        return cls(grid, vals)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid3
    data: np.ndarray  # shape (3, n, n, n)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (3,) + self.grid.shape:
            raise InvalidInputError(f"vector data shape {data.shape} does not match grid")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("field contains non-finite samples")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def ncomp(self):
        return 3

    def component(self, i: int) -> ScalarField:
        """Component ``i`` in 1-based numbering."""
        if i not in (1, 2, 3):
            raise InvalidInputError(f"component index must be 1, 2 or 3, got {i!r}")
        return ScalarField(self.grid, self.data[i - 1])

    def __mul__(self, c):
        return VectorField(self.grid, self.data * float(c))

    __rmul__ = __mul__

    @classmethod
    def from_components(cls, *comps: ScalarField):
        grid = comps[0].grid
        if len(comps) != 3 or any(c.grid != grid for c in comps):
            raise InvalidInputError("need three components on the same grid")
        return cls(grid, np.stack([c.data for c in comps]))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((3,) + grid.shape))


Field = Union[ScalarField, VectorField]


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Boolean voxel mask with the level it was cut at.

    ``component`` is 1, 2, 3 or ``None`` for scalar fields; ``sign`` is
    ``"+"`` or ``"-"``.
    """

    grid: Grid3
    mask: np.ndarray
    component: int | None = None
    sign: str = "+"
    threshold: float = 0.0

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise InvalidInputError(f"mask shape {mask.shape} does not match grid")
        if not self.threshold >= 0:
            raise InvalidInputError("threshold must be nonnegative")
        if self.sign not in ("+", "-"):
            raise InvalidInputError(f"sign must be '+' or '-', got {self.sign!r}")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    def complement(self) -> "LevelSet":
        return LevelSet(self.grid, ~self.mask, self.component, self.sign, self.threshold)

    @property
    def measure(self) -> float:
        return float(np.count_nonzero(self.mask)) * self.grid.voxel_volume

    @property
    def volume_fraction(self) -> float:
        return np.count_nonzero(self.mask) / self.mask.size


def linf_norm(f: Field) -> float:
    """Largest absolute sample (max over components for vector fields)."""
    if f.data.size == 0:
        raise InvalidInputError("empty field")
    return float(np.max(np.abs(f.data)))


def signed_part(values: np.ndarray, sign: str) -> np.ndarray:
    """``g^+ = max(g, 0)`` or ``g^- = -min(g, 0)``."""
    if sign == "+":
        return np.maximum(values, 0.0)
    if sign == "-":
        return np.maximum(-values, 0.0)
    raise InvalidInputError(f"sign must be '+' or '-', got {sign!r}")


def component_superlevel(u: VectorField, i: int, sign: str, lam: float) -> LevelSet:
    """The set ``{u_i^sign > lam * ||u||_inf}`` as a voxel mask."""
    if i not in (1, 2, 3):
        raise InvalidInputError(f"component index must be 1, 2 or 3, got {i!r}")
    if not 0.0 < lam < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {lam!r}")
    thr = lam * linf_norm(u)
    part = signed_part(u.data[i - 1], sign)
    return LevelSet(u.grid, part > thr, component=i, sign=sign, threshold=thr)


def scalar_superlevel(f: ScalarField, level: float, sign: str = "+") -> LevelSet:
    """``{f^sign > level}`` for an absolute threshold ``level >= 0``."""
    part = signed_part(f.data, sign)
    return LevelSet(f.grid, part > level, component=None, sign=sign, threshold=level)


# -- BSF1 files -------------------------------------------------------------

def write_field(f: Field, path) -> None:
    n = f.grid.n
    header = _HEADER.pack(MAGIC, VERSION, f.ncomp, 0, n, n, n, f.grid.L)
    comps = [f.data] if f.ncomp == 1 else list(f.data)
    with open(path, "wb") as fh:
        fh.write(header)
        for c in comps:
            fh.write(np.asarray(c, dtype="<f8").ravel(order="F").tobytes())


def read_field(path) -> Field:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"truncated header: {len(raw)} bytes", len(raw))
    magic, version, ncomp, reserved, nx, ny, nz, L = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if ncomp not in (1, 3):
        raise FormatError(f"component count must be 1 or 3, got {ncomp}", 5)
    if reserved != 0:
        raise FormatError("reserved bytes are not zero", 6)
    if not (nx == ny == nz):
        raise FormatError(f"dimension mismatch {nx}x{ny}x{nz}", 8)
    grid = Grid3(nx, L)  # raises InvalidInputError for non power-of-two sizes
    count = ncomp * nx ** 3
    expected = _HEADER.size + 8 * count
    if len(raw) < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, got {len(raw)}", len(raw))
    if len(raw) > expected:
        raise FormatError("trailing bytes after payload", expected)
    vals = np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size)
    comps = [vals[c * nx ** 3:(c + 1) * nx ** 3].reshape(grid.shape, order="F") for c in range(ncomp)]
    if ncomp == 1:
        return ScalarField(grid, comps[0])
    return VectorField(grid, np.stack(comps))
