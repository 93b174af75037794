"""Pseudo-spectral 3D Navier-Stokes on the torus with a regularity monitor.

The solver advances Fourier coefficients on the rfft layout with a 4-stage
integrating-factor Runge-Kutta step.  The nonlinear term is evaluated in
rotational form ``u x omega`` with 2/3-rule dealiasing and the Leray
projection removes the gradient part, so pressure never appears.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _fft
from .errors import InvalidInputError, RejectedStep
from .fields import Grid3, VectorField, component_superlevel, linf_norm, read_field, write_field
from .lp import LPBank, besov_from_blocks, block_sup_norms, build_lp_bank
from .sparse import semi_mixed

MONITOR_LEVEL = 0.5
MONITOR_RATIO = 0.75
LEMMA_SLACK = 0.02

MONITOR_COLUMNS = ("t", "linf", "besov_m1", "besov_0", "r", "f1p", "f1m", "f2p", "f2m", "f3p", "f3m",
                   "smallness", "nonsmallness", "sparsity", "scale_clamped")


def compute_M() -> float:
    """Root of ``h/2 + (1 - h) M = 1`` for the harmonic-measure level ``h``."""
    q = 0.75 ** (2.0 / 3.0)
    h = 2.0 / math.pi * math.asin((1.0 - q) / (1.0 + q))
    return (1.0 - 0.5 * h) / (1.0 - h)


def harmonic_measure_level() -> float:
    q = 0.75 ** (2.0 / 3.0)
    return 2.0 / math.pi * math.asin((1.0 - q) / (1.0 + q))


# -- spectral operators ------------------------------------------------------

def dealias_mask(grid: Grid3) -> np.ndarray:
    """Cube 2/3 rule: keep modes with every ``|xi_i| <= n/3 * 2pi/L``."""
    cut = grid.n / 3.0 * 2.0 * math.pi / grid.L * (1.0 + 1e-12)
    k1, k2, k3 = grid.kvec()
    return (np.abs(k1) <= cut) & (np.abs(k2) <= cut) & (np.abs(k3) <= cut)


def leray_project(u_hat: np.ndarray, grid: Grid3) -> np.ndarray:
    """Remove the gradient part ``xi (xi . u) / |xi|^2``; the mean mode is kept."""
    k = grid.kvec()
    k2 = grid.kmag ** 2
    div = k[0] * u_hat[0] + k[1] * u_hat[1] + k[2] * u_hat[2]
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(k2 > 0, div / np.where(k2 > 0, k2, 1.0), 0.0)
    return np.stack([u_hat[i] - k[i] * q for i in range(3)])


def divergence_residual(u_hat: np.ndarray, grid: Grid3) -> float:
    """``max |xi . u_hat| / (|xi| max |u_hat|)`` over nonzero modes."""
    scale = float(np.max(np.abs(u_hat)))
    if scale == 0.0:
        return 0.0
    k = grid.kvec()
    div = np.abs(k[0] * u_hat[0] + k[1] * u_hat[1] + k[2] * u_hat[2])
    km = grid.kmag
    nz = km > 0
    return float(np.max(div[nz] / km[nz])) / scale


def to_physical(u_hat, grid):
    return _fft.irfftn(u_hat, grid.n)


def to_spectral(u, grid):
    return _fft.rfftn(u)


def curl_hat(u_hat, grid):
    k1, k2, k3 = grid.kvec()
    return 1j * np.stack([k2 * u_hat[2] - k3 * u_hat[1],
                          k3 * u_hat[0] - k1 * u_hat[2],
                          k1 * u_hat[1] - k2 * u_hat[0]])


def nonlinear(u_hat, grid, mask):
    """Projected, dealiased ``u x omega``."""
    u = to_physical(u_hat, grid)
    w = to_physical(curl_hat(u_hat, grid), grid)
    cross = np.stack([u[1] * w[2] - u[2] * w[1],
                      u[2] * w[0] - u[0] * w[2],
                      u[0] * w[1] - u[1] * w[0]])
    return leray_project(to_spectral(cross, grid) * mask, grid)


# -- state and stepping ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NseState:
    grid: Grid3
    u_hat: np.ndarray
    t: float = 0.0
    nu: float = 1.0

    @classmethod
    def from_velocity(cls, u: VectorField, t=0.0, nu=1.0):
        g = u.grid
        uh = leray_project(to_spectral(np.asarray(u.data), g) * dealias_mask(g), g)
        return cls(g, uh, t, nu)

    def velocity(self) -> VectorField:
        return VectorField(self.grid, to_physical(self.u_hat, self.grid))

    def energy(self) -> float:
        """``||u||_2^2`` by voxel quadrature."""
        u = to_physical(self.u_hat, self.grid)
        return float(np.sum(u * u)) * self.grid.voxel_volume


def max_stable_dt(state: NseState, linf: float | None = None) -> float:
    g = state.grid
    if linf is None:
        linf = linf_norm(state.velocity())
    return min(0.5 * g.h / max(1.0, linf), 0.5 * g.h ** 2 / state.nu)


def step(state: NseState, dt: float, linf: float | None = None) -> NseState:
    """One integrating-factor RK4 step.  Raises :class:`RejectedStep` past the CFL bound."""
    dt_max = max_stable_dt(state, linf)
    if not 0.0 < dt <= dt_max * (1.0 + 1e-12):
        raise RejectedStep(dt, dt_max)
    g = state.grid
    mask = dealias_mask(g)
    half = np.exp(-0.5 * state.nu * dt * g.kmag ** 2)
    u0 = state.u_hat
    k1 = nonlinear(u0, g, mask)
    k2 = nonlinear(half * (u0 + 0.5 * dt * k1), g, mask)
    k3 = nonlinear(half * u0 + 0.5 * dt * k2, g, mask)
    k4 = nonlinear(half * half * u0 + dt * half * k3, g, mask)
    u1 = half * half * (u0 + dt / 6.0 * k1) + dt / 6.0 * (2.0 * half * (k2 + k3) + k4)
    u1 = leray_project(u1 * mask, g)
    return NseState(g, u1, state.t + dt, state.nu)


# -- initial data -------------------------------------------------------------

def preset_velocity(name: str, grid: Grid3, seed: int = 0, amplitude: float = 1.0) -> VectorField:
    x1, x2, x3 = grid.mesh()
    z = np.zeros(grid.shape)
    if name == "zero":
        return VectorField.zeros(grid)
    if name == "shear":
        return VectorField(grid, amplitude * np.stack([np.broadcast_to(np.sin(x2), grid.shape), z, z]))
    if name == "taylor-green":
        return VectorField(grid, amplitude * np.stack([
            np.sin(x1) * np.cos(x2) * np.cos(x3),
            -np.cos(x1) * np.sin(x2) * np.cos(x3),
            z,
        ]))
    if name == "random":
        # divergence-free field with energy in 1 <= |k| <= 4 (box units)
        rng = np.random.default_rng(seed)
        kf = grid.kmag * grid.L / (2.0 * math.pi)
        band = (kf >= 1.0) & (kf <= 4.0)
        shp = (3,) + grid.kmag.shape
        uh = (rng.standard_normal(shp) + 1j * rng.standard_normal(shp)) * band
        u = to_physical(leray_project(uh, grid), grid)
        u = to_physical(leray_project(to_spectral(u, grid), grid), grid)
        peak = float(np.max(np.abs(u)))
        return VectorField(grid, amplitude * u / peak if peak > 0 else u)
    raise InvalidInputError(f"unknown preset {name!r}")


# -- monitor ------------------------------------------------------------------

@dataclass(frozen=True)
class MonitorConstants:
    """Criterion constants.

    ``C_M`` and ``Ctilde_M`` are the analyticity constants (not computable,
    supplied by the user); ``c_star`` is the mixing-lemma constant at
    level 1/2 and ratio 3/4.
    """

    C_M: float = 1.0
    Ctilde_M: float = 1.0
    c_star: float = 1.0
    M: float = field(default_factory=compute_M)

    def __post_init__(self):
        if not (self.C_M > 0 and self.Ctilde_M > 0 and self.c_star > 0):
            raise InvalidInputError("criterion constants must be positive")
        if not self.M > 1.0:
            raise InvalidInputError("M must exceed 1")

    @property
    def m0(self) -> float:
        return self.c_star / (2.0 * self.C_M * self.Ctilde_M)

    def criterion_scale(self, linf: float) -> float:
        return 1.0 / (2.0 * self.C_M * self.Ctilde_M * linf)

    def nonsmall_factor(self) -> float:
        return self.c_star ** 2 / (4.0 * self.C_M ** 2 * self.Ctilde_M ** 2)

    def window(self, t: float, linf: float):
        """Interval where the later time ``s(t)`` is sampled."""
        c2 = self.C_M ** 2 * linf ** 2
        return (t + 1.0 / (4.0 * c2), t + 1.0 / c2)


@dataclass
class MonitorRecord:
    t: float
    linf: float
    besov_m1: float
    besov_0: float
    r: float
    fractions: tuple  # (1+, 1-, 2+, 2-, 3+, 3-)
    smallness: bool
    nonsmallness: bool
    sparsity: bool
    scale_clamped: bool

    def row(self):
        return (self.t, self.linf, self.besov_m1, self.besov_0, self.r, *self.fractions,
                int(self.smallness), int(self.nonsmallness), int(self.sparsity), int(self.scale_clamped))

    def recompute_flags(self, consts: MonitorConstants):
        small = self.besov_m1 <= consts.m0
        nonsmall = self.besov_m1 <= consts.nonsmall_factor() * self.linf / self.besov_0
        sparse = all(f <= MONITOR_RATIO for f in self.fractions)
        return small, nonsmall, sparse

    @property
    def lemma_incident(self) -> bool:
        """Smallness holds but some fraction exceeds 3/4 plus quadrature slack."""
        return self.smallness and max(self.fractions) > MONITOR_RATIO + LEMMA_SLACK


def monitor_snapshot(u: VectorField, consts: MonitorConstants, bank: LPBank | None = None,
                     t: float = 0.0, subtract_mean: bool = False) -> MonitorRecord | None:
    """Criterion quantities for one velocity snapshot; ``None`` for the zero field."""
    if bank is None:
        bank = build_lp_bank(u.grid)
    linf = linf_norm(u)
    if linf == 0.0:
        return None
    sups = block_sup_norms(u, bank, subtract_mean)
    bm1 = besov_from_blocks(sups, -1.0, bank.jmin).value
    b0 = besov_from_blocks(sups, 0.0, bank.jmin).value
    r = consts.criterion_scale(linf)
    rmax = u.grid.L / 4.0
    clamped = r > rmax
    scale = min(r, rmax)
    fr = []
    for i in (1, 2, 3):
        for sign in ("+", "-"):
            S = component_superlevel(u, i, sign, MONITOR_LEVEL)
            fr.append(semi_mixed(S, scale, MONITOR_RATIO).ratio)
    rec = MonitorRecord(t=float(t), linf=linf, besov_m1=bm1, besov_0=b0, r=r, fractions=tuple(fr),
                        smallness=False, nonsmallness=False, sparsity=False, scale_clamped=clamped)
    rec.smallness, rec.nonsmallness, rec.sparsity = rec.recompute_flags(consts)
    return rec


@dataclass
class EscapeTime:
    index: int
    t: float
    linf: float
    window: tuple
    records_in_window: list


def find_escape_times(linf_series) -> list[int]:
    """Indices ``k`` with ``linf[k] < linf[j]`` for every later ``j``.

    The last sample has no later time to compare against and is excluded.
    """
    vals = list(linf_series)
    out = []
    later_min = math.inf
    for k in range(len(vals) - 1, -1, -1):
        if k < len(vals) - 1 and vals[k] < later_min:
            out.append(k)
        later_min = min(later_min, vals[k])
    return out[::-1]


def annotate_escape_times(records, consts: MonitorConstants) -> list[EscapeTime]:
    idx = find_escape_times([r.linf for r in records])
    out = []
    for k in idx:
        rec = records[k]
        lo, hi = consts.window(rec.t, rec.linf)
        inside = [j for j, r in enumerate(records) if lo <= r.t <= hi]
        out.append(EscapeTime(k, rec.t, rec.linf, (lo, hi), inside))
    return out


# -- driver ----------------------------------------------------------------

@dataclass
class SimulationConfig:
    n: int = 32
    L: float = 2.0 * math.pi
    nu: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    cadence: int = 10
    preset: str | None = "taylor-green"
    input: str | None = None
    seed: int = 0
    amplitude: float = 1.0
    C_M: float = 1.0
    Ctilde_M: float = 1.0
    c_star: float = 1.0
    subtract_mean: bool = False
    snapshot_every: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        kw = {}
        grid = d.pop("grid", {})
        kw.update({k: grid[k] for k in ("n", "L") if k in grid})
        consts = d.pop("constants", {})
        kw.update({k: consts[k] for k in ("C_M", "Ctilde_M", "c_star") if k in consts})
        flags = d.pop("flags", {})
        if "subtract_mean" in flags:
            kw["subtract_mean"] = bool(flags["subtract_mean"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        kw.update(d)
        cfg = cls(**kw)
        if cfg.dt <= 0 or cfg.t_end < 0 or cfg.cadence < 1 or cfg.nu <= 0:
            raise InvalidInputError("dt, nu must be positive, t_end nonnegative and cadence >= 1")
        if (cfg.preset is None) == (cfg.input is None):
            raise InvalidInputError("config needs exactly one of 'preset' or 'input'")
        return cfg

    def to_dict(self) -> dict:
        return {
            "grid": {"n": self.n, "L": self.L}, "nu": self.nu, "dt": self.dt, "t_end": self.t_end,
            "cadence": self.cadence, "preset": self.preset, "input": self.input, "seed": self.seed,
            "amplitude": self.amplitude, "snapshot_every": self.snapshot_every,
            "constants": {"C_M": self.C_M, "Ctilde_M": self.Ctilde_M, "c_star": self.c_star},
            "flags": {"subtract_mean": self.subtract_mean},
        }

    def constants(self) -> MonitorConstants:
        return MonitorConstants(self.C_M, self.Ctilde_M, self.c_star)


@dataclass
class Trajectory:
    config: SimulationConfig
    records: list
    final: NseState
    max_divergence: float
    energies: list
    sample_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def escape_times(self) -> list[EscapeTime]:
        return annotate_escape_times(self.records, self.config.constants())


def initial_state(cfg: SimulationConfig) -> NseState:
    if cfg.input is not None:
        u = read_field(cfg.input)
        if not isinstance(u, VectorField):
            raise InvalidInputError("initial data file must hold a 3-component field")
    else:
        u = preset_velocity(cfg.preset, Grid3(cfg.n, cfg.L), cfg.seed, cfg.amplitude)
    return NseState.from_velocity(u, 0.0, cfg.nu)


def simulate(cfg: SimulationConfig, snapshot_dir: str | Path | None = None) -> Trajectory:
    """Advance to ``t_end`` emitting a monitor record every ``cadence`` steps."""
    state = initial_state(cfg)
    g = state.grid
    bank = build_lp_bank(g)
    consts = cfg.constants()
    nsteps = int(round(cfg.t_end / cfg.dt))
    records, energies, times, snaps = [], [state.energy()], [], []
    max_div = divergence_residual(state.u_hat, g)
    for k in range(nsteps + 1):
        u = state.velocity()
        if k % cfg.cadence == 0 or k == nsteps:
            rec = monitor_snapshot(u, consts, bank, t=state.t, subtract_mean=cfg.subtract_mean)
            times.append(state.t)
            if rec is not None:
                records.append(rec)
        if snapshot_dir is not None and cfg.snapshot_every and k % cfg.snapshot_every == 0:
            path = Path(snapshot_dir) / f"snapshot_{k:06d}.bsf1"
            write_field(u, path)
            snaps.append(str(path))
        if k == nsteps:
            break
        state = step(state, cfg.dt, linf_norm(u))
        # time from the step index so t_end is hit without drift
        state = replace(state, t=(k + 1) * cfg.dt)
        max_div = max(max_div, divergence_residual(state.u_hat, g))
        energies.append(state.energy())
    return Trajectory(cfg, records, state, max_div, energies, times, snaps)


def write_monitor_csv(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MONITOR_COLUMNS)
    for rec in records:
        w.writerow([_fmt(v) for v in rec.row()])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v
