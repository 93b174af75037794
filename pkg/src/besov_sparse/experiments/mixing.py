"""Mixing lemma: constants, cutoffs, duality calibration and verdicts."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CalibrationError, HypothesisViolation, InvalidInputError
from ..fields import Grid3, ScalarField, VectorField, component_superlevel, linf_norm
from ..lp import (besov_11_fd, besov_inf_inf, build_lp_bank, exact_sum, pairing,
                  smoothstep5)
from ..sparse import semi_mixed

SAFETY = 0.9


@dataclass(frozen=True)
class MixingParams:
    lam: float
    delta: float
    eps: float
    eta: float
    c_star: float
    c_lambda_delta: float

    @property
    def cube_target(self) -> float:
        return (self.delta * (1.0 + self.lam) + 1.0) / 2.0


def bump_margin(lam: float, delta: float) -> float:
    """``eta`` with ``(1 + eta)^3 = (delta (1 + lam) + 1) / 2``."""
    return ((delta * (1.0 + lam) + 1.0) / 2.0) ** (1.0 / 3.0) - 1.0


def mixing_constant(lam: float, delta: float, eps: float = 1.0, c_star: float = 1.0) -> MixingParams:
    if not 0.0 < lam < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {lam!r}")
    if not 0.0 < eps <= 1.0:
        raise InvalidInputError(f"eps must lie in (0, 1], got {eps!r}")
    if not c_star > 0.0:
        raise InvalidInputError("c_star must be positive")
    if not (1.0 / (1.0 + lam) < delta < 1.0):
        raise HypothesisViolation(f"ratio must lie in (1/(1+lam), 1) = ({1.0 / (1.0 + lam):.6g}, 1), got {delta!r}")
    eta = bump_margin(lam, delta)
    return MixingParams(lam, delta, eps, eta, c_star, c_star * (delta * (1.0 + lam) - 1.0) / 2.0)


def cutoff_profile(rho, r: float, eta: float):
    """1 on ``[0, r]``, 0 beyond ``(1 + eta) r``, quintic monotone in between."""
    return 1.0 - smoothstep5((np.asarray(rho, float) - r) / (eta * r))


def build_cutoff(x0, r: float, eta: float, grid: Grid3) -> ScalarField:
    if not (r > 0 and eta > 0):
        raise InvalidInputError("radius and margin must be positive")
    if (1.0 + eta) * r > grid.L / 4.0 + 1e-12:
        raise InvalidInputError(f"cutoff support {(1 + eta) * r:.6g} exceeds L/4 = {grid.L / 4:.6g}")
    return ScalarField(grid, cutoff_profile(grid.radius(x0), r, eta))


# -- calibration -------------------------------------------------------------

@dataclass
class Calibration:
    c_star: float
    eta: float
    eps: float
    seed: int
    trials: int
    grid: dict
    used: int
    min_ratio: float
    safety: float = SAFETY
    worst_trial: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Calibration":
        return cls(**json.loads(text))

    def save(self, path) -> str:
        data = self.to_json()
        Path(path).write_text(data)
        return hashlib.sha256(data.encode()).hexdigest()

    @classmethod
    def load(cls, path) -> "Calibration":
        return cls.from_json(Path(path).read_text())


def pure_ring_block(k: float, jmax: int):
    """Block index whose weight is exactly one at radial frequency ``k``, else ``None``."""
    for j in range(0, jmax + 1):
        lo = 4.0 / 3.0 * 2.0 ** j
        hi = 1.5 * 2.0 ** j if j < jmax else math.inf
        if lo <= k <= hi:
            return j
    return None


def pure_ring_modes(grid: Grid3, qmax: int = 2):
    """Integer wavevectors ``q`` (components in ``[-qmax, qmax]`` times a multiplier) inside one ring.

    Returns ``(q, j)`` pairs with every component of ``q`` at most ``n/3``.
    """
    bank = build_lp_bank(grid)
    unit = 2.0 * math.pi / grid.L
    out = []
    for d in np.ndindex(2 * qmax + 1, 2 * qmax + 1, 2 * qmax + 1):
        d = np.array(d) - qmax
        if not d.any():
            continue
        for mult in range(1, grid.n // 3 + 1):
            q = d * mult
            if np.max(np.abs(q)) > grid.n // 3:
                break
            j = pure_ring_block(float(np.linalg.norm(q)) * unit, bank.jmax)
            if j is not None:
                out.append((tuple(int(c) for c in q), j))
    return out


def calibrate_cstar(grid: Grid3, eta: float, eps: float, trials: int = 40, seed: int = 0) -> Calibration:
    """Largest ``c`` with ``||u||_{B^-eps} >= c |int u f| / ||f||_{B^eps_11}`` over a trial family, times 0.9.

    Trials alternate single-mode fields, bumps and ``u = f``; test functions
    are cutoffs at random centres and scales.
    """
    if trials < 20:
        raise InvalidInputError("calibration needs at least 20 trials")
    rng = np.random.default_rng(seed)
    bank = build_lp_bank(grid)
    modes = pure_ring_modes(grid)
    rmin, rmax = 2.0 * grid.h, grid.L / 4.0 / (1.0 + eta)
    ratios = []
    worst = None
    for t in range(trials):
        x0 = rng.uniform(-grid.L / 2, grid.L / 2, 3)
        r = float(np.exp(rng.uniform(math.log(rmin), math.log(rmax))))
        f = build_cutoff(x0, r, eta, grid)
        kind = ("mode", "bump", "self")[t % 3]
        if kind == "mode":
            q, _ = modes[rng.integers(len(modes))]
            phase = rng.uniform(0, 2 * math.pi)
            unit = 2.0 * math.pi / grid.L
            x1, x2, x3 = grid.mesh()
            u = ScalarField(grid, np.cos(unit * (q[0] * x1 + q[1] * x2 + q[2] * x3) + phase))
        elif kind == "bump":
            eta_b = float(rng.uniform(0.2, 1.0))
            rb = float(np.exp(rng.uniform(math.log(rmin), math.log(grid.L / 4.0 / (1.0 + eta_b)))))
            xb = x0 + rng.normal(scale=r, size=3)
            u = build_cutoff(xb, rb, eta_b, grid)
        else:
            u = f
        pair = abs(pairing(u, f))
        if pair <= 1e-12 * linf_norm(u) * exact_sum(np.abs(f.data)) * grid.voxel_volume:
            continue  # orthogonal: constraint is vacuous
        lhs = besov_inf_inf(u, -eps, bank).value
        ratio = lhs * besov_11_fd(f, eps) / pair
        ratios.append(ratio)
        if worst is None or ratio < worst["ratio"]:
            worst = {"trial": t, "kind": kind, "ratio": float(ratio), "r": r}
    if not ratios:
        raise CalibrationError("every calibration trial was orthogonal")
    mn = min(ratios)
    return Calibration(c_star=SAFETY * mn, eta=eta, eps=eps, seed=seed, trials=trials,
                       grid={"n": grid.n, "L": grid.L}, used=len(ratios), min_ratio=mn, worst_trial=worst)


# -- lemma verdicts -------------------------------------------------------------

SET_LABELS = ("1+", "1-", "2+", "2-", "3+", "3-")


@dataclass
class LemmaVerdict:
    lhs: float
    rhs: float
    hypothesis_met: bool
    sets: list
    all_semi_mixed: bool
    consistent: bool
    note: str = ""
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def verify_mixing_lemma(u: VectorField, params: MixingParams, r: float, bank=None) -> LemmaVerdict:
    """Check the six super-level sets against the Besov smallness hypothesis at scale ``r``."""
    if not 0.0 < r <= min(1.0, u.grid.L / 4.0) + 1e-12:
        raise InvalidInputError(f"scale must lie in (0, min(1, L/4)], got {r!r}")
    if bank is None:
        bank = build_lp_bank(u.grid)
    linf = linf_norm(u)
    pd = asdict(params)
    if linf == 0.0:
        return LemmaVerdict(0.0, 0.0, True, [], True, True, note="zero field: vacuous", params=pd)
    lhs = besov_inf_inf(u, -params.eps, bank).value
    rhs = params.c_lambda_delta * r ** params.eps * linf
    sets = []
    for i in (1, 2, 3):
        for sign in ("+", "-"):
            S = component_superlevel(u, i, sign, params.lam)
            rep = semi_mixed(S, r, params.delta)
            sets.append({"set": f"{i}{sign}", "max_fraction": rep.ratio, "passed": bool(rep.passed),
                         "argmax": rep.location})
    all_ok = all(s["passed"] for s in sets)
    met = lhs <= rhs
    # lemma: hypothesis => all semi-mixed; equivalently any failure => lhs > rhs
    consistent = all_ok if met else True
    note = "hypothesis met" if met else "hypothesis not met"
    if not all_ok:
        note += "; some set fails semi-mixedness (contrapositive requires lhs > rhs)"
    return LemmaVerdict(lhs, rhs, met, sets, all_ok, consistent, note, pd)


def ball_weights(grid: Grid3, x0, r: float, eta: float, sub: int = 8):
    """Per-voxel ball fraction and cutoff-weighted shell fraction.

    Each voxel is split into ``sub^3`` sample points, so the thin shell
    ``r <= |x - x0| < (1 + eta) r`` is resolved below the voxel size.
    Returns ``(inner, shell)`` arrays on the grid.
    """
    h = grid.h
    rad = grid.radius(x0)
    near = np.nonzero(rad < (1.0 + eta) * r + math.sqrt(3.0) * h / 2.0 + 1e-12)
    inner = np.zeros(grid.shape)
    shell = np.zeros(grid.shape)
    off = ((np.arange(sub) + 0.5) / sub - 0.5) * h
    o1, o2, o3 = np.meshgrid(off, off, off, indexing="ij")
    offs = np.stack([o1.ravel(), o2.ravel(), o3.ravel()], axis=1)
    centers = grid.center_of(np.stack(near, axis=1))
    d = grid.min_image(centers - np.asarray(x0, float)[None, :])
    dist = np.linalg.norm(d[:, None, :] + offs[None, :, :], axis=2)
    ins = dist < r
    f = cutoff_profile(dist, r, eta)
    inner[near] = ins.mean(axis=1)
    shell[near] = np.where(ins, 0.0, f).mean(axis=1)
    return inner, shell


def lemma_terms(ui: ScalarField, A: np.ndarray, x0, r: float, eta: float, sub: int = 8):
    """Voxel quadratures of the three pieces of ``int u_i f``.

    ``I`` over ``A cap B(x0, r)``, ``II`` over ``B(x0, r) minus A`` and
    ``III`` over the shell ``B(x0, (1+eta) r) minus B(x0, r)``.  The field is
    taken constant on voxels; ball and cutoff are super-sampled.
    """
    g = ui.grid
    inner, shell = ball_weights(g, x0, r, eta, sub)
    dv = g.voxel_volume
    u = np.asarray(ui.data)
    I = exact_sum((u * inner)[A]) * dv
    II = exact_sum((u * inner)[~A]) * dv
    III = exact_sum(u * shell) * dv
    return I, II, III


def engineered_violation(grid: Grid3, r: float, rng, lam: float = 0.5, delta: float = 0.75):
    """Random velocity whose ``(i, sign)`` super-level set fills a whole ball of radius ``r``.

    Returns ``(u, label)``; the plateau has radius at least ``1.05 r`` so the
    set is never ``r``-semi-mixed with ratio ``delta``.
    """
    x1, x2, x3 = grid.mesh()
    i = int(rng.integers(1, 4))
    sign = ("+", "-")[int(rng.integers(2))]
    amp = float(rng.uniform(0.5, 5.0))
    R = r * float(rng.uniform(1.05, 2.0))
    eta_p = float(rng.uniform(0.3, 1.0))
    x0 = rng.uniform(-grid.L / 2, grid.L / 2, 3)
    data = np.zeros((3,) + grid.shape)
    unit = 2.0 * math.pi / grid.L
    for c in range(3):
        noise = np.zeros(grid.shape)
        for _ in range(3):
            m = rng.integers(-4, 5, 3)
            noise = noise + rng.uniform(-1, 1) * np.cos(unit * (m[0] * x1 + m[1] * x2 + m[2] * x3)
                                                      + rng.uniform(0, 2 * math.pi))
        peak = float(np.max(np.abs(noise))) or 1.0
        level = 0.2 if c == i - 1 else float(rng.uniform(0.0, 0.9))
        data[c] = amp * level * noise / peak
    plateau = cutoff_profile(grid.radius(x0), R, eta_p)
    s = 1.0 if sign == "+" else -1.0
    data[i - 1] = data[i - 1] * (1.0 - plateau) + s * amp * plateau
    return VectorField(grid, data), f"{i}{sign}"
