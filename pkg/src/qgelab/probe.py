"""Probe registers over the readout grid: phase encoding, inverse QFT, sampling.

The grid G_p holds 2^p points (j + 1/2) * 2^-p - 1/2, symmetric about zero
with spacing 2^-p and no point at zero.  A phase slope v written onto a
register as amplitudes c_x * e^{2 pi i 2^p x v} concentrates, after the
inverse grid QFT, on the grid points nearest v; measurement plus a
coordinate-wise median gives the decoder the adaptive loop consumes.

Registers for different observables never get entangled here: for linear
phases the ideal M-register probe state factorizes, so the simulator only
ever materializes one 2^p-amplitude factor at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_WINDOWS = ("uniform", "sine")


@dataclass(frozen=True)
class Grid:
    """Readout grid with 2^p symmetric points in (-1/2, 1/2)."""

    p: int
    points: np.ndarray

    @property
    def size(self) -> int:
        return 1 << self.p

    @property
    def spacing(self) -> float:
        return 2.0**-self.p


def make_grid(p: int) -> Grid:
    if p < 1:
        raise ValueError(f"grid needs p >= 1, got {p}")
    j = np.arange(1 << p, dtype=np.float64)
    points = (j + 0.5) * 2.0**-p - 0.5
    points.setflags(write=False)
    return Grid(p=int(p), points=points)


@dataclass(frozen=True)
class NoiseSpec:
    """Register-level non-idealities.

    phase_jitter: each amplitude's phase is perturbed by U(-jitter, +jitter) radians.
    fail_prob: with this probability the register is replaced by a uniformly
    random pure state before readout (a failed subroutine call).
    """

    phase_jitter: float = 0.0
    fail_prob: float = 0.0

    def __post_init__(self):
        if self.phase_jitter < 0:
            raise ValueError("phase_jitter must be nonnegative")
        if not 0.0 <= self.fail_prob <= 1.0:
            raise ValueError("fail_prob must lie in [0, 1]")

    @property
    def is_ideal(self) -> bool:
        return self.phase_jitter == 0.0 and self.fail_prob == 0.0


IDEAL = NoiseSpec()


@dataclass(frozen=True)
class ProbeRegister:
    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        object.__setattr__(self, "amplitudes", amps)
        if amps.size != self.grid.size:
            raise ValueError(f"register length {amps.size} != grid size {self.grid.size}")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
            raise ValueError("register is not normalized")


@dataclass(frozen=True)
class ReadoutSample:
    """One measured grid point per observable coordinate."""

    values: np.ndarray


def window_amplitudes(window: str, p: int) -> np.ndarray:
    if window == "uniform":
        return np.full(1 << p, 2.0 ** (-p / 2))
    if window == "sine":
        n = 1 << p
        c = np.sin(np.pi * (np.arange(n) + 1) / (n + 1))
        return c / np.linalg.norm(c)
    raise ValueError(f"unknown window {window!r}; expected one of {_WINDOWS}")


def encode_register(
    v: float, grid: Grid, window: str = "uniform", noise: NoiseSpec = IDEAL, rng=None
) -> ProbeRegister:
    """Write phase slope v onto a fresh register: amplitudes c_x e^{2 pi i 2^p x v}."""
    c = window_amplitudes(window, grid.p)
    amps = c * np.exp(2j * np.pi * grid.size * grid.points * v)
    if not noise.is_ideal:
        gen = np.random.default_rng(rng)
        if noise.phase_jitter > 0:
            jit = gen.uniform(-noise.phase_jitter, noise.phase_jitter, size=amps.size)
            amps = amps * np.exp(1j * jit)
        if noise.fail_prob > 0 and gen.random() < noise.fail_prob:
            raw = gen.normal(size=amps.size) + 1j * gen.normal(size=amps.size)
            amps = raw / np.linalg.norm(raw)
    return ProbeRegister(grid=grid, amplitudes=amps)


@lru_cache(maxsize=16)
def _qft_matrix(p: int) -> np.ndarray:
    grid = make_grid(p)
    phases = np.outer(grid.points, grid.points)
    F = 2.0 ** (-p / 2) * np.exp(2j * np.pi * grid.size * phases)
    F.setflags(write=False)
    return F


def qft(reg: ProbeRegister) -> ProbeRegister:
    return ProbeRegister(grid=reg.grid, amplitudes=_qft_matrix(reg.grid.p) @ reg.amplitudes)


def iqft(reg: ProbeRegister) -> ProbeRegister:
    """Inverse of QFT |x> = 2^{-p/2} sum_k e^{2 pi i 2^p x k} |k>."""
    return ProbeRegister(
        grid=reg.grid, amplitudes=_qft_matrix(reg.grid.p).conj().T @ reg.amplitudes
    )


def sample(reg: ProbeRegister, rng) -> float:
    """Measure in the grid basis: grid point k with probability |amplitude(k)|^2."""
    gen = np.random.default_rng(rng)
    probs = np.abs(reg.amplitudes) ** 2
    probs = probs / probs.sum()
    idx = gen.choice(reg.grid.size, p=probs)
    return float(reg.grid.points[idx])


def readout_distribution(v: float, grid: Grid, window: str = "uniform") -> np.ndarray:
    """Exact measurement distribution after encode + inverse QFT, no sampling."""
    reg = encode_register(v, grid, window)
    out = iqft(reg)
    probs = np.abs(out.amplitudes) ** 2
    return probs / probs.sum()


def single_shot_success(v: float, grid: Grid, window: str = "uniform") -> float:
    """Exact Pr[|g - v| <= 2^-p] for one noiseless shot."""
    probs = readout_distribution(v, grid, window)
    near = np.abs(grid.points - v) <= grid.spacing + 1e-15
    return float(probs[near].sum())


def _distribution_matrix(v_vec, grid: Grid, window: str) -> np.ndarray:
    """Column j holds the readout distribution for slope v_j; shape (2^p, M)."""
    v_vec = np.asarray(v_vec, dtype=np.float64)
    c = window_amplitudes(window, grid.p)
    regs = c[:, None] * np.exp(2j * np.pi * grid.size * np.outer(grid.points, v_vec))
    out = _qft_matrix(grid.p).conj().T @ regs
    probs = np.abs(out) ** 2
    return probs / probs.sum(axis=0, keepdims=True)


def draw_readouts(
    v_vec, grid: Grid, R: int, window: str = "uniform", noise: NoiseSpec = IDEAL, rng=None
) -> np.ndarray:
    """R independent measured grid points per coordinate; shape (R, M).

    The register product structure means each coordinate can be drawn from its
    own 2^p-outcome distribution.  A failed register (probability fail_prob,
    independently per copy and coordinate) is replaced by a Haar-random state;
    since the inverse QFT preserves Haar measure, the measured outcome of a
    failed copy is uniform on the grid, which is how it is drawn here.
    """
    gen = np.random.default_rng(rng)
    v_vec = np.asarray(v_vec, dtype=np.float64)
    M = v_vec.size
    if R < 1:
        raise ValueError(f"need R >= 1 copies, got {R}")
    if noise.phase_jitter > 0:
        # Jitter is drawn independently per copy, so each (copy, coordinate)
        # pair needs its own register.
        c = window_amplitudes(window, grid.p)
        base = c[:, None, None] * np.exp(
            2j * np.pi * grid.size * grid.points[:, None, None] * v_vec[None, None, :]
        )
        jit = gen.uniform(-noise.phase_jitter, noise.phase_jitter, size=(grid.size, R, M))
        regs = base * np.exp(1j * jit)
        out = np.einsum("kx,xrm->krm", _qft_matrix(grid.p).conj().T, regs, optimize=True)
        probs = np.abs(out) ** 2
        probs /= probs.sum(axis=0, keepdims=True)
        cum = np.cumsum(probs, axis=0)
        u = gen.random((R, M))
        idx = (u[None, :, :] > cum).sum(axis=0)
    else:
        probs = _distribution_matrix(v_vec, grid, window)
        cum = np.cumsum(probs, axis=0)
        u = gen.random((R, M))
        idx = (u[:, :, None] > cum.T[None, :, :]).sum(axis=2)
    idx = np.clip(idx, 0, grid.size - 1)
    if noise.fail_prob > 0:
        failed = gen.random((R, M)) < noise.fail_prob
        idx = np.where(failed, gen.integers(0, grid.size, size=(R, M)), idx)
    return grid.points[idx]


def readout_median(samples) -> np.ndarray:
    """Coordinate-wise lower median: order statistic ceil(R/2) of each column.

    The lower median of grid-valued samples is itself a grid point, which
    keeps the decode analysis exact.
    """
    if isinstance(samples, np.ndarray):
        arr = samples
    else:
        rows = [s.values if isinstance(s, ReadoutSample) else np.asarray(s) for s in samples]
        if not rows:
            raise ValueError("need at least one readout sample")
        arr = np.stack(rows)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[0] == 0:
        raise ValueError("need at least one readout sample")
    R = arr.shape[0]
    order = math.ceil(R / 2) - 1
    return np.sort(arr, axis=0)[order]


def parallel_single_shot(
    v_vec, grid: Grid, R: int, window: str = "uniform", noise: NoiseSpec = IDEAL, rng=None
) -> np.ndarray:
    """Single-shot entangled readout over R effective copies.

    Modeled at the contract level: the output is statistically equivalent to
    the coordinate-wise median of R independent copies.  The caller accounts
    its cost with the sqrt(R) rule instead of the factor-R rule.
    """
    return readout_median(draw_readouts(v_vec, grid, R, window, noise, rng))
