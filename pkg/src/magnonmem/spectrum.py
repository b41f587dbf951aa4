"""Frequency-domain response of the cavity-magnon system."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks, peak_prominences

from .errors import GridTooCoarseError, PoleError, ValidationError
from .model import FieldMap, SystemConfig, dynamics_generator, gradient_offsets


@dataclass(frozen=True)
class SpectrumTrace:
    omega_grid: np.ndarray
    r: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray
    group_delay: np.ndarray


@dataclass(frozen=True)
class SweepMap:
    axis_name: str  # "H0" or "deltaH"
    x_axis: np.ndarray  # Oe
    omega_grid: np.ndarray
    magnitude: np.ndarray  # shape (len(x_axis), len(omega_grid))


def self_energy(config: SystemConfig, omega):
    """Sum over modes of |g_j|^2 / (omega - omega_j + i kappa_j)."""
    omega = np.asarray(omega, dtype=float)
    if config.n_modes == 0:
        return np.zeros_like(omega, dtype=complex)[()]
    w = config.omegas
    k = config.kappas
    g2 = np.abs(config.couplings) ** 2
    denom = omega[..., None] - w + 1j * k
    lossless_pole = (denom == 0) & (g2 > 0)
    if np.any(lossless_pole):
        raise PoleError("pole on real axis: omega coincides with an undamped magnon mode")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(g2 > 0, g2 / np.where(denom == 0, 1.0, denom), 0.0)
    return terms.sum(axis=-1)[()]


def reflection(config: SystemConfig, omega):
    """Complex reflection amplitude r(omega) at the probe port."""
    cav = config.cavity
    x = cav.omega_a - np.asarray(omega, dtype=float) + self_energy(config, omega)
    num = x + 1j * (cav.kappa_a1 - cav.kappa_a0)
    den = -x + 1j * (cav.kappa_a1 + cav.kappa_a0)
    return (num / den)[()]


def reflection_trace(
    config: SystemConfig, omega_grid: Sequence[float], max_phase_step: float = math.pi / 2
) -> SpectrumTrace:
    """Reflection, unwrapped phase and group delay on a monotone grid.

    Raises GridTooCoarseError when two neighbouring points differ in phase by
    more than ``max_phase_step``; beyond that the unwrap is ambiguous.
    """
    w = np.asarray(omega_grid, dtype=float)
    if w.ndim != 1 or w.size < 3:
        raise ValidationError("omega_grid needs at least 3 points")
    if not np.all(np.diff(w) > 0):
        raise ValidationError("omega_grid must be strictly increasing")
    r = reflection(config, w)
    raw = np.angle(r)
    steps = np.angle(np.exp(1j * np.diff(raw)))
    bad = np.flatnonzero(np.abs(steps) > max_phase_step)
    if bad.size:
        f = w[bad[0]] / (2 * math.pi) / 1e6
        raise GridTooCoarseError(f"grid too coarse: phase jump near {f:.4f} MHz")
    phase = raw[0] + np.concatenate([[0.0], np.cumsum(steps)])
    # second-order central differences inside, one-sided at the ends
    tau = np.gradient(phase, w, edge_order=1)
    return SpectrumTrace(w, r, np.abs(r), phase, tau)


def find_dips(magnitude: np.ndarray, depth: float = 0.95) -> np.ndarray:
    """Indices of strict local minima lying below ``depth`` times their local baseline.

    The baseline is the lower of the two neighbouring maxima (minimum + prominence).
    """
    mag = np.asarray(magnitude, dtype=float)
    idx, _ = find_peaks(-mag)
    if idx.size == 0:
        return idx
    prom = peak_prominences(-mag, idx)[0]
    baseline = mag[idx] + prom
    return idx[mag[idx] < depth * baseline]


def eigenmodes(config: SystemConfig) -> np.ndarray:
    """Complex mode frequencies (resonance - i*linewidth), sorted by real part."""
    M, _ = dynamics_generator(config, 0.0)
    ev = np.linalg.eigvals(1j * M)
    return ev[np.lexsort((ev.imag, ev.real))]


def critical_kappa(config: SystemConfig, delta_omega: float) -> tuple[float, float]:
    """External coupling for impedance matching: (kappa_a0 + pi g^2/dw, pi g^2/dw)."""
    if delta_omega == 0:
        raise ValidationError("degenerate gradient: delta_omega must be non-zero")
    g = config.couplings
    if g.size and not np.allclose(np.abs(g), abs(g[0]), rtol=1e-12, atol=0):
        raise ValidationError("critical_kappa needs a uniform-coupling configuration")
    g2 = abs(g[0]) ** 2 if g.size else 0.0
    lossless = math.pi * g2 / abs(delta_omega)
    return config.cavity.kappa_a0 + lossless, lossless


def _sweep_point(args):
    template, fmap, omega_grid = args
    n = template.n_modes
    omegas = fmap.gamma * (fmap.H0 + gradient_offsets(n) * fmap.deltaH)
    cfg = template.with_magnons(omegas=omegas)
    return np.abs(reflection(cfg, omega_grid))


def bias_sweep_map(
    template: SystemConfig,
    fmap: FieldMap,
    axis: str,
    values: Sequence[float],
    omega_grid: Sequence[float],
    workers: int = 1,
) -> SweepMap:
    """|r| over a grid of bias fields.

    ``axis`` is "H0" (sweep the common field at fixed gradient) or "deltaH"
    (sweep the gradient at fixed H0). Magnon frequencies are rebuilt from the
    field map at every point.
    """
    if axis not in ("H0", "deltaH"):
        raise ValidationError(f"unknown sweep axis {axis!r}; use 'H0' or 'deltaH'")
    if template.n_modes == 0:
        raise ValidationError("empty system: sweep needs magnon modes")
    xs = np.asarray(values, dtype=float)
    grid = np.asarray(omega_grid, dtype=float)
    jobs = []
    for x in xs:
        fm = FieldMap(fmap.gamma, x, fmap.deltaH) if axis == "H0" else FieldMap(fmap.gamma, fmap.H0, x)
        jobs.append((template, fm, grid))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    return SweepMap(axis, xs, grid, np.array(rows))


__all__ = [
    "SpectrumTrace",
    "SweepMap",
    "self_energy",
    "reflection",
    "reflection_trace",
    "find_dips",
    "eigenmodes",
    "critical_kappa",
    "bias_sweep_map",
]
