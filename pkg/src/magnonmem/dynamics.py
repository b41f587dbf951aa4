"""Time-domain evolution of the driven cavity-magnon system.

All traces are expressed in the frame rotating at the drive carrier, so the
recorded amplitudes are slowly varying envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import IntegrationError, ValidationError
from .model import SystemConfig, dynamics_generator

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class Pulse:
    """One input pulse envelope.

    For ``gaussian`` pulses ``duration`` is the full width at half maximum of
    the amplitude profile exp(-(t-tc)^2 / 2 sigma^2) and the pulse is truncated at
    ``truncation`` sigmas either side of its center; ``start`` is the start of
    the truncated support.
    """

    shape: str = "rectangular"
    start: float = 0.0
    duration: float = 20e-9
    amplitude: complex = 1.0
    truncation: float = 3.0

    def __post_init__(self):
        if self.shape not in ("rectangular", "gaussian"):
            raise ValidationError(f"unknown pulse shape {self.shape!r}")
        if not (self.duration > 0):
            raise ValidationError("pulse duration must be positive")
        if self.shape == "gaussian" and not (self.truncation > 0):
            raise ValidationError("gaussian truncation must be positive")

    @property
    def sigma(self) -> float:
        return self.duration / FWHM_PER_SIGMA

    @property
    def support(self) -> tuple[float, float]:
        if self.shape == "rectangular":
            return self.start, self.start + self.duration
        return self.start, self.start + 2 * self.truncation * self.sigma

    @property
    def center(self) -> float:
        lo, hi = self.support
        return 0.5 * (lo + hi)

    def profile(self, t):
        """Untruncated envelope value (the support is handled by the caller)."""
        t = np.asarray(t, dtype=float)
        if self.shape == "rectangular":
            return np.full(t.shape, complex(self.amplitude))
        return complex(self.amplitude) * np.exp(-0.5 * ((t - self.center) / self.sigma) ** 2)

    def energy(self) -> float:
        a2 = abs(complex(self.amplitude)) ** 2
        if self.shape == "rectangular":
            return a2 * self.duration
        s = self.sigma
        return a2 * s * math.sqrt(math.pi) * math.erf(self.truncation)


@dataclass(frozen=True)
class DriveSpec:
    """Pulses sharing one carrier (angular frequency, rad/s)."""

    pulses: tuple[Pulse, ...] = ()
    carrier: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))

    @classmethod
    def rectangular(cls, duration, carrier, start=0.0, amplitude=1.0):
        return cls((Pulse("rectangular", start, duration, amplitude),), carrier)

    @classmethod
    def gaussian(cls, fwhm, carrier, start=0.0, amplitude=1.0, truncation=3.0):
        return cls((Pulse("gaussian", start, fwhm, amplitude, truncation),), carrier)

    @property
    def breakpoints(self) -> list[float]:
        pts = set()
        for p in self.pulses:
            pts.update(p.support)
        return sorted(pts)

    def envelope(self, t):
        """E_in(t); supports are half-open [start, end)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for p in self.pulses:
            lo, hi = p.support
            on = (t >= lo) & (t < hi)
            out = out + np.where(on, p.profile(t), 0.0)
        return out[()]

    def interval_values(self, t0, t1, fractions=(0.0, 0.5, 1.0)):
        """Envelope at t0 + f*(t1-t0) using the pulse set active inside (t0, t1).

        Intervals must not straddle a breakpoint; this gives one-sided limits
        at pulse edges instead of the half-open point values.
        """
        t0 = np.asarray(t0, dtype=float)
        t1 = np.asarray(t1, dtype=float)
        mid = 0.5 * (t0 + t1)
        outs = [np.zeros(t0.shape, dtype=complex) for _ in fractions]
        for p in self.pulses:
            lo, hi = p.support
            on = (mid > lo) & (mid < hi)
            if not np.any(on):
                continue
            for k, f in enumerate(fractions):
                outs[k] = outs[k] + np.where(on, p.profile(t0 + f * (t1 - t0)), 0.0)
        return outs

    def energy(self) -> float:
        """Integral of |E_in|^2 (pulses assumed non-overlapping)."""
        return float(sum(p.energy() for p in self.pulses))

    @property
    def is_piecewise_constant(self) -> bool:
        return all(p.shape == "rectangular" for p in self.pulses)


@dataclass(frozen=True)
class TimeTrace:
    t: np.ndarray
    a: np.ndarray
    m: np.ndarray  # shape (N, len(t))
    e_in: np.ndarray
    e_out: np.ndarray
    intensity: np.ndarray
    kappa_a1: float
    carrier: float = 0.0

    @classmethod
    def from_states(cls, t, states, e_in, kappa_a1, carrier=0.0):
        states = np.asarray(states)
        a = states[:, 0].copy()
        m = states[:, 1:].T.copy()
        e_out = -e_in + 1j * math.sqrt(2.0 * kappa_a1) * a
        intensity = 2.0 * kappa_a1 * np.abs(a) ** 2
        return cls(np.asarray(t, dtype=float), a, m, np.asarray(e_in, dtype=complex), e_out,
                   intensity, kappa_a1, carrier)

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.a, self.m.T])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0


def _merged_points(t_out: np.ndarray, breakpoints: Sequence[float]) -> np.ndarray:
    t_end = t_out[-1]
    bps = [b for b in breakpoints if 0.0 < b < t_end]
    pts = np.unique(np.concatenate([[0.0], t_out, bps]))
    # merge points closer than float noise so no zero-length intervals remain
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * max(t_end, 1e-30)])
    return pts[keep]


def _rk4_step(M, v, x, e0, eh, e1, h):
    k1 = M @ x + v * e0
    k2 = M @ (x + 0.5 * h * k1) + v * eh
    k3 = M @ (x + 0.5 * h * k2) + v * eh
    k4 = M @ (x + h * k3) + v * e1
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_propagator(M, v, h):
    """RK4 step as an affine map: x' = R x + w0 e0 + wh eh + w1 e1."""
    n = M.shape[0]
    z = np.zeros(n, dtype=complex)
    R = _rk4_step(M, np.zeros((n, 1), dtype=complex), np.eye(n, dtype=complex), 0, 0, 0, h)
    w0 = _rk4_step(M, v, z, 1.0, 0.0, 0.0, h)
    wh = _rk4_step(M, v, z, 0.0, 1.0, 0.0, h)
    w1 = _rk4_step(M, v, z, 0.0, 0.0, 1.0, h)
    return R, w0, wh, w1


def _rk4_run(M, v, drive, t_out, substeps, x0):
    pts = _merged_points(t_out, drive.breakpoints)
    # nearest merged point to each output time (merging may drop exact matches)
    hi = np.clip(np.searchsorted(pts, t_out), 1, pts.size - 1)
    out_idx = np.where(np.abs(pts[hi - 1] - t_out) <= np.abs(pts[hi] - t_out), hi - 1, hi)
    h_nom = (t_out[1] - t_out[0]) / substeps if t_out.size > 1 else pts[-1]
    # subdivide every gap between consecutive points into near-nominal steps
    gaps = np.diff(pts)
    counts = np.maximum(1, np.ceil(gaps / h_nom - 1e-9).astype(int))
    t0 = np.repeat(pts[:-1], counts) + np.concatenate(
        [np.arange(c) * (g / c) for g, c in zip(gaps, counts)]
    )
    hs = np.repeat(gaps / counts, counts)
    t1 = t0 + hs
    e0, eh, e1 = drive.interval_values(t0, t1)
    ends = np.cumsum(counts)  # substep index after which point k+1 is reached

    cache: dict[float, tuple] = {}
    states = np.empty((t_out.size, M.shape[0]), dtype=complex)
    x = np.array(x0, dtype=complex)
    point = 0
    if out_idx[0] == 0:
        states[0] = x
    record = {int(i): k for k, i in enumerate(out_idx)}
    for k in range(t0.size):
        key = round(hs[k] / h_nom, 9)
        prop = cache.get(key)
        if prop is None:
            prop = cache[key] = _rk4_propagator(M, v, hs[k])
        R, w0, wh, w1 = prop
        x = R @ x + w0 * e0[k] + wh * eh[k] + w1 * e1[k]
        if k + 1 == ends[point]:
            point += 1
            slot = record.get(point)
            if slot is not None:
                states[slot] = x
    if not np.all(np.isfinite(states)):
        bad = np.flatnonzero(~np.all(np.isfinite(states), axis=1))[0]
        raise IntegrationError("integration diverged", time=float(t_out[bad]))
    return states


def default_step(config: SystemConfig, carrier: float | None = None) -> float:
    """(2 pi / N dw) / 50, shortened when a fast cavity rate would make RK4 unstable.

    Without a comb the cavity linewidth and the collective coupling set the scale.
    """
    w = config.omegas
    spread = float(w.max() - w.min()) if w.size > 1 else 0.0
    n = config.n_modes
    if spread > 0:
        bandwidth = spread * n / (n - 1)
    else:
        g = float(np.linalg.norm(config.couplings)) if n else 0.0
        bandwidth = max(config.cavity.kappa_a, 2 * g, 1.0)
    frame = config.cavity.omega_a if carrier is None else carrier
    M, _ = dynamics_generator(config, frame)
    fastest = float(np.max(np.abs(np.linalg.eigvals(M))))
    step = (2 * math.pi / bandwidth) / 50.0
    if fastest > 0:
        step = min(step, 0.2 / fastest)
    return step


def integrate(
    config: SystemConfig,
    drive: DriveSpec,
    t_end: float,
    dt: float | None = None,
    *,
    tol: float | None = 1e-10,
    x0=None,
    max_halvings: int = 8,
) -> TimeTrace:
    """Solve dx/dt = M x + v E_in(t) from t=0 with classical RK4.

    Output is recorded on the uniform grid 0, dt, ..., t_end. With ``tol`` set,
    the internal step is halved until the Richardson error estimate between
    successive refinements drops below ``tol`` relative to the peak state
    amplitude; ``tol=None`` runs once at the output step.
    """
    if not (t_end > 0):
        raise ValidationError("t_end must be positive")
    if dt is None:
        dt = default_step(config, drive.carrier)
    n_out = int(round(t_end / dt))
    if n_out < 1:
        raise ValidationError("t_end must cover at least one output step")
    t_out = np.arange(n_out + 1) * dt
    M, v = dynamics_generator(config, drive.carrier)
    if x0 is None:
        x0 = np.zeros(config.n_modes + 1, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (config.n_modes + 1,):
        raise ValidationError("x0 must have length N + 1")

    substeps = 1
    states = _rk4_run(M, v, drive, t_out, substeps, x0)
    if tol is not None:
        for _ in range(max_halvings):
            substeps *= 2
            finer = _rk4_run(M, v, drive, t_out, substeps, x0)
            diff = np.max(np.abs(finer - states), axis=1)
            scale = float(np.max(np.abs(finer)))
            states = finer
            if scale == 0.0 or diff.max() / 15.0 <= tol * scale:
                break
        else:
            worst = float(t_out[int(np.argmax(diff))])
            raise IntegrationError(
                f"tolerance {tol:g} not reached after {max_halvings} halvings "
                f"(worst at t={worst * 1e9:.3f} ns)", time=worst)
    e_in = drive.envelope(t_out)
    return TimeTrace.from_states(t_out, states, e_in, config.cavity.kappa_a1, drive.carrier)


def exact_oracle(config: SystemConfig, drive: DriveSpec, t_grid, x0=None) -> TimeTrace:
    """Piecewise matrix-exponential solution for piecewise-constant drives.

    Each interval between output times and pulse edges is propagated with
    exp([[M, v E], [0, 0]] h), so the only error is linear-algebra roundoff.
    """
    if not drive.is_piecewise_constant:
        raise ValidationError("unsupported by oracle: only rectangular pulses are piecewise constant")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid must be increasing and start at t >= 0")
    M, v = dynamics_generator(config, drive.carrier)
    n = M.shape[0]
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    pts = np.unique(np.concatenate([[0.0], t_grid, [b for b in drive.breakpoints if 0 < b < t_grid[-1]]]))
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = M
    aug[:n, n] = v
    cache: dict[float, np.ndarray] = {}
    states = np.empty((t_grid.size, n), dtype=complex)
    gi = 0
    if t_grid[0] == 0.0:
        states[0] = x
        gi = 1
    for a, b in zip(pts[:-1], pts[1:]):
        h = b - a
        key = float(h)
        P = cache.get(key)
        if P is None:
            P = cache[key] = expm(aug * h)
        e = complex(drive.envelope(0.5 * (a + b)))
        x = P[:n, :n] @ x + P[:n, n] * e
        while gi < t_grid.size and t_grid[gi] == b:
            states[gi] = x
            gi += 1
    e_in = drive.envelope(t_grid)
    return TimeTrace.from_states(t_grid, states, e_in, config.cavity.kappa_a1, drive.carrier)


def uniform_comb_parameters(config: SystemConfig):
    """(g, kappa_m, comb center, spacing) for an identical, evenly spaced comb.

    Raises ValidationError for anything else.
    """
    n = config.n_modes
    if n < 1:
        raise ValidationError("kernel formulation needs at least one magnon mode")
    g = config.couplings
    k = config.kappas
    w = np.sort(config.omegas)
    if not np.allclose(g, g[0], rtol=1e-12, atol=0):
        raise ValidationError("non-uniform config: couplings differ")
    if not np.allclose(k, k[0], rtol=1e-12, atol=0):
        raise ValidationError("non-uniform config: magnon damping differs")
    spacing = float(np.mean(np.diff(w))) if n > 1 else 0.0
    if n > 2 and not np.allclose(np.diff(w), spacing, rtol=1e-9, atol=1e-9 * abs(w).max()):
        raise ValidationError("non-uniform config: magnon frequencies are not evenly spaced")
    return g[0], float(k[0]), float(np.mean(w)), spacing


def comb_kernel(n: int, x):
    """sin(N x / 2) / sin(x / 2), continued through its removable singularities."""
    x = np.asarray(x, dtype=float)
    s = np.sin(0.5 * x)
    near = np.abs(s) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(0.5 * n * x) / np.where(near, 1.0, s)
        lim = n * np.cos(0.5 * n * x) / np.cos(0.5 * x)
    return np.where(near, lim, val)[()]


def kernel_integrate(config: SystemConfig, drive: DriveSpec, t_grid) -> np.ndarray:
    """Cavity amplitude from the memory-kernel equation with magnons eliminated.

    da/dt = (-i(w_a - w_l) - kappa_a) a - |g|^2 int_0^t K(t-s) a(s) ds - i sqrt(2 kappa_a1) E_in,
    K(s) = exp((-i(w_c - w_l) - kappa_m) s) sin(N dw s/2) / sin(dw s/2).

    Both the history integral and the time stepping use the trapezoid rule on
    the (uniform) grid, so the scheme is second order.
    """
    g, kappa_m, center, spacing = uniform_comb_parameters(config)
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2 or t[0] != 0.0:
        raise ValidationError("t_grid must start at 0 and have at least two points")
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        raise ValidationError("kernel_integrate needs a uniform grid")
    n = config.n_modes
    cav = config.cavity
    lam = -1j * (cav.omega_a - drive.carrier) - cav.kappa_a
    s = t - t[0]
    K = abs(g) ** 2 * np.exp((-1j * (center - drive.carrier) - kappa_m) * s) * comb_kernel(n, spacing * s)
    coupling = -1j * math.sqrt(2.0 * cav.kappa_a1)
    e_left, e_right = drive.interval_values(t[:-1], t[1:], fractions=(0.0, 1.0))
    d_right_of = coupling * e_left  # drive just after t_n
    d_left_of = coupling * e_right  # drive just before t_{n+1}

    a = np.zeros(t.size, dtype=complex)
    # G_n = lam a_n - H_n, with H_n the trapezoid history integral at t_n
    G_prev = 0.0 + 0.0j
    denom = 1.0 - 0.5 * h * (lam - 0.5 * h * K[0])
    for k in range(t.size - 1):
        # history part of H_{k+1} that does not involve a_{k+1}
        if k == 0:
            partial = 0.5 * h * K[1] * a[0]
        else:
            partial = h * (0.5 * K[k + 1] * a[0] + np.dot(K[k:0:-1], a[1 : k + 1]))
        rhs = a[k] + 0.5 * h * (G_prev + d_right_of[k] - partial + d_left_of[k])
        a[k + 1] = rhs / denom
        G_prev = lam * a[k + 1] - (partial + 0.5 * h * K[0] * a[k + 1])
    return a


def asymptotic_solution(g, delta_omega, kappa_a, kappa_m, omega_a, a0, t, n_modes: int | None = None):
    """Free cavity amplitude in the large-N (Dirac comb) limit, 0 <= t <= 2T.

    Before T = 2 pi / dw the cavity decays at kappa_a + pi g^2 / dw; between T
    and 2T the stored excitation returns as a (t - T) exp(...) revival. The
    revival sign follows the comb parity (-1)^N when ``n_modes`` is given and
    the odd-N sign otherwise.
    """
    t = np.asarray(t, dtype=float)
    T = 2 * math.pi / delta_omega
    if np.any(t < 0) or np.any(t > 2 * T * (1 + 1e-12)):
        raise ValidationError("asymptotic solution covers 0 <= t <= 2T only")
    rate = 1j * omega_a + kappa_a + math.pi * abs(g) ** 2 / delta_omega
    sign = -1.0 if n_modes is None else (-1.0) ** n_modes
    first = a0 * np.exp(-rate * t)
    strength = 2 * math.pi * abs(g) ** 2 / delta_omega
    tau = t - T
    revival = sign * strength * a0 * np.exp((-1j * omega_a - kappa_m) * T) * tau * np.exp(-rate * tau)
    return np.where(t < T, first, revival)[()]


__all__ = [
    "Pulse",
    "DriveSpec",
    "TimeTrace",
    "integrate",
    "exact_oracle",
    "kernel_integrate",
    "comb_kernel",
    "asymptotic_solution",
    "default_step",
    "uniform_comb_parameters",
]
