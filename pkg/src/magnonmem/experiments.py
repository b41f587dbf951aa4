"""Packaged studies: parameter sweeps, Monte Carlo imperfections, multi-pulse storage."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .dynamics import DriveSpec, Pulse, TimeTrace, default_step, integrate
from .errors import NumericalError, ValidationError
from .memory import EfficiencyReport, detect_peaks, measure_efficiency, window_energy, zone_windows
from .model import MHZ, TWO_PI, SystemConfig, build_gradient_system
from .spectrum import SpectrumTrace, reflection_trace

SWEEP_AXES = ("delta_omega", "g", "kappa_m", "N", "detuning")


@dataclass(frozen=True)
class GradientSpec:
    """Parameters of an evenly spaced memory, in rad/s.

    ``kappa_a1=None`` means critical coupling, recomputed whenever the
    spec changes. ``detuning`` offsets the drive carrier from the cavity.
    """

    N: int = 8
    omega_a: float = TWO_PI * 7.52e9
    delta_omega: float = 10 * MHZ
    g0: float = 10 * MHZ
    kappa_m: float = 0.72 * MHZ
    kappa_a0: float = 3 * MHZ
    kappa_a1: float | None = None
    detuning: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("empty system: N must be >= 1")
        if not (self.delta_omega > 0):
            raise ValidationError("delta_omega must be positive")

    @property
    def storage_time(self) -> float:
        return TWO_PI / self.delta_omega

    @property
    def critical_kappa_a1(self) -> float:
        return self.kappa_a0 + math.pi * abs(self.g0) ** 2 / self.delta_omega

    @property
    def resolved_kappa_a1(self) -> float:
        return self.critical_kappa_a1 if self.kappa_a1 is None else self.kappa_a1

    @property
    def carrier(self) -> float:
        return self.omega_a + self.detuning

    def config(self) -> SystemConfig:
        return build_gradient_system(
            self.N, self.omega_a, self.delta_omega, self.g0, self.kappa_m,
            self.kappa_a0, self.resolved_kappa_a1, label="gradient",
        )


@dataclass(frozen=True)
class PulsePlan:
    """Input pulse train: shapes/durations/offsets (s), all on the spec's carrier."""

    duration: float = 20e-9
    shape: str = "rectangular"
    starts: tuple[float, ...] = (0.0,)
    amplitudes: tuple[complex, ...] = (1.0,)

    def drive(self, carrier: float) -> DriveSpec:
        if len(self.amplitudes) not in (1, len(self.starts)):
            raise ValidationError("amplitudes must match the number of pulses")
        amps = self.amplitudes * len(self.starts) if len(self.amplitudes) == 1 else self.amplitudes
        pulses = tuple(Pulse(self.shape, s, self.duration, a) for s, a in zip(self.starts, amps))
        return DriveSpec(pulses, carrier)


@dataclass(frozen=True)
class MemoryRun:
    trace: TimeTrace
    report: EfficiencyReport
    drive: DriveSpec


def run_memory(spec: GradientSpec, plan: PulsePlan = PulsePlan(), dt: float | None = None,
               tol: float | None = 1e-10, with_third_zone: bool = True) -> MemoryRun:
    """Integrate one storage/retrieval cycle and measure its efficiency."""
    drive = plan.drive(spec.carrier)
    T = spec.storage_time
    reach = 2.4 if with_third_zone else 1.4
    t_end = drive.pulses[-1].center + reach * T + 0.05 * T
    trace = integrate(spec.config(), drive, t_end, dt=dt, tol=tol)
    return MemoryRun(trace, measure_efficiency(trace, drive, T), drive)


@dataclass(frozen=True)
class SweepPoint:
    value: float
    ok: bool
    zeta: float = math.nan
    T_measured: float = math.nan
    peak_intensity: float = math.nan
    zone3_ratio: float = math.nan
    error: str = ""
    trace: TimeTrace | None = None


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: np.ndarray
    points: tuple[SweepPoint, ...]

    @property
    def zeta(self) -> np.ndarray:
        return np.array([p.zeta for p in self.points])

    @property
    def T_measured(self) -> np.ndarray:
        return np.array([p.T_measured for p in self.points])

    @property
    def peak_intensity(self) -> np.ndarray:
        return np.array([p.peak_intensity for p in self.points])

    @property
    def failed(self) -> list[SweepPoint]:
        return [p for p in self.points if not p.ok]


def apply_axis(spec: GradientSpec, axis: str, value: float) -> GradientSpec:
    """Spec with one parameter replaced; kappa_a1 stays critical unless pinned."""
    if axis == "delta_omega":
        return replace(spec, delta_omega=float(value))
    if axis == "g":
        return replace(spec, g0=float(value))
    if axis == "kappa_m":
        return replace(spec, kappa_m=float(value))
    if axis == "N":
        if float(value) != int(value):
            raise ValidationError(f"N must be an integer, got {value!r}")
        return replace(spec, N=int(value))
    if axis == "detuning":
        return replace(spec, detuning=float(value))
    raise ValidationError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def _sweep_task(args) -> SweepPoint:
    spec, axis, value, plan, dt, tol, keep = args
    try:
        run = run_memory(apply_axis(spec, axis, value), plan, dt=dt, tol=tol)
    except (ValidationError, NumericalError) as exc:
        return SweepPoint(float(value), False, error=f"{type(exc).__name__}: {exc}")
    r = run.report
    return SweepPoint(float(value), True, r.zeta, r.peak_time, r.peak_intensity,
                      r.second_to_first, trace=run.trace if keep else None)


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_sweep(spec: GradientSpec, axis: str, values: Sequence[float], plan: PulsePlan = PulsePlan(),
              dt: float | None = None, tol: float | None = 1e-10, keep_traces: bool = False,
              workers: int = 1) -> SweepResult:
    """Memory efficiency and retrieval time along one parameter axis.

    A point that fails (bad value, overlapping zones, integrator failure) is
    recorded with ``ok=False`` and the message instead of aborting the sweep.
    """
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValidationError("sweep needs at least one value")
    jobs = [(spec, axis, v, plan, dt, tol, keep_traces) for v in vals]
    return SweepResult(axis, vals, tuple(_map(_sweep_task, jobs, workers)))


def half_max_span(x: np.ndarray, y: np.ndarray, fraction: float = 0.5) -> tuple[float, float]:
    """Interval around argmax(y) where y >= fraction * max(y), edges linearly interpolated."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size == 0:
        raise ValidationError("no finite points")
    k = int(np.argmax(y))
    level = fraction * y[k]
    lo_i = k
    while lo_i > 0 and y[lo_i - 1] >= level:
        lo_i -= 1
    hi_i = k
    while hi_i < x.size - 1 and y[hi_i + 1] >= level:
        hi_i += 1
    lo = x[lo_i] if lo_i == 0 else np.interp(level, [y[lo_i - 1], y[lo_i]], [x[lo_i - 1], x[lo_i]])
    hi = x[hi_i] if hi_i == x.size - 1 else np.interp(level, [y[hi_i + 1], y[hi_i]], [x[hi_i + 1], x[hi_i]])
    return float(lo), float(hi)


# Monte Carlo


@dataclass(frozen=True)
class MonteCarloStats:
    samples: tuple[float, ...]
    seed: int
    spread: float

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def std(self) -> float:
        # population standard deviation of the recorded samples
        return float(np.std(self.samples))


def perturbation_draws(seed: int, sample: int, n: int, spread: float) -> np.ndarray:
    """xi_j ~ U[-spread, spread] for one sample, keyed only on (seed, sample)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sample,)))
    return rng.uniform(-spread, spread, size=n)


def perturbed_config(spec: GradientSpec, xi: np.ndarray) -> SystemConfig:
    """g_j = g0 (1 + xi_j), w_j = w_a + (j - (N-1)/2) dw + dw xi_j for j = 1..N."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (spec.N,):
        raise ValidationError("one draw per sphere required")
    j = np.arange(1, spec.N + 1)
    omegas = spec.omega_a + (j - (spec.N - 1) / 2.0) * spec.delta_omega + spec.delta_omega * xi
    couplings = spec.g0 * (1.0 + xi)
    return spec.config().with_magnons(omegas=omegas, couplings=couplings)


def _mc_task(args) -> float:
    spec, plan, spread, seed, k, dt, tol = args
    xi = perturbation_draws(seed, k, spec.N, spread)
    cfg = perturbed_config(spec, xi)
    drive = plan.drive(spec.carrier)
    T = spec.storage_time
    trace = integrate(cfg, drive, drive.pulses[-1].center + 1.45 * T, dt=dt, tol=tol)
    return measure_efficiency(trace, drive, T).zeta


def monte_carlo_imperfection(spec: GradientSpec, relative_spread: float, n_samples: int, seed: int,
                             plan: PulsePlan = PulsePlan(), dt: float | None = None,
                             tol: float | None = 1e-10, workers: int = 1) -> MonteCarloStats:
    """Memory efficiency under random per-sphere coupling and frequency errors.

    Each sphere gets one xi_j shared by its coupling and its frequency
    offset. Draws depend only on (seed, sample index), so results do not
    depend on ``workers``. kappa_a1 is fixed from the unperturbed spec.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    if not (relative_spread >= 0) or not math.isfinite(relative_spread):
        raise ValidationError("relative_spread must be a finite non-negative number")
    jobs = [(spec, plan, relative_spread, int(seed), k, dt, tol) for k in range(n_samples)]
    return MonteCarloStats(tuple(float(z) for z in _map(_mc_task, jobs, workers)), int(seed),
                           float(relative_spread))


# Multi-pulse storage


@dataclass(frozen=True)
class FifoReport:
    trace: TimeTrace
    input_times: np.ndarray  # pulse centers
    retrieval_times: np.ndarray  # detected peak times
    retrieval_peaks: np.ndarray  # peak intensities, in input order
    order_preserved: bool

    @property
    def delays(self) -> np.ndarray:
        return self.retrieval_times - self.input_times

    @property
    def input_separation(self) -> np.ndarray:
        return np.diff(self.input_times)

    @property
    def output_separation(self) -> np.ndarray:
        return np.diff(self.retrieval_times)


def multi_pulse_fifo(config: SystemConfig, drive: DriveSpec, storage_time: float,
                     dt: float | None = None, tol: float | None = 1e-10) -> FifoReport:
    """Store a pulse train and locate the retrieved copies.

    Peaks are local maxima of the intensity smoothed over t_p/4 and above 1%
    of the peak input intensity, searched between half and one and a half
    storage times after the pulses. Ordering is first-in-first-out when the
    k-th retrieved peak follows the k-th pulse by roughly one storage time.
    """
    if not drive.pulses:
        raise ValidationError("drive has no pulses")
    pulses = sorted(drive.pulses, key=lambda p: p.center)
    first, last = pulses[0], pulses[-1]
    T = storage_time
    if last.center - first.center >= 0.5 * T:
        raise ValidationError("pulse train does not fit within half a storage time")
    t_end = last.center + 1.6 * T
    trace = integrate(config, drive, t_end, dt=dt, tol=tol)
    tp = min(p.duration for p in pulses)
    threshold = 0.01 * max(abs(complex(p.amplitude)) ** 2 for p in pulses)
    window = (first.center + 0.5 * T, last.center + 1.5 * T)
    idx = detect_peaks(trace.t, trace.intensity, tp / 4, threshold, window)
    if idx.size < len(pulses):
        raise NumericalError(
            f"unresolvable peaks: found {idx.size} retrieval peak(s) for {len(pulses)} pulses")
    # keep the strongest peaks, then restore time order
    idx = np.sort(idx[np.argsort(trace.intensity[idx])[::-1][: len(pulses)]])
    t_in = np.array([p.center for p in pulses])
    t_out = trace.t[idx]
    delays = t_out - t_in
    order = bool(np.all(np.diff(t_out) > 0) and np.all(np.abs(delays - T) < 0.5 * np.min(np.diff(t_in), initial=T)))
    return FifoReport(trace, t_in, t_out, trace.intensity[idx], order)


# Non-uniform couplings and random combs


def cosine_coupling_profile(N: int, spacing: float, L: float, g_max: float) -> np.ndarray:
    """g_j = g_max cos(pi x_j / L) for spheres on a line centered in the cavity."""
    if N < 1:
        raise ValidationError("empty system: N must be >= 1")
    if not (L > 0) or spacing < 0:
        raise ValidationError("cavity length must be positive and spacing non-negative")
    x = (np.arange(1, N + 1) - (N + 1) / 2.0) * spacing
    outside = np.abs(x) > L / 2
    if np.any(outside):
        j = int(np.flatnonzero(outside)[0]) + 1
        raise ValidationError(f"sphere {j} at x={x[j - 1] * 1e3:.3f} mm lies outside the cavity")
    return g_max * np.cos(np.pi * x / L)


@dataclass(frozen=True)
class ComparisonCase:
    config: SystemConfig
    spectrum: SpectrumTrace
    trace: TimeTrace
    report: EfficiencyReport
    off_window_energy: float  # output energy outside Zones I and II, over input energy


@dataclass(frozen=True)
class Comparison:
    uniform: ComparisonCase
    random: ComparisonCase
    seed: int

    @property
    def zone2_ratio(self) -> float:
        """Zone-II energy of the uniform comb over that of the random comb."""
        return self.uniform.report.zone_energies[1] / self.random.report.zone_energies[1]


def _compare_case(cfg: SystemConfig, spec: GradientSpec, plan: PulsePlan, grid, dt, tol) -> ComparisonCase:
    drive = plan.drive(spec.carrier)
    T = spec.storage_time
    t_end = drive.pulses[-1].center + 2.45 * T
    trace = integrate(cfg, drive, t_end, dt=dt, tol=tol)
    rep = measure_efficiency(trace, drive, T)
    z1, z2, _ = zone_windows(drive, T)
    total = window_energy(trace.t, trace.intensity, z1[1], trace.t[-1])
    off = (total - rep.zone_energies[1]) / rep.input_energy
    return ComparisonCase(cfg, reflection_trace(cfg, grid), trace, rep, off)


def uniform_vs_random_compare(spec: GradientSpec, seed: int, plan: PulsePlan = PulsePlan(),
                              omega_grid=None, dt: float | None = None,
                              tol: float | None = 1e-10) -> Comparison:
    """Evenly spaced comb against a comb with random frequencies over the same span."""
    uniform = spec.config()
    w = uniform.omegas
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    rand_w = rng.uniform(w.min(), w.max(), size=w.size)
    if w.size == 1:
        rand_w = w.copy()
    randomized = uniform.with_magnons(omegas=rand_w)
    if omega_grid is None:
        half = 0.75 * spec.N * spec.delta_omega + 4 * spec.resolved_kappa_a1
        omega_grid = spec.omega_a + np.linspace(-half, half, 4001)
    if dt is None:
        # one step for both cases so the traces share a time grid
        dt = min(default_step(uniform, spec.carrier), default_step(randomized, spec.carrier))
    return Comparison(
        _compare_case(uniform, spec, plan, omega_grid, dt, tol),
        _compare_case(randomized, spec, plan, omega_grid, dt, tol),
        int(seed),
    )


__all__ = [
    "SWEEP_AXES",
    "GradientSpec",
    "PulsePlan",
    "MemoryRun",
    "run_memory",
    "SweepPoint",
    "SweepResult",
    "apply_axis",
    "run_sweep",
    "half_max_span",
    "MonteCarloStats",
    "perturbation_draws",
    "perturbed_config",
    "monte_carlo_imperfection",
    "FifoReport",
    "multi_pulse_fifo",
    "cosine_coupling_profile",
    "Comparison",
    "ComparisonCase",
    "uniform_vs_random_compare",
]
