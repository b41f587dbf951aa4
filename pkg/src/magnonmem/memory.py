"""Storage/retrieval analysis of time traces: efficiency, collective modes, coherence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .dynamics import DriveSpec, TimeTrace
from .errors import NumericalError, ValidationError
from .model import CollectiveBasis

# Zone windows, in units of the storage time T, measured from the pulse centers.
ZONE_II = (0.6, 1.4)
ZONE_III = (1.6, 2.4)


@dataclass(frozen=True)
class EfficiencyReport:
    zeta: float
    window_in: tuple[float, float]
    window_out: tuple[float, float]
    window_second: tuple[float, float]
    zone_energies: tuple[float, float, float]  # I, II, III (III is nan if not covered)
    input_energy: float
    peak_time: float  # argmax of intensity in Zone II, relative to the first pulse center
    peak_intensity: float

    @property
    def second_to_first(self) -> float:
        return self.zone_energies[2] / self.zone_energies[1]


@dataclass(frozen=True)
class ClosedFormEfficiency:
    zeta: float
    finesse: float
    cooperativity: float
    figure_of_merit: float


def window_energy(t: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    """Trapezoid integral of y over [lo, hi], with linearly interpolated end points."""
    lo = max(lo, t[0])
    hi = min(hi, t[-1])
    if hi <= lo:
        return 0.0
    inside = (t > lo) & (t < hi)
    tt = np.concatenate([[lo], t[inside], [hi]])
    yy = np.concatenate([[np.interp(lo, t, y)], y[inside], [np.interp(hi, t, y)]])
    return float(np.trapezoid(yy, tt))


def zone_windows(drive: DriveSpec, T: float):
    """Zone I/II/III intervals (absolute times) for a drive and storage time T."""
    if not drive.pulses:
        raise ValidationError("efficiency needs at least one input pulse")
    first, last = drive.pulses[0], drive.pulses[-1]
    tp_pad = max(p.duration for p in drive.pulses) / 2
    lo = min(p.support[0] for p in drive.pulses) - tp_pad
    hi = max(p.support[1] for p in drive.pulses) + tp_pad
    zone1 = (lo, hi)
    zone2 = (first.center + ZONE_II[0] * T, last.center + ZONE_II[1] * T)
    zone3 = (first.center + ZONE_III[0] * T, last.center + ZONE_III[1] * T)
    if zone1[1] > zone2[0] or zone2[1] > zone3[0]:
        raise ValidationError(
            "overlapping zones: storage time too short for the pulse train "
            f"(zone I ends {zone1[1] * 1e9:.2f} ns, zone II starts {zone2[0] * 1e9:.2f} ns)"
        )
    return zone1, zone2, zone3


def measure_efficiency(trace: TimeTrace, drive: DriveSpec, T_expected: float) -> EfficiencyReport:
    """Retrieval efficiency: Zone-II output energy over input energy."""
    z1, z2, z3 = zone_windows(drive, T_expected)
    if trace.t[-1] < z2[1] - 1e-15:
        raise ValidationError(
            f"trace ends at {trace.t[-1] * 1e9:.2f} ns, before Zone II closes at {z2[1] * 1e9:.2f} ns"
        )
    e_in = drive.energy()
    if e_in <= 0:
        raise ValidationError("input pulse carries no energy")
    t = trace.t
    out2 = np.abs(trace.e_out) ** 2
    E1 = window_energy(t, out2, *z1)
    E2 = window_energy(t, trace.intensity, *z2)
    E3 = window_energy(t, trace.intensity, *z3) if t[-1] >= z3[1] - 1e-15 else math.nan
    sel = (t >= z2[0]) & (t <= z2[1])
    k = int(np.argmax(trace.intensity[sel]))
    peak_t = float(t[sel][k] - drive.pulses[0].center)
    return EfficiencyReport(
        zeta=E2 / e_in,
        window_in=z1,
        window_out=z2,
        window_second=z3,
        zone_energies=(E1, E2, E3),
        input_energy=e_in,
        peak_time=peak_t,
        peak_intensity=float(trace.intensity[sel][k]),
    )


def efficiency_closed_form(g, delta_omega, kappa_m, kappa_a0, t_p) -> ClosedFormEfficiency:
    """Large-N estimate for a rectangular pulse at critical coupling.

    zeta = exp(-2 pi / F) [1 - 1/(t_p kappa_a0 (1 + G))] (G / (1 + G))^2
    with F = dw / 2 kappa_m, C = g^2 / (kappa_m kappa_a0), G = (pi/2) C / F.
    """
    g2 = abs(g) ** 2
    enhanced = kappa_a0 + math.pi * g2 / delta_omega
    if not (t_p * enhanced > 1.0):
        raise ValidationError(
            "pulse shorter than cavity response: need t_p (kappa_a0 + pi g^2/dw) > 1")
    F = delta_omega / (2 * kappa_m) if kappa_m > 0 else math.inf
    C = g2 / (kappa_m * kappa_a0) if kappa_m * kappa_a0 > 0 else math.inf
    if kappa_a0 > 0:
        G = math.pi * g2 / (delta_omega * kappa_a0)
        shape = 1.0 - 1.0 / (t_p * kappa_a0 * (1.0 + G))
        match = (G / (1.0 + G)) ** 2
    else:
        G = math.inf
        shape = 1.0 - 1.0 / (t_p * enhanced)
        match = 1.0
    zeta = math.exp(-2 * math.pi / F) * shape * match
    return ClosedFormEfficiency(zeta, F, C, G)


def collective_projection(trace: TimeTrace, basis: CollectiveBasis):
    """Occupations |B(t)|^2 and |D_n(t)|^2 of the collective modes.

    Amplitudes are projected in the trace's rotating frame, so a bright
    excitation dephases into the dark modes and rephases after 2 pi / dw.
    Returns (bright, dark) with shapes (T,) and (N-1, T).
    """
    n = trace.m.shape[0]
    if basis.vectors.shape != (n, n):
        raise ValidationError(f"dimension mismatch: trace has {n} magnons, basis {basis.vectors.shape}")
    amps = basis.vectors @ trace.m
    occ = np.abs(amps) ** 2
    bright = occ[basis.bright_index]
    dark = np.delete(occ, basis.bright_index, axis=0)
    return bright, dark


def interference_visibility(trace: TimeTrace, reference: DriveSpec, phases, t_detect: float | None = None,
                            reference_amplitude: float | None = None) -> float:
    """Fringe visibility of the retrieved field against a phase-shifted carrier reference.

    The reference is the input carrier (phase of the first reference pulse)
    rotated by each phase in ``phases``; the envelope detector records
    |e_out + A e^{i phi}|^2 at ``t_detect`` (default: the intensity maximum
    from one pulse length after the input onwards, i.e. the retrieval peak). A sinusoid is least-squares fitted to the fringe and
    (max - min)/(max + min) of the fit is returned. ``reference_amplitude``
    defaults to the retrieved amplitude, which maximises the contrast.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.size < 3 or np.ptp(phases) < 2 * math.pi - 1e-12:
        raise ValidationError("phase grid must span at least 2 pi with >= 3 points")
    if not reference.pulses:
        raise ValidationError("reference drive has no pulse")
    if t_detect is None:
        last = reference.pulses[-1]
        after = trace.t >= last.support[1] + last.duration
        if not np.any(after):
            raise ValidationError("trace ends before the input pulse does")
        idx = np.flatnonzero(after)[np.argmax(trace.intensity[after])]
    else:
        idx = int(np.argmin(np.abs(trace.t - t_detect)))
    signal = complex(trace.e_out[idx])
    if abs(signal) == 0.0:
        raise NumericalError("undefined visibility: retrieved signal is zero")
    ref_phase = np.angle(complex(reference.pulses[0].amplitude))
    A = abs(signal) if reference_amplitude is None else float(reference_amplitude)
    if A == 0:
        raise NumericalError("undefined visibility: reference amplitude is zero")
    fringe = np.abs(signal + A * np.exp(1j * (phases + ref_phase))) ** 2
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    c0, c1, s1 = np.linalg.lstsq(design, fringe, rcond=None)[0]
    amp = math.hypot(c1, s1)
    if c0 <= 0:
        raise NumericalError("undefined visibility: no detected power")
    return amp / c0


def detect_peaks(t: np.ndarray, intensity: np.ndarray, smoothing: float, threshold: float,
                 window: tuple[float, float] | None = None) -> np.ndarray:
    """Times of local maxima of the moving-average-smoothed intensity above ``threshold``."""
    dt = float(t[1] - t[0])
    width = max(1, int(round(smoothing / dt)))
    smooth = uniform_filter1d(np.asarray(intensity, dtype=float), size=width, mode="nearest")
    idx, _ = find_peaks(smooth, height=threshold)
    if window is not None:
        idx = idx[(t[idx] >= window[0]) & (t[idx] <= window[1])]
    return idx


__all__ = [
    "EfficiencyReport",
    "ClosedFormEfficiency",
    "measure_efficiency",
    "efficiency_closed_form",
    "collective_projection",
    "interference_visibility",
    "detect_peaks",
    "zone_windows",
    "window_energy",
    "ZONE_II",
    "ZONE_III",
]
