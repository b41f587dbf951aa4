import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnonmem.dynamics import DriveSpec, TimeTrace, integrate
from magnonmem.errors import NumericalError, ValidationError
from magnonmem.memory import (
    collective_projection,
    detect_peaks,
    efficiency_closed_form,
    interference_visibility,
    measure_efficiency,
    window_energy,
    zone_windows,
)
from magnonmem.model import MHZ, build_gradient_system, collective_basis, experiment_config

WA = 2 * math.pi * 7.52e9
T = 100e-9


@pytest.fixture(scope="module")
def memory_run():
    cfg = experiment_config()
    drive = DriveSpec.rectangular(20e-9, WA)
    return cfg, drive, integrate(cfg, drive, 255e-9)


class TestClosedForm:
    def test_experiment_numbers(self):
        cf = efficiency_closed_form(10 * MHZ, 10 * MHZ, 0.72 * MHZ, 3 * MHZ, 20e-9)
        # hand arithmetic: F = 10/1.44, C = 100/2.16, G = 10 pi / 3
        assert cf.finesse == pytest.approx(6.9444, abs=1e-4)
        assert cf.cooperativity == pytest.approx(46.296, abs=1e-3)
        assert cf.figure_of_merit == pytest.approx(10.472, abs=1e-3)
        assert cf.figure_of_merit == pytest.approx(0.5 * math.pi * cf.cooperativity / cf.finesse, rel=1e-12)
        assert cf.zeta == pytest.approx(0.2592, abs=1e-4)

    def test_lossless_magnons(self):
        cf = efficiency_closed_form(10 * MHZ, 10 * MHZ, 0.0, 3 * MHZ, 20e-9)
        G = 10 * math.pi / 3
        shape = 1 - 1 / (20e-9 * 3 * MHZ * (1 + G))
        assert cf.zeta == pytest.approx(shape * (G / (1 + G)) ** 2, rel=1e-12)

    def test_saturation_limit(self):
        cf = efficiency_closed_form(1e4 * MHZ, 10 * MHZ, 0.72 * MHZ, 3 * MHZ, 1e-3)
        assert cf.zeta == pytest.approx(math.exp(-2 * 0.72 * 2 * math.pi / 10), rel=1e-6)
        assert cf.zeta == pytest.approx(0.4046, abs=1e-4)

    def test_short_pulse_rejected(self):
        with pytest.raises(ValidationError, match="pulse shorter than cavity response"):
            efficiency_closed_form(10 * MHZ, 10 * MHZ, 0.72 * MHZ, 3 * MHZ, 1e-10)

    @settings(max_examples=50)
    @given(st.floats(1, 50), st.floats(2, 40), st.floats(0, 3), st.floats(0.1, 10), st.floats(10, 200))
    def test_bounded(self, g, dw, km, ka0, tp_ns):
        try:
            cf = efficiency_closed_form(g * MHZ, dw * MHZ, km * MHZ, ka0 * MHZ, tp_ns * 1e-9)
        except ValidationError:
            return
        assert 0 <= cf.zeta <= 1


class TestEfficiency:
    def test_experiment_run(self, memory_run):
        cfg, drive, tr = memory_run
        rep = measure_efficiency(tr, drive, T)
        assert 0 < rep.zeta < 1
        lo1, hi1 = rep.window_in
        lo2, hi2 = rep.window_out
        lo3, hi3 = rep.window_second
        assert hi1 <= lo2 < hi2 <= lo3 < hi3
        assert rep.peak_time == pytest.approx(T, abs=0.25e-9 + 10e-9)
        assert rep.input_energy == pytest.approx(20e-9)

    def test_zone_energy_is_window_integral(self, memory_run):
        cfg, drive, tr = memory_run
        rep = measure_efficiency(tr, drive, T)
        assert rep.zone_energies[1] == pytest.approx(window_energy(tr.t, tr.intensity, *rep.window_out))
        assert rep.zeta == pytest.approx(rep.zone_energies[1] / drive.energy())

    def test_window_energy_interpolates_edges(self):
        t = np.linspace(0, 1, 11)
        y = 2 * t
        assert window_energy(t, y, 0.05, 0.95) == pytest.approx(0.95**2 - 0.05**2)
        assert window_energy(t, y, 2.0, 3.0) == 0.0

    def test_overlapping_zones(self):
        drive = DriveSpec.rectangular(20e-9, WA)
        with pytest.raises(ValidationError, match="overlapping zones"):
            zone_windows(drive, 20e-9)

    def test_short_trace(self, memory_run):
        cfg, drive, tr = memory_run
        short = integrate(cfg, drive, 80e-9)
        with pytest.raises(ValidationError):
            measure_efficiency(short, drive, T)

    def test_zone_three_missing_is_nan(self):
        cfg = experiment_config()
        drive = DriveSpec.rectangular(20e-9, WA)
        tr = integrate(cfg, drive, 160e-9)
        rep = measure_efficiency(tr, drive, T)
        assert math.isnan(rep.zone_energies[2])


class TestCollective:
    def test_two_mode_beat(self):
        dw = 10 * MHZ
        cfg = build_gradient_system(2, WA, dw, 0.0, 0.0, 0.0, 0.0)
        basis = collective_basis(cfg.with_magnons(couplings=[1.0, 1.0]))
        x0 = np.array([0, 1, 1], dtype=complex) / math.sqrt(2)
        tr = integrate(cfg, DriveSpec((), WA), 2 * math.pi / dw, dt=0.1e-9, x0=x0)
        bright, dark = collective_projection(tr, basis)
        late = tr.t > 10e-9
        assert tr.t[late][np.argmax(bright[late])] == pytest.approx(T, abs=1e-10)
        assert tr.t[np.argmax(dark[0])] == pytest.approx(T / 2, abs=0.1e-9)
        assert bright[-1] == pytest.approx(1.0, abs=1e-9)

    def test_bright_mode_dephases_during_storage(self, memory_run):
        cfg, drive, tr = memory_run
        bright, dark = collective_projection(tr, collective_basis(cfg))
        at_input = bright[np.argmin(np.abs(tr.t - 20e-9))]
        between = bright[(tr.t > 30e-9) & (tr.t < 90e-9)].min()
        assert at_input / between >= 10
        assert dark.shape == (7, tr.t.size)

    def test_dark_state_never_reaches_cavity(self):
        cfg = build_gradient_system(4, WA, 0.0, 5 * MHZ, 0.3 * MHZ, MHZ, 2 * MHZ)
        basis = collective_basis(cfg)
        x0 = np.concatenate([[0.0], basis.dark[1].conj()])
        tr = integrate(cfg, DriveSpec((), WA), 200e-9, x0=x0)
        assert np.max(np.abs(tr.a)) < 1e-12

    def test_dimension_mismatch(self, memory_run):
        cfg, drive, tr = memory_run
        other = collective_basis(build_gradient_system(3, WA, MHZ, MHZ, 0.0, 0.0, 0.0))
        with pytest.raises(ValidationError, match="dimension mismatch"):
            collective_projection(tr, other)


class TestVisibility:
    phases = np.linspace(0, 2 * math.pi, 73)

    def test_noiseless_visibility_is_one(self, memory_run):
        cfg, drive, tr = memory_run
        assert interference_visibility(tr, drive, self.phases) == pytest.approx(1.0, abs=1e-9)

    def test_unbalanced_reference(self, memory_run):
        cfg, drive, tr = memory_run
        idx = np.argmax(np.where(tr.t >= 40e-9, tr.intensity, 0))
        s = abs(tr.e_out[idx])
        v = interference_visibility(tr, drive, self.phases, reference_amplitude=3 * s)
        assert v == pytest.approx(2 * 3 / (1 + 9), rel=1e-9)

    def test_zero_signal(self):
        cfg = experiment_config()
        drive = DriveSpec.rectangular(20e-9, WA)
        t = np.linspace(0, 100e-9, 11)
        zero = TimeTrace(t, np.zeros(11, complex), np.zeros((8, 11), complex), np.zeros(11, complex),
                         np.zeros(11, complex), np.zeros(11), cfg.cavity.kappa_a1)
        with pytest.raises(NumericalError, match="undefined visibility"):
            interference_visibility(zero, drive, self.phases)

    def test_phase_grid_must_span_cycle(self, memory_run):
        cfg, drive, tr = memory_run
        with pytest.raises(ValidationError):
            interference_visibility(tr, drive, np.linspace(0, math.pi, 10))


def test_peak_detection_smooths():
    t = np.linspace(0, 1, 1001)
    y = np.exp(-((t - 0.3) / 0.02) ** 2) + 0.5 * np.exp(-((t - 0.7) / 0.02) ** 2)
    y = y + 1e-3 * np.sin(2 * math.pi * 400 * t)
    idx = detect_peaks(t, y, smoothing=0.01, threshold=0.01)
    assert np.allclose(t[idx], [0.3, 0.7], atol=2e-3)
    assert detect_peaks(t, y, 0.01, 0.01, window=(0.5, 1.0)).size == 1
