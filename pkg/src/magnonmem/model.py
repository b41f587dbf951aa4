"""System description: one cavity mode linearly coupled to N magnon modes.

Everything in this module works in SI angular units (rad/s, s). Conversion
from the cyclic MHz / ns / Oe used in config files happens in :mod:`magnonmem.io`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # 1 MHz cyclic, in rad/s

HBAR = 1.054571817e-34  # J s
MU0 = 1.25663706212e-6  # T m / A
GAMMA_PER_OE = TWO_PI * 2.8e6  # rad/s per Oe
GAMMA_PER_TESLA = GAMMA_PER_OE * 1e4  # rad/s per T
YIG_SPIN = 2.5


def _check_rate(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be a finite non-negative rate, got {value!r}")


@dataclass(frozen=True)
class CavityMode:
    omega_a: float
    kappa_a0: float
    kappa_a1: float

    def __post_init__(self):
        if not np.isfinite(self.omega_a) or self.omega_a <= 0:
            raise ValidationError(f"omega_a must be positive, got {self.omega_a!r}")
        _check_rate("kappa_a0", self.kappa_a0)
        _check_rate("kappa_a1", self.kappa_a1)

    @property
    def kappa_a(self) -> float:
        return self.kappa_a0 + self.kappa_a1


@dataclass(frozen=True)
class MagnonMode:
    omega_j: float
    g_j: complex
    kappa_j: float

    def __post_init__(self):
        if not np.isfinite(self.omega_j):
            raise ValidationError(f"omega_j must be finite, got {self.omega_j!r}")
        if not np.isfinite(abs(complex(self.g_j))):
            raise ValidationError(f"g_j must be finite, got {self.g_j!r}")
        _check_rate("kappa_j", self.kappa_j)


@dataclass(frozen=True)
class SystemConfig:
    """Cavity plus an ordered list of magnon modes (list order = sphere index)."""

    cavity: CavityMode
    magnons: tuple[MagnonMode, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "magnons", tuple(self.magnons))

    @property
    def n_modes(self) -> int:
        return len(self.magnons)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega_j for m in self.magnons], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([m.g_j for m in self.magnons], dtype=complex)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([m.kappa_j for m in self.magnons], dtype=float)

    def with_cavity(self, **changes) -> "SystemConfig":
        return replace(self, cavity=replace(self.cavity, **changes))

    def with_magnons(self, omegas=None, couplings=None, kappas=None) -> "SystemConfig":
        """Return a copy with some per-mode arrays replaced."""
        omegas = self.omegas if omegas is None else np.asarray(omegas, dtype=float)
        couplings = self.couplings if couplings is None else np.asarray(couplings, dtype=complex)
        kappas = self.kappas if kappas is None else np.asarray(kappas, dtype=float)
        if not (len(omegas) == len(couplings) == len(kappas)):
            raise ValidationError("per-mode arrays must have equal length")
        magnons = tuple(
            MagnonMode(float(w), complex(g), float(k)) for w, g, k in zip(omegas, couplings, kappas)
        )
        return replace(self, magnons=magnons)


@dataclass(frozen=True)
class FieldMap:
    """Bias-field layout H_j = H0 + (j - (N+1)/2) dH, with omega_j = gamma H_j."""

    gamma: float = GAMMA_PER_OE
    H0: float = 0.0
    deltaH: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ValidationError("gamma must be positive")


@dataclass(frozen=True)
class CollectiveBasis:
    """Unitary map from individual magnon amplitudes to bright/dark amplitudes.

    Rows are coefficient vectors: ``collective = vectors @ m``.
    """

    vectors: np.ndarray
    bright_index: int = 0
    enhancement: float = math.nan

    @property
    def bright(self) -> np.ndarray:
        return self.vectors[self.bright_index]

    @property
    def dark(self) -> np.ndarray:
        return np.delete(self.vectors, self.bright_index, axis=0)


@dataclass(frozen=True)
class PhysicalCouplingParams:
    """Inputs of the single-sphere coupling-strength formula.

    ``gamma`` is in rad s^-1 T^-1 (the formula multiplies it by a vacuum
    field amplitude in tesla). ``V_a`` is the cavity modal volume.
    """

    eta: float
    omega: float
    V_a: float
    N_spins: float
    s: float = YIG_SPIN
    gamma: float = GAMMA_PER_TESLA
    hbar: float = HBAR
    mu0: float = MU0

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValidationError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not (self.V_a > 0):
            raise ValidationError(f"modal volume V_a must be positive, got {self.V_a!r}")
        if self.N_spins < 0:
            raise ValidationError("N_spins must be non-negative")
        if self.omega < 0:
            raise ValidationError("omega must be non-negative")


def gradient_offsets(n: int) -> np.ndarray:
    """Centered sphere offsets j - (N+1)/2 for j = 1..N."""
    return np.arange(1, n + 1) - (n + 1) / 2.0


def build_gradient_system(
    N: int,
    omega_a: float,
    delta_omega_m: float,
    g0: complex,
    kappa_m: float,
    kappa_a0: float,
    kappa_a1: float,
    label: str = "",
) -> SystemConfig:
    """Evenly spaced magnon comb centered on the cavity frequency."""
    if N < 1:
        raise ValidationError("empty system: N must be >= 1")
    for name, value in (("kappa_m", kappa_m), ("kappa_a0", kappa_a0), ("kappa_a1", kappa_a1)):
        _check_rate(name, value)
    if delta_omega_m < 0:
        raise ValidationError("delta_omega_m must be non-negative")
    cavity = CavityMode(omega_a, kappa_a0, kappa_a1)
    omegas = omega_a + gradient_offsets(N) * delta_omega_m
    magnons = tuple(MagnonMode(float(w), complex(g0), kappa_m) for w in omegas)
    return SystemConfig(cavity, magnons, label)


def field_to_frequency(fmap: FieldMap, j: int, N: int) -> float:
    """Angular frequency gamma * H_j of sphere ``j`` (1-based)."""
    if not (1 <= j <= N):
        raise ValidationError(f"sphere index {j} out of range 1..{N}")
    H_j = fmap.H0 + (j - (N + 1) / 2.0) * fmap.deltaH
    return fmap.gamma * H_j


def coupling_from_physical(p: PhysicalCouplingParams) -> float:
    """Magnon-photon coupling g = (eta/2) gamma sqrt(hbar omega mu0 / V_a) sqrt(2 N s)."""
    if p.V_a <= 0:
        raise ValidationError("V_a must be positive")
    b_vac = math.sqrt(p.hbar * p.omega * p.mu0 / p.V_a)
    return 0.5 * p.eta * p.gamma * b_vac * math.sqrt(2.0 * p.N_spins * p.s)


def collective_basis(config: SystemConfig) -> CollectiveBasis:
    """Bright mode along the coupling vector plus an orthonormal dark complement.

    For equal couplings the dark rows are the Fourier vectors
    ``exp(2 pi i (j - (N+1)/2) n / N) / sqrt(N)``, n = 1..N-1.
    """
    n = config.n_modes
    if n < 1:
        raise ValidationError("empty system: no magnon modes")
    g = config.couplings
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise ValidationError("no bright mode: all couplings are zero")
    bright = g / norm
    enhancement = norm / abs(g[0]) if g[0] != 0 else math.inf

    if np.allclose(g, g[0], rtol=1e-14, atol=0.0):
        offsets = gradient_offsets(n)
        k = np.arange(1, n)[:, None]
        dark = np.exp(2j * np.pi * offsets[None, :] * k / n) / math.sqrt(n)
        vectors = np.vstack([bright[None, :], dark])
    else:
        # QR completes the bright vector to an orthonormal set; Q's columns become rows.
        q, _ = np.linalg.qr(np.column_stack([bright, np.eye(n, dtype=complex)]))
        vectors = q[:, :n].T.copy()
        vectors[0] = bright
    return CollectiveBasis(vectors=vectors, bright_index=0, enhancement=enhancement)


@dataclass(frozen=True)
class Constraint:
    name: str
    lhs: float
    rhs: float
    required_ratio: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return math.inf if self.lhs > 0 else (1.0 if self.lhs == 0 else 0.0)
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.ratio >= self.required_ratio


@dataclass(frozen=True)
class FeasibilityReport:
    constraints: tuple[Constraint, ...]
    cooperativity: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def __getitem__(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.constraints:
            verdict = "PASS" if c.passed else "FAIL"
            out.append(f"{c.name:<28s} ratio={c.ratio:.4g} (need >= {c.required_ratio:g})  {verdict}")
        out.append(f"{'cooperativity C':<28s} {self.cooperativity:.4g}")
        return out


def feasibility_check(
    config: SystemConfig, delta_omega: float, much_greater: float = 10.0
) -> FeasibilityReport:
    """Evaluate the memory design inequalities; report only, never raises.

    ``much_greater`` is the ratio that stands in for "much greater than".
    The coupling used is the rms of |g_j| and the magnon loss the largest kappa_j.
    """
    n = max(config.n_modes, 1)
    g = float(np.sqrt(np.mean(np.abs(config.couplings) ** 2))) if config.n_modes else 0.0
    kappa_m = float(config.kappas.max()) if config.n_modes else 0.0
    ka0 = config.cavity.kappa_a0
    ka1 = config.cavity.kappa_a1
    coop = g**2 / (ka0 * kappa_m) if ka0 * kappa_m > 0 else math.inf
    constraints = (
        Constraint("gradient vs magnon loss", delta_omega, TWO_PI * kappa_m, 1.0),
        Constraint("g vs sqrt(N) gradient", g, math.sqrt(n) * delta_omega, 1.0),
        Constraint("g >> 2pi kappa_a0/sqrt(N)", g, TWO_PI * ka0 / math.sqrt(n), much_greater),
        Constraint("kappa_a1 >> N gradient", ka1, n * delta_omega, much_greater),
        Constraint("C >> 4 pi^2", coop, 4 * math.pi**2, much_greater),
    )
    return FeasibilityReport(constraints, coop)


def dynamics_generator(config: SystemConfig, frame_frequency: float = 0.0):
    """Linear generator ``dx/dt = M x + v E_in`` for x = (a, m_1..m_N).

    Returned in the frame rotating at ``frame_frequency``.
    """
    n = config.n_modes
    cav = config.cavity
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[0, 0] = -1j * (cav.omega_a - frame_frequency) - cav.kappa_a
    if n:
        g = config.couplings
        M[0, 1:] = -1j * g
        M[1:, 0] = -1j * np.conj(g)
        idx = np.arange(1, n + 1)
        M[idx, idx] = -1j * (config.omegas - frame_frequency) - config.kappas
    v = np.zeros(n + 1, dtype=complex)
    v[0] = -1j * math.sqrt(2.0 * cav.kappa_a1)
    return M, v


def experiment_config(kappa_a1: float | None = None, **overrides) -> SystemConfig:
    """The eight-sphere device: g = dw = 2pi*10 MHz, kappa_a0 = 2pi*3, kappa_m = 2pi*0.72 MHz.

    ``kappa_a1`` defaults to critical coupling.
    """
    params = dict(
        N=8,
        omega_a=TWO_PI * 7.52e9,
        delta_omega_m=10 * MHZ,
        g0=10 * MHZ,
        kappa_m=0.72 * MHZ,
        kappa_a0=3 * MHZ,
    )
    params.update(overrides)
    if kappa_a1 is None:
        kappa_a1 = params["kappa_a0"] + math.pi * abs(params["g0"]) ** 2 / params["delta_omega_m"]
    return build_gradient_system(kappa_a1=kappa_a1, label="experiment", **params)


__all__ = [
    "CavityMode",
    "MagnonMode",
    "SystemConfig",
    "FieldMap",
    "CollectiveBasis",
    "PhysicalCouplingParams",
    "Constraint",
    "FeasibilityReport",
    "build_gradient_system",
    "field_to_frequency",
    "coupling_from_physical",
    "collective_basis",
    "feasibility_check",
    "dynamics_generator",
    "experiment_config",
    "gradient_offsets",
    "MHZ",
    "TWO_PI",
]
