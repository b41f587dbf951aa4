"""Run configuration files and CSV result files.

Config files are flat ``key = value`` text, optionally grouped under
``[system]``, ``[drive]``, ``[run]``, ``[field]`` or ``[spectrum]`` headers.
Frequencies are cyclic MHz, times ns, fields Oe. Everything is converted to
rad/s and s here and nowhere else.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TimeTrace
from .errors import ValidationError
from .experiments import Comparison, GradientSpec, MonteCarloStats, PulsePlan, SweepResult
from .model import GAMMA_PER_OE, MHZ, FeasibilityReport
from .spectrum import SpectrumTrace, SweepMap

OUTPUT_DIR_ENV = "MAGNONMEM_OUTPUT_DIR"
SECTIONS = ("system", "drive", "run", "field", "spectrum")
_TOP = "__top__"

# key -> (default, kind). Defaults reproduce the eight-sphere experiment.
SCHEMA: dict[str, tuple[object, str]] = {
    "N": (8, "int"),
    "f_a_MHz": (7520.0, "float"),
    "g0_MHz": (10.0, "float"),
    "domega_MHz": (10.0, "float"),
    "kappa_a0_MHz": (3.0, "float"),
    "kappa_m_MHz": (0.72, "float"),
    "coupling": ("critical", "str"),
    "kappa_a1_MHz": (None, "float?"),
    "detuning_MHz": (0.0, "float"),
    "pulse_shape": ("rectangular", "str"),
    "pulse_ns": (20.0, "float"),
    "pulse_starts_ns": ("0", "floats"),
    "pulse_amplitudes": ("1", "floats"),
    "seed": (0, "int"),
    "workers": (1, "int"),
    "dt_ns": (None, "float?"),
    "tol": (1e-10, "float"),
    "t_end_ns": (None, "float?"),
    "samples": (500, "int"),
    "spread": (0.10, "float"),
    "axis": ("delta_omega", "str"),
    "values": ("5,8,10,12.5,20", "floats"),
    "gamma_MHz_per_Oe": (2.8, "float"),
    "H0_Oe": (None, "float?"),
    "deltaH_Oe": (None, "float?"),
    "field_axis": ("deltaH", "str"),
    "field_from": (-30.0, "float"),
    "field_to": (30.0, "float"),
    "field_points": (121, "int"),
    "span_MHz": (160.0, "float"),
    "points": (4001, "int"),
}

ALIASES = {
    "dω_MHz": "domega_MHz",
    "κa0_MHz": "kappa_a0_MHz",
    "κa1_MHz": "kappa_a1_MHz",
    "κm_MHz": "kappa_m_MHz",
}

_NON_NEGATIVE = ("g0_MHz", "domega_MHz", "kappa_a0_MHz", "kappa_m_MHz", "kappa_a1_MHz", "spread",
                 "gamma_MHz_per_Oe")
_POSITIVE = ("f_a_MHz", "pulse_ns", "dt_ns", "tol", "t_end_ns", "span_MHz")


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters; ``values`` keeps the I/O-unit view for file headers."""

    spec: GradientSpec
    plan: PulsePlan
    values: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def workers(self) -> int:
        return int(self.values["workers"])

    @property
    def dt(self) -> float | None:
        v = self.values["dt_ns"]
        return None if v is None else v * 1e-9

    @property
    def tol(self) -> float:
        return float(self.values["tol"])

    @property
    def gamma(self) -> float:
        return self.values["gamma_MHz_per_Oe"] / 2.8 * GAMMA_PER_OE

    def with_values(self, **changes) -> "RunConfig":
        vals = dict(self.values)
        vals.update(changes)
        return _build(vals)

    def header_items(self) -> list[tuple[str, str]]:
        return [(k, _fmt_value(self.values[k])) for k in SCHEMA]


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key: str, raw: str, lineno: int | None):
    kind = SCHEMA[key][1]
    where = f" (line {lineno})" if lineno else ""
    text = raw.strip()
    try:
        if kind == "int":
            f = float(text)
            if f != int(f):
                raise ValueError
            return int(f)
        if kind == "float":
            return float(text)
        if kind == "float?":
            return None if text.lower() in ("", "none") else float(text)
        if kind == "floats":
            parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
            if not parts:
                raise ValueError
            return tuple(float(p) for p in parts)
        return text
    except ValueError:
        raise ValidationError(f"field {key!r}{where}: cannot parse {raw!r} as {kind.rstrip('?')}") from None


def _validate(vals: dict) -> None:
    for k in _NON_NEGATIVE:
        v = vals[k]
        if v is not None and (not math.isfinite(v) or v < 0):
            raise ValidationError(f"field {k!r} must be non-negative, got {v!r}")
    for k in _POSITIVE:
        v = vals[k]
        if v is not None and not (v > 0):
            raise ValidationError(f"field {k!r} must be positive, got {v!r}")
    if vals["N"] < 1:
        raise ValidationError(f"field 'N' must be >= 1, got {vals['N']}")
    if vals["domega_MHz"] == 0:
        raise ValidationError("field 'domega_MHz' must be non-zero (degenerate gradient)")
    if vals["coupling"] not in ("critical", "fixed"):
        raise ValidationError(f"field 'coupling' must be 'critical' or 'fixed', got {vals['coupling']!r}")
    if vals["coupling"] == "fixed" and vals["kappa_a1_MHz"] is None:
        raise ValidationError("field 'kappa_a1_MHz' is required when coupling = fixed")
    if vals["pulse_shape"] not in ("rectangular", "gaussian"):
        raise ValidationError(f"field 'pulse_shape' must be rectangular or gaussian, got {vals['pulse_shape']!r}")
    for k in ("workers", "samples", "field_points", "points"):
        if vals[k] < 1:
            raise ValidationError(f"field {k!r} must be >= 1")
    if vals["seed"] < 0:
        raise ValidationError("field 'seed' must be non-negative")


def _build(vals: dict) -> RunConfig:
    _validate(vals)
    ka1 = vals["kappa_a1_MHz"] * MHZ if vals["coupling"] == "fixed" else None
    spec = GradientSpec(
        N=vals["N"],
        omega_a=vals["f_a_MHz"] * MHZ,
        delta_omega=vals["domega_MHz"] * MHZ,
        g0=vals["g0_MHz"] * MHZ,
        kappa_m=vals["kappa_m_MHz"] * MHZ,
        kappa_a0=vals["kappa_a0_MHz"] * MHZ,
        kappa_a1=ka1,
        detuning=vals["detuning_MHz"] * MHZ,
    )
    plan = PulsePlan(
        duration=vals["pulse_ns"] * 1e-9,
        shape=vals["pulse_shape"],
        starts=tuple(s * 1e-9 for s in vals["pulse_starts_ns"]),
        amplitudes=tuple(vals["pulse_amplitudes"]),
    )
    plan.drive(spec.carrier)  # validates pulses
    spec.config()  # model-level validation
    resolved = dict(vals)
    resolved["kappa_a1_MHz"] = spec.resolved_kappa_a1 / MHZ
    return RunConfig(spec, plan, resolved)


def default_values() -> dict:
    vals = {}
    for k, (default, kind) in SCHEMA.items():
        vals[k] = _convert(k, default, None) if kind == "floats" else default
    return vals


def _line_at(text: str, lineno: int) -> str:
    rows = text.splitlines()
    return rows[lineno - 1].strip() if 1 <= lineno <= len(rows) else ""


def parse_config(text: str) -> RunConfig:
    """Parse config text; errors carry the 1-based line number."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(f"[{_TOP}]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ValidationError(f"line {exc.lineno - 1}: duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise ValidationError(f"line {exc.lineno - 1}: duplicate section [{exc.section}]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        text_line = _line_at(text, lineno - 1)
        raise ValidationError(f"line {lineno - 1}: cannot parse {text_line!r}") from None

    lines = text.splitlines()

    def line_of(key: str) -> int | None:
        for i, ln in enumerate(lines, 1):
            if ln.split("=", 1)[0].split(":", 1)[0].strip() == key:
                return i
        return None

    vals = default_values()
    seen: dict[str, str] = {}
    for section in parser.sections():
        if section != _TOP and section not in SECTIONS:
            raise ValidationError(f"unknown section [{section}]; allowed: {', '.join(SECTIONS)}")
        for raw_key, raw in parser.items(section):
            key = ALIASES.get(raw_key, raw_key)
            if key not in SCHEMA:
                n = line_of(raw_key)
                raise ValidationError(f"unknown key {raw_key!r}" + (f" (line {n})" if n else ""))
            if key in seen:
                raise ValidationError(f"key {key!r} given twice (as {seen[key]!r} and {raw_key!r})")
            seen[key] = raw_key
            vals[key] = _convert(key, raw, line_of(raw_key))
    if "kappa_a1_MHz" in seen and "coupling" not in seen:
        vals["coupling"] = "fixed"
    return _build(vals)


def load_config(path=None) -> RunConfig:
    """Read a config file; ``None`` gives the documented defaults."""
    if path is None:
        return _build(default_values())
    return parse_config(Path(path).read_text(encoding="utf-8"))


def resolve_output(path, default_name: str) -> Path:
    """Relative outputs go under $MAGNONMEM_OUTPUT_DIR when it is set."""
    base = os.environ.get(OUTPUT_DIR_ENV)
    p = Path(path) if path else Path(default_name)
    if not p.is_absolute() and base:
        p = Path(base) / p
    return p


# Result files


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _table(result, config: RunConfig | None):
    """(kind, columns, units, rows, footer) for a supported result object."""
    footer: list[tuple[str, str]] = []
    if isinstance(result, TimeTrace):
        cols = ["t_ns", "re_a", "im_a", "intensity", "re_Eout", "im_Eout"]
        units = ["ns", "arb", "arb", "arb", "arb", "arb"]
        data = [result.t * 1e9, result.a.real, result.a.imag, result.intensity,
                result.e_out.real, result.e_out.imag]
        for j, mj in enumerate(result.m, 1):
            cols += [f"re_m{j}", f"im_m{j}"]
            units += ["arb", "arb"]
            data += [mj.real, mj.imag]
        return "timetrace", cols, units, list(zip(*data)), footer
    if isinstance(result, SpectrumTrace):
        cols = ["f_MHz", "abs_r", "re_r", "im_r", "phase_rad", "group_delay_ns"]
        units = ["MHz", "1", "1", "1", "rad", "ns"]
        data = [result.omega_grid / MHZ, result.magnitude, result.r.real, result.r.imag,
                result.phase, result.group_delay * 1e9]
        return "spectrum", cols, units, list(zip(*data)), footer
    if isinstance(result, SweepMap):
        cols = [result.axis_name + "_Oe", "f_MHz", "abs_r"]
        units = ["Oe", "MHz", "1"]
        f = result.omega_grid / MHZ
        rows = [(x, fk, result.magnitude[i, k]) for i, x in enumerate(result.x_axis) for k, fk in enumerate(f)]
        return "sweepmap", cols, units, rows, footer
    if isinstance(result, SweepResult):
        scale, unit = (1.0, "1") if result.axis == "N" else (1.0 / MHZ, "MHz")
        cols = [result.axis, "ok", "zeta", "T_ns", "peak_intensity", "zone3_ratio", "error"]
        units = [unit, "bool", "1", "ns", "arb", "1", "text"]
        rows = [(p.value * scale, p.ok, p.zeta, p.T_measured * 1e9, p.peak_intensity, p.zone3_ratio,
                 p.error.replace(",", ";").replace("\n", " ")) for p in result.points]
        return "sweep", cols, units, rows, footer
    if isinstance(result, MonteCarloStats):
        rows = [(k, z) for k, z in enumerate(result.samples)]
        footer = [("mean", repr(result.mean)), ("std", repr(result.std)),
                  ("n_samples", str(result.n_samples)), ("spread", repr(result.spread)),
                  ("seed", str(result.seed))]
        return "montecarlo", ["sample", "zeta"], ["1", "1"], rows, footer
    if isinstance(result, FeasibilityReport):
        rows = [(c.name.replace(",", ";"), c.lhs, c.rhs, c.ratio, c.required_ratio, c.passed)
                for c in result.constraints]
        footer = [("cooperativity", repr(float(result.cooperativity))), ("passed", str(result.passed))]
        return ("feasibility", ["constraint", "lhs", "rhs", "ratio", "required_ratio", "passed"],
                ["text", "rad/s", "rad/s", "1", "1", "bool"], rows, footer)
    if isinstance(result, Comparison):
        u, r = result.uniform.trace, result.random.trace
        if u.t.shape != r.t.shape or not np.array_equal(u.t, r.t):
            raise ValidationError("comparison traces must share a time grid")
        cols = ["t_ns", "intensity_uniform", "intensity_random"]
        rows = list(zip(u.t * 1e9, u.intensity, r.intensity))
        footer = [("zone2_ratio", repr(result.zone2_ratio)),
                  ("zeta_uniform", repr(result.uniform.report.zeta)),
                  ("zeta_random", repr(result.random.report.zeta)),
                  ("off_window_uniform", repr(result.uniform.off_window_energy)),
                  ("off_window_random", repr(result.random.off_window_energy))]
        return "compare", cols, ["ns", "arb", "arb"], rows, footer
    raise ValidationError(f"cannot serialize {type(result).__name__}")


def write_result(result, path, config: RunConfig | None = None, seed: int | None = None,
                 extra: dict | None = None) -> Path:
    """Write a result as CSV under a '#' metadata header; output is deterministic."""
    kind, cols, units, rows, footer = _table(result, config)
    path = Path(path)
    lines = [f"# magnonmem {__version__}", f"# kind: {kind}"]
    if seed is None and config is not None:
        seed = config.seed
    lines.append(f"# seed: {'none' if seed is None else seed}")
    if config is not None:
        lines += [f"# config.{k}: {v}" for k, v in config.header_items()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append("# units: " + ",".join(f"{c}={u}" for c, u in zip(cols, units)))
    lines.append(",".join(cols))
    lines += [",".join(_num(x) for x in row) for row in rows]
    lines += [f"# footer.{k}: {v}" for k, v in footer]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


@dataclass(frozen=True)
class ResultFile:
    meta: dict
    columns: dict
    footer: dict

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "")


def read_result(path) -> ResultFile:
    """Parse a file written by :func:`write_result`; numeric columns become float arrays."""
    meta: dict[str, str] = {}
    footer: dict[str, str] = {}
    body: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                if key.startswith("footer."):
                    footer[key[7:]] = value
                else:
                    meta[key] = value
            elif line:
                body.append(line)
    if not body:
        raise ValidationError(f"{path}: no column header")
    reader = csv.reader(body)
    header = next(reader)
    raw = list(zip(*reader)) if len(body) > 1 else [()] * len(header)
    columns = {}
    for name, col in zip(header, raw):
        try:
            columns[name] = np.array([float(x) for x in col])
        except ValueError:
            columns[name] = list(col)
    return ResultFile(meta, columns, footer)


def trace_from_file(rf: ResultFile) -> TimeTrace:
    """Rebuild the stored fields of a time-trace file (kappa_a1 from the header when present)."""
    c = rf.columns
    t = c["t_ns"] * 1e-9
    a = c["re_a"] + 1j * c["im_a"]
    n = sum(1 for k in c if k.startswith("re_m"))
    m = np.array([c[f"re_m{j}"] + 1j * c[f"im_m{j}"] for j in range(1, n + 1)]).reshape(n, t.size)
    e_out = c["re_Eout"] + 1j * c["im_Eout"]
    ka1 = float(rf.meta.get("config.kappa_a1_MHz", "nan")) * MHZ
    e_in = -(e_out - 1j * math.sqrt(2 * ka1) * a) if math.isfinite(ka1) else np.full(t.shape, np.nan)
    return TimeTrace(t, a, m, e_in, e_out, c["intensity"], ka1)


__all__ = [
    "OUTPUT_DIR_ENV",
    "SCHEMA",
    "RunConfig",
    "parse_config",
    "load_config",
    "default_values",
    "resolve_output",
    "write_result",
    "read_result",
    "ResultFile",
    "trace_from_file",
]
