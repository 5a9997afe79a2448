"""
Run configuration: a flat INI document with fixed sections and keys.

Every key has a documented default; unknown sections or keys, values of the
wrong type and out-of-range values each raise their own ConfigError
subclass naming ``section.key``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .dpm import HierarchyConfig
from .model import (
    AMPLITUDE_CONVENTIONS,
    GaussianWindow,
    Harmonic,
    Identity,
    InvertedGaussian,
    OperatorSpec,
    Polynomial,
    PolynomialMultiplier,
    PotentialModel,
    QuarticPerturbed,
    WavepacketSpec,
)
from .oracle import GridSpec
from .spectrum import WINDOWS, WindowSpec


class ConfigError(ValueError):
    pass


class UnknownKeyError(ConfigError):
    pass


class ConfigTypeError(ConfigError):
    pass


class ConstraintError(ConfigError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


POTENTIAL_KEYS = {
    "harmonic": {"k": 1.0, "offset": -1.0},
    "quartic": {"k": 1.0, "a4": 0.01, "offset": -1.0},
    "inverted_gaussian": {"depth": 1.0, "width": 1.0},
    "polynomial": {"coefficients": (0.0,)},
}

OPERATOR_KEYS = {
    "none": {},
    "identity": {},
    "gaussian_window": {"operator_gamma": 0.5, "operator_x1": 0.0},
    "polynomial": {"operator_coefficients": (1.0,)},
}


@dataclass
class PotentialSection:
    kind: str = "harmonic"
    params: dict = field(default_factory=lambda: dict(POTENTIAL_KEYS["harmonic"]))

    def build(self) -> PotentialModel:
        p = self.params
        if self.kind == "harmonic":
            return Harmonic(p["k"], p["offset"])
        if self.kind == "quartic":
            return QuarticPerturbed(p["k"], p["a4"], p["offset"])
        if self.kind == "inverted_gaussian":
            return InvertedGaussian(p["depth"], p["width"])
        return Polynomial(p["coefficients"])


@dataclass
class WavepacketSection:
    beta: float = 1.0
    x0: float = 1.0
    phase0: float = 0.0
    amplitude_convention: str = "normalized"


@dataclass
class HierarchySection:
    n_order: int = 4
    # "lambda" in the file
    lam: float = 0.0
    damp_top_orders: int = 2
    damp_c: bool = True
    damp_s: bool = True
    dt: float = 1e-3
    t_final: float = 20 * math.pi
    output_stride: int = 10


@dataclass
class SamplingSection:
    scheme: str = "uniform"
    n_points: int = 64
    density_cutoff: float = 1e-8


@dataclass
class CorrelationSection:
    form: str = "jacobian"
    operator: str = "none"
    operator_gamma: float = 0.5
    operator_x1: float = 0.0
    operator_coefficients: tuple = (1.0,)
    # launch grid of the plain ensemble used to rebuild psi(t) for operator correlations
    operator_plain_cutoff: float = 1e-20
    operator_plain_points: int = 128


@dataclass
class SpectrumSection:
    window: str = "hann"
    zero_pad_factor: int = 4
    omega_min: float = -1.0
    omega_max: float = 4.0
    n_omega: int = 1001
    rel_threshold: float = 0.01


@dataclass
class OracleSection:
    x_min: float = -10.0
    x_max: float = 10.0
    n_grid: int = 512
    dt: float = 1e-3
    eigen_x_min: float = -10.0
    eigen_x_max: float = 10.0
    eigen_n_grid: int = 512
    n_states: int = 6


@dataclass
class RunSection:
    workers: int = 1
    output_dir: str = "run"


@dataclass
class RunConfig:
    potential: PotentialSection = field(default_factory=PotentialSection)
    wavepacket: WavepacketSection = field(default_factory=WavepacketSection)
    hierarchy: HierarchySection = field(default_factory=HierarchySection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    correlation: CorrelationSection = field(default_factory=CorrelationSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    run: RunSection = field(default_factory=RunSection)

    # builders for the library objects

    def model(self) -> PotentialModel:
        return self.potential.build()

    def wavepacket_spec(self) -> WavepacketSpec:
        w = self.wavepacket
        return WavepacketSpec(w.beta, w.x0, w.phase0, w.amplitude_convention)

    def hierarchy_config(self) -> HierarchyConfig:
        h = self.hierarchy
        return HierarchyConfig(h.n_order, h.lam, h.dt, h.t_final, h.damp_top_orders, h.damp_c, h.damp_s)

    def window(self) -> WindowSpec:
        return WindowSpec(self.spectrum.window, self.spectrum.zero_pad_factor)

    def oracle_grid(self) -> GridSpec:
        o = self.oracle
        return GridSpec(o.x_min, o.x_max, o.n_grid)

    def eigen_grid(self) -> GridSpec:
        o = self.oracle
        return GridSpec(o.eigen_x_min, o.eigen_x_max, o.eigen_n_grid)

    def operator(self) -> OperatorSpec | None:
        c = self.correlation
        if c.operator == "none":
            return None
        if c.operator == "identity":
            return Identity()
        if c.operator == "gaussian_window":
            return GaussianWindow(c.operator_gamma, c.operator_x1)
        return PolynomialMultiplier(c.operator_coefficients)


SECTIONS = {
    "wavepacket": WavepacketSection,
    "hierarchy": HierarchySection,
    "sampling": SamplingSection,
    "correlation": CorrelationSection,
    "spectrum": SpectrumSection,
    "oracle": OracleSection,
    "run": RunSection,
}

FILE_KEY = {("hierarchy", "lam"): "lambda"}
ATTR_KEY = {(sec, key): attr for (sec, attr), key in FILE_KEY.items()}


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return _bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return _floats(raw)
        return raw.strip()
    except ValueError:
        raise ConfigTypeError(f"{section}.{key}: cannot read {raw!r} as {type(default).__name__}") from None


def _require(cond: bool, where: str, msg: str):
    if not cond:
        raise ConstraintError(f"{where}: {msg}")


def validate(cfg: RunConfig) -> RunConfig:
    """Re-check every numeric constraint; raises ConstraintError naming the key."""
    _require(cfg.potential.kind in POTENTIAL_KEYS, "potential.kind", f"unknown kind {cfg.potential.kind!r}")
    if cfg.potential.kind == "inverted_gaussian":
        _require(cfg.potential.params["width"] > 0, "potential.width", "must be > 0")
    w = cfg.wavepacket
    _require(w.beta > 0, "wavepacket.beta", "must be > 0")
    _require(w.amplitude_convention in AMPLITUDE_CONVENTIONS, "wavepacket.amplitude_convention",
             f"must be one of {AMPLITUDE_CONVENTIONS}")
    h = cfg.hierarchy
    _require(h.n_order >= 2, "hierarchy.n_order", "must be >= 2")
    _require(h.lam >= 0, "hierarchy.lambda", "must be >= 0")
    _require(0 <= h.damp_top_orders <= h.n_order, "hierarchy.damp_top_orders", "must lie in [0, n_order]")
    _require(h.dt > 0, "hierarchy.dt", "must be > 0")
    _require(h.t_final > 0, "hierarchy.t_final", "must be > 0")
    _require(h.dt <= h.t_final, "hierarchy.dt", "must not exceed t_final")
    _require(h.output_stride >= 1, "hierarchy.output_stride", "must be >= 1")
    s = cfg.sampling
    _require(s.scheme in ("uniform", "gauss-hermite"), "sampling.scheme", "must be uniform or gauss-hermite")
    _require(s.n_points >= 2, "sampling.n_points", "must be >= 2")
    _require(0 < s.density_cutoff < 1, "sampling.density_cutoff", "must lie in (0, 1)")
    c = cfg.correlation
    _require(c.form in ("jacobian", "paper_literal"), "correlation.form", "must be jacobian or paper_literal")
    _require(c.operator in OPERATOR_KEYS, "correlation.operator", f"must be one of {sorted(OPERATOR_KEYS)}")
    _require(0 < c.operator_plain_cutoff < 1, "correlation.operator_plain_cutoff", "must lie in (0, 1)")
    _require(c.operator_plain_points >= 2, "correlation.operator_plain_points", "must be >= 2")
    sp = cfg.spectrum
    _require(sp.window in WINDOWS, "spectrum.window", f"must be one of {WINDOWS}")
    _require(sp.zero_pad_factor >= 1, "spectrum.zero_pad_factor", "must be >= 1")
    _require(sp.omega_min < sp.omega_max, "spectrum.omega_min", "must be below omega_max")
    _require(sp.n_omega >= 3, "spectrum.n_omega", "must be >= 3")
    _require(0 < sp.rel_threshold < 1, "spectrum.rel_threshold", "must lie in (0, 1)")
    o = cfg.oracle
    for prefix in ("", "eigen_"):
        lo, hi, n = (getattr(o, prefix + "x_min"), getattr(o, prefix + "x_max"), getattr(o, prefix + "n_grid"))
        _require(lo < hi, f"oracle.{prefix}x_min", "must be below x_max")
        _require(n >= 64 and n & (n - 1) == 0, f"oracle.{prefix}n_grid", "must be a power of two >= 64")
    _require(0 < o.dt <= 0.01, "oracle.dt", "must lie in (0, 0.01]")
    _require(1 <= o.n_states <= o.eigen_n_grid, "oracle.n_states", "must lie in [1, eigen_n_grid]")
    _require(cfg.run.workers >= 1, "run.workers", "must be >= 1")
    return cfg


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    cfg = RunConfig()
    for name in parser.sections():
        if name != "potential" and name not in SECTIONS:
            raise UnknownKeyError(f"{name}: unknown section")

    if parser.has_section("potential"):
        items = dict(parser.items("potential"))
        kind = items.pop("kind", "harmonic").strip()
        if kind not in POTENTIAL_KEYS:
            raise ConstraintError(f"potential.kind: unknown kind {kind!r}")
        params = dict(POTENTIAL_KEYS[kind])
        for key, raw in items.items():
            if key not in params:
                raise UnknownKeyError(f"potential.{key}: not a parameter of {kind}")
            params[key] = _convert("potential", key, raw, params[key])
        cfg.potential = PotentialSection(kind, params)

    for name, cls in SECTIONS.items():
        if not parser.has_section(name):
            continue
        section = getattr(cfg, name)
        valid = {f.name for f in fields(cls)}
        updates = {}
        for key, raw in parser.items(name):
            attr = ATTR_KEY.get((name, key), key)
            if attr not in valid or ((name, attr) in FILE_KEY and key == attr):
                raise UnknownKeyError(f"{name}.{key}: unknown key")
            updates[attr] = _convert(name, key, raw, getattr(section, attr))
        setattr(cfg, name, replace(section, **updates))
    return validate(cfg)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Full configuration text; parse_config(dump_config(c)) == c."""
    lines = ["[potential]", f"kind = {cfg.potential.kind}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in cfg.potential.params.items()]
    for name in SECTIONS:
        lines += ["", f"[{name}]"]
        section = getattr(cfg, name)
        for f in fields(section):
            lines.append(f"{FILE_KEY.get((name, f.name), f.name)} = {_fmt(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


PRESETS = ("harmonic", "quartic", "gaussian_well")


def preset_config(name: str) -> RunConfig:
    cfg = RunConfig()
    if name == "harmonic":
        cfg.potential = PotentialSection("harmonic", {"k": 1.0, "offset": -1.0})
        cfg.hierarchy.n_order = 2
    elif name == "quartic":
        cfg.potential = PotentialSection("quartic", {"k": 1.0, "a4": 0.01, "offset": -1.0})
    elif name == "gaussian_well":
        cfg.potential = PotentialSection("inverted_gaussian", {"depth": 1.0, "width": 1.0})
        cfg.sampling.n_points = 30
        # lowest long-time deviation from the grid reference among orders 2..6
        cfg.hierarchy.n_order = 2
        # the unbound part of the packet runs far out; the box must hold it until t_final
        cfg.oracle.x_min, cfg.oracle.x_max, cfg.oracle.n_grid, cfg.oracle.dt = -300.0, 300.0, 8192, 5e-3
        cfg.spectrum.omega_min, cfg.spectrum.omega_max = -1.0, 1.0
    else:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    cfg.run.output_dir = f"runs/{name}"
    return validate(cfg)


def emit_preset(name: str) -> str:
    return dump_config(preset_config(name))
