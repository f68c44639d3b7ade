"""Run configuration: INI sections with defaults, command-line overrides and echo."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

MODES = ("scft", "scft-adaptive", "continue", "heat-order", "contour-order", "contour-integral")


class ConfigError(ValueError):
    pass


@dataclass
class SurfaceConfig:
    name: str = "sphere"
    radius: float = 3.56
    a: float = 1.0
    rect: tuple = (-1.0, 1.0, -1.0, 1.0)
    expression: str = ""
    closed: bool = True


@dataclass
class MeshConfig:
    level: int = 4
    p: int = 2
    resolution: int = 16


@dataclass
class ScftConfig:
    chi_n: float = 25.0
    f: float = 0.2
    lambda_plus: float = 2.0
    lambda_minus: float = 2.0
    tol_H: float = 1e-6
    tol_residual: float = 1e-8
    max_iter: int = 500
    init: str = "spots"
    amplitude: float = 1.0
    seed: int = 0
    chi_n_list: tuple = (25.0, 30.0, 35.0)


@dataclass
class ContourConfig:
    n_t: int = 200
    J: int = 1


@dataclass
class AdaptConfig:
    theta: float = 1.0
    clamp: int = 2
    h_floor: float = 0.0
    e_ref_trigger: float = 0.1
    steps_per_cycle: int = 500
    min_steps: int = 20
    max_cycles: int = 12


@dataclass
class OutputConfig:
    dir: str = "out"
    cadence: int = 0
    threads: int = 1


@dataclass
class RunConfig:
    mode: str = "scft"
    surface: SurfaceConfig = field(default_factory=SurfaceConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    scft: ScftConfig = field(default_factory=ScftConfig)
    contour: ContourConfig = field(default_factory=ContourConfig)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    SECTIONS = ("surface", "mesh", "scft", "contour", "adapt", "output")

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.mesh.p not in (1, 2, 3):
            raise ConfigError(f"p must be 1, 2 or 3, got {self.mesh.p}")
        if self.mesh.level < 0:
            raise ConfigError("mesh level must be nonnegative")
        if not self.scft.chi_n > 0:
            raise ConfigError("chi_n must be positive")
        if not 0.0 < self.scft.f < 1.0:
            raise ConfigError("f must lie in (0, 1)")
        if self.contour.n_t < 2 or self.contour.J < 0:
            raise ConfigError("need n_t >= 2 and J >= 0")
        if self.adapt.theta <= 0 or self.adapt.clamp < 0:
            raise ConfigError("theta must be positive and clamp nonnegative")
        if self.surface.name == "expression" and not self.surface.expression:
            raise ConfigError("surface 'expression' needs an expression")
        if self.scft.init not in ("spots", "stripes", "random", "zero"):
            raise ConfigError(f"unknown init {self.scft.init!r}")
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["run"] = {"mode": self.mode}
        for sec in self.SECTIONS:
            obj = getattr(self, sec)
            cp[sec] = {k: _dump(v) for k, v in asdict(obj).items()}
        from io import StringIO

        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_ini())
        return path


def _dump(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(_dump(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(value: str, like):
    try:
        if isinstance(like, bool):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, tuple):
            return tuple(float(x) for x in value.replace(",", " ").split())
        return value.strip()
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r}: {exc}") from exc


def _apply(obj, items: dict, section: str) -> None:
    known = {f.name: f for f in fields(obj)}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        setattr(obj, key, _parse(str(raw), getattr(obj, key)))


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read an INI file (optional) and apply ``{"section.key": value}`` overrides."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for sec in cp.sections():
            if sec == "run":
                for k, v in cp[sec].items():
                    if k != "mode":
                        raise ConfigError(f"unknown key {k!r} in section [run]")
                    cfg.mode = v.strip()
            elif sec in RunConfig.SECTIONS:
                _apply(getattr(cfg, sec), dict(cp[sec]), sec)
            else:
                raise ConfigError(f"unknown section [{sec}]")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if dotted == "mode":
            cfg.mode = value
            continue
        sec, key = dotted.split(".", 1)
        _apply(getattr(cfg, sec), {key: value}, sec)
    return cfg.validate()
