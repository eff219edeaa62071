"""Run configuration: ``key = value`` files with ``#`` comments."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

__all__ = ["ConfigError", "RunConfig", "load_config", "dump_config", "parse_value"]

PROBLEMS = ("square", "lshape", "polygon-file")
ESTIMATORS = ("residual", "fosls")
POTENTIAL_REGIONS = ("all", "left-half")


class ConfigError(ValueError):
    pass


def _complex_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(complex(tok.strip().replace(" ", "")) for tok in text.split(","))


@dataclass
class RunConfig:
    problem: str = "square"
    mesh_file: str = ""
    n: int = 4
    degree: int = 2
    estimator: str = "residual"
    center: complex = 5 * math.pi**2
    radius: float = 5.0
    nquad: int = 4
    phase_sign: int = 1
    cluster_dim_hint: int = 2
    theta: float = 0.9
    max_rounds: int = 6
    tol_feast: float = 1e-10
    maxit: int = 50
    seed: int = 0
    output_prefix: str = "clustergap"
    max_dofs: int = 200_000
    potential: complex = 0j
    potential_region: str = "all"
    reference: tuple = field(default_factory=tuple)

    def validate(self) -> "RunConfig":
        self.center = complex(self.center)
        self.potential = complex(self.potential)
        self.reference = tuple(complex(v) for v in self.reference)
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.problem == "polygon-file" and not self.mesh_file:
            raise ConfigError("problem = polygon-file needs mesh_file")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.degree not in (1, 2, 3):
            raise ConfigError("degree must be 1, 2 or 3")
        if self.estimator == "fosls" and self.degree != 1:
            raise ConfigError("the fosls estimator works with degree 1 only")
        if self.estimator == "fosls" and self.potential != 0:
            raise ConfigError("the fosls estimator does not support a potential")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        if self.nquad < 2:
            raise ConfigError("nquad must be at least 2")
        if self.radius <= 0:
            raise ConfigError("radius must be positive")
        if self.phase_sign not in (1, -1):
            raise ConfigError("phase_sign must be 1 or -1")
        if self.potential_region not in POTENTIAL_REGIONS:
            raise ConfigError(f"potential_region must be one of {POTENTIAL_REGIONS}")
        if self.n < 1 or self.cluster_dim_hint < 1 or self.max_rounds < 1 or self.maxit < 1:
            raise ConfigError("n, cluster_dim_hint, max_rounds and maxit must be positive")
        if self.problem == "lshape" and self.n % 2:
            raise ConfigError("the L-shape needs an even n")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    """Convert the text of ``key`` to its field type."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown key {key!r}")
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "complex":
            return complex(text.replace(" ", ""))
        if kind == "tuple":
            return _complex_list(text)
        return text
    except ValueError:
        raise ConfigError(f"malformed value {text!r} for {key}") from None


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a config file; entries of ``overrides`` (not ``None``) win."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, text = (s.strip() for s in line.split("=", 1))
            try:
                values[key] = parse_value(key, text)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _format(val) -> str:
    if isinstance(val, complex):
        return repr(val).strip("()")
    if isinstance(val, tuple):
        return ", ".join(_format(complex(v)) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in dataclasses.asdict(cfg).items())
