"""TOML run configuration.

Every section and key is optional; unknown ones are rejected.  Example::

    [mesh]
    kind = "disk"          # "disk", "square", "rectangle" or "file"
    radius = 1.0
    n_boundary = 32
    refinement = 1

    [model]
    beta = 1.0
    L = 1.0
    tau = 1e-3
    t_end = 1.0
    potential = "double_well"

    [initial]
    kind = "random"        # "constant", "random" or "file"
    mean = 0.0
    amplitude = 0.3
    seed = 0

All numeric checks happen in :func:`parse_config`, so a run that gets past
parsing does not fail on its inputs.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .assembly import FemOperators, weighted_mass
from .elliptic import mean_constant
from .io import CheckpointError, read_checkpoint
from .mesh import BulkSurfaceMesh, MeshError, generate_disk, generate_rectangle, generate_square, load_mesh
from .potentials import PotentialPair, potential_from_config

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "initial_field"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshConfig:
    kind: str = "disk"
    radius: float = 1.0
    n_boundary: int = 32
    refinement: int = 1
    side: float = 1.0
    n_per_side: int = 8
    width: float = 2.0
    height: float = 1.0
    nx: int = 16
    ny: int = 8
    path: str | None = None


@dataclass(frozen=True)
class ModelConfig:
    beta: float = 1.0
    L: float = 1.0
    tau: float = 1e-3
    t_end: float = 1.0
    potential: object = "double_well"
    surface_potential: object = None  # defaults to ``potential``


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "random"
    value: float = 0.0
    mean: float = 0.0
    amplitude: float = 0.3
    seed: int = 0
    path: str | None = None


@dataclass(frozen=True)
class OutputConfig:
    checkpoint_every: int = 100
    sample_every: int = 1  # rows written to trajectory.csv


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    reuse_rate: float = 0.25
    stationary_tol: float = 1e-10


@dataclass(frozen=True)
class StudyConfig:
    L_grid: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    T_star: float = 1.0
    sample_every: int = 10


@dataclass(frozen=True)
class OmegaConfig:
    stop_threshold: float = 1e-9
    t_max: float = 200.0


@dataclass(frozen=True)
class StationaryConfig:
    starts: int = 8
    perturbation: float = 0.1


@dataclass(frozen=True)
class IneqConfig:
    samples: int = 100
    L_grid: tuple = (0.0, 1e-2, 1.0)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    omega: OmegaConfig = field(default_factory=OmegaConfig)
    stationary: StationaryConfig = field(default_factory=StationaryConfig)
    ineq: IneqConfig = field(default_factory=IneqConfig)
    base_dir: str = "."

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        """sha256 of the resolved configuration (key order independent)."""
        text = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        from dataclasses import replace
        return replace(self, initial=replace(self.initial, seed=int(seed)))

    # -- builders --------------------------------------------------------

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def build_mesh(self) -> BulkSurfaceMesh:
        m = self.mesh
        try:
            if m.kind == "disk":
                return generate_disk(m.radius, m.n_boundary, m.refinement)
            if m.kind == "square":
                return generate_square(m.side, m.n_per_side)
            if m.kind == "rectangle":
                return generate_rectangle(m.width, m.height, m.nx, m.ny)
            return load_mesh(self._resolve(m.path))
        except (OSError, MeshError) as exc:
            raise ConfigError("mesh: %s" % exc) from exc

    def potentials(self) -> PotentialPair:
        bulk = potential_from_config(self.model.potential)
        surf = bulk if self.model.surface_potential is None else potential_from_config(self.model.surface_potential)
        return PotentialPair(bulk, surf)


_SECTIONS = {
    "mesh": MeshConfig,
    "model": ModelConfig,
    "initial": InitialConfig,
    "output": OutputConfig,
    "solver": SolverConfig,
    "study": StudyConfig,
    "omega": OmegaConfig,
    "stationary": StationaryConfig,
    "ineq": IneqConfig,
}


def _number(section, key, value, *, integer=False, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("%s.%s must be a number" % (section, key))
    if integer and not isinstance(value, int):
        raise ConfigError("%s.%s must be an integer" % (section, key))
    if not math.isfinite(value):
        raise ConfigError("%s.%s must be finite" % (section, key))
    if positive and not value > 0:
        raise ConfigError("%s.%s must be positive" % (section, key))
    if nonneg and not value >= 0:
        raise ConfigError("%s.%s must be non-negative" % (section, key))
    return value


def _check_grid(section, key, value, allow_zero):
    if not isinstance(value, list) or not value:
        raise ConfigError("%s.%s must be a non-empty list" % (section, key))
    out = []
    for x in value:
        _number(section, key, x, nonneg=allow_zero, positive=not allow_zero)
        out.append(float(x))
    if len(set(out)) != len(out):
        raise ConfigError("%s.%s has repeated values" % (section, key))
    return tuple(out)


# (section, key) -> validator returning the stored value
_POS_FLOAT = dict(positive=True)
_POS_INT = dict(positive=True, integer=True)
_RULES = {
    ("mesh", "radius"): _POS_FLOAT,
    ("mesh", "side"): _POS_FLOAT,
    ("mesh", "n_boundary"): _POS_INT,
    ("mesh", "refinement"): dict(integer=True, nonneg=True),
    ("mesh", "n_per_side"): _POS_INT,
    ("mesh", "width"): _POS_FLOAT,
    ("mesh", "height"): _POS_FLOAT,
    ("mesh", "nx"): _POS_INT,
    ("mesh", "ny"): _POS_INT,
    ("model", "beta"): _POS_FLOAT,
    ("model", "L"): dict(nonneg=True),
    ("model", "tau"): _POS_FLOAT,
    ("model", "t_end"): _POS_FLOAT,
    ("initial", "value"): {},
    ("initial", "mean"): {},
    ("initial", "amplitude"): dict(nonneg=True),
    ("initial", "seed"): dict(integer=True, nonneg=True),
    ("output", "checkpoint_every"): _POS_INT,
    ("output", "sample_every"): _POS_INT,
    ("solver", "newton_tol"): _POS_FLOAT,
    ("solver", "newton_max_iter"): _POS_INT,
    ("solver", "reuse_rate"): _POS_FLOAT,
    ("solver", "stationary_tol"): _POS_FLOAT,
    ("study", "T_star"): _POS_FLOAT,
    ("study", "sample_every"): _POS_INT,
    ("omega", "stop_threshold"): _POS_FLOAT,
    ("omega", "t_max"): _POS_FLOAT,
    ("stationary", "starts"): _POS_INT,
    ("stationary", "perturbation"): dict(nonneg=True),
    ("ineq", "samples"): _POS_INT,
}

_CHOICES = {("mesh", "kind"): ("disk", "square", "rectangle", "file"), ("initial", "kind"): ("constant", "random", "file")}


def parse_config(data: dict, base_dir: str | Path = ".") -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    from dataclasses import fields

    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError("unknown section(s): %s" % ", ".join(sorted(unknown)))
    built = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError("[%s] must be a table" % name)
        allowed = {f.name for f in fields(cls)}
        bad = set(raw) - allowed
        if bad:
            raise ConfigError("unknown key(s) in [%s]: %s" % (name, ", ".join(sorted(bad))))
        vals = {}
        for key, value in raw.items():
            if (name, key) in _RULES:
                value = _number(name, key, value, **_RULES[(name, key)])
            elif (name, key) in _CHOICES:
                if value not in _CHOICES[(name, key)]:
                    raise ConfigError("%s.%s must be one of %s" % (name, key, ", ".join(_CHOICES[(name, key)])))
            elif key == "L_grid":
                value = _check_grid(name, key, value, allow_zero=(name == "ineq"))
            elif key == "path":
                if not isinstance(value, str):
                    raise ConfigError("%s.path must be a string" % name)
            vals[key] = value
        built[name] = cls(**vals)

    model = built["model"]
    for key in ("potential", "surface_potential"):
        value = getattr(model, key)
        if value is None:
            continue
        try:
            spec = potential_from_config(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError("model.%s: %s" % (key, exc)) from exc
        problems = spec.check()
        if problems:
            raise ConfigError("model.%s violates the potential assumptions: %s" % (key, "; ".join(problems)))
    if model.tau > model.t_end:
        raise ConfigError("model.tau exceeds model.t_end")
    if built["mesh"].kind == "file" and not built["mesh"].path:
        raise ConfigError("mesh.path is required for kind = \"file\"")
    if built["initial"].kind == "file" and not built["initial"].path:
        raise ConfigError("initial.path is required for kind = \"file\"")
    if built["solver"].reuse_rate >= 1:
        raise ConfigError("solver.reuse_rate must be below 1")
    if built["mesh"].kind == "disk" and built["mesh"].n_boundary < 8:
        raise ConfigError("mesh.n_boundary must be at least 8")
    if built["mesh"].kind == "square" and built["mesh"].n_per_side < 2:
        raise ConfigError("mesh.n_per_side must be at least 2")
    if built["mesh"].kind == "rectangle" and min(built["mesh"].nx, built["mesh"].ny) < 2:
        raise ConfigError("mesh.nx and mesh.ny must be at least 2")
    return RunConfig(**built, base_dir=str(base_dir))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc.strerror or exc)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("invalid TOML in %s: %s" % (path, exc)) from exc
    return parse_config(data, base_dir=path.parent)


def initial_field(cfg: RunConfig, ops: FemOperators, mesh_digest: str | None = None) -> np.ndarray:
    """Nodal initial datum.

    ``random`` draws i.i.d. uniform noise of half-width ``amplitude`` around
    ``mean`` and then shifts it so the weighted mass is exactly
    ``mean · (β|Ω| + |Γ|)``.
    """
    init, beta = cfg.initial, cfg.model.beta
    n = ops.n_nodes
    if init.kind == "constant":
        return np.full(n, float(init.value))
    if init.kind == "random":
        rng = np.random.default_rng(init.seed)
        u = init.mean + rng.uniform(-init.amplitude, init.amplitude, n)
        target = init.mean * mean_constant(ops, beta)
        return u + (target - weighted_mass(ops, u, beta)) / mean_constant(ops, beta)
    try:
        ck = read_checkpoint(cfg._resolve(init.path), mesh_digest)
    except (OSError, CheckpointError) as exc:
        raise ConfigError("initial: %s" % exc) from exc
    if len(ck.values) != n:
        raise ConfigError("initial: checkpoint has %d values, mesh has %d nodes" % (len(ck.values), n))
    return ck.values
