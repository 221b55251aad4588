"""Run configuration: JSON files with a versioned schema.

Unknown keys are rejected so typos fail fast; parse -> serialize -> parse
is the identity."""

import json
from dataclasses import asdict, dataclass, field, fields

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


@dataclass
class GasConfig:
    gamma: float = 1.4
    Pr: float = 0.72
    mu: float = None        # None -> derived from body.Re for cylinder runs
    c_V: float = 717.5


@dataclass
class DiscretizationConfig:
    p: int = 3
    p_f: int = None         # None -> 3p
    theta: float = 0.0      # -1, 0 or 1
    C_1: float = 0.01

    def __post_init__(self):
        if self.theta not in (-1.0, 0.0, 1.0, -1, 0, 1):
            raise ConfigError("theta must be one of -1, 0, 1")
        if self.p < 1:
            raise ConfigError("p must be >= 1")


@dataclass
class TimeConfig:
    C_CFL: float = 0.8
    dt: float = None        # explicit override of the CFL estimator
    dt_max: float = 1.0
    n_steps: int = 100
    checkpoint_interval: int = 0
    transient_skip: float = 60.0    # seconds excluded from statistics
    freeze_sigma: bool = False


@dataclass
class FreestreamConfig:
    Ma: float = 0.1
    rho: float = 1.4
    p: float = 1.0
    angle: float = 0.0      # inflow angle in degrees


@dataclass
class ManufacturedConfig:
    kappa: float = 4.0
    C2: float = 3.0
    orders: list = field(default_factory=lambda: [1, 2, 3])
    refinements: list = field(default_factory=lambda: [4, 8, 16])
    mesh_family: str = "m1"     # m1 ordered, m2 with a flattened layer
    max_iters: int = 20000
    stall_tol: float = 1e-8


@dataclass
class BodyConfig:
    D: float = 1.0
    Re: float = 200.0


@dataclass
class VivConfig:
    U_star: float = 5.0
    m_star: float = 1.0
    xi: float = 0.01
    motion_enabled: bool = True


@dataclass
class IOConfig:
    mesh: str = None        # MSH path; None -> bundled cylinder O-grid
    output_dir: str = "out"
    vtk_every: int = 0      # snapshot stride in steps; 0 disables


@dataclass
class SolverConfig:
    schema_version: int = SCHEMA_VERSION
    gas: GasConfig = field(default_factory=GasConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    freestream: FreestreamConfig = field(default_factory=FreestreamConfig)
    manufactured: ManufacturedConfig = field(default_factory=ManufacturedConfig)
    body: BodyConfig = field(default_factory=BodyConfig)
    viv: VivConfig = field(default_factory=VivConfig)
    io: IOConfig = field(default_factory=IOConfig)

    _SECTIONS = {
        "gas": GasConfig,
        "discretization": DiscretizationConfig,
        "time": TimeConfig,
        "freestream": FreestreamConfig,
        "manufactured": ManufacturedConfig,
        "body": BodyConfig,
        "viv": VivConfig,
        "io": IOConfig,
    }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("top level: expected an object")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        unknown = set(data) - set(cls._SECTIONS) - {"schema_version"}
        if unknown:
            raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
        sections = {name: _build(sub, data.get(name, {}), name)
                    for name, sub in cls._SECTIONS.items()}
        return cls(schema_version=version, **sections)

    def to_dict(self):
        return asdict(self)


def load_config(path):
    with open(path) as fh:
        return SolverConfig.from_dict(json.load(fh))


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
