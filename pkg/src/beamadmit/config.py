"""Configuration types, validation, and the INI config-file loader."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

import numpy as np


class ConfigurationError(ValueError):
    """Bad or inconsistent configuration input (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A solver broke down numerically (CLI exit code 3)."""


def parse_level(text):
    """Parse a scalar that may carry an explicit dB suffix.

    Internally everything is linear; '3 dB' becomes 10**0.3.
    """
    s = str(text).strip().lower()
    if s.endswith("db"):
        return 10.0 ** (float(s[:-2].strip()) / 10.0)
    return float(s)


@dataclass(frozen=True)
class CellGeometry:
    """Hexagonal single-cell scenario geometry (distances in meters)."""

    corner_distance_m: float = 1000.0   # center-to-corner = side length
    reference_distance_m: float = 200.0
    pathloss_exponent: float = 3.7
    shadow_std_db: float = 8.0          # 10*log10(shadow factor) ~ N(0, std^2)
    min_user_distance_m: float = 50.0   # path loss diverges at distance 0

    def __post_init__(self):
        if self.corner_distance_m <= 0 or self.reference_distance_m <= 0:
            raise ConfigurationError("cell distances must be positive")
        if self.min_user_distance_m < 0:
            raise ConfigurationError("min_user_distance_m must be >= 0")
        if self.shadow_std_db < 0:
            raise ConfigurationError("shadow_std_db must be >= 0")


@dataclass(frozen=True)
class ProblemConfig:
    """All scalar problem parameters and solver tolerances.

    Power- and SINR-like quantities are linear (not dB).
    """

    num_users: int = 6            # M
    num_antennas: int = 4         # N
    num_slices: int = 10          # T
    power_budget: float = 100.0   # P, per-slice transmit power cap
    noise_power: float = 1.0      # sigma^2
    qos_target: float = 1.0       # gamma, linear SINR target
    reject_weight: float = 20.0   # lambda1, cost of rejecting one user-slice
    switch_weight: float = 20.0   # lambda2, cost of one status switch
    kappa: float = 100.0          # indicator smoothing sharpness
    admm_penalty: float = 1.0     # rho
    sum_tol: float = 1e-5         # relative objective change, outer loop
    admm_tol: float = 1e-5        # normalized max(primal, dual) residual
    bisect_tol: float = 1e-10     # absolute tolerance of scalar bisections
    max_sum_iterations: int = 30
    max_admm_iterations: int = 5000
    residual_balancing: bool = True
    count_initial_switch: bool = False   # charge the t=0 -> 1 switch in costs
    terminal_uses_future: bool = False   # sample future CSI at the last slice
    initial_status: tuple = ()           # () -> every user starts inadmissible

    def __post_init__(self):
        if min(self.num_users, self.num_antennas, self.num_slices) < 1:
            raise ConfigurationError("num_users, num_antennas, num_slices must be >= 1")
        for name in ("power_budget", "noise_power", "qos_target", "admm_penalty"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.reject_weight < 0 or self.switch_weight < 0:
            raise ConfigurationError("reject_weight and switch_weight must be >= 0")
        if self.kappa < 1:
            raise ConfigurationError("kappa must be >= 1")
        if not (0 < self.bisect_tol < self.admm_tol < 1):
            raise ConfigurationError("need 0 < bisect_tol < admm_tol < 1")
        if self.initial_status and len(self.initial_status) != self.num_users:
            raise ConfigurationError("initial_status length must equal num_users")

    def initial_status_vector(self):
        """Binary (M,) vector of initial admissible statuses (1 = admissible)."""
        if self.initial_status:
            return np.asarray(self.initial_status, dtype=int)
        return np.zeros(self.num_users, dtype=int)


def desk_profile(**overrides):
    """Small default profile sized for CI runtime."""
    return replace(ProblemConfig(num_users=6, num_antennas=4, num_slices=10), **overrides)


def paper_profile(**overrides):
    """Demo profile: M=10, N=5, T=20, P=100, sigma^2=1, gamma=1, lambda1=lambda2=20."""
    return replace(ProblemConfig(num_users=10, num_antennas=5, num_slices=20), **overrides)


# Sweepable parameter name -> ProblemConfig field (J is handled separately).
SWEEP_PARAMS = {
    "gamma": "qos_target",
    "lambda1": "reject_weight",
    "lambda2": "switch_weight",
    "M": "num_users",
    "J": None,
}

ALGORITHMS = ("no_control", "offline", "online", "channel_strength")


@dataclass(frozen=True)
class SweepSpec:
    """One Monte Carlo sweep: a parameter, its values, and the algorithm set."""

    parameter: str
    values: tuple
    trials: int = 30
    master_seed: int = 0
    algorithms: tuple = (("no_control", 0), ("offline", 0), ("online", 9))
    samples: int = 9   # J used by bare "online" entries

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ConfigurationError(
                f"unknown sweep parameter {self.parameter!r}; expected one of {sorted(SWEEP_PARAMS)}")
        if not self.values:
            raise ConfigurationError("sweep values must be nonempty")
        if self.trials < 1:
            raise ConfigurationError("sweep trials must be >= 1")
        for algo, _ in self.algorithms:
            if algo not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {algo!r}")


def parse_algorithm_token(token, default_samples=9):
    """'online_j3' -> ('online', 3); 'offline' -> ('offline', 0)."""
    tok = token.strip().lower()
    if tok.startswith("online"):
        rest = tok[len("online"):].lstrip("_")
        if rest.startswith("j"):
            rest = rest[1:]
        j = int(rest) if rest else default_samples
        if j < 0:
            raise ConfigurationError(f"negative sample count in {token!r}")
        return ("online", j)
    if tok not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {token!r}")
    return (tok, 0)


@dataclass(frozen=True)
class RunSettings:
    """Everything a CLI invocation needs: problem, geometry, optional sweep."""

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    geometry: CellGeometry = field(default_factory=CellGeometry)
    sweep: SweepSpec | None = None


_BOOL = {"true": True, "1": True, "yes": True, "on": True,
         "false": False, "0": False, "no": False, "off": False}

# (config key, constructor kwarg, converter) for each block
_PROBLEM_KEYS = {
    "num_users": int, "num_antennas": int, "num_slices": int,
    "power_budget": parse_level, "noise_power": parse_level, "qos_target": parse_level,
    "reject_weight": float, "switch_weight": float, "kappa": float,
    "admm_penalty": float, "sum_tol": float, "admm_tol": float, "bisect_tol": float,
    "max_sum_iterations": int, "max_admm_iterations": int,
    "residual_balancing": None, "count_initial_switch": None, "terminal_uses_future": None,
    "initial_status": None,
}
_SCENARIO_KEYS = {
    "corner_distance_m": float, "reference_distance_m": float,
    "pathloss_exponent": float, "shadow_std_db": float, "min_user_distance_m": float,
}


def _parse_bool(key, raw):
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"config key {key}: expected a boolean, got {raw!r}") from None


def _load_block(parser, section, keys):
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key not in keys:
            raise ConfigurationError(f"unknown config key: {section}.{key}")
        conv = keys[key]
        try:
            if conv is None:
                if key == "initial_status":
                    out[key] = tuple(int(tok) for tok in raw.replace(",", " ").split())
                else:
                    out[key] = _parse_bool(f"{section}.{key}", raw)
            else:
                out[key] = conv(raw)
        except ConfigurationError:
            raise
        except ValueError as exc:
            raise ConfigurationError(f"config key {section}.{key}: {exc}") from None
    return out


def load_config(path):
    """Load a RunSettings from an INI-style config file.

    Sections: [problem], [scenario], [solver] (merged into problem), [sweep].
    Unknown keys are rejected; missing required sweep keys are named in the error.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file: {path}")

    problem_kwargs = _load_block(parser, "problem", _PROBLEM_KEYS)
    problem_kwargs.update(_load_block(parser, "solver", _PROBLEM_KEYS))
    scenario_kwargs = _load_block(parser, "scenario", _SCENARIO_KEYS)
    problem = ProblemConfig(**problem_kwargs)
    geometry = CellGeometry(**scenario_kwargs)

    sweep = None
    if parser.has_section("sweep"):
        sw = dict(parser.items("sweep"))
        known = {"parameter", "values", "trials", "master_seed", "algorithms", "samples"}
        for key in sw:
            if key not in known:
                raise ConfigurationError(f"unknown config key: sweep.{key}")
        for required in ("parameter", "values"):
            if required not in sw:
                raise ConfigurationError(f"missing config key: sweep.{required}")
        samples = int(sw.get("samples", 9))
        param = sw["parameter"].strip()
        if param not in SWEEP_PARAMS:
            raise ConfigurationError(
                f"config key sweep.parameter: unknown parameter {param!r}")
        conv = int if param in ("M", "J") else parse_level
        try:
            values = tuple(conv(tok) for tok in sw["values"].replace(",", " ").split())
        except ValueError as exc:
            raise ConfigurationError(f"config key sweep.values: {exc}") from None
        algos = tuple(
            parse_algorithm_token(tok, samples)
            for tok in sw.get("algorithms", "no_control, offline, online").split(",")
            if tok.strip())
        sweep = SweepSpec(parameter=param, values=values,
                          trials=int(sw.get("trials", 30)),
                          master_seed=int(sw.get("master_seed", 0)),
                          algorithms=algos, samples=samples)

    return RunSettings(problem=problem, geometry=geometry, sweep=sweep)
