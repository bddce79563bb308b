"""Run configuration: a flat ``key = value`` text format shared by all CLI
commands and the simulation harness.

Unknown keys are rejected. Defaults (shown by ``rtfm --help-config``):

========== =============== ====================================================
key        default         meaning
========== =============== ====================================================
scenario   t3              t1|t2|t3 (tensor presets), v1..v5 (vector), tensor,
                           vector (custom sizes via dims / p)
dims       per scenario    comma-separated tensor dimensions
p          100             panel width for vector scenarios
n          500             number of time points
ranks      3,3,3 / 3       per-mode factor numbers, or "auto"
r_max      formula         per-mode rank caps for "auto" (min(p/2, p-1, 20))
tau        cv              truncation level: cv | inf | theory | positive float
kappa      tau             aggregation truncation: tau | inf | positive float
iters      2               refinement sweeps
cv_grid    50              CV grid size
cv_folds   3               CV fold count
seed       0               master seed
replications 1             Monte Carlo replications (simulate/diagnose)
outlier_target none        none | idiosyncratic | factor
outlier_prop 0.0           fraction of contaminated cells, in [0, 1)
factor_dist gaussian       gaussian | t3
idio_dist  gaussian        gaussian | t3
phi        0.3             factor AR coefficient (tensor scenarios)
psi        0.3             idiosyncratic AR coefficient (tensor scenarios)
dependence independent     independent | dependent (vector scenarios)
tau_omega  1.0             scale for tau = theory
tau_epsilon 0.5            moment parameter for tau = theory, in (0, 1)
tau_regime independent     independent | random_field for tau = theory
eval_ranks off             also run rank selection in simulate campaigns
window     120             rolling-window length (forecast)
horizons   24              forecast horizons 1..h
standardize mean_sd        mean_sd | median_mad | none (forecast)
cv_per_window off          re-tune tau inside every window (forecast)
threads    1               replication-level parallelism
out        .               output directory
========== =============== ====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .exceptions import ConfigError
from .simulate import TENSOR_PRESETS, VECTOR_SCENARIOS


@dataclass
class RunConfig:
    scenario: str = "t3"
    dims: tuple[int, ...] | None = None
    p: int = 100
    n: int = 500
    ranks: tuple[int, ...] | str = ()
    r_max: tuple[int, ...] | None = None
    tau: float | str = "cv"
    kappa: float | str = "tau"
    iters: int = 2
    cv_grid: int = 50
    cv_folds: int = 3
    seed: int = 0
    replications: int = 1
    outlier_target: str = "none"
    outlier_prop: float = 0.0
    factor_dist: str = "gaussian"
    idio_dist: str = "gaussian"
    phi: float = 0.3
    psi: float = 0.3
    dependence: str = "independent"
    tau_omega: float = 1.0
    tau_epsilon: float = 0.5
    tau_regime: str = "independent"
    eval_ranks: bool = False
    window: int = 120
    horizons: int = 24
    standardize: str = "mean_sd"
    cv_per_window: bool = False
    threads: int = 1
    out: str = "."

    def __post_init__(self):
        self.scenario = str(self.scenario).lower()
        if self.scenario in TENSOR_PRESETS:
            if self.dims is None:
                self.dims = TENSOR_PRESETS[self.scenario]
        elif self.scenario in VECTOR_SCENARIOS or self.scenario == "vector":
            self.dims = None
        elif self.scenario == "tensor":
            if self.dims is None:
                raise ConfigError("scenario=tensor requires dims")
        else:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.is_vector and self.scenario == "vector":
            self.scenario = "v1"
        if self.ranks == ():
            self.ranks = (3,) * len(self.dims) if self.dims else (3,)
        _positive_int("n", self.n)
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.outlier_target not in ("none", "idiosyncratic", "factor"):
            raise ConfigError(f"bad outlier_target {self.outlier_target!r}")
        if not 0.0 <= self.outlier_prop < 1.0:
            raise ConfigError("outlier_prop must lie in [0, 1)")
        if self.ranks != "auto":
            expected = 1 if self.is_vector else len(self.dims)
            if len(self.ranks) != expected:
                raise ConfigError(f"ranks must have {expected} entries or be 'auto'")
        if isinstance(self.tau, str) and self.tau not in ("cv", "inf", "theory"):
            raise ConfigError(f"bad tau {self.tau!r}")
        if isinstance(self.kappa, str) and self.kappa not in ("tau", "inf"):
            raise ConfigError(f"bad kappa {self.kappa!r}")
        if not isinstance(self.tau, str) and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not isinstance(self.kappa, str) and not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.tau_regime not in ("independent", "random_field"):
            raise ConfigError(f"bad tau_regime {self.tau_regime!r}")
        if self.standardize not in ("mean_sd", "median_mad", "none"):
            raise ConfigError(f"bad standardize {self.standardize!r}")
        if self.window < 2 or self.horizons < 1:
            raise ConfigError("window must be >= 2 and horizons >= 1")

    @property
    def is_vector(self) -> bool:
        return self.scenario in VECTOR_SCENARIOS or self.scenario == "vector"

    def echo(self) -> str:
        """Canonical one-line ``key=value`` rendering, sufficient to reproduce
        the run."""
        parts = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "on" if value else "off"
            elif isinstance(value, float) and math.isinf(value):
                value = "inf"
            parts.append(f"{f.name}={value}")
        return " ".join(parts)


def _positive_int(name: str, value: int) -> None:
    if value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}")


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)
    except ValueError as err:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from err


_BOOL = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}

_DIST_ALIASES = {"gaussian": "gaussian", "normal": "gaussian", "t3": "t3_scaled",
                 "t3_scaled": "t3_scaled"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in ("dims", "r_max"):
        return _parse_int_tuple(raw)
    if key == "ranks":
        return "auto" if raw.lower() == "auto" else _parse_int_tuple(raw)
    if key in ("n", "p", "iters", "cv_grid", "cv_folds", "seed", "replications",
               "threads", "window", "horizons"):
        try:
            return int(raw)
        except ValueError as err:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from err
    if key in ("outlier_prop", "phi", "psi", "tau_omega", "tau_epsilon"):
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from err
    if key == "tau":
        low = raw.lower()
        if low in ("cv", "theory"):
            return low
        if low == "inf":
            return math.inf
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"tau must be cv, inf, theory or a number, got {raw!r}") from err
    if key == "kappa":
        low = raw.lower()
        if low == "tau":
            return "tau"
        if low == "inf":
            return math.inf
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"kappa must be tau, inf or a number, got {raw!r}") from err
    if key in ("eval_ranks", "cv_per_window"):
        low = raw.lower()
        if low not in _BOOL:
            raise ConfigError(f"{key} must be on/off, got {raw!r}")
        return _BOOL[low]
    if key in ("factor_dist", "idio_dist"):
        low = raw.lower()
        if low not in _DIST_ALIASES:
            raise ConfigError(f"{key} must be gaussian or t3, got {raw!r}")
        return _DIST_ALIASES[low]
    return raw


_VALID_KEYS = {f.name for f in fields(RunConfig)}


def parse_config_values(text: str) -> dict:
    """Parse ``key = value`` lines (blank lines and ``#`` comments allowed)
    into a dict of typed values. Unknown and duplicate keys are rejected."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().lower()
        if key not in _VALID_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def make_config(values: dict) -> RunConfig:
    for key in values:
        if key not in _VALID_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from err


def parse_run_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse config text into a validated :class:`RunConfig`; ``overrides``
    (already-typed values) win over file values."""
    values = parse_config_values(text)
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
    return make_config(values)


def load_run_config(path: str, overrides: dict | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run_config(fh.read(), overrides)
