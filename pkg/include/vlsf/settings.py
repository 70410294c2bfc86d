"""
Run-configuration schemas. Unknown keys are rejected; SNRs are given in dB and converted
to linear ratios here, once.
"""
import logging
import math
import os
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from include.vlsf.bounds import SchemeConfig
from include.vlsf.channels import BiAwgnForward, NoiselessBinaryForward, RayleighForward
from include.vlsf.feedback import FeedbackScheme, OperatingPoint, feedback_point
from include.vlsf.helpers import LOG2, db_to_linear
from include.vlsf.montecarlo import DEFAULT_CHUNK_SIZE, DEFAULT_Z
from include.vlsf.optimizer import DEFAULT_N_P_GRID, DEFAULT_TARGETS, SearchSpace, default_search_space

logger = logging.getLogger(__name__)

current_file = os.path.abspath(__file__)
project_root = os.path.abspath(os.path.join(current_file, "..", "..", ".."))
PROJECT_CONFIG_PATH = os.path.join(project_root, "include", "config.yaml")

SUBCOMMANDS = ("bound", "sweep", "optimize", "simulate", "flnf", "feedback-frontier")

M = TypeVar("M", bound=BaseModel)


class ConfigError(ValueError):
    """
    A configuration file is missing, unreadable, or does not match its schema.
    """


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelSettings(StrictModel):
    kind: Literal["biawgn", "rayleigh", "noiseless"]
    snr_db: float = 0.0
    n: Optional[int] = Field(default=None, ge=1)
    n_p: Optional[int] = Field(default=None, ge=1)

    @property
    def rho(self) -> float:
        return db_to_linear(self.snr_db)

    def to_channel(self, n: Optional[int] = None):
        n = self.n if n is None else n
        if n is None:
            raise ConfigError("channel.n is required here")
        if self.kind == "biawgn":
            return BiAwgnForward(rho=self.rho, n=n)
        if self.kind == "rayleigh":
            if self.n_p is None:
                raise ConfigError("channel.n_p is required for the Rayleigh channel")
            return RayleighForward(rho=self.rho, n=n, n_p=self.n_p)
        return NoiselessBinaryForward(n=n)


class FeedbackSettings(StrictModel):
    scheme: FeedbackScheme
    snr_db: Optional[float] = None
    n_f: int = Field(default=1, ge=1)
    gamma_f: Optional[float] = None

    @property
    def snr(self) -> float:
        return math.inf if self.snr_db is None else db_to_linear(self.snr_db)

    @model_validator(mode="after")
    def _noisy_needs_snr(self):
        if self.scheme != FeedbackScheme.NOISELESS and self.snr_db is None:
            raise ValueError(f"feedback.snr_db is required for scheme {self.scheme.value}")
        return self

    def to_point(self) -> OperatingPoint:
        if self.scheme != FeedbackScheme.NOISELESS and self.gamma_f is None:
            raise ConfigError(f"feedback.gamma_f is required for scheme {self.scheme.value}")
        gamma_f = math.nan if self.gamma_f is None else self.gamma_f
        return feedback_point(self.scheme, self.n_f, self.snr, gamma_f)


class SchemeSettings(StrictModel):
    channel: ChannelSettings
    feedback: FeedbackSettings
    n_max: int = Field(ge=1)
    m_log2: float = Field(gt=0)
    gamma_dec: float

    def to_scheme_config(self, gamma_dec: Optional[float] = None) -> SchemeConfig:
        return SchemeConfig(
            channel=self.channel.to_channel(),
            feedback=self.feedback.to_point(),
            n_max=self.n_max,
            m_log2=self.m_log2,
            gamma_dec=self.gamma_dec if gamma_dec is None else gamma_dec,
        )


class BoundSettings(SchemeSettings):
    t_max: Optional[int] = Field(default=None, ge=1)
    eps_urllc: Optional[float] = Field(default=None, gt=0, le=1)


class SweepSettings(SchemeSettings):
    gamma_dec: float = 0.0
    gamma_dec_grid: Optional[List[float]] = None
    gamma_dec_span: Tuple[float, float, int] = (0.0, 20.0, 40)

    def gamma_grid(self) -> List[float]:
        if self.gamma_dec_grid:
            return list(self.gamma_dec_grid)
        low, high, points = self.gamma_dec_span
        return [float(g) for g in self.m_log2 * LOG2 + np.linspace(low, high, int(points))]


class SimulateSettings(SchemeSettings):
    physical_feedback: bool = False
    max_workload: int = Field(default=1 << 20, ge=1)
    trace_episodes: Optional[int] = Field(default=None, ge=1)


class OptimizeSettings(StrictModel):
    channel: Literal["biawgn", "rayleigh"]
    snr_db: float = 0.0
    feedback_scheme: FeedbackScheme
    feedback_snr_db: Optional[float] = None
    m_log2: float = Field(default=30.0, gt=0)
    latency_budget_cu: int = Field(default=400, ge=1)
    targets: List[float] = Field(default_factory=lambda: list(DEFAULT_TARGETS))
    n_tot_range: Tuple[int, int] = (8, 200)
    n_tot_grid: Optional[List[int]] = None
    n_f_max: int = Field(default=20, ge=1)
    n_f_grid: Optional[List[int]] = None
    n_p_grid: List[int] = Field(default_factory=lambda: list(DEFAULT_N_P_GRID))
    gamma_f_grid: Optional[List[float]] = None
    gamma_f_band: Tuple[float, float, int] = (1e-3, 0.3, 60)
    gamma_dec_points: int = Field(default=40, ge=1)
    gamma_dec_span: float = Field(default=20.0, ge=0)
    time_sharing: bool = True
    feedback_snr_db_grid: Optional[List[float]] = None

    @model_validator(mode="after")
    def _targets_are_probabilities(self):
        if not self.targets or any(not (0.0 < t < 1.0) for t in self.targets):
            raise ValueError("targets must be a nonempty list of probabilities in (0, 1)")
        if self.feedback_scheme != FeedbackScheme.NOISELESS and self.feedback_snr_db is None:
            raise ValueError("feedback_snr_db is required for noisy feedback")
        return self

    def to_search_space(self) -> SearchSpace:
        overrides: Dict[str, Any] = {
            "n_p_grid": tuple(self.n_p_grid),
            "gamma_f_band": tuple(self.gamma_f_band),
            "time_sharing": self.time_sharing,
        }
        if self.n_tot_grid:
            overrides["n_tot_grid"] = tuple(self.n_tot_grid)
        if self.n_f_grid and self.feedback_scheme != FeedbackScheme.NOISELESS:
            overrides["n_f_grid"] = tuple(self.n_f_grid)
        if self.gamma_f_grid:
            overrides["gamma_f_grid"] = tuple(self.gamma_f_grid)
        return default_search_space(
            channel=self.channel,
            rho=db_to_linear(self.snr_db),
            m_log2=self.m_log2,
            latency_budget_cu=self.latency_budget_cu,
            feedback_scheme=self.feedback_scheme,
            feedback_snr=math.inf if self.feedback_snr_db is None else db_to_linear(self.feedback_snr_db),
            n_tot_range=tuple(self.n_tot_range),
            n_f_max=self.n_f_max,
            gamma_dec_points=self.gamma_dec_points,
            gamma_dec_span=self.gamma_dec_span,
            **overrides,
        )


class FlnfSettings(StrictModel):
    channel: ChannelSettings
    m_log2: float = Field(ge=0)
    blocklengths: List[int] = Field(min_length=1)
    inner_trials: int = Field(default=1000, ge=0)
    relaxed: bool = False
    tilted: bool = True
    n_tot_grid: Optional[List[int]] = None
    target: Optional[float] = Field(default=None, gt=0, lt=1)


class FeedbackFrontierSettings(StrictModel):
    scheme: FeedbackScheme
    snr_db: Optional[float] = None
    n_f: int = Field(default=1, ge=1)
    gamma_f_grid: Optional[List[float]] = None
    eps_band: Tuple[float, float, int] = (1e-3, 0.3, 60)
    hull_points: int = Field(default=0, ge=0)

    @property
    def snr(self) -> float:
        return math.inf if self.snr_db is None else db_to_linear(self.snr_db)


SETTINGS_BY_SUBCOMMAND: Dict[str, Type[StrictModel]] = {
    "bound": BoundSettings,
    "sweep": SweepSettings,
    "optimize": OptimizeSettings,
    "simulate": SimulateSettings,
    "flnf": FlnfSettings,
    "feedback-frontier": FeedbackFrontierSettings,
}


class RunConfig(StrictModel):
    subcommand: Literal["bound", "sweep", "optimize", "simulate", "flnf", "feedback-frontier"]
    config_path: str
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    workers: int = Field(default=1, ge=1)
    trials: int = Field(default=100_000, ge=1)
    out: str

    @model_validator(mode="after")
    def _known_extension(self):
        if os.path.splitext(self.out)[1].lower() not in (".csv", ".json"):
            raise ValueError(f"out must end in .csv or .json, got {self.out!r}")
        return self


def load_mapping(path: str) -> Dict[str, Any]:
    """
    Read a JSON or YAML mapping.
    """
    if not os.path.exists(path):
        logger.error(f"Configuration file not found: {path}")
        raise ConfigError(f"configuration file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as file:
        try:
            data = yaml.safe_load(file)
        except yaml.YAMLError as err:
            logger.error(f"Could not parse {path}: {err}")
            raise ConfigError(f"could not parse {path}: {err}") from err
    if not isinstance(data, dict):
        logger.error(f"Configuration {path} is not a mapping")
        raise ConfigError(f"configuration {path} must contain a mapping at the top level")
    return data


def parse_settings(data: Dict[str, Any], model: Type[M]) -> M:
    try:
        return model.model_validate(data)
    except ValidationError as err:
        logger.error(f"Configuration failed validation against {model.__name__}:\n{err}")
        raise ConfigError(str(err)) from err


def load_settings(path: str, subcommand: str) -> StrictModel:
    if subcommand not in SETTINGS_BY_SUBCOMMAND:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    return parse_settings(load_mapping(path), SETTINGS_BY_SUBCOMMAND[subcommand])


def load_project_config(path: str = PROJECT_CONFIG_PATH) -> Dict[str, Any]:
    """
    Project defaults (Monte Carlo chunking, confidence level, DAG experiments).
    """
    return load_mapping(path)


class MonteCarloSettings(StrictModel):
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=1)
    confidence_z: float = Field(default=DEFAULT_Z, gt=0)


def load_montecarlo_settings(path: str = PROJECT_CONFIG_PATH) -> MonteCarloSettings:
    """
    The `montecarlo` block of the project config; missing keys fall back to the defaults.
    """
    return parse_settings(load_project_config(path).get("montecarlo") or {}, MonteCarloSettings)
