"""Experiment configuration: engineering units in, linear SI out.

All dB/dBm parsing happens here, once:

    P[W]      = 10^((dBm - 30)/10)
    gamma     = 10^(dB/10)
    N0[W/Hz]  = 10^((dBm/Hz - 30)/10)

The config file is INI-style (key = value under [network], [sim],
[solver], [slice_gen], [output]); any omitted key keeps its default, which
reproduces the ITU UMi urban-micro parameter set. The fully resolved
configuration is flattened into every output header so a result file
documents exactly what produced it.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .model import NetworkParams, SliceRequest
from .montecarlo import SimConfig
from .optimizer import SolverConfig

__all__ = [
    "ConfigError",
    "NetworkConfig",
    "SliceGenConfig",
    "ExperimentConfig",
    "dbm_to_watt",
    "db_to_linear",
    "draw_alphas",
    "make_requests",
]

SPEED_OF_LIGHT = 3e8  # propagation constant used by the wavelength relation


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Deployment constants in engineering units (defaults: ITU UMi)."""

    isd_m: float = 200.0
    fc_hz: float = 2.1e9
    p_tot_dbm: float = 43.0
    gamma_i_db: float = 0.0
    gamma_a_db: float = 0.0
    n0_dbm_hz: float = -174.0
    beta: float = 3.5
    b_tot_hz: float = 20e6
    mt_ratio: float = 100.0

    @property
    def lambda_bs(self) -> float:
        return 1.0 / (math.pi * self.isd_m**2)

    @property
    def lambda_t(self) -> float:
        return self.mt_ratio * self.lambda_bs

    def network_params(self) -> NetworkParams:
        wavelength = SPEED_OF_LIGHT / self.fc_hz
        return NetworkParams(
            lambda_bs=self.lambda_bs,
            beta=self.beta,
            kappa=(4.0 * math.pi / wavelength) ** 2,
            n0=dbm_to_watt(self.n0_dbm_hz),
            gamma_i=db_to_linear(self.gamma_i_db),
            gamma_a=db_to_linear(self.gamma_a_db),
            b_tot=self.b_tot_hz,
            p_tot=dbm_to_watt(self.p_tot_dbm),
        )

    def with_thresholds(self, db: float) -> "NetworkConfig":
        return replace(self, gamma_i_db=db, gamma_a_db=db)


@dataclass(frozen=True)
class SliceGenConfig:
    """Random SLA demand process: truncated normal in percent.

    variance_pct2 is the distribution's variance in squared percentage
    points; set variance_is_sigma when the number should be read as the
    standard deviation instead. Draws outside (trunc_low_pct,
    trunc_high_pct] are redrawn.
    """

    mean_pct: float = 10.0
    variance_pct2: float = 5.0
    variance_is_sigma: bool = False
    trunc_low_pct: float = 0.0
    trunc_high_pct: float = 50.0
    count: int = 32
    seed: int = 20190131

    @property
    def sigma_pct(self) -> float:
        return self.variance_pct2 if self.variance_is_sigma else math.sqrt(self.variance_pct2)


def draw_alphas(gen: SliceGenConfig, n: int, spawn_key: tuple[int, ...]) -> list[float]:
    """n SLA fractions from the derived stream (gen.seed, spawn_key)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=gen.seed, spawn_key=spawn_key))
    out: list[float] = []
    while len(out) < n:
        pct = rng.normal(gen.mean_pct, gen.sigma_pct)
        if gen.trunc_low_pct < pct <= gen.trunc_high_pct:
            out.append(pct / 100.0)
    return out


def make_requests(alphas: list[float], lambda_t: float) -> list[SliceRequest]:
    """Requests with the MT population split equally among the tenants."""
    n = len(alphas)
    return [
        SliceRequest(tenant_id=f"T{i:02d}", lambda_t=lambda_t / n, alpha=a)
        for i, a in enumerate(alphas)
    ]


FULL_MODE_REALIZATIONS = 1000
FULL_MODE_REPLICATIONS = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment command needs, fully resolved.

    ``--full`` raises sim.n_realizations and replications to paper scale;
    the values stored here are always the ones actually used, and they are
    what the output headers echo.
    """

    network: NetworkConfig
    sim: SimConfig
    solver: SolverConfig
    slice_gen: SliceGenConfig
    output_dir: str = "out"
    threads: int = 1
    quick: bool = True
    replications: int = 3

    def resolve_mode(self, quick: bool) -> "ExperimentConfig":
        if quick:
            return replace(self, quick=True)
        return replace(
            self,
            quick=False,
            sim=replace(self.sim, n_realizations=max(self.sim.n_realizations,
                                                     FULL_MODE_REALIZATIONS)),
            replications=max(self.replications, FULL_MODE_REPLICATIONS),
        )

    def flatten(self) -> list[tuple[str, str]]:
        """Sorted (key, value) pairs of the resolved configuration.

        The output directory is deliberately omitted: it is documented by
        the result file's own location and must not break byte-level
        comparison of results produced in different directories.
        """
        pairs: list[tuple[str, str]] = []
        for section, obj in (
            ("network", self.network),
            ("sim", self.sim),
            ("solver", self.solver),
            ("slice_gen", self.slice_gen),
        ):
            for f in fields(obj):
                pairs.append((f"{section}.{f.name}", repr(getattr(obj, f.name))))
        pairs.append(("run.threads", repr(self.threads)))
        pairs.append(("run.quick", repr(self.quick)))
        pairs.append(("run.replications", repr(self.replications)))
        return sorted(pairs)


_DEFAULT_WINDOW_HALF_WIDTH = 2000.0
_DEFAULT_SIM_SEED = 20190131


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        network=NetworkConfig(),
        sim=SimConfig(
            window_half_width=_DEFAULT_WINDOW_HALF_WIDTH,
            n_realizations=150,
            seed=_DEFAULT_SIM_SEED,
        ),
        solver=SolverConfig(),
        slice_gen=SliceGenConfig(),
    )


def _coerce(raw: str, target_type: type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def _apply_section(obj, parser: configparser.ConfigParser, section: str):
    if not parser.has_section(section):
        return obj
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key [{section}] {key}")
        target_type = type(getattr(obj, key))
        try:
            updates[key] = _coerce(raw, target_type)
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc
    return replace(obj, **updates)


def load_config(path: str | None) -> ExperimentConfig:
    """Default config, optionally overridden by an INI file."""
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    try:
        network = _apply_section(cfg.network, parser, "network")
        sim = _apply_section(cfg.sim, parser, "sim")
        solver = _apply_section(cfg.solver, parser, "solver")
        slice_gen = _apply_section(cfg.slice_gen, parser, "slice_gen")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    output_dir = cfg.output_dir
    if parser.has_section("output"):
        for key, raw in parser.items("output"):
            if key == "dir":
                output_dir = raw
            else:
                raise ConfigError(f"unknown key [output] {key}")
    replications = cfg.replications
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key == "replications":
                try:
                    replications = int(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for [run] replications: {raw!r}") from exc
            else:
                raise ConfigError(f"unknown key [run] {key}")
    try:
        return replace(cfg, network=network, sim=sim, solver=solver,
                       slice_gen=slice_gen, output_dir=output_dir,
                       replications=replications)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
