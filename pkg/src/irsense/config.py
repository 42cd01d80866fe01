"""Run configuration: one JSON document aggregating system, grids and sweep settings.

Layout (every section optional)::

    {
      "system":     {"n_c": 16, "q": 8, ...},      # SystemConfig fields
      "grids":      {"r_tau": 100, ...},           # GridSpec fields
      "montecarlo": {"trials": 200, "snr_grid_db": [0, 10], "q_values": [4, 8],
                     "estimators": ["hosvd", "baseline"], "on_grid": false,
                     "truth_floor": 0.1},
      "output_dir": "results",
      "seed": 1
    }

Missing ``grids.tau_max`` / ``grids.nu_max`` are derived from the system
config and the largest block size in use.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ParameterError
from .estimators import GridSpec
from .experiments import MonteCarloConfig, config_hash
from .signal_model import SystemConfig

OUTPUT_DIR_ENV = "IRSENSE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "irsense_out"

_SECTIONS = ("system", "grids", "montecarlo")
_TOP_LEVEL = set(_SECTIONS) | {"output_dir", "seed"}
_MC_KEYS = {"trials", "snr_grid_db", "q_values", "estimators", "on_grid", "truth_floor"}
_MC_DEFAULTS = {"trials": 200, "snr_grid_db": [0.0, 10.0, 20.0], "q_values": [4, 8],
                "estimators": ["hosvd", "baseline"], "on_grid": False, "truth_floor": 0.1}


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    grids: GridSpec
    montecarlo: MonteCarloConfig
    output_dir: Path
    seed: int | None
    raw: dict

    def config_hash(self) -> str:
        return config_hash(self.resolved_dict())

    def resolved_dict(self) -> dict:
        """Fully resolved settings (output location excluded)."""
        mc = self.montecarlo.to_dict()
        return {
            "system": self.system.to_dict(),
            "grids": self.grids.to_dict(),
            "montecarlo": {k: mc[k] for k in sorted(_MC_KEYS)},
            "seed": self.seed,
        }

    def require_seed(self) -> int:
        if self.seed is None:
            raise ParameterError("missing 'seed': pass --seed or set it in the config file")
        return self.seed


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, dotted_key: str, value) -> None:
    """Set ``section.key`` (or a top-level key) in a raw config dict."""
    parts = dotted_key.split(".")
    if len(parts) == 1:
        if parts[0] not in _TOP_LEVEL - set(_SECTIONS):
            raise ParameterError(f"unknown config key {dotted_key!r}")
        data[parts[0]] = value
    elif len(parts) == 2 and parts[0] in _SECTIONS:
        data.setdefault(parts[0], {})[parts[1]] = value
    else:
        raise ParameterError(f"unknown config key {dotted_key!r}")


def parse_set_option(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ParameterError(f"--set expects key=value, got {item!r}")
    key, text = item.split("=", 1)
    return key.strip(), _parse_value(text)


def build_run_config(data: dict | None = None, env=None) -> RunConfig:
    data = copy.deepcopy(data or {})
    env = os.environ if env is None else env
    for key in data:
        if key not in _TOP_LEVEL:
            raise ParameterError(f"unknown config key {key!r}")
    for section in _SECTIONS:
        if not isinstance(data.get(section, {}), dict):
            raise ParameterError(f"config section {section!r} must be an object")

    try:
        system = SystemConfig.from_dict(data.get("system", {}))
    except TypeError as exc:
        raise ParameterError(f"invalid system config: {exc}") from exc

    mc_raw = dict(_MC_DEFAULTS)
    for key, value in data.get("montecarlo", {}).items():
        if key not in _MC_KEYS:
            raise ParameterError(f"unknown montecarlo config key {key!r}")
        mc_raw[key] = value
    q_values = mc_raw["q_values"]
    if isinstance(q_values, (int, float)):
        q_values = [q_values]
    q_max = max([system.q, *q_values])

    grids_raw = dict(data.get("grids", {}))
    try:
        grids = GridSpec.for_config(system, q_max=q_max, **grids_raw)
    except TypeError as exc:
        raise ParameterError(f"invalid grids config: {exc}") from exc

    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ParameterError(f"seed must be a nonnegative integer, got {seed!r}")

    snr = mc_raw["snr_grid_db"]
    if isinstance(snr, (int, float, str)):
        snr = [snr]
    estimators = mc_raw["estimators"]
    if isinstance(estimators, str):
        estimators = [estimators]
    montecarlo = MonteCarloConfig(
        system=system,
        trials=mc_raw["trials"],
        snr_grid_db=tuple(float(s) for s in snr),
        q_values=tuple(q_values),
        base_seed=0 if seed is None else seed,
        grids=grids,
        estimators=tuple(estimators),
        on_grid=bool(mc_raw["on_grid"]),
        truth_floor=float(mc_raw["truth_floor"]),
    )

    output_dir = env.get(OUTPUT_DIR_ENV) or data.get("output_dir") or DEFAULT_OUTPUT_DIR
    return RunConfig(system, grids, montecarlo, Path(output_dir), seed, data)
