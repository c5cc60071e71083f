"""Fabric configuration: timing constants, energy tables, dynamics params.

Configs live in YAML files with the schema shown below; every key is
optional and falls back to the measured-prototype defaults.

.. code-block:: yaml

    grid: {width: 2, height: 1}
    cores_per_chip: 4
    neurons_per_core: 256
    supply: "1.3V"            # selects the energy preset
    latency_ns:
      broadcast: 27.0         # R1 -> core broadcast incl. CAM search
      chip_traverse: 15.4     # one full mesh hop (pads + R3 stage)
      r3_hop: 2.5             # R3 router stage alone (mesh entry/exit)
      r1_loop_read: 26.667    # one 20-bit LUT read at 750 Mb/s
      r2_hop: 1.0
    energy_pj:                # optional per-operation override
      spike_gen: 260.0
    throttle_io: false
    input_rate_mevents_per_s: 30.0
    forward_foreign: true     # wrong-chip events: forward (true) or drop
    tick_dt_ms: 0.1
    mismatch_sigma: 0.0       # log-normal per-neuron weight jitter
    seed: 0
    neuron: {c_mem_pf: 200.0, g_l_ns: 10.0, ...}
    synapses:
      fast_exc: {tau_ms: 5.0, weight: 60.0, pulse_width_ms: 1.0}
      slow_exc: {tau_ms: 100.0, weight: 60.0, pulse_width_ms: 1.0}
      sub_inh: {tau_ms: 10.0, weight: 60.0, pulse_width_ms: 1.0}
      shunt_inh: {tau_ms: 10.0, weight: 1.0, pulse_width_ms: 1.0}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dynamics import DEFAULT_SYNAPSES, NeuronParams, SynParams
from .errors import ConfigError
from .packets import SynType

# Measured per-operation energies at the two supply points, in pJ.
ENERGY_PRESETS: dict[str, dict[str, float]] = {
    "1.8V": {
        "spike_gen": 883.0,
        "encode_append": 883.0,
        "broadcast_same_core": 6840.0,
        "route_diff_core": 360.0,
        "pulse_extend": 324.0,
    },
    "1.3V": {
        "spike_gen": 260.0,
        "encode_append": 507.0,
        "broadcast_same_core": 2200.0,
        "route_diff_core": 78.0,
        "pulse_extend": 26.0,
    },
}

ENERGY_OPS = tuple(ENERGY_PRESETS["1.8V"])

SYN_KEYS = {
    "fast_exc": SynType.FAST_EXC,
    "slow_exc": SynType.SLOW_EXC,
    "sub_inh": SynType.SUB_INH,
    "shunt_inh": SynType.SHUNT_INH,
}


@dataclass(frozen=True)
class LatencyConfig:
    """Stage latencies in nanoseconds."""

    broadcast: float = 27.0
    chip_traverse: float = 15.4
    r3_hop: float = 2.5
    r1_loop_read: float = 20.0 / 0.75  # 20 bits at 750 Mb/s
    r2_hop: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"latency {f.name} must be non-negative")


@dataclass(frozen=True)
class FabricConfig:
    grid_w: int = 1
    grid_h: int = 1
    cores_per_chip: int = 4
    neurons_per_core: int = 256
    supply: str = "1.8V"
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    energy_pj: dict[str, float] | None = None  # None -> supply preset
    throttle_io: bool = False
    input_rate_mevents_per_s: float = 30.0
    forward_foreign: bool = True
    tick_dt_ms: float = 0.1
    mismatch_sigma: float = 0.0
    seed: int = 0
    neuron: NeuronParams = field(default_factory=NeuronParams)
    synapses: dict[SynType, SynParams] = field(
        default_factory=lambda: dict(DEFAULT_SYNAPSES))

    def __post_init__(self):
        if self.grid_w < 1 or self.grid_h < 1:
            raise ConfigError("grid dimensions must be >= 1")
        if self.supply not in ENERGY_PRESETS:
            raise ConfigError(f"unknown supply point {self.supply!r}; "
                              f"expected one of {sorted(ENERGY_PRESETS)}")
        if self.tick_dt_ms <= 0:
            raise ConfigError("tick_dt_ms must be positive")
        if self.input_rate_mevents_per_s <= 0:
            raise ConfigError("input rate must be positive")
        table = self.energy_table
        missing = set(ENERGY_OPS) - set(table)
        if missing:
            raise ConfigError(f"energy table missing operations: {sorted(missing)}")
        if any(v < 0 for v in table.values()):
            raise ConfigError("energy values must be non-negative")

    @property
    def energy_table(self) -> dict[str, float]:
        table = dict(ENERGY_PRESETS[self.supply])
        if self.energy_pj:
            table.update(self.energy_pj)
        return table

    @property
    def n_chips(self) -> int:
        return self.grid_w * self.grid_h

    def chip_id(self, x: int, y: int) -> int:
        return y * self.grid_w + x

    def chip_xy(self, chip_id: int) -> tuple[int, int]:
        return chip_id % self.grid_w, chip_id // self.grid_w

    @property
    def input_spacing_ns(self) -> float:
        return 1e3 / self.input_rate_mevents_per_s


def _neuron_from_dict(data: dict) -> NeuronParams:
    known = {f.name for f in dataclasses.fields(NeuronParams)}
    bad = set(data) - known
    if bad:
        raise ConfigError(f"unknown neuron parameters: {sorted(bad)}")
    return NeuronParams(**data)


def _synapses_from_dict(data: dict) -> dict[SynType, SynParams]:
    table = dict(DEFAULT_SYNAPSES)
    for key, params in data.items():
        if key not in SYN_KEYS:
            raise ConfigError(f"unknown synapse type {key!r}; "
                              f"expected one of {sorted(SYN_KEYS)}")
        bad = set(params) - {"tau_ms", "weight", "pulse_width_ms"}
        if bad:
            raise ConfigError(f"unknown synapse parameters for {key}: {sorted(bad)}")
        table[SYN_KEYS[key]] = SynParams(**params)
    return table


def config_from_dict(data: dict) -> FabricConfig:
    data = dict(data or {})
    grid = data.pop("grid", {})
    kwargs: dict = {}
    if grid:
        kwargs["grid_w"] = int(grid.get("width", 1))
        kwargs["grid_h"] = int(grid.get("height", 1))
    if "latency_ns" in data:
        lat = data.pop("latency_ns")
        known = {f.name for f in dataclasses.fields(LatencyConfig)}
        bad = set(lat) - known
        if bad:
            raise ConfigError(f"unknown latency keys: {sorted(bad)}")
        kwargs["latency"] = LatencyConfig(**lat)
    if "neuron" in data:
        kwargs["neuron"] = _neuron_from_dict(data.pop("neuron"))
    if "synapses" in data:
        kwargs["synapses"] = _synapses_from_dict(data.pop("synapses"))
    if "energy_pj" in data:
        kwargs["energy_pj"] = {str(k): float(v)
                               for k, v in data.pop("energy_pj").items()}
    if "input_rate_mevents_per_s" in data:
        kwargs["input_rate_mevents_per_s"] = float(
            data.pop("input_rate_mevents_per_s"))
    simple = {"cores_per_chip", "neurons_per_core", "supply", "throttle_io",
              "forward_foreign", "tick_dt_ms", "mismatch_sigma", "seed"}
    for key in list(data):
        if key in simple:
            kwargs[key] = data.pop(key)
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    return FabricConfig(**kwargs)


def config_to_dict(cfg: FabricConfig) -> dict:
    return {
        "grid": {"width": cfg.grid_w, "height": cfg.grid_h},
        "cores_per_chip": cfg.cores_per_chip,
        "neurons_per_core": cfg.neurons_per_core,
        "supply": cfg.supply,
        "latency_ns": dataclasses.asdict(cfg.latency),
        "energy_pj": cfg.energy_table,
        "throttle_io": cfg.throttle_io,
        "input_rate_mevents_per_s": cfg.input_rate_mevents_per_s,
        "forward_foreign": cfg.forward_foreign,
        "tick_dt_ms": cfg.tick_dt_ms,
        "mismatch_sigma": cfg.mismatch_sigma,
        "seed": cfg.seed,
        "neuron": dataclasses.asdict(cfg.neuron),
        "synapses": {
            key: dataclasses.asdict(cfg.synapses[syn])
            for key, syn in SYN_KEYS.items()
        },
    }


def load_config(path: str | Path) -> FabricConfig:
    try:
        with open(path) as fp:
            data = yaml.safe_load(fp)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    try:
        return config_from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(cfg: FabricConfig, path: str | Path) -> None:
    with open(path, "w") as fp:
        yaml.safe_dump(config_to_dict(cfg), fp, sort_keys=True)
