"""Peak shaving battery plant: loss models, scheduling and power allocation."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    EmptyPlanError,
    IngestError,
    NoCapacityError,
    balanced_allocation,
    open_circuit_voltage,
    pcs_efficiency,
    pso_allocate,
    transformer_loss,
)

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "EmptyPlanError",
    "IngestError",
    "NoCapacityError",
    "balanced_allocation",
    "box_stats",
    "open_circuit_voltage",
    "pcs_efficiency",
    "plan_day",
    "pso_allocate",
    "simulate",
    "step_cluster",
    "synth_load",
    "transformer_loss",
]


def step_cluster(soc, i_pol, p_ac_w, dt_s=60.0):
    return _json.loads(_core.step_cluster(soc, i_pol, p_ac_w, dt_s))


def synth_load(spec=None, seed=0):
    start, dt_s, values = _core.synth_load(_json.dumps(spec or {}), seed)
    return {"start_time": start, "dt_s": dt_s, "values_w": values}


def plan_day(values_w, dt_s, depth_w, rated_power_w, rated_energy_wh, method="improved"):
    return _json.loads(
        _core.plan_day(list(values_w), dt_s, depth_w, rated_power_w, rated_energy_wh, method)
    )


def box_stats(values):
    return _json.loads(_core.box_stats(list(values)))


def simulate(config):
    return _json.loads(_core.simulate(_json.dumps(config)))
