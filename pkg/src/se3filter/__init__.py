"""Second-order minimum energy filtering on SE(3) from optical-flow observations."""

from .filter import FilterConfig, FilterState, ObservationBatch, init, weight_s
from .integrate import run_sequence, step_frame
from .synth import NoiseSpec, TwistSchedule, gen_observations, gen_scene

__all__ = [
    "FilterConfig",
    "FilterState",
    "ObservationBatch",
    "NoiseSpec",
    "TwistSchedule",
    "gen_observations",
    "gen_scene",
    "init",
    "run_sequence",
    "step_frame",
    "weight_s",
]
