"""Information-gathering path planning with particle beliefs.

Receding-horizon planner for RSSI-based tracking and localization that
compares three ways of predicting future measurements inside rollouts.
"""

from .belief import FilterParams, ParticleBelief, estimate, predict, update
from .generators import MeasurementGenerator
from .models import Action, AgentState, Measurement, MotionModel, ObjectState, RssiModel
from .planner import PlannerConfig, plan
from .reward import RewardConfig
from .scenario import ScenarioConfig, preset, run_mission

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentState",
    "FilterParams",
    "Measurement",
    "MeasurementGenerator",
    "MotionModel",
    "ObjectState",
    "ParticleBelief",
    "PlannerConfig",
    "RewardConfig",
    "RssiModel",
    "ScenarioConfig",
    "estimate",
    "plan",
    "predict",
    "preset",
    "run_mission",
    "update",
]
