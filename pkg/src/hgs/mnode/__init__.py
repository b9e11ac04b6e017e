from . import backend
from .model import MnodeConfig, MnodeModel, apply_weight_sharing, node_component
from .plan import RolloutPlan, build_plan

__all__ = ["MnodeConfig", "MnodeModel", "RolloutPlan", "apply_weight_sharing", "backend", "build_plan",
           "node_component"]
