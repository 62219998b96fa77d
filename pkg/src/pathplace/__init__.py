"""Energy-optimal placement of a machining path in a manipulator workspace."""
from .frames import Placement, Transform, placement_to_transform
from .manipulator import ActuatorLimits, Gantry, GantryParams, Orthoglide, OrthoglideParams, make_model
from .motor import MotorParams, electrify, integrate_energy, total_energy
from .path import CuttingForces, FeedSpec, PolylinePath, RectPath, sample_path
from .placement import GridAxis, GridSpec, PlacementProblem, evaluate, optimize, percent_saving, sweep

__version__ = "0.1.0"

__all__ = [
    "ActuatorLimits", "CuttingForces", "FeedSpec", "Gantry", "GantryParams", "GridAxis", "GridSpec",
    "MotorParams", "Orthoglide", "OrthoglideParams", "Placement", "PlacementProblem", "PolylinePath",
    "RectPath", "Transform", "electrify", "evaluate", "integrate_energy", "make_model", "optimize",
    "percent_saving", "placement_to_transform", "sample_path", "sweep", "total_energy",
]
