"""Random walks on lamplighter groups, trees and free metabelian groups."""
__version__ = "0.1.0"

from .groups import (
    FreeGroup,
    Heisenberg,
    LampConfig,
    LampGroup,
    Lattice,
    Tree,
    WreathElem,
    lamp_group,
    wreath_identity,
    wreath_inv,
    wreath_mul,
)
from .measures import StepDistribution, build_measure, heavy_tail_ball, lamp_or_move, switch_walk_switch
from .walk import Trajectory, load_trajectory, run_batch, save_trajectory, simulate

__all__ = [
    "FreeGroup", "Heisenberg", "LampConfig", "LampGroup", "Lattice", "Tree", "WreathElem",
    "lamp_group", "wreath_identity", "wreath_inv", "wreath_mul",
    "StepDistribution", "build_measure", "heavy_tail_ball", "lamp_or_move", "switch_walk_switch",
    "Trajectory", "load_trajectory", "run_batch", "save_trajectory", "simulate",
]
