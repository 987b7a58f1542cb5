"""Timetable optimization for synchronizing regenerative braking with acceleration."""
from .energy import EnergyReport, PowerParams, compare_reports, effective_consumption
from .instance import Instance, instance_to_dict, load_instance
from .mip import MipModel, build_model, compute_bigM, export_mps, model_stats
from .network import InstanceError, ModelParams, RailNetwork, load_network, validate_network, validate_params
from .solver import Budget, Solution, branch_and_bound, enumerate_oracle, extract_timetable
from .spstp import SyncPair, build_sync_pairs
from .timetable import Timetable, overlap_closed_form, total_overlap, validate_timetable

__version__ = "0.1.0"

__all__ = [
    "Budget", "EnergyReport", "Instance", "InstanceError", "MipModel", "ModelParams", "PowerParams",
    "RailNetwork", "Solution", "SyncPair", "Timetable", "branch_and_bound", "build_model",
    "build_sync_pairs", "compare_reports", "compute_bigM", "effective_consumption", "enumerate_oracle",
    "export_mps", "extract_timetable", "instance_to_dict", "load_instance", "load_network",
    "model_stats", "overlap_closed_form", "total_overlap", "validate_network", "validate_params",
    "validate_timetable",
]
