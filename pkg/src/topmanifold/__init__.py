"""Sampling optimal controls and testing path-connectedness of quantum control landscape top manifolds."""

from .analysis import PathMetrics, PcaProjection, path_distance, pca_project, ratio_R
from .climber import ClimbReport, InitialFieldSpec, climb, climb_samples, sample_initial_field
from .core import (
    ControlField,
    PropagationResult,
    QuantumSystem,
    ValidationError,
    analytic_two_level,
    distance,
    fluence,
    propagate,
    two_level_system,
)
from .harness import CampaignSummary, ExperimentConfig, run_campaign, summarize
from .levelset import ConnectReport, LevelSetParams, connect_dmorph, explore_stochastic, walk_far
from .models import Preset, load_preset
from .objectives import OCL, STL, UTL, Landscape, gradient, value
from .string_method import StringParams, StringState, init_arc, init_straight, relax, solve_arc_angle

__version__ = "0.1.0"
