"""Dynamic mixed-frequency synthesis for nowcasting a low-frequency target."""

from .dlm import DiscountPair, DlmState, StudentT, backward_sample, filter_step, forward_filter
from .errors import ConfigError, DataError, MFSError, NumericalError, ValidationError
from .evaluation import lpdr, msne, paired_r2
from .projection import ProjectionSheet, ProjectionSpec, run_projection
from .sequential import SequentialRun, sequential_nowcast
from .synthesis import GibbsConfig, SynthesisPrior, default_synthesis_prior, gibbs_fit, nowcast_simulate
from .timegrid import MixedFrequencyPanel, PeriodSplit, SimulationConfig, load_panel, simulate_panel

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DiscountPair", "DlmState", "GibbsConfig", "MFSError", "MixedFrequencyPanel",
    "NumericalError", "PeriodSplit", "ProjectionSheet", "ProjectionSpec", "SequentialRun", "SimulationConfig",
    "StudentT", "SynthesisPrior", "ValidationError", "backward_sample", "default_synthesis_prior", "filter_step",
    "forward_filter", "gibbs_fit", "load_panel", "lpdr", "msne", "nowcast_simulate", "paired_r2", "run_projection",
    "sequential_nowcast", "simulate_panel",
]
