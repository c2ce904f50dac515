"""Small-cell on/off scheduling simulator with a Gamma-mixture load model."""

__version__ = "0.1.0"

from .geometry import Deployment, exclusion_area, lens_area, two_ue_areas
from .load_model import (GammaMixtureFit, MomentSpec, compute_loads, dlb_should_stop, first_moment,
                         fit_empirical, fit_from_moments, load_cdf, second_moment)
from .metrics import MetricsReport, aggregate
from .power import Mode, select_sleep_state
from .schedulers import SchedulerPolicy
from .sim import SimConfig, run, run_replication

__all__ = [
    "Deployment", "exclusion_area", "lens_area", "two_ue_areas",
    "GammaMixtureFit", "MomentSpec", "compute_loads", "dlb_should_stop", "first_moment",
    "fit_empirical", "fit_from_moments", "load_cdf", "second_moment",
    "MetricsReport", "aggregate", "Mode", "select_sleep_state", "SchedulerPolicy",
    "SimConfig", "run", "run_replication", "__version__",
]
