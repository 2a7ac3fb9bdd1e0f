"""Reward-free exploration for estimating the dynamics of tabular MDPs."""
from .mdp import (EnvSpec, StationaryPolicy, TabularMdp, build_garnet, build_noisy_riverswim, build_wheel,
                  make_env, stationary_distribution, transitional_noise)
from .estimation import Counters, bernstein_halfwidths, empirical_model, noise_upper_bound
from .objectives import Objective, error_avg, error_max
from .fw_modest import FwConfig, fw_modest_run
from .weighted_maxent import WmeConfig, maxent_run, uniform_baseline_run, weighted_maxent_run
from .optimal import exact_fw, maxent_allocation, modest_allocation, table1_error, weighted_maxent_allocation

__version__ = "0.1.0"
