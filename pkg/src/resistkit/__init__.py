"""resistkit: finite resistance networks and their scaling-limit diagnostics.

Core objects: Network (conductances + measure + root), ResistanceMatrix,
GreenKernel, FiniteMMSpace, PathSample.  Submodules: resistance (metric and
network transforms), kernels (killed Green kernels, resolvents, semigroup),
simulate (exact-event walks and Monte-Carlo estimators), mmspace / ghp
(measured metric spaces and Gromov-Hausdorff-Prohorov surrogates), ensembles
(example families), experiments (convergence pipeline and identity suite).
"""

from .errors import (DisconnectedNetworkError, GenerationBudgetError,
                     KernelMismatchError, NetworkError, NotRealizableError,
                     RealizabilityWarning)
from .ghp import Correspondence, ghp_search, ghp_upper, spatial_discrepancy
from .kernels import (AlphaResolvent, GreenKernel, alpha_resolvent_full,
                      alpha_resolvent_killed, commute_time, green_apply,
                      green_kernel, hitting_probability,
                      kernel_ball_sandwich_check, transition_semigroup)
from .mmspace import (FiniteMMSpace, from_network, gromov_weak_moment,
                      resistance_growth_profile, restrict_ball)
from .network import Network, read_network, rescale_network, write_network
from .resistance import (ResistanceMatrix, ball_complement_resistance,
                         effective_resistance, fuse_network, fused_resistance,
                         resistance_matrix, resistance_to_network,
                         set_resistance, trace_network)
from .rng import SimulationConfig
from .simulate import (PathSample, estimate_fdd, fluctuation_probability,
                       hitting_tail_vs_bounds, killed_path, local_times,
                       simulate_path, time_change_trace)

__version__ = "0.1.0"
