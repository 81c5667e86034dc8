"""Long-term admission control and downlink beamforming simulator."""

from .admm import solve_convex
from .baselines import (brute_force_optimum, channel_strength_plan,
                        qos_beamforming, solve_no_control, solve_per_slice)
from .channel import (ChannelSet, Scenario, place_users, sample_future,
                      sample_horizon)
from .config import (CellGeometry, ConfigurationError, NumericalError,
                     ProblemConfig, SweepSpec, desk_profile, load_config,
                     paper_profile)
from .graphs import CouplingGraph, chain_graph, single_node_graph, star_graph
from .metrics import RunMetrics, compute_metrics, emit_status_grid, status_grid
from .model import (CostBreakdown, HorizonPlan, indicator, indicator_smooth,
                    qos_feasible, quantize_status, sinr, smoothed_cost, true_cost)
from .oracle import reference_oracle
from .solvers import (repair_plan, solve_offline, solve_online,
                      solve_online_step, sum_bound_gap)

__version__ = "0.1.0"
