"""Outer successive upper-bound minimization loops and plan post-processing.

The offline solver linearizes the smoothed horizon objective around the
previous iterate and re-solves the convex chain problem until the smoothed
cost stalls. The online solver does the same per slice on a star problem
whose leaves are sampled future channels and whose hub is anchored to the
previous quantized statuses. Both finish with an exact-feasibility repair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .admm import solve_convex
from .config import ProblemConfig
from .graphs import chain_graph, smoothed_objective, star_graph
from .model import HorizonPlan, quantize_status


@dataclass
class SolveInfo:
    """Diagnostics of one SUM run (or the sum over slices for online runs)."""

    sum_iterations: int = 0
    admm_iterations: int = 0
    objective_trace: list = field(default_factory=list)   # smoothed cost per iterate
    converged: bool = True
    per_slice: list = field(default_factory=list)


def run_sum(graph, config: ProblemConfig, *, workers=None, collect_admm_trace=False):
    """Minimize the graph's smoothed objective by successive convex bounds.

    Each round re-expands the bound at the previous solution and solves the
    convex problem with the ADMM engine (warm-started). The recorded smoothed
    objective trace is nonincreasing: an iterate that fails to descend (which
    only finite inner tolerance can cause) is rejected and the loop stops.
    Returns (v, W, SolveInfo).
    """
    R = graph.num_nodes
    M = graph.num_users
    vtilde = np.zeros((R, M))
    info = SolveInfo()
    best = None
    state = None
    admm_traces = []
    for _ in range(config.max_sum_iterations):
        res = solve_convex(graph, vtilde, config, state=state,
                           workers=workers, collect_trace=collect_admm_trace)
        info.admm_iterations += res.iterations
        info.converged = info.converged and res.converged
        if collect_admm_trace:
            admm_traces.append(res.trace)
        v_plus = np.maximum(res.v, 0.0)
        obj = smoothed_objective(graph, v_plus, res.W, config.kappa)
        if best is not None and obj > info.objective_trace[-1] + 1e-7:
            break   # inner inexactness broke descent; keep the previous iterate
        best = (v_plus, res.W)
        info.objective_trace.append(obj)
        info.sum_iterations += 1
        if len(info.objective_trace) >= 2:
            prev = info.objective_trace[-2]
            if abs(prev - obj) <= config.sum_tol * max(1.0, abs(prev)):
                break
        vtilde = v_plus
        state = res.state
    if collect_admm_trace:
        info.per_slice = admm_traces
    return best[0], best[1], info


def solve_offline(channels: chan.ChannelSet, config: ProblemConfig, *, workers=None):
    """One-shot whole-horizon solve; needs every slice's channels up front.

    Returns (HorizonPlan, SolveInfo); the plan has been repaired to exact
    feasibility and the info carries the smoothed-objective trace.
    """
    s0 = config.initial_status_vector()
    anchor = s0 if config.count_initial_switch else None
    graph = chain_graph(channels.H, config.reject_weight, config.switch_weight, s0=anchor)
    v, W, info = run_sum(graph, config, workers=workers)
    plan = HorizonPlan(v=v, W=W, s0=s0)
    return repair_plan(plan, channels, config), info


def solve_online_step(prev_status, H_t, variances, J, config: ProblemConfig, seed,
                      *, workers=None):
    """Solve one slice given the previous statuses and the channel statistics.

    Only the current channel matrix and the per-user variances cross this
    interface; future slices are represented by J freshly sampled matrices.
    Returns (v_t, W_t, SolveInfo).
    """
    H_t = np.asarray(H_t, dtype=complex)
    futures = (chan.sample_future(variances, H_t.shape[0], J, seed)
               if J >= 1 else np.zeros((0,) + H_t.shape, dtype=complex))
    graph = star_graph(H_t, futures, prev_status, config.reject_weight, config.switch_weight)
    v, W, info = run_sum(graph, config, workers=workers)
    return v[0], W[0], info


def solve_online(channels: chan.ChannelSet, config: ProblemConfig, J, seed, *, workers=None):
    """Per-slice online solve threading quantized statuses forward.

    Slice t uses the realized H(t), the previous binary statuses, and J
    sampled future channels (J=0 at the terminal slice unless configured to
    keep sampling). Returns (HorizonPlan, SolveInfo).
    """
    T, N, M = channels.H.shape
    s0 = config.initial_status_vector()
    status = s0.copy()
    v_all = np.empty((T, M))
    W_all = np.empty((T, N, M), dtype=complex)
    total = SolveInfo()
    for t in range(T):
        J_t = J if (t < T - 1 or config.terminal_uses_future) else 0
        slice_seed = chan.derive_seed(seed, chan.TAG_SLICE, t)
        v_t, W_t, info = solve_online_step(status, channels.H[t], channels.variances,
                                           J_t, config, slice_seed, workers=workers)
        v_all[t] = v_t
        W_all[t] = W_t
        status = quantize_status(v_t, config.kappa)
        total.sum_iterations += info.sum_iterations
        total.admm_iterations += info.admm_iterations
        total.converged = total.converged and info.converged
        total.per_slice.append(info)
    total.objective_trace = [i.objective_trace for i in total.per_slice]
    plan = HorizonPlan(v=v_all, W=W_all, s0=s0)
    return repair_plan(plan, channels, config), total


def repair_plan(plan: HorizonPlan, channels: chan.ChannelSet, config: ProblemConfig):
    """Exact-feasibility post-processing shared by every algorithm.

    Per slice: quantize statuses, re-solve minimum-power beamforming for the
    admitted set, and deflate (drop the admitted user with the largest slack,
    ties to the weakest channel) until feasible within the power budget.
    Admitted users end with v = 0 and SINR >= gamma; dropped users get
    v = 1/kappa so their quantized status flips to inadmissible.
    """
    from .baselines import qos_beamforming   # deferred: baselines imports this module

    kappa = config.kappa
    statuses = quantize_status(plan.v, kappa)
    T, M = plan.v.shape
    N = plan.W.shape[1]
    v_out = np.array(plan.v, dtype=float)
    W_out = np.zeros((T, N, M), dtype=complex)
    for t in range(T):
        H_t = channels.H[t]
        admitted = [m for m in range(M) if statuses[t, m] == 1]
        norms = np.sum(np.abs(H_t) ** 2, axis=0)
        while True:
            W_t = qos_beamforming(H_t, admitted, config.qos_target,
                                  config.noise_power, config.power_budget)
            if W_t is not None:
                break
            # drop the worst admitted user: largest slack, then weakest channel
            drop = max(admitted, key=lambda m: (plan.v[t, m], -norms[m], -m))
            admitted.remove(drop)
            v_out[t, drop] = 1.0 / kappa
        W_out[t] = W_t
        for m in admitted:
            v_out[t, m] = 0.0
    return HorizonPlan(v=v_out, W=W_out, s0=plan.s0)


def sum_bound_gap(v, v_bar, config: ProblemConfig):
    """Gap between the convex upper bound expanded at v_bar and the smoothed
    rejection+switching cost at v. Nonnegative everywhere, zero at v == v_bar.

    v and v_bar are (T, M) slack arrays (any T, M >= 1).
    """
    v = np.asarray(v, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    if v.shape != v_bar.shape or v.ndim != 2:
        raise ValueError("v and v_bar must be matching (T, M) arrays")
    if np.any(v < 0) or np.any(v_bar < 0):
        raise ValueError("slacks must be >= 0")
    kappa = config.kappa
    recip = 1.0 / (1.0 + kappa * v)
    recip_bar = 1.0 / (1.0 + kappa * v_bar)

    bound_reject = 1.0 - 2.0 * recip_bar + (1.0 + kappa * v) * recip_bar ** 2
    exact_reject = 1.0 - recip
    gap = config.reject_weight * float(np.sum(bound_reject - exact_reject))

    if v.shape[0] > 1:
        tangent = -2.0 * recip_bar + (1.0 + kappa * v) * recip_bar ** 2
        line1 = recip[1:] + tangent[:-1]    # exact at t+1, linearized at t
        line2 = recip[:-1] + tangent[1:]    # exact at t, linearized at t+1
        bound_switch = np.maximum(line1, line2)
        exact_switch = np.abs(recip[1:] - recip[:-1])
        gap += config.switch_weight * float(np.sum(bound_switch - exact_switch))
    return gap
