"""Comparison algorithms and the exact fixed-set beamforming subroutine.

qos_beamforming solves the classical minimum-power QoS-constrained downlink
problem for a fixed admitted set via the uplink-downlink duality fixed point;
everything else builds on it.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .config import ConfigurationError, NumericalError, ProblemConfig
from .graphs import single_node_graph
from .model import HorizonPlan, sinr
from .solvers import repair_plan, run_sum


def qos_beamforming(H, admitted, gamma, sigma2, power_budget):
    """Minimum-power beamformers meeting SINR == gamma for the admitted set.

    Iterates the dual uplink powers q_m <- gamma / (h_m' (sigma2 I +
    sum_{n != m} q_n h_n h_n')^{-1} h_m) from zero until the relative change
    drops below 1e-10, recovers the downlink powers through the SINR coupling
    system, and returns the (N, M) beamformer matrix (zero columns for
    non-admitted users). Returns None when the set is infeasible: the fixed
    point diverges, the coupling system is singular, or the budget is blown.
    """
    H = np.asarray(H, dtype=complex)
    N, M = H.shape
    admitted = sorted(admitted)
    W = np.zeros((N, M), dtype=complex)
    if not admitted:
        return W
    Hs = H[:, admitted]                      # (N, K)
    K = len(admitted)
    q = np.zeros(K)
    eye = sigma2 * np.eye(N)
    for _ in range(10_000):
        cov = eye + (Hs * q) @ Hs.conj().T
        q_new = np.empty(K)
        for k in range(K):
            h = Hs[:, k]
            sol = np.linalg.solve(cov - q[k] * np.outer(h, h.conj()), h)
            q_new[k] = gamma / max(np.real(h.conj() @ sol), 1e-300)
        if np.sum(q_new) > 1e6 * power_budget:
            return None
        if np.all(np.abs(q_new - q) <= 1e-10 * np.maximum(q_new, 1e-300)):
            q = q_new
            break
        q = q_new
    else:
        return None

    # MMSE receive directions become the downlink beam directions
    U = np.empty((N, K), dtype=complex)
    cov = eye + (Hs * q) @ Hs.conj().T
    for k in range(K):
        h = Hs[:, k]
        u = np.linalg.solve(cov - q[k] * np.outer(h, h.conj()), h)
        U[:, k] = u / np.linalg.norm(u)
    cross = np.abs(Hs.conj().T @ U) ** 2          # (K, K), |h_k' u_j|^2
    F = -cross
    F[np.diag_indices(K)] = np.diag(cross) / gamma
    try:
        p = np.linalg.solve(F, np.full(K, sigma2))
    except np.linalg.LinAlgError:
        return None
    if np.any(p < 0) or np.sum(p) > power_budget:
        return None
    W[:, admitted] = U * np.sqrt(p)
    for k, m in enumerate(admitted):
        achieved = sinr(H, W, sigma2, m)
        if abs(achieved - gamma) > 1e-6 * gamma:
            raise NumericalError("duality fixed point produced an off-target SINR")
    # rotate each beam so the direct term is real (cone-form convention)
    phases = np.exp(-1j * np.angle(np.einsum("nk,nk->k", Hs.conj(), W[:, admitted])))
    W[:, admitted] *= phases
    return W


def solve_per_slice(H_t, config: ProblemConfig, *, workers=None):
    """Joint admission control and beamforming for one slice in isolation.

    Runs the same bound-minimization machinery on a single-node graph with no
    switching cost, then quantizes and repairs. Returns (v (M,), W (N, M)).
    """
    from dataclasses import replace

    from . import channel as chan

    H_t = np.asarray(H_t, dtype=complex)
    graph = single_node_graph(H_t, config.reject_weight)
    v, W, _ = run_sum(graph, config, workers=workers)
    plan = HorizonPlan(v=v, W=W)
    one = replace(config, num_slices=1, num_users=H_t.shape[1], initial_status=())
    channels = chan.ChannelSet(H=H_t[None], variances=np.ones(H_t.shape[1]),
                               shadow=np.ones(H_t.shape[1]), seed=0)
    repaired = repair_plan(plan, channels, one)
    return repaired.v[0], repaired.W[0]


def solve_no_control(channels, config: ProblemConfig, *, workers=None):
    """Independent per-slice solves; switching cost plays no role at all."""
    T = channels.num_slices
    v = np.empty((T, channels.num_users))
    W = np.empty((T, channels.num_antennas, channels.num_users), dtype=complex)
    for t in range(T):
        v[t], W[t] = solve_per_slice(channels.H[t], config, workers=workers)
    return HorizonPlan(v=v, W=W, s0=config.initial_status_vector())


def channel_strength_plan(channels, config: ProblemConfig, K):
    """Admit the K(t) strongest-channel users per slice, then beamform exactly.

    Ties in channel gain break toward the lower user index. If the chosen set
    is infeasible, the weakest-channel admitted user is deflated (the realized
    count can be read back off the returned plan's statuses).
    """
    K = np.asarray(K, dtype=int)
    T, N, M = channels.H.shape
    if K.shape != (T,) or np.any(K < 0) or np.any(K > M):
        raise ConfigurationError("K must give a per-slice admitted count in [0, M]")
    v = np.full((T, M), 1.0)
    W = np.zeros((T, N, M), dtype=complex)
    for t in range(T):
        gains = np.sum(np.abs(channels.H[t]) ** 2, axis=0)
        order = sorted(range(M), key=lambda m: (-gains[m], m))
        admitted = order[:K[t]]
        while True:
            W_t = qos_beamforming(channels.H[t], admitted, config.qos_target,
                                  config.noise_power, config.power_budget)
            if W_t is not None:
                break
            admitted.remove(min(admitted, key=lambda m: (gains[m], -m)))
        W[t] = W_t
        for m in admitted:
            v[t, m] = 0.0
    return HorizonPlan(v=v, W=W, s0=config.initial_status_vector())


def brute_force_optimum(channels, config: ProblemConfig):
    """Global minimum of the exact horizon cost over binary admission patterns.

    Enumerates the 2^(M*T) patterns with exact per-slice beamforming (cached
    per admitted set); infeasible patterns are skipped. Only for M*T <= 12.
    Returns (optimal cost, (T, M) status array).
    """
    T, N, M = channels.H.shape
    if M * T > 12:
        raise ConfigurationError("brute force oracle is restricted to M*T <= 12")

    per_slice = []   # per slice: admitted-set bitmask -> power or None
    for t in range(T):
        table = {}
        for bits in range(2 ** M):
            admitted = [m for m in range(M) if bits >> m & 1]
            W_t = qos_beamforming(channels.H[t], admitted, config.qos_target,
                                  config.noise_power, config.power_budget)
            table[bits] = None if W_t is None else float(np.sum(np.abs(W_t) ** 2))
        per_slice.append(table)

    i0 = None
    if config.count_initial_switch:
        i0 = 1 - config.initial_status_vector()
    best = (np.inf, None)
    for pattern in product(range(2 ** M), repeat=T):
        cost = 0.0
        ok = True
        for t, bits in enumerate(pattern):
            power = per_slice[t][bits]
            if power is None:
                ok = False
                break
            rejected = M - bin(bits).count("1")
            cost += power + config.reject_weight * rejected
        if not ok:
            continue
        for t in range(T - 1):
            flips = bin(pattern[t] ^ pattern[t + 1]).count("1")
            cost += config.switch_weight * flips
        if i0 is not None:
            first_ind = np.array([1 - (pattern[0] >> m & 1) for m in range(M)])
            cost += config.switch_weight * float(np.abs(first_ind - i0).sum())
        if cost < best[0]:
            statuses = np.array([[bits >> m & 1 for m in range(M)] for bits in pattern])
            best = (cost, statuses)
    return best


def per_slice_enumeration(H_t, config: ProblemConfig):
    """Best exact cost of one slice over all admitted sets (test oracle)."""
    M = H_t.shape[1]
    best = np.inf
    for bits in range(2 ** M):
        admitted = [m for m in range(M) if bits >> m & 1]
        W_t = qos_beamforming(H_t, admitted, config.qos_target,
                              config.noise_power, config.power_budget)
        if W_t is None:
            continue
        cost = float(np.sum(np.abs(W_t) ** 2)) \
            + config.reject_weight * (M - len(admitted))
        best = min(best, cost)
    return best
