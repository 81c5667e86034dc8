"""Core domain model: SINR, admission indicators, QoS feasibility, costs.

Everything here is a pure function of its inputs. Users are indexed 0..M-1,
slices 0..T-1. Channel and beamformer matrices are complex (N, M) with one
column per user.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ProblemConfig


@dataclass
class HorizonPlan:
    """Admission slacks and beamformers over a horizon of T slices.

    v[t, m] >= 0 is the QoS slack of user m in slice t (0 means servable at
    the target SINR); W[t] is the (N, M) beamformer matrix of slice t.
    s0 optionally records the pre-horizon admissible statuses (1 = admissible).
    """

    v: np.ndarray
    W: np.ndarray
    s0: np.ndarray | None = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.W = np.asarray(self.W, dtype=complex)
        if self.v.ndim != 2 or self.W.ndim != 3 or self.W.shape[2] != self.v.shape[1] \
                or self.W.shape[0] != self.v.shape[0]:
            raise ValueError("inconsistent plan dimensions")
        if self.s0 is not None:
            self.s0 = np.asarray(self.s0, dtype=int)
            if self.s0.shape != (self.v.shape[1],):
                raise ValueError("s0 must have one entry per user")

    @property
    def num_slices(self):
        return self.v.shape[0]

    @property
    def num_users(self):
        return self.v.shape[1]


@dataclass
class CostBreakdown:
    transmit_power: float
    reject_cost: float
    switch_cost: float
    total: float


def sinr(H_t, W_t, sigma2, m):
    """SINR of user m: |h_m' w_m|^2 / (sigma2 + sum_{n != m} |h_m' w_n|^2)."""
    H_t = np.asarray(H_t)
    W_t = np.asarray(W_t)
    if H_t.shape != W_t.shape or H_t.ndim != 2:
        raise ValueError("H_t and W_t must both be (N, M)")
    M = H_t.shape[1]
    if not (0 <= m < M):
        raise ValueError(f"user index {m} out of range for M={M}")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    gains = np.abs(H_t[:, m].conj() @ W_t) ** 2   # |h_m' w_n|^2 for all n
    interference = gains.sum() - gains[m]
    return float(gains[m] / (sigma2 + interference))


def indicator(x):
    """Exact rejection indicator: 0 iff x == 0, else 1. Requires x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("indicator argument must be >= 0")
    out = (arr > 0).astype(int)
    return out if arr.ndim else int(out)


def indicator_smooth(x, kappa):
    """Smooth surrogate 1 - 1/(1 + kappa*x); 0 at x=0, increasing, < 1."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("indicator argument must be >= 0")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    out = 1.0 - 1.0 / (1.0 + kappa * arr)
    return out if arr.ndim else float(out)


def quantize_status(v, kappa):
    """Binary admissible statuses: 1 iff round(1/(1+kappa*v)) == 1, i.e. v < 1/kappa."""
    v = np.asarray(v, dtype=float)
    return (v < 1.0 / kappa).astype(int)


def _initial_indicator(plan, config):
    """Rejection indicators of the pre-horizon state, or None if not charged."""
    if not config.count_initial_switch or plan.s0 is None:
        return None
    return 1 - plan.s0   # s0 is admissible-status; indicator is rejection


def true_cost(plan, config: ProblemConfig):
    """Exact horizon cost: transmit power + rejection + status switching."""
    if plan.num_users != config.num_users or plan.num_slices != config.num_slices:
        raise ValueError("plan dimensions do not match config")
    ind = indicator(plan.v)   # also validates v >= 0
    transmit = float(np.sum(np.abs(plan.W) ** 2))
    reject = config.reject_weight * float(ind.sum())
    switches = float(np.abs(np.diff(ind, axis=0)).sum())
    i0 = _initial_indicator(plan, config)
    if i0 is not None:
        switches += float(np.abs(ind[0] - i0).sum())
    switch = config.switch_weight * switches
    return CostBreakdown(transmit, reject, switch, transmit + reject + switch)


def smoothed_cost(plan, config: ProblemConfig):
    """Horizon cost with the exact indicator replaced by its smooth surrogate."""
    if plan.num_users != config.num_users or plan.num_slices != config.num_slices:
        raise ValueError("plan dimensions do not match config")
    kappa = config.kappa
    smooth = indicator_smooth(plan.v, kappa)
    transmit = float(np.sum(np.abs(plan.W) ** 2))
    reject = config.reject_weight * float(smooth.sum())
    frac = 1.0 - smooth   # 1/(1 + kappa v)
    switches = float(np.abs(np.diff(frac, axis=0)).sum())
    i0 = _initial_indicator(plan, config)
    if i0 is not None:
        switches += float(np.abs(frac[0] - (1 - i0)).sum())
    return transmit + reject + config.switch_weight * switches


def qos_feasible(H_t, W_t, v_t, gamma, sigma2, im_tol=1e-5):
    """Per-user slacked-QoS check.

    User m passes iff Re{h_m' w_m} + v_m >= sqrt(gamma * (sigma2 + interference))
    and |Im{h_m' w_m}| <= im_tol. Returns (ok (M,) bool, residual (M,)) where
    residual is left side minus right side of the cone inequality.
    """
    H_t = np.asarray(H_t)
    W_t = np.asarray(W_t)
    v_t = np.asarray(v_t, dtype=float)
    if H_t.shape != W_t.shape or v_t.shape != (H_t.shape[1],):
        raise ValueError("inconsistent dimensions")
    cross = H_t.conj().T @ W_t                       # (M, M), row m = h_m' w_n
    diag = np.diag(cross)
    interference = np.sum(np.abs(cross) ** 2, axis=1) - np.abs(diag) ** 2
    residual = diag.real + v_t - np.sqrt(gamma * (sigma2 + interference))
    ok = (residual >= -1e-12) & (np.abs(diag.imag) <= im_tol)
    return ok, residual
