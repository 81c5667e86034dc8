"""Coupling graphs for the convex inner problems.

A graph has one node per slice instance (its channel matrix plus power and
rejection weights) and one edge per switching-cost term. An edge compares the
indicator surrogates of its tail and head nodes; an anchored edge (head == -1)
compares the tail against a fixed binary status vector instead. The online
per-slice problem is a star (current slice at the hub, future samples as
leaves, plus an anchored edge to the previous statuses); the offline
whole-horizon problem is a chain over consecutive slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigurationError


@dataclass(frozen=True)
class CouplingGraph:
    channels: np.ndarray   # (R, N, M) complex, per-node channel matrix
    lam0: np.ndarray       # (R,) transmit-power weights
    lam1: np.ndarray       # (R,) rejection weights
    tail: np.ndarray       # (D,) tail node of each edge
    head: np.ndarray       # (D,) head node, or -1 for anchored edges
    lam2: np.ndarray       # (D,) switching weights
    anchor: np.ndarray     # (D, M) binary statuses for anchored edges, 0 elsewhere

    def __post_init__(self):
        object.__setattr__(self, "channels", np.asarray(self.channels, dtype=complex))
        for name in ("lam0", "lam1", "lam2", "anchor"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("tail", "head"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        R, _, M = self.channels.shape
        D = self.tail.shape[0]
        if self.lam0.shape != (R,) or self.lam1.shape != (R,):
            raise ConfigurationError("node weight arrays must be (R,)")
        if self.head.shape != (D,) or self.lam2.shape != (D,) or self.anchor.shape != (D, M):
            raise ConfigurationError("edge arrays must agree on the edge count")
        if np.any(self.lam0 <= 0) or np.any(self.lam1 < 0) or np.any(self.lam2 < 0):
            raise ConfigurationError("need lam0 > 0, lam1 >= 0, lam2 >= 0")
        if np.any(self.tail < 0) or np.any(self.tail >= R) or np.any(self.head >= R):
            raise ConfigurationError("edge endpoints out of range")
        anchored = self.head < 0
        if np.any(~np.isin(self.anchor[anchored], (0.0, 1.0))):
            raise ConfigurationError("anchor statuses must be binary")
        if D and np.any(np.diff(anchored.astype(int)) < 0):
            raise ConfigurationError("anchored edges must come after regular edges")
        if np.any(self.degrees() < 1):
            raise ConfigurationError(
                "every node needs at least one incident edge endpoint; "
                "add a zero-weight anchored edge to isolated nodes")

    @property
    def num_nodes(self):
        return self.channels.shape[0]

    @property
    def num_antennas(self):
        return self.channels.shape[1]

    @property
    def num_users(self):
        return self.channels.shape[2]

    @property
    def num_edges(self):
        return self.tail.shape[0]

    @property
    def num_regular(self):
        return int(np.count_nonzero(self.head >= 0))

    def degrees(self):
        """Incident duplicate-pair count per node (tail plus head endpoints)."""
        deg = np.bincount(self.tail, minlength=self.num_nodes)
        deg = deg + np.bincount(self.head[self.head >= 0], minlength=self.num_nodes)
        return deg


def star_graph(H_now, futures, prev_status, lam1, lam2):
    """Online per-slice graph: hub node 0 (weight 1, lam1), J future leaves
    (weights 1/J, lam1/J), leaf edges at lam2/J, and an anchored edge at lam2
    tying the hub to the previous binary statuses."""
    H_now = np.asarray(H_now, dtype=complex)
    futures = np.asarray(futures, dtype=complex).reshape((-1,) + H_now.shape)
    J = futures.shape[0]
    M = H_now.shape[1]
    channels = np.concatenate([H_now[None], futures]) if J else H_now[None]
    lam0 = np.r_[1.0, np.full(J, 1.0 / J)] if J else np.array([1.0])
    lam1v = np.r_[lam1, np.full(J, lam1 / J)] if J else np.array([float(lam1)])
    tail = np.r_[np.zeros(J, dtype=int), 0]
    head = np.r_[np.arange(1, J + 1), -1]
    lam2v = np.r_[np.full(J, lam2 / J) if J else np.empty(0), lam2]
    anchor = np.zeros((J + 1, M))
    anchor[J] = np.asarray(prev_status, dtype=float)
    return CouplingGraph(channels, lam0, lam1v, tail, head, lam2v, anchor)


def chain_graph(H_all, lam1, lam2, s0=None):
    """Offline whole-horizon graph: node per slice, edges between consecutive
    slices at lam2. With s0, node 0 is additionally anchored to those statuses
    at lam2; a single-slice chain without s0 gets a zero-weight anchor so the
    node still carries a duplicate pair."""
    H_all = np.asarray(H_all, dtype=complex)
    T, _, M = H_all.shape
    lam0 = np.ones(T)
    lam1v = np.full(T, float(lam1))
    tail = list(range(T - 1))
    head = list(range(1, T))
    lam2v = [float(lam2)] * (T - 1)
    anchor_rows = [np.zeros(M)] * (T - 1)
    if s0 is not None:
        tail.append(0)
        head.append(-1)
        lam2v.append(float(lam2))
        anchor_rows.append(np.asarray(s0, dtype=float))
    elif T == 1:
        tail.append(0)
        head.append(-1)
        lam2v.append(0.0)
        anchor_rows.append(np.zeros(M))
    anchor = np.stack(anchor_rows) if anchor_rows else np.zeros((0, M))
    return CouplingGraph(H_all, lam0, lam1v, np.array(tail, dtype=int),
                         np.array(head, dtype=int), np.array(lam2v), anchor)


def single_node_graph(H_t, lam1):
    """One slice in isolation; the zero-weight anchor only realizes v >= 0."""
    H_t = np.asarray(H_t, dtype=complex)
    M = H_t.shape[1]
    return CouplingGraph(H_t[None], np.array([1.0]), np.array([float(lam1)]),
                         np.array([0]), np.array([-1]), np.array([0.0]),
                         np.zeros((1, M)))


def edge_lines(graph: CouplingGraph, vtilde, v, kappa):
    """The two convex lines whose max upper-bounds each edge's switching term.

    Line 1 keeps the tail reciprocal exact and linearizes the head around
    vtilde; line 2 is the mirror image. Anchored edges substitute the fixed
    binary status for the head. Returns two (D, M) arrays.
    """
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    vtilde = np.asarray(vtilde, dtype=float)
    recip = 1.0 / (1.0 + kappa * v)
    recip_t = 1.0 / (1.0 + kappa * vtilde)
    tail, head = graph.tail, graph.head
    reg = head >= 0
    head_safe = np.where(reg, head, 0)

    tangent_tail = -2.0 * recip_t[tail] + (1.0 + kappa * v[tail]) * recip_t[tail] ** 2
    tangent_head = -2.0 * recip_t[head_safe] + (1.0 + kappa * v[head_safe]) * recip_t[head_safe] ** 2
    head_exact = np.where(reg[:, None], recip[head_safe], graph.anchor)

    line1 = recip[tail] + np.where(reg[:, None], tangent_head, -graph.anchor)
    line2 = head_exact + tangent_tail
    return line1, line2


def bound_objective(graph: CouplingGraph, vtilde, v, W, kappa):
    """Convex upper-bound objective at (v, W) for linearization point vtilde."""
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    vtilde = np.asarray(vtilde, dtype=float)
    power = float(graph.lam0 @ np.sum(np.abs(W) ** 2, axis=(1, 2)))
    recip_t = 1.0 / (1.0 + kappa * vtilde)
    reject_terms = 1.0 - 2.0 * recip_t + (1.0 + kappa * v) * recip_t ** 2
    reject = float(graph.lam1 @ reject_terms.sum(axis=1))
    line1, line2 = edge_lines(graph, vtilde, v, kappa)
    switch = float(graph.lam2 @ np.maximum(line1, line2).sum(axis=1))
    return power + reject + switch


def smoothed_objective(graph: CouplingGraph, v, W, kappa):
    """The smoothed (pre-linearization) objective the outer loop minimizes."""
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    power = float(graph.lam0 @ np.sum(np.abs(W) ** 2, axis=(1, 2)))
    recip = 1.0 / (1.0 + kappa * v)
    reject = float(graph.lam1 @ (1.0 - recip).sum(axis=1))
    reg = graph.head >= 0
    head_safe = np.where(reg, graph.head, 0)
    head_val = np.where(reg[:, None], recip[head_safe], graph.anchor)
    switch = float(graph.lam2 @ np.abs(recip[graph.tail] - head_val).sum(axis=1))
    return power + reject + switch
