"""Consensus-ADMM engine for the coupled admission/beamforming subproblems.

For a fixed linearization point vtilde the engine solves the convex problem

    min  sum_r lam0(r)||W(r)||_F^2
         + sum_r sum_m lam1(r) * kappa * v_m(r) / (1 + kappa*vtilde_m(r))^2
         + sum_d lam2(d) * sum_m a_m(d)

subject to per-node slacked-QoS cones (through the consensus copy E of
[H'W, sigma*1]), per-node power caps, and per-edge epigraph constraints that
tie a_m(d) to the indicator surrogates of the edge's endpoints. Splitting
duplicates each endpoint's surrogate into (x, y) on the tail side and (z, s)
on the head side, so every block update is (semi-)closed form:

    stage 1:  W per node (ridge solve + power bisection),
              (b, x, s) and (c, y, z) per edge-user (branch test + scalar
              bisection on the constraint multiplier),
    stage 2:  (e^m, v_m) per node-user (cone prox), a per edge-user,
    stage 3:  dual ascent on all multipliers.

Stages are separated by barriers; tasks within a stage are independent, so
they may be chunked over a thread pool. Every per-element trajectory depends
only on that element's own data (bisections freeze converged entries), which
keeps results bit-identical for any worker count.

All per-node and per-edge quantities are batched: leading axis R for nodes,
D for edges, each crossed with the M users.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import NumericalError
from .graphs import CouplingGraph, bound_objective


def update_w(eigvecs, eigvals, rhs, lam0, rho, power_budget, tol=1e-10):
    """Batched beamformer update: W = (rho*H H' + 2(lam0+alpha)I)^-1 rhs.

    eigvecs/eigvals: (B, N, N), (B, N) eigendecomposition of H H';
    rhs: (B, N, M) equal to H (rho*E_w + Omega_w); lam0: (B,).
    alpha >= 0 is the smallest power-cap multiplier with ||W||_F^2 <= P,
    found by doubling then bisection; ||W(alpha)||_F^2 is nonincreasing in
    alpha, so the bracket is valid. Returns (W, alpha).
    """
    rot = eigvecs.conj().transpose(0, 2, 1) @ rhs          # (B, N, M)
    weights = np.sum(np.abs(rot) ** 2, axis=2)             # (B, N)

    def powers(alpha):
        denom = rho * eigvals + 2.0 * (lam0 + alpha)[:, None]
        return np.sum(weights / denom ** 2, axis=1)

    alpha = np.zeros(len(lam0))
    over = powers(alpha) > power_budget
    if np.any(over):
        hi = np.ones(len(lam0))
        for _ in range(200):
            grow = over & (powers(hi) > power_budget)
            if not np.any(grow):
                break
            hi[grow] *= 2.0
        else:
            raise NumericalError("power-cap bisection failed to bracket")
        lo = np.zeros(len(lam0))
        active = over.copy()
        for _ in range(200):
            if not np.any(active):
                break
            mid = 0.5 * (lo + hi)
            too_big = powers(mid) > power_budget
            lo = np.where(active & too_big, mid, lo)
            hi = np.where(active & ~too_big, mid, hi)
            active = active & ((hi - lo) > tol)
        alpha = np.where(over, hi, 0.0)   # feasible endpoint keeps ||W||^2 <= P
    denom = rho * eigvals + 2.0 * (lam0 + alpha)[:, None]
    W = eigvecs @ (rot / denom[:, :, None])
    return W, alpha


def _epigraph_prox(t_lin, t_rec, t_slk, offset, rho, tol, share=2.0):
    """Prox of independent targets under lin >= 1/rec - offset + slk, rec >= 1.

    Minimizes (lin-t_lin)^2 + (rec-t_rec)^2 + (slk-t_slk)^2 (slk absent when
    t_slk is None). The inactive branch is detected by the margin test; the
    active branch pins the constraint and bisects the multiplier beta through
    u = share*beta + rho*margin, on which 1/rec = u/rho. share is 2 when both
    lin and slk absorb beta, 1 when slk is absent (anchored edges).
    Returns (lin, rec, slk_or_None, beta).
    """
    has_slack = t_slk is not None
    margin = t_lin + offset - (t_slk if has_slack else 0.0)
    rec0 = np.maximum(t_rec, 1.0)
    ok = margin >= 1.0 / rec0

    beta = np.zeros_like(margin)
    need = ~ok
    if np.any(need):
        lo = np.maximum(rho * margin, 0.0)
        hi = np.full_like(margin, rho)
        inv_scale = 1.0 / (share * rho ** 3)
        active = need.copy()
        for _ in range(200):
            if not np.any(active):
                break
            mid = 0.5 * (lo + hi)
            expr = np.maximum(t_rec + (mid - rho * margin) * mid ** 2 * inv_scale, 1.0)
            low_side = expr < rho / mid
            lo = np.where(active & low_side, mid, lo)
            hi = np.where(active & ~low_side, mid, hi)
            active = active & ((hi - lo) > tol)
        u = 0.5 * (lo + hi)
        beta = np.where(need, (u - rho * margin) / share, 0.0)

    lin = t_lin + beta / rho
    u_all = share * beta + rho * margin
    rec = np.where(ok, rec0, rho / np.where(need, u_all, 1.0))
    slk = (t_slk - beta / rho) if has_slack else None
    return lin, rec, slk, beta


def update_bxs(a, theta, eps, eta, kv_tail, sbar_head, c_head, rho, tol):
    """Edge-user update of (b, x, s) under b >= 1/x - c_head + s, x >= 1.

    kv_tail = kappa*v of the tail node; sbar_head is the head node's current
    linearized surrogate value (1+kappa*v_head)/(1+kappa*vtilde_head)^2 and
    c_head = 2/(1+kappa*vtilde_head). Returns (b, x, s, beta).
    """
    b, x, s, beta = _epigraph_prox(a + theta / rho, 1.0 + kv_tail - eps / rho,
                                   sbar_head - eta / rho, c_head, rho, tol)
    return b, x, s, beta


def update_cyz(a, phi, tau, delta, kv_head, ybar_tail, c_tail, rho, tol):
    """Mirror of update_bxs for (c, y, z) under c >= 1/z - c_tail + y, z >= 1."""
    c, z, y, beta = _epigraph_prox(a + phi / rho, 1.0 + kv_head - tau / rho,
                                   ybar_tail - delta / rho, c_tail, rho, tol)
    return c, y, z, beta


def update_bx_anchor(a, theta, eps, kv_tail, pb, rho, tol):
    """Anchored-edge (b, x) update under b >= 1/x - pb, x >= 1 (no slack side)."""
    b, x, _, beta = _epigraph_prox(a + theta / rho, 1.0 + kv_tail - eps / rho,
                                   None, pb, rho, tol, share=1.0)
    return b, x, beta


def update_cy_anchor(a, phi, delta, ybar_tail, pb, c_tail, rho):
    """Anchored-edge (c, y) update under the linear constraint c >= pb - c_tail + y."""
    t_c = a + phi / rho
    t_y = ybar_tail - delta / rho
    beta = np.maximum(0.0, 0.5 * rho * (pb - c_tail - (t_c - t_y)))
    return t_c + beta / rho, t_y - beta / rho, beta


def soc_prox_ve(g_rows, diag_idx, f, q, rho, gamma):
    """Joint prox of one consensus row e and its slack v under the QoS cone.

    Solves min rho/2 ||e - g/rho||^2 + rho*q/2 v^2 - f v subject to
    Re{e_d} + v >= sqrt(gamma)||e_-d||, Im{e_d} = 0, where d = diag_idx marks
    the direct-signal entry of each row. Shapes: g_rows (..., K) complex,
    diag_idx/f/q broadcastable to the leading shape. Returns (e, v).
    """
    g = np.asarray(g_rows, dtype=complex)
    lead = g.shape[:-1]
    K = g.shape[-1]
    g2 = g.reshape(-1, K)
    B = g2.shape[0]
    didx = np.broadcast_to(diag_idx, lead).reshape(-1)
    f2 = np.broadcast_to(f, lead).reshape(-1).astype(float)
    q2 = np.broadcast_to(q, lead).reshape(-1).astype(float)
    if np.any(q2 <= 0):
        raise NumericalError("node without incident duplicate pairs (q == 0)")

    rows = np.arange(B)
    gd = g2[rows, didx]
    re_gd = gd.real
    off2 = np.sum(np.abs(g2) ** 2, axis=1) - np.abs(gd) ** 2
    nrm = np.sqrt(np.maximum(off2, 0.0))
    sq = np.sqrt(gamma)

    mu_zero = np.maximum(-f2 - q2 * re_gd, 0.0) / (1.0 + q2)
    collapse = nrm <= sq * mu_zero
    mu_cone = np.maximum(q2 * (sq * nrm - re_gd) - f2, 0.0) / (1.0 + (1.0 + gamma) * q2)
    mu = np.where(collapse, mu_zero, mu_cone)

    safe = np.where(nrm > 0, nrm, 1.0)
    scale = np.where(collapse, 0.0, (nrm - mu * sq) / (rho * safe))
    e = g2 * scale[:, None].astype(complex)
    e[rows, didx] = (re_gd + mu) / rho
    v = (f2 + mu) / (rho * q2)
    return e.reshape(g.shape), v.reshape(lead)


def update_a(b, c, theta, phi, lam2, rho):
    """Closed-form epigraph variable: a = (b+c)/2 - (lam2 + theta + phi)/(2 rho)."""
    return 0.5 * (b + c) - (lam2 + theta + phi) / (2.0 * rho)


@dataclass
class Residuals:
    primal_norm: float
    dual_norm: float


class _Consts:
    """Quantities fixed for one (graph, vtilde, config) triple."""

    def __init__(self, graph: CouplingGraph, vtilde, config):
        self.graph = graph
        self.kappa = config.kappa
        self.gamma = config.qos_target
        self.sigma = np.sqrt(config.noise_power)
        self.power_budget = config.power_budget
        self.vtilde = np.asarray(vtilde, dtype=float)
        R, N, M = graph.channels.shape
        self.Hd = graph.channels.conj().transpose(0, 2, 1)          # (R, M, N)
        self.eigvals, self.eigvecs = np.linalg.eigh(
            graph.channels @ self.Hd)                               # of H H'
        self.w4 = 1.0 / (1.0 + self.kappa * self.vtilde) ** 2       # (R, M)
        tail, head = graph.tail, graph.head
        self.nreg = graph.num_regular
        self.reg_head = head[:self.nreg]
        self.w4_tail = self.w4[tail]                                # (D, M)
        self.c_tail = 2.0 / (1.0 + self.kappa * self.vtilde[tail])
        self.w4_head = self.w4[self.reg_head]                       # (nreg, M)
        self.c_head = 2.0 / (1.0 + self.kappa * self.vtilde[self.reg_head])
        self.pb = graph.anchor[self.nreg:]                          # (nanc, M)
        deg = graph.degrees()
        self.q = self.kappa ** 2 * deg[:, None] * (1.0 + self.w4 ** 2)

    def target(self, W):
        """Consensus target [H'W, sigma*1] as an (R, M, M+1) array."""
        HdW = self.Hd @ W
        R, M = HdW.shape[:2]
        out = np.empty((R, M, M + 1), dtype=complex)
        out[:, :, :M] = HdW
        out[:, :, M] = self.sigma
        return out


class AdmmState:
    """All primal blocks and multipliers of one solve (mutated in place)."""

    def __init__(self, graph: CouplingGraph, cs: _Consts, rho):
        R, N, M = graph.channels.shape
        D = graph.num_edges
        self.rho = float(rho)
        self.W = np.zeros((R, N, M), dtype=complex)
        self.E = cs.target(self.W)
        self.Om = np.zeros((R, M, M + 1), dtype=complex)
        self.v = np.zeros((R, M))
        self.x = np.ones((D, M))
        self.z = np.ones((cs.nreg, M))
        self.y = cs.w4_tail.copy()
        self.s = cs.w4_head.copy()
        # feasible epigraph values at v = 0 (x = z = 1)
        line_b = np.concatenate([1.0 - cs.c_head + cs.w4_head, 1.0 - cs.pb])
        line_c = np.concatenate([np.ones((cs.nreg, M)), cs.pb]) - cs.c_tail + cs.w4_tail
        self.a = np.maximum(line_b, line_c)
        self.b = self.a.copy()
        self.c = self.a.copy()
        zeros = lambda shape: np.zeros(shape)
        self.th = zeros((D, M))
        self.ph = zeros((D, M))
        self.ep = zeros((D, M))
        self.de = zeros((D, M))
        self.ta = zeros((cs.nreg, M))
        self.et = zeros((cs.nreg, M))


@dataclass
class AdmmResult:
    v: np.ndarray
    W: np.ndarray
    E: np.ndarray
    objective: float
    residuals: Residuals
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    state: AdmmState | None = None


def _gaps(st: AdmmState, cs: _Consts, target=None):
    """Consensus-constraint gaps (multiplier directions) as a name->array dict."""
    kappa = cs.kappa
    nreg = cs.nreg
    v_tail = st.v[cs.graph.tail]
    v_head = st.v[cs.reg_head]
    return {
        "E": st.E - (cs.target(st.W) if target is None else target),
        "b": st.a - st.b,
        "c": st.a - st.c,
        "x": st.x - 1.0 - kappa * v_tail,
        "y": st.y - (1.0 + kappa * v_tail) * cs.w4_tail,
        "z": st.z - 1.0 - kappa * v_head,
        "s": st.s - (1.0 + kappa * v_head) * cs.w4_head,
    }


def update_multipliers(st: AdmmState, cs: _Consts, target=None):
    """Dual ascent on every multiplier; returns the primal residual RMS."""
    gaps = _gaps(st, cs, target)
    st.Om += st.rho * gaps["E"]
    st.th += st.rho * gaps["b"]
    st.ph += st.rho * gaps["c"]
    st.ep += st.rho * gaps["x"]
    st.de += st.rho * gaps["y"]
    st.ta += st.rho * gaps["z"]
    st.et += st.rho * gaps["s"]
    sq = sum(float(np.sum(np.abs(g) ** 2)) for g in gaps.values())
    count = sum(g.size for g in gaps.values())
    return np.sqrt(sq / max(count, 1))


def _chunks(n, workers):
    k = max(1, min(workers, n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_tasks(executor, tasks):
    if executor is None:
        for task in tasks:
            task()
    else:
        for fut in [executor.submit(t) for t in tasks]:
            fut.result()


def solve_convex(graph: CouplingGraph, vtilde, config, *, rho=None, tol=None,
                 max_iter=None, state=None, workers=None, collect_trace=False):
    """Run the ADMM iteration until the normalized residuals meet the tolerance.

    Returns an AdmmResult whose `state` can be fed back in to warm-start the
    next solve (e.g. across outer-loop iterations). `workers` > 1 chunks the
    per-node/per-edge stage tasks over a thread pool; values are bit-identical
    for any worker count.
    """
    cs = _Consts(graph, vtilde, config)
    tol = config.admm_tol if tol is None else tol
    max_iter = config.max_admm_iterations if max_iter is None else max_iter
    bis = config.bisect_tol
    st = state if state is not None else AdmmState(graph, cs, rho or config.admm_penalty)
    if rho is not None:
        st.rho = float(rho)

    R, N, M = graph.channels.shape
    D = graph.num_edges
    nreg = cs.nreg
    tail, head = graph.tail, graph.head
    kappa, gamma = cs.kappa, cs.gamma
    rho0 = st.rho
    diag_idx = np.broadcast_to(np.arange(M), (R, M))
    dual_count = st.E.size + st.v.size + st.a.size

    executor = None
    if workers and workers > 1:
        executor = ThreadPoolExecutor(max_workers=workers)
    node_slices = _chunks(R, workers) if executor else [slice(0, R)]
    reg_slices = _chunks(nreg, workers) if executor else [slice(0, nreg)]
    anc_slices = _chunks(D - nreg, workers) if executor else [slice(0, D - nreg)]
    edge_slices = _chunks(D, workers) if executor else [slice(0, D)]

    trace = []
    primal = dual = np.inf
    iterations = 0
    converged = False
    try:
        for it in range(1, max_iter + 1):
            iterations = it
            rho_k = st.rho
            prev_E, prev_v, prev_a = st.E.copy(), st.v.copy(), st.a.copy()

            # ---- stage 1: {W, b, x, s, c, y, z} given (v, a, E) ----
            def w_task(sl):
                rhs = graph.channels[sl] @ (rho_k * st.E[sl, :, :M] + st.Om[sl, :, :M])
                st.W[sl], _ = update_w(cs.eigvecs[sl], cs.eigvals[sl], rhs,
                                       graph.lam0[sl], rho_k, cs.power_budget, bis)

            kv_tail = kappa * st.v[tail]
            kv_head = kappa * st.v[cs.reg_head]
            sbar = (1.0 + kv_head) * cs.w4_head
            ybar = (1.0 + kv_tail) * cs.w4_tail

            def reg_task(sl):
                st.b[sl], st.x[sl], st.s[sl], _ = update_bxs(
                    st.a[sl], st.th[sl], st.ep[sl], st.et[sl],
                    kv_tail[sl], sbar[sl], cs.c_head[sl], rho_k, bis)
                st.c[sl], st.y[sl], st.z[sl], _ = update_cyz(
                    st.a[sl], st.ph[sl], st.ta[sl], st.de[sl],
                    kv_head[sl], ybar[sl], cs.c_tail[sl], rho_k, bis)

            def anc_task(sl):
                full = slice(nreg + sl.start, nreg + sl.stop)
                st.b[full], st.x[full], _ = update_bx_anchor(
                    st.a[full], st.th[full], st.ep[full],
                    kv_tail[full], cs.pb[sl], rho_k, bis)
                st.c[full], st.y[full], _ = update_cy_anchor(
                    st.a[full], st.ph[full], st.de[full],
                    ybar[full], cs.pb[sl], cs.c_tail[full], rho_k)

            _run_tasks(executor, [lambda sl=sl: w_task(sl) for sl in node_slices]
                       + [lambda sl=sl: reg_task(sl) for sl in reg_slices]
                       + [lambda sl=sl: anc_task(sl) for sl in anc_slices])

            # ---- stage 2: {E, v} and a given the fresh first block ----
            target = cs.target(st.W)
            G = rho_k * target - st.Om
            acc_m1 = np.zeros((R, M))
            acc_m2 = np.zeros((R, M))
            acc_d1 = np.zeros((R, M))
            acc_d2 = np.zeros((R, M))
            np.add.at(acc_m1, tail, st.ep)
            np.add.at(acc_m2, tail, st.de)
            np.add.at(acc_d1, tail, st.x - 1.0)
            np.add.at(acc_d2, tail, st.y - cs.w4_tail)
            np.add.at(acc_m1, cs.reg_head, st.ta)
            np.add.at(acc_m2, cs.reg_head, st.et)
            np.add.at(acc_d1, cs.reg_head, st.z - 1.0)
            np.add.at(acc_d2, cs.reg_head, st.s - cs.w4_head)
            f = kappa * rho_k * (acc_m1 / rho_k
                                 + (acc_m2 - graph.lam1[:, None]) / rho_k * cs.w4
                                 + acc_d1 + cs.w4 * acc_d2)

            def soc_task(sl):
                st.E[sl], st.v[sl] = soc_prox_ve(G[sl], diag_idx[sl], f[sl],
                                                 cs.q[sl], rho_k, gamma)

            def a_task(sl):
                st.a[sl] = update_a(st.b[sl], st.c[sl], st.th[sl], st.ph[sl],
                                    graph.lam2[sl, None], rho_k)

            _run_tasks(executor, [lambda sl=sl: soc_task(sl) for sl in node_slices]
                       + [lambda sl=sl: a_task(sl) for sl in edge_slices])

            # ---- stage 3: multipliers, residuals, stopping ----
            primal = update_multipliers(st, cs, target)
            dsq = (np.sum(np.abs(st.E - prev_E) ** 2) + np.sum((st.v - prev_v) ** 2)
                   + np.sum((st.a - prev_a) ** 2))
            dual = rho_k * np.sqrt(dsq / dual_count)

            if collect_trace:
                trace.append((it, primal, dual,
                              bound_objective(graph, cs.vtilde, st.v, st.W, kappa)))
            if max(primal, dual) <= tol:
                converged = True
                break
            if config.residual_balancing and it % 50 == 0:
                if primal > 10.0 * dual:
                    st.rho = min(st.rho * 2.0, rho0 * 64.0)
                elif dual > 10.0 * primal:
                    st.rho = max(st.rho * 0.5, rho0 / 64.0)
    finally:
        if executor is not None:
            executor.shutdown()

    objective = bound_objective(graph, cs.vtilde, st.v, st.W, kappa)
    return AdmmResult(v=st.v.copy(), W=st.W.copy(), E=st.E.copy(),
                      objective=objective,
                      residuals=Residuals(float(primal), float(dual)),
                      iterations=iterations, converged=converged,
                      trace=trace, state=st)
