"""Slow first-order reference solver for the convex inner problems.

Independent verification path for the ADMM engine: the same convex problem is
solved as a sequence of augmented-Lagrangian subproblems, each minimized by
monotone projected FISTA over the easy set {v >= 0, ||W(r)||_F <= sqrt(P)}.
The cone, zero-imaginary-part, and edge epigraph constraints enter through
multiplier-shifted quadratic penalties. Nothing here shares code with the
engine's closed-form block updates. Intended for small instances and tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigurationError
from .graphs import CouplingGraph, bound_objective


@dataclass
class OracleResult:
    objective: float
    v: np.ndarray
    W: np.ndarray
    a: np.ndarray
    kkt: float
    outer_iterations: int


class _Problem:
    """Precomputed data plus value/gradient callbacks on a packed real vector."""

    def __init__(self, graph: CouplingGraph, vtilde, config):
        self.graph = graph
        self.kappa = config.kappa
        self.gamma = config.qos_target
        self.sigma2 = config.noise_power
        self.P = config.power_budget
        R, N, M = graph.channels.shape
        self.shape = (R, N, M)
        self.D = graph.num_edges
        self.Hd = graph.channels.conj().transpose(0, 2, 1)
        vtilde = np.asarray(vtilde, dtype=float)
        self.w4 = 1.0 / (1.0 + self.kappa * vtilde) ** 2
        self.lin_v = graph.lam1[:, None] * self.kappa * self.w4   # linear v cost
        tail, head = graph.tail, graph.head
        self.reg = head >= 0
        self.head_safe = np.where(self.reg, head, 0)
        self.ctail = 2.0 / (1.0 + self.kappa * vtilde[tail])
        self.w4_tail = self.w4[tail]
        self.chead = 2.0 / (1.0 + self.kappa * vtilde[self.head_safe])
        self.w4_head = self.w4[self.head_safe]
        self.anchor = graph.anchor
        self.nW = 2 * R * N * M
        self.nv = R * M

    # ----- packing -----
    def pack(self, W, v, a):
        return np.concatenate([W.real.ravel(), W.imag.ravel(), v.ravel(), a.ravel()])

    def unpack(self, zvec):
        R, N, M = self.shape
        half = R * N * M
        W = (zvec[:half] + 1j * zvec[half:self.nW]).reshape(R, N, M)
        v = zvec[self.nW:self.nW + self.nv].reshape(R, M)
        a = zvec[self.nW + self.nv:].reshape(self.D, M)
        return W, v, a

    def project(self, zvec):
        W, v, a = self.unpack(zvec)
        np.maximum(v, 0.0, out=v)
        norms = np.sqrt(np.sum(np.abs(W) ** 2, axis=(1, 2)))
        scale = np.where(norms > np.sqrt(self.P), np.sqrt(self.P) / np.maximum(norms, 1e-300), 1.0)
        W *= scale[:, None, None]
        return self.pack(W, v, a)

    # ----- constraint residuals -----
    def residuals(self, W, v, a):
        A = self.Hd @ W                                    # (R, M, M)
        diag = np.einsum("rmm->rm", A)
        off2 = np.sum(np.abs(A) ** 2, axis=2) - np.abs(diag) ** 2
        nrm = np.sqrt(self.gamma * (self.sigma2 + off2))
        g_soc = nrm - diag.real - v
        g_im = diag.imag
        recip = 1.0 / (1.0 + self.kappa * v)
        tang_tail = -self.ctail + (1.0 + self.kappa * v[self.graph.tail]) * self.w4_tail
        tang_head = -self.chead + (1.0 + self.kappa * v[self.head_safe]) * self.w4_head
        head_exact = np.where(self.reg[:, None], recip[self.head_safe], self.anchor)
        l1 = recip[self.graph.tail] + np.where(self.reg[:, None], tang_head, -self.anchor) - a
        l2 = head_exact + tang_tail - a
        return A, nrm, g_soc, g_im, l1, l2

    def value_grad(self, zvec, mult, pen):
        """Augmented-Lagrangian value and packed gradient."""
        W, v, a = self.unpack(zvec)
        graph = self.graph
        A, nrm, g_soc, g_im, l1, l2 = self.residuals(W, v, a)

        p_soc = np.maximum(mult["soc"] + pen * g_soc, 0.0)
        p_im = mult["im"] + pen * g_im
        p_b = np.maximum(mult["b"] + pen * l1, 0.0)
        p_c = np.maximum(mult["c"] + pen * l2, 0.0)

        val = float(graph.lam0 @ np.sum(np.abs(W) ** 2, axis=(1, 2))
                    + np.sum(self.lin_v * v) + graph.lam2 @ a.sum(axis=1))
        val += float((np.sum(p_soc ** 2 - mult["soc"] ** 2)
                      + np.sum(p_b ** 2 - mult["b"] ** 2)
                      + np.sum(p_c ** 2 - mult["c"] ** 2)) / (2.0 * pen))
        val += float(np.sum(mult["im"] * g_im) + 0.5 * pen * np.sum(g_im ** 2))

        # W gradient: rows of S weight each user's cone/imag terms
        S = (p_soc / np.maximum(nrm, 1e-300) * self.gamma)[:, :, None] * A
        idx = np.arange(self.shape[2])
        S[:, idx, idx] = -p_soc + 1j * p_im
        gW = 2.0 * graph.lam0[:, None, None] * W + graph.channels @ S

        recip2 = 1.0 / (1.0 + self.kappa * v) ** 2
        gv = self.lin_v - p_soc
        contrib_tail = -p_b * self.kappa * recip2[graph.tail] + p_c * self.kappa * self.w4_tail
        np.add.at(gv, graph.tail, contrib_tail)
        reg_idx = np.flatnonzero(self.reg)
        if reg_idx.size:
            heads = graph.head[reg_idx]
            contrib_head = (p_b[reg_idx] * self.kappa * self.w4_head[reg_idx]
                            - p_c[reg_idx] * self.kappa * recip2[heads])
            np.add.at(gv, heads, contrib_head)
        ga = graph.lam2[:, None] - p_b - p_c
        grad = np.concatenate([gW.real.ravel(), gW.imag.ravel(), gv.ravel(), ga.ravel()])
        return val, grad, (g_soc, g_im, l1, l2)


def _fista(problem, z0, mult, pen, inner_tol, max_inner):
    """Monotone projected FISTA on the augmented Lagrangian."""
    z = problem.project(z0)
    fz, gz, _ = problem.value_grad(z, mult, pen)
    y = z.copy()
    t = 1.0
    L = max(1.0, pen)
    best = (fz, z.copy())
    for _ in range(max_inner):
        fy, gy, _ = problem.value_grad(y, mult, pen)
        while True:
            cand = problem.project(y - gy / L)
            diff = cand - y
            fc, _, _ = problem.value_grad(cand, mult, pen)
            if fc <= fy + gy @ diff + 0.5 * L * (diff @ diff) + 1e-12 * abs(fy):
                break
            L *= 2.0
            if L > 1e18:
                break
        if fc > fz:   # momentum overshoot: restart from the last good point
            t = 1.0
            y = z.copy()
            fy, gy, _ = problem.value_grad(y, mult, pen)
            cand = problem.project(y - gy / L)
            fc, _, _ = problem.value_grad(cand, mult, pen)
        gap = np.linalg.norm(L * (z - problem.project(z - gz / L))) / np.sqrt(z.size)
        z_new = cand
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = z_new + ((t - 1.0) / t_new) * (z_new - z)
        z, t = z_new, t_new
        fz, gz, _ = problem.value_grad(z, mult, pen)
        if fz < best[0]:
            best = (fz, z.copy())
        if gap <= inner_tol:
            break
        L = max(L * 0.7, 1e-3)   # allow the local curvature estimate to relax
    return best[1]


def reference_oracle(graph: CouplingGraph, vtilde, config, *, tol=1e-8,
                     max_outer=40, c0=10.0, max_inner=4000):
    """Solve the inner convex problem independently of the ADMM engine.

    Returns an OracleResult whose objective is the same upper-bound functional
    solve_convex reports, so the two are directly comparable. Deterministic.
    """
    R, N, M = graph.channels.shape
    if R * N * M > 100:
        raise ConfigurationError("reference oracle is restricted to R*M*N <= 100")
    prob = _Problem(graph, vtilde, config)
    vtilde = np.asarray(vtilde, dtype=float)

    W = np.zeros((R, N, M), dtype=complex)
    v = vtilde.copy()
    _, _, g_soc, _, l1, l2 = prob.residuals(W, v, np.zeros((prob.D, M)))
    a = np.maximum(l1, l2) + 0.1
    v = np.maximum(v, g_soc + v + 0.1)   # start strictly inside the cone rows
    z = prob.pack(W, v, a)
    mult = {"soc": np.zeros((R, M)), "im": np.zeros((R, M)),
            "b": np.zeros((prob.D, M)), "c": np.zeros((prob.D, M))}
    pen = float(c0)
    kkt = np.inf
    prev_viol = np.inf
    outer = 0
    for outer in range(1, max_outer + 1):
        inner_tol = max(tol * 0.5, min(1e-4, kkt * 0.1 if np.isfinite(kkt) else 1e-4))
        z = _fista(prob, z, mult, pen, inner_tol, max_inner)
        W, v, a = prob.unpack(z)
        _, _, g_soc, g_im, l1, l2 = prob.residuals(W, v, a)
        mult["soc"] = np.maximum(mult["soc"] + pen * g_soc, 0.0)
        mult["im"] = mult["im"] + pen * g_im
        mult["b"] = np.maximum(mult["b"] + pen * l1, 0.0)
        mult["c"] = np.maximum(mult["c"] + pen * l2, 0.0)

        viol = max(g_soc.max(initial=0.0), np.abs(g_im).max(initial=0.0),
                   l1.max(initial=0.0), l2.max(initial=0.0), 0.0)
        comp = max(np.abs(mult["soc"] * g_soc).max(initial=0.0),
                   np.abs(mult["b"] * l1).max(initial=0.0),
                   np.abs(mult["c"] * l2).max(initial=0.0))
        _, grad, _ = prob.value_grad(z, mult, pen)
        L_probe = max(1.0, pen)
        stat = np.linalg.norm(L_probe * (z - prob.project(z - grad / L_probe))) / np.sqrt(z.size)
        kkt = max(stat, viol, comp)
        if kkt <= tol:
            break
        if viol > 0.25 * prev_viol:
            pen = min(pen * 4.0, 1e8)
        prev_viol = max(viol, 1e-300)

    objective = bound_objective(graph, vtilde, v, W, config.kappa)
    return OracleResult(objective=objective, v=v, W=W, a=a,
                        kkt=float(kkt), outer_iterations=outer)


# ------------------------------------------------------- randomized instances

def _instance_rng(seed, salt):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence((int(seed), 0xA11CE, salt))))


def _random_channels(gen, count, N, M):
    scale = gen.uniform(0.5, 1.5, size=(count, 1, M))
    return scale * (gen.standard_normal((count, N, M))
                    + 1j * gen.standard_normal((count, N, M))) / np.sqrt(2.0)


def random_star_instance(M, N, J, seed, config):
    """Deterministic random online-style instance: (graph, vtilde)."""
    from .graphs import star_graph

    gen = _instance_rng(seed, 1)
    H = _random_channels(gen, J + 1, N, M)
    prev = (gen.random(M) < 0.5).astype(float)
    graph = star_graph(H[0], H[1:], prev, config.reject_weight, config.switch_weight)
    vtilde = gen.uniform(0.0, 0.3, size=(J + 1, M))
    return graph, vtilde


def random_chain_instance(M, N, T, seed, config):
    """Deterministic random offline-style instance: (graph, vtilde)."""
    from .graphs import chain_graph

    gen = _instance_rng(seed, 2)
    H = _random_channels(gen, T, N, M)
    graph = chain_graph(H, config.reject_weight, config.switch_weight)
    vtilde = gen.uniform(0.0, 0.3, size=(T, M))
    return graph, vtilde


def equivalence_suite(config, *, n_star=20, n_chain=20, seed=0, rtol=1e-3):
    """Compare solve_convex against the oracle on random small instances.

    Star instances use M<=4, N<=3, J<=3; chains use M<=4, N<=3, T<=3. Returns
    a list of per-instance dicts with the relative objective gap and a pass
    flag at `rtol`.
    """
    from .admm import solve_convex

    results = []
    cases = [("star", i) for i in range(n_star)] + [("chain", i) for i in range(n_chain)]
    for kind, i in cases:
        gen = _instance_rng(seed, 3 + i if kind == "star" else 1003 + i)
        M = int(gen.integers(2, 5))
        N = int(gen.integers(2, 4))
        depth = int(gen.integers(1, 4))   # J for stars, T for chains
        if kind == "star":
            graph, vtilde = random_star_instance(M, N, depth, seed * 7919 + i, config)
        else:
            graph, vtilde = random_chain_instance(M, N, depth, seed * 7919 + i, config)
        res = solve_convex(graph, vtilde, config)
        ref = reference_oracle(graph, vtilde, config, tol=1e-8)
        gap = abs(res.objective - ref.objective) / max(1e-6, abs(ref.objective))
        results.append({"kind": kind, "index": i, "M": M, "N": N, "depth": depth,
                        "admm_objective": res.objective, "oracle_objective": ref.objective,
                        "oracle_kkt": ref.kkt, "rel_gap": gap, "ok": gap <= rtol})
    return results
