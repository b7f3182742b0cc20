"""Synchronous simulation of the distributed projected subgradient method.

Node ``m`` owns sensor ``m``: its atoms, its weight ``w_m`` and local
estimates of network-wide quantities. Sums over the network are obtained
by gossip averaging with Metropolis weights, after which every node runs
power iterations on its own copy of the weighted information.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .constraints import Constraint, Kind, power_min_eig
from .errors import ConfigError
from .solvers import SolverTrace, SubgradientParams, projected_subgradient


@dataclass(frozen=True)
class Topology:
    M: int
    edges: tuple
    W: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, edges, M):
        edges = tuple(sorted({(min(i, j), max(i, j)) for i, j in edges}))
        return cls(M, edges, metropolis_weights(edges, M))

    @classmethod
    def complete(cls, M):
        return cls.from_edges([(i, j) for i in range(M) for j in range(i + 1, M)], M)

    @classmethod
    def ring(cls, M):
        return cls.from_edges([(i, (i + 1) % M) for i in range(M)], M)


def load_edges(path) -> list:
    """Edge list file: one ``i j`` pair per line, 0-indexed; ``#`` starts a comment."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'i j'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: node ids must be integers")
    return edges


def metropolis_weights(edges, M) -> np.ndarray:
    """W_ij = 1 / (1 + max(deg_i, deg_j)) on edges; the diagonal takes the rest."""
    if M < 1:
        raise ConfigError("topology needs at least one node")
    E = sorted({(min(i, j), max(i, j)) for i, j in edges if i != j})
    for i, j in E:
        if not (0 <= i < M and 0 <= j < M):
            raise ConfigError(f"edge ({i}, {j}) references a node outside 0..{M - 1}")
    if M > 1:
        rows = [i for i, _ in E] + [j for _, j in E]
        cols = [j for _, j in E] + [i for i, _ in E]
        A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(M, M))
        n, _ = connected_components(A, directed=False)
        if n > 1:
            raise ConfigError(f"topology is disconnected ({n} components)")
    deg = np.zeros(M, dtype=int)
    for i, j in E:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((M, M))
    for i, j in E:
        W[i, j] = W[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    W[np.diag_indices(M)] = 1.0 - W.sum(axis=1)
    return W


def gossip_average(values, W, R: int):
    """Apply ``R`` synchronous rounds of ``x <- W x`` to every entry.

    ``values`` has one leading row per node; any trailing shape is allowed.
    """
    if R < 0:
        raise ConfigError("gossip rounds must be >= 0")
    x = np.asarray(values, dtype=float)
    flat = x.reshape(x.shape[0], -1)
    for _ in range(R):
        flat = W @ flat
    return flat.reshape(x.shape)


def power_eig(S):
    """Per-block eigen routine shared by the simulated nodes and the reference run."""
    return power_min_eig(S, strict=False)


@dataclass
class DistributedResult:
    w_final: np.ndarray  # entry m is node m's last iterate
    w_best: np.ndarray  # entry m is node m's weight at its best feasible iterate
    trace: SolverTrace
    divergence_events: list  # iterations where the nodes' branch decisions differed
    stalled_iterations: list  # iterations where some node had a zero ||g||^2 estimate
    centralized_w: np.ndarray
    centralized_trace: SolverTrace
    max_iterate_deviation: float  # max_k ||w_dist^k - w_cent^k||_inf
    objective_gap: float  # |1^T w_best - f_best centralized| / f_best centralized

    def summary(self):
        return {
            "objective": float(self.w_best.sum()),
            "centralized_objective": float(self.centralized_w.sum()),
            "objective_gap": self.objective_gap,
            "max_iterate_deviation": self.max_iterate_deviation,
            "divergence_events": len(self.divergence_events),
            "stalled_iterations": len(self.stalled_iterations),
        }


def run_distributed(atoms, constraint: Constraint, topology: Topology, R: int,
                    params: SubgradientParams | None = None) -> DistributedResult:
    """Run the gossip-based projected subgradient and a centralized reference.

    Every iteration each node (i) gossips ``w_m F_m`` and rescales by M,
    (ii) finds the worst grid point by local power iterations, (iii) gossips
    ``g_m^2`` and ``w_m`` to estimate ``||g||^2`` and ``1^T w``, then (iv)
    updates its own weight with its local branch decision.
    """
    if constraint.kind is not Kind.MIN_EIG:
        raise ConfigError("distributed simulation supports the min-eigenvalue constraint only")
    p = params or SubgradientParams()
    M, D, N = atoms.shape[0], atoms.shape[1], atoms.shape[-1]
    if topology.M != M:
        raise ConfigError(f"topology has {topology.M} nodes but there are {M} sensors")
    W = topology.W
    lam_t = constraint.threshold

    w = np.ones(M)
    f_best = np.full(M, math.inf)
    w_best = np.full(M, np.nan)
    trace = SolverTrace(iterates=[])
    events = []
    stalled = []

    for k in range(p.k_max + 1):
        trace.iterates.append(w.copy())
        S = gossip_average(w[:, None, None, None] * atoms, W, R) * M
        if constraint.prior is not None:
            S = S + constraint.prior
        lam = np.empty(M)
        g = np.empty(M)
        for m in range(M):
            pairs = [power_eig(S[m, d]) for d in range(D)]
            vals = np.array([q[0] for q in pairs])
            d = int(np.argmin(vals))
            v = pairs[d][1]
            lam[m] = vals[d]
            g[m] = v @ atoms[m, d] @ v
        gg = gossip_average(g**2, W, R) * M
        card = gossip_average(w, W, R) * M
        feasible = lam - lam_t >= 0
        if feasible.any() and not feasible.all():
            events.append(k)
        better = feasible & (card < f_best)
        f_best[better] = card[better]
        w_best[better] = w[better]
        trace.record(w.sum(), lam[0], feasible[0], 0.0)
        if k == p.k_max:
            break

        alpha = np.empty(M)
        alpha[feasible] = 1.0 / math.sqrt(k + 1)
        inf = ~feasible
        if inf.any():
            if p.known_card is not None:
                eps = np.full(M, float(p.known_card))
            else:
                eps = np.where(np.isfinite(f_best), f_best, float(M)) + 10.0 / (10.0 + k)
            num = lam + eps if p.step_rule == "estimated" else lam_t - lam
            # a node whose estimate of ||g||^2 is zero cannot size a step and holds
            stuck = inf & (gg <= 0.0)
            if stuck.any():
                stalled.append(k)
            ok = inf & ~stuck
            alpha[ok] = num[ok] / gg[ok]
            alpha[stuck] = 0.0
        trace.step[-1] = float(alpha[0])
        w = np.clip(np.where(feasible, w - alpha, w + alpha * g), 0.0, 1.0)

    trace.iterations = p.k_max
    trace.w_last = w.copy()
    w_best = np.where(np.isnan(w_best), w, w_best)
    trace.f_best = float(w_best.sum())

    cw, ctr = projected_subgradient(atoms, constraint, p, eig=power_eig, keep_iterates=True)
    dev = max(float(np.max(np.abs(a - b))) for a, b in zip(trace.iterates, ctr.iterates))
    ref = float(cw.sum())
    gap = abs(float(w_best.sum()) - ref) / ref if ref > 0 else abs(float(w_best.sum()))
    return DistributedResult(w, w_best, trace, events, stalled, cw, ctr, dev, gap)
