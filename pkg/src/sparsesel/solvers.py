"""Relaxed sensor selection: projected subgradient, projected Newton
barrier, and the reweighted (log-surrogate) outer loop.

All solvers minimize ``u^T w`` over the box ``[0, 1]^M`` subject to the
accuracy constraint at every grid point; ``u`` defaults to ``1_M``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, Kind, eval_constraint
from .duality import certificate_from_barrier
from .errors import ConfigError, InfeasibleError, NumericalError, SelectionError, StallError

log = logging.getLogger(__name__)


@dataclass
class SubgradientParams:
    k_max: int = 1000
    known_card: float | None = None  # 1^T w* when the sensor count is known
    step_rule: str = "estimated"  # "estimated" | "polyak"
    seed: int = 0  # reserved

    def __post_init__(self):
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if self.step_rule not in ("estimated", "polyak"):
            raise ConfigError(f"unknown step rule {self.step_rule!r}")


@dataclass
class BarrierParams:
    t0: float = 1.0
    mu: float = 10.0
    gap_tol: float = 1e-4
    newton_tol: float = 1e-12
    grad_tol: float = 1e-10  # free-coordinate gradient / t at a centered point
    ls_alpha: float = 0.3
    ls_beta: float = 0.5
    max_newton: int = 200

    def __post_init__(self):
        if not self.t0 > 0 or not self.mu > 1:
            raise ConfigError("need t0 > 0 and mu > 1")
        if not (self.gap_tol > 0 and self.newton_tol > 0 and self.grad_tol > 0):
            raise ConfigError("tolerances must be > 0")
        if not (0 < self.ls_alpha < 0.5 and 0 < self.ls_beta < 1):
            raise ConfigError("line search needs 0 < alpha < 0.5, 0 < beta < 1")


@dataclass
class ReweightParams:
    i_max: int = 10
    delta: float = 1e-8
    inner: str = "barrier"  # "barrier" | "subgradient"

    def __post_init__(self):
        if self.i_max < 0:
            raise ConfigError("i_max must be >= 0")
        if not self.delta > 0:
            raise ConfigError("delta must be > 0")
        if self.inner not in ("barrier", "subgradient"):
            raise ConfigError(f"unknown inner solver {self.inner!r}")


@dataclass
class SolverTrace:
    objective: list = field(default_factory=list)
    value: list = field(default_factory=list)
    feasible: list = field(default_factory=list)
    step: list = field(default_factory=list)
    iterates: list | None = None
    gaps: list = field(default_factory=list)  # barrier: certificate gap per stage
    f_best: float = math.inf
    w_last: np.ndarray | None = None
    iterations: int = 0
    outer: list = field(default_factory=list)  # reweighting: one summary per round
    certificate: object = None

    def record(self, objective, value, feasible, step):
        self.objective.append(float(objective))
        self.value.append(float(value))
        self.feasible.append(bool(feasible))
        self.step.append(float(step))

    def summary(self):
        out = {"iterations": self.iterations, "f_best": self.f_best}
        if self.gaps:
            out["gaps"] = list(self.gaps)
        if self.outer:
            out["outer"] = list(self.outer)
        return out


def box_project(w):
    return np.clip(np.asarray(w, dtype=float), 0.0, 1.0)


# --------------------------------------------------------------- subgradient

def _evaluate(atoms, w, constraint, eig):
    """(margin, ascent direction, value) with a fallback on singular blocks."""
    try:
        ev = eval_constraint(atoms, w, constraint, eig=eig)
        return ev.margin, ev.ascent, ev.value
    except InfeasibleError:
        # trace/log-det undefined on a singular block: push along the
        # min-eigenvalue supergradient until the information is full rank
        ev = eval_constraint(atoms, w, Constraint(Kind.MIN_EIG, 1.0, constraint.prior), eig=eig)
        return -math.inf, ev.gradient, math.inf if constraint.kind is Kind.TRACE else -math.inf


def projected_subgradient(atoms, constraint: Constraint, params: SubgradientParams | None = None,
                          weights=None, eig=None, keep_iterates=False):
    """Projected subgradient method started from ``w = 1_M``.

    Feasible iterates step along ``-u`` with length ``1/sqrt(k+1)``;
    infeasible ones step along the constraint (super)gradient with a Polyak
    length. Returns the best feasible iterate seen (lowest ``u^T w``); the
    final iterate is kept in ``trace.w_last``.
    """
    params = params or SubgradientParams()
    M = atoms.shape[0]
    u = np.ones(M) if weights is None else np.asarray(weights, dtype=float)
    w = np.ones(M)
    trace = SolverTrace(iterates=[] if keep_iterates else None)
    f_best = math.inf
    w_best = None

    for k in range(params.k_max + 1):
        if keep_iterates:
            trace.iterates.append(w.copy())
        margin, g, value = _evaluate(atoms, w, constraint, eig)
        obj = float(u @ w)
        feasible = margin >= 0
        if feasible and obj < f_best:
            f_best, w_best = obj, w.copy()
        if k == params.k_max:
            trace.record(obj, value, feasible, 0.0)
            break

        if feasible:
            alpha = 1.0 / math.sqrt(k + 1)
            w = box_project(w - alpha * u)
        else:
            gg = float(g @ g)
            if gg == 0.0:
                raise StallError(f"zero constraint subgradient at infeasible iterate {k}", iterate=w.copy())
            if params.known_card is not None:
                eps = params.known_card
            else:
                eps = (f_best if math.isfinite(f_best) else float(u.sum())) + 10.0 / (10.0 + k)
            if constraint.kind is Kind.MIN_EIG and params.step_rule == "estimated":
                alpha = (value + eps) / gg
            elif math.isfinite(margin):
                alpha = -margin / gg
            else:
                alpha = eps / gg
            w = box_project(w + alpha * g)
        trace.record(obj, value, feasible, alpha)

    trace.iterations = params.k_max
    trace.f_best = f_best
    trace.w_last = w.copy()
    if w_best is None:
        log.warning("projected subgradient found no feasible iterate")
        return w, trace
    return w_best, trace


# ------------------------------------------------------------------- barrier

class _Barrier:
    """psi(w) = t u^T w - sum_d ln det S_d(w), S_d = sum_m w_m F_md + J_p - lam I."""

    def __init__(self, atoms, constraint, u):
        self.atoms = atoms
        self.u = u
        N = atoms.shape[-1]
        self.shift = -constraint.threshold * np.eye(N)
        if constraint.prior is not None:
            self.shift = self.shift + constraint.prior

    def S(self, w):
        return np.einsum("m,mdij->dij", w, self.atoms) + self.shift

    def logdet(self, w):
        try:
            L = np.linalg.cholesky(self.S(w))
        except np.linalg.LinAlgError:
            return None
        return 2.0 * float(np.log(np.diagonal(L, axis1=1, axis2=2)).sum())

    def value(self, w, t):
        ld = self.logdet(w)
        return math.inf if ld is None else t * float(self.u @ w) - ld

    def derivatives(self, w, t):
        L = np.linalg.cholesky(self.S(w))
        Linv = np.linalg.inv(L)  # (D, N, N)
        # G_md = L_d^-1 F_md L_d^-T; tr(S^-1 F) = tr(G), tr(S^-1 F_i S^-1 F_j) = <G_i, G_j>
        G = np.einsum("dij,mdjk,dlk->mdil", Linv, self.atoms, Linv)
        grad = t * self.u - np.einsum("mdii->m", G)
        Gf = G.reshape(G.shape[0], -1)
        H = Gf @ Gf.T
        return grad, H, G


def _free_direction(H, grad, free, w):
    d = np.zeros_like(grad)
    if not free.any():
        return d
    Hf = H[np.ix_(free, free)]
    try:
        C = np.linalg.cholesky(Hf)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * max(float(np.max(np.diag(Hf))), 1e-300)
        try:
            C = np.linalg.cholesky(Hf + ridge * np.eye(len(Hf)))
        except np.linalg.LinAlgError:
            raise NumericalError("Newton system factorization failed", iterate=w.copy())
    d[free] = -np.linalg.solve(C.T, np.linalg.solve(C, grad[free]))
    return d


def _center(bar: _Barrier, w, t, p: BarrierParams):
    """Minimize psi(., t) over the box by damped projected Newton steps.

    Coordinates held at a bound by their gradient are fixed; the Newton
    step on the remaining ones is cut back to the box boundary.
    """
    w = w.copy()
    for it in range(1, p.max_newton + 1):
        grad, H, G = bar.derivatives(w, t)
        free = ~(((w <= 0.0) & (grad > 0)) | ((w >= 1.0) & (grad < 0)))
        while True:
            d = _free_direction(H, grad, free, w)
            blocked = free & (((w <= 0.0) & (d < 0)) | ((w >= 1.0) & (d > 0)))
            if not blocked.any():
                break
            free &= ~blocked
        slope = float(grad @ d)
        # the decrement alone is scale-blind: a tiny slope can hide a free
        # gradient of order t * 1e-8, which feeds straight into the dual gap
        resid = float(np.max(np.abs(grad[free]), initial=0.0)) / t
        if slope >= 0 or (-slope / 2 <= p.newton_tol and resid <= p.grad_tol):
            return w, it

        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d < 0, -w / d, np.where(d > 0, (1.0 - w) / d, np.inf))
        a_max = float(np.min(room))
        alpha = min(1.0, a_max)
        # psi(w + a d) - psi(w) = t a u^T d - sum_d sum_i log1p(a e_di),
        # e_d = eigenvalues of L_d^-1 (sum_m d_m F_md) L_d^-T
        e = np.linalg.eigvalsh(np.einsum("m,mdij->dij", d, G))
        ud = float(bar.u @ d)
        while True:
            step = alpha * e
            if np.all(step > -1.0):
                dpsi = t * alpha * ud - float(np.log1p(step).sum())
                if dpsi <= p.ls_alpha * alpha * slope:
                    w_new = w + alpha * d
                    if alpha == a_max:
                        hit = np.argmin(room)
                        w_new[hit] = 0.0 if d[hit] < 0 else 1.0
                    np.clip(w_new, 0.0, 1.0, out=w_new)
                    # the log1p test can pass where S is numerically singular
                    if bar.logdet(w_new) is not None:
                        break
            alpha *= p.ls_beta
            if alpha < 1e-20:
                log.debug("line search failed at t=%g", t)
                return w, it
        w = w_new
    log.debug("centering hit max_newton=%d at t=%g", p.max_newton, t)
    return w, p.max_newton


def barrier_newton(atoms, constraint: Constraint, params: BarrierParams | None = None, weights=None):
    """Projected Newton barrier method for the min-eigenvalue constraint.

    Returns ``(w, certificate, trace)``; the certificate is recovered from
    the final central point.
    """
    if constraint.kind is not Kind.MIN_EIG:
        raise ConfigError("barrier solver supports the min-eigenvalue constraint only")
    p = params or BarrierParams()
    M, D, N = atoms.shape[0], atoms.shape[1], atoms.shape[-1]
    u = np.ones(M) if weights is None else np.asarray(weights, dtype=float)
    bar = _Barrier(atoms, constraint, u)
    w = np.ones(M)
    if bar.logdet(w) is None:
        raise InfeasibleError("full selection does not strictly satisfy the constraint")

    trace = SolverTrace()
    t = p.t0
    total = 0
    while True:
        w, its = _center(bar, w, t, p)
        total += its
        cert = certificate_from_barrier(w, atoms, constraint, t, weights=u if weights is not None else None)
        obj = float(u @ w)
        trace.gaps.append(obj - cert.bound)
        trace.record(obj, float(np.min(np.linalg.eigvalsh(bar.S(w)))) + constraint.threshold, True, t)
        if D * N / t < p.gap_tol:
            break
        t *= p.mu
    trace.iterations = total
    trace.f_best = float(u @ w)
    trace.w_last = w.copy()
    return w, cert, trace


# ---------------------------------------------------------------- reweighting

def reweighted_solve(atoms, constraint: Constraint, params: ReweightParams | None = None,
                     inner_params=None):
    """Iteratively reweighted l1 (log-surrogate) selection.

    Round ``i`` solves the weighted problem with ``u[i]`` and sets
    ``u[i+1] = 1 / (delta + w[i])``. ``i_max = 0`` is the plain l1 solve.
    """
    p = params or ReweightParams()
    u = np.ones(atoms.shape[0])
    trace = SolverTrace()
    w = cert = None
    for i in range(p.i_max + 1):
        try:
            if p.inner == "barrier":
                w, cert, inner = barrier_newton(atoms, constraint, inner_params, weights=u)
            else:
                w, inner = projected_subgradient(atoms, constraint, inner_params, weights=u)
        except SelectionError as exc:
            exc.args = (f"reweighting round {i}: {exc}",) + exc.args[1:]
            raise
        trace.iterations += inner.iterations
        summary = {"round": i, "l1": float(w.sum()), "support": int(np.sum(w > 1e-6)),
                   "inner_iterations": inner.iterations}
        if p.inner == "barrier":
            summary["weighted_objective"] = float(u @ w)
            summary["dual_bound"] = cert.bound
        trace.outer.append(summary)
        trace.objective.append(float(w.sum()))
        u = 1.0 / (p.delta + w)
    trace.f_best = float(w.sum())
    trace.w_last = w.copy()
    trace.certificate = cert
    return w, trace
