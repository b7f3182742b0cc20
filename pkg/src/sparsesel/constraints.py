"""Accuracy thresholds and the three performance constraints.

A constraint is enforced at every grid point. Evaluations report the worst
grid point together with a (super)gradient taken at that point, which is a
valid (super)gradient of the min/max over points.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError, ConvergenceError, InfeasibleError


class Kind(str, enum.Enum):
    MIN_EIG = "mineig"
    TRACE = "trace"
    LOG_DET = "logdet"


@dataclass(frozen=True)
class AccuracySpec:
    """Require Pr(||error|| <= radius) >= prob.

    ``mean_radius`` is only used by the log-det threshold.
    """

    radius: float
    prob: float
    N: int = 2
    mean_radius: float | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("radius must be > 0")
        if not 0 < self.prob < 1:
            raise ConfigError("probability must lie in (0, 1)")
        if self.N < 1:
            raise ConfigError("N must be >= 1")


@dataclass(frozen=True)
class Constraint:
    kind: Kind
    threshold: float
    prior: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.MIN_EIG, Kind.TRACE) and not self.threshold > 0:
            raise ConfigError(f"{self.kind.value} threshold must be > 0")
        if self.prior is not None:
            J = np.asarray(self.prior, dtype=float)
            if J.ndim != 2 or J.shape[0] != J.shape[1]:
                raise ConfigError("prior must be a square matrix")
            if not np.allclose(J, J.T, atol=1e-12):
                raise ConfigError("prior must be symmetric")
            if np.linalg.eigvalsh(J)[0] < -1e-10:
                raise ConfigError("prior must be positive semidefinite")
            object.__setattr__(self, "prior", J)


@dataclass
class ConstraintEval:
    value: float  # lambda_min, tr(S^-1) or ln det at the worst point
    gradient: np.ndarray  # d value / d w at the worst point
    worst_point: int
    margin: float  # >= 0 iff feasible
    eigvector: np.ndarray | None = None

    @property
    def ascent(self):
        """Direction that increases the margin."""
        return self.gradient


def chi2_quantile(prob: float, dof: int) -> float:
    """Inverse chi-squared CDF (closed form for two degrees of freedom)."""
    if not 0 < prob < 1:
        raise ConfigError("probability must lie in (0, 1)")
    if dof == 2:
        return -2.0 * math.log1p(-prob)
    return float(chi2.ppf(prob, dof))


def thresholds(spec: AccuracySpec, kind) -> float:
    kind = Kind(kind)
    if kind is Kind.TRACE:
        return (1 - spec.prob) * spec.radius**2
    if kind is Kind.MIN_EIG:
        return spec.N / spec.radius**2 / (1 - spec.prob)
    if spec.mean_radius is None:
        raise ConfigError("log-det threshold needs mean_radius")
    xi = chi2_quantile(spec.prob, spec.N)
    return 2 * spec.N * math.log(math.sqrt(xi) / spec.mean_radius)


# ---------------------------------------------------------------- eigenpairs

def _start_vector(n):
    # e1 plus a small generic tail: an exact e1 start stalls on diagonal
    # matrices where e1 is itself an eigenvector
    v = np.full(n, 1e-3 / math.pi)
    v[0] = 1.0
    return v / np.linalg.norm(v)


def _power(A, v, atol, max_iter):
    """Dominant eigenpair of symmetric A; returns (lam, v, iters, converged)."""
    lam = float(v @ A @ v)
    for it in range(1, max_iter + 1):
        Av = A @ v
        nrm = np.linalg.norm(Av)
        if nrm == 0.0:
            return 0.0, v, it, True
        v = Av / nrm
        Av = A @ v
        lam = float(v @ Av)
        if np.linalg.norm(Av - lam * v) <= atol:
            return lam, v, it, True
    return lam, v, max_iter, False


def power_min_eig(S, tol: float = 1e-10, max_iter: int = 10_000, strict: bool = True):
    """Smallest eigenpair of symmetric ``S`` by shifted power iterations.

    First estimates lambda_max, then iterates on ``lambda_max I - S``, whose
    dominant eigenvalue is ``lambda_max - lambda_min``. Converged when
    ``||S v - lambda v|| <= tol * (1 + |lambda_max|)``. With ``strict=False``
    the last iterate is returned instead of raising on budget exhaustion.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if n == 1:
        return float(S[0, 0]), np.ones(1)
    v0 = _start_vector(n)
    lam_max, _, _, _ = _power(S, v0, tol * (1 + np.abs(S).sum(axis=1).max()), max_iter)
    for _ in range(n + 1):
        atol = tol * (1 + abs(lam_max))
        mu, v, _, ok = _power(lam_max * np.eye(n) - S, v0, atol, max_iter)
        if mu >= -atol:
            break
        # the estimate sat below lambda_max (power iterations lock onto the
        # eigenvalue largest in magnitude); v exposes a larger eigenvalue
        lam_max -= mu
    lam_min = float(v @ S @ v)
    resid = float(np.linalg.norm(S @ v - lam_min * v))
    if strict and (not ok or resid > 2 * atol):
        raise ConvergenceError(
            f"power iterations did not converge (residual {resid:.3e})",
            iterate=(lam_min, v),
        )
    return lam_min, v


def min_eig(S):
    """Smallest eigenpairs of a stack of symmetric matrices (..., N, N).

    2x2 blocks use the closed form; larger blocks fall back to eigh.
    """
    S = np.asarray(S, dtype=float)
    if S.shape[-1] != 2:
        ev, V = np.linalg.eigh(S)
        return ev[..., 0], V[..., :, 0]
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    half_tr = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    lam = half_tr - rad
    # eigenvector of [[a, b], [b, c]] for lam: pick the better-conditioned row
    v1 = np.stack([b, lam - a], axis=-1)
    v2 = np.stack([lam - c, b], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    use1 = (n1 >= n2)[..., None]
    v = np.where(use1, v1, v2)
    nv = np.maximum(n1, n2)[..., None]
    # repeated eigenvalue (S = c I): any unit vector works, take e1
    degenerate = (nv[..., 0] <= 1e-14 * np.maximum(np.abs(half_tr), 1e-300))
    v = np.where(degenerate[..., None], np.array([1.0, 0.0]), v / np.where(nv == 0, 1, nv))
    return lam, v


# ------------------------------------------------------------------ evaluate

def _stack(atoms, w, prior):
    S = np.einsum("m,mdij->dij", np.asarray(w, dtype=float), atoms)
    if prior is not None:
        S = S + prior
    return S


def eval_constraint(atoms, w, c: Constraint, eig=None) -> ConstraintEval:
    """Evaluate ``c`` at selection ``w`` over all grid points.

    ``eig`` optionally replaces the per-block smallest-eigenpair routine
    (signature ``S -> (lam, v)`` for one N x N block).
    """
    S = _stack(atoms, w, c.prior)
    if c.kind is Kind.MIN_EIG:
        if eig is None:
            lam, V = min_eig(S)
            d = int(np.argmin(lam))  # argmin picks the lowest index on ties
            lam_d, v = float(lam[d]), V[d]
        else:
            pairs = [eig(Sd) for Sd in S]
            lam = np.array([p[0] for p in pairs])
            d = int(np.argmin(lam))
            lam_d, v = float(lam[d]), np.asarray(pairs[d][1])
        g = np.einsum("i,mij,j->m", v, atoms[:, d], v)
        return ConstraintEval(lam_d, g, d, lam_d - c.threshold, v)

    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        bad = _first_singular(S)
        raise InfeasibleError(f"information matrix singular at grid point {bad}", point=bad)
    Sinv = np.linalg.inv(S)
    if c.kind is Kind.TRACE:
        tr = np.trace(Sinv, axis1=1, axis2=2)
        d = int(np.argmax(tr))
        Si = Sinv[d]
        # d tr(S^-1)/dw_m = -tr(S^-1 F_m S^-1)
        g = -np.einsum("ij,mjk,ki->m", Si, atoms[:, d], Si)
        return _TraceEval(float(tr[d]), g, d, c.threshold - float(tr[d]))
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    d = int(np.argmin(logdet))
    g = np.einsum("ij,mji->m", Sinv[d], atoms[:, d])
    return ConstraintEval(float(logdet[d]), g, d, float(logdet[d]) - c.threshold)


class _TraceEval(ConstraintEval):
    @property
    def ascent(self):
        return -self.gradient


def _first_singular(S):
    for d, Sd in enumerate(S):
        try:
            np.linalg.cholesky(Sd)
        except np.linalg.LinAlgError:
            return d
    return None


def point_margins(atoms, w, c: Constraint) -> np.ndarray:
    """Signed slack per grid point; -inf where S_d is singular (trace/log-det)."""
    S = _stack(atoms, w, c.prior)
    if c.kind is Kind.MIN_EIG:
        lam, _ = min_eig(S)
        return lam - c.threshold
    out = np.full(len(S), -np.inf)
    for d, Sd in enumerate(S):
        try:
            L = np.linalg.cholesky(Sd)
        except np.linalg.LinAlgError:
            continue
        if c.kind is Kind.TRACE:
            Linv = np.linalg.inv(L)
            out[d] = c.threshold - float(np.sum(Linv**2))
        else:
            out[d] = 2.0 * float(np.log(np.diag(L)).sum()) - c.threshold
    return out


def is_feasible(atoms, w, c: Constraint) -> bool:
    """True iff the constraint holds at every grid point.

    Stops at the first violated point.
    """
    w = np.asarray(w, dtype=float)
    for d in range(atoms.shape[1]):
        Sd = np.einsum("m,mij->ij", w, atoms[:, d])
        if c.prior is not None:
            Sd = Sd + c.prior
        if c.kind is Kind.MIN_EIG:
            lam, _ = min_eig(Sd)
            if lam < c.threshold:
                return False
            continue
        try:
            L = np.linalg.cholesky(Sd)
        except np.linalg.LinAlgError:
            return False
        if c.kind is Kind.TRACE:
            if np.sum(np.linalg.inv(L) ** 2) > c.threshold:
                return False
        elif 2.0 * np.log(np.diag(L)).sum() < c.threshold:
            return False
    return True
