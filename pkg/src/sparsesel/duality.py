"""Dual certificates for the relaxed min-eigenvalue selection problem.

For weights ``u`` the dual of ``min u^T w  s.t.  sum_m w_m F_m + J_p - lam I >= 0,
0 <= w <= 1`` is

    max  lam tr(Z) - tr(J_p Z) - 1^T mu
    s.t. tr(F_m Z) <= u_m + mu_m,  Z >= 0,  mu >= 0,

with Z block diagonal (one N x N block per grid point). Any dual-feasible
pair bounds every primal-feasible objective from below.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, Kind
from .errors import ConfigError, InfeasibleError


@dataclass
class DualCertificate:
    Z: np.ndarray  # (D, N, N)
    mu: np.ndarray  # (M,)
    threshold: float
    prior: np.ndarray | None = None
    weights: np.ndarray | None = None
    t: float | None = field(default=None)

    @property
    def bound(self) -> float:
        return dual_bound(self)

    def to_dict(self):
        return {
            "bound": self.bound,
            "threshold": self.threshold,
            "t": self.t,
            "mu": self.mu.tolist(),
            "Z": self.Z.tolist(),
        }


def dual_bound(cert: DualCertificate) -> float:
    Zsum = cert.Z.sum(axis=0)
    b = cert.threshold * float(np.trace(Zsum)) - float(np.sum(cert.mu))
    if cert.prior is not None:
        b -= float(np.sum(cert.prior * Zsum))
    return b


def trace_products(atoms, Z) -> np.ndarray:
    """tr(F_m Z) summed over grid-point blocks, one entry per sensor."""
    return np.einsum("mdij,dji->m", atoms, Z)


def check_dual_feasible(cert: DualCertificate, atoms, tol: float = 1e-8) -> bool:
    if np.any(cert.mu < 0):
        return False
    for Zd in cert.Z:
        if np.linalg.eigvalsh(0.5 * (Zd + Zd.T))[0] < -1e-10:
            return False
    u = np.ones(atoms.shape[0]) if cert.weights is None else cert.weights
    return bool(np.all(trace_products(atoms, cert.Z) <= u + cert.mu + tol))


def certificate_from_barrier(w, atoms, constraint: Constraint, t: float, weights=None) -> DualCertificate:
    """Recover (Z, mu) from a point on (or near) the barrier central path.

    Z_d = S_d^{-1} / t with S_d the shifted information at point d; mu is
    raised just enough to make every sensor inequality hold.
    """
    if constraint.kind is not Kind.MIN_EIG:
        raise ConfigError("dual certificates exist for the min-eigenvalue constraint only")
    if not t > 0:
        raise ConfigError("barrier parameter must be > 0")
    w = np.asarray(w, dtype=float)
    N = atoms.shape[-1]
    S = np.einsum("m,mdij->dij", w, atoms) - constraint.threshold * np.eye(N)
    if constraint.prior is not None:
        S = S + constraint.prior
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise InfeasibleError("selection is not strictly feasible; no certificate")
    Z = np.linalg.inv(S) / t
    Z = 0.5 * (Z + np.swapaxes(Z, 1, 2))
    u = np.ones(len(w)) if weights is None else np.asarray(weights, dtype=float)
    mu = np.maximum(0.0, trace_products(atoms, Z) - u)
    return DualCertificate(Z, mu, constraint.threshold, constraint.prior,
                           None if weights is None else u, t)
