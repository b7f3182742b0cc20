"""Boolean recovery from relaxed selections, plus an exhaustive oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .constraints import Constraint, is_feasible, point_margins
from .errors import ConfigError, OracleRefusal, RoundingError


@dataclass
class RoundingParams:
    L: int = 100
    max_batches: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.L < 1 or self.max_batches < 1:
            raise ConfigError("rounding needs L >= 1 and max_batches >= 1")


def _index_key(w):
    """Sort key: cardinality, then the selected index set lexicographically."""
    idx = tuple(np.flatnonzero(w))
    return len(idx), idx


def _draw(w, seed, index):
    # one stream per candidate index so batching never changes the draws
    rng = np.random.default_rng([seed, index])
    return (rng.random(len(w)) < w).astype(float)


def randomized_round(w_relaxed, atoms, constraint: Constraint, params: RoundingParams | None = None):
    """Sample Bernoulli(w) candidates and keep the sparsest feasible one.

    Batches of ``L`` candidates are drawn until one is feasible or
    ``max_batches`` is exhausted.
    """
    p = params or RoundingParams()
    w = np.asarray(w_relaxed, dtype=float)
    if np.any(w < 0) or np.any(w > 1):
        raise ConfigError("relaxed selection must lie in [0, 1]")

    best_margin, best_cand = -math.inf, None
    for b in range(p.max_batches):
        cands = [_draw(w, p.seed, b * p.L + l) for l in range(p.L)]
        feasible = [c for c in cands if is_feasible(atoms, c, constraint)]
        if feasible:
            return min(feasible, key=_index_key)
        for c in cands:
            m = float(np.min(point_margins(atoms, c, constraint)))
            if m > best_margin:
                best_margin, best_cand = m, c
    raise RoundingError(
        f"no feasible candidate in {p.max_batches} batches of {p.L} (best margin {best_margin:.4g})",
        best_margin=best_margin, best_candidate=best_cand,
    )


def simple_round(w_relaxed):
    """Nearest integer per entry; 0.5 rounds up. Feasibility is not checked."""
    return (np.asarray(w_relaxed, dtype=float) >= 0.5).astype(float)


def brute_force_min_card(atoms, constraint: Constraint, M_cap: int = 20):
    """Smallest feasible subset by exhaustive enumeration.

    Subsets are visited by increasing size, lexicographically within a
    size. Returns ``(w, k)``, or ``(None, None)`` when even the full set is
    infeasible.
    """
    M = atoms.shape[0]
    if M > M_cap:
        raise OracleRefusal(f"brute force over 2^{M} subsets refused (cap M <= {M_cap})")
    if not is_feasible(atoms, np.ones(M), constraint):
        return None, None
    for k in range(0, M + 1):
        for idx in itertools.combinations(range(M), k):
            w = np.zeros(M)
            w[list(idx)] = 1.0
            if is_feasible(atoms, w, constraint):
                return w, k
    return None, None  # unreachable: the full set passed above
