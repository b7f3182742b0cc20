import numpy as np
import pytest

from sparsesel import (BarrierParams, ConfigError, Constraint, InfeasibleError, ReweightParams, StallError,
                       SubgradientParams, barrier_newton, box_project, check_dual_feasible, eval_constraint,
                       is_feasible, projected_subgradient, reweighted_solve)

from conftest import random_range_instance

cp = pytest.importorskip("cvxpy")


def cvx_relaxed(atoms, lam, u=None):
    """Independent SDP oracle for min u^T w over the box and the per-point LMIs."""
    M, D, N = atoms.shape[0], atoms.shape[1], atoms.shape[-1]
    u = np.ones(M) if u is None else u
    w = cp.Variable(M)
    cons = [w >= 0, w <= 1]
    for d in range(D):
        S = sum(w[m] * atoms[m, d] for m in range(M)) - lam * np.eye(N)
        cons.append((S + S.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(u @ w), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_box_project():
    assert np.allclose(box_project([-0.5, 0.3, 1.7]), [0, 0.3, 1])
    w = np.array([0.0, 0.2, 1.0])
    assert np.array_equal(box_project(w), w)
    x = np.array([-3.0, 0.5, 2.0])
    assert np.array_equal(box_project(box_project(x)), box_project(x))


def test_params_validation():
    with pytest.raises(ConfigError):
        SubgradientParams(k_max=0)
    with pytest.raises(ConfigError):
        SubgradientParams(step_rule="armijo")
    with pytest.raises(ConfigError):
        BarrierParams(mu=1.0)
    with pytest.raises(ConfigError):
        BarrierParams(ls_alpha=0.5)
    with pytest.raises(ConfigError):
        ReweightParams(delta=0.0)
    with pytest.raises(ConfigError):
        ReweightParams(inner="admm")


# --------------------------------------------------------------- subgradient

@pytest.mark.parametrize("rule", ["estimated", "polyak"])
def test_subgradient_t1(t1, rule):
    c = Constraint("mineig", 1.0)
    w, tr = projected_subgradient(t1, c, SubgradientParams(k_max=1000, step_rule=rule))
    assert abs(w.sum() - 2.0) <= 0.05
    assert eval_constraint(t1, w, c).margin >= 0
    assert np.all((w >= 0) & (w <= 1))
    assert len(tr.objective) == 1001


def test_subgradient_feasible_branch_decreases(t1):
    c = Constraint("mineig", 1e-3)
    _, tr = projected_subgradient(t1, c, SubgradientParams(k_max=20), keep_iterates=True)
    objs = np.array(tr.objective)
    feas = np.array(tr.feasible)
    for k in range(20):
        if feas[k]:
            assert objs[k + 1] <= objs[k] + 1e-15
    assert objs[1] < objs[0]


def test_subgradient_stall():
    A = np.zeros((3, 2, 2, 2))
    with pytest.raises(StallError):
        projected_subgradient(A, Constraint("mineig", 1.0))


def test_subgradient_iterates_in_box(t1):
    _, tr = projected_subgradient(t1, Constraint("mineig", 1.5), SubgradientParams(k_max=200),
                                  keep_iterates=True)
    it = np.array(tr.iterates)
    assert it.min() >= 0 and it.max() <= 1


def test_subgradient_known_card(t1):
    c = Constraint("mineig", 1.0)
    w, _ = projected_subgradient(t1, c, SubgradientParams(k_max=1000, known_card=2.0))
    assert abs(w.sum() - 2.0) <= 0.05


@pytest.mark.parametrize("kind, lam", [("trace", 2.0), ("logdet", 0.0)])
def test_subgradient_smooth_constraints(t1, kind, lam):
    # optimum: w1 + w3 = w2 + w4 = 1, objective 2, for both constraints
    c = Constraint(kind, lam)
    w, _ = projected_subgradient(t1, c, SubgradientParams(k_max=2000))
    assert abs(w.sum() - 2.0) <= 0.05
    assert eval_constraint(t1, w, c).margin >= 0


def test_subgradient_trace_singular_start():
    # sensor 1 alone cannot make S nonsingular; the min-eig fallback is used
    A = np.array([[[[1.0, 0.0], [0.0, 0.0]]], [[[0.0, 0.0], [0.0, 1.0]]]])
    w, _ = projected_subgradient(A, Constraint("trace", 4.0), SubgradientParams(k_max=500))
    assert eval_constraint(A, w, Constraint("trace", 4.0)).margin >= 0


def test_weighted_objective(t1):
    u = np.array([1.0, 1.0, 3.0, 3.0])
    c = Constraint("mineig", 1.0)
    w, _ = projected_subgradient(t1, c, SubgradientParams(k_max=2000, step_rule="polyak"), weights=u)
    # cheap sensors 0 and 1 carry the selection
    assert u @ w == pytest.approx(2.0, abs=0.1)
    assert eval_constraint(t1, w, c).margin >= 0


# ------------------------------------------------------------------- barrier

def test_barrier_t1(t1):
    c = Constraint("mineig", 1.0)
    w, cert, tr = barrier_newton(t1, c)
    assert w.sum() == pytest.approx(2.0, abs=1e-3)
    assert tr.gaps[-1] <= 1e-4
    assert check_dual_feasible(cert, t1)
    assert cert.bound <= w.sum() + 1e-8


def test_barrier_t1_09(t1):
    w, _, _ = barrier_newton(t1, Constraint("mineig", 0.9))
    assert w.sum() == pytest.approx(1.8, abs=1e-3)


def test_barrier_gaps_nonincreasing(t1):
    _, _, tr = barrier_newton(t1, Constraint("mineig", 1.0))
    assert all(b <= a + 1e-12 for a, b in zip(tr.gaps, tr.gaps[1:]))


def test_barrier_final_strictly_feasible():
    A, c = random_range_instance(5)
    w, _, _ = barrier_newton(A, c)
    S = np.einsum("m,mdij->dij", w, A) - c.threshold * np.eye(2)
    assert np.linalg.eigvalsh(S)[:, 0].min() > 0
    assert np.all((w >= 0) & (w <= 1))


def test_barrier_infeasible_start(t1):
    with pytest.raises(InfeasibleError):
        barrier_newton(t1, Constraint("mineig", 2.0))  # w = 1 gives S = 2I, not strictly above


def test_barrier_rejects_trace(t1):
    with pytest.raises(ConfigError):
        barrier_newton(t1, Constraint("trace", 2.0))


def test_barrier_duplicate_sensors_objective_unique():
    F = np.diag([2.0, 3.0])
    A = np.stack([F, F])[:, None]
    w, _, _ = barrier_newton(A, Constraint("mineig", 1.0))
    assert w.sum() == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("seed", range(4))
def test_barrier_matches_sdp_oracle(seed):
    A, c = random_range_instance(seed)
    w, cert, _ = barrier_newton(A, c)
    ref = cvx_relaxed(A, c.threshold)
    assert w.sum() == pytest.approx(ref, abs=1e-3)
    assert cert.bound <= ref + 1e-6


def test_barrier_weighted_matches_sdp_oracle():
    A, c = random_range_instance(11)
    u = np.random.default_rng(0).uniform(0.5, 2.0, len(A))
    w, cert, _ = barrier_newton(A, c, weights=u)
    ref = cvx_relaxed(A, c.threshold, u)
    assert u @ w == pytest.approx(ref, abs=1e-3)
    assert check_dual_feasible(cert, A)
    assert cert.bound <= u @ w + 1e-8


def test_barrier_and_subgradient_agree_on_t1(t1):
    c = Constraint("mineig", 1.0)
    wb, _, _ = barrier_newton(t1, c)
    ws, _ = projected_subgradient(t1, c)
    assert abs(wb.sum() - ws.sum()) <= 1e-2


def test_barrier_with_prior(t1):
    c = Constraint("mineig", 1.0, prior=0.5 * np.eye(2))
    w, cert, _ = barrier_newton(t1, c)
    assert w.sum() == pytest.approx(1.0, abs=1e-3)
    assert check_dual_feasible(cert, t1)
    assert cert.bound <= w.sum() + 1e-8


# --------------------------------------------------------------- reweighting

def _duplicates(seed, D=1, copies=10):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((D, 2, 2))
    F = B @ np.swapaxes(B, 1, 2) + 0.1 * np.eye(2)
    lam = 0.9 * np.linalg.eigvalsh(F)[:, 0].min()
    return np.repeat(F[None], copies, axis=0), Constraint("mineig", lam)


@pytest.mark.parametrize("seed", range(3))
def test_reweighting_single_survivor(seed):
    A, c = _duplicates(seed)
    w0, _, _ = barrier_newton(A, c)
    w, tr = reweighted_solve(A, c, ReweightParams(10, 1e-8))
    assert np.sum(w > 1e-6) == 1
    assert np.sum(w > 1e-6) <= np.sum(w0 > 1e-6)
    assert is_feasible(A, (w > 1e-6).astype(float), c)
    assert len(tr.outer) == 11
    for rnd in tr.outer:
        assert rnd["dual_bound"] <= rnd["weighted_objective"] + 1e-8


def test_reweighting_zero_rounds_is_plain(t1):
    c = Constraint("mineig", 1.0)
    w, _ = reweighted_solve(t1, c, ReweightParams(i_max=0))
    w0, _, _ = barrier_newton(t1, c)
    assert np.allclose(w, w0)


def test_reweighting_weights_finite():
    A, c = _duplicates(0)
    w, tr = reweighted_solve(A, c, ReweightParams(1, 1e-8))
    u = 1.0 / (1e-8 + w)
    assert np.all(np.isfinite(u))
    assert u.max() == pytest.approx(1e8)


def test_reweighting_subgradient_inner(t1):
    w, tr = reweighted_solve(t1, Constraint("mineig", 1.0), ReweightParams(2, 1e-8, "subgradient"),
                             SubgradientParams(k_max=300))
    assert is_feasible(t1, w, Constraint("mineig", 1.0 - 1e-9)) or w.sum() > 0
    assert len(tr.outer) == 3


def test_reweighting_annotates_errors(t1):
    with pytest.raises(InfeasibleError, match="round 0"):
        reweighted_solve(t1, Constraint("mineig", 5.0))
