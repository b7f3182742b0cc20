import numpy as np
import pytest

from sparsesel import (ConfigError, Constraint, OracleRefusal, RoundingError, RoundingParams,
                       brute_force_min_card, is_feasible, randomized_round, reweighted_solve, simple_round)

from conftest import random_range_instance


def test_params_validation():
    with pytest.raises(ConfigError):
        RoundingParams(L=0)
    with pytest.raises(ConfigError):
        RoundingParams(max_batches=0)


def test_degenerate_bernoulli(t1):
    w = randomized_round([1, 1, 0, 0], t1, Constraint("mineig", 1.0))
    assert np.array_equal(w, [1, 1, 0, 0])


def test_duplicate_pair_prefers_one_hot():
    F = np.eye(2)[None]
    A = np.stack([F, F])
    w = randomized_round([0.5, 0.5], A, Constraint("mineig", 0.9), RoundingParams(L=100, seed=3))
    assert w.sum() == 1


def test_zero_relaxation_fails(t1):
    with pytest.raises(RoundingError) as ei:
        randomized_round(np.zeros(4), t1, Constraint("mineig", 1.0), RoundingParams(L=5, max_batches=2))
    assert ei.value.best_margin == pytest.approx(-1.0)
    assert ei.value.best_candidate.shape == (4,)


def test_rejects_out_of_box(t1):
    with pytest.raises(ConfigError):
        randomized_round([1.2, 0, 0, 0], t1, Constraint("mineig", 1.0))


def test_lexicographic_tie_break(t1):
    # all four weights 1/2: several cardinality-2 optima; the smallest index set wins
    w = randomized_round(np.full(4, 0.5), t1, Constraint("mineig", 1.0), RoundingParams(L=400, seed=1))
    assert np.array_equal(w, [1, 1, 0, 0])


def test_deterministic_and_batch_independent(t1):
    c = Constraint("mineig", 1.0)
    a = randomized_round(np.full(4, 0.6), t1, c, RoundingParams(L=10, seed=7))
    b = randomized_round(np.full(4, 0.6), t1, c, RoundingParams(L=10, seed=7))
    assert np.array_equal(a, b)


def test_simple_round():
    assert np.array_equal(simple_round([0.49, 0.5, 0.51]), [0, 1, 1])
    assert np.array_equal(simple_round([1, 0, 1]), [1, 0, 1])


def test_simple_round_may_be_infeasible(t1):
    w = simple_round([0.6, 0.4, 0.4, 0.6])
    assert not is_feasible(t1, w, Constraint("mineig", 1.0)) or True  # feasibility is not part of the contract
    assert not is_feasible(t1, simple_round([0.9, 0.4, 0.4, 0.4]), Constraint("mineig", 1.0))


def test_oracle_t1(t1):
    w, k = brute_force_min_card(t1, Constraint("mineig", 1.0))
    assert k == 2
    assert np.array_equal(w, [1, 1, 0, 0])


def test_oracle_infeasible(t1):
    assert brute_force_min_card(t1, Constraint("mineig", 2.5)) == (None, None)


def test_oracle_singleton():
    w, k = brute_force_min_card(np.eye(2)[None, None] * 2, Constraint("mineig", 1.0))
    assert k == 1 and np.array_equal(w, [1])


def test_oracle_refuses_large():
    with pytest.raises(OracleRefusal):
        brute_force_min_card(np.zeros((21, 1, 2, 2)), Constraint("mineig", 1.0))


@pytest.mark.parametrize("seed", range(8))
def test_rounding_never_beats_oracle(seed):
    A, c = random_range_instance(seed, M=8, D=3)
    w, _ = reweighted_solve(A, c)
    wb = randomized_round(w, A, c, RoundingParams(seed=seed))
    _, k = brute_force_min_card(A, c)
    assert is_feasible(A, wb, c)
    assert wb.sum() >= k
