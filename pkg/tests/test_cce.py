"""Tests for multi-agent stage solving, pruning and verification."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equilearn.cce import (StageGame, empirical_to_distribution, ma_exp_ix,
                           ma_exp_ix_batch, normalize_losses, prune_dominated,
                           realized_regret, verify_cce)
from equilearn.games.matrix import matching_pennies, prisoners_dilemma


def _loss_tensor_from_payoffs(payoffs: np.ndarray) -> np.ndarray:
    """Per-player min-max normalized losses over all joint actions."""
    counts = payoffs.shape[:-1]
    n = payoffs.shape[-1]
    flat = payoffs.reshape(-1, n)
    return normalize_losses(flat).reshape(counts + (n,))


PD_LOSSES = _loss_tensor_from_payoffs(prisoners_dilemma().payoffs)
MP_LOSSES = _loss_tensor_from_payoffs(matching_pennies().payoffs)


def test_normalize_losses_maps_best_to_zero():
    rewards = np.array([[3.0, -1.0], [1.0, 0.0], [-1.0, 2.0]])
    losses = normalize_losses(rewards)
    np.testing.assert_allclose(losses[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(losses[:, 1], [1.0, 2.0 / 3.0, 0.0])


def test_normalize_losses_degenerate_range():
    losses = normalize_losses(np.array([[1.0, 5.0], [1.0, 2.0]]))
    np.testing.assert_allclose(losses[:, 0], [0.5, 0.5])


@given(rewards=st.lists(st.lists(st.floats(-100, 100), min_size=2,
                                 max_size=2), min_size=1, max_size=10))
def test_normalize_losses_in_unit_interval(rewards):
    losses = normalize_losses(np.array(rewards))
    assert np.all(losses >= 0.0) and np.all(losses <= 1.0)


def test_stage_game_validation():
    with pytest.raises(ValueError):
        StageGame(2, (2, 2))
    with pytest.raises(ValueError):
        StageGame(2, (2, 2), loss_tensor=np.full((2, 2, 2), 1.5))
    with pytest.raises(ValueError):
        StageGame(2, (2, 2), loss_tensor=np.zeros((3, 2, 2)))


def test_verify_cce_frozen_oracle():
    # Uniform joint play on the prisoner's dilemma. Normalized losses for
    # player 0 are [[0.4, 1.0], [0.0, 0.8]]: incurred cost 0.55, while
    # always defecting against the uniform opponent marginal costs 0.4,
    # so the best deviation gains 0.15 (symmetric for player 1).
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    uniform = np.full((2, 2), 0.25)
    assert verify_cce(uniform, stage) == pytest.approx(0.15)


def test_verify_cce_zero_for_pure_equilibrium():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    dist = {(1, 1): 1.0}
    assert verify_cce(dist, stage) == pytest.approx(0.0)


def test_verify_cce_rejects_unnormalized():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    with pytest.raises(ValueError):
        verify_cce({(0, 0): 0.5}, stage)


def test_prune_dominated_prisoners_dilemma():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    masks = prune_dominated(stage)
    for m in masks:
        np.testing.assert_array_equal(m, [False, True])


def test_prune_dominated_iterates():
    # Three-stage chain: player 1's arm 2 is dominated by arm 1; with it
    # gone player 0's arm 1 is dominated; with that gone player 1's arm 1
    # is dominated. Only (0, 0) survives.
    losses = np.empty((2, 3, 2))
    losses[0, 0] = (0.3, 0.1)
    losses[0, 1] = (0.3, 0.2)
    losses[0, 2] = (0.9, 0.95)
    losses[1, 0] = (0.5, 0.9)
    losses[1, 1] = (0.5, 0.2)
    losses[1, 2] = (0.1, 0.95)
    stage = StageGame(2, (2, 3), loss_tensor=losses)
    masks = prune_dominated(stage)
    np.testing.assert_array_equal(masks[0], [True, False])
    np.testing.assert_array_equal(masks[1], [True, False, False])


def test_prune_respects_initial_legal_mask():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    legal = [np.array([True, False]), np.array([True, True])]
    masks = prune_dominated(stage, legal=legal)
    # player 0 is pinned to cooperate; player 1 still prunes to defect
    np.testing.assert_array_equal(masks[0], [True, False])
    np.testing.assert_array_equal(masks[1], [False, True])


def test_ma_exp_ix_basic_contract():
    stage = StageGame(2, (2, 2), loss_tensor=MP_LOSSES)
    rng = np.random.default_rng(0)
    out = ma_exp_ix(stage, rounds=500, rng=rng)
    assert out.rounds == 500
    assert sum(out.empirical_joint.values()) == 500
    for p in out.policies:
        assert p.sum() == pytest.approx(1.0)
        assert np.all(p >= 0.0)
    assert np.all(out.values >= 0.0) and np.all(out.values <= 1.0)
    dist = empirical_to_distribution(out)
    assert sum(dist.values()) == pytest.approx(1.0)


def test_ma_exp_ix_mask_is_respected():
    stage = StageGame(2, (2, 2), loss_tensor=MP_LOSSES)
    mask = [np.array([True, False]), np.array([True, True])]
    out = ma_exp_ix(stage, rounds=300, mask=mask,
                    rng=np.random.default_rng(1))
    assert out.policies[0][1] == 0.0
    assert all(j[0] == 0 for j in out.empirical_joint)


def test_ma_exp_ix_finds_dominant_action():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    out = ma_exp_ix(stage, rounds=5000, rng=np.random.default_rng(2))
    for p in out.policies:
        assert p[1] > 0.9


def test_realized_regret_is_small_on_dominance_solvable_game():
    stage = StageGame(2, (2, 2), loss_tensor=PD_LOSSES)
    out = ma_exp_ix(stage, rounds=5000, rng=np.random.default_rng(3))
    for player in range(2):
        # sublinear regret: well under the worst case of one per round
        assert realized_regret(out, stage, player) < 0.05 * out.rounds


def test_batch_solver_matches_single_contract():
    tensors = np.stack([MP_LOSSES, PD_LOSSES])
    out = ma_exp_ix_batch(tensors, rounds=2000,
                          rng=np.random.default_rng(4))
    assert out.policies.shape == (2, 2, 2)
    assert out.values.shape == (2, 2)
    assert np.all(out.joint_counts.sum(axis=1) == 2000)
    # per-batch extraction round-trips counts and masked simplex policies
    for b in range(2):
        single = out.outcome(b)
        assert sum(single.empirical_joint.values()) == 2000
        for p in single.policies:
            assert p.sum() == pytest.approx(1.0)
    # the PD entry of the batch still finds the dominant action
    pd = out.outcome(1)
    assert pd.policies[0][1] > 0.9 and pd.policies[1][1] > 0.9


def test_batch_solver_respects_masks():
    tensors = np.stack([MP_LOSSES])
    masks = np.array([[[True, False], [True, True]]])
    out = ma_exp_ix_batch(tensors, rounds=200, masks=masks,
                          rng=np.random.default_rng(5))
    assert out.policies[0, 0, 1] == 0.0
    dist = out.outcome(0).empirical_joint
    assert all(j[0] == 0 for j in dist)


def test_batch_solver_ragged_action_counts():
    # 2x3 game: the padded arm of player 0 must never be played
    losses = np.zeros((1, 2, 3, 2))
    losses[0, :, :, 0] = [[0.1, 0.5, 0.9], [0.2, 0.4, 0.6]]
    losses[0, :, :, 1] = [[0.9, 0.5, 0.1], [0.8, 0.6, 0.4]]
    out = ma_exp_ix_batch(losses, rounds=300,
                          rng=np.random.default_rng(6))
    assert out.policies.shape == (1, 2, 3)
    assert out.policies[0, 0, 2] == 0.0     # padding of the 2-arm player


@settings(deadline=None, max_examples=20)
@given(seed=st.integers(0, 1000))
def test_empirical_cce_epsilon_shrinks(seed):
    """A 2000-round empirical joint on matching pennies is a rough CCE."""
    stage = StageGame(2, (2, 2), loss_tensor=MP_LOSSES)
    out = ma_exp_ix(stage, rounds=2000, rng=np.random.default_rng(seed))
    eps = verify_cce(empirical_to_distribution(out), stage)
    assert eps < 0.25
