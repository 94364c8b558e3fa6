"""Tests for the simultaneous-move search baseline."""

import numpy as np
import pytest

from equilearn.baseline import (SmctsAgent, backup_tree_values, smcts_search,
                                smcts_train, tree_to_replay, visit_policy)
from equilearn.config import Config
from equilearn.data import (GameTree, ReplayBuffer, TreeNode,
                            UniformPolicySource, generate_tree)
from equilearn.games.matrix import ChainGame, MatrixGame

FAST_NET = {
    "net.q_hidden": "8", "net.q_rep": "4", "net.policy_hidden": "8",
    "net.policy_rep": "4", "net.learning_rate": "1e-3",
    "net.q_dropout": "0.0", "net.policy_dropout": "0.0",
    "net.batch_size": "32",
}


def _chain_tree(sims=2000, seed=0):
    game = ChainGame(seed=1)
    tree = generate_tree(game, UniformPolicySource(), sims,
                         rng=np.random.default_rng(seed))
    return game, tree


def test_backup_grounds_terminal_layer():
    game, tree = _chain_tree()
    backup_tree_values(game, tree)
    terminal = np.stack([n.value for n in tree.layer_of(2)])
    assert terminal.min() == pytest.approx(0.0)
    assert terminal.max() == pytest.approx(1.0)


def test_backup_visit_weighted_mean():
    game, tree = _chain_tree()
    backup_tree_values(game, tree)
    for node in tree.layer_of(1):
        kids = list(node.children.values())
        w = np.array([k.visit_count for k in kids], dtype=float)
        expected = (np.stack([k.value for k in kids])
                    * (w / w.sum())[:, None]).sum(axis=0)
        np.testing.assert_allclose(node.value, expected)
    # the root's value is a convex combination of its children's
    root = tree.layer_of(0)[0]
    assert np.all(root.value >= 0.0) and np.all(root.value <= 1.0)


def test_visit_policy_marginalizes_children():
    game, tree = _chain_tree()
    root = tree.layer_of(0)[0]
    for p in range(2):
        policy = visit_policy(game, root, p)
        assert policy.sum() == pytest.approx(1.0)
        counts = np.zeros(2)
        for joint, child in root.children.items():
            counts[joint[p]] += child.visit_count
        np.testing.assert_allclose(policy, counts / counts.sum())


def test_visit_policy_fallback_uniform():
    game, tree = _chain_tree(sims=1)
    childless = [n for n in tree.layer_of(1) if not n.children]
    if childless:
        policy = visit_policy(game, childless[0], 0)
        np.testing.assert_allclose(policy, [0.5, 0.5])


def test_tree_to_replay_entry_counts():
    game, tree = _chain_tree()
    backup_tree_values(game, tree)
    buffer = ReplayBuffer()
    tree_to_replay(game, tree, buffer)
    # (1 root + 4 interior) nodes, 2 players each; terminals excluded
    assert len(buffer) == 10
    assert {e.timestep for e in buffer.entries} == {0, 1}


def _skewed_game():
    payoffs = np.empty((2, 2, 2))
    payoffs[0, 0] = (0.0, 0.0)
    payoffs[0, 1] = (0.0, 1.0)
    payoffs[1, 0] = (1.0, 0.0)
    payoffs[1, 1] = (1.0, 1.0)
    return MatrixGame(payoffs, name="skewed")


class _UniformSource:
    def predict(self, game, state):
        if state.terminal:
            return game.terminal_returns(state), None
        weights = [np.ones(a) for a in game.spec.action_counts]
        return np.full(game.num_players, 0.5), weights


def test_smcts_search_uniform_weights_give_uniform_policy():
    """Descent samples from node weights, so a uniform source must give
    near-uniform root visit policies."""
    game = _skewed_game()
    state = game.start_states()[0][0]
    _, policies = smcts_search(game, state, _UniformSource(),
                               simulations=10_000,
                               rng=np.random.default_rng(0))
    for p in policies:
        assert p.sum() == pytest.approx(1.0)
        assert np.abs(p - 0.5).sum() < 0.05


def test_smcts_search_single_simulation_is_point_mass():
    game = _skewed_game()
    state = game.start_states()[0][0]
    _, policies = smcts_search(game, state, _UniformSource(), simulations=1,
                               rng=np.random.default_rng(0))
    for p in policies:
        assert sorted(p) == [0.0, 1.0]


def test_smcts_search_value_converges_on_one_step_game():
    """Root value approaches the sampled-weight expectation of the
    grounded terminal values."""
    game = _skewed_game()
    state = game.start_states()[0][0]
    value, _ = smcts_search(game, state, _UniformSource(),
                            simulations=10_000,
                            rng=np.random.default_rng(1))
    sig = 1.0 / (1.0 + np.exp(-1.0))
    # uniform joint play: each player's payoff is 1 half the time
    expected = 0.5 * sig + 0.5 * 0.5
    np.testing.assert_allclose(value, [expected, expected], atol=0.02)


def test_smcts_search_requires_simulations():
    game = _skewed_game()
    with pytest.raises(ValueError):
        smcts_search(game, game.start_states()[0][0], _UniformSource(), 0,
                     np.random.default_rng(0))


def test_smcts_train_smoke():
    cfg = Config({"game": "chain:1", "smcts.simulations": "400",
                  "smcts.iterations": "2", "smcts.batches": "10",
                  "smcts.eval_simulations": "10",
                  "train.gate_matches": "8", **FAST_NET})
    agent = smcts_train(cfg)
    assert isinstance(agent, SmctsAgent)
    assert agent.gate_score is not None
    assert len(agent.training_log) == 2
    game = agent.game
    state = game.start_states()[0][0]
    a = agent.act(game, state, 0, np.random.default_rng(0))
    assert a in game.legal_actions(state, 0)
    # distilled-policy play also stays legal
    agent.search_play = False
    a = agent.act(game, state, 1, np.random.default_rng(1))
    assert a in game.legal_actions(state, 1)
    value = agent.state_value(state)
    assert value.shape == (2,)
