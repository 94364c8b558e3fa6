"""Tests for agent checkpoint directories."""

import numpy as np
import pytest

from equilearn.baseline import smcts_train
from equilearn.config import Config
from equilearn.persist import (load_policy_agent, load_smcts_agent,
                               sanitize_game_id, save_smcts_agent,
                               save_trained_agent)
from equilearn.trainer import train

FAST_NET = {
    "net.q_hidden": "8", "net.q_rep": "4", "net.policy_hidden": "8",
    "net.policy_rep": "4", "net.learning_rate": "1e-3",
    "net.q_dropout": "0.0", "net.policy_dropout": "0.0",
    "net.q_epochs": "2", "net.policy_epochs": "2", "net.batch_size": "32",
}


def test_sanitize_game_id():
    assert sanitize_game_id("matrix:mp") == "matrix-mp"
    assert sanitize_game_id("pursuit:5x5") == "pursuit-5x5"
    assert sanitize_game_id("/weird//id:") == "weird-id"


def test_trained_agent_roundtrip(tmp_path):
    cfg = Config({"game": "matrix:mp", "train.outer_iters": "1",
                  "train.trajectories": "200", "train.cv_trees": "1",
                  "train.gate_matches": "4", "cce.rounds": "300", **FAST_NET})
    agent = train(cfg)
    save_trained_agent(agent, str(tmp_path), "matrix:mp")
    # game is inferred from checkpoint metadata
    restored = load_policy_agent(str(tmp_path))
    assert restored.game.spec.action_counts == (2, 2)
    assert restored.share_mode == agent.share_mode
    state = restored.game.start_states()[0][0]
    for p in range(2):
        np.testing.assert_allclose(restored.policy(state, p),
                                   agent.policy(state, p), atol=1e-4)
    # value networks reload per layer
    assert set(restored.value_models) == set(agent.value_models)


def test_smcts_agent_roundtrip(tmp_path):
    cfg = Config({"game": "chain:1", "smcts.simulations": "300",
                  "smcts.iterations": "1", "smcts.batches": "5",
                  "smcts.eval_simulations": "10",
                  "train.gate_matches": "4", **FAST_NET})
    agent = smcts_train(cfg)
    save_smcts_agent(agent, str(tmp_path), "chain:1")
    restored = load_smcts_agent(str(tmp_path), eval_simulations=10)
    assert restored.game.spec.horizon == 2
    state = restored.game.start_states()[0][0]
    np.testing.assert_allclose(restored.state_value(state),
                               agent.state_value(state), atol=1e-4)
    for p in range(2):
        np.testing.assert_allclose(restored.policy(state, p),
                                   agent.policy(state, p), atol=1e-4)


def test_load_rejects_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_policy_agent(str(tmp_path / "nope"))
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(FileNotFoundError):
        load_policy_agent(str(empty))
