"""Train a small agent on 3-card Goofspiel and pit it against baselines.

End-to-end tour of the training loop at desk scale: backward per-layer
value fitting with stage-game equilibrium solving, then paired matches
against the uniform-random agent and the simultaneous-move MCTS
baseline. Takes a couple of minutes on one core.
"""

import numpy as np

from equilearn.baseline import smcts_train
from equilearn.config import Config
from equilearn.games import game_from_id
from equilearn.harness import RandomAgent, play_paired, win_stats
from equilearn.trainer import train

NET = {
    "net.q_hidden": "48", "net.q_rep": "16", "net.policy_hidden": "64",
    "net.policy_rep": "16", "net.learning_rate": "1e-3",
    "net.q_dropout": "0.05", "net.policy_dropout": "0.05",
    "net.q_epochs": "8", "net.policy_epochs": "15", "net.batch_size": "128",
}


def versus(game, agent, other, n_pairs=50):
    records = play_paired(game, agent, other, n_pairs=n_pairs, base_seed=123)
    s = win_stats(records, agent.name)
    print(f"  vs {other.name}: {s['wins']}W {s['losses']}L {s['draws']}D")


def main():
    game = game_from_id("goofspiel:3")
    print("training on", game.spec.metadata)
    cfg = Config({"game": "goofspiel:3", "train.outer_iters": "2",
                  "train.trajectories": "4000", "train.cv_trees": "2",
                  "train.gate_matches": "30", "cce.rounds": "1500", **NET})
    agent = train(cfg)
    print(f"validation gate score: {agent.gate_score:.3f}")

    print("training the search baseline")
    smcts_cfg = Config({"game": "goofspiel:3", "smcts.simulations": "4000",
                        "smcts.iterations": "2", "train.gate_matches": "20",
                        **NET})
    baseline = smcts_train(smcts_cfg)

    print("paired matches (mirrored seats and seeds):")
    versus(game, agent, RandomAgent("random"))
    versus(game, agent, baseline)

    state = game.start_states()[0][0]
    for p in range(2):
        joined = ", ".join(f"{x:.3f}" for x in agent.policy(state, p))
        print(f"opening policy, player {p}: [{joined}]")


if __name__ == "__main__":
    main()
