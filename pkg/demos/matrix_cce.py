"""Coarse correlated equilibria of small matrix games via multi-agent EXP-IX.

Three classics: matching pennies and rock-paper-scissors converge to the
uniform mixed equilibrium, while the prisoner's dilemma shows what
dominance pruning buys — without it the empirical play still leaks a
little mass onto the dominated cooperate action.
"""

import numpy as np

from equilearn.cce import (StageGame, empirical_to_distribution, ma_exp_ix,
                           normalize_losses, prune_dominated, verify_cce)
from equilearn.games import game_from_id


def stage_from_matrix(game_id):
    game = game_from_id(game_id)
    counts = game.spec.action_counts
    start = game.start_states()[0][0]
    rewards = np.stack([game.terminal_returns(game.step(start, j).next_state)
                        for j in np.ndindex(*counts)])
    tensor = normalize_losses(rewards).reshape(counts + (game.num_players,))
    return StageGame(game.num_players, counts, loss_tensor=tensor)


def show(game_id, rounds=50_000, mask=None, label=""):
    stage = stage_from_matrix(game_id)
    out = ma_exp_ix(stage, rounds, mask=mask, rng=np.random.default_rng(0))
    dist = empirical_to_distribution(out)
    eps = verify_cce(dist, stage)
    dense = np.zeros(stage.action_counts)
    for joint, prob in dist.items():
        dense[joint] = prob
    print(f"{game_id}{label}  ({rounds} rounds)")
    for p in range(stage.num_players):
        marginal = dense.sum(axis=1 - p)
        joined = ", ".join(f"{x:.3f}" for x in marginal)
        print(f"  player {p} empirical marginal: [{joined}]")
    print(f"  epsilon of empirical joint play: {eps:.4f}\n")


def main():
    show("matrix:mp")
    show("matrix:rps")
    show("matrix:pd")
    stage = stage_from_matrix("matrix:pd")
    masks = prune_dominated(stage)
    print("prisoner's dilemma dominance masks:",
          [m.tolist() for m in masks])
    show("matrix:pd", rounds=2_000, mask=masks, label=" [pruned]")


if __name__ == "__main__":
    main()
