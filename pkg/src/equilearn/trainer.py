"""Backward per-timestep equilibrium training.

Each outer iteration: collect candidate game trees with partially
random rollouts and keep the one with the highest value spread; walk
the tree's layers from the horizon back to the root, at every layer
fitting a value model on (state, joint action) -> child-value edges and
then solving every state's stage game with simultaneous EXP-IX; distill
the stage policies into per-player policy networks; accept or roll back
against a random-opponent validation score.
"""

from __future__ import annotations

import copy
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import harness
from .approx import (PolicyModel, QValueModel, SupportCodec, TabularQ,
                     fit_tabular)
from .cce import (StageGame, check_mask, full_mask, ma_exp_ix,
                  ma_exp_ix_batch, normalize_losses, prune_dominated,
                  verify_cce)
from .config import Config
from .data import (GameTree, UniformPolicySource, build_q_dataset,
                   generate_tree, select_tree_by_cv, upsample_values)
from .games import game_from_id
from .games.base import Game, GameState

log = logging.getLogger("equilearn.trainer")


@dataclass(frozen=True)
class TrainConfig:
    game_id: str
    seed: int
    outer_iters: int
    trajectories: int
    cv_trees: int
    randomize_prob: float
    value_backend: str
    tabular_cap: int
    patience: int
    gate_matches: int
    warm_start: bool
    cce_rounds: int
    dense_cap: int
    prune: bool
    q_hidden: int
    q_rep: int
    policy_hidden: int
    policy_rep: int
    learning_rate: float
    q_l2: float
    policy_l2: float
    q_dropout: float
    policy_dropout: float
    support_bins: int
    dense_actions: bool
    q_epochs: int
    policy_epochs: int
    batch_size: int
    upsample_classes: int
    upsample_min_count: int

    @classmethod
    def from_config(cls, cfg: Config) -> "TrainConfig":
        return cls(
            game_id=cfg["game"], seed=cfg["seed"],
            outer_iters=cfg["train.outer_iters"],
            trajectories=cfg["train.trajectories"],
            cv_trees=cfg["train.cv_trees"],
            randomize_prob=cfg["train.randomize_prob"],
            value_backend=cfg["train.value_backend"],
            tabular_cap=cfg["train.tabular_cap"],
            patience=cfg["train.patience"],
            gate_matches=cfg["train.gate_matches"],
            warm_start=cfg["train.warm_start"],
            cce_rounds=cfg["cce.rounds"], dense_cap=cfg["cce.dense_cap"],
            prune=cfg["cce.prune"],
            q_hidden=cfg["net.q_hidden"], q_rep=cfg["net.q_rep"],
            policy_hidden=cfg["net.policy_hidden"],
            policy_rep=cfg["net.policy_rep"],
            learning_rate=cfg["net.learning_rate"],
            q_l2=cfg["net.q_l2"], policy_l2=cfg["net.policy_l2"],
            q_dropout=cfg["net.q_dropout"],
            policy_dropout=cfg["net.policy_dropout"],
            support_bins=cfg["net.support_bins"],
            dense_actions=cfg["net.dense_actions"],
            q_epochs=cfg["net.q_epochs"],
            policy_epochs=cfg["net.policy_epochs"],
            batch_size=cfg["net.batch_size"],
            upsample_classes=cfg["upsample.classes"],
            upsample_min_count=cfg["upsample.min_count"],
        )


def _auto_min_count(configured: int, n: int) -> int:
    return configured if configured > 0 else max(50, n // 20)


class LayerValueSource:
    """Per-player value lookups for all joint actions of layer states."""

    def joint_values(self, game: Game, states: list[GameState]) -> np.ndarray:
        """Values in [0, 1], shape (len(states), prod(A), N)."""
        raise NotImplementedError


class TabularValueSource(LayerValueSource):
    def __init__(self, table: TabularQ):
        self.table = table

    def joint_values(self, game, states):
        counts = game.spec.action_counts
        joints = list(itertools.product(*(range(a) for a in counts)))
        n = game.num_players
        out = np.empty((len(states), len(joints), n))
        for si, s in enumerate(states):
            key = s.key()
            for ji, j in enumerate(joints):
                v = self.table.lookup(key, j)
                out[si, ji] = v if np.ndim(v) else np.full(n, float(v))
        return out


class MlpValueSource(LayerValueSource):
    """Backed by per-player value networks, or one shared network whose
    output maps to the other players by the game's reward symmetry."""

    def __init__(self, models: dict, share_mode: str):
        self.models = models           # player index -> QValueModel
        self.share_mode = share_mode   # 'none', 'zero_sum' or 'identical'

    def joint_values(self, game, states):
        counts = game.spec.action_counts
        joints = list(itertools.product(*(range(a) for a in counts)))
        n = game.num_players
        b, j = len(states), len(joints)
        out = np.empty((b, j, n))
        players = [0] if self.share_mode != "none" else list(range(n))
        for p in players:
            obs = np.stack([game.observe(s, p) for s in states])
            obs_rep = np.repeat(obs, j, axis=0)
            joints_rep = joints * b
            vals = self.models[p].predict(obs_rep, joints_rep).reshape(b, j)
            out[:, :, p] = vals
        if self.share_mode == "zero_sum":
            out[:, :, 1] = 1.0 - out[:, :, 0]
        elif self.share_mode == "identical":
            for p in range(1, n):
                out[:, :, p] = out[:, :, 0]
        return out


def share_mode_for(game: Game, backend: str) -> str:
    if backend != "mlp":
        return "none"
    if game.reward_symmetry == "zero_sum" and game.num_players == 2:
        return "zero_sum"
    if game.reward_symmetry == "identical":
        return "identical"
    return "none"


def fit_layer_values(game: Game, dataset, tc: TrainConfig, h: int,
                     iteration: int, rng: np.random.Generator):
    """Fit the per-layer value backend on edge records.

    Returns (LayerValueSource, models dict or table, mean fit loss).
    """
    records = dataset.records
    if not records:
        raise ValueError(f"no edge records at layer {h}")
    if tc.value_backend == "tabular":
        table = fit_tabular([(r.state.key(), r.joint, r.value)
                             for r in records])
        if len(table.table) > tc.tabular_cap:
            raise ValueError(f"tabular backend over cap: "
                             f"{len(table.table)} > {tc.tabular_cap}")
        return TabularValueSource(table), table, 0.0

    share = share_mode_for(game, tc.value_backend)
    codec = SupportCodec(num_bins=tc.support_bins, lo=0.0, hi=1.0)
    players = [0] if share != "none" else list(range(game.num_players))
    models = {}
    losses = []
    for p in players:
        data = [((game.observe(r.state, p), r.joint), float(r.value[p]))
                for r in records]
        min_count = _auto_min_count(tc.upsample_min_count, len(data))
        data = upsample_values(data, tc.upsample_classes, min_count, rng)
        model = QValueModel(
            obs_size=game.observation_size,
            action_counts=game.spec.action_counts, codec=codec,
            trunk_hidden=(tc.q_hidden, tc.q_hidden), rep_size=tc.q_rep,
            head_hidden=(tc.q_hidden, tc.q_hidden),
            dense_actions=tc.dense_actions, dropout_rate=tc.q_dropout,
            l2_coeff=tc.q_l2, learning_rate=tc.learning_rate,
            seed=tc.seed + 7919 * iteration + 101 * h + p)
        obs = np.stack([d[0][0] for d in data])
        joints = [d[0][1] for d in data]
        values = np.array([d[1] for d in data])
        losses.append(model.fit(obs, joints, values, tc.q_epochs,
                                tc.batch_size, rng))
        models[p] = model
    return (MlpValueSource(models, share), models,
            float(np.mean(losses)))


@dataclass
class LayerResult:
    outcomes: dict                 # state key -> CceOutcome
    values: dict                   # state key -> per-player value vector
    dataset: object                # QDataset the value model was fit on
    models: object                 # fitted value backend for this layer
    fit_loss: float
    policy_records: list           # (player, observation, policy) triples
    pruning_skipped: bool = False
    mean_epsilon: float | None = None


def _legal_masks(game: Game, nodes):
    masks = []
    for node in nodes:
        row = []
        for p in range(game.num_players):
            m = np.zeros(game.spec.action_counts[p], dtype=bool)
            m[list(game.legal_actions(node.state, p))] = True
            row.append(m)
        masks.append(row)
    return masks


def process_layer(game: Game, tree: GameTree, h: int, child_values: dict,
                  tc: TrainConfig, iteration: int,
                  rng: np.random.Generator, spot_verify: int = 3
                  ) -> LayerResult:
    """Fit the layer's value model, then stage-solve every layer state.

    ``child_values`` maps layer h+1 state keys to per-player values in
    [0, 1] (terminal normalized returns when h+1 is the horizon). The
    value model is fit before solving so stage losses are its
    predictions, as the tabular/mlp backend dictates.
    """
    nodes = tree.layer_of(h)
    if not nodes:
        raise ValueError(f"empty layer {h}")
    dataset = build_q_dataset(tree, h, child_values)
    source, models, fit_loss = fit_layer_values(game, dataset, tc, h,
                                                iteration, rng)

    counts = game.spec.action_counts
    joint_size = int(np.prod(counts))
    states = [node.state for node in nodes]
    legal = _legal_masks(game, nodes)
    pruning_skipped = False

    if joint_size <= tc.dense_cap:
        values = source.joint_values(game, states)       # (B, J, N)
        tensors = 1.0 - values.reshape((len(nodes), *counts,
                                        game.num_players))
        tensors = np.clip(tensors, 0.0, 1.0)
        a_max = max(counts)
        mask_arr = np.zeros((len(nodes), game.num_players, a_max),
                            dtype=bool)
        for bi, row in enumerate(legal):
            masks = row
            if tc.prune:
                stage = StageGame(game.num_players, counts,
                                  loss_tensor=tensors[bi])
                masks = prune_dominated(stage, legal=row)
            for p, m in enumerate(masks):
                mask_arr[bi, p, :counts[p]] = m
        batch = ma_exp_ix_batch(tensors, tc.cce_rounds, masks=mask_arr,
                                rng=rng)
        outcomes = {s.key(): batch.outcome(bi)
                    for bi, s in enumerate(states)}
        if spot_verify:
            eps = []
            for bi in range(min(spot_verify, len(nodes))):
                stage = StageGame(game.num_players, counts,
                                  loss_tensor=tensors[bi])
                out = outcomes[states[bi].key()]
                dist = {j: c / out.rounds
                        for j, c in out.empirical_joint.items()}
                eps.append(verify_cce(dist, stage))
            mean_eps = float(np.mean(eps))
        else:
            mean_eps = None
    else:
        # joint space too large for dense tensors: solve per node with an
        # on-demand oracle; pruning and exact verification are skipped.
        pruning_skipped = tc.prune
        if tc.prune:
            log.info("layer %d: joint space %d over dense cap %d, "
                     "pruning skipped", h, joint_size, tc.dense_cap)
        mean_eps = None
        outcomes = {}
        for bi, node in enumerate(nodes):
            vals_cache = {}

            def oracle(joint, _s=node.state, _c=vals_cache):
                if joint not in _c:
                    v = source.joint_values(game, [_s])[0]
                    # joint_values enumerates; cache every joint at once
                    joints = list(itertools.product(*(range(a)
                                                      for a in counts)))
                    for ji, jj in enumerate(joints):
                        _c[jj] = np.clip(1.0 - v[ji], 0.0, 1.0)
                return _c[joint]

            stage = StageGame(game.num_players, counts, loss_oracle=oracle)
            outcomes[node.state.key()] = ma_exp_ix(stage, tc.cce_rounds,
                                                   mask=legal[bi], rng=rng)

    values_out = {}
    policy_records = []
    for node in nodes:
        out = outcomes[node.state.key()]
        values_out[node.state.key()] = out.values
        for p in range(game.num_players):
            policy_records.append((p, game.observe(node.state, p),
                                   out.policies[p]))
    return LayerResult(outcomes=outcomes, values=values_out,
                       dataset=dataset, models=models, fit_loss=fit_loss,
                       policy_records=policy_records,
                       pruning_skipped=pruning_skipped,
                       mean_epsilon=mean_eps)


class TrainedAgent:
    """Per-player policy networks plus the last iteration's value models."""

    def __init__(self, game: Game, policy_models: list, value_models: dict,
                 share_mode: str, name: str = "nncce"):
        self.game = game
        self.policy_models = policy_models
        self.value_models = value_models       # (h) -> backend models
        self.share_mode = share_mode
        self.name = name
        self.training_log: list = []
        self.gate_score: float | None = None

    def value_model_count(self) -> int:
        count = 0
        for models in self.value_models.values():
            count += 1 if isinstance(models, TabularQ) else len(models)
        return count

    def policy(self, state: GameState, player: int) -> np.ndarray:
        obs = self.game.observe(state, player)
        p = self.policy_models[player].predict(obs)[0]
        legal = self.game.legal_actions(state, player)
        mask = np.zeros(len(p), dtype=bool)
        mask[list(legal)] = True
        p = np.where(mask, p, 0.0)
        total = p.sum()
        if total <= 0.0:
            p = mask / mask.sum()
        else:
            p = p / total
        return p

    def act(self, game: Game, state: GameState, player: int,
            rng: np.random.Generator) -> int:
        p = self.policy(state, player)
        a = int(np.searchsorted(np.cumsum(p), rng.random()))
        return min(a, len(p) - 1)


class AgentPolicySource:
    """Tree-rollout predictions from a trained agent: policy-network
    weights, and node values as the policy-weighted value-model mean."""

    def __init__(self, agent: TrainedAgent, dense_cap: int = 4096):
        self.agent = agent
        self.dense_cap = dense_cap

    def predict(self, game: Game, state: GameState):
        if state.terminal:
            return game.terminal_returns(state), None
        weights = [self.agent.policy(state, p)
                   for p in range(game.num_players)]
        h = state.timestep
        counts = game.spec.action_counts
        joint_size = int(np.prod(counts))
        value = np.full(game.num_players, 0.5)
        models = self.agent.value_models.get(h)
        if models is not None and joint_size <= self.dense_cap:
            if isinstance(models, TabularQ):
                source = TabularValueSource(models)
            else:
                source = MlpValueSource(models, self.agent.share_mode)
            vals = source.joint_values(game, [state])[0]   # (J, N)
            probs = np.ones(joint_size)
            joints = np.array(list(itertools.product(
                *(range(a) for a in counts))))
            for p in range(game.num_players):
                probs *= np.asarray(weights[p])[joints[:, p]]
            total = probs.sum()
            if total > 0:
                value = (vals * (probs / total)[:, None]).sum(axis=0)
        return value, weights


def deepest_layer(tree: GameTree) -> int:
    """Index of the deepest nonempty layer; >= 1 for any generated tree."""
    for h in range(len(tree.layers) - 1, -1, -1):
        if tree.layers[h]:
            return h
    raise ValueError("empty tree")


def grounding_layer(tree: GameTree, min_nodes: int = 25,
                    thin_frac: float = 0.1) -> int:
    """Deepest layer with enough coverage to ground the backward pass.

    Thin frontier slivers (fewer than ``min_nodes`` nodes and under
    ``thin_frac`` of the layer above) are trimmed away: value targets
    normalized over a handful of barely explored states are noise, and
    every discarded layer is tiny by construction. Exhaustively built
    small trees keep their true terminal layer because it is never thin
    relative to its parent layer.
    """
    h = deepest_layer(tree)
    while h > 1:
        size = len(tree.layers[h])
        if size >= min_nodes or size >= thin_frac * len(tree.layers[h - 1]):
            break
        h -= 1
    return h


def frontier_values(game: Game, tree: GameTree, layer: int) -> dict:
    """Grounding values for the backward pass at ``layer``.

    Per player, accumulated returns over the layer's nodes are min-max
    normalized so the best return maps to value 1. At the horizon these
    are exact terminal returns; for partially built trees whose deepest
    layer falls short of the horizon they are the scores collected so
    far.
    """
    nodes = tree.layer_of(layer)
    if not nodes:
        raise ValueError(f"layer {layer} is empty")
    returns = np.stack([game.accumulated_returns(n.state) for n in nodes])
    losses = normalize_losses(returns)
    return {n.state.key(): 1.0 - losses[i] for i, n in enumerate(nodes)}


@dataclass
class GateDecision:
    score: float
    accepted: bool
    improved: bool


def validation_gate(candidate: TrainedAgent, previous_score: float | None,
                    game: Game, n_matches: int, seed: int) -> GateDecision:
    """Score the candidate against the uniform-random agent.

    Accept unless it scores strictly worse than the last accepted
    score; ties accept (rollback on ties can livelock with a stochastic
    evaluator). ``improved`` drives the patience counter.
    """
    if n_matches < 1:
        raise ValueError("need at least one validation match")
    score = harness.evaluate_vs_random(game, candidate,
                                       n_pairs=max(1, n_matches // 2),
                                       base_seed=seed)
    if previous_score is None:
        return GateDecision(score=score, accepted=True, improved=True)
    return GateDecision(score=score, accepted=score >= previous_score,
                        improved=score > previous_score)


def _new_policy_models(game: Game, tc: TrainConfig, iteration: int):
    return [PolicyModel(obs_size=game.observation_size,
                        num_actions=game.spec.action_counts[p],
                        trunk_hidden=(tc.policy_hidden, tc.policy_hidden),
                        rep_size=tc.policy_rep,
                        head_hidden=(tc.policy_hidden, tc.policy_hidden),
                        dropout_rate=tc.policy_dropout, l2_coeff=tc.policy_l2,
                        learning_rate=tc.learning_rate,
                        seed=tc.seed + 1009 * iteration + p)
            for p in range(game.num_players)]


def train(cfg: Config, game: Game | None = None) -> TrainedAgent:
    """Run the full outer loop and return the last accepted agent."""
    tc = TrainConfig.from_config(cfg)
    if game is None:
        game = game_from_id(tc.game_id)
    rng = np.random.default_rng(tc.seed)
    share = share_mode_for(game, tc.value_backend)

    accepted: TrainedAgent | None = None
    accepted_score: float | None = None
    training_log: list = []
    stale = 0

    for it in range(tc.outer_iters):
        if accepted is None:
            source = UniformPolicySource()
        else:
            source = AgentPolicySource(accepted, dense_cap=tc.dense_cap)
        trees = [generate_tree(game, source, tc.trajectories,
                               randomize=tc.randomize_prob, rng=rng)
                 for _ in range(tc.cv_trees)]
        tree = select_tree_by_cv(trees)

        frontier = grounding_layer(tree)
        child_values = frontier_values(game, tree, frontier)
        value_models: dict = {}
        policy_data = [[] for _ in range(game.num_players)]
        for h in range(frontier - 1, -1, -1):
            result = process_layer(game, tree, h, child_values, tc, it, rng)
            value_models[h] = result.models
            child_values = result.values
            for p, obs, policy in result.policy_records:
                policy_data[p].append((obs, policy))
            mean_v = float(np.mean([v for v in result.values.values()]))
            training_log.append({
                "iteration": it, "layer": h, "mean_stage_value": mean_v,
                "mean_epsilon": result.mean_epsilon,
                "regression_loss": result.fit_loss,
                "policy_loss": None, "gate": None,
            })
            log.info("iter %d layer %d: %d states, mean value %.4f",
                     it, h, len(result.outcomes), mean_v)

        if accepted is not None and tc.warm_start:
            # deep copy so a rolled-back candidate can't corrupt the
            # accepted agent's parameters
            policy_models = copy.deepcopy(accepted.policy_models)
        else:
            policy_models = _new_policy_models(game, tc, it)
        policy_losses = []
        for p in range(game.num_players):
            obs = np.stack([o for o, _ in policy_data[p]])
            targets = np.stack([t for _, t in policy_data[p]])
            policy_losses.append(policy_models[p].fit(
                obs, targets, tc.policy_epochs, tc.batch_size, rng))

        candidate = TrainedAgent(game, policy_models, value_models, share)
        decision = validation_gate(candidate, accepted_score, game,
                                   tc.gate_matches,
                                   seed=tc.seed + 500_000 + it)
        training_log.append({
            "iteration": it, "layer": None, "mean_stage_value": None,
            "mean_epsilon": None, "regression_loss": None,
            "policy_loss": float(np.mean(policy_losses)),
            "gate": ("accept" if decision.accepted else "rollback")
                    + f" score={decision.score:.4f}",
        })
        log.info("iter %d gate: score %.4f -> %s", it, decision.score,
                 "accept" if decision.accepted else "rollback")
        if decision.accepted:
            accepted = candidate
            accepted_score = decision.score
        stale = 0 if decision.improved else stale + 1
        if stale >= tc.patience:
            log.info("terminating after %d non-improving iterations", stale)
            break

    if accepted is None:
        raise RuntimeError("training produced no accepted agent")
    accepted.training_log = training_log
    accepted.gate_score = accepted_score
    return accepted
