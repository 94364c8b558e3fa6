"""Multi-agent EXP-IX stage solving and equilibrium verification.

One stage game lives at a single state: its per-player losses come
either from terminal rewards (normalized into [0, 1]) or from a value
model one layer deeper. All N players run EXP-IX simultaneously on the
shared loss oracle; the empirical distribution of sampled joint actions
approximates a coarse correlated equilibrium, which the brute-force
verifier checks by exhaustive deviation enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bandit import IxParams, WeightRow, default_schedule

LOSS_TOL = 1e-9


@dataclass
class StageGame:
    """A one-shot game with losses in [0, 1]^N.

    Either ``loss_tensor`` (shape (A_1, ..., A_N, N)) or ``loss_oracle``
    (joint action tuple -> length-N loss vector) must be given; the
    dense tensor enables pruning and exact verification.
    """

    num_players: int
    action_counts: tuple[int, ...]
    loss_tensor: np.ndarray | None = None
    loss_oracle: Callable[[tuple[int, ...]], np.ndarray] | None = None

    def __post_init__(self):
        if self.loss_tensor is None and self.loss_oracle is None:
            raise ValueError("need a loss tensor or a loss oracle")
        if self.loss_tensor is not None:
            t = np.asarray(self.loss_tensor, dtype=float)
            expected = tuple(self.action_counts) + (self.num_players,)
            if t.shape != expected:
                raise ValueError(f"loss tensor shape {t.shape}, "
                                 f"expected {expected}")
            if t.min() < -LOSS_TOL or t.max() > 1 + LOSS_TOL:
                raise ValueError("loss tensor entries must lie in [0, 1]")
            self.loss_tensor = np.clip(t, 0.0, 1.0)

    def losses(self, joint: tuple[int, ...]) -> np.ndarray:
        if self.loss_tensor is not None:
            return self.loss_tensor[tuple(joint)]
        out = np.asarray(self.loss_oracle(tuple(joint)), dtype=float)
        if out.min() < -LOSS_TOL or out.max() > 1 + LOSS_TOL:
            raise ValueError(f"loss oracle returned values outside [0, 1] "
                             f"for joint action {joint}: {out}")
        return np.clip(out, 0.0, 1.0)


def full_mask(action_counts) -> list[np.ndarray]:
    return [np.ones(a, dtype=bool) for a in action_counts]


def check_mask(mask, action_counts):
    mask = [np.asarray(m, dtype=bool) for m in mask]
    if len(mask) != len(action_counts):
        raise ValueError("mask needs one row per player")
    for m, a in zip(mask, action_counts):
        if len(m) != a:
            raise ValueError("mask row length mismatch")
        if not m.any():
            raise ValueError("mask leaves a player with no playable action")
    return mask


@dataclass
class CceOutcome:
    """Result of a multi-agent EXP-IX run at one state."""

    weights: list[WeightRow]
    policies: list[np.ndarray]
    values: np.ndarray                      # per player, 1 - average loss
    empirical_joint: dict[tuple[int, ...], int]
    rounds: int


def normalize_losses(rewards: np.ndarray) -> np.ndarray:
    """Map per-player rewards over a node set to losses in [0, 1].

    Per player: loss = 1 - (r - min)/(max - min), so the best reward in
    the set gets loss 0 and the worst loss 1. Degenerate ranges map to
    0.5 everywhere.
    """
    rewards = np.atleast_2d(np.asarray(rewards, dtype=float))
    lo = rewards.min(axis=0)
    hi = rewards.max(axis=0)
    span = hi - lo
    out = np.full_like(rewards, 0.5)
    ok = span > LOSS_TOL
    out[:, ok] = 1.0 - (rewards[:, ok] - lo[ok]) / span[ok]
    return out


def _masked_policy(log_w: np.ndarray, mask: np.ndarray) -> np.ndarray:
    lw = np.where(mask, log_w, -np.inf)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def ma_exp_ix(stage: StageGame, rounds: int, params: IxParams | None = None,
              mask=None, rng: np.random.Generator | None = None) -> CceOutcome:
    """Run simultaneous EXP-IX for all players over one stage game.

    Every round each player draws an arm from its masked weight policy,
    the joint loss is queried once, and each player applies the IX
    update on its own chosen arm.
    """
    if rounds < 1:
        raise ValueError("need at least 1 round")
    if rng is None:
        rng = np.random.default_rng()
    n = stage.num_players
    counts = stage.action_counts
    if mask is None:
        mask = full_mask(counts)
    mask = check_mask(mask, counts)
    if params is None:
        params = default_schedule(max(2, max(counts)), rounds)
    eta, gamma = params.eta, params.gamma_ix

    log_w = [np.zeros(a) for a in counts]
    loss_sums = np.zeros(n)
    joint_counts: dict[tuple[int, ...], int] = {}
    chosen = np.empty(n, dtype=int)
    p_chosen = np.empty(n)
    for _ in range(rounds):
        for i in range(n):
            p = _masked_policy(log_w[i], mask[i])
            u = rng.random()
            a = int(np.searchsorted(np.cumsum(p), u))
            a = min(a, counts[i] - 1)
            chosen[i] = a
            p_chosen[i] = p[a]
        joint = tuple(int(a) for a in chosen)
        losses = stage.losses(joint)
        loss_sums += losses
        joint_counts[joint] = joint_counts.get(joint, 0) + 1
        for i in range(n):
            log_w[i][chosen[i]] -= (eta * losses[i]
                                    / (p_chosen[i] + gamma))

    weights = [WeightRow(lw) for lw in log_w]
    policies = [_masked_policy(lw, m) for lw, m in zip(log_w, mask)]
    values = 1.0 - loss_sums / rounds
    return CceOutcome(weights=weights, policies=policies, values=values,
                      empirical_joint=joint_counts, rounds=rounds)


@dataclass
class BatchCceOutcome:
    """Stage-solver output for a batch of same-shaped stage games."""

    action_counts: tuple[int, ...]
    log_weights: np.ndarray     # (B, N, A_max)
    policies: np.ndarray        # (B, N, A_max), masked arms exactly 0
    values: np.ndarray          # (B, N)
    joint_counts: np.ndarray    # (B, prod(A)) flat joint-action visit counts
    masks: np.ndarray           # (B, N, A_max) bool
    rounds: int

    def outcome(self, b: int) -> CceOutcome:
        counts = self.action_counts
        weights = [WeightRow(self.log_weights[b, i, :a].copy())
                   for i, a in enumerate(counts)]
        policies = [self.policies[b, i, :a].copy()
                    for i, a in enumerate(counts)]
        joint = {}
        for flat, c in enumerate(self.joint_counts[b]):
            if c:
                joint[tuple(int(x) for x in
                            np.unravel_index(flat, counts))] = int(c)
        return CceOutcome(weights=weights, policies=policies,
                          values=self.values[b].copy(),
                          empirical_joint=joint, rounds=self.rounds)


def ma_exp_ix_batch(loss_tensors: np.ndarray, rounds: int,
                    params: IxParams | None = None, masks=None,
                    rng: np.random.Generator | None = None
                    ) -> BatchCceOutcome:
    """Vectorized multi-agent EXP-IX over a batch of dense stage games.

    ``loss_tensors`` has shape (B, A_1, ..., A_N, N). The per-round
    dynamics are identical to :func:`ma_exp_ix`; the batch dimension is
    where the parallelism of independent stage games lives.
    """
    if rounds < 1:
        raise ValueError("need at least 1 round")
    if rng is None:
        rng = np.random.default_rng()
    t = np.asarray(loss_tensors, dtype=float)
    if t.min() < -LOSS_TOL or t.max() > 1 + LOSS_TOL:
        raise ValueError("batch loss tensors must lie in [0, 1]")
    t = np.clip(t, 0.0, 1.0)
    b = t.shape[0]
    n = t.shape[-1]
    action_counts = t.shape[1:-1]
    a_max = max(action_counts)
    joint = int(np.prod(action_counts))
    flat_losses = t.reshape(b, joint, n)

    if masks is None:
        masks = np.zeros((b, n, a_max), dtype=bool)
        for i, a in enumerate(action_counts):
            masks[:, i, :a] = True
    else:
        masks = np.asarray(masks, dtype=bool)
        if not masks.any(axis=2).all():
            raise ValueError("mask leaves a player with no playable action")
    if params is None:
        params = default_schedule(max(2, a_max), rounds)
    eta, gamma = params.eta, params.gamma_ix

    # strides map per-player arms to a flat joint-action index
    strides = np.empty(n, dtype=int)
    acc = 1
    for i in range(n - 1, -1, -1):
        strides[i] = acc
        acc *= action_counts[i]

    log_w = np.zeros((b, n, a_max))
    neg_inf = np.where(masks, 0.0, -np.inf)
    loss_sums = np.zeros((b, n))
    counts = np.zeros((b, joint), dtype=np.int64)
    bi = np.arange(b)[:, None]
    ni = np.arange(n)[None, :]
    for _ in range(rounds):
        lw = log_w + neg_inf
        lw -= lw.max(axis=2, keepdims=True)
        w = np.exp(lw)
        p = w / w.sum(axis=2, keepdims=True)
        c = np.cumsum(p, axis=2)
        c /= c[:, :, -1:]
        u = rng.random((b, n, 1))
        chosen = (u > c).sum(axis=2)
        np.minimum(chosen, a_max - 1, out=chosen)
        p_sel = p[bi, ni, chosen]
        flat = chosen @ strides
        losses = flat_losses[np.arange(b), flat]          # (B, N)
        loss_sums += losses
        np.add.at(counts, (np.arange(b), flat), 1)
        log_w[bi, ni, chosen] -= eta * losses / (p_sel + gamma)

    lw = log_w + neg_inf
    lw -= lw.max(axis=2, keepdims=True)
    w = np.exp(lw)
    policies = w / w.sum(axis=2, keepdims=True)
    values = 1.0 - loss_sums / rounds
    return BatchCceOutcome(action_counts=tuple(action_counts),
                           log_weights=log_w, policies=policies,
                           values=values, joint_counts=counts, masks=masks,
                           rounds=rounds)


def prune_dominated(stage: StageGame, legal=None) -> list[np.ndarray]:
    """Iterated strict pure-strategy dominance on a dense stage game.

    An action is masked iff some other playable action has strictly
    lower loss against every playable joint opponent profile; applied
    per player and iterated to a fixed point. Returns per-player
    boolean masks (True = playable).
    """
    if stage.loss_tensor is None:
        raise ValueError("pruning needs a dense loss tensor")
    counts = stage.action_counts
    n = stage.num_players
    mask = (check_mask(legal, counts) if legal is not None
            else full_mask(counts))
    mask = [m.copy() for m in mask]
    changed = True
    while changed:
        changed = False
        for i in range(n):
            li = np.moveaxis(stage.loss_tensor[..., i], i, 0)
            li = li.reshape(counts[i], -1)
            opp = np.ones(1, dtype=bool)
            for j in range(n):
                if j != i:
                    opp = np.outer(opp, mask[j]).ravel()
            live = np.flatnonzero(mask[i])
            for a in live:
                if mask[i].sum() == 1:
                    break
                for a2 in live:
                    if a2 == a or not mask[i][a2]:
                        continue
                    if np.all(li[a2, opp] < li[a, opp]):
                        mask[i][a] = False
                        changed = True
                        break
    return mask


def verify_cce(joint_dist, stage: StageGame) -> float:
    """Exact epsilon of a joint distribution: the best deviation gain.

    ``joint_dist`` is a dense array over joint actions or a mapping
    from joint-action tuples to probabilities. Returns
    max over players i and arms a' of
    [E_sigma c_i(a) - E_sigma c_i(a', a_-i)]^+ by full enumeration.
    """
    if stage.loss_tensor is None:
        raise ValueError("verification needs a dense loss tensor")
    counts = stage.action_counts
    if isinstance(joint_dist, dict):
        dense = np.zeros(counts)
        for joint, prob in joint_dist.items():
            dense[tuple(joint)] = prob
    else:
        dense = np.asarray(joint_dist, dtype=float)
        if dense.shape != tuple(counts):
            raise ValueError("distribution shape mismatch")
    total = dense.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {total}, not 1")

    eps = 0.0
    for i in range(stage.num_players):
        li = stage.loss_tensor[..., i]
        incurred = float((dense * li).sum())
        opp_marginal = dense.sum(axis=i)
        li_dev = np.moveaxis(li, i, 0).reshape(counts[i], -1)
        dev = li_dev @ opp_marginal.ravel()
        eps = max(eps, incurred - float(dev.min()))
    return max(eps, 0.0)


def empirical_to_distribution(outcome: CceOutcome) -> dict:
    """Joint visit counts divided by the round count."""
    if outcome.rounds < 1:
        raise ValueError("no rounds recorded")
    return {joint: c / outcome.rounds
            for joint, c in outcome.empirical_joint.items()}


def realized_regret(outcome: CceOutcome, stage: StageGame, player: int
                    ) -> float:
    """Player's regret against the empirical opponent play of the run."""
    if stage.loss_tensor is None:
        raise ValueError("needs a dense loss tensor")
    counts = stage.action_counts
    dense = np.zeros(counts)
    for joint, c in outcome.empirical_joint.items():
        dense[tuple(joint)] = c
    li = stage.loss_tensor[..., player]
    incurred = float((dense * li).sum())
    opp_counts = dense.sum(axis=player)
    li_dev = np.moveaxis(li, player, 0).reshape(counts[player], -1)
    best = float((li_dev @ opp_counts.ravel()).min())
    return incurred - best
