"""Trunk-plus-head models for value and policy prediction.

The value model passes a player observation through a representation
trunk, appends an encoded joint action to the representation, and feeds
the result to a support-head network whose expectation is the scalar
value. The policy model uses the same two-stage shape without the
action concatenation.
"""

from __future__ import annotations

import math

import numpy as np

from .codec import SupportCodec, scalar_to_support, support_to_scalar
from .mlp import MlpModel, TrainingDivergedError, _batches, _softmax


def encode_joint_factored(joint, action_counts) -> np.ndarray:
    """Concatenated per-player one-hots; length sum(A_i)."""
    out = np.zeros(sum(action_counts))
    off = 0
    for a, count in zip(joint, action_counts):
        out[off + a] = 1.0
        off += count
    return out


def encode_joint_dense(joint, action_counts) -> np.ndarray:
    """Single one-hot over the product joint space; length prod(A_i)."""
    out = np.zeros(int(np.prod(action_counts)))
    out[int(np.ravel_multi_index(tuple(joint), action_counts))] = 1.0
    return out


def joint_encoding_size(action_counts, dense: bool = False) -> int:
    return int(np.prod(action_counts)) if dense else int(sum(action_counts))


def encode_joint(joint, action_counts, dense: bool = False) -> np.ndarray:
    enc = encode_joint_dense if dense else encode_joint_factored
    return enc(joint, action_counts)


class ComposedModel:
    """Representation trunk feeding a head, with optional extra head input.

    ``trunk_dims[-1]`` is the representation width; the head consumes
    representation plus ``extra_dim`` appended features.
    """

    def __init__(self, trunk_dims, head_dims, head_kind, extra_dim=0,
                 dropout_rate=0.0, l2_coeff=0.0, learning_rate=5e-5, seed=0):
        if head_dims[0] != trunk_dims[-1] + extra_dim:
            raise ValueError("head input must equal representation width "
                             "plus extra features")
        self.extra_dim = int(extra_dim)
        self.trunk = MlpModel(trunk_dims, head_kind="linear",
                              dropout_rate=dropout_rate, l2_coeff=l2_coeff,
                              learning_rate=learning_rate, seed=seed)
        self.head = MlpModel(head_dims, head_kind=head_kind,
                             dropout_rate=dropout_rate, l2_coeff=l2_coeff,
                             learning_rate=learning_rate, seed=seed + 1)

    @property
    def head_kind(self):
        return self.head.head_kind

    def _head_input(self, obs, extra, train_mode, rng):
        rep, cache = self.trunk._forward_cache(np.atleast_2d(obs),
                                               train_mode, rng)
        if self.extra_dim:
            if extra is None:
                raise ValueError("model expects appended features")
            h_in = np.concatenate([rep, np.atleast_2d(extra)], axis=1)
        else:
            h_in = rep
        return h_in, cache

    def forward(self, obs, extra=None, train_mode=False, rng=None):
        h_in, _ = self._head_input(obs, extra, train_mode, rng)
        return self.head.forward(h_in, train_mode=train_mode, rng=rng)

    def train_step(self, obs, extra, targets, rng):
        """One minibatch Adam step on both subnetworks; returns the loss."""
        h_in, trunk_cache = self._head_input(obs, extra, True, rng)
        loss, head_grads, grad_hin = self.head.loss_grads(
            h_in, targets, train_mode=True, rng=rng)
        rep_dim = self.trunk.layer_dims[-1]
        trunk_grads, _ = self.trunk._backward(trunk_cache,
                                              grad_hin[:, :rep_dim])
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss}")
        self.head.adam_step(head_grads)
        self.trunk.adam_step(trunk_grads)
        return loss

    def fit(self, obs, extra, targets, epochs, batch_size,
            rng: np.random.Generator):
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if len(obs) == 0:
            raise ValueError("empty dataset")
        if extra is not None:
            extra = np.atleast_2d(np.asarray(extra, dtype=float))
        last = 0.0
        for _ in range(epochs):
            losses = []
            for idx in _batches(len(obs), batch_size, rng):
                ex = extra[idx] if extra is not None else None
                losses.append(self.train_step(obs[idx], ex, targets[idx],
                                              rng))
            last = float(np.mean(losses))
        return last

    def parameter_arrays(self):
        return self.trunk.params() + self.head.params()


class QValueModel:
    """Scalar value of (observation, joint action) via a support head."""

    def __init__(self, obs_size, action_counts, codec: SupportCodec,
                 trunk_hidden=(256, 256), rep_size=32, head_hidden=(256, 256),
                 dense_actions=False, dropout_rate=0.5, l2_coeff=1e-4,
                 learning_rate=5e-5, seed=0):
        self.action_counts = tuple(action_counts)
        self.codec = codec
        self.dense_actions = bool(dense_actions)
        j = joint_encoding_size(self.action_counts, self.dense_actions)
        trunk_dims = [obs_size, *trunk_hidden, rep_size]
        head_dims = [rep_size + j, *head_hidden, codec.num_bins]
        self.net = ComposedModel(trunk_dims, head_dims, "support",
                                 extra_dim=j, dropout_rate=dropout_rate,
                                 l2_coeff=l2_coeff,
                                 learning_rate=learning_rate, seed=seed)

    def encode_actions(self, joints) -> np.ndarray:
        return np.stack([encode_joint(j, self.action_counts,
                                      self.dense_actions) for j in joints])

    def predict(self, obs, joints) -> np.ndarray:
        """Scalar values for row-aligned observations and joint actions."""
        support = self.net.forward(obs, self.encode_actions(joints))
        return support @ self.codec.centers

    def fit(self, obs, joints, values, epochs, batch_size, rng):
        targets = scalar_to_support(self.codec,
                                    np.asarray(values, dtype=float))
        return self.net.fit(obs, self.encode_actions(joints), targets,
                            epochs, batch_size, rng)


class ValueModel:
    """Scalar state value from a player observation (no action input)."""

    def __init__(self, obs_size, codec: SupportCodec, trunk_hidden=(256, 256),
                 rep_size=32, head_hidden=(256, 256), dropout_rate=0.5,
                 l2_coeff=1e-4, learning_rate=5e-5, seed=0):
        self.codec = codec
        trunk_dims = [obs_size, *trunk_hidden, rep_size]
        head_dims = [rep_size, *head_hidden, codec.num_bins]
        self.net = ComposedModel(trunk_dims, head_dims, "support",
                                 dropout_rate=dropout_rate, l2_coeff=l2_coeff,
                                 learning_rate=learning_rate, seed=seed)

    def predict(self, obs) -> np.ndarray:
        return self.net.forward(obs) @ self.codec.centers

    def fit(self, obs, values, epochs, batch_size, rng):
        targets = scalar_to_support(self.codec,
                                    np.asarray(values, dtype=float))
        return self.net.fit(obs, None, targets, epochs, batch_size, rng)


class PolicyModel:
    """Per-player action distribution from a player observation."""

    def __init__(self, obs_size, num_actions, trunk_hidden=(1028, 1028),
                 rep_size=64, head_hidden=(1028, 1028), dropout_rate=0.6,
                 l2_coeff=2e-4, learning_rate=5e-5, seed=0):
        self.num_actions = int(num_actions)
        trunk_dims = [obs_size, *trunk_hidden, rep_size]
        head_dims = [rep_size, *head_hidden, num_actions]
        self.net = ComposedModel(trunk_dims, head_dims, "policy",
                                 dropout_rate=dropout_rate, l2_coeff=l2_coeff,
                                 learning_rate=learning_rate, seed=seed)

    def predict(self, obs) -> np.ndarray:
        return self.net.forward(obs)

    def fit(self, obs, target_policies, epochs, batch_size, rng):
        return self.net.fit(obs, None, np.asarray(target_policies),
                            epochs, batch_size, rng)


def train_regression(model: MlpModel, data, codec: SupportCodec, epochs,
                     batch_size, rng) -> float:
    """Train a plain support-head MLP on (input, scalar target) pairs."""
    x = np.stack([np.asarray(a, dtype=float) for a, _ in data])
    y = np.array([float(b) for _, b in data])
    targets = scalar_to_support(codec, y)
    from .mlp import train_epochs
    return train_epochs(model, x, targets, epochs, batch_size, rng)


def train_policy(model: MlpModel, data, epochs, batch_size, rng) -> float:
    """Train a plain policy-head MLP on (input, simplex target) pairs."""
    x = np.stack([np.asarray(a, dtype=float) for a, _ in data])
    p = np.stack([np.asarray(b, dtype=float) for _, b in data])
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("policy targets must sum to 1")
    from .mlp import train_epochs
    return train_epochs(model, x, p, epochs, batch_size, rng)
