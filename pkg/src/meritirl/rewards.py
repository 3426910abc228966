"""Parameterised reward families with exact gradients, Hessians and norm bounds.

Both provided families are linear in the parameter, so the gradient at a pair
is a fixed feature vector and the Hessian vanishes. A new family only has to
supply ``reward_table``, ``grad`` and ``hessian`` with the same shapes.
"""
from __future__ import annotations

import io
import json

import numpy as np

from .mdp import MdpError


class RewardModel:
    """Reward ``r_theta(s, a) = theta . features[s, a]``.

    ``kind`` is ``"tabular"`` (features are indicator vectors from an index
    map) or ``"linear"`` (dense user features).
    """

    def __init__(self, features, kind="linear", index=None):
        f = np.array(features, dtype=np.float64, copy=True)
        if f.ndim != 3:
            raise MdpError(f"features must have shape (S, A, n), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise MdpError("features must be finite")
        f.setflags(write=False)
        self.features = f
        self.kind = kind
        self.index = index
        norms = np.linalg.norm(f, axis=2)
        self.grad_norm_bound = float(norms.max()) if norms.size else 0.0
        self.hessian_norm_bound = 0.0

    @classmethod
    def tabular(cls, n_states, n_actions, index=None):
        """Indicator features; ``index[s, a]`` names the coordinate (default ``s*A + a``)."""
        if index is None:
            index = np.arange(n_states * n_actions).reshape(n_states, n_actions)
        index = np.asarray(index, dtype=np.int64)
        if index.shape != (n_states, n_actions) or index.min() < 0:
            raise MdpError("index map must be a nonnegative (S, A) integer array")
        dim = int(index.max()) + 1
        f = np.zeros((n_states, n_actions, dim))
        f[np.arange(n_states)[:, None], np.arange(n_actions)[None, :], index] = 1.0
        return cls(f, kind="tabular", index=index)

    @classmethod
    def linear(cls, features):
        return cls(features, kind="linear")

    @property
    def n_states(self) -> int:
        return self.features.shape[0]

    @property
    def n_actions(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def flat_features(self) -> np.ndarray:
        """Features as an ``(S*A, n)`` matrix, rows ordered ``s*A + a``."""
        return self.features.reshape(-1, self.dim)

    def _theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise MdpError(f"theta must have length {self.dim}, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise MdpError("theta has non-finite entries")
        return theta

    def reward_table(self, theta) -> np.ndarray:
        return self.features @ self._theta(theta)

    def grad(self, theta, s, a) -> np.ndarray:
        self._theta(theta)
        if not (0 <= s < self.n_states and 0 <= a < self.n_actions):
            raise MdpError(f"pair ({s}, {a}) out of range")
        return self.features[s, a].copy()

    def hessian(self, theta, s, a) -> np.ndarray:
        self.grad(theta, s, a)
        return np.zeros((self.dim, self.dim))

    # io -------------------------------------------------------------------

    def features_to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("state,action," + ",".join(f"f{i}" for i in range(self.dim)) + "\n")
        for s in range(self.n_states):
            for a in range(self.n_actions):
                buf.write(f"{s},{a}," + ",".join(repr(float(x)) for x in self.features[s, a]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_feature_csv(cls, text, n_states=None, n_actions=None):
        """Load a linear model from ``state,action,f0,f1,...`` rows."""
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = lines[0].split(",")
        if header[:2] != ["state", "action"] or not header[2:]:
            raise MdpError("feature CSV header must be 'state,action,f0,...'")
        rows = [ln.split(",") for ln in lines[1:]]
        s_idx = np.array([int(r[0]) for r in rows])
        a_idx = np.array([int(r[1]) for r in rows])
        vals = np.array([[float(x) for x in r[2:]] for r in rows])
        n_states = n_states or int(s_idx.max()) + 1
        n_actions = n_actions or int(a_idx.max()) + 1
        f = np.zeros((n_states, n_actions, len(header) - 2))
        seen = np.zeros((n_states, n_actions), dtype=bool)
        f[s_idx, a_idx] = vals
        seen[s_idx, a_idx] = True
        if not seen.all():
            raise MdpError("feature CSV does not cover every (state, action) pair")
        return cls.linear(f)


def reward_table(model: RewardModel, theta) -> np.ndarray:
    return model.reward_table(theta)


def reward_grad(model: RewardModel, theta, s, a) -> np.ndarray:
    return model.grad(theta, s, a)


def reward_hessian(model: RewardModel, theta, s, a) -> np.ndarray:
    return model.hessian(theta, s, a)


def params_to_json(theta) -> str:
    return json.dumps([float(x) for x in np.asarray(theta, dtype=np.float64)])


def params_from_json(text) -> np.ndarray:
    data = json.loads(text)
    if not isinstance(data, list):
        raise MdpError("parameter vector JSON must be an array")
    return np.asarray(data, dtype=np.float64)
