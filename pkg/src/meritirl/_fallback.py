"""Numpy implementations of the routines in ``_kernels.pyx``.

Same signatures, same random-number consumption, same outputs (visit counts
are accumulated in the same order, so they agree bit for bit).
"""
import numpy as np


def _pick_rows(cum, u):
    # vectorised "first index with cum > u" for a batch of rows
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def sample_rollouts(cum_start, cum_p, cum_pi, uniforms, first_action):
    m, horizon = uniforms.shape[0], uniforms.shape[1]
    n_states = cum_p.shape[0]
    states = np.empty((m, horizon), dtype=np.int64)
    actions = np.empty((m, horizon), dtype=np.int64)
    s = np.minimum(np.searchsorted(cum_start, uniforms[:, 0, 0], side="right"), n_states - 1)
    if first_action >= 0:
        a = np.full(m, first_action, dtype=np.int64)
    else:
        a = _pick_rows(cum_pi[s], uniforms[:, 0, 1])
    states[:, 0] = s
    actions[:, 0] = a
    for i in range(1, horizon):
        s = _pick_rows(cum_p[s, a], uniforms[:, i, 0])
        a = _pick_rows(cum_pi[s], uniforms[:, i, 1])
        states[:, i] = s
        actions[:, i] = a
    return states, actions


def discounted_counts(states, actions, n_states, n_actions, powers):
    m, horizon = states.shape
    n_pairs = n_states * n_actions
    out = np.zeros((m, n_pairs))
    flat = states * n_actions + actions
    for k in range(m):
        out[k] = np.bincount(flat[k], weights=powers[:horizon], minlength=n_pairs)
    return out


def soft_value_iteration(transition, reward, gamma, v0, tol, max_iter):
    n_states, n_actions, _ = transition.shape
    flat_p = transition.reshape(n_states * n_actions, n_states)
    v = np.array(v0, dtype=np.float64, copy=True)
    w = v.copy()
    residual = np.inf
    it = 0
    while it < max_iter:
        q = reward + gamma * (flat_p @ v).reshape(n_states, n_actions)
        qmax = q.max(axis=1)
        w = qmax + np.log(np.exp(q - qmax[:, None]).sum(axis=1))
        residual = float(np.max(np.abs(w - v))) if n_states else 0.0
        it += 1
        if residual <= tol:
            break
        v = w
    return v, w, it, residual
