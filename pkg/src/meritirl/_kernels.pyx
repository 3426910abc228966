# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: inverse-CDF rollout sampling, discounted visit
counting and the soft Bellman fixed-point iteration.

Every routine here has a numpy twin in ``_fallback.py`` with identical
inputs, outputs and random-number consumption.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

cnp.import_array()


cdef inline Py_ssize_t _pick(const double* cum, Py_ssize_t n, double u) noexcept nogil:
    # first index with cum[j] > u; clamp guards against round-off in cum[n-1]
    cdef Py_ssize_t j
    for j in range(n):
        if cum[j] > u:
            return j
    return n - 1


def sample_rollouts(const double[::1] cum_start,
                    const double[:, :, ::1] cum_p,
                    const double[:, ::1] cum_pi,
                    const double[:, :, ::1] uniforms,
                    long first_action):
    cdef Py_ssize_t m = uniforms.shape[0]
    cdef Py_ssize_t horizon = uniforms.shape[1]
    cdef Py_ssize_t n_states = cum_p.shape[0]
    cdef Py_ssize_t n_actions = cum_p.shape[1]
    states_arr = np.empty((m, horizon), dtype=np.int64)
    actions_arr = np.empty((m, horizon), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] states = states_arr
    cdef cnp.int64_t[:, ::1] actions = actions_arr
    cdef Py_ssize_t k, i, s, a
    with nogil:
        for k in range(m):
            s = _pick(&cum_start[0], n_states, uniforms[k, 0, 0])
            if first_action >= 0:
                a = first_action
            else:
                a = _pick(&cum_pi[s, 0], n_actions, uniforms[k, 0, 1])
            states[k, 0] = s
            actions[k, 0] = a
            for i in range(1, horizon):
                s = _pick(&cum_p[s, a, 0], n_states, uniforms[k, i, 0])
                a = _pick(&cum_pi[s, 0], n_actions, uniforms[k, i, 1])
                states[k, i] = s
                actions[k, i] = a
    return states_arr, actions_arr


def discounted_counts(const cnp.int64_t[:, ::1] states,
                      const cnp.int64_t[:, ::1] actions,
                      Py_ssize_t n_states, Py_ssize_t n_actions,
                      const double[::1] powers):
    cdef Py_ssize_t m = states.shape[0]
    cdef Py_ssize_t horizon = states.shape[1]
    out_arr = np.zeros((m, n_states * n_actions), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(m):
            for i in range(horizon):
                out[k, states[k, i] * n_actions + actions[k, i]] += powers[i]
    return out_arr


def soft_value_iteration(const double[:, :, ::1] transition,
                         const double[:, ::1] reward,
                         double gamma,
                         const double[::1] v0,
                         double tol,
                         long max_iter):
    """Iterate v <- log sum_a exp(r + gamma P v) until successive iterates
    differ by at most ``tol`` in sup-norm.

    Returns ``(v_prev, v_next, iterations, residual)`` where
    ``v_next = T v_prev``.
    """
    cdef Py_ssize_t n_states = transition.shape[0]
    cdef Py_ssize_t n_actions = transition.shape[1]
    v_arr = np.array(v0, dtype=np.float64, copy=True)
    w_arr = np.empty(n_states, dtype=np.float64)
    q_arr = np.empty(n_actions, dtype=np.float64)
    cdef double[::1] v = v_arr
    cdef double[::1] w = w_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t it = 0, s, a, sp
    cdef double acc, qmax, total, diff, residual = np.inf
    with nogil:
        while it < max_iter:
            residual = 0.0
            for s in range(n_states):
                qmax = -1e308
                for a in range(n_actions):
                    acc = 0.0
                    for sp in range(n_states):
                        acc = acc + transition[s, a, sp] * v[sp]
                    q[a] = reward[s, a] + gamma * acc
                    if q[a] > qmax:
                        qmax = q[a]
                total = 0.0
                for a in range(n_actions):
                    total = total + exp(q[a] - qmax)
                w[s] = qmax + log(total)
                diff = fabs(w[s] - v[s])
                if diff > residual:
                    residual = diff
            it += 1
            if residual <= tol:
                break
            for s in range(n_states):
                v[s] = w[s]
    return v_arr, w_arr, int(it), float(residual)
