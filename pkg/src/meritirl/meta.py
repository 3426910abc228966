"""Meta-learning a reward prior over related tasks.

Each task adapts its own parameter ``phi`` from the prior by gradient descent
on its single training trajectory plus ``lam / (2 (1 - gamma)) ||phi - prior||^2``.
The prior then moves along the implicit hyper-gradient of the evaluation
loss at the adapted parameters.

Trajectory loss: ``V_phi(s_0) - sum_t gamma^t r_phi(s_t, a_t)`` (the maximum
entropy negative log-likelihood without dynamics terms). It is convex in
``phi`` for linear rewards and its gradient is the feature-matching
difference used throughout.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .envs import MetaTask
from .mdp import MdpError, Start, Trajectory, discounted_occupancy, discounted_pair_counts, sample_paths
from .mdp import truncation_horizon
from .online import feature_values, solve_reward
from .rewards import RewardModel

CHECKPOINT_SCHEMA = "meritirl.meta_prior/1"


class AdmissibilityError(ValueError):
    """``lam`` is below the value the strong-convexity argument needs."""


def smoothness_bound(grad_bound: float, hess_bound: float, discount: float, lam: float) -> float:
    """``2 Ch / (1 - gamma) + 4 Cg^3 / (1 - gamma)^4 + lam``."""
    g = 1.0 - discount
    return 2.0 * hess_bound / g + 4.0 * grad_bound**3 / g**4 + lam


@dataclass(frozen=True)
class MetaConfig:
    """Inner/outer schedules and the admissibility report.

    ``eta=None`` uses ``0.4 * smoothness``. With the worst-case smoothness
    bound the admissible ``lam`` (``lam >= smoothness / 2 + eta``) is usually
    far larger than anything useful, so the check is reported through
    ``admissible`` / ``lambda_min`` and only enforced when ``strict``.
    """

    lam: float
    discount: float
    grad_bound: float
    hess_bound: float = 0.0
    eta: float | None = None
    K: int = 50
    N: int = 20
    B: int = 4
    tail_tol: float = 1e-8
    outer_scale: float = 1.0
    eval_start: str = "initial"  # or "per_trajectory"
    strict: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise MdpError("lam must be > 0")
        if self.K < 0 or self.N < 0 or self.B < 1:
            raise MdpError("K, N must be >= 0 and B >= 1")
        if self.eval_start not in ("initial", "per_trajectory"):
            raise MdpError(f"unknown eval_start {self.eval_start!r}")
        if self.eta is None:
            object.__setattr__(self, "eta", 0.4 * self.smoothness)
        if not self.eta > 0:
            raise MdpError("eta must be > 0")
        if self.strict and not self.admissible:
            raise AdmissibilityError(
                f"lam={self.lam:g} is below the admissible minimum {self.lambda_min:g} for eta={self.eta:g}"
            )

    @classmethod
    def for_model(cls, model: RewardModel, discount: float, lam: float, **kw) -> "MetaConfig":
        return cls(lam, discount, model.grad_norm_bound, model.hessian_norm_bound, **kw)

    @property
    def smoothness(self) -> float:
        return smoothness_bound(self.grad_bound, self.hess_bound, self.discount, self.lam)

    @property
    def lambda_min(self) -> float:
        """Smallest ``lam`` with ``lam >= smoothness(lam) / 2 + eta`` at the current ``eta``."""
        return smoothness_bound(self.grad_bound, self.hess_bound, self.discount, 0.0) + 2.0 * self.eta

    @property
    def admissible(self) -> bool:
        return self.lam >= self.smoothness / 2.0 + self.eta

    def inner_step(self, k: int) -> float:
        return (1.0 - self.discount) / (self.eta * (k + 1))

    def outer_step(self, n: int) -> float:
        return self.outer_scale / math.sqrt(n + 1)

    def horizon(self) -> int:
        return truncation_horizon(self.discount, max(self.grad_bound, 1e-300), self.tail_tol)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# losses and gradients


def _discounted_features(model, mdp, traj: Trajectory) -> np.ndarray:
    powers = mdp.discount ** np.arange(len(traj), dtype=np.float64)
    return powers @ model.features[traj.states, traj.actions]


def _discounted_reward(reward, mdp, traj: Trajectory) -> float:
    powers = mdp.discount ** np.arange(len(traj), dtype=np.float64)
    return float(powers @ reward[traj.states, traj.actions])


def trajectory_loss(model, mdp, phi, traj: Trajectory, sol=None) -> float:
    """``V_phi(s_0) - sum_t gamma^t r_phi(s_t, a_t)``."""
    if sol is None:
        sol = solve_reward(model, mdp, phi)
    return float(sol.v[traj.states[0]]) - _discounted_reward(model.reward_table(phi), mdp, traj)


def lower_objective(model, mdp, phi, task: MetaTask, prior, cfg: MetaConfig, sol=None) -> float:
    diff = np.asarray(phi) - prior
    reg = 0.5 * cfg.lam / (1.0 - mdp.discount) * float(diff @ diff)
    return trajectory_loss(model, mdp, phi, task.d_train[0], sol) + reg


def eval_loss(model, mdp, phi, task: MetaTask, cfg: MetaConfig, sol=None) -> float:
    """Evaluation loss summed over ``d_eval``; start values use P0 or each trajectory's own start."""
    if sol is None:
        sol = solve_reward(model, mdp, phi)
    reward = model.reward_table(phi)
    total = 0.0
    for traj in task.d_eval:
        if cfg.eval_start == "initial":
            v0 = float(mdp.initial_dist @ sol.v)
        else:
            v0 = float(sol.v[traj.states[0]])
        total += v0 - _discounted_reward(reward, mdp, traj)
    return total


def _start_features(model, mdp, policy, start, mode, rng, horizon, n=1):
    if mode == "exact":
        if start is None:
            return mdp.initial_dist @ feature_values(model, mdp, policy)
        return feature_values(model, mdp, policy)[start]
    where = None if start is None else Start.at_state(int(start))
    states, actions = sample_paths(mdp, policy, where, horizon, n, rng)
    return discounted_pair_counts(mdp, states, actions).sum(axis=0) @ model.flat_features


def lower_gradient(model, mdp, phi, task: MetaTask, prior, cfg: MetaConfig, mode="exact", rng=None, sol=None):
    """``E_phi[sum gamma^t f | s_0^train] - sum gamma^t f(train) + lam / (1 - gamma) (phi - prior)``."""
    if mode not in ("exact", "sampled"):
        raise MdpError(f"unknown mode {mode!r}")
    phi = np.asarray(phi, dtype=np.float64)
    if sol is None:
        sol = solve_reward(model, mdp, phi)
    traj = task.d_train[0]
    learner = _start_features(model, mdp, sol.policy, int(traj.states[0]), mode, rng, cfg.horizon())
    return learner - _discounted_features(model, mdp, traj) + cfg.lam / (1.0 - mdp.discount) * (phi - prior)


def eval_gradient(model, mdp, phi, task: MetaTask, cfg: MetaConfig, mode="exact", rng=None, sol=None):
    """Gradient of ``eval_loss`` (``|D_eval| E[sum gamma^t f | S_0 ~ P0] - sum_v sum_t gamma^t f``)."""
    if sol is None:
        sol = solve_reward(model, mdp, phi)
    m = len(task.d_eval)
    expert = sum(_discounted_features(model, mdp, traj) for traj in task.d_eval)
    if cfg.eval_start == "initial":
        if mode == "exact":
            learner = m * _start_features(model, mdp, sol.policy, None, "exact", rng, 0)
        else:
            learner = _start_features(model, mdp, sol.policy, None, mode, rng, cfg.horizon(), n=m)
    else:
        learner = sum(
            _start_features(model, mdp, sol.policy, int(traj.states[0]), mode, rng, cfg.horizon())
            for traj in task.d_eval
        )
    return learner - expert


def _hessian_term(model, mdp, phi, task, sol):
    """``E[sum gamma^t d2 r | s_0^train] - sum gamma^t d2 r(train)``; zero for linear families."""
    n = model.dim
    if model.hessian_norm_bound == 0.0:
        return np.zeros((n, n))
    traj = task.d_train[0]
    occ = discounted_occupancy(mdp, sol.policy, Start.at_state(int(traj.states[0]))).d
    out = np.zeros((n, n))
    for s, a in zip(*np.nonzero(occ)):
        out += occ[s, a] * model.hessian(phi, s, a)
    for i, (s, a) in enumerate(traj.pairs()):
        out -= mdp.discount**i * model.hessian(phi, s, a)
    return out


# ---------------------------------------------------------------------------
# adaptation and the outer loop


@dataclass(frozen=True, eq=False)
class AdaptationResult:
    phi: np.ndarray
    losses: np.ndarray  # lower objective before each step and at the end
    path: np.ndarray | None = None  # phi_0 .. phi_K when requested


@dataclass(frozen=True, eq=False)
class HyperGradient:
    h: np.ndarray
    system_norm: float


def adapt_task(
    model, task: MetaTask, prior, cfg: MetaConfig, mode="exact", rng=None, K=None, keep_path=False
) -> AdaptationResult:
    """``K`` steps ``phi <- phi - beta_k g(phi)`` from ``phi_0 = prior``."""
    mdp = task.mdp
    K = cfg.K if K is None else K
    phi = np.array(prior, dtype=np.float64, copy=True)
    losses = np.empty(K + 1)
    path = [phi.copy()] if keep_path else None
    v_warm = None
    for k in range(K + 1):
        sol = solve_reward(model, mdp, phi, v0=v_warm)
        v_warm = sol.v
        losses[k] = lower_objective(model, mdp, phi, task, prior, cfg, sol)
        if k == K:
            break
        g = lower_gradient(model, mdp, phi, task, prior, cfg, mode, rng, sol)
        phi = phi - cfg.inner_step(k) * g
        if not np.all(np.isfinite(phi)):
            raise FloatingPointError(f"adaptation diverged at inner step {k}")
        if keep_path:
            path.append(phi.copy())
    return AdaptationResult(phi, losses, np.array(path) if keep_path else None)


def task_optimum(model, task: MetaTask, prior, cfg: MetaConfig, gtol=1e-9) -> np.ndarray:
    """Minimiser of the lower objective to gradient norm ``gtol`` (exact gradients)."""
    mdp = task.mdp
    prior = np.asarray(prior, dtype=np.float64)

    def fun(phi):
        sol = solve_reward(model, mdp, phi)
        return lower_objective(model, mdp, phi, task, prior, cfg, sol), lower_gradient(
            model, mdp, phi, task, prior, cfg, "exact", None, sol
        )

    res = minimize(fun, prior.copy(), jac=True, method="BFGS", options={"gtol": gtol, "maxiter": 20_000})
    phi = res.x
    # BFGS stalls on line-search precision near 1e-7; finish with Newton steps
    # on a central-difference Hessian of the exact gradient
    grad = lambda p: fun(p)[1]  # noqa: E731
    for _ in range(20):
        g = grad(phi)
        if np.linalg.norm(g) <= gtol:
            return phi
        hess = np.empty((phi.size, phi.size))
        for k in range(phi.size):
            e = np.zeros_like(phi)
            e[k] = 1e-5
            hess[:, k] = (grad(phi + e) - grad(phi - e)) / 2e-5
        phi = phi - np.linalg.solve(0.5 * (hess + hess.T), g)
    raise RuntimeError(f"task optimum stalled at gradient norm {np.linalg.norm(g):.3e}")


def hyper_gradient(model, task: MetaTask, result: AdaptationResult, cfg: MetaConfig, mode="exact", rng=None):
    """Solve ``[I + (1 - gamma)/lam H] h = eval_gradient(phi_K)``."""
    mdp = task.mdp
    sol = solve_reward(model, mdp, result.phi)
    grad = eval_gradient(model, mdp, result.phi, task, cfg, mode, rng, sol)
    scaled = (1.0 - mdp.discount) / cfg.lam * _hessian_term(model, mdp, result.phi, task, sol)
    norm = float(np.linalg.norm(scaled, 2)) if scaled.any() else 0.0
    if norm >= 1.0:
        raise AdmissibilityError(
            f"hyper-gradient system may be singular (scaled Hessian norm {norm:.3g}); increase lam"
        )
    if norm == 0.0:
        return HyperGradient(grad, 1.0)
    matrix = np.eye(model.dim) + scaled
    return HyperGradient(np.linalg.solve(matrix, grad), float(np.linalg.norm(matrix, 2)))


@dataclass
class MetaTrainResult:
    theta_bar: np.ndarray
    outer_losses: np.ndarray
    priors: list = field(default_factory=list)


def meta_train(model, task_sampler, cfg: MetaConfig, rng, theta_bar0=None, mode="exact") -> MetaTrainResult:
    """``N`` outer steps ``prior <- prior - tau_n / B * sum_j h_j`` over sampled task batches.

    ``task_sampler(rng)`` returns a ``MetaTask``. ``outer_losses[n]`` is the
    mean evaluation loss of batch ``n`` at its adapted parameters.
    """
    prior = np.zeros(model.dim) if theta_bar0 is None else np.array(theta_bar0, dtype=np.float64)
    losses = np.empty(cfg.N)
    priors = [prior.copy()]
    for n in range(cfg.N):
        hs = []
        batch_loss = 0.0
        for _ in range(cfg.B):
            task = task_sampler(rng)
            res = adapt_task(model, task, prior, cfg, mode, rng)
            hs.append(hyper_gradient(model, task, res, cfg, mode, rng).h)
            batch_loss += eval_loss(model, task.mdp, res.phi, task, cfg)
        losses[n] = batch_loss / cfg.B
        prior = prior - cfg.outer_step(n) / cfg.B * np.sum(hs, axis=0)
        if not np.all(np.isfinite(prior)):
            raise FloatingPointError(f"meta-prior became non-finite at outer iteration {n}")
        priors.append(prior.copy())
    return MetaTrainResult(prior, losses, priors)


def save_checkpoint(path, theta_bar, cfg: MetaConfig) -> None:
    data = {
        "schema": CHECKPOINT_SCHEMA,
        "dim": int(len(theta_bar)),
        "theta_bar": [float(x) for x in theta_bar],
        "lambda": cfg.lam,
        "config_hash": cfg.digest(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path, dim: int | None = None) -> tuple[np.ndarray, dict]:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != CHECKPOINT_SCHEMA:
        raise MdpError(f"unsupported checkpoint schema {data.get('schema')!r}")
    theta = np.asarray(data["theta_bar"], dtype=np.float64)
    if len(theta) != data["dim"] or (dim is not None and len(theta) != dim):
        raise MdpError("checkpoint dimension mismatch")
    return theta, data
