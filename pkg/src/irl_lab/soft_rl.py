"""Entropy-regularized planning on tabular MDPs.

Soft value iteration, trajectory sampling, the discounted occupancy measure,
and exact finite-horizon return evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .mdp import RewardTable, TabularMdp, expected_state_action


@dataclass(frozen=True)
class SoftSolution:
    """Fixed point of the soft Bellman backup and its max-ent optimal policy.

    Satisfies v = w * logsumexp(q / w) per state and policy = exp((q - v) / w),
    where w is the entropy weight.
    """

    q: np.ndarray
    v: np.ndarray
    policy: np.ndarray
    iterations_used: int
    residual: float
    converged: bool
    entropy_weight: float

    def to_json_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "v": self.v.tolist(),
            "policy": self.policy.tolist(),
            "iterations_used": self.iterations_used,
            "residual": self.residual,
            "converged": self.converged,
            "entropy_weight": self.entropy_weight,
        }


def soft_value_iteration(
    mdp: TabularMdp,
    reward: RewardTable | None = None,
    tolerance: float = 1e-8,
    max_iters: int = 10_000,
    entropy_weight: float = 1.0,
    *,
    v_init: np.ndarray | None = None,
) -> SoftSolution:
    """Iterate the soft Bellman backup to a fixed point.

    Q <- r(s,a) + discount * T @ V and V <- w * logsumexp(Q / w, actions),
    stopping when the sup-norm change in V drops to `tolerance`.  The reward
    defaults to the MDP's own table; transition-arity rewards are collapsed to
    (s, a) by expectation under the dynamics.  Hitting `max_iters` without
    converging is flagged on the solution, not fatal.  `v_init` warm-starts
    the value table.
    """
    if reward is None:
        reward = mdp.reward
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if entropy_weight <= 0:
        raise ValueError("entropy_weight must be positive")
    r_sa = expected_state_action(reward, mdp.transition)
    if not np.all(np.isfinite(r_sa)):
        raise ValueError("reward contains non-finite entries")

    w = entropy_weight
    if v_init is None:
        v = np.zeros(mdp.n_states)
    else:
        v = np.array(v_init, dtype=float)
        if v.shape != (mdp.n_states,):
            raise ValueError("v_init must have one entry per state")

    q = r_sa + mdp.discount * (mdp.transition @ v)
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        q = r_sa + mdp.discount * (mdp.transition @ v)
        v_new = w * logsumexp(q / w, axis=1)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= tolerance:
            converged = True
            break
    policy = np.exp((q - v[:, None]) / w)
    policy /= policy.sum(axis=1, keepdims=True)
    return SoftSolution(
        q=q,
        v=v,
        policy=policy,
        iterations_used=iterations,
        residual=residual,
        converged=converged,
        entropy_weight=w,
    )


def uniform_policy(mdp: TabularMdp) -> np.ndarray:
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def _check_policy(mdp: TabularMdp, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError("policy must have shape (n_states, n_actions)")
    if (policy < 0).any() or np.max(np.abs(policy.sum(axis=1) - 1.0)) > 1e-8:
        raise ValueError("policy rows must be probability distributions")
    return policy


@dataclass(frozen=True)
class Trajectory:
    """One sampled episode: `horizon` (state, action) pairs plus the final state."""

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=np.int64)
        actions = np.array(self.actions, dtype=np.int64)
        if states.ndim != 1 or actions.ndim != 1 or len(states) != len(actions) + 1:
            raise ValueError("a trajectory needs len(states) == len(actions) + 1")
        states.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states[:-1].tolist(), self.actions.tolist()))

    @property
    def final_state(self) -> int:
        return int(self.states[-1])


def _sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Draw one index per row of a (n, k) probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_trajectories(mdp: TabularMdp, policy, n: int, seed: int) -> list[Trajectory]:
    """Roll out `n` episodes of length mdp.horizon; deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one trajectory")
    policy = _check_policy(mdp, policy)
    rng = np.random.default_rng(seed)
    horizon = mdp.horizon
    states = np.empty((n, horizon + 1), dtype=np.int64)
    actions = np.empty((n, horizon), dtype=np.int64)
    start = np.broadcast_to(mdp.initial_dist, (n, mdp.n_states))
    current = _sample_categorical(rng, start)
    states[:, 0] = current
    for t in range(horizon):
        acts = _sample_categorical(rng, policy[current])
        nxt = _sample_categorical(rng, mdp.transition[current, acts])
        actions[:, t] = acts
        states[:, t + 1] = nxt
        current = nxt
    return [Trajectory(states[i], actions[i]) for i in range(n)]


@dataclass(frozen=True)
class OccupancyMeasure:
    """Discount-weighted visitation distribution over (s, a, s') triples."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 3:
            raise ValueError("occupancy needs a (s, a, s') tensor")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def state_marginal(self) -> np.ndarray:
        return self.rho.sum(axis=(1, 2))

    def state_action_marginal(self) -> np.ndarray:
        return self.rho.sum(axis=2)

    def to_json_dict(self) -> dict:
        return {"rho": self.rho.tolist()}


def occupancy(mdp: TabularMdp, policy) -> OccupancyMeasure:
    """Exact discounted occupancy of a policy over the MDP's horizon.

    Forward recursion over state marginals; step t contributes with weight
    discount**t and the total is normalized to 1.
    """
    policy = _check_policy(mdp, policy)
    d = mdp.initial_dist.copy()
    rho = np.zeros((mdp.n_states, mdp.n_actions, mdp.n_states))
    scale = 1.0
    for _ in range(mdp.horizon):
        flow = d[:, None, None] * policy[:, :, None] * mdp.transition
        rho += scale * flow
        d = flow.sum(axis=(0, 1))
        scale *= mdp.discount
    rho /= rho.sum()
    return OccupancyMeasure(rho)


def evaluate_return(
    mdp: TabularMdp,
    policy,
    reward: RewardTable | None = None,
    include_entropy: bool = False,
    *,
    entropy_weight: float = 1.0,
) -> float:
    """Exact expected discounted return over the MDP's horizon.

    With `include_entropy`, each step also earns entropy_weight times the
    policy entropy at the visited state.
    """
    if reward is None:
        reward = mdp.reward
    policy = _check_policy(mdp, policy)
    r_sa = expected_state_action(reward, mdp.transition)
    per_state = (policy * r_sa).sum(axis=1)
    if include_entropy:
        per_state = per_state - entropy_weight * xlogy(policy, policy).sum(axis=1)
    step = np.einsum("sa,sap->sp", policy, mdp.transition)
    d = mdp.initial_dist.copy()
    total = 0.0
    scale = 1.0
    for _ in range(mdp.horizon):
        total += scale * float(d @ per_state)
        d = d @ step
        scale *= mdp.discount
    return total
