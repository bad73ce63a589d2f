"""Potential-based reward shaping and sum decompositions.

Shaped rewards r'(s,a,s') = r + discount*phi(s') - phi(s) leave soft-optimal
policies unchanged; `decompose_sum` inverts tables of the form
f(s) + g(s') on a transition support.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .mdp import RewardTable, expected_state_action


@dataclass(frozen=True)
class PotentialFn:
    """State potential used to reshape rewards without changing the policy."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 1:
            raise ValueError("potential needs one value per state")
        if not np.all(np.isfinite(phi)):
            raise ValueError("potential entries must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)


def shape_reward(
    reward: RewardTable,
    phi: PotentialFn,
    discount: float,
    *,
    n_actions: int | None = None,
) -> RewardTable:
    """Return the transition-arity table r(s,a,s') + discount*phi(s') - phi(s).

    Lower-arity rewards broadcast; a state_only input needs `n_actions` to fix
    the output shape.
    """
    n_states = len(phi.phi)
    if reward.kind == "state_only":
        if n_actions is None:
            raise ValueError("shaping a state_only reward needs n_actions")
    else:
        n_actions = reward.values.shape[1]
    base = reward.as_transition(n_states, n_actions)
    shaped = base + discount * phi.phi[None, None, :] - phi.phi[:, None, None]
    return RewardTable("transition", shaped)


def advantage(solution) -> np.ndarray:
    """Soft advantage Q - V of a solved MDP; equals entropy_weight * log policy."""
    return solution.q - solution.v[:, None]


def mean_center(reward: RewardTable) -> RewardTable:
    """Subtract the arithmetic mean over all entries of the table."""
    values = reward.values - reward.values.mean()
    return RewardTable(reward.kind, values)


def centered_sup_distance(a, b) -> float:
    """Sup-norm distance between two arrays after removing each one's mean."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs((a - a.mean()) - (b - b.mean()))))


def centered_reward_error(learned: RewardTable, truth: RewardTable, transition) -> float:
    """Mean-centered sup-norm gap between two reward tables.

    Both tables are collapsed/broadcast to (s, a) arity under the given
    dynamics before centering, so tables of different kinds compare on a
    common footing and constant offsets never count.
    """
    transition = np.asarray(transition, dtype=float)
    a = expected_state_action(learned, transition)
    b = expected_state_action(truth, transition)
    return centered_sup_distance(a, b)


@dataclass(frozen=True)
class SumDecomposition:
    """Result of splitting a table into f(s) + g(s') on a support."""

    feasible: bool
    f: np.ndarray | None
    g: np.ndarray | None
    reason: str = ""


def decompose_sum(h_sum, support, *, tol: float = 1e-8) -> SumDecomposition:
    """Split `h_sum[s, s']` into f(s) + g(s') over the supported pairs.

    The support must come from decomposable dynamics for the split to be
    unique up to a constant; the gauge is pinned by f[0] = 0.  Supports whose
    constraint graph is disconnected (non-decomposable dynamics) and tables
    that are inconsistent beyond `tol` are reported infeasible.
    """
    table = np.asarray(h_sum, dtype=float)
    mask = np.asarray(support, dtype=bool)
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise ValueError("decompose_sum needs a square (s, s') table")
    if mask.shape != table.shape:
        raise ValueError("support mask must match the table shape")
    n = table.shape[0]

    f = np.full(n, np.nan)
    g = np.full(n, np.nan)
    f[0] = 0.0
    queue = deque([("row", 0)])
    while queue:
        side, i = queue.popleft()
        if side == "row":
            for j in np.nonzero(mask[i])[0]:
                if np.isnan(g[j]):
                    g[j] = table[i, j] - f[i]
                    queue.append(("col", int(j)))
        else:
            for j in np.nonzero(mask[:, i])[0]:
                if np.isnan(f[j]):
                    f[j] = table[j, i] - g[i]
                    queue.append(("row", int(j)))

    if np.isnan(f).any() or np.isnan(g).any():
        return SumDecomposition(
            feasible=False,
            f=None,
            g=None,
            reason="support constraint graph is disconnected; the split is not determined",
        )
    residual = float(np.max(np.abs((f[:, None] + g[None, :] - table)[mask])))
    if residual > tol:
        return SumDecomposition(
            feasible=False,
            f=None,
            g=None,
            reason=f"table is not a sum f(s) + g(s') on the support (residual {residual:.3g})",
        )
    return SumDecomposition(feasible=True, f=f, g=g)
