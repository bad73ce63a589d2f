import numpy as np
import pytest

from irl_lab.mdp import RewardTable, paper_tabular_mdp, random_mdp


@pytest.fixture(scope="session")
def bench_mdp():
    """The 16-state, 4-action benchmark instance used across suites."""
    return paper_tabular_mdp(seed=7)


@pytest.fixture
def tiny_mdp():
    """A small random MDP for loop-oracle comparisons."""
    r = np.zeros(3)
    r[0] = 1.0
    return random_mdp(3, 2, RewardTable("state_only", r), seed=11, horizon=6)


def small_random_mdps(n_states_max=4, n_actions_max=3, seeds=range(20), horizon=8):
    """Generator of small instances with varying shapes and reward arities."""
    for seed in seeds:
        rng = np.random.default_rng(seed)
        n_states = int(rng.integers(2, n_states_max + 1))
        n_actions = int(rng.integers(1, n_actions_max + 1))
        kind = ("state_only", "state_action", "transition")[seed % 3]
        if kind == "state_only":
            values = rng.normal(size=n_states)
        elif kind == "state_action":
            values = rng.normal(size=(n_states, n_actions))
        else:
            values = rng.normal(size=(n_states, n_actions, n_states))
        yield random_mdp(
            n_states,
            n_actions,
            RewardTable(kind, values),
            seed=seed + 100,
            horizon=horizon,
        )
