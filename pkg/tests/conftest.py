import numpy as np
import pytest

from confope import load_env, population_model, unconfounded_lift


@pytest.fixture(scope="session")
def toy_env():
    return load_env("toy")


def env_population(env):
    """Population-mode empirical model for an unconfounded benchmark env."""
    return population_model(unconfounded_lift(env.mdp, env.pi_b))


def random_confounded(rng, n_states=3, n_actions=2, p=None):
    """A random ConfoundedMDP for property tests."""
    from confope import ConfoundedMDP

    X, A = n_states, n_actions
    transitions_u = rng.dirichlet(np.ones(X), size=(X, 2, A))
    behavior_u = rng.dirichlet(np.ones(A), size=(X, 2))
    rewards = rng.normal(size=(X, A, X))
    chi = rng.dirichlet(np.ones(X))
    if p is None:
        p = float(rng.uniform(0.2, 0.8))
    return ConfoundedMDP(
        n_states=X, n_actions=A, transitions_u=transitions_u,
        behavior_u=behavior_u, p_u=p, rewards=rewards,
        initial_dist=chi, discount=0.9,
    )
