"""Environment implementations and the name-based registry."""

from __future__ import annotations

from .cartpole import CartPoleEnv, CartPoleParams
from .duelpong import DuelPongEnv, DuelPongParams
from .figure2 import figure2_env, figure2_mdp
from .toypong import ToyPongEnv, ToyPongParams

_REGISTRY = {
    "cartpole": lambda **kw: CartPoleEnv(CartPoleParams(), **kw),
    "toypong": lambda **kw: ToyPongEnv(ToyPongParams(), **kw),
    "duelpong": lambda **kw: DuelPongEnv(DuelPongParams(), **kw),
    "figure2": lambda **kw: figure2_env(**kw),
}


def env_names():
    return sorted(_REGISTRY)


def get_env(name, **kwargs):
    """Instantiate a registered environment by id with default parameters."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown environment {name!r}; known ids: {', '.join(env_names())}"
        ) from None
    return factory(**kwargs)


__all__ = [
    "CartPoleEnv",
    "CartPoleParams",
    "DuelPongEnv",
    "DuelPongParams",
    "ToyPongEnv",
    "ToyPongParams",
    "figure2_env",
    "figure2_mdp",
    "get_env",
    "env_names",
]
