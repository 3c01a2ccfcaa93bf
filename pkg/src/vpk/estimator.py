"""Minimal estimator base class with sklearn-compatible get/set_params."""

from __future__ import annotations

import inspect


class NotFittedError(ValueError, AttributeError):
    """Raised when predict/transform is called before fit."""


class BaseEstimator:
    """Parameter-introspection base for estimators.

    Subclasses must accept all hyperparameters as keyword arguments of
    ``__init__`` and store them under the same attribute names, nothing else.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return sorted(
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        )

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({params})"


def check_is_fitted(estimator, attribute):
    """Raise NotFittedError unless ``estimator`` carries ``attribute``."""
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"this {type(estimator).__name__} instance is not fitted yet; "
            "call fit before using this method"
        )
