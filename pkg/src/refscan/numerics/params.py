"""Named parameter storage with matching gradient buffers."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..errors import ConfigError, DimensionError
from .tape import Var


class ParamStore:
    """Flat name -> float64 array map plus same-shaped gradients.

    Names are unique; gradient shape always matches the parameter shape.
    The store remembers the seed it was initialized from so checkpoints can
    reproduce it.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64, copy=True)
        self._params[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self._params:
            raise ConfigError(f"unknown parameter {name!r}")
        if self._params[name].shape != np.shape(value):
            raise DimensionError(
                f"parameter {name!r}: cannot assign shape {np.shape(value)} "
                f"over {self._params[name].shape}"
            )
        self._params[name][...] = value

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._params.items())

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    def as_vars(self) -> dict[str, Var]:
        """Fresh leaf Vars viewing the current parameter values."""
        return {name: Var(arr) for name, arr in self._params.items()}

    def accumulate_grads(self, param_vars: Mapping[str, Var]) -> None:
        """Fold gradients from a backward pass into the store buffers."""
        for name, var in param_vars.items():
            if var.grad is not None:
                self._grads[name] += var.grad

    def num_scalars(self) -> int:
        return sum(int(a.size) for a in self._params.values())
