"""Named trainable parameters with seeded, order-independent initialization."""

from __future__ import annotations

import zlib

import numpy as np

from .autodiff import Tensor


class ParamStore:
    """Registry of named parameter tensors.

    Each parameter draws from its own RNG keyed by (seed, name), so the same
    seed reproduces identical values bit-for-bit regardless of the order in
    which a model registers parameters. Weights are uniform in
    (-1/sqrt(fan_in), +1/sqrt(fan_in)); biases start at zero.
    """

    def __init__(self, seed: int, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}

    def _rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def weight(self, name: str, *shape: int, fan_in: int | None = None) -> Tensor:
        if name in self._params:
            existing = self._params[name]
            if existing.shape != shape:
                raise ValueError(f"parameter {name!r} re-registered with shape {shape}, "
                                 f"stored shape is {existing.shape}")
            return existing
        fan = shape[-1] if fan_in is None else fan_in
        limit = 1.0 / np.sqrt(fan)
        data = self._rng(name).uniform(-limit, limit, size=shape).astype(self.dtype)
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def zeros(self, name: str, *shape: int) -> Tensor:
        if name in self._params:
            existing = self._params[name]
            if existing.shape != shape:
                raise ValueError(f"parameter {name!r} re-registered with shape {shape}, "
                                 f"stored shape is {existing.shape}")
            return existing
        t = Tensor(np.zeros(shape, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def tensors(self) -> list[Tensor]:
        return [self._params[n] for n in self.names()]

    def items(self):
        return ((n, self._params[n]) for n in self.names())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {n: self._params[n].data.copy() for n in self.names()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        if missing:
            raise ValueError(f"missing parameters in state: {sorted(missing)}")
        for name, tensor in self._params.items():
            src = np.asarray(arrays[name], dtype=self.dtype)
            if src.shape != tensor.shape:
                raise ValueError(f"parameter {name!r}: state shape {src.shape} "
                                 f"does not match model shape {tensor.shape}")
            tensor.data = src.copy()
            tensor.grad = None
