"""
named parameter containers.

a ParameterGroup owns Parameters, non-learnable Buffers (running
statistics) and child groups. names are dotted paths fixed at construction,
so a state dict saved by one process loads into a group built from the same
configuration in another.
"""

import contextlib
from typing import Iterator

import numpy as np

from dtrsum.core.errors import CheckpointError, ShapeError
from dtrsum.core.tensor import DTYPE, Parameter


class Buffer:
    """named array that is saved with the model but never optimized."""

    def __init__(self, data, name: str):
        self.data = np.array(data, dtype=DTYPE, order="C")
        self.name = name

    def __repr__(self):
        return f"<Buffer {self.name} shape={self.data.shape}>"


class ParameterGroup:
    """base class for every model component."""

    def __init__(self, prefix: str):
        self.prefix = prefix

    def _path(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def _children(self) -> Iterator[object]:
        for value in vars(self).values():
            if isinstance(value, (list, tuple)):
                yield from value
            else:
                yield value

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for child in self._children():
            if isinstance(child, Parameter):
                yield child.name, child
            elif isinstance(child, ParameterGroup):
                yield from child.named_parameters()

    def parameters(self) -> list[Parameter]:
        return [param for _, param in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, Buffer]]:
        for child in self._children():
            if isinstance(child, Buffer):
                yield child.name, child
            elif isinstance(child, ParameterGroup):
                yield from child.named_buffers()

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def fill(self, value: float) -> None:
        """overwrite every parameter with a constant."""

        for param in self.parameters():
            param.data[...] = value

    def state_dict(self) -> dict[str, np.ndarray]:
        """copies of all parameter and buffer arrays keyed by name."""

        state = {name: param.data.copy() for name, param in self.named_parameters()}
        state.update({name: buffer.data.copy() for name, buffer in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        copy arrays into this group's parameters and buffers.

        raises:
            CheckpointError: if names differ from the group's
            ShapeError: if an array's shape differs from its slot
        """

        slots = dict(self.named_parameters())
        slots.update(dict(self.named_buffers()))
        missing = sorted(set(slots) - set(state))
        unexpected = sorted(set(state) - set(slots))
        if missing or unexpected:
            raise CheckpointError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, slot in slots.items():
            array = np.asarray(state[name], dtype=DTYPE)
            if array.shape != slot.data.shape:
                raise ShapeError(f"{name}: expected shape {slot.data.shape}, got {array.shape}")
            slot.data[...] = array


@contextlib.contextmanager
def frozen(*groups: ParameterGroup):
    """
    temporarily stop gradient flow into the given groups.

    gradients still propagate through their computations to upstream inputs.
    """

    params = [param for group in groups for param in group.parameters()]
    flags = [param.requires_grad for param in params]
    for param in params:
        param.requires_grad = False
    try:
        yield
    finally:
        for param, flag in zip(params, flags):
            param.requires_grad = flag


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""

    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)
