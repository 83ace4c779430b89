import logging
from typing import Iterable

import numpy as np

from dtrsum.core.errors import MissingGradientError, ValidationError
from dtrsum.core.tensor import Parameter

logger = logging.getLogger(__name__)


class Adam:
    """
    adaptive-moment optimizer with bias correction.

    state holds one first/second moment pair per parameter, keyed by the
    parameter's name, plus a strictly increasing step counter.
    """

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValidationError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValidationError("optimizer parameters must have unique names")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.first_moment = {p.name: np.zeros_like(p.data) for p in self.params}
        self.second_moment = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        """
        apply one update to every parameter, then clear the gradients.

        raises:
            MissingGradientError: if any parameter has no gradient
        """

        missing = [p.name for p in self.params if p.grad is None]
        if missing:
            raise MissingGradientError(f"no gradient for parameter(s): {', '.join(missing)}")

        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for param in self.params:
            m = self.first_moment[param.name]
            v = self.second_moment[param.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * param.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * param.grad * param.grad
            m_hat = m / correction1
            v_hat = v / correction2
            param.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

        self.zero_grad()


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """rescale gradients in place so their global L2 norm is at most max_norm."""

    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))
    if total > max_norm > 0:
        factor = max_norm / total
        for param in params:
            param.grad = param.grad * factor
        logger.debug(f"clipped gradient norm {total:.4g} to {max_norm}")
    return total
