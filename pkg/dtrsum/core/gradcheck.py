"""
central finite-difference gradient checking.

the relative error of one coordinate is
|g_analytic - g_numeric| / max(1, |g_analytic|, |g_numeric|).

a failing coordinate is skipped as a relu kink when its one-sided slopes
differ by at least the analytic/numeric gap.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from dtrsum.core.errors import NonDeterministicGraphError, ValidationError
from dtrsum.core.tensor import Parameter, Tensor, forward_backward, no_grad

logger = logging.getLogger(__name__)


@dataclass
class ParameterCheck:
    name: str
    max_rel_error: float
    checked: int
    passed: bool
    kinks: int = 0


@dataclass
class GradCheckReport:
    tol: float
    eps: float
    results: list[ParameterCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def max_rel_error(self) -> float:
        return max((result.max_rel_error for result in self.results), default=0.0)

    def failures(self) -> list[ParameterCheck]:
        return [result for result in self.results if not result.passed]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def _crosses_kink(analytic: float, numeric: float, plus: float, minus: float, center: float, eps: float) -> bool:
    right = (plus - center) / eps
    left = (center - minus) / eps
    return abs(right - left) >= abs(analytic - numeric)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
    tol: float = 1e-4,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """
    compare reverse-mode gradients with central differences.

    args:
        loss_fn: zero-argument callable returning a scalar loss; must be deterministic
        params: parameters to check
        eps: finite-difference step, in [1e-7, 1e-3]
        tol: relative tolerance per coordinate
        max_entries: check at most this many coordinates per parameter (sampled)
        rng: generator used to sample coordinates

    returns:
        a report with the maximum relative error per parameter

    raises:
        ValidationError: if eps is outside its range
        NonDeterministicGraphError: if two evaluations of the loss differ
    """

    if not 1e-7 <= eps <= 1e-3:
        raise ValidationError(f"finite-difference step must lie in [1e-7, 1e-3], got {eps}")
    params = list(params)

    with no_grad():
        first = loss_fn().data.copy()
        second = loss_fn().data.copy()
    if not np.array_equal(first, second):
        raise NonDeterministicGraphError(
            "loss differs between two identical evaluations; disable dropout before checking gradients"
        )

    center = float(first.reshape(-1)[0])
    forward_backward(loss_fn, params)
    analytic_grads = {
        param.name: (param.grad.copy() if param.grad is not None else np.zeros_like(param.data))
        for param in params
    }

    report = GradCheckReport(tol=tol, eps=eps)
    sampler = rng if rng is not None else np.random.Generator(np.random.PCG64(0))
    for param in params:
        if max_entries is not None and param.size > max_entries:
            indices = np.sort(sampler.choice(param.size, size=max_entries, replace=False))
        else:
            indices = np.arange(param.size)

        analytic = analytic_grads[param.name].reshape(-1)
        flat = param.data.reshape(-1)
        worst, kinks = 0.0, 0
        with no_grad():
            for index in indices:
                original = flat[index]
                flat[index] = original + eps
                plus = loss_fn().item()
                flat[index] = original - eps
                minus = loss_fn().item()
                flat[index] = original
                numeric = (plus - minus) / (2.0 * eps)
                error = relative_error(float(analytic[index]), numeric)
                if error >= tol and _crosses_kink(float(analytic[index]), numeric, plus, minus, center, eps):
                    kinks += 1
                    continue
                worst = max(worst, error)

        passed = worst < tol
        report.results.append(ParameterCheck(param.name, worst, len(indices), passed, kinks))
        if kinks:
            logger.debug(f"{param.name}: skipped {kinks} coordinate(s) at a kink")
        if not passed:
            logger.warning(f"gradient check failed for {param.name}: max relative error {worst:.3e}")

    for param in params:
        param.zero_grad()
    return report
