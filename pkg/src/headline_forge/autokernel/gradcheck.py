"""Central-finite-difference verification of analytic gradients.

The checker perturbs coordinates of the arrays a scalar loss reads from
(inputs and parameters alike), compares (L(x+h) - L(x-h)) / 2h against the
analytic gradient, and reports per-coordinate relative errors. Operators
under check must be deterministic: dropout must be off and batch norm in a
fixed mode, otherwise the two loss evaluations see different functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4

# Coordinates whose analytic and numeric gradients are both below this
# scale are compared against it instead of their own magnitude, so finite
# difference noise on near-zero gradients cannot dominate the ratio.
_REL_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    coords_checked: int
    failures: list[tuple[str, int, float]] = field(default_factory=list)

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"gradient check {verdict}: {self.coords_checked} coords, "
            f"max rel err {self.max_rel_error:.3e}"
        )


def gradient_check(
    loss_fn: Callable[[], float],
    analytic_grads: dict[str, np.ndarray],
    arrays: dict[str, np.ndarray],
    tolerance: float = DEFAULT_TOLERANCE,
    step: float = DEFAULT_STEP,
    max_coords_per_array: int | None = None,
    seed: int = 0,
    exclude: dict[str, np.ndarray] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    loss_fn must recompute the scalar loss from the *current* contents of
    `arrays`, which are perturbed in place one coordinate at a time. The
    analytic gradients are taken as given (computed by the caller before
    the check). When max_coords_per_array is set, a seeded random subset
    of coordinates per array is checked instead of all of them; `exclude`
    optionally masks out coordinates sitting on nondifferentiable kinks.
    """
    rng = np.random.default_rng(seed)
    failures: list[tuple[str, int, float]] = []
    max_rel = 0.0
    checked = 0

    for name in sorted(arrays):
        array = arrays[name]
        analytic = analytic_grads[name]
        if analytic.shape != array.shape:
            raise ValueError(f"gradient for {name!r} has shape {analytic.shape}, array {array.shape}")
        flat = array.reshape(-1)
        flat_analytic = analytic.reshape(-1)
        n = flat.size
        if max_coords_per_array is not None and n > max_coords_per_array:
            coords = rng.choice(n, size=max_coords_per_array, replace=False)
        else:
            coords = np.arange(n)
        excluded = None
        if exclude is not None and name in exclude:
            excluded = exclude[name].reshape(-1)
        for idx in coords:
            if excluded is not None and excluded[idx]:
                continue
            original = flat[idx]
            flat[idx] = original + step
            loss_plus = loss_fn()
            flat[idx] = original - step
            loss_minus = loss_fn()
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            ana = flat_analytic[idx]
            rel = abs(ana - numeric) / max(abs(ana) + abs(numeric), _REL_FLOOR)
            checked += 1
            max_rel = max(max_rel, rel)
            if rel >= tolerance:
                failures.append((name, int(idx), float(rel)))

    return GradCheckReport(
        passed=not failures,
        max_rel_error=max_rel,
        coords_checked=checked,
        failures=failures,
    )


def check_layer_like(
    forward: Callable[[], np.ndarray],
    backward: Callable[[np.ndarray], None],
    arrays: dict[str, np.ndarray],
    grads_of: Callable[[], dict[str, np.ndarray]],
    seed: int = 0,
    **kwargs,
) -> GradCheckReport:
    """Check an operator through the scalar loss sum(weights * output).

    A fixed random weighting makes the output scalar while exercising every
    output coordinate; backward() is driven with those weights as the
    upstream gradient.
    """
    rng = np.random.default_rng(seed)
    probe = forward()
    weights = rng.standard_normal(probe.shape)

    def loss_fn() -> float:
        return float(np.sum(forward() * weights))

    backward(weights.copy())
    analytic = {k: v.copy() for k, v in grads_of().items()}
    return gradient_check(loss_fn, analytic, arrays, seed=seed, **kwargs)
