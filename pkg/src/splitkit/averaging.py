"""Point-anchored resolvent averages and the matching proximal average.

Given an operator ``C``, a weight ``gamma in ]0, 1]`` and an anchor ``w``,
the anchored average ``C_gamma`` is the operator whose resolvent is the
convex combination ``gamma * J_C + (1 - gamma) * w`` of ``J_C`` and the
projection onto ``{w}``.  Explicitly

    C_gamma(x) = C((x - (1 - gamma) w) / gamma) + (1 - gamma) / gamma * (x - w)

and ``C_gamma - (sigma_C + 1 - gamma) / gamma * Id`` is monotone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operators import Operator, as_vector

__all__ = [
    "AnchoredAverage",
    "averaged_resolvent",
    "averaged_operator",
    "averaged_modulus",
    "ConvexFunction",
    "proximal_average_value",
    "proximal_average",
]


@dataclass(frozen=True)
class AnchoredAverage:
    base: Operator
    gamma: float
    anchor: np.ndarray

    def __post_init__(self):
        gamma = float(self.gamma)
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in ]0, 1], got {gamma}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "anchor", as_vector(self.anchor, self.base.dim, "anchor"))


def averaged_modulus(sigma: float, gamma: float) -> float:
    """Strong-monotonicity modulus of the anchored average."""
    return (sigma + 1.0 - gamma) / gamma


def averaged_resolvent(avg: AnchoredAverage, x) -> np.ndarray:
    """``gamma * J_base(x) + (1 - gamma) * anchor``."""
    x = as_vector(x, avg.base.dim)
    return avg.gamma * avg.base.resolvent_fn(x) + (1.0 - avg.gamma) * avg.anchor


def averaged_operator(avg: AnchoredAverage) -> Operator:
    """Materialize the anchored average as an :class:`Operator`.

    The forward evaluation is present only when the base operator has one.
    """
    base, g, w = avg.base, avg.gamma, avg.anchor
    shift = (1.0 - g) * w

    def res(x):
        return g * base.resolvent_fn(x) + shift

    fwd = None
    if base.forward_fn is not None:
        def fwd(x):
            return base.forward_fn((x - shift) / g) + ((1.0 - g) / g) * (x - w)

    return Operator(
        base.dim,
        res,
        averaged_modulus(base.modulus, g),
        fwd,
        f"avg[{base.label}; gamma={g:g}]",
    )


@dataclass(frozen=True)
class ConvexFunction:
    """Proper lsc convex function given by value and proximal oracles.

    `value` may return ``inf`` outside the domain.
    """

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))


def proximal_average_value(h: ConvexFunction, gamma: float, w, x) -> float:
    """Value at `x` of the proximal average of `h` and the indicator of ``{w}``.

    ``gamma * h((x - (1 - gamma) w) / gamma) + (1 - gamma) / (2 gamma) * ||x - w||^2``
    """
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in ]0, 1[, got {gamma}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if x.shape != w.shape:
        raise ValueError(f"x and w shapes differ: {x.shape} vs {w.shape}")
    hv = h((x - (1.0 - gamma) * w) / gamma)
    if hv == np.inf:
        return np.inf
    d = x - w
    return gamma * hv + (1.0 - gamma) / (2.0 * gamma) * float(d @ d)


def proximal_average(h: ConvexFunction, gamma: float, w) -> ConvexFunction:
    """The proximal average as a :class:`ConvexFunction`.

    Its prox is ``gamma * prox_h + (1 - gamma) * w``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    gamma = float(gamma)
    return ConvexFunction(
        value=lambda x: proximal_average_value(h, gamma, w, x),
        prox=lambda x: gamma * np.asarray(h.prox(np.asarray(x, dtype=float))) + (1.0 - gamma) * w,
    )
