"""Step-size laws used by the master and the sweep tooling.

The constant-rate law sets rho = eta to the theory-optimal constant for a
given horizon and work shape; rescale_rate keeps a tuned rate consistent
when the work shape (threads, local steps, batch size) changes between
sweep points.
"""
from __future__ import annotations

import math

from ..errors import ConfigurationError


def noise_scale_constant(L: float, V: float, alpha: float, mu: float) -> float:
    """The problem constant A = L V^2 (1/a + 1/a^2 + 2 L mu / ((1-mu) a))."""
    if L <= 0 or V <= 0 or alpha <= 0:
        raise ConfigurationError("L, V, alpha must be positive")
    if not 0 < mu < 1:
        raise ConfigurationError(f"mu must lie in (0, 1), got {mu}")
    return L * V * V * (
        1.0 / alpha + 1.0 / (alpha * alpha)
        + 2.0 * L * mu / ((1.0 - mu) * alpha)
    )


def theory_constant_rate(
    f0_minus_fstar: float,
    A: float,
    alpha: float,
    T: int,
    M: int,
    Btilde: int,
) -> float:
    """Constant rho = eta with rho^2 = sqrt(gap) / (A alpha sqrt(T M Btilde))."""
    if f0_minus_fstar <= 0:
        raise ConfigurationError("f0_minus_fstar must be positive")
    if A <= 0 or alpha <= 0:
        raise ConfigurationError("A and alpha must be positive")
    if T < 1 or M < 1 or Btilde < 1:
        raise ConfigurationError("T, M, Btilde must be >= 1")
    rho_sq = math.sqrt(f0_minus_fstar) / (A * alpha * math.sqrt(T * M * Btilde))
    return math.sqrt(rho_sq)


def rescale_rate(
    rho: float,
    base_shape: tuple[int, int, int],
    new_shape: tuple[int, int, int],
) -> float:
    """Carry a tuned rate to a new (p, B, M) work shape.

    rho' = rho * (p B M / p' B' M') ** 0.25, the fourth-root scaling that
    keeps the constant-rate law satisfied when total per-iteration work
    changes.
    """
    for shape in (base_shape, new_shape):
        if len(shape) != 3 or any(int(s) < 1 for s in shape):
            raise ConfigurationError(f"work shape must be 3 positive ints, got {shape}")
    if rho <= 0:
        raise ConfigurationError(f"rho must be positive, got {rho}")
    p, b, m = (int(s) for s in base_shape)
    p2, b2, m2 = (int(s) for s in new_shape)
    return rho * ((p * b * m) / (p2 * b2 * m2)) ** 0.25


def feasibility_warnings(
    *,
    eta: float,
    rho: float,
    L: float,
    mu: float,
    D: int,
    D_prime: int,
    M: int,
    Btilde: int,
) -> list[str]:
    """Evaluate the two analysis-side feasibility inequalities literally.

    Returns human-readable warnings for each violated inequality; callers
    treat these as advisory, never fatal.
    """
    warnings: list[str] = []
    if not 0 < mu < 1:
        raise ConfigurationError(f"mu must lie in (0, 1), got {mu}")
    # bounded-delay rate condition: with a constant schedule the partial
    # sum over the next D' iterations is D' * rho
    lhs = (M * Btilde * eta * L) ** 2 * rho * D_prime * (D_prime * rho)
    if lhs > 1.0:
        warnings.append(
            f"delay feasibility violated: M^2 Btilde^2 eta^2 L^2 rho^2 D'^2 "
            f"= {lhs:.3g} > 1"
        )
    geom = (mu ** (D + 1) - 1.0) / (mu - 1.0)
    denom = 1.0 - eta - 9.0 * eta * (D + 1) * L * L * geom
    ratio = float("inf") if denom <= 0 else 1.0 / denom
    if ratio > mu:
        warnings.append(
            f"contraction feasibility violated: 1/(1 - eta - 9 eta (D+1) L^2 "
            f"S_mu) = {ratio:.3g} > mu = {mu}"
        )
    return warnings
