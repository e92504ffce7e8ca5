"""Closed-form gap bounds for the single spin-flip kinetic Ising chain.

``eta = tanh(beta J)`` and ``delta`` in [-1, 1] parametrize the equilibrium
and the kinetic coefficients; ``gamma_eq = 2 eta / (1 + eta^2)``.  Rates are in
units of ``Gamma`` unless a ``gamma`` argument is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ZeroTemperatureError(ValueError):
    pass


def gamma_from_eta(eta):
    return 2 * eta / (1 + eta**2)


def eta_from_epsilon(epsilon: float) -> float:
    """Inverse of ``epsilon = sqrt(1 - gamma_eq^2)``: ``eta = gamma_eq / (1 + epsilon)``."""
    g = math.sqrt(1.0 - epsilon**2)
    return g / (1.0 + epsilon)


def delta12(eta, delta, gamma: float = 1.0):
    """Two-state variational bound in the odd-flip, zero-momentum sector."""
    eta = np.asarray(eta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    rad = (
        1
        - 2 * delta * (1 - eta) * eta**3 / (1 + eta)
        + delta**2 * (1 - eta) ** 2 * (1 + eta**2 - eta**4) / (1 + eta) ** 2
    )
    val = 2 * gamma / (1 + eta**2) * (2 - eta * (1 - eta) * (1 + delta * eta) - (1 + eta) * np.sqrt(rad))
    return val[()] if np.ndim(val) == 0 else val


def delta12_matrix(eta: float, delta: float, gamma: float = 1.0) -> np.ndarray:
    """Parent Hamiltonian on the two orthonormalized trial states; ``delta12`` is its lower eigenvalue."""
    h11 = 2 * gamma * (1 - eta) ** 2 / (1 + eta**2) * (1 - eta**2 * delta)
    h12 = 2 * delta * gamma * (1 - eta**2) * math.sqrt((1 - eta) / (1 + eta))
    h22 = 2 * gamma * (3 + (1 - delta) * eta**2 + delta * eta**4) / (1 + eta**2)
    return np.array([[h11, h12], [h12, h22]])


def delta3(eta, delta, n: int, gamma: float = 1.0):
    return n * gamma * (1 + np.asarray(delta)) * (1 - gamma_from_eta(np.asarray(eta)))


def delta4(delta, gamma: float = 1.0):
    return 4 * gamma * (1 - np.asarray(delta))


def delta5_approx(delta, n: int, gamma: float = 1.0):
    """Low-temperature estimate of the ground-sector gap near ``delta = -1``."""
    return 4 * gamma * (1 + np.asarray(delta)) / (n - 1)


@dataclass(frozen=True)
class BoundSet:
    delta12: float
    delta3: float
    delta4: float
    delta5_approx: float
    full_min: float

    def as_dict(self) -> dict:
        return {
            "Delta12": self.delta12,
            "Delta3": self.delta3,
            "Delta4": self.delta4,
            "Delta5_approx": self.delta5_approx,
            "full_min": self.full_min,
        }


def analytic_bounds(eta: float, delta: float, n: int, gamma: float = 1.0) -> BoundSet:
    """All variational bounds at one parameter point; ``full_min`` is the smallest of the first three."""
    if eta >= 1:
        raise ZeroTemperatureError("zero-temperature limit; gap closes")
    if eta < 0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if not -1 <= delta <= 1:
        raise ValueError(f"delta must lie in [-1, 1], got {delta}")
    d12 = float(delta12(eta, delta, gamma))
    d3 = float(delta3(eta, delta, n, gamma))
    d4 = float(delta4(delta, gamma))
    return BoundSet(d12, d3, d4, float(delta5_approx(delta, n, gamma)), min(d12, d3, d4))


def optimal_coefficients(eta: float) -> tuple[float, float]:
    """Stationary point ``delta_opt`` of :func:`delta12` in ``delta`` and its value (``Gamma = 1``).

    Above ``eta ~ 0.745`` the stationary point lies below ``delta = -1``; use
    :func:`optimal_coefficients_clipped` for the maximizer over ``[-1, 1]``.
    """
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    r = math.sqrt(1 + 2 * eta**2)
    q = 1 + eta**2 - eta**4
    d_opt = eta**2 * (1 + eta) * (eta * r - 1 - eta**2) / ((1 - eta) * q * r)
    gap_opt = 4 - 2 * eta * (eta + 1) / q - 2 * (1 - eta) * (1 + eta) ** 2 * r / q
    return d_opt, gap_opt


def optimal_coefficients_clipped(eta: float) -> tuple[float, float]:
    """Maximizer of :func:`delta12` over the admissible range ``[-1, 1]``."""
    d_opt, gap_opt = optimal_coefficients(eta)
    if d_opt < -1:
        # delta12 is concave in delta here, so the boundary is the constrained maximum
        return -1.0, float(delta12(eta, -1.0))
    return d_opt, gap_opt


def transition_delta(eta: float) -> float:
    """Kinetic coefficient where the odd-sector bound meets the ``4 (1 - delta)`` branch."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    num = 2 * eta * (eta**2 - eta + 1) + (eta**2 + 1) * math.sqrt(2 * eta**2 - 4 * eta + 3)
    den = 2 * eta**4 - 4 * eta**3 + 7 * eta**2 - 4 * eta + 3
    return num / den
