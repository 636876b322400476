"""Roots of the interior kernel equation.

A product form ``gamma**m * delta**n * theta`` solves the interior balance
equations exactly when

    2 (rho + 1) gamma delta - 2 rho delta**2 - gamma**2 - gamma delta**2 = 0.

For fixed ``gamma`` this is a quadratic in ``delta`` and vice versa.  The
compensation ladder always needs the root of smaller magnitude, which is
obtained as ``product_of_roots / larger_root`` so that no digits are lost to
cancellation once the ladder has decayed to ~1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .model import ModelParams


@dataclass(frozen=True)
class KernelRoots:
    w_minus: float
    w_plus: float
    s_minus: float
    s_plus: float


def kernel_value(params: ModelParams, gamma, delta):
    rho = params.rho
    return 2.0 * (rho + 1.0) * gamma * delta - 2.0 * rho * delta**2 - gamma**2 - gamma * delta**2


def kernel_scale(params: ModelParams, gamma, delta) -> float:
    """Magnitude of the largest single term of the kernel polynomial."""
    rho = params.rho
    return max(
        abs(2.0 * (rho + 1.0) * gamma * delta),
        abs(2.0 * rho * delta**2),
        abs(gamma**2),
        abs(gamma * delta**2),
    )


def _require_stable(params):
    if not params.rho < 1.0:
        raise DomainError(f"kernel roots need rho < 1, got rho = {params.rho:.10g}")


def delta_given_gamma(params: ModelParams, gamma: float) -> float:
    """Unique root ``delta`` with ``0 < |delta| < |gamma|`` for fixed ``gamma``."""
    _require_stable(params)
    if not 0.0 < abs(gamma) < 1.0:
        raise DomainError(f"need 0 < |gamma| < 1, got {gamma!r}")
    rho = params.rho
    # (2 rho + gamma) d^2 - 2 (1 + rho) gamma d + gamma^2 = 0; discriminant / (4 gamma^2)
    disc = 1.0 + rho * rho - gamma
    if disc < 0.0:
        raise DomainError(f"complex delta root for gamma = {gamma!r}")
    return gamma / ((1.0 + rho) + math.sqrt(disc))


def gamma_given_delta(params: ModelParams, delta: float) -> float:
    """Unique root ``gamma`` with ``0 < |gamma| < |delta|`` for fixed ``delta``."""
    _require_stable(params)
    if not 0.0 < abs(delta) < 1.0:
        raise DomainError(f"need 0 < |delta| < 1, got {delta!r}")
    rho = params.rho
    # g^2 - delta s g + 2 rho delta^2 = 0 with s = 2 (1 + rho) - delta
    s = 2.0 * (1.0 + rho) - delta
    disc = s * s - 8.0 * rho
    if disc < 0.0:
        raise DomainError(f"complex gamma root for delta = {delta!r}")
    return 4.0 * rho * delta / (s + math.sqrt(disc))


def asymptotic_roots(params: ModelParams) -> KernelRoots:
    """Roots of ``2 rho w^2 - 2 (1 + rho) w + 1 = 0`` and the scaled pair ``s = 2 rho w``."""
    _require_stable(params)
    rho = params.rho
    root = math.sqrt(1.0 + rho * rho)
    s_plus = 1.0 + rho + root
    s_minus = 2.0 * rho / s_plus
    return KernelRoots(
        w_minus=s_minus / (2.0 * rho),
        w_plus=s_plus / (2.0 * rho),
        s_minus=s_minus,
        s_plus=s_plus,
    )
