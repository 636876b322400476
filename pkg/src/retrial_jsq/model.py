"""Model parameters, stability logic and the level-matrix form of the balance equations.

States of the transformed chain are ``(m, n, k)`` with ``m = min(Q1, Q2)``,
``n = |Q1 - Q2|`` and ``k`` the server state (0 idle, 1 busy).  Column vectors
``q(m, n) = (q(m, n, 0), q(m, n, 1))`` satisfy six families of balance
equations whose coefficients are the 2x2 blocks held in :class:`LevelMatrices`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidParameterError

SOURCES = ("compensation", "oracle", "simulation")


@dataclass(frozen=True)
class ModelParams:
    """Arrival rate ``lam``, service rate ``mu`` and per-orbit retrial rate ``alpha``."""

    lam: float
    mu: float
    alpha: float

    def __post_init__(self):
        for name in ("lam", "mu", "alpha"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidParameterError(f"{name} must be a number, got {value!r}") from None
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def rho(self) -> float:
        return self.lam * (self.lam + 2.0 * self.alpha) / (2.0 * self.alpha * self.mu)

    @property
    def theta(self) -> np.ndarray:
        """Interior phase vector, scaled so that its idle entry equals ``mu``."""
        return np.array([self.mu, self.lam + 2.0 * self.alpha])

    @property
    def theta_vertical(self) -> np.ndarray:
        """Phase vector on the axis ``m = 0``, where only one orbit can retry.

        The busy entry agrees with :attr:`theta`; the idle entry follows from the
        idle-state balance ``(lam + alpha) q(0, n, 0) = mu q(0, n, 1)``.
        """
        busy = self.lam + 2.0 * self.alpha
        return np.array([self.mu * busy / (self.lam + self.alpha), busy])


def new_params(lam, mu, alpha) -> ModelParams:
    return ModelParams(lam, mu, alpha)


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    stable: bool
    util: float
    empty_orbit1_idle_mass: float


def stability(params: ModelParams) -> StabilityReport:
    """Stability verdict together with the two flow-conservation identities.

    ``util`` is the long-run fraction of time the server is busy and
    ``empty_orbit1_idle_mass`` is ``P(Q1 = 0, C = 0)``; both are only
    meaningful when ``stable`` holds.
    """
    rho = params.rho
    return StabilityReport(
        rho=rho,
        stable=rho < 1.0,
        util=params.lam / params.mu,
        empty_orbit1_idle_mass=1.0 - rho,
    )


@dataclass(frozen=True)
class LevelMatrices:
    A00: np.ndarray
    A01: np.ndarray
    A0m1: np.ndarray
    Am11: np.ndarray
    A1m1: np.ndarray
    H: np.ndarray
    B00: np.ndarray
    C00: np.ndarray


def level_matrices(params: ModelParams) -> LevelMatrices:
    lam, mu, alpha = params.lam, params.mu, params.alpha
    A00 = np.array([[-lam, mu], [lam, -(lam + mu)]])
    arrival = np.array([[0.0, 0.0], [0.0, lam]])
    retrial = np.array([[0.0, 0.0], [alpha, 0.0]])
    H = np.array([[alpha, 0.0], [0.0, 0.0]])
    for block in (A00, arrival, retrial, H):
        block.flags.writeable = False
    B00 = A00 - H
    C00 = A00 - 2.0 * H
    B00.flags.writeable = False
    C00.flags.writeable = False
    return LevelMatrices(
        A00=A00,
        A01=arrival,
        A0m1=retrial,
        Am11=retrial,
        A1m1=arrival,
        H=H,
        B00=B00,
        C00=C00,
    )


@dataclass(frozen=True)
class StationaryField:
    """A stationary distribution over transformed states, evaluable pointwise.

    ``prob(m, n, k)`` must raise :class:`EvaluationError` (or any lookup error)
    outside the region where the field is defined.
    """

    prob: Callable[[int, int, int], float]
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown field source {self.source!r}")

    def __call__(self, m: int, n: int, k: int) -> float:
        return self.prob(m, n, k)

    def vector(self, m: int, n: int) -> np.ndarray:
        return np.array([self.prob(m, n, 0), self.prob(m, n, 1)])


def balance_equation(mats: LevelMatrices, q: Callable[[int, int], np.ndarray], m: int, n: int) -> np.ndarray:
    """Left-hand side of the balance equation that governs state ``(m, n)``."""
    if m == 0 and n == 0:
        return mats.A00 @ q(0, 0) + mats.A0m1 @ q(0, 1)
    if m == 0 and n == 1:
        return (
            mats.B00 @ q(0, 1)
            + mats.A0m1 @ q(0, 2)
            + 2.0 * mats.Am11 @ q(1, 0)
            + mats.A01 @ q(0, 0)
        )
    if m == 0:
        return mats.B00 @ q(0, n) + mats.A0m1 @ q(0, n + 1) + mats.Am11 @ q(1, n - 1)
    if n == 0:
        return mats.C00 @ q(m, 0) + mats.A0m1 @ q(m, 1) + mats.A1m1 @ q(m - 1, 1)
    if n == 1:
        return (
            mats.C00 @ q(m, 1)
            + mats.A0m1 @ q(m, 2)
            + 2.0 * mats.Am11 @ q(m + 1, 0)
            + mats.A1m1 @ q(m - 1, 2)
            + mats.A01 @ q(m, 0)
        )
    return (
        mats.C00 @ q(m, n)
        + mats.A0m1 @ q(m, n + 1)
        + mats.A1m1 @ q(m - 1, n + 1)
        + mats.Am11 @ q(m + 1, n - 1)
    )


def balance_residual(field: StationaryField, params: ModelParams, m_max: int, n_max: int) -> float:
    """Largest absolute balance-equation residual over ``[0, m_max] x [0, n_max]``."""
    mats = level_matrices(params)
    cache: dict[tuple[int, int], np.ndarray] = {}

    def q(m, n):
        key = (m, n)
        if key not in cache:
            try:
                cache[key] = field.vector(m, n)
            except (IndexError, KeyError) as exc:
                raise EvaluationError(f"field not evaluable at (m={m}, n={n}): {exc}") from exc
        return cache[key]

    worst = 0.0
    for m in range(m_max + 1):
        for n in range(n_max + 1):
            worst = max(worst, float(np.max(np.abs(balance_equation(mats, q, m, n)))))
    return worst
