"""Compensation-method solution of the two-orbit JSQ retrial queue.

The stationary distribution is written as an alternating ladder of product
forms ``gamma**m delta**n theta``.  Starting from the pair
``(rho**2, rho**2 / (2 + rho))``, which solves the interior and the horizontal
boundary, each vertical step adds a term with a new ``gamma`` that repairs the
vertical boundary, and each horizontal step adds a term with a new ``delta``
(plus a correction ``xi`` on the row ``n = 0``) that repairs the horizontal
boundary.  All sums over ``m`` and ``n`` are geometric, so normalization and
moments are available in closed form.

Conventions used throughout:

* ``theta = (mu, lam + 2 alpha)`` (scale fixed by ``theta_0 = mu``);
* on the axis ``m = 0`` the idle entry uses the boundary phase vector
  :attr:`ModelParams.theta_vertical`, because only one orbit can retry there;
* the ladder is cut after a full vertical step, so every retained
  ``delta``-group satisfies the vertical boundary exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import kernel
from .errors import (
    ConsistencyError,
    DegenerateParameterError,
    EvaluationError,
    InstabilityError,
    TruncationError,
)
from .model import ModelParams, StationaryField, level_matrices

NEGATIVE_TOL = 1e-12
KERNEL_TOL = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_TERMS = 200


class TinyNegativeWarning(UserWarning):
    """A probability came out negative but within the truncation tolerance."""


@dataclass(frozen=True)
class CompensationSeries:
    """Ladder coefficients of a built (and normalized) compensation series.

    ``gammas`` holds ``gamma_0 .. gamma_{T+1}``; ``deltas``, ``h`` and ``c``
    hold ``T + 1`` entries each, where ``c[i]`` is the coefficient
    ``c_{i+1}`` that shares ``deltas[i]``.  ``xi`` has one 2-vector per gamma.
    """

    params: ModelParams
    gammas: np.ndarray
    deltas: np.ndarray
    h: np.ndarray
    c: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    theta_vertical: np.ndarray
    norm_const: float
    term_count: int
    tolerance_achieved: float
    tail_bounds: tuple = dc_field(default=(), repr=False)


def _require_stable(params):
    if not params.rho < 1.0:
        raise InstabilityError(params.rho)


def starting_pair(params: ModelParams) -> tuple[float, float]:
    _require_stable(params)
    rho = params.rho
    return rho * rho, rho * rho / (2.0 + rho)


def _vertical_weight(params: ModelParams, delta: float) -> float:
    # Per unit coefficient, a term (gamma, delta) leaves the residual
    # alpha mu (gamma - delta * weight) in the busy row of the vertical boundary.
    lam, mu, alpha = params.lam, params.mu, params.alpha
    return (lam + 2 * alpha) * (lam * lam + lam * alpha + alpha * mu * (1.0 - delta)) / (
        alpha * mu * (lam + alpha)
    )


def coefficient_c(params: ModelParams, gamma_i, gamma_ip1, delta_i, h_i) -> float:
    """Vertical compensation coefficient ``c_{i+1}`` for the pair sharing ``delta_i``."""
    shift = delta_i * _vertical_weight(params, delta_i)
    denom = gamma_ip1 - shift
    if denom == 0.0:
        raise DegenerateParameterError("vertical compensation denominator vanishes")
    return -(gamma_i - shift) / denom * h_i


def coefficient_h(params: ModelParams, gamma_ip1, delta_i, delta_ip1, c_ip1) -> float:
    """Horizontal compensation coefficient ``h_{i+1}`` for the pair sharing ``gamma_{i+1}``."""
    rho = params.rho
    if delta_i == 0.0 or delta_ip1 == 0.0:
        raise DegenerateParameterError("horizontal compensation needs non-zero deltas")
    denom = (rho + gamma_ip1) / delta_i - (1.0 + rho)
    if denom == 0.0:
        raise DegenerateParameterError("horizontal compensation denominator vanishes")
    return -((rho + gamma_ip1) / delta_ip1 - (1.0 + rho)) / denom * c_ip1


def _row_response(params: ModelParams, gamma, weight_delta) -> np.ndarray:
    # xi that makes sum_j a_j gamma^m delta_j^n theta solve the n = 0 row, where
    # weight_delta = sum_j a_j delta_j.
    mats = level_matrices(params)
    rhs = (mats.A1m1 + gamma * mats.A0m1) @ params.theta
    try:
        solved = np.linalg.solve(mats.C00, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateParameterError("C00 is singular") from exc
    return -(weight_delta / gamma) * solved


def xi_initial(params: ModelParams, h0, gamma0, delta0, theta=None) -> np.ndarray:
    if theta is not None and not np.allclose(theta, params.theta):
        raise ValueError("theta must be the interior phase vector of params")
    return _row_response(params, gamma0, h0 * delta0)


def xi_step(params: ModelParams, gamma_i, delta_im1, delta_i, c_i, h_i) -> np.ndarray:
    """Row-``n = 0`` vector paired with ``gamma_i``.

    Each power ``gamma_i**m`` must cancel on its own in the horizontal boundary
    equation, so only the two interior terms carrying ``gamma_i`` enter.
    """
    if gamma_i == 0.0:
        raise DegenerateParameterError("gamma_i = 0")
    return _row_response(params, gamma_i, c_i * delta_im1 + h_i * delta_i)


def _check_kernel(params, gamma, delta, label):
    scale = kernel.kernel_scale(params, gamma, delta)
    if abs(kernel.kernel_value(params, gamma, delta)) > KERNEL_TOL * scale:
        raise ConsistencyError(f"{label} violates the kernel equation")


def _group_size(params, gamma, delta, h, c, gamma_next, xi) -> float:
    # Unnormalized mass carried by the delta-group i and the xi_i row term,
    # bounded with the larger of the two phase vectors.
    width = params.theta_vertical.sum()
    group = (abs(h) / (1.0 - gamma) + abs(c) / (1.0 - gamma_next)) * delta / (1.0 - delta) * width
    return group + np.abs(xi).sum() * gamma / (1.0 - gamma)


def build_series(
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    *,
    h0: float = 1.0,
    min_terms: int = 1,
) -> CompensationSeries:
    """Run the compensation ladder until the tail bound drops below ``tol``.

    The bound on the omitted remainder is ``t_T * r / (1 - r)`` where ``t_T`` is
    the size of the last retained group and ``r`` the larger of the observed
    step ratio and 1/3; it is reported relative to the normalization constant.
    """
    _require_stable(params)
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if max_terms < 1 or min_terms > max_terms:
        raise ValueError("need 1 <= min_terms <= max_terms")

    gamma0, delta0 = starting_pair(params)
    gammas = [gamma0]
    deltas = [delta0]
    hs = [float(h0)]
    cs = []
    xis = [xi_initial(params, h0, gamma0, delta0)]
    sizes = []
    bounds = []

    i = 0
    while True:
        gamma_next = kernel.gamma_given_delta(params, deltas[i])
        if not deltas[i] > gamma_next > 0.0:
            raise ConsistencyError(f"interleaving broken at vertical step {i}")
        _check_kernel(params, gamma_next, deltas[i], f"(gamma_{i + 1}, delta_{i})")
        c_next = coefficient_c(params, gammas[i], gamma_next, deltas[i], hs[i])
        gammas.append(gamma_next)
        cs.append(c_next)

        size = _group_size(params, gammas[i], deltas[i], hs[i], c_next, gamma_next, xis[i])
        sizes.append(size)
        ratio = sizes[-1] / sizes[-2] if len(sizes) > 1 and sizes[-2] > 0 else 1.0 / 3.0
        ratio = max(ratio, 1.0 / 3.0)
        bound = math.inf if ratio >= 1.0 else size * ratio / (1.0 - ratio)
        bounds.append(bound)
        partial = _partial_mass(params, gammas, deltas, hs, cs, xis)
        relative = bound / partial if partial > 0 else math.inf

        terms = i + 1
        if terms >= min_terms and relative < tol:
            break
        if terms >= max_terms:
            raise TruncationError(f"no convergence within {max_terms} terms", relative)

        delta_next = kernel.delta_given_gamma(params, gamma_next)
        if not gamma_next > delta_next > 0.0:
            raise ConsistencyError(f"interleaving broken at horizontal step {i}")
        _check_kernel(params, gamma_next, delta_next, f"(gamma_{i + 1}, delta_{i + 1})")
        h_next = coefficient_h(params, gamma_next, deltas[i], delta_next, c_next)
        deltas.append(delta_next)
        hs.append(h_next)
        xis.append(xi_step(params, gamma_next, deltas[i], delta_next, c_next, h_next))
        i += 1

    # Row term for the last gamma: only the c-part exists after a vertical cut.
    xis.append(_row_response(params, gammas[-1], cs[-1] * deltas[-1]))

    series = CompensationSeries(
        params=params,
        gammas=np.array(gammas),
        deltas=np.array(deltas),
        h=np.array(hs),
        c=np.array(cs),
        xi=np.array(xis),
        theta=params.theta,
        theta_vertical=params.theta_vertical,
        norm_const=1.0,
        term_count=len(deltas),
        tolerance_achieved=relative,
        tail_bounds=tuple(bounds),
    )
    norm = normalization(series, params)
    return replace(series, norm_const=norm)


def _partial_mass(params, gammas, deltas, hs, cs, xis) -> float:
    n = len(cs)
    g = np.asarray(gammas[: n + 1])
    d = np.asarray(deltas[:n])
    h = np.asarray(hs[:n])
    c = np.asarray(cs)
    xi = np.asarray(xis[:n])
    k = _phase_sums(params, g, d, h, c, xi)
    return float(k.sum())


def _corner_vector(params, d, h, c) -> np.ndarray:
    mats = level_matrices(params)
    q01 = np.sum((h + c) * d) * params.theta_vertical
    return -np.linalg.solve(mats.A00, mats.A0m1 @ q01)


def _phase_sums(params, g, d, h, c, xi) -> np.ndarray:
    """Unnormalized mass per server state, summed over the whole quadrant."""
    theta, theta_v = params.theta, params.theta_vertical
    g_h, g_c = g[: len(d)], g[1 : len(d) + 1]
    geo_d = d / (1.0 - d)
    interior = np.sum(geo_d * (h * g_h / (1.0 - g_h) + c * g_c / (1.0 - g_c))) * theta
    axis = np.sum(geo_d * (h + c)) * theta_v
    g_x = g[: len(xi)]
    row = (xi * (g_x / (1.0 - g_x))[:, None]).sum(axis=0)
    return interior + axis + row + _corner_vector(params, d, h, c)


def normalization(series: CompensationSeries, params: ModelParams) -> float:
    sums = _phase_sums(params, series.gammas, series.deltas, series.h, series.c, series.xi)
    total = float(sums.sum())
    if not total > 0.0 or not math.isfinite(total):
        raise ConsistencyError(f"non-positive normalization constant {total!r}")
    return total


def _raw(series: CompensationSeries, m: int, n: int) -> np.ndarray:
    g, d = series.gammas, series.deltas
    if n >= 1:
        T = len(d)
        weights = (series.h * g[:T] ** m + series.c * g[1 : T + 1] ** m) * d**n
        vec = series.theta if m >= 1 else series.theta_vertical
        return weights.sum() * vec
    if m >= 1:
        return (series.xi * (g[: len(series.xi)] ** m)[:, None]).sum(axis=0)
    return _corner_vector(series.params, d, series.h, series.c)


def evaluate_vector(series: CompensationSeries, m: int, n: int) -> np.ndarray:
    if m < 0 or n < 0:
        raise EvaluationError(f"state (m={m}, n={n}) outside the quadrant")
    vec = _raw(series, m, n) / series.norm_const
    low = vec.min()
    if low < -NEGATIVE_TOL:
        raise TruncationError(f"negative probability at (m={m}, n={n}); truncation too coarse", -low)
    if low < 0.0:
        warnings.warn(f"tiny negative probability {low:.2e} at (m={m}, n={n})", TinyNegativeWarning, stacklevel=3)
    return vec


def evaluate(series: CompensationSeries, params: ModelParams, m: int, n: int, k: int) -> float:
    if k not in (0, 1):
        raise EvaluationError(f"server state must be 0 or 1, got {k!r}")
    if params != series.params:
        raise ValueError("series was built for different parameters")
    return float(evaluate_vector(series, m, n)[k])


def field(series: CompensationSeries) -> StationaryField:
    return StationaryField(lambda m, n, k: evaluate(series, series.params, m, n, k), "compensation")


def grid(series: CompensationSeries, m_max: int, n_max: int) -> np.ndarray:
    """Normalized probabilities as an array of shape ``(m_max + 1, n_max + 1, 2)``."""
    out = np.empty((m_max + 1, n_max + 1, 2))
    for m in range(m_max + 1):
        for n in range(n_max + 1):
            out[m, n] = evaluate_vector(series, m, n)
    return out


@dataclass(frozen=True)
class Measures:
    P_busy: float
    mean_min: float
    mean_diff: float
    mean_total_orbit: float
    q0_row: tuple


def measures(series: CompensationSeries, params: ModelParams) -> Measures:
    """Closed-form moments of the normalized field."""
    g, d, h, c, xi = series.gammas, series.deltas, series.h, series.c, series.xi
    C = series.norm_const
    T = len(d)
    g_h, g_c = g[:T], g[1 : T + 1]
    g_x = g[: len(xi)]
    w_theta, w_axis = series.theta.sum(), series.theta_vertical.sum()

    busy = _phase_sums(params, g, d, h, c, xi)[1] / C

    geo_d = d / (1.0 - d)
    min_interior = np.sum(geo_d * (h * g_h / (1.0 - g_h) ** 2 + c * g_c / (1.0 - g_c) ** 2)) * w_theta
    min_row = np.sum(xi.sum(axis=1) * g_x / (1.0 - g_x) ** 2)
    mean_min = (min_interior + min_row) / C

    geo_dn = d / (1.0 - d) ** 2
    diff = np.sum(geo_dn * (h * g_h / (1.0 - g_h) + c * g_c / (1.0 - g_c))) * w_theta
    diff += np.sum(geo_dn * (h + c)) * w_axis
    mean_diff = diff / C

    row = tuple(float(evaluate_vector(series, 0, n).sum()) for n in range(4))
    return Measures(
        P_busy=float(busy),
        mean_min=float(mean_min),
        mean_diff=float(mean_diff),
        mean_total_orbit=float(2.0 * mean_min + mean_diff),
        q0_row=row,
    )


def solve(params: ModelParams, tol: float = DEFAULT_TOL, max_terms: int = DEFAULT_MAX_TERMS) -> CompensationSeries:
    return build_series(params, tol, max_terms)
