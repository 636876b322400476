"""Brute-force ground truth: the chain truncated to a finite box of orbit sizes.

The generator lives in original coordinates ``(i, j, k)`` = (orbit 1, orbit 2,
server) with ``0 <= i, j <= N``.  Arrivals that would push an orbit past ``N``
are dropped, which keeps the JSQ dynamics untouched inside the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, EvaluationError, SolverError
from .model import ModelParams, StationaryField, level_matrices

RESIDUAL_GATE = 1e-12


def state_index(i: int, j: int, k: int, N: int) -> int:
    return (i * (N + 1) + j) * 2 + k


def default_box_size(params: ModelParams, target: float = 1e-10, cap: int = 200) -> int:
    """Smallest box whose outer shell carries predicted mass below ``target``."""
    rho = params.rho
    if not rho < 1.0:
        raise DomainError(f"no finite box size for rho = {rho:.10g}")
    n = math.ceil(math.log(target) / (2.0 * math.log(rho)))
    return int(min(max(n, 20), cap))


def build_generator(params: ModelParams, N: int) -> sp.csr_matrix:
    if N < 2:
        raise DomainError(f"box size must be at least 2, got {N}")
    lam, mu, alpha = params.lam, params.mu, params.alpha
    rows, cols, vals = [], [], []

    def add(src, dst, rate):
        rows.append(src)
        cols.append(dst)
        vals.append(rate)

    for i in range(N + 1):
        for j in range(N + 1):
            idle = state_index(i, j, 0, N)
            busy = state_index(i, j, 1, N)
            add(idle, busy, lam)
            if i > 0:
                add(idle, state_index(i - 1, j, 1, N), alpha)
            if j > 0:
                add(idle, state_index(i, j - 1, 1, N), alpha)
            add(busy, idle, mu)
            if i < j:
                add(busy, state_index(i + 1, j, 1, N), lam)
            elif j < i:
                add(busy, state_index(i, j + 1, 1, N), lam)
            elif i < N:
                add(busy, state_index(i + 1, j, 1, N), lam / 2.0)
                add(busy, state_index(i, j + 1, 1, N), lam / 2.0)

    size = 2 * (N + 1) ** 2
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    out = np.asarray(Q.sum(axis=1)).ravel()
    return (Q - sp.diags(out)).tocsr()


@dataclass(frozen=True)
class TruncatedSolution:
    params: ModelParams
    n_trunc: int
    probs: np.ndarray  # shape (N + 1, N + 1, 2), indexed [i, j, k]
    mass_deficit_bound: float
    residual: float

    def prob(self, i: int, j: int, k: int) -> float:
        return float(self.probs[i, j, k])


def _bandwidth(N: int) -> int:
    # largest index distance of a transition under the (i, j, k) ordering
    return 2 * (N + 1) + 3


@numba.njit(cache=True)
def _gth_banded(band, b):  # pragma: no cover - compiled
    n = band.shape[0]
    sums = np.zeros(n)
    for p in range(n - 1, 0, -1):
        lo = max(0, p - b)
        s = 0.0
        for j in range(lo, p):
            s += band[p, j - p + b]
        if s <= 0.0:
            return np.zeros(0)
        sums[p] = s
        for j in range(lo, p):
            band[p, j - p + b] /= s
        for i in range(lo, p):
            a = band[i, p - i + b]
            if a == 0.0:
                continue
            for j in range(lo, p):
                if j != i:
                    band[i, j - i + b] += a * band[p, j - p + b]
    pi = np.zeros(n)
    pi[0] = 1.0
    for p in range(1, n):
        lo = max(0, p - b)
        acc = 0.0
        for i in range(lo, p):
            acc += pi[i] * band[i, p - i + b]
        pi[p] = acc / sums[p]
    return pi / pi.sum()


def _solve_gth(generator, N):
    b = _bandwidth(N)
    coo = sp.coo_matrix(generator)
    off = coo.row != coo.col
    rows, cols, vals = coo.row[off], coo.col[off], coo.data[off]
    if np.any(np.abs(cols - rows) > b):
        raise DomainError("generator is not banded in the (i, j, k) ordering")
    band = np.zeros((generator.shape[0], 2 * b + 1))
    band[rows, cols - rows + b] = vals
    pi = _gth_banded(band, b)
    if pi.size == 0:
        raise SolverError("GTH elimination hit a zero pivot; chain is not irreducible")
    return pi


def _solve_lu(generator):
    size = generator.shape[0]
    A = generator.T.tolil()
    A[size - 1, :] = np.ones(size)
    b = np.zeros(size)
    b[-1] = 1.0
    return spla.spsolve(A.tocsc(), b)


def solve_stationary(
    generator: sp.spmatrix, params: ModelParams | None = None, method: str = "gth"
) -> TruncatedSolution:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` by a direct method.

    ``gth`` (default) runs Grassmann-Taksar-Heyman state reduction on the band
    of the generator; it involves no subtractions, so tail probabilities far
    below machine epsilon keep full relative accuracy.  ``lu`` replaces one
    balance equation by the normalization row and calls a sparse LU solve,
    which is accurate only in absolute terms (~1e-17).
    """
    size = generator.shape[0]
    N = int(round(math.sqrt(size / 2))) - 1
    if 2 * (N + 1) ** 2 != size:
        raise DomainError("generator size does not match a square box")
    if method == "gth":
        pi = _solve_gth(generator, N)
    elif method == "lu":
        pi = _solve_lu(generator)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.max(np.abs(generator.T @ pi))) if np.all(np.isfinite(pi)) else math.inf
    if not residual < RESIDUAL_GATE:
        raise SolverError("stationary solve failed the residual gate", residual)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    probs = pi.reshape(N + 1, N + 1, 2)

    shell = probs[N, :, :].sum() + probs[:, N, :].sum() - probs[N, N, :].sum()
    bound = math.inf
    if params is not None and params.rho < 1.0:
        r = params.rho**2
        bound = float(shell * r / (1.0 - r))
    return TruncatedSolution(params, N, probs, bound, residual)


def solve(params: ModelParams, N: int | None = None, method: str = "gth") -> TruncatedSolution:
    if N is None:
        N = default_box_size(params)
    return solve_stationary(build_generator(params, N), params, method)


def transformed_vector(solution: TruncatedSolution, m: int, n: int) -> np.ndarray:
    N = solution.n_trunc
    if m < 0 or n < 0 or m + n > N:
        raise EvaluationError(f"state (m={m}, n={n}) outside the truncation box N={N}")
    p = solution.probs
    if n == 0:
        return p[m, m].copy()
    return p[m, m + n] + p[m + n, m]


def to_transformed(solution: TruncatedSolution) -> StationaryField:
    return StationaryField(lambda m, n, k: float(transformed_vector(solution, m, n)[k]), "oracle")


def transformed_grid(solution: TruncatedSolution, m_max: int, n_max: int) -> np.ndarray:
    out = np.empty((m_max + 1, n_max + 1, 2))
    for m in range(m_max + 1):
        for n in range(n_max + 1):
            out[m, n] = transformed_vector(solution, m, n)
    return out


def z0_residual(solution: TruncatedSolution, params: ModelParams, margin: int = 1) -> float:
    """Max residual of the original-coordinate balance equations away from the box edge."""
    lam, mu, alpha = params.lam, params.mu, params.alpha
    p = solution.probs
    N = solution.n_trunc

    def join(i, j, orbit):
        # probability that a blocked arrival in (i, j) goes to ``orbit``
        if i == j:
            return 0.5
        shorter = 1 if i < j else 2
        return 1.0 if orbit == shorter else 0.0

    worst = 0.0
    for i in range(N - margin + 1):
        for j in range(N - margin + 1):
            out0 = lam + alpha * ((i > 0) + (j > 0))
            r0 = p[i, j, 0] * out0 - mu * p[i, j, 1]
            inflow = lam * p[i, j, 0] + alpha * (p[i + 1, j, 0] + p[i, j + 1, 0])
            if i > 0:
                inflow += lam * p[i - 1, j, 1] * join(i - 1, j, 1)
            if j > 0:
                inflow += lam * p[i, j - 1, 1] * join(i, j - 1, 2)
            r1 = p[i, j, 1] * (lam + mu) - inflow
            worst = max(worst, abs(r0), abs(r1))
    return worst


def estimate_decay(field: StationaryField, n: int, k: int, m_lo: int, m_hi: int) -> float:
    """Geometric rate of ``m -> q(m, n, k)`` by least squares on the logarithm."""
    if m_hi <= m_lo:
        raise ValueError("need m_hi > m_lo")
    ms = np.arange(m_lo, m_hi + 1)
    values = np.array([field(int(m), n, k) for m in ms])
    if np.any(values <= 1e-300):
        raise EvaluationError(f"values underflow in m range [{m_lo}, {m_hi}] for (n={n}, k={k})")
    slope = np.polyfit(ms, np.log(values), 1)[0]
    return float(math.exp(slope))


@dataclass(frozen=True)
class AppendixCheck:
    v: np.ndarray
    residual_block0: float
    residual_interior: float
    residual_interior_as_printed: float
    drift: float


def verify_appendix(params: ModelParams) -> AppendixCheck:
    """Check the positive right null vector of the tilted level generator.

    ``residual_interior`` uses the row expansion ``rho K_-1 + K_0 + K_1 / rho``;
    ``residual_interior_as_printed`` evaluates ``rho K_-1 + K_0 + rho K_1`` for
    comparison, which does not vanish in general.
    """
    rho = params.rho
    if not rho < 1.0:
        raise DomainError(f"verify_appendix needs rho < 1, got {rho:.10g}")
    lam, mu, alpha = params.lam, params.mu, params.alpha
    mats = level_matrices(params)
    K0 = mats.C00.T
    K1_bar = 2.0 * rho**2 * mats.Am11.T + mats.A01.T
    K1 = rho**2 * mats.Am11.T
    Km1 = mats.A1m1.T / rho**2 + mats.A0m1.T
    v = np.array([1.0, mu * (lam + 2 * alpha) / (lam * (lam + mu + 2 * alpha))])

    block0 = np.max(np.abs((K0 + K1_bar / rho) @ v))
    interior = np.max(np.abs((rho * Km1 + K0 + K1 / rho) @ v))
    printed = np.max(np.abs((rho * Km1 + K0 + rho * K1) @ v))

    D = np.diag(v)
    G = np.linalg.solve(D, (rho * Km1 + K0 + K1 / rho) @ D)
    # stationary vector of the 2-state generator G
    u = np.array([G[1, 0], G[0, 1]])
    u = u / u.sum()
    drift = float(u @ np.linalg.solve(D, (K1 / rho - rho * Km1) @ v))
    return AppendixCheck(v, float(block0), float(interior), float(printed), drift)
