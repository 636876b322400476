import math

import numpy as np
import pytest

from retrial_jsq import compensation
from retrial_jsq.errors import EvaluationError, InvalidParameterError
from retrial_jsq.model import StationaryField, balance_residual, level_matrices, new_params, stability


@pytest.mark.parametrize("bad", [(0, 10, 3), (-1, 10, 3), (2, 0, 3), (2, 10, -3), (math.nan, 1, 1), (math.inf, 1, 1)])
def test_invalid_params(bad):
    with pytest.raises(InvalidParameterError):
        new_params(*bad)


def test_stability_examples():
    rep = stability(new_params(2, 10, 3))
    assert rep.stable
    assert rep.util == pytest.approx(0.2)
    assert rep.empty_orbit1_idle_mass == pytest.approx(11 / 15)
    assert stability(new_params(4, 10, 3)).rho == pytest.approx(2 / 3)


def test_rho_one_is_unstable():
    alpha, mu = 3.0, 10.0
    lam = -alpha + math.sqrt(alpha**2 + 2 * alpha * mu)
    p = new_params(lam, mu, alpha)
    assert p.rho == pytest.approx(1.0, abs=1e-14)
    # rounding may land either side of 1; nudge past it
    assert not stability(new_params(lam * (1 + 1e-12), mu, alpha)).stable


def test_level_matrices_examples(base_params):
    mats = level_matrices(base_params)
    np.testing.assert_array_equal(mats.A00, [[-2, 10], [2, -12]])
    np.testing.assert_array_equal(mats.C00, [[-8, 10], [2, -12]])
    np.testing.assert_array_equal(mats.A1m1 - mats.A01, np.zeros((2, 2)))
    np.testing.assert_array_equal(mats.B00, mats.A00 - mats.H)
    np.testing.assert_array_equal(mats.C00, mats.A00 - 2 * mats.H)


def test_level_matrices_read_only(base_params):
    mats = level_matrices(base_params)
    with pytest.raises(ValueError):
        mats.A00[0, 0] = 1.0


def test_zero_field_residual(base_params):
    zero = StationaryField(lambda m, n, k: 0.0, "oracle")
    assert balance_residual(zero, base_params, 5, 5) == 0.0


def test_compensation_field_residual(base_params):
    series = compensation.build_series(base_params)
    assert balance_residual(compensation.field(series), base_params, 20, 20) < 1e-10


def test_perturbed_field_residual(base_params):
    f = compensation.field(compensation.build_series(base_params))

    def bumped(m, n, k):
        return f(m, n, k) + (1e-3 if (m, n, k) == (1, 1, 0) else 0.0)

    res = balance_residual(StationaryField(bumped, "compensation"), base_params, 5, 5)
    assert res >= base_params.alpha * 1e-3 * 0.99


def test_unevaluable_field(base_params):
    def limited(m, n, k):
        if m > 3:
            raise IndexError(m)
        return 0.0

    with pytest.raises(EvaluationError):
        balance_residual(StationaryField(limited, "oracle"), base_params, 5, 5)


def test_residual_shrinks_with_terms(base_params):
    residuals = []
    counts = []
    for tol in (1e-2, 1e-4, 1e-7, 1e-10):
        s = compensation.build_series(base_params, tol)
        counts.append(s.term_count)
        residuals.append(balance_residual(compensation.field(s), base_params, 10, 10))
    assert counts == sorted(counts)
    assert all(b <= a * 1.01 for a, b in zip(residuals, residuals[1:]))
    assert residuals[-1] < 1e-10
