"""Tests for the rate-distortion solver, tilted information and the excess-constrained quantities."""

import io
import logging
import math

import numpy as np
import pytest

from vl_lossy.vl_codec import build_stochastic_code
from vl_lossy.vl_covering import DistortionSpec, g_quantity, greedy_cover
from vl_lossy.vl_errors import DomainError, InvalidParameterError, PreconditionError
from vl_lossy.vl_probability import UNBOUNDED, FinitePmf, renyi_entropy
from vl_lossy.vl_ratedistortion import (
    RD_COLUMNS,
    RD_MAX_ITER,
    binary_entropy,
    binary_hamming_oracle,
    d_tilted_renyi_entropy,
    distortion_range,
    gaussian_approx,
    h_d_epsilon_bruteforce,
    min_output_entropy,
    q_inv,
    r_d_epsilon,
    rd_at_distortion,
    rd_csv,
    rd_fixed_slope,
    rd_solution,
    rd_sweep,
    sandwich,
    theorem1_check,
    theorem1_sides,
    zero_rate_slope,
)

from strategies import HAMMING, SOURCE

BIT = FinitePmf(('0', '1'), (0.8, 0.2))
BIT_HAMMING = DistortionSpec.hamming('01')


@pytest.mark.parametrize("D", [0.05, 0.1, 0.15])
def test_binary_hamming_matches_closed_forms(D):
    sol = rd_at_distortion(BIT, BIT_HAMMING, D)
    oracle = binary_hamming_oracle(0.2, D)
    assert sol.converged
    assert sol.R == pytest.approx(oracle.R, abs=1e-6)
    assert sol.lambda_star == pytest.approx(oracle.lambda_star, abs=1e-5)
    assert sol.V == pytest.approx(oracle.V, abs=1e-6)
    assert sol.V == pytest.approx(0.64, abs=1e-6)
    p = np.array(BIT.probs)
    assert float(p @ np.array(sol.tilted_info)) == pytest.approx(sol.R, abs=1e-6)


def test_binary_oracle_values():
    oracle = binary_hamming_oracle(0.2, 0.1)
    assert oracle.R == pytest.approx(0.252932, abs=1e-6)
    assert oracle.lambda_star == pytest.approx(math.log2(9))
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    for D in (0.0, 0.2, 0.5):
        with pytest.raises(DomainError):
            binary_hamming_oracle(0.2, D)


def test_distortion_range():
    assert distortion_range(BIT, BIT_HAMMING) == pytest.approx((0.0, 0.2))
    assert distortion_range(SOURCE, HAMMING) == pytest.approx((0.0, 0.5))


@pytest.mark.parametrize("D", [-0.1, 0.0, 0.2, 0.3])
def test_interior_solver_rejects_endpoints(D):
    with pytest.raises(DomainError):
        rd_at_distortion(BIT, BIT_HAMMING, D)


def test_solution_at_range_endpoints():
    top = rd_solution(BIT, BIT_HAMMING, 0.3)
    assert top.R == 0.0
    assert top.V == 0.0
    assert top.tilted_info == (0.0, 0.0)
    bottom = rd_solution(BIT, BIT_HAMMING, 0.0)
    assert math.isinf(bottom.lambda_star)
    assert bottom.R == pytest.approx(binary_entropy(0.2), abs=1e-9)
    assert bottom.V == pytest.approx(0.64, abs=1e-9)
    assert bottom.to_json()['lambda_star'] == 'inf'
    with pytest.raises(DomainError):
        rd_solution(BIT, BIT_HAMMING, -0.1)


def test_unequal_row_minima_have_no_finite_rate_at_d_min():
    spec = DistortionSpec(('0', '1'), ('0', '1'), [[0.0, 1.0], [0.5, 1.0]])
    with pytest.raises(DomainError):
        rd_solution(BIT, spec, distortion_range(BIT, spec)[0])


def test_fixed_slope_endpoints():
    point = rd_fixed_slope(BIT, BIT_HAMMING, 0.0)
    assert (point.R, point.D) == (0.0, pytest.approx(0.2))
    assert point.output_marginal.tolist() == [1.0, 0.0]
    with pytest.raises(InvalidParameterError):
        rd_fixed_slope(BIT, BIT_HAMMING, -1.0)


zero_rate_cases = [
    # (source, spec, largest slope with a zero-rate optimum)
    (BIT, BIT_HAMMING, 2.0),
    (SOURCE, HAMMING, math.log2(5 / 3)),
    (BIT, DistortionSpec(('0', '1'), ('0', '1'), [[0.0, 0.0], [1.0, 1.0]]), math.inf),
]


@pytest.mark.parametrize("source,spec,expected", zero_rate_cases)
def test_zero_rate_slope(source, spec, expected):
    assert zero_rate_slope(source, spec) == pytest.approx(expected, rel=1e-12)


def test_fixed_slope_below_critical_is_zero_rate():
    point = rd_fixed_slope(BIT, BIT_HAMMING, 1.5)
    assert point.converged
    assert point.R == pytest.approx(0.0, abs=1e-9)
    assert point.D == pytest.approx(0.2, abs=1e-9)


def test_slope_search_stays_clear_of_the_critical_slope(caplog):
    with caplog.at_level(logging.WARNING, logger='vl_lossy.vl_ratedistortion'):
        sol = rd_at_distortion(BIT, BIT_HAMMING, 0.1)
    assert sol.converged
    assert sol.iterations < RD_MAX_ITER
    assert sol.lambda_star == pytest.approx(math.log2(9), abs=1e-6)
    assert not [r for r in caplog.records if 'iterations' in r.getMessage()]


def test_rate_is_non_increasing_in_distortion():
    rates = [sol.R for sol in rd_sweep(BIT, BIT_HAMMING, [0.0, 0.02, 0.06, 0.1, 0.14, 0.18, 0.2])]
    assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))
    assert rates[-1] == 0.0


def test_tilted_renyi_entropy_at_zero_distortion():
    sol = rd_solution(SOURCE, HAMMING, 0.0)
    assert d_tilted_renyi_entropy(sol, SOURCE, 0.5) == pytest.approx(renyi_entropy(SOURCE, 0.5), abs=1e-9)
    assert d_tilted_renyi_entropy(sol, SOURCE, 0.5) == pytest.approx(1.534535, abs=1e-5)
    assert d_tilted_renyi_entropy(sol, SOURCE, 1.0) == sol.R
    assert d_tilted_renyi_entropy(sol, SOURCE, 2.0) <= sol.R + 1e-9


def test_excess_constrained_sandwich_on_running_example():
    r = r_d_epsilon(SOURCE, HAMMING, 0.0, 0.25)
    h = h_d_epsilon_bruteforce(SOURCE, HAMMING, 0.0, 0.25)
    assert r == pytest.approx(1.485475 - 0.811278 - 0.25, abs=1e-5)
    assert h == pytest.approx(binary_entropy(0.3), abs=1e-12)
    assert h == pytest.approx(0.881291, abs=1e-6)
    result = sandwich(SOURCE, HAMMING, 0.0, 0.25)
    assert result.g_source == 'exact'
    assert result.g_one == pytest.approx(0.811278, abs=1e-6)
    assert min_output_entropy(SOURCE, HAMMING, 0.0, 0.25) == pytest.approx(result.g_one, abs=1e-12)
    assert result.r_d_epsilon <= result.g_one + 1e-6 <= result.h_d_epsilon + 2e-6


def test_excess_constrained_edge_levels():
    assert r_d_epsilon(SOURCE, HAMMING, 0.0, 0.5) == 0.0
    assert r_d_epsilon(SOURCE, HAMMING, 0.0, 0.0) == pytest.approx(1.485475, abs=1e-6)
    spec = DistortionSpec(('a', 'b', 'c'), ('y',), [[0.0], [1.0], [1.0]])
    assert r_d_epsilon(SOURCE, spec, 0.0, 0.2) is UNBOUNDED
    assert h_d_epsilon_bruteforce(SOURCE, spec, 0.0, 0.2) is UNBOUNDED
    assert min_output_entropy(SOURCE, spec, 0.0, 0.2) is UNBOUNDED


q_inv_cases = [
    (0.5, 0.0, 1e-12),
    (0.158655, 1.0, 1e-4),
    (0.02275, 2.0, 1e-3),
]


@pytest.mark.parametrize("eps,expected,tol", q_inv_cases)
def test_q_inv(eps, expected, tol):
    assert q_inv(eps) == pytest.approx(expected, abs=tol)


def test_q_inv_edges():
    assert q_inv(0.0) == math.inf
    for bad in (1.0, -0.1):
        with pytest.raises(InvalidParameterError):
            q_inv(bad)


def test_gaussian_approximation():
    sol = rd_at_distortion(BIT, BIT_HAMMING, 0.1)
    assert gaussian_approx(sol, 8, 0.5).value == pytest.approx(0.0136, abs=1e-3)
    assert gaussian_approx(sol, 8, 0.0).value == sol.R
    values = [gaussian_approx(sol, 100, eps).value for eps in (0.05, 0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(b < a for a, b in zip(values, values[1:]))
    with pytest.raises(InvalidParameterError):
        gaussian_approx(sol, 0, 0.5)
    with pytest.raises(InvalidParameterError):
        gaussian_approx(sol, True, 0.5)


def test_zero_excess_converse():
    code = build_stochastic_code(greedy_cover(SOURCE, HAMMING, 0.0, 0.0))
    sides = theorem1_sides(SOURCE, HAMMING, 0.0, 1.0, code)
    assert sides.cgf == pytest.approx(math.log2(1.5), abs=1e-12)
    assert sides.floor == pytest.approx(1.534535 - 1.0, abs=1e-5)
    assert theorem1_check(SOURCE, HAMMING, 0.0, 1.0, code)
    assert sides.floor <= g_quantity(SOURCE, HAMMING, 0.0, 0.0, 0.5)


def test_zero_excess_converse_needs_zero_excess():
    code = build_stochastic_code(greedy_cover(SOURCE, HAMMING, 0.0, 0.25))
    with pytest.raises(PreconditionError):
        theorem1_sides(SOURCE, HAMMING, 0.0, 1.0, code)


def test_rd_csv():
    buffer = io.StringIO()
    rd_csv(rd_sweep(BIT, BIT_HAMMING, [0.1, 0.3]), buffer)
    lines = buffer.getvalue().splitlines()
    assert lines[0] == ','.join(RD_COLUMNS)
    assert len(lines) == 3
    assert lines[2] == '0.3,0,0,0'


def test_solution_json():
    data = rd_at_distortion(BIT, BIT_HAMMING, 0.1).to_json()
    assert set(data) >= {'D', 'R', 'lambda_star', 'V', 'kernel', 'output_marginal'}
    assert len(data['kernel']) == 2
