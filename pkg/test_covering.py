"""Tests for distortion balls, the greedy cover and the G quantity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vl_lossy.vl_covering import (
    DistortionSpec,
    coverage_gap,
    distortion_ball,
    enumerate_maps,
    feasibility,
    g_exact,
    g_quantity,
    greedy_cover,
    greedy_coverage,
    induced_output_array,
    induced_output_distribution,
    is_laminar,
    max_coverage,
    order_for_t,
    reference_g,
    tamper_beta,
    theorem2_bounds,
    theorem6_bounds,
    truncate_plan,
    uncovered_mass,
)
from vl_lossy.vl_errors import (
    InfeasibleError,
    InstanceTooLargeError,
    InvalidDistributionError,
    InvalidParameterError,
)
from vl_lossy.vl_probability import UNBOUNDED, FinitePmf, majorizes

from strategies import HAMMING, SOURCE, instances

G_HALF = 2 * math.log2(math.sqrt(0.75) + 0.5)


def overlap_instance():
    balls = {'A': '1234', 'B': '125', 'C': '346'}
    xs = tuple('123456')
    d = [[0.0 if x in balls[y] else 1.0 for y in 'ABC'] for x in xs]
    return FinitePmf.uniform(xs), DistortionSpec(xs, tuple('ABC'), d)


plan_cases = [
    # (epsilon, centers, k*, alpha, beta, gamma, induced distribution)
    (0.0, ('a', 'b', 'c'), 3, 0.8, 0.2, 0.0, (0.5, 0.3, 0.2)),
    (0.25, ('a', 'b'), 2, 0.5, 0.25, 0.2, (0.75, 0.25)),
    (0.3, ('a', 'b'), 2, 0.5, 0.2, 0.2, (0.8, 0.2)),
    (0.5, ('a',), 1, 0.0, 0.5, 0.5, (1.0,)),
]


@pytest.mark.parametrize("eps,centers,k,alpha,beta,gamma,induced", plan_cases)
def test_running_example_plan(eps, centers, k, alpha, beta, gamma, induced):
    plan = greedy_cover(SOURCE, HAMMING, 0.0, eps)
    assert plan.ordered_centers == centers
    assert plan.k_star == k
    assert plan.alpha_mass == pytest.approx(alpha, abs=1e-12)
    assert plan.beta_mass == pytest.approx(beta, abs=1e-12)
    assert plan.gamma_mass == pytest.approx(gamma, abs=1e-12)
    assert induced_output_array(plan).tolist() == pytest.approx(induced, abs=1e-12)
    assert plan.check_invariants() == []


def test_running_example_g():
    assert g_quantity(SOURCE, HAMMING, 0.0, 0.25, 0.5) == pytest.approx(G_HALF, abs=1e-12)
    assert g_quantity(SOURCE, HAMMING, 0.0, 0.25, 0.5) == pytest.approx(0.9, abs=1e-3)
    assert g_quantity(SOURCE, HAMMING, 0.0, 0.25, 1.0) == pytest.approx(0.811278, abs=1e-6)
    assert g_quantity(SOURCE, HAMMING, 0.0, 0.5, 0.5) == 0.0
    assert g_quantity(SOURCE, HAMMING, 1.0, 0.0, 0.5) == 0.0


def test_induced_distribution_labels():
    pmf = induced_output_distribution(greedy_cover(SOURCE, HAMMING, 0.0, 0.25))
    assert pmf.alphabet == ('a', 'b')
    assert pmf.probs == pytest.approx((0.75, 0.25))


def test_lowest_index_tie_break():
    uniform = FinitePmf.uniform('abc')
    assert greedy_cover(uniform, HAMMING, 0.0, 0.0).ordered_centers == ('a', 'b', 'c')
    skewed = FinitePmf(('a', 'b', 'c'), (0.25, 0.5, 0.25))
    assert greedy_cover(skewed, HAMMING, 0.0, 0.0).ordered_centers == ('b', 'a', 'c')


def test_infeasible_instance():
    source = FinitePmf(('a', 'b'), (0.6, 0.4))
    spec = DistortionSpec(('a', 'b'), ('y',), [[0.0], [1.0]])
    assert uncovered_mass(source, spec, 0.5) == pytest.approx(0.4)
    assert not feasibility(source, spec, 0.5, 0.3)
    assert feasibility(source, spec, 0.5, 0.4)
    assert g_quantity(source, spec, 0.5, 0.3, 0.5) is UNBOUNDED
    assert g_exact(source, spec, 0.5, 0.3, 0.5) is UNBOUNDED
    with pytest.raises(InfeasibleError) as info:
        greedy_cover(source, spec, 0.5, 0.3)
    assert info.value.violating_mass == pytest.approx(0.4)


@pytest.mark.parametrize("D,eps", [(-0.1, 0.0), (0.0, 1.0), (0.0, -0.1), (math.nan, 0.0)])
def test_invalid_levels(D, eps):
    with pytest.raises(InvalidParameterError):
        greedy_cover(SOURCE, HAMMING, D, eps)


def test_distortion_spec_validation():
    with pytest.raises(InvalidDistributionError):
        DistortionSpec(('a', 'b'), ('y',), [[0.0, 1.0]])
    with pytest.raises(InvalidDistributionError):
        DistortionSpec(('a',), ('y',), [[-1.0]])
    with pytest.raises(InvalidDistributionError):
        DistortionSpec.from_json({'source_alphabet': ['a'], 'repro_alphabet': ['y']})
    spec = DistortionSpec.from_json(HAMMING.to_json())
    assert spec.value('a', 'b') == 1.0
    assert distortion_ball(spec, 'a', 0.0) == frozenset({'a'})
    assert distortion_ball(spec, 'a', 1.0) == frozenset({'a', 'b', 'c'})


def test_tampered_plans_break_invariants():
    plan = greedy_cover(SOURCE, HAMMING, 0.0, 0.25)
    assert tamper_beta(plan).check_invariants()
    truncated = truncate_plan(plan)
    assert truncated.k_star == 1
    assert any("1 - epsilon" in p for p in truncated.check_invariants())
    with pytest.raises(InvalidParameterError):
        truncate_plan(greedy_cover(SOURCE, HAMMING, 0.0, 0.5))


def test_laminar_detection():
    assert is_laminar(HAMMING, 0.0)
    assert is_laminar(HAMMING, 1.0)
    assert not is_laminar(overlap_instance()[1], 0.0)
    pairs = DistortionSpec.hamming(['00', '01', '10', '11'])
    d = np.array([[sum(a != b for a, b in zip(x, y)) for y in pairs.repro_alphabet]
                  for x in pairs.source_alphabet], dtype=float)
    assert not is_laminar(DistortionSpec(pairs.source_alphabet, pairs.repro_alphabet, d), 1.0)


def test_exact_g_matches_greedy_on_laminar():
    for eps in (0.0, 0.25, 0.3):
        for alpha in (0.5, 1.0, 2.0):
            assert g_exact(SOURCE, HAMMING, 0.0, eps, alpha) == pytest.approx(
                g_quantity(SOURCE, HAMMING, 0.0, eps, alpha), abs=1e-9)


def test_overlapping_balls_greedy_is_not_optimal():
    source, spec = overlap_instance()
    plan = greedy_cover(source, spec, 0.0, 0.0)
    assert plan.ordered_centers == ('A', 'B', 'C')
    assert g_quantity(source, spec, 0.0, 0.0, 1.0) == pytest.approx(1.251629, abs=1e-6)
    assert g_exact(source, spec, 0.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert coverage_gap(source, spec, 0.0, 0.0) == pytest.approx(1 / 6)
    assert not majorizes(induced_output_array(plan), [0.5, 0.5])


def test_coverage():
    assert greedy_coverage(SOURCE, HAMMING, 0.0, 2) == pytest.approx(0.8)
    assert max_coverage(SOURCE, HAMMING, 0.0, 2) == pytest.approx(0.8)
    assert coverage_gap(SOURCE, HAMMING, 0.0, 0.0) == 0.0


def test_map_enumeration():
    maps = np.concatenate(list(enumerate_maps(2, 3, budget=100, chunk=4)))
    assert maps.shape == (9, 2)
    assert len({tuple(m) for m in maps}) == 9
    with pytest.raises(InstanceTooLargeError):
        next(enumerate_maps(5, 4, budget=100))


def test_order_for_t():
    assert order_for_t(0.0) == 1.0
    assert order_for_t(1.0) == 0.5
    with pytest.raises(InvalidParameterError):
        order_for_t(-1.0)


def test_one_shot_bounds():
    lower, upper, how = theorem2_bounds(SOURCE, HAMMING, 0.0, 0.25, 1.0)
    assert how == 'exact'
    assert upper == pytest.approx(G_HALF, abs=1e-9)
    assert lower == pytest.approx(G_HALF - 1.0, abs=1e-9)
    lower, upper, _ = theorem6_bounds(SOURCE, HAMMING, 0.0, 0.25, 1.0)
    assert lower == pytest.approx(G_HALF, abs=1e-9)
    assert upper == pytest.approx(G_HALF + 2.0, abs=1e-9)
    assert reference_g(SOURCE, HAMMING, 0.0, 0.25, 0.5, budget=1) == (
        pytest.approx(G_HALF), 'greedy')


@settings(max_examples=60, deadline=None)
@given(instances())
def test_greedy_plan_invariants(instance):
    source, spec, D, eps = instance
    plan = greedy_cover(source, spec, D, eps)
    assert plan.check_invariants() == []
    q = induced_output_array(plan)
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(q) <= 1e-12)
    assert set(plan.ordered_centers) <= set(spec.repro_alphabet)


@settings(max_examples=40, deadline=None)
@given(instances(max_x=3, max_y=3), st.sampled_from([0.3, 0.5, 1.0, 2.0]))
def test_exact_g_never_exceeds_greedy(instance, alpha):
    source, spec, D, eps = instance
    assert g_exact(source, spec, D, eps, alpha) <= g_quantity(source, spec, D, eps, alpha) + 1e-9


@settings(max_examples=40, deadline=None)
@given(instances(max_x=3, max_y=3))
def test_g_non_increasing_in_epsilon(instance):
    source, spec, D, eps = instance
    looser = eps + (1.0 - eps) / 2
    assert g_exact(source, spec, D, looser, 0.5) <= g_exact(source, spec, D, eps, 0.5) + 1e-9
