"""Tests for codeword tables, the three code constructions and their exact metrics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings

from vl_lossy.vl_codec import (
    build_code,
    build_deterministic_code,
    build_prefix_code,
    build_stochastic_code,
    canonical_variant,
    code_from_assignment,
    code_metrics,
    deterministic_bound,
    expected_excess,
    is_binary_string,
    is_prefix_free,
    kraft_sum,
    length_cgf,
    length_cgf_rows,
    length_law,
    nth_codeword,
    prefix_codeword,
    simulate,
    tamper_lengths,
)
from vl_lossy.vl_covering import g_quantity, greedy_cover, order_for_t
from vl_lossy.vl_errors import InvalidParameterError, UnknownSymbolError

from strategies import HAMMING, SOURCE, instances, t_values

G_HALF = 2 * math.log2(math.sqrt(0.75) + 0.5)


@pytest.fixture
def plan():
    return greedy_cover(SOURCE, HAMMING, 0.0, 0.25)


codeword_cases = [
    (1, ''),
    (2, '0'),
    (3, '1'),
    (4, '00'),
    (5, '01'),
    (7, '11'),
    (8, '000'),
    (15, '111'),
]


@pytest.mark.parametrize("i,expected", codeword_cases)
def test_nth_codeword(i, expected):
    assert nth_codeword(i) == expected
    assert len(nth_codeword(i)) == int(math.floor(math.log2(i)))


@pytest.mark.parametrize("bad", [0, -1, 1.5, True, '3'])
def test_nth_codeword_rejects(bad):
    with pytest.raises(InvalidParameterError):
        nth_codeword(bad)


prefix_cases = [
    # (i, k*, codeword)
    (1, 1, '1'),
    (1, 2, '10'),
    (2, 2, '01'),
    (1, 3, '10'),
    (3, 3, '11'),
    (4, 4, '001'),
    (5, 5, '011'),
]


@pytest.mark.parametrize("i,k,expected", prefix_cases)
def test_prefix_codeword(i, k, expected):
    assert prefix_codeword(i, k) == expected


@pytest.mark.parametrize("k", [1, 2, 3, 4, 7, 8, 9, 16, 33])
def test_prefix_codewords_are_prefix_free(k):
    words = [prefix_codeword(i, k) for i in range(1, k + 1)]
    assert is_prefix_free(words)
    assert all(len(w) == math.floor(math.log2(k)) + 1 for w in words)


def test_prefix_free_and_binary_helpers():
    assert not is_prefix_free(['0', '01'])
    assert is_prefix_free(['0', '10', '11'])
    assert is_binary_string('0110')
    assert is_binary_string('')
    assert not is_binary_string('012')


def test_variant_aliases():
    assert canonical_variant('det') == 'deterministic'
    assert canonical_variant('Stochastic') == 'stochastic'
    with pytest.raises(InvalidParameterError):
        canonical_variant('huffman')


metric_cases = [
    # (variant, epsilon, excess, cgf at t = 1, mean length, max length)
    ('stochastic', 0.25, 0.25, math.log2(1.25), 0.25, 1),
    ('deterministic', 0.25, 0.2, math.log2(1.3), 0.3, 1),
    ('prefix', 0.25, 0.25, 2.0, 2.0, 2),
    ('stochastic', 0.0, 0.0, math.log2(1.5), 0.5, 1),
    ('stochastic', 0.5, 0.5, 0.0, 0.0, 0),
    ('prefix', 0.5, 0.5, 1.0, 1.0, 1),
]


@pytest.mark.parametrize("variant,eps,excess,cgf,mean,longest", metric_cases)
def test_running_example_metrics(variant, eps, excess, cgf, mean, longest):
    code = build_code(greedy_cover(SOURCE, HAMMING, 0.0, eps), variant)
    assert code.check_invariants() == []
    m = code_metrics(code, SOURCE, HAMMING, 0.0, 1.0)
    assert m.excess_probability == pytest.approx(excess, abs=1e-12)
    assert m.cgf == pytest.approx(cgf, abs=1e-12)
    assert m.mean_length == pytest.approx(mean, abs=1e-12)
    assert m.max_length == longest


def test_stochastic_code_structure(plan):
    code = build_stochastic_code(plan)
    assert code.decoder == {'': 'a', '0': 'b'}
    assert code.branches('a') == (('', 1.0),)
    (word, keep), (fallback, rest) = code.branches('b')
    assert (word, fallback) == ('0', '')
    assert keep == pytest.approx(0.25 / 0.3)
    assert rest == pytest.approx(1 - 0.25 / 0.3)
    assert code.branches('c') == (('', 1.0),)
    assert code.decode('1') is None
    with pytest.raises(UnknownSymbolError):
        code.branches('z')
    out = code.output_distribution(SOURCE)
    assert out.alphabet == ('a', 'b')
    assert out.probs == pytest.approx((0.75, 0.25))


def test_code_json_export(plan):
    data = build_prefix_code(plan).to_json()
    assert data['variant'] == 'prefix'
    assert data['lengths'] == {'10': 2, '01': 2}
    assert data['plan']['k_star'] == 2
    assert {row['symbol'] for row in data['encoder']} == {'a', 'b', 'c'}


def test_expected_excess(plan):
    assert expected_excess(plan, 'stochastic') == 0.25
    assert expected_excess(plan, 'det') == pytest.approx(0.2)
    single = greedy_cover(SOURCE, HAMMING, 0.0, 0.5)
    assert expected_excess(single, 'stochastic') == pytest.approx(0.5)


def test_deterministic_bound(plan):
    bound = deterministic_bound(plan, 1.0)
    assert bound.g == pytest.approx(G_HALF, abs=1e-12)
    expected = 0.05 * 0.25 ** -0.5 * math.log2(math.e) / 2 ** (0.5 * G_HALF)
    assert bound.correction == pytest.approx(expected, rel=1e-12)
    assert bound.correction == pytest.approx(0.1056, abs=1e-3)
    assert code_metrics(build_deterministic_code(plan), SOURCE, HAMMING, 0.0, 1.0).cgf <= bound.value
    exact = greedy_cover(SOURCE, HAMMING, 0.0, 0.0)
    assert deterministic_bound(exact, 1.0).correction == 0.0


def test_tampered_lengths_are_flagged(plan):
    code = tamper_lengths(build_stochastic_code(plan))
    assert "declared lengths differ from the codeword lengths" in code.check_invariants()
    assert code_metrics(code, SOURCE, HAMMING, 0.0, 1.0).cgf == pytest.approx(0.0, abs=1e-12)
    law = length_law(code, SOURCE, HAMMING, 0.0, declared=False)
    assert math.fsum(law.weights * law.lengths) == pytest.approx(0.25)


def test_code_from_assignment():
    code = code_from_assignment({'a': '', 'b': '0', 'c': '1'}, {'': 'a', '0': 'b', '1': 'c', '00': 'a'})
    assert code.codewords() == ('', '0', '1')
    m = code_metrics(code, SOURCE, HAMMING, 0.0, 1.0)
    assert m.excess_probability == 0.0
    assert m.cgf == pytest.approx(math.log2(1.5))


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_cgf_needs_positive_t(plan, t):
    with pytest.raises(InvalidParameterError):
        code_metrics(build_stochastic_code(plan), SOURCE, HAMMING, 0.0, t)
    with pytest.raises(InvalidParameterError):
        length_cgf([1.0], [0.0], t)
    with pytest.raises(InvalidParameterError):
        deterministic_bound(plan, t)


def test_cgf_limits(plan):
    code = build_stochastic_code(plan)
    assert code_metrics(code, SOURCE, HAMMING, 0.0, 1e-6).cgf == pytest.approx(0.25, abs=1e-4)
    assert code_metrics(code, SOURCE, HAMMING, 0.0, 64.0).cgf == pytest.approx(1.0, abs=0.05)
    grid = [code_metrics(code, SOURCE, HAMMING, 0.0, t).cgf for t in (0.1, 0.5, 1, 2, 8, 32)]
    assert all(b >= a - 1e-12 for a, b in zip(grid, grid[1:]))


def test_simulation_matches_exact_metrics(plan):
    code = build_stochastic_code(plan)
    result = simulate(code, SOURCE, HAMMING, 0.0, 200_000, np.random.default_rng(7))
    assert result.excess_rate == pytest.approx(0.25, abs=0.01)
    assert result.mean_length == pytest.approx(0.25, abs=0.01)
    again = simulate(code, SOURCE, HAMMING, 0.0, 200_000, np.random.default_rng(7))
    assert again == result
    with pytest.raises(InvalidParameterError):
        simulate(code, SOURCE, HAMMING, 0.0, 0, np.random.default_rng(7))


@settings(max_examples=80, deadline=None)
@given(instances(), t_values)
def test_stochastic_code_meets_epsilon_and_g(instance, t):
    source, spec, D, eps = instance
    plan = greedy_cover(source, spec, D, eps)
    code = build_stochastic_code(plan)
    assert code.check_invariants() == []
    m = code_metrics(code, source, spec, D, t)
    assert m.excess_probability == pytest.approx(expected_excess(plan, 'stochastic'), abs=1e-10)
    assert m.excess_probability <= eps + 1e-10
    assert m.cgf <= g_quantity(source, spec, D, eps, order_for_t(t)) + 1e-9


@settings(max_examples=80, deadline=None)
@given(instances(), t_values)
def test_deterministic_and_prefix_bounds(instance, t):
    source, spec, D, eps = instance
    plan = greedy_cover(source, spec, D, eps)
    det = code_metrics(build_deterministic_code(plan), source, spec, D, t)
    assert det.excess_probability <= eps + 1e-10
    assert det.cgf <= deterministic_bound(plan, t).value + 1e-9
    prefix = build_prefix_code(plan)
    assert kraft_sum(prefix) <= 1.0
    upper = g_quantity(source, spec, D, eps, order_for_t(t)) + math.floor(math.log2(plan.k_star)) + 1
    assert code_metrics(prefix, source, spec, D, t).cgf <= upper + 1e-9


def test_length_cgf_rows_match_single_rows():
    weights = [0.5, 0.3, 0.2]
    lengths = [[0, 1, 1], [2, 2, 0], [0, 0, 0]]
    rows = length_cgf_rows(weights, lengths, 1.0)
    assert rows.shape == (3,)
    assert rows == pytest.approx([length_cgf(weights, row, 1.0) for row in lengths])
    assert rows[0] == pytest.approx(math.log2(1.5))
    assert rows[2] == pytest.approx(0.0, abs=1e-15)
