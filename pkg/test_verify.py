"""Tests for the verification suite: individual checks, negative controls and configuration."""

import io
import json
import math

import numpy as np
import pytest

from vl_lossy.vl_codec import build_stochastic_code, code_from_assignment
from vl_lossy.vl_covering import DistortionSpec, greedy_cover, tamper_beta
from vl_lossy.vl_errors import ConfigError, PreconditionError
from vl_lossy.vl_probability import FinitePmf
from vl_lossy.vl_verify import (
    CLAIMS,
    DEFAULT_SUITE,
    FamilyConfig,
    build_instances,
    check_achievability,
    check_converse,
    check_converse_random,
    check_deterministic,
    check_exhaustive_converse,
    check_lemma3,
    check_majorization,
    check_prefix,
    check_remark1,
    check_rng,
    check_sandwich,
    check_theorem1,
    check_theorem2,
    default_suite_config,
    load_suite_config,
    negative_control_reports,
    overlap_counterexample,
    parse_suite_config,
    random_prefix_words,
    run_suite,
    summarize,
    write_report,
)

from strategies import HAMMING, SOURCE

G_HALF = 2 * math.log2(math.sqrt(0.75) + 0.5)

SMALL_SUITE = {
    'seed': 11,
    't_grid': [0.5],
    'random_kernels': 10,
    'random_codes': 5,
    'families': [{'kind': 'random_general', 'count': 2, 'max_size': 3}],
    'claims': [c for c in CLAIMS if c != 'entropy-sandwich'],
}


def stochastic(eps):
    return build_stochastic_code(greedy_cover(SOURCE, HAMMING, 0.0, eps))


def test_achievability_on_running_example():
    report = check_achievability(SOURCE, HAMMING, 0.0, 0.25, 1.0)
    assert report.verdict
    assert report.lhs == pytest.approx(math.log2(1.25), abs=1e-12)
    assert report.rhs == pytest.approx(G_HALF, abs=1e-12)
    assert report.slack == pytest.approx(report.rhs - report.lhs)
    assert report.details['k_star'] == 2


def test_converse_on_constructed_code():
    report = check_converse(stochastic(0.25), SOURCE, HAMMING, 0.0, 0.25, 1.0)
    assert report.verdict
    assert report.lhs == pytest.approx(G_HALF - 1.0, abs=1e-9)
    assert report.details['g_source'] == 'exact'
    assert report.details['kraft_type_sum'] == pytest.approx(1.5)
    assert report.details['kraft_type_bound'] == pytest.approx(2.0)


def test_converse_preconditions():
    shared = code_from_assignment({'a': '', 'b': '0', 'c': '1'}, {'': 'a', '0': 'a', '1': 'c'})
    with pytest.raises(PreconditionError):
        check_converse(shared, SOURCE, HAMMING, 0.0, 0.5, 1.0)
    with pytest.raises(PreconditionError):
        check_converse(stochastic(0.25), SOURCE, HAMMING, 0.0, 0.1, 1.0)


def test_converse_over_random_codes():
    report = check_converse_random(SOURCE, HAMMING, 0.0, 0.25, 1.0, 30, check_rng(0, 'converse'))
    assert report.verdict
    assert report.details['codes'] == 30
    assert report.details['failures'] == 0


@pytest.mark.parametrize("eps", [0.0, 0.25, 0.3])
@pytest.mark.parametrize("t", [0.1, 1.0, 8.0])
def test_length_chain(eps, t):
    assert check_lemma3(greedy_cover(SOURCE, HAMMING, 0.0, eps), t).verdict


def test_length_chain_rejects_tampered_beta():
    report = check_lemma3(tamper_beta(greedy_cover(SOURCE, HAMMING, 0.0, 0.25)), 1.0)
    assert not report.verdict
    assert report.claim == 'length-chain'


def test_majorization_on_running_example():
    report = check_majorization(SOURCE, HAMMING, 0.0, 0.25, 50, check_rng(0, 'majorization'))
    assert report.verdict
    assert report.details['exhaustive']
    assert report.details['maps_checked'] > 0
    assert report.details['kernels_checked'] == 50


def test_majorization_fails_on_overlapping_balls():
    source, spec = overlap_counterexample()
    report = check_majorization(source, spec, 0.0, 0.0, 0, check_rng(0, 'overlap'))
    assert not report.verdict
    assert report.lhs == pytest.approx(1 / 6, abs=1e-12)


def test_deterministic_and_prefix_checks():
    assert check_deterministic(SOURCE, HAMMING, 0.0, 0.25, 1.0).verdict
    report = check_prefix(SOURCE, HAMMING, 0.0, 0.25, 1.0, n_random=20, rng=check_rng(0, 'prefix'))
    assert report.verdict
    assert report.lhs == pytest.approx(2.0, abs=1e-12)
    assert report.rhs == pytest.approx(G_HALF + 2.0, abs=1e-12)
    assert report.details['random_codes'] == 20


def test_cgf_limits_on_stochastic_code():
    report = check_remark1(stochastic(0.25), SOURCE, HAMMING, 0.0)
    assert report.verdict
    assert report.details['mean_length'] == pytest.approx(0.25)
    assert report.details['max_length'] == 1.0
    assert report.details['t_high'] == 64.0
    assert report.details['high_gap'] == pytest.approx(1.0 - math.log2(0.75 + 0.25 * 2 ** 64) / 64,
                                                       abs=1e-12)


def test_zero_excess_and_one_shot_sandwich():
    report = check_theorem1(SOURCE, HAMMING, 0.0, 1.0, stochastic(0.0))
    assert report.verdict
    assert report.lhs == pytest.approx(1.534535 - 1.0, abs=1e-5)
    assert check_theorem2(SOURCE, HAMMING, 0.0, 0.25, 1.0).verdict
    assert check_theorem2(SOURCE, HAMMING, 0.0, 0.0, 2.0).verdict


def test_entropy_sandwich_check():
    report = check_sandwich(SOURCE, HAMMING, 0.0, 0.25)
    assert report.verdict
    assert report.lhs == pytest.approx(0.811278, abs=1e-6)
    assert report.rhs == pytest.approx(0.881291, abs=1e-6)


def test_exhaustive_converse():
    source = FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2))
    spec = DistortionSpec(('a', 'b', 'c'), ('u', 'v'), [[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    report = check_exhaustive_converse(source, spec, 0.0, 0.3, 1.0)
    assert report.verdict
    assert report.details['codes'] > 0
    with pytest.raises(PreconditionError):
        check_exhaustive_converse(SOURCE, HAMMING, 0.0, 0.25, 1.0)


def test_negative_controls_all_fail():
    reports = negative_control_reports()
    assert len(reports) == 9
    assert not any(r.verdict for r in reports)
    assert {r.claim for r in reports} == {
        'achievability', 'deterministic', 'prefix', 'length-chain', 'converse',
        'cgf-limits', 'zero-excess-converse', 'one-shot-sandwich', 'majorization',
    }
    assert all(r.instance['family'] == 'negative_control' for r in reports)


def test_random_prefix_words_are_prefix_free():
    rng = check_rng(5, 'words')
    for m in range(1, 8):
        words = random_prefix_words(m, rng)
        assert len(set(words)) == m
        assert not any(a != b and b.startswith(a) for a in words for b in words)


def test_check_rng_is_keyed_by_check_id():
    assert check_rng(1, 'x').random() == check_rng(1, 'x').random()
    assert check_rng(1, 'x').random() != check_rng(1, 'y').random()
    assert check_rng(1, 'x').random() != check_rng(2, 'x').random()


def test_default_suite_config():
    config = default_suite_config()
    assert config.seed == DEFAULT_SUITE['seed']
    assert [f.kind for f in config.families] == [
        'running_example', 'random_laminar', 'random_general', 'random_general', 'binary_product']
    assert config.claims == tuple(CLAIMS)
    assert config.random_kernels == 10_000
    screened = [f for f in config.families
                if f.kind.startswith('random') and 'achievability' in (f.claims or ())]
    assert sum(f.count for f in screened) >= 500
    assert all('entropy-sandwich' not in f.claims for f in screened)
    per_code_family = len(config.t_grid) * config.random_codes
    assert sum(f.count for f in screened) * per_code_family >= 10 ** 5


def test_family_claims_restrict_tasks():
    config = parse_suite_config({
        't_grid': [1.0], 'random_codes': 4, 'random_prefix_codes': 3,
        'families': [{'kind': 'running_example', 'epsilon': [0.25],
                      'claims': ['converse', 'prefix']}],
    })
    assert config.families[0].claims == ('converse', 'prefix')
    assert config.random_prefix_codes == 3
    reports = run_suite(config)
    assert [r.claim for r in reports] == ['prefix', 'converse', 'converse']
    assert reports[0].details['random_codes'] == 3
    assert reports[2].details['codes'] == 4
    assert all(r.verdict for r in reports)


config_error_cases = [
    ([], '$'),
    ({'bogus': 1}, '$'),
    ({'families': {}}, 'families'),
    ({'families': [{'kind': 'huffman'}]}, 'families[0].kind'),
    ({'families': [{'kind': 'running_example', 'epsilon': [1.0]}]}, 'families[0].epsilon'),
    ({'families': [{'kind': 'running_example', 'epsilon': ['x']}]}, 'families[0].epsilon[0]'),
    ({'families': [{'kind': 'random_general', 'count': 1.5}]}, 'families[0].count'),
    ({'families': [{'kind': 'binary_product', 'colour': 1}]}, 'families[0]'),
    ({'t_grid': [0.0]}, 't_grid'),
    ({'t_grid': []}, 't_grid'),
    ({'seed': True}, 'seed'),
    ({'claims': ['huffman-bound']}, 'claims'),
    ({'families': [{'kind': 'running_example', 'claims': ['huffman-bound']}]}, 'families[0].claims'),
    ({'random_prefix_codes': -1}, 'random_prefix_codes'),
]


@pytest.mark.parametrize("data,location", config_error_cases)
def test_config_errors_carry_location(data, location):
    with pytest.raises(ConfigError) as info:
        parse_suite_config(data)
    assert info.value.location == location
    assert str(info.value).startswith(f"{location}: ")


def test_load_suite_config(tmp_path):
    good = tmp_path / 'suite.json'
    good.write_text(json.dumps(SMALL_SUITE), encoding='utf-8')
    assert load_suite_config(good).seed == 11
    bad = tmp_path / 'bad.json'
    bad.write_text('{"seed": 1,\n "families": [}', encoding='utf-8')
    with pytest.raises(ConfigError) as info:
        load_suite_config(bad)
    assert info.value.location.startswith(f"{bad}:2:")
    with pytest.raises(ConfigError):
        load_suite_config(tmp_path / 'missing.json')


def test_build_instances():
    running = build_instances(FamilyConfig('running_example'), 0, 1)
    assert [(i.D, i.epsilon) for i in running] == [(0.0, 0.0), (0.0, 0.25)]
    binary = build_instances(FamilyConfig('binary_product', n=(1, 2), D=(0.1,), epsilon=(0.0, 0.5)), 0, 1)
    assert len(binary) == 4
    assert binary[2].spec.shape == (4, 4)
    assert binary[2].D == pytest.approx(0.2)
    laminar = build_instances(FamilyConfig('random_laminar', count=4, max_size=5), 1, 7)
    assert all(i.laminar for i in laminar)
    again = build_instances(FamilyConfig('random_laminar', count=4, max_size=5), 1, 7)
    assert [i.source.probs for i in laminar] == [i.source.probs for i in again]
    assert all(np.array_equal(a.spec.d, b.spec.d) for a, b in zip(laminar, again))


def test_running_example_suite_passes():
    config = parse_suite_config({
        'seed': 3, 't_grid': [1.0], 'random_kernels': 20, 'random_codes': 5,
        'families': [{'kind': 'running_example'}],
    })
    reports = run_suite(config)
    assert len(reports) == 25
    assert all(r.verdict for r in reports), [r.claim for r in reports if not r.verdict]
    assert summarize(reports)['failed'] == 0


def test_small_random_suite_is_reproducible():
    config = parse_suite_config(SMALL_SUITE)
    first = [r.to_json() for r in run_suite(config)]
    second = [r.to_json() for r in run_suite(config)]
    assert first == second
    assert all(r['verdict'] for r in first)
    parallel = [r.to_json() for r in run_suite(config, workers=2)]
    assert parallel == first


def test_empty_suite_with_negative_control():
    config = parse_suite_config({'families': []})
    assert run_suite(config) == []
    reports = run_suite(config, negative_control=True)
    summary = summarize(reports)
    assert summary['total'] == 9
    assert summary['failed'] == 9
    assert 'majorization' in summary['claims_failed']


def test_write_report_jsonl():
    reports = negative_control_reports()[:2] + [check_achievability(SOURCE, HAMMING, 0.0, 0.25, 1.0)]
    buffer = io.StringIO()
    summary = write_report(reports, buffer)
    lines = [json.loads(line) for line in buffer.getvalue().splitlines()]
    assert len(lines) == 4
    assert lines[-1] == summary
    assert summary == {'summary': True, 'total': 3, 'failed': 2,
                       'claims_failed': ['achievability', 'deterministic']}
    assert lines[2]['claim'] == 'achievability'
    assert lines[2]['verdict'] is True
