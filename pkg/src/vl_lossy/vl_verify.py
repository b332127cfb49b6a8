"""
Bound Verification Suite
=========================
Executable forms of the achievability and converse inequalities, run over
constructed codes, random codes and generated instance families.

Every check returns a BoundReport whose verdict is ``lhs <= rhs + tol`` for the
claim's headline inequality, combined with the claim's side conditions.
Randomized checks draw from a generator seeded by (root seed, crc32(check id)),
so a report is reproducible bit for bit from the configuration.

Claims:
- achievability         stochastic code meets eps exactly with CGF <= G
- converse              every feasible code has CGF >= G - log2 log2(1 + min(|X|, |Y|))
- length-chain          2^(t len w_i) <= i^t <= [sum_j (P(y_j)/P(y_i))^(1/(1+t))]^t
- majorization          the induced distribution majorizes every feasible output law
- deterministic         deterministic code stays under G plus its correction term
- prefix                prefix code sits in [G, G + floor(log2 k*) + 1]
- cgf-limits            CGF tends to the mean length (t -> 0) and max length (t -> inf)
- zero-excess-converse  CGF >= D-tilted Renyi entropy - log2 log2(1 + min(|X|, |Y|))
- one-shot-sandwich     constructed CGF between the converse floor and G
- entropy-sandwich      R_{D,eps} <= G_1 <= H_{D,eps}
- exhaustive-converse   converse over every small deterministic injective-decoder code
"""

import itertools
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, TextIO, Tuple

import numpy as np

from .vl_blocklength import build_product
from .vl_codec import (
    Code,
    build_deterministic_code,
    build_prefix_code,
    build_stochastic_code,
    code_metrics,
    deterministic_bound,
    expected_excess,
    is_prefix_free,
    kraft_sum,
    length_cgf,
    length_cgf_rows,
    length_law,
    nth_codeword,
    tamper_lengths,
)
from .vl_covering import (
    EXACT_G_BUDGET,
    CoveringPlan,
    DistortionSpec,
    aligned_probs,
    converse_slack,
    enumerate_maps,
    feasible_maps,
    greedy_cover,
    induced_output_array,
    is_laminar,
    map_count,
    map_excess,
    map_marginals,
    order_for_t,
    reference_g,
    tamper_beta,
    truncate_plan,
    uncovered_mass,
)
from .vl_errors import ConfigError, ConvergenceError, DomainError, PreconditionError
from .vl_probability import (
    EQUALITY_TOL,
    INEQUALITY_TOL,
    MAJORIZATION_TOL,
    NORMALIZATION_TOL,
    UNBOUNDED,
    Bits,
    FinitePmf,
    entropy_of_array,
    format_bits,
    renyi_rows,
)
from .vl_ratedistortion import BRUTEFORCE_BUDGET, sandwich, theorem1_sides

logger = logging.getLogger(__name__)

CLAIMS = {
    'achievability': 'stochastic code: excess = eps and CGF <= G',
    'converse': 'feasible injective-decoder code: CGF >= G - log2 log2(1 + min(|X|,|Y|)), '
                'Kraft-type sum <= log2(1 + min(|X|,|Y|)) and the Holder step',
    'length-chain': '2^(t len w_i) <= i^t <= [sum_j (P(y_j)/P(y_i))^(1/(1+t))]^t for i <= k*',
    'majorization': 'induced distribution majorizes every feasible output distribution',
    'deterministic': 'deterministic code: excess <= eps and CGF <= G + correction',
    'prefix': 'prefix code: prefix-free, Kraft <= 1, G <= CGF <= G + floor(log2 k*) + 1; '
              'random prefix codes have CGF >= G',
    'cgf-limits': 'CGF -> mean length as t -> 0 and -> max length as t -> inf, non-decreasing in t',
    'zero-excess-converse': 'zero-excess code: CGF >= H_1/(1+t)(X,D) - log2 log2(1 + min(|X|,|Y|))',
    'one-shot-sandwich': 'G - log2 log2(1 + min(|X|,|Y|)) <= constructed CGF <= G',
    'entropy-sandwich': 'R_{D,eps} <= G_1 <= H_{D,eps}',
    'exhaustive-converse': 'converse over all deterministic codes with codeword index <= 7',
}

SMALL_T = 1e-6
LOW_T_TOL = 1e-4
HIGH_T_TOL = 0.05
RD_SANDWICH_TOL = 1e-6
REJECTION_TRIES = 64
EXHAUSTIVE_MAX_INDEX = 7


@dataclass(frozen=True)
class BoundReport:
    """Outcome of one claim on one instance; slack = rhs - lhs."""

    claim: str
    lhs: float
    rhs: float
    verdict: bool
    slack: float
    instance: Mapping[str, object] = field(default_factory=dict)
    details: Mapping[str, object] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            'claim': self.claim,
            'lhs': _jsonable(self.lhs),
            'rhs': _jsonable(self.rhs),
            'verdict': self.verdict,
            'slack': _jsonable(self.slack),
            'instance': {k: _jsonable(v) for k, v in self.instance.items()},
            'details': {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value):
    if value is UNBOUNDED:
        return 'inf'
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else format_bits(v)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


def _report(claim: str, lhs, rhs, instance: Optional[Mapping] = None, ok: bool = True,
            tol: float = INEQUALITY_TOL, details: Optional[Mapping] = None) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    slack = 0.0 if lhs == rhs else rhs - lhs
    verdict = bool(lhs <= rhs + tol and ok)
    report = BoundReport(claim, lhs, rhs, verdict, slack, dict(instance or {}), dict(details or {}))
    logger.info("%s %s: lhs=%s rhs=%s", 'PASS' if verdict else 'FAIL', claim,
                format_bits(lhs), format_bits(rhs))
    return report


def check_rng(seed: int, check_id: str) -> np.random.Generator:
    """Generator owned by one check, derived from the root seed and the check id."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(check_id.encode())]))


# === Random codes and kernels ===

def random_feasible_maps(p: np.ndarray, inside: np.ndarray, epsilon: float,
                         rng: np.random.Generator, count: int,
                         tries: int = REJECTION_TRIES) -> np.ndarray:
    """
    `count` deterministic maps X -> Y with P[d > D] <= epsilon, shape (count, |X|).

    Each symbol lands inside its ball with probability 1 - q (q uniform on
    [0, 1/2) per map) and uniformly on Y otherwise. Infeasible draws are
    redrawn for up to `tries` rounds; maps still missing after that send every
    coverable symbol inside.
    """
    n_x, n_y = inside.shape
    coverable = inside.any(axis=1)
    bad = (~inside).astype(float)

    def in_ball(rows: int) -> np.ndarray:
        return np.argmax(np.where(inside[None], rng.random((rows, n_x, n_y)), -1.0), axis=2)

    kept = [np.empty((0, n_x), dtype=np.intp)]
    missing = count
    for _ in range(tries):
        if missing <= 0:
            break
        stay = coverable[None] & (rng.random((missing, n_x)) >= rng.uniform(0.0, 0.5, size=(missing, 1)))
        phi = np.where(stay, in_ball(missing), rng.integers(n_y, size=(missing, n_x)))
        phi = phi[map_excess(p, bad, phi) <= epsilon + NORMALIZATION_TOL]
        kept.append(phi)
        missing -= len(phi)
    if missing > 0:
        kept.append(np.where(coverable[None], in_ball(missing), rng.integers(n_y, size=(missing, n_x))))
    return np.concatenate(kept).astype(np.intp)[:count]


def random_feasible_kernels(p: np.ndarray, inside: np.ndarray, epsilon: float,
                            rng: np.random.Generator, count: int) -> np.ndarray:
    """Mixtures (1 - theta) phi + theta K of feasible maps and Dirichlet kernels, shape (count, |X|, |Y|)."""
    n_x, n_y = inside.shape
    bad = (~inside).astype(float)
    phi = np.eye(n_y)[random_feasible_maps(p, inside, epsilon, rng, count)]
    dirichlet = rng.dirichlet(np.ones(n_y), size=(count, n_x))
    e_phi = (phi * bad).sum(axis=2) @ p
    e_k = (dirichlet * bad).sum(axis=2) @ p
    with np.errstate(divide='ignore', invalid='ignore'):
        theta_max = np.where(e_k <= epsilon, 1.0,
                             np.clip((epsilon - e_phi) / (e_k - e_phi), 0.0, 1.0))
    theta = (theta_max * rng.random(count))[:, None, None]
    return (1.0 - theta) * phi + theta * dirichlet


def random_prefix_words(m: int, rng: np.random.Generator) -> List[str]:
    """m distinct leaves of a random full binary tree."""
    leaves = ['']
    while len(leaves) < m:
        word = leaves.pop(int(rng.integers(len(leaves))))
        leaves += [word + '0', word + '1']
    return [leaves[i] for i in rng.permutation(len(leaves))[:m]]


class CodeBatch(NamedTuple):
    """Random deterministic codes with injective decoders, one per row."""

    maps: np.ndarray      # (codes, |X|) encoder
    lengths: np.ndarray   # (codes, |Y|) codeword length of each output
    used: np.ndarray      # (codes, |Y|) output emitted by some symbol

    def symbol_lengths(self) -> np.ndarray:
        return np.take_along_axis(self.lengths, self.maps, axis=1)

    def kraft_type_sums(self) -> np.ndarray:
        return np.where(self.used, 2.0 ** -self.lengths, 0.0).sum(axis=1)


def random_code_batch(p: np.ndarray, inside: np.ndarray, epsilon: float,
                      rng: np.random.Generator, count: int, prefix: bool) -> CodeBatch:
    """
    `count` random feasible codes.

    Plain codes give the outputs distinct shortlex indices drawn from
    1..2|Y|+1; prefix codes give the used outputs the leaves of a random full
    binary tree.
    """
    maps = random_feasible_maps(p, inside, epsilon, rng, count)
    n_y = inside.shape[1]
    used = np.zeros((len(maps), n_y), dtype=bool)
    np.put_along_axis(used, maps, True, axis=1)
    if prefix:
        lengths = np.zeros((len(maps), n_y))
        for k in range(len(maps)):
            outputs = np.flatnonzero(used[k])
            lengths[k, outputs] = [len(w) for w in random_prefix_words(len(outputs), rng)]
    else:
        table = np.array([0] + [len(nth_codeword(i)) for i in range(1, 2 * n_y + 2)], dtype=float)
        lengths = table[np.argsort(rng.random((len(maps), 2 * n_y + 1)), axis=1)[:, :n_y] + 1]
    return CodeBatch(maps, lengths, used)


# === Checks ===

def _g_at(plan: CoveringPlan, t: float) -> float:
    return entropy_of_array(induced_output_array(plan), order_for_t(t))


def check_achievability(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                        t: float, plan: Optional[CoveringPlan] = None,
                        instance: Optional[Mapping] = None) -> BoundReport:
    """
    Build the stochastic code and check excess = eps (gamma when k* = 1) and CGF <= G.

    Raises:
        InfeasibleError: no code meets the excess constraint.
    """
    plan = plan or greedy_cover(source, spec, D, epsilon)
    metrics = code_metrics(build_stochastic_code(plan), source, spec, D, t)
    target = expected_excess(plan, 'stochastic')
    excess_ok = (abs(metrics.excess_probability - target) <= EQUALITY_TOL
                 and metrics.excess_probability <= epsilon + EQUALITY_TOL)
    return _report('achievability', metrics.cgf, _g_at(plan, t), instance, ok=excess_ok,
                   details={'excess': metrics.excess_probability, 'target_excess': target,
                            'k_star': plan.k_star, 't': t})


def check_converse(code: Code, source: FinitePmf, spec: DistortionSpec, D: float,
                   epsilon: float, t: float, reference: Optional[Tuple[Bits, str]] = None,
                   instance: Optional[Mapping] = None) -> BoundReport:
    """
    CGF >= G - log2 log2(1 + min(|X|, |Y|)) for a feasible injective-decoder code.

    Also checks that sum over used codewords of 2^-len is at most
    log2(1 + min(|X|, |Y|)), and that CGF >= H_1/(1+t)(output) - log2 of that sum.
    G is exact when the instance fits EXACT_G_BUDGET; `reference` passes in a
    (G, source) pair already computed at order 1/(1+t).

    Raises:
        PreconditionError: the code violates the excess constraint or its decoder
            is not injective.
    """
    if len(set(code.decoder.values())) != len(code.decoder):
        raise PreconditionError("converse checks need an injective decoder")
    metrics = code_metrics(code, source, spec, D, t)
    if metrics.excess_probability > epsilon + EQUALITY_TOL:
        raise PreconditionError(
            f"code excess {metrics.excess_probability:.12g} exceeds epsilon = {epsilon}"
        )
    g, how = reference or reference_g(source, spec, D, epsilon, order_for_t(t))
    floor = g - converse_slack(*spec.shape)

    emitted = code.emitted()
    kraft_type = math.fsum(2.0 ** -code.length_table[w] for w in emitted)
    kraft_bound = math.log2(1 + min(spec.shape))
    output = code.output_distribution(source)
    holder_rhs = entropy_of_array(output.probs, order_for_t(t)) - math.log2(kraft_type)
    ok = (kraft_type <= kraft_bound + INEQUALITY_TOL
          and metrics.cgf >= holder_rhs - INEQUALITY_TOL)
    return _report('converse', floor, metrics.cgf, instance, ok=ok,
                   details={'g': g, 'g_source': how, 'kraft_type_sum': kraft_type,
                            'kraft_type_bound': kraft_bound, 'holder_rhs': holder_rhs,
                            'variant': code.variant, 't': t})


def check_converse_random(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                          t: float, count: int, rng: np.random.Generator,
                          reference: Optional[Tuple[Bits, str]] = None,
                          instance: Optional[Mapping] = None) -> BoundReport:
    """
    Converse over `count` random feasible injective-decoder codes.

    Every code must clear the floor, the Kraft-type bound and the Holder step;
    lhs/rhs are the floor and the smallest CGF among the codes.
    """
    if count == 0:
        return _report('converse', 0.0, 0.0, instance, details={'codes': 0, 't': t})
    p = aligned_probs(source, spec)
    alpha = order_for_t(t)
    g, how = reference or reference_g(source, spec, D, epsilon, alpha)
    floor = g - converse_slack(*spec.shape)
    kraft_bound = math.log2(1 + min(spec.shape))

    batch = random_code_batch(p, spec.ball_matrix(D), epsilon, rng, count, prefix=False)
    cgf = length_cgf_rows(p, batch.symbol_lengths(), t)
    kraft_type = batch.kraft_type_sums()
    holder = renyi_rows(map_marginals(p, batch.maps, spec.shape[1]), alpha) - np.log2(kraft_type)
    violated = ((cgf < floor - INEQUALITY_TOL)
                | (kraft_type > kraft_bound + INEQUALITY_TOL)
                | (cgf < holder - INEQUALITY_TOL))
    failures = int(violated.sum())
    return _report('converse', floor, float(cgf.min()), instance, ok=failures == 0,
                   details={'g': g, 'g_source': how, 'codes': count, 'failures': failures,
                            'kraft_type_max': float(kraft_type.max()),
                            'kraft_type_bound': kraft_bound, 'variant': 'random', 't': t})


def check_lemma3(plan: CoveringPlan, t: float, instance: Optional[Mapping] = None) -> BoundReport:
    """
    2^(t len w_i) <= i^t <= [sum_j (P(y_j)/P(y_i))^(1/(1+t))]^t for every i <= k*.

    Compared in log2 scale; lhs is the largest violation over i and both steps.
    """
    q = induced_output_array(plan)
    s = 1.0 / (1.0 + t)
    worst = -math.inf
    worst_i = 1
    for i in range(1, plan.k_star + 1):
        length_term = t * len(nth_codeword(i))
        index_term = t * math.log2(i)
        with np.errstate(divide='ignore'):
            ratio_term = t * math.log2(float(np.sum((q / q[i - 1]) ** s))) if q[i - 1] > 0 else math.inf
        gap = max(length_term - index_term, index_term - ratio_term)
        if gap > worst:
            worst, worst_i = gap, i
    return _report('length-chain', worst, 0.0, instance, tol=1e-12,
                   details={'worst_i': worst_i, 'k_star': plan.k_star, 't': t})


def check_majorization(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                       n_kernels: int, rng: np.random.Generator,
                       plan: Optional[CoveringPlan] = None,
                       instance: Optional[Mapping] = None) -> BoundReport:
    """
    The induced distribution against every feasible deterministic map (when
    enumerable) and `n_kernels` random feasible kernels.

    lhs is the largest amount by which a sampled marginal's sorted prefix sum
    exceeds the induced one.
    """
    plan = plan or greedy_cover(source, spec, D, epsilon)
    p = aligned_probs(source, spec)
    n_x, n_y = spec.shape
    target = np.zeros(n_y)
    target[:plan.k_star] = np.sort(induced_output_array(plan))[::-1]
    ceiling = np.cumsum(target)

    def shortfall(marginals: np.ndarray) -> float:
        ordered = -np.sort(-marginals, axis=1)
        return float((np.cumsum(ordered, axis=1) - ceiling[None, :]).max())

    worst = -math.inf
    maps_checked = 0
    exhaustive = map_count(n_x, n_y) <= EXACT_G_BUDGET
    if exhaustive:
        for maps in feasible_maps(source, spec, D, epsilon):
            worst = max(worst, shortfall(map_marginals(p, maps, n_y)))
            maps_checked += maps.shape[0]
    inside = spec.ball_matrix(D)
    if n_kernels > 0:
        kernels = random_feasible_kernels(p, inside, epsilon, rng, n_kernels)
        marginals = np.einsum('x,kxy->ky', p, kernels)
        worst = max(worst, shortfall(marginals))
    worst = max(worst, 0.0) if maps_checked or n_kernels else 0.0
    return _report('majorization', worst, 0.0, instance, tol=MAJORIZATION_TOL,
                   details={'maps_checked': maps_checked, 'kernels_checked': n_kernels,
                            'exhaustive': exhaustive, 'k_star': plan.k_star})


def check_deterministic(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                        t: float, plan: Optional[CoveringPlan] = None,
                        instance: Optional[Mapping] = None) -> BoundReport:
    """Deterministic code: excess <= eps and CGF <= G + correction term."""
    plan = plan or greedy_cover(source, spec, D, epsilon)
    metrics = code_metrics(build_deterministic_code(plan), source, spec, D, t)
    bound = deterministic_bound(plan, t)
    return _report('deterministic', metrics.cgf, bound.value, instance,
                   ok=metrics.excess_probability <= epsilon + EQUALITY_TOL,
                   details={'excess': metrics.excess_probability, 'gamma': plan.gamma_mass,
                            'g': bound.g, 'correction': bound.correction, 't': t})


def check_prefix(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float, t: float,
                 n_random: int = 0, rng: Optional[np.random.Generator] = None,
                 plan: Optional[CoveringPlan] = None,
                 reference: Optional[Tuple[Bits, str]] = None,
                 instance: Optional[Mapping] = None) -> BoundReport:
    """
    Prefix code sandwich G <= CGF <= G + floor(log2 k*) + 1 with structural checks;
    random feasible prefix codes must also have CGF >= G.
    """
    plan = plan or greedy_cover(source, spec, D, epsilon)
    code = build_prefix_code(plan)
    metrics = code_metrics(code, source, spec, D, t)
    g_ref, how = reference or reference_g(source, spec, D, epsilon, order_for_t(t))
    upper = _g_at(plan, t) + math.floor(math.log2(plan.k_star)) + 1
    target = expected_excess(plan, 'prefix')

    random_slack = math.inf
    if n_random and rng is not None:
        p = aligned_probs(source, spec)
        batch = random_code_batch(p, spec.ball_matrix(D), epsilon, rng, n_random, prefix=True)
        random_slack = float((length_cgf_rows(p, batch.symbol_lengths(), t) - g_ref).min())

    structural = is_prefix_free(code.codewords()) and kraft_sum(code) <= 1.0 + EQUALITY_TOL
    ok = (structural
          and abs(metrics.excess_probability - target) <= EQUALITY_TOL
          and metrics.excess_probability <= epsilon + EQUALITY_TOL
          and g_ref <= metrics.cgf + INEQUALITY_TOL
          and random_slack >= -INEQUALITY_TOL)
    return _report('prefix', metrics.cgf, upper, instance, ok=ok,
                   details={'lower': g_ref, 'g_source': how, 'kraft': kraft_sum(code),
                            'prefix_free': structural, 'excess': metrics.excess_probability,
                            'random_codes': n_random, 'random_min_slack': random_slack,
                            'k_star': plan.k_star, 't': t})


def check_remark1(code: Code, source: FinitePmf, spec: DistortionSpec, D: float = 0.0,
                  instance: Optional[Mapping] = None) -> BoundReport:
    """
    CGF near t = 0 against the mean length, CGF at large t against the max length,
    and monotonicity in t. Mean and max come from the codeword strings.
    """
    law = length_law(code, source, spec, D, declared=False)
    live = law.weights > 0.0
    mean = math.fsum(law.weights * law.lengths)
    longest = float(law.lengths[live].max()) if live.any() else 0.0
    p_longest = math.fsum(law.weights[live & (law.lengths == longest)])
    t_high = max(64.0, math.ceil(20.0 * math.log2(1.0 / p_longest)))

    grid = (SMALL_T, 0.1, 0.5, 1.0, 2.0, 8.0, t_high)
    cgfs = [code_metrics(code, source, spec, D, t).cgf for t in grid]
    low_gap = abs(cgfs[0] - mean)
    high_gap = abs(cgfs[-1] - longest)
    monotone = all(b >= a - INEQUALITY_TOL for a, b in zip(cgfs, cgfs[1:]))
    return _report('cgf-limits', low_gap, LOW_T_TOL, instance, tol=0.0,
                   ok=high_gap <= HIGH_T_TOL + INEQUALITY_TOL and monotone,
                   details={'mean_length': mean, 'max_length': longest, 't_high': t_high,
                            'high_gap': high_gap, 'monotone': monotone,
                            'variant': code.variant})


def check_theorem1(source: FinitePmf, spec: DistortionSpec, D: float, t: float, code: Code,
                   instance: Optional[Mapping] = None) -> BoundReport:
    sides = theorem1_sides(source, spec, D, t, code)
    return _report('zero-excess-converse', sides.floor, sides.cgf, instance,
                   details={'variant': code.variant, 't': t})


def check_theorem2(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float, t: float,
                   code: Optional[Code] = None,
                   plan: Optional[CoveringPlan] = None,
                   reference: Optional[Tuple[Bits, str]] = None,
                   instance: Optional[Mapping] = None) -> BoundReport:
    """Constructed CGF between the converse floor and the greedy G."""
    plan = plan or greedy_cover(source, spec, D, epsilon)
    code = code or build_stochastic_code(plan)
    cgf = code_metrics(code, source, spec, D, t).cgf
    g_ref, how = reference or reference_g(source, spec, D, epsilon, order_for_t(t))
    g = _g_at(plan, t)
    lower = g_ref if g_ref is UNBOUNDED else g_ref - converse_slack(*spec.shape)
    return _report('one-shot-sandwich', lower, cgf, instance,
                   ok=cgf <= g + INEQUALITY_TOL,
                   details={'upper': g, 'g_source': how, 't': t})


def check_sandwich(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                   instance: Optional[Mapping] = None) -> BoundReport:
    values = sandwich(source, spec, D, epsilon)
    left_ok = float(values.r_d_epsilon) <= float(values.g_one) + RD_SANDWICH_TOL
    return _report('entropy-sandwich', values.g_one, values.h_d_epsilon, instance, ok=left_ok,
                   details={'r_d_epsilon': values.r_d_epsilon, 'g_source': values.g_source})


def check_exhaustive_converse(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                              t: float, max_index: int = EXHAUSTIVE_MAX_INDEX,
                              reference: Optional[Tuple[Bits, str]] = None,
                              instance: Optional[Mapping] = None) -> BoundReport:
    """
    Every feasible deterministic encoder combined with every injective choice of
    codeword indices 1..max_index for the used outputs.

    Raises:
        PreconditionError: |X| > 3 or |Y| > 2.
    """
    n_x, n_y = spec.shape
    if n_x > 3 or n_y > 2:
        raise PreconditionError(f"exhaustive converse needs |X| <= 3 and |Y| <= 2, got {n_x}x{n_y}")
    p = aligned_probs(source, spec)
    bad = (~spec.ball_matrix(D)).astype(float)
    g, how = reference or reference_g(source, spec, D, epsilon, order_for_t(t))
    floor = g - converse_slack(n_x, n_y)
    kraft_bound = math.log2(1 + min(n_x, n_y))

    best = math.inf
    codes = 0
    kraft_ok = True
    for maps in enumerate_maps(n_x, n_y, EXACT_G_BUDGET):
        for phi in maps[map_excess(p, bad, maps) <= epsilon + NORMALIZATION_TOL]:
            used = sorted(set(int(j) for j in phi))
            for indices in itertools.permutations(range(1, max_index + 1), len(used)):
                length_of = {y: int(i).bit_length() - 1 for y, i in zip(used, indices)}
                lengths = [length_of[int(j)] for j in phi]
                best = min(best, length_cgf(p, lengths, t))
                kraft_ok &= math.fsum(2.0 ** -length_of[y] for y in used) <= kraft_bound + INEQUALITY_TOL
                codes += 1
    if codes == 0:
        best = floor
    return _report('exhaustive-converse', floor, best, instance, ok=kraft_ok,
                   details={'codes': codes, 'g_source': how, 't': t})


# === Instance families ===

@dataclass(frozen=True, eq=False)
class Instance:
    label: str
    family: str
    source: FinitePmf
    spec: DistortionSpec
    D: float
    epsilon: float

    @property
    def laminar(self) -> bool:
        return is_laminar(self.spec, self.D)

    def describe(self, **extra) -> dict:
        info = {'label': self.label, 'family': self.family, 'D': self.D,
                'epsilon': self.epsilon, 'size': list(self.spec.shape)}
        info.update(extra)
        return info


def running_example() -> Tuple[FinitePmf, DistortionSpec]:
    """Three symbols a, b, c with P = (0.5, 0.3, 0.2) under Hamming distortion."""
    return FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2)), DistortionSpec.hamming('abc')


def overlap_counterexample() -> Tuple[FinitePmf, DistortionSpec]:
    """
    Six equiprobable symbols with balls {1,2,3,4}, {1,2,5}, {3,4,6} at D = 0.

    Greedy covers with (4/6, 1/6, 1/6) while the two smaller balls give (1/2, 1/2).
    """
    balls = {'A': '1234', 'B': '125', 'C': '346'}
    xs = tuple('123456')
    d = np.array([[0.0 if x in balls[y] else 1.0 for y in 'ABC'] for x in xs])
    return FinitePmf.uniform(xs), DistortionSpec(xs, tuple('ABC'), d)


def random_ultrametric(size: int, rng: np.random.Generator) -> DistortionSpec:
    """Ultrametric distortion on X = Y: every family of D-balls is nested or disjoint."""
    labels = tuple(f'u{i}' for i in range(size))
    d = np.zeros((size, size))
    clusters = [[i] for i in range(size)]
    for height in np.sort(rng.random(size - 1)):
        i, j = sorted(rng.choice(len(clusters), size=2, replace=False))
        for a in clusters[i]:
            for b in clusters[j]:
                d[a, b] = d[b, a] = height
        clusters[i] = clusters[i] + clusters.pop(j)
    return DistortionSpec(labels, labels, d)


def _random_level(p: np.ndarray, spec: DistortionSpec, rng: np.random.Generator) -> Tuple[float, float]:
    D = float(rng.random())
    source = FinitePmf.from_array(spec.source_alphabet, p)
    if uncovered_mass(source, spec, D) > 0.9:
        D = float(spec.d.min(axis=1).max())
    u = uncovered_mass(source, spec, D)
    return D, float(u + (1.0 - u) * rng.uniform(0.0, 0.5))


# === Suite configuration ===

FAMILY_KINDS = ('running_example', 'random_general', 'random_laminar', 'binary_product',
                'overlap_counterexample')


@dataclass(frozen=True)
class FamilyConfig:
    kind: str
    count: int = 1
    max_size: int = 4
    p: float = 0.2
    n: Tuple[int, ...] = (1,)
    D: Optional[Tuple[float, ...]] = None
    epsilon: Optional[Tuple[float, ...]] = None
    claims: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class SuiteConfig:
    families: Tuple[FamilyConfig, ...]
    t_grid: Tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 8.0)
    seed: int = 0
    random_kernels: int = 200
    random_codes: int = 50
    random_prefix_codes: int = 50
    claims: Tuple[str, ...] = tuple(CLAIMS)


SCREENING_CLAIMS = [claim for claim in CLAIMS if claim != 'entropy-sandwich']

DEFAULT_SUITE = {
    'seed': 20240517,
    't_grid': [0.1, 0.5, 1.0, 2.0, 8.0],
    'random_kernels': 10_000,
    'random_codes': 40,
    'random_prefix_codes': 40,
    'families': [
        {'kind': 'running_example', 'D': [0.0], 'epsilon': [0.0, 0.25, 0.3]},
        {'kind': 'random_laminar', 'count': 200, 'max_size': 5, 'claims': SCREENING_CLAIMS},
        {'kind': 'random_general', 'count': 300, 'max_size': 4, 'claims': SCREENING_CLAIMS},
        {'kind': 'random_general', 'count': 24, 'max_size': 4, 'claims': ['entropy-sandwich']},
        {'kind': 'binary_product', 'p': 0.2, 'n': [1, 2], 'D': [0.1], 'epsilon': [0.0, 0.5]},
    ],
}


def _number(value, location: str, lo: float = -math.inf, hi: float = math.inf,
            integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", location)
    if integer and int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", location)
    if not (lo <= value <= hi) or (isinstance(value, float) and math.isnan(value)):
        raise ConfigError(f"{value!r} outside [{lo}, {hi}]", location)
    return int(value) if integer else float(value)


def _number_list(values, location: str, **bounds) -> tuple:
    if not isinstance(values, list) or not values:
        raise ConfigError("expected a non-empty list", location)
    return tuple(_number(v, f"{location}[{i}]", **bounds) for i, v in enumerate(values))


def _claim_list(claims, location: str) -> Tuple[str, ...]:
    if not isinstance(claims, list) or any(c not in CLAIMS for c in claims):
        raise ConfigError(f"claims must be a list drawn from {sorted(CLAIMS)}", location)
    return tuple(claims)


def parse_family(data, location: str) -> FamilyConfig:
    if not isinstance(data, dict):
        raise ConfigError("expected an object", location)
    kind = data.get('kind')
    if kind not in FAMILY_KINDS:
        raise ConfigError(f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}",
                          f"{location}.kind")
    unknown = set(data) - {'kind', 'count', 'max_size', 'p', 'n', 'D', 'epsilon', 'claims'}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", location)
    kwargs = {'kind': kind}
    if 'count' in data:
        kwargs['count'] = _number(data['count'], f"{location}.count", 0, 10 ** 6, integer=True)
    if 'max_size' in data:
        kwargs['max_size'] = _number(data['max_size'], f"{location}.max_size", 2, 16, integer=True)
    if 'p' in data:
        kwargs['p'] = _number(data['p'], f"{location}.p", 0.0, 1.0)
    if 'n' in data:
        kwargs['n'] = _number_list(data['n'], f"{location}.n", lo=1, hi=64, integer=True)
    if 'D' in data:
        kwargs['D'] = _number_list(data['D'], f"{location}.D", lo=0.0)
    if 'epsilon' in data:
        eps = _number_list(data['epsilon'], f"{location}.epsilon", lo=0.0, hi=1.0)
        if any(e >= 1.0 for e in eps):
            raise ConfigError("epsilon must be < 1", f"{location}.epsilon")
        kwargs['epsilon'] = eps
    if 'claims' in data:
        kwargs['claims'] = _claim_list(data['claims'], f"{location}.claims")
    return FamilyConfig(**kwargs)


def parse_suite_config(data) -> SuiteConfig:
    """
    Build a SuiteConfig from decoded JSON.

    Raises:
        ConfigError: with the location of the offending field, e.g. ``families[2].epsilon``.
    """
    if not isinstance(data, dict):
        raise ConfigError("suite configuration must be an object", '$')
    unknown = set(data) - {'seed', 't_grid', 'random_kernels', 'random_codes',
                           'random_prefix_codes', 'families', 'claims'}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", '$')
    families = data.get('families', [])
    if not isinstance(families, list):
        raise ConfigError("expected a list", 'families')
    kwargs = {'families': tuple(parse_family(f, f"families[{i}]") for i, f in enumerate(families))}
    if 'seed' in data:
        kwargs['seed'] = _number(data['seed'], 'seed', 0, 2 ** 63 - 1, integer=True)
    if 't_grid' in data:
        t_grid = _number_list(data['t_grid'], 't_grid', lo=0.0)
        if any(t <= 0.0 for t in t_grid):
            raise ConfigError("t values must be positive", 't_grid')
        kwargs['t_grid'] = t_grid
    for key in ('random_kernels', 'random_codes', 'random_prefix_codes'):
        if key in data:
            kwargs[key] = _number(data[key], key, 0, 10 ** 6, integer=True)
    if 'claims' in data:
        kwargs['claims'] = _claim_list(data['claims'], 'claims')
    return SuiteConfig(**kwargs)


def load_suite_config(path) -> SuiteConfig:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None
    except OSError as exc:
        raise ConfigError(exc.strerror or str(exc), str(path)) from None
    return parse_suite_config(data)


def default_suite_config() -> SuiteConfig:
    return parse_suite_config(DEFAULT_SUITE)


def build_instances(family: FamilyConfig, index: int, seed: int) -> List[Instance]:
    """Materialize one configured family."""
    rng = check_rng(seed, f"families[{index}]")
    kind = family.kind
    out = []
    if kind in ('running_example', 'overlap_counterexample'):
        source, spec = running_example() if kind == 'running_example' else overlap_counterexample()
        for D in family.D or (0.0,):
            for eps in family.epsilon or ((0.0, 0.25) if kind == 'running_example' else (0.0,)):
                out.append(Instance(f"{kind}/D={D}/eps={eps}", kind, source, spec, D, eps))
    elif kind == 'binary_product':
        base = FinitePmf(('0', '1'), (1.0 - family.p, family.p))
        spec = DistortionSpec.hamming('01')
        for n in family.n:
            inst = build_product(base, spec, n)
            for D in family.D or (0.1,):
                for eps in family.epsilon or (0.0,):
                    out.append(Instance(f"binary/p={family.p}/n={n}/D={D}/eps={eps}", kind,
                                        inst.expanded_source, inst.expanded_spec, n * D, eps))
    else:
        for k in range(family.count):
            if kind == 'random_laminar':
                spec = random_ultrametric(int(rng.integers(2, family.max_size + 1)), rng)
            else:
                n_x = int(rng.integers(2, family.max_size + 1))
                n_y = int(rng.integers(2, family.max_size + 1))
                spec = DistortionSpec(tuple(f'x{i}' for i in range(n_x)),
                                      tuple(f'y{j}' for j in range(n_y)), rng.random((n_x, n_y)))
            p = rng.dirichlet(np.ones(spec.shape[0]))
            p = p / p.sum()
            D, eps = _random_level(p, spec, rng)
            if family.D is not None:
                D = family.D[k % len(family.D)]
            if family.epsilon is not None:
                eps = family.epsilon[k % len(family.epsilon)]
            out.append(Instance(f"{kind}/{index}/{k}", kind,
                                FinitePmf.from_array(spec.source_alphabet, p), spec, D, eps))
    return out


# === Suite runner ===

class Task(NamedTuple):
    claim: str
    instance: Instance
    t: Optional[float]


def _plan_tasks(instance: Instance, config: SuiteConfig,
                family_claims: Optional[Tuple[str, ...]] = None) -> List[Task]:
    claims = set(config.claims)
    if family_claims is not None:
        claims &= set(family_claims)
    n_x, n_y = instance.spec.shape
    tasks = []
    for t in config.t_grid:
        for claim in ('achievability', 'length-chain', 'deterministic', 'prefix', 'converse',
                      'one-shot-sandwich'):
            tasks.append(Task(claim, instance, t))
        if n_x <= 3 and n_y <= 2:
            tasks.append(Task('exhaustive-converse', instance, t))
        if instance.epsilon == 0.0:
            tasks.append(Task('zero-excess-converse', instance, t))
    tasks.append(Task('cgf-limits', instance, None))
    if instance.laminar:
        tasks.append(Task('majorization', instance, None))
    if map_count(n_x, n_y) <= min(BRUTEFORCE_BUDGET, EXACT_G_BUDGET):
        tasks.append(Task('entropy-sandwich', instance, None))
    return [task for task in tasks if task.claim in claims]


class _InstanceCache:
    """Greedy plan and reference G of one instance, shared by all of its tasks."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self._plan: Optional[CoveringPlan] = None
        self._reference: Dict[float, Tuple[Bits, str]] = {}

    @property
    def plan(self) -> CoveringPlan:
        if self._plan is None:
            inst = self.instance
            self._plan = greedy_cover(inst.source, inst.spec, inst.D, inst.epsilon)
        return self._plan

    def reference(self, t: float) -> Tuple[Bits, str]:
        if t not in self._reference:
            inst = self.instance
            self._reference[t] = reference_g(inst.source, inst.spec, inst.D, inst.epsilon,
                                             order_for_t(t))
        return self._reference[t]


def _run_task(task: Task, config: SuiteConfig, cache: _InstanceCache) -> List[BoundReport]:
    inst, t = task.instance, task.t
    src, spec, D, eps = inst.source, inst.spec, inst.D, inst.epsilon
    check_id = f"{inst.label}/{task.claim}/{t}"
    where = inst.describe(t=t) if t is not None else inst.describe()
    claim = task.claim
    if claim == 'achievability':
        return [check_achievability(src, spec, D, eps, t, plan=cache.plan, instance=where)]
    if claim == 'length-chain':
        return [check_lemma3(cache.plan, t, instance=where)]
    if claim == 'deterministic':
        return [check_deterministic(src, spec, D, eps, t, plan=cache.plan, instance=where)]
    if claim == 'prefix':
        return [check_prefix(src, spec, D, eps, t, config.random_prefix_codes,
                             check_rng(config.seed, check_id), plan=cache.plan,
                             reference=cache.reference(t), instance=where)]
    if claim == 'converse':
        code = build_stochastic_code(cache.plan)
        return [
            check_converse(code, src, spec, D, eps, t, reference=cache.reference(t),
                           instance=where),
            check_converse_random(src, spec, D, eps, t, config.random_codes,
                                  check_rng(config.seed, check_id),
                                  reference=cache.reference(t), instance=where),
        ]
    if claim == 'one-shot-sandwich':
        return [check_theorem2(src, spec, D, eps, t, plan=cache.plan,
                               reference=cache.reference(t), instance=where)]
    if claim == 'exhaustive-converse':
        return [check_exhaustive_converse(src, spec, D, eps, t, reference=cache.reference(t),
                                          instance=where)]
    if claim == 'zero-excess-converse':
        code = build_stochastic_code(cache.plan)
        try:
            return [check_theorem1(src, spec, D, t, code, instance=where)]
        except (DomainError, ConvergenceError) as exc:
            logger.warning("%s skipped: %s", check_id, exc)
            return []
    if claim == 'cgf-limits':
        return [check_remark1(build(cache.plan), src, spec, D, instance=where)
                for build in (build_stochastic_code, build_deterministic_code, build_prefix_code)]
    if claim == 'majorization':
        return [check_majorization(src, spec, D, eps, config.random_kernels,
                                   check_rng(config.seed, check_id), plan=cache.plan,
                                   instance=where)]
    if claim == 'entropy-sandwich':
        try:
            return [check_sandwich(src, spec, D, eps, instance=where)]
        except (DomainError, ConvergenceError) as exc:
            logger.warning("%s skipped: %s", check_id, exc)
            return []
    raise ConfigError(f"unknown claim {claim!r}", 'claims')


def _run_instance(instance: Instance, family_claims: Optional[Tuple[str, ...]],
                  config: SuiteConfig) -> List[BoundReport]:
    cache = _InstanceCache(instance)
    return [report for task in _plan_tasks(instance, config, family_claims)
            for report in _run_task(task, config, cache)]


def negative_control_reports() -> List[BoundReport]:
    """Checks run on deliberately corrupted plans and codes; every report should fail."""
    source, spec = running_example()
    eps_plan = greedy_cover(source, spec, 0.0, 0.25)
    exact_plan = greedy_cover(source, spec, 0.0, 0.0)
    truncated = truncate_plan(eps_plan)
    tampered = tamper_lengths(build_stochastic_code(exact_plan))

    def where(control: str, eps: float) -> dict:
        return {'label': f"negative-control/{control}", 'family': 'negative_control',
                'D': 0.0, 'epsilon': eps, 't': 1.0}

    reports = [
        check_achievability(source, spec, 0.0, 0.25, 1.0, plan=truncated,
                            instance=where('truncated-plan', 0.25)),
        check_deterministic(source, spec, 0.0, 0.25, 1.0, plan=truncated,
                            instance=where('truncated-plan', 0.25)),
        check_prefix(source, spec, 0.0, 0.25, 1.0, plan=truncated,
                     instance=where('truncated-plan', 0.25)),
        check_lemma3(tamper_beta(eps_plan), 1.0, instance=where('tampered-beta', 0.25)),
        check_converse(tampered, source, spec, 0.0, 0.0, 1.0,
                       instance=where('tampered-lengths', 0.0)),
        check_remark1(tampered, source, spec, 0.0, instance=where('tampered-lengths', 0.0)),
        check_theorem1(source, spec, 0.0, 1.0, tampered, instance=where('tampered-lengths', 0.0)),
        check_theorem2(source, spec, 0.0, 0.0, 1.0, code=tampered,
                       instance=where('tampered-lengths', 0.0)),
    ]
    overlap_source, overlap_spec = overlap_counterexample()
    reports.append(check_majorization(overlap_source, overlap_spec, 0.0, 0.0, 0,
                                      check_rng(0, 'negative-control'),
                                      instance={'label': 'negative-control/overlapping-balls',
                                                'family': 'negative_control',
                                                'D': 0.0, 'epsilon': 0.0}))
    return reports


def run_suite(config: SuiteConfig, workers: int = 1,
              negative_control: bool = False) -> List[BoundReport]:
    """
    Run every configured claim over every configured instance.

    Instances are the unit of work; reports come back in instance order and,
    within an instance, in task order whatever the worker count.
    """
    pairs = [(inst, fam.claims) for i, fam in enumerate(config.families)
             for inst in build_instances(fam, i, config.seed)]
    logger.info("suite: %d instances over %d families", len(pairs), len(config.families))
    instances = [inst for inst, _ in pairs]
    family_claims = [claims for _, claims in pairs]
    if workers <= 1 or len(pairs) <= 1:
        batches = [_run_instance(inst, claims, config) for inst, claims in pairs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_instance, instances, family_claims,
                                    [config] * len(pairs),
                                    chunksize=max(1, len(pairs) // (4 * workers))))
    reports = [r for batch in batches for r in batch]
    logger.info("suite: %d reports", len(reports))
    if negative_control:
        reports.extend(negative_control_reports())
    return reports


def summarize(reports: Sequence[BoundReport]) -> dict:
    failed = [r for r in reports if not r.verdict]
    return {
        'summary': True,
        'total': len(reports),
        'failed': len(failed),
        'claims_failed': sorted({r.claim for r in failed}),
    }


def write_report(reports: Sequence[BoundReport], stream: TextIO) -> dict:
    """Write one JSON line per report plus the summary row; returns the summary."""
    for report in reports:
        stream.write(json.dumps(report.to_json(), sort_keys=True) + '\n')
    summary = summarize(reports)
    stream.write(json.dumps(summary, sort_keys=True) + '\n')
    return summary


if __name__ == '__main__':
    for report in negative_control_reports():
        print(f"{report.claim:22s} verdict={report.verdict} lhs={format_bits(report.lhs)} "
              f"rhs={format_bits(report.rhs)}")
