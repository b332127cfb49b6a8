"""
Rate-Distortion Quantities
===========================
Rate-distortion function by alternating minimization at a fixed slope, the
D-tilted information and its Renyi moment, the rate-dispersion, the
excess-constrained quantities R_{D,eps} and H_{D,eps}, and the second-order
Gaussian approximation.

Slopes are base-2: the kernel at slope s is P(y|x) proportional to q(y) 2^(-s d(x,y)),
so the converged slope is lambda* = -R'(D) with R in bits.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtri, rel_entr

from .vl_codec import Code, code_metrics
from .vl_covering import (
    DistortionSpec,
    aligned_probs,
    converse_slack,
    enumerate_maps,
    feasibility,
    g_quantity,
    map_excess,
    map_marginals,
    order_for_t,
    reference_g,
    uncovered_mass,
)
from .vl_errors import (
    ConvergenceError,
    DomainError,
    InvalidParameterError,
    PreconditionError,
)
from .vl_probability import (
    EQUALITY_TOL,
    INEQUALITY_TOL,
    LN2,
    NORMALIZATION_TOL,
    THRESHOLD_SLACK,
    UNBOUNDED,
    Bits,
    FinitePmf,
    _check_alpha,
    format_bits,
    is_shannon_order,
    renyi_rows,
)

logger = logging.getLogger(__name__)

RD_TOL = 1e-12
RD_MAX_ITER = 100_000
DISTORTION_TOL = 1e-9
BRUTEFORCE_BUDGET = 10 ** 7
SLOPE_CEILING = 2.0 ** 40
SLOPE_FLOOR = 2.0 ** -40
WARM_START_MIX = 1e-3
IDENTITY_TOL = 1e-6


# === Alternating minimization ===

class RdPoint(NamedTuple):
    R: float
    D: float
    kernel: np.ndarray
    output_marginal: np.ndarray
    slope: float
    iterations: int
    converged: bool


def distortion_range(source: FinitePmf, spec: DistortionSpec) -> Tuple[float, float]:
    """(D_min, D_max) = (E[min_y d(X,y)], min_y E[d(X,y)])."""
    p = aligned_probs(source, spec)
    return float(p @ spec.d.min(axis=1)), float((p @ spec.d).min())


def _mutual_information(p: np.ndarray, kernel: np.ndarray, q: np.ndarray) -> float:
    live = p > 0.0
    return float(p[live] @ rel_entr(kernel[live], q[None, :]).sum(axis=1) / LN2)


def _normalize_rows(log_kernel: np.ndarray) -> np.ndarray:
    return log_kernel - logsumexp(log_kernel, axis=1, keepdims=True)


def _zero_rate_point(p: np.ndarray, d: np.ndarray) -> RdPoint:
    expected = p @ d
    j = int(np.argmin(expected))
    q = np.zeros(d.shape[1])
    q[j] = 1.0
    kernel = np.tile(q, (d.shape[0], 1))
    return RdPoint(0.0, float(expected[j]), kernel, q, 0.0, 0, True)


def rd_fixed_slope(source: FinitePmf, spec: DistortionSpec, slope: float,
                   init: Optional[np.ndarray] = None) -> RdPoint:
    """
    Point of the rate-distortion curve where the tangent has slope -`slope`.

    Args:
        source: Source distribution.
        spec: Distortion measure.
        slope: Base-2 slope >= 0. 0 gives the zero-rate point; ``math.inf``
               restricts every row to its minimal distortions (the D_min end).
        init: Starting output marginal (uniform when omitted).

    Returns:
        RdPoint. ``converged`` is False when the iteration cap was hit.
    """
    if math.isnan(slope) or slope < 0.0:
        raise InvalidParameterError(f"slope must be >= 0, got {slope}")
    p = aligned_probs(source, spec)
    d = spec.d
    if slope == 0.0:
        return _zero_rate_point(p, d)

    n_y = d.shape[1]
    q = np.full(n_y, 1.0 / n_y) if init is None else np.asarray(init, dtype=float)
    with np.errstate(divide='ignore'):
        log_q = np.log(q / q.sum())
    if math.isinf(slope):
        allowed = d <= d.min(axis=1, keepdims=True) + THRESHOLD_SLACK
        penalty = np.where(allowed, 0.0, -np.inf)
    else:
        penalty = -slope * LN2 * d

    live = p > 0.0
    p_live, d_live, pen_live = p[live], d[live], penalty[live]
    log_p = np.log(p_live)
    R_prev = D_prev = math.inf
    converged = False
    for iteration in range(1, RD_MAX_ITER + 1):
        log_kernel = _normalize_rows(log_q[None, :] + pen_live)
        with np.errstate(divide='ignore'):
            log_q = logsumexp(log_p[:, None] + log_kernel, axis=0)
        kernel = np.exp(log_kernel)
        q = np.exp(log_q)
        R = _mutual_information(p_live, kernel, q)
        D = float(p_live @ (kernel * d_live).sum(axis=1))
        if abs(R - R_prev) < RD_TOL and abs(D - D_prev) < RD_TOL:
            converged = True
            break
        R_prev, D_prev = R, D
    if not converged:
        logger.warning("alternating minimization hit %d iterations at slope %g", RD_MAX_ITER, slope)
    return RdPoint(max(R, 0.0), D, _full_kernel(log_q, penalty), q / q.sum(),
                   float(slope), iteration, converged)


def _full_kernel(log_q: np.ndarray, penalty: np.ndarray) -> np.ndarray:
    """Tilted kernel on every row, zero-probability symbols included."""
    logits = log_q[None, :] + penalty
    dead = ~np.isfinite(logits).any(axis=1)
    logits[dead] = np.where(np.isfinite(penalty[dead]), 0.0, -np.inf)
    return np.exp(_normalize_rows(logits))


# === Solutions at a prescribed distortion ===

@dataclass(frozen=True, eq=False)
class RdSolution:
    """Optimal test channel at distortion D with its tilted-information statistics."""

    source_alphabet: Tuple[str, ...]
    D: float
    R: float
    kernel: np.ndarray
    output_marginal: FinitePmf
    lambda_star: float
    tilted_info: Tuple[float, ...]
    V: float
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        if not math.isfinite(self.R) or self.R < -EQUALITY_TOL:
            raise DomainError(f"rate {self.R} is not a non-negative real")
        if not math.isfinite(self.V) or self.V < -EQUALITY_TOL:
            raise DomainError(f"dispersion {self.V} is not a non-negative real")
        if len(self.tilted_info) != len(self.source_alphabet):
            raise DomainError("one tilted-information value per source symbol expected")

    def to_json(self) -> dict:
        return {
            'D': self.D,
            'R': self.R,
            'lambda_star': format_bits(self.lambda_star) if math.isinf(self.lambda_star)
            else self.lambda_star,
            'V': self.V,
            'source_alphabet': list(self.source_alphabet),
            'tilted_info': list(self.tilted_info),
            'output_marginal': self.output_marginal.to_json(),
            'kernel': self.kernel.tolist(),
            'iterations': self.iterations,
            'converged': self.converged,
        }


def _dispersion(p: np.ndarray, info: np.ndarray) -> Tuple[float, float]:
    live = p > 0.0
    mean = float(p[live] @ info[live])
    return mean, float(p[live] @ (info[live] - mean) ** 2)


def _solution(source: FinitePmf, spec: DistortionSpec, D: float, point: RdPoint,
              info: np.ndarray) -> RdSolution:
    p = aligned_probs(source, spec)
    mean, V = _dispersion(p, info)
    if abs(mean - point.R) > IDENTITY_TOL:
        logger.warning("E[tilted information] = %.12g differs from R = %.12g", mean, point.R)
    return RdSolution(
        source_alphabet=spec.source_alphabet,
        D=float(D),
        R=point.R,
        kernel=point.kernel,
        output_marginal=FinitePmf.from_array(spec.repro_alphabet, point.output_marginal),
        lambda_star=point.slope,
        tilted_info=tuple(float(v) for v in info),
        V=V,
        iterations=point.iterations,
        converged=point.converged,
    )


def _tilted_info(spec: DistortionSpec, q: np.ndarray, slope: float, D: float) -> np.ndarray:
    """-log2 E_q[2^(slope*D - slope*d(x, Y))] for every x."""
    with np.errstate(divide='ignore'):
        log_q = np.log(q)
    return -slope * D - logsumexp(log_q[None, :] - slope * LN2 * spec.d, axis=1) / LN2


def _positive_root(f: Callable[[float], float]) -> float:
    """Positive zero of a convex f with f(0) = 0 and f'(0) <= 0; 0 when f > 0 right away."""
    lo = hi = 1.0
    if f(hi) > 0.0:
        while f(lo) >= 0.0:
            lo /= 2.0
            if lo < SLOPE_FLOOR:
                return 0.0
    else:
        while f(hi) <= 0.0:
            hi *= 2.0
            if hi > SLOPE_CEILING:
                return math.inf
        lo = hi / 2.0
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def zero_rate_slope(source: FinitePmf, spec: DistortionSpec) -> float:
    """
    Largest slope at which the zero-rate point is still optimal.

    With y0 minimizing E[d(X, y)], the point stays optimal while
    sum_x p(x) 2^(-slope (d(x, y) - d(x, y0))) <= 1 for every y.
    ``math.inf`` when no output ever improves on y0.
    """
    p = aligned_probs(source, spec)
    live = p > 0.0
    j = int(np.argmin(p @ spec.d))
    delta = spec.d[live] - spec.d[live][:, [j]]
    log_p = np.log(p[live])
    floor = math.inf
    for y in range(delta.shape[1]):
        if y == j or (delta[:, y] >= -THRESHOLD_SLACK).all():
            continue
        col = delta[:, y]
        floor = min(floor, _positive_root(lambda s, col=col: float(logsumexp(log_p - s * LN2 * col))))
    return floor


def rd_at_distortion(source: FinitePmf, spec: DistortionSpec, D: float) -> RdSolution:
    """
    Rate-distortion solution at an interior distortion level.

    The slope is found by Brent's method on the achieved distortion, which is
    non-increasing in the slope. The search starts at `zero_rate_slope`, below
    which the zero-rate point is exact, and every solve is warm-started from
    the nearest slope already solved.

    Raises:
        DomainError: D outside (D_min, D_max).
        ConvergenceError: the achieved distortion misses D by more than DISTORTION_TOL.
    """
    d_min, d_max = distortion_range(source, spec)
    if not (d_min + DISTORTION_TOL < D < d_max - DISTORTION_TOL):
        raise DomainError(f"D = {D} lies outside ({d_min:.12g}, {d_max:.12g})")

    floor = zero_rate_slope(source, spec)
    if math.isinf(floor):
        raise DomainError(f"no finite slope reaches D = {D}")
    zero = _zero_rate_point(aligned_probs(source, spec), spec.d)
    n_y = spec.d.shape[1]
    cache = {}

    def solve(slope: float) -> RdPoint:
        if slope <= floor:
            return zero
        if slope not in cache:
            init = None
            if cache:
                near = cache[min(cache, key=lambda s: abs(s - slope))].output_marginal
                init = (1.0 - WARM_START_MIX) * near + WARM_START_MIX / n_y
            cache[slope] = rd_fixed_slope(source, spec, slope, init)
        return cache[slope]

    def gap(slope: float) -> float:
        return solve(slope).D - D

    lo, hi = floor, max(2.0 * floor, floor + 1.0)
    while gap(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > SLOPE_CEILING:
            raise DomainError(f"no finite slope reaches D = {D}")
    slope = brentq(gap, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=500)
    point = solve(slope)
    logger.debug("slope search: lambda*=%.12g D=%.12g R=%.12g (%d solves from %.6g)",
                 slope, point.D, point.R, len(cache), floor)
    if abs(point.D - D) > DISTORTION_TOL:
        raise ConvergenceError(
            f"achieved distortion {point.D:.12g} misses D = {D}",
            iterations=point.iterations, last_change=abs(point.D - D),
        )
    return _solution(source, spec, D, point, _tilted_info(spec, point.output_marginal, slope, D))


def rd_solution(source: FinitePmf, spec: DistortionSpec, D: float) -> RdSolution:
    """
    Rate-distortion solution on the closed range.

    D >= D_max gives the zero-rate solution (tilted information 0). D = D_min is
    accepted when every row attains the same minimal distortion D; the slope is
    then infinite and j(x, D) = -log2 P_Y*({y : d(x, y) = D}).

    Raises:
        DomainError: D < D_min, or D = D_min with unequal row minima.
    """
    d_min, d_max = distortion_range(source, spec)
    p = aligned_probs(source, spec)
    if D >= d_max - DISTORTION_TOL:
        point = _zero_rate_point(p, spec.d)
        return _solution(source, spec, D, point, np.zeros(len(p)))
    if D <= d_min + DISTORTION_TOL:
        row_min = spec.d.min(axis=1)
        if D < d_min - DISTORTION_TOL or np.ptp(row_min) > THRESHOLD_SLACK:
            raise DomainError(f"D = {D} is not reachable at a finite rate")
        point = rd_fixed_slope(source, spec, math.inf)
        at_min = spec.d <= row_min[:, None] + THRESHOLD_SLACK
        with np.errstate(divide='ignore'):
            info = -np.log2(at_min.astype(float) @ point.output_marginal)
        return _solution(source, spec, D, point, info)
    return rd_at_distortion(source, spec, D)


def d_tilted_renyi_entropy(rd: RdSolution, source: FinitePmf, alpha: float) -> float:
    """
    (1/(1-alpha)) log2 E[2^((1-alpha) j(X, D))] under `source`.

    Within ALPHA_ONE_GUARD of 1 the limit R(D) is returned.
    """
    alpha = _check_alpha(alpha)
    if is_shannon_order(alpha):
        return rd.R
    p = np.array([source.prob(x) for x in rd.source_alphabet])
    info = np.asarray(rd.tilted_info)
    live = p > 0.0
    scale = (1.0 - alpha) * LN2
    return float(logsumexp(scale * info[live], b=p[live]) / scale)


# === Excess-constrained quantities ===

def r_d_epsilon(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> Bits:
    """
    min I(X;Y) subject to P[d(X,Y) > D] <= epsilon.

    Solved as the rate-distortion function of the excess indicator
    1{d(x,y) > D} at level epsilon. UNBOUNDED when infeasible.
    """
    if not feasibility(source, spec, D, epsilon):
        return UNBOUNDED
    indicator = spec.indicator(D)
    floor, ceiling = distortion_range(source, indicator)
    if epsilon >= ceiling - DISTORTION_TOL:
        return 0.0
    if epsilon <= floor + DISTORTION_TOL:
        return rd_fixed_slope(source, indicator, math.inf).R
    return rd_at_distortion(source, indicator, epsilon).R


def h_d_epsilon_bruteforce(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                           budget: int = BRUTEFORCE_BUDGET) -> Bits:
    """
    min H(phi(X)) over deterministic maps phi with P[d(X, phi(X)) > D] <= epsilon.

    Raises:
        InstanceTooLargeError: |Y|^|X| exceeds `budget`; use the G-based bounds instead.
    """
    if not feasibility(source, spec, D, epsilon):
        return UNBOUNDED
    p = aligned_probs(source, spec)
    bad = (~spec.ball_matrix(D)).astype(float)
    n_x, n_y = bad.shape
    best = math.inf
    for maps in enumerate_maps(n_x, n_y, budget):
        ok = map_excess(p, bad, maps) <= epsilon + NORMALIZATION_TOL
        if ok.any():
            best = min(best, float(renyi_rows(map_marginals(p, maps[ok], n_y), 1.0).min()))
    return best


def min_output_entropy(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> Bits:
    """Shannon entropy of the greedy output distribution, i.e. G_1."""
    return g_quantity(source, spec, D, epsilon, 1.0)


class EntropySandwich(NamedTuple):
    r_d_epsilon: Bits
    g_one: Bits
    h_d_epsilon: Bits
    g_source: str


def sandwich(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> EntropySandwich:
    """R_{D,eps} <= G_1 <= H_{D,eps} on one instance."""
    g_one, how = reference_g(source, spec, D, epsilon, 1.0)
    return EntropySandwich(
        r_d_epsilon(source, spec, D, epsilon),
        g_one,
        h_d_epsilon_bruteforce(source, spec, D, epsilon),
        how,
    )


# === Gaussian approximation ===

class GaussianApprox(NamedTuple):
    n: int
    epsilon: float
    value: float


def q_inv(epsilon: float) -> float:
    """Inverse of the standard normal tail Q; Q^-1(0) = +inf."""
    if epsilon == 0.0:
        return math.inf
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must lie in [0, 1), got {epsilon}")
    return float(-ndtri(epsilon))


def gaussian_approx(rd: RdSolution, n: int, epsilon: float) -> GaussianApprox:
    """
    (1 - eps) R(D) - sqrt(V / (2 pi n)) exp(-Q^-1(eps)^2 / 2), bits per symbol.

    The O(log n / n) remainder is not included. At eps = 0 the dispersion term
    vanishes and the value is R(D).
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n}")
    if epsilon == 0.0:
        return GaussianApprox(int(n), 0.0, rd.R)
    q = q_inv(epsilon)
    value = (1.0 - epsilon) * rd.R - math.sqrt(rd.V / (2.0 * math.pi * n)) * math.exp(-q * q / 2.0)
    return GaussianApprox(int(n), float(epsilon), value)


# === Zero-excess converse ===

class ConverseSides(NamedTuple):
    cgf: float
    floor: float


def theorem1_sides(source: FinitePmf, spec: DistortionSpec, D: float, t: float,
                   code: Code) -> ConverseSides:
    """
    The code's CGF and the floor H_{1/(1+t)}(X, D) - log2 log2(1 + min(|X|, |Y|)).

    Raises:
        PreconditionError: the code exceeds distortion D with positive probability.
    """
    metrics = code_metrics(code, source, spec, D, t)
    if metrics.excess_probability > EQUALITY_TOL:
        raise PreconditionError(
            f"zero-excess converse needs excess 0, code has {metrics.excess_probability:.12g}"
        )
    tilted = d_tilted_renyi_entropy(rd_solution(source, spec, D), source, order_for_t(t))
    return ConverseSides(metrics.cgf, tilted - converse_slack(*spec.shape))


def theorem1_check(source: FinitePmf, spec: DistortionSpec, D: float, t: float,
                   code: Code) -> bool:
    sides = theorem1_sides(source, spec, D, t, code)
    return sides.cgf >= sides.floor - INEQUALITY_TOL


# === Closed forms and tables ===

class BinaryHammingRd(NamedTuple):
    R: float
    lambda_star: float
    V: float


def binary_entropy(x: float) -> float:
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_hamming_oracle(p: float, D: float) -> BinaryHammingRd:
    """R = h(p) - h(D), lambda* = log2((1-D)/D), V = p(1-p) log2^2((1-p)/p), 0 < D < min(p, 1-p)."""
    if not 0.0 < D < min(p, 1.0 - p):
        raise DomainError(f"closed forms need 0 < D < min(p, 1-p), got p={p}, D={D}")
    return BinaryHammingRd(
        binary_entropy(p) - binary_entropy(D),
        math.log2((1.0 - D) / D),
        p * (1.0 - p) * math.log2((1.0 - p) / p) ** 2,
    )


def rd_sweep(source: FinitePmf, spec: DistortionSpec, D_grid: Iterable[float]) -> List[RdSolution]:
    return [rd_solution(source, spec, D) for D in D_grid]


RD_COLUMNS = ('D', 'R', 'lambda_star', 'V')


def rd_csv(solutions: Sequence[RdSolution], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(RD_COLUMNS)
    for sol in solutions:
        writer.writerow([format_bits(sol.D), format_bits(sol.R),
                         format_bits(sol.lambda_star), format_bits(sol.V)])


if __name__ == '__main__':
    source = FinitePmf(('0', '1'), (0.8, 0.2))
    spec = DistortionSpec.hamming('01')
    for D in (0.05, 0.1, 0.15):
        sol = rd_at_distortion(source, spec, D)
        oracle = binary_hamming_oracle(0.2, D)
        print(f"D={D}: R={sol.R:.6f} ({oracle.R:.6f})  lambda*={sol.lambda_star:.5f} "
              f"({oracle.lambda_star:.5f})  V={sol.V:.6f} ({oracle.V:.6f})")
    print(f"uncovered at D=0: {uncovered_mass(source, spec, 0.0)}")
