"""
Distortion-Ball Covering
=========================
The greedy covering procedure behind the explicit code construction, and the
Renyi-entropy quantity G^{D,eps}_alpha(X) it evaluates.

Procedure:
- B_D(y) = {x : d(x,y) <= D} is the distortion ball around a reproduction symbol.
- Centers are picked greedily: y_i maximizes the probability of the part of its
  ball not already covered by y_1..y_{i-1}; that uncovered part is the cell A_D(y_i).
- Selection stops at the first k* whose cells carry at least 1 - eps of the mass.
- The induced output distribution moves the unused part of the last cell and the
  uncovered mass gamma onto y_1. Its Renyi entropy is G.

Ties between equally heavy centers go to the lowest index of the reproduction
alphabet (recorded as ``tie_break`` on every plan).

The greedy value is always achievable. It equals the minimum over all kernels
whenever greedy attains the best k-ball coverage for every k < k* (singleton,
disjoint and nested ball families); ``g_exact`` computes that minimum directly
by vertex enumeration for instances small enough to enumerate.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .vl_errors import (
    InfeasibleError,
    InstanceTooLargeError,
    InvalidDistributionError,
    InvalidParameterError,
    UnknownSymbolError,
)
from .vl_probability import (
    EQUALITY_TOL,
    NORMALIZATION_TOL,
    THRESHOLD_SLACK,
    UNBOUNDED,
    Bits,
    FinitePmf,
    _check_alpha,
    entropy_of_array,
    renyi_rows,
)

logger = logging.getLogger(__name__)

TIE_BREAK = 'lowest-index'
EXACT_G_BUDGET = 10 ** 6       # deterministic maps enumerated by g_exact
MAP_CHUNK = 1 << 15            # maps materialized per enumeration step
COVERAGE_BUDGET = 10 ** 5      # center subsets examined by max_coverage
CENTER_TIE_TOL = 1e-12         # residual masses this close count as tied


# === Distortion measure ===

@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Distortion matrix d(x, y) >= 0 over source x reproduction alphabets."""

    source_alphabet: Tuple[str, ...]
    repro_alphabet: Tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'source_alphabet', tuple(str(a) for a in self.source_alphabet))
        object.__setattr__(self, 'repro_alphabet', tuple(str(b) for b in self.repro_alphabet))
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape != (len(self.source_alphabet), len(self.repro_alphabet)):
            raise InvalidDistributionError(
                f"distortion matrix has shape {d.shape}, expected "
                f"({len(self.source_alphabet)}, {len(self.repro_alphabet)})"
            )
        if not self.source_alphabet or not self.repro_alphabet:
            raise InvalidDistributionError("alphabets must not be empty")
        if len(set(self.source_alphabet)) != len(self.source_alphabet):
            raise InvalidDistributionError("source alphabet entries must be distinct")
        if len(set(self.repro_alphabet)) != len(self.repro_alphabet):
            raise InvalidDistributionError("reproduction alphabet entries must be distinct")
        if not np.all(np.isfinite(d)) or np.any(d < 0.0):
            raise InvalidDistributionError("distortions must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, 'd', d)

    @classmethod
    def hamming(cls, source_symbols: Sequence[str],
                repro_symbols: Optional[Sequence[str]] = None) -> 'DistortionSpec':
        """0 when the labels agree, 1 otherwise."""
        xs = tuple(str(s) for s in source_symbols)
        ys = xs if repro_symbols is None else tuple(str(s) for s in repro_symbols)
        d = np.array([[0.0 if x == y else 1.0 for y in ys] for x in xs])
        return cls(xs, ys, d)

    @classmethod
    def from_json(cls, data: dict) -> 'DistortionSpec':
        try:
            return cls(tuple(data['source_alphabet']), tuple(data['repro_alphabet']),
                       np.asarray(data['d'], dtype=float))
        except KeyError as exc:
            raise InvalidDistributionError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidDistributionError):
                raise
            raise InvalidDistributionError(f"malformed distortion matrix: {exc}") from None

    def to_json(self) -> dict:
        return {
            'source_alphabet': list(self.source_alphabet),
            'repro_alphabet': list(self.repro_alphabet),
            'd': self.d.tolist(),
        }

    @property
    def shape(self) -> Tuple[int, int]:
        return self.d.shape

    def repro_index(self, y: str) -> int:
        try:
            return self.repro_alphabet.index(y)
        except ValueError:
            raise UnknownSymbolError(f"unknown reproduction symbol {y!r}") from None

    def source_index(self, x: str) -> int:
        try:
            return self.source_alphabet.index(x)
        except ValueError:
            raise UnknownSymbolError(f"unknown source symbol {x!r}") from None

    def value(self, x: str, y: str) -> float:
        return float(self.d[self.source_index(x), self.repro_index(y)])

    def ball_matrix(self, D: float) -> np.ndarray:
        """Boolean |X| x |Y| matrix of d(x, y) <= D."""
        return self.d <= D + THRESHOLD_SLACK

    def indicator(self, D: float) -> 'DistortionSpec':
        """The excess indicator d'(x, y) = 1{d(x, y) > D}."""
        return DistortionSpec(self.source_alphabet, self.repro_alphabet,
                              (~self.ball_matrix(D)).astype(float))

    def d_min_per_row(self) -> np.ndarray:
        return self.d.min(axis=1)


def load_distortion(path) -> DistortionSpec:
    with open(path, 'r', encoding='utf-8') as f:
        return DistortionSpec.from_json(json.load(f))


def aligned_probs(source: FinitePmf, spec: DistortionSpec) -> np.ndarray:
    """Source probabilities in the distortion matrix's row order."""
    if source.alphabet == spec.source_alphabet:
        return source.as_array()
    if set(source.alphabet) != set(spec.source_alphabet):
        missing = set(spec.source_alphabet) ^ set(source.alphabet)
        raise UnknownSymbolError(
            f"source and distortion alphabets differ on {sorted(missing)!r}"
        )
    return np.array([source.prob(x) for x in spec.source_alphabet])


def _check_level(D: float, epsilon: Optional[float] = None) -> None:
    if not math.isfinite(D) or D < 0.0:
        raise InvalidParameterError(f"distortion level must be finite and >= 0, got {D}")
    if epsilon is not None and not (0.0 <= epsilon < 1.0):
        raise InvalidParameterError(f"epsilon must lie in [0, 1), got {epsilon}")


# === Balls and feasibility ===

def distortion_ball(spec: DistortionSpec, y: str, D: float) -> FrozenSet[str]:
    """B_D(y) = {x : d(x, y) <= D}."""
    _check_level(D)
    j = spec.repro_index(y)
    inside = spec.ball_matrix(D)[:, j]
    return frozenset(x for x, ok in zip(spec.source_alphabet, inside) if ok)


def uncovered_mass(source: FinitePmf, spec: DistortionSpec, D: float) -> float:
    """P[min_y d(X, y) > D]."""
    p = aligned_probs(source, spec)
    coverable = spec.ball_matrix(D).any(axis=1)
    return math.fsum(p[~coverable])


def feasibility(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> bool:
    """False iff no code meets P[d > D] <= epsilon (then R* = G = +inf)."""
    _check_level(D, epsilon)
    return uncovered_mass(source, spec, D) <= epsilon + NORMALIZATION_TOL


# === Greedy cover ===

@dataclass(frozen=True)
class CoveringPlan:
    """Ordered greedy cover and the masses that drive the code construction."""

    source_alphabet: Tuple[str, ...]
    ordered_centers: Tuple[str, ...]
    cells: Tuple[FrozenSet[str], ...]
    cell_probs: Tuple[float, ...]
    k_star: int
    alpha_mass: float
    beta_mass: float
    gamma_mass: float
    distortion_level: float
    epsilon: float
    tie_break: str = TIE_BREAK

    def cell_index(self) -> Dict[str, int]:
        """Source symbol -> 0-based cell index, for symbols inside some cell."""
        return {x: i for i, cell in enumerate(self.cells) for x in cell}

    def check_invariants(self) -> List[str]:
        """Return the violated plan invariants (empty when the plan is valid)."""
        problems = []
        k, eps = self.k_star, self.epsilon
        if not (len(self.ordered_centers) == len(self.cells) == len(self.cell_probs) == k >= 1):
            problems.append("k_star must equal the number of centers, cells and cell masses")
            return problems
        seen = set()
        for cell in self.cells:
            if seen & cell:
                problems.append("cells are not pairwise disjoint")
                break
            seen |= cell
        if any(a < b - EQUALITY_TOL for a, b in zip(self.cell_probs, self.cell_probs[1:])):
            problems.append("cell masses are not non-increasing")
        before = math.fsum(self.cell_probs[:-1])
        total = math.fsum(self.cell_probs)
        if not before < 1.0 - eps:
            problems.append("cells before k* already reach 1 - epsilon")
        if total < 1.0 - eps - EQUALITY_TOL:
            problems.append("cells up to k* do not reach 1 - epsilon")
        if abs(self.alpha_mass - before) > EQUALITY_TOL:
            problems.append("alpha differs from the mass of the first k* - 1 cells")
        if abs(self.alpha_mass + self.beta_mass - (1.0 - eps)) > EQUALITY_TOL:
            problems.append("alpha + beta differs from 1 - epsilon")
        if not (0.0 < self.beta_mass <= self.cell_probs[-1] + EQUALITY_TOL):
            problems.append("beta must lie in (0, P[A_k*]]")
        if not (-EQUALITY_TOL <= self.gamma_mass <= eps + EQUALITY_TOL):
            problems.append("gamma must lie in [0, epsilon]")
        if abs(self.gamma_mass - (1.0 - total)) > EQUALITY_TOL:
            problems.append("gamma differs from the mass outside all cells")
        return problems

    def to_json(self) -> dict:
        return {
            'ordered_centers': list(self.ordered_centers),
            'cells': [sorted(c, key=self.source_alphabet.index) for c in self.cells],
            'cell_probs': list(self.cell_probs),
            'k_star': self.k_star,
            'alpha_mass': self.alpha_mass,
            'beta_mass': self.beta_mass,
            'gamma_mass': self.gamma_mass,
            'D': self.distortion_level,
            'epsilon': self.epsilon,
            'tie_break': self.tie_break,
        }


class _GreedyStep(NamedTuple):
    center: int
    members: np.ndarray
    mass: float


def _greedy_steps(p: np.ndarray, balls: np.ndarray) -> Iterator[_GreedyStep]:
    """Yield greedy centers until no ball holds uncovered positive mass."""
    incidence = sparse.csc_matrix(balls, dtype=float)
    uncovered = np.ones(p.size, dtype=bool)
    while True:
        residual = incidence.T @ np.where(uncovered, p, 0.0)
        top = residual.max()
        if top <= 0.0:
            return
        j = int(np.flatnonzero(residual >= top - CENTER_TIE_TOL)[0])
        members = np.flatnonzero(balls[:, j] & uncovered)
        uncovered[members] = False
        yield _GreedyStep(j, members, math.fsum(p[members]))


def greedy_cover(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> CoveringPlan:
    """
    Run the greedy covering procedure.

    Args:
        source: Source distribution P_X.
        spec: Distortion measure.
        D: Distortion level.
        epsilon: Allowed excess distortion probability, in [0, 1).

    Returns:
        CoveringPlan with centers y_1..y_k*, disjoint cells, and alpha, beta, gamma.

    Raises:
        InfeasibleError: P[min_y d(X, y) > D] > epsilon.
    """
    _check_level(D, epsilon)
    p = aligned_probs(source, spec)
    balls = spec.ball_matrix(D)
    violating = math.fsum(p[~balls.any(axis=1)])
    if violating > epsilon + NORMALIZATION_TOL:
        raise InfeasibleError(
            f"P[min_y d(X,y) > {D}] = {violating:.12g} exceeds epsilon = {epsilon}",
            violating_mass=violating,
        )

    target = 1.0 - epsilon
    centers, cells, masses = [], [], []
    for step in _greedy_steps(p, balls):
        centers.append(spec.repro_alphabet[step.center])
        cells.append(frozenset(spec.source_alphabet[i] for i in step.members))
        masses.append(step.mass)
        logger.debug("center %d: %s covers %.12g", len(centers), centers[-1], step.mass)
        if math.fsum(masses) >= target - NORMALIZATION_TOL:
            break
    else:
        raise InfeasibleError(
            f"cells reach only {math.fsum(masses):.12g} < 1 - epsilon", violating_mass=violating
        )

    alpha = math.fsum(masses[:-1])
    plan = CoveringPlan(
        source_alphabet=spec.source_alphabet,
        ordered_centers=tuple(centers),
        cells=tuple(cells),
        cell_probs=tuple(masses),
        k_star=len(centers),
        alpha_mass=alpha,
        beta_mass=target - alpha,
        gamma_mass=max(0.0, 1.0 - math.fsum(masses)),
        distortion_level=float(D),
        epsilon=float(epsilon),
    )
    logger.info("greedy cover D=%g eps=%g: k*=%d beta=%.6g gamma=%.6g",
                D, epsilon, plan.k_star, plan.beta_mass, plan.gamma_mass)
    return plan


def induced_output_array(plan: CoveringPlan) -> np.ndarray:
    """P_Yhat over y_1..y_k* as a vector (non-increasing)."""
    k = plan.k_star
    if k == 1:
        return np.ones(1)
    q = np.array(plan.cell_probs, dtype=float)
    q[0] = plan.cell_probs[0] + (plan.cell_probs[-1] - plan.beta_mass) + plan.gamma_mass
    q[-1] = plan.beta_mass
    return q


def induced_output_distribution(plan: CoveringPlan) -> FinitePmf:
    """Distribution of the reproduction produced by the stochastic code built on `plan`."""
    q = induced_output_array(plan)
    return FinitePmf.from_array(plan.ordered_centers, q / q.sum())


def g_quantity(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
               alpha: float) -> Bits:
    """
    G^{D,eps}_alpha(X) evaluated through the greedy construction.

    alpha = 1 gives the Shannon limit G_1. Returns UNBOUNDED when the
    instance is infeasible.
    """
    alpha = _check_alpha(alpha)
    if not feasibility(source, spec, D, epsilon):
        return UNBOUNDED
    return entropy_of_array(induced_output_array(greedy_cover(source, spec, D, epsilon)), alpha)


def tamper_beta(plan: CoveringPlan) -> CoveringPlan:
    """Copy of `plan` whose beta outweighs the mass left on y_1 (breaks the sorted order)."""
    moved = 0.75 * (plan.cell_probs[0] + plan.cell_probs[-1] + plan.gamma_mass)
    return replace(plan, beta_mass=moved, alpha_mass=1.0 - plan.epsilon - moved)


def truncate_plan(plan: CoveringPlan) -> CoveringPlan:
    """Copy of `plan` with the last cell dropped, so the cells fall short of 1 - epsilon."""
    if plan.k_star < 2:
        raise InvalidParameterError("truncate_plan needs k* >= 2")
    probs = plan.cell_probs[:-1]
    return replace(
        plan,
        ordered_centers=plan.ordered_centers[:-1],
        cells=plan.cells[:-1],
        cell_probs=probs,
        k_star=plan.k_star - 1,
        alpha_mass=math.fsum(probs[:-1]),
        beta_mass=probs[-1],
        gamma_mass=1.0 - math.fsum(probs),
    )


def is_laminar(spec: DistortionSpec, D: float) -> bool:
    """True iff any two D-balls are either disjoint or nested."""
    balls = spec.ball_matrix(D).astype(np.int64)
    overlap = balls.T @ balls
    sizes = np.diag(overlap)
    smaller = np.minimum(sizes[:, None], sizes[None, :])
    return bool(np.all((overlap == 0) | (overlap == smaller)))


def order_for_t(t: float) -> float:
    """Renyi order 1/(1+t) paired with the CGF parameter t (t = 0 gives 1)."""
    if not math.isfinite(t) or t < 0.0:
        raise InvalidParameterError(f"t must be finite and >= 0, got {t}")
    return 1.0 / (1.0 + t)


# === Exhaustive enumeration of deterministic maps ===

def map_count(n_x: int, n_y: int) -> int:
    return n_y ** n_x


def enumerate_maps(n_x: int, n_y: int, budget: int,
                   chunk: int = MAP_CHUNK) -> Iterator[np.ndarray]:
    """Yield all maps X -> Y as integer arrays of shape (rows, n_x), chunk by chunk."""
    total = map_count(n_x, n_y)
    if total > budget:
        raise InstanceTooLargeError(
            f"{n_y}^{n_x} = {total} maps exceed the budget of {budget}", size=total, budget=budget
        )
    radix = n_y ** np.arange(n_x, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (codes[:, None] // radix[None, :]) % n_y


def map_marginals(p: np.ndarray, maps: np.ndarray, n_y: int) -> np.ndarray:
    rows = np.arange(maps.shape[0])
    q = np.zeros((maps.shape[0], n_y))
    for x in range(maps.shape[1]):
        q[rows, maps[:, x]] += p[x]
    return q


def map_excess(p: np.ndarray, bad: np.ndarray, maps: np.ndarray) -> np.ndarray:
    e = np.zeros(maps.shape[0])
    for x in range(maps.shape[1]):
        e += p[x] * bad[x, maps[:, x]]
    return e


def feasible_maps(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                  budget: int = EXACT_G_BUDGET) -> Iterator[np.ndarray]:
    """Yield the deterministic maps phi with P[d(X, phi(X)) > D] <= epsilon, chunk by chunk."""
    _check_level(D, epsilon)
    p = aligned_probs(source, spec)
    bad = (~spec.ball_matrix(D)).astype(float)
    for maps in enumerate_maps(*bad.shape, budget):
        keep = map_excess(p, bad, maps) <= epsilon + NORMALIZATION_TOL
        if keep.any():
            yield maps[keep]


def g_exact(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
            alpha: float, budget: int = EXACT_G_BUDGET) -> Bits:
    """
    Exact minimum of H_alpha(Y) over kernels with P[d(X, Y) > D] <= epsilon.

    H_alpha is quasi-concave on the simplex, so the minimum over the kernel
    polytope sits at a vertex: either a feasible deterministic map, or a map
    with one source symbol split between two outputs so that the excess
    probability equals epsilon exactly.

    Raises:
        InstanceTooLargeError: |Y|^|X| exceeds `budget`.
    """
    alpha = _check_alpha(alpha)
    if not feasibility(source, spec, D, epsilon):
        return UNBOUNDED
    p = aligned_probs(source, spec)
    bad = (~spec.ball_matrix(D)).astype(float)
    n_x, n_y = bad.shape
    best = math.inf
    for maps in enumerate_maps(n_x, n_y, budget):
        q = map_marginals(p, maps, n_y)
        e = map_excess(p, bad, maps)
        ok = e <= epsilon + NORMALIZATION_TOL
        if ok.any():
            best = min(best, float(renyi_rows(q[ok], alpha).min()))
        for x in np.flatnonzero(p > 0.0):
            current = maps[:, x]
            for y2 in range(n_y):
                e2 = e + p[x] * (bad[x, y2] - bad[x, current])
                cross = np.flatnonzero((e - epsilon) * (e2 - epsilon) < 0.0)
                if cross.size == 0:
                    continue
                theta = (e[cross] - epsilon) / (e[cross] - e2[cross])
                qs = q[cross].copy()
                qs[np.arange(cross.size), current[cross]] -= theta * p[x]
                qs[:, y2] += theta * p[x]
                best = min(best, float(renyi_rows(np.clip(qs, 0.0, None), alpha).min()))
    return best


# === Coverage diagnostics ===

def greedy_coverage(source: FinitePmf, spec: DistortionSpec, D: float, k: int) -> float:
    """Mass covered by the first k greedy balls."""
    p = aligned_probs(source, spec)
    masses = [step.mass for step in itertools.islice(_greedy_steps(p, spec.ball_matrix(D)), k)]
    return math.fsum(masses)


def max_coverage(source: FinitePmf, spec: DistortionSpec, D: float, k: int,
                 budget: int = COVERAGE_BUDGET) -> float:
    """Largest mass any k balls can cover (exhaustive over center subsets)."""
    p = aligned_probs(source, spec)
    balls = spec.ball_matrix(D)
    n_y = balls.shape[1]
    k = min(k, n_y)
    count = math.comb(n_y, k)
    if count > budget:
        raise InstanceTooLargeError(
            f"C({n_y},{k}) = {count} center subsets exceed the budget of {budget}",
            size=count, budget=budget,
        )
    best = 0.0
    for subset in itertools.combinations(range(n_y), k):
        best = max(best, float(p[balls[:, list(subset)].any(axis=1)].sum()))
    return best


def coverage_gap(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float) -> float:
    """
    Largest shortfall of greedy coverage against the best k-ball coverage, k < k*.

    Zero means the greedy plan attains the minimum over kernels and its
    induced distribution majorizes every feasible output distribution.
    """
    plan = greedy_cover(source, spec, D, epsilon)
    gap = 0.0
    for k in range(1, plan.k_star):
        greedy = math.fsum(plan.cell_probs[:k])
        gap = max(gap, max_coverage(source, spec, D, k) - greedy)
    return gap


# === One-shot sandwiches ===

class Sandwich(NamedTuple):
    lower: Bits
    upper: Bits
    g_source: str


def converse_slack(n_x: int, n_y: int) -> float:
    """log2 log2 (1 + min(|X|, |Y|))."""
    return math.log2(math.log2(1 + min(n_x, n_y)))


def reference_g(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                alpha: float, budget: int = EXACT_G_BUDGET) -> Tuple[Bits, str]:
    """Exact G when the instance fits `budget`, otherwise the greedy value."""
    n_x, n_y = spec.shape
    if map_count(n_x, n_y) <= budget:
        return g_exact(source, spec, D, epsilon, alpha, budget), 'exact'
    return g_quantity(source, spec, D, epsilon, alpha), 'greedy'


def theorem2_bounds(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                    t: float) -> Sandwich:
    """G - log2 log2(1 + min(|X|,|Y|)) <= R*(D, eps, t) <= G, with G at order 1/(1+t)."""
    g, how = reference_g(source, spec, D, epsilon, order_for_t(t))
    if g is UNBOUNDED:
        return Sandwich(UNBOUNDED, UNBOUNDED, how)
    return Sandwich(g - converse_slack(*spec.shape), g, how)


def theorem6_bounds(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float,
                    t: float) -> Sandwich:
    """G <= R*_p(D, eps, t) <= G + floor(log2 k*) + 1 for prefix codes."""
    g, how = reference_g(source, spec, D, epsilon, order_for_t(t))
    if g is UNBOUNDED:
        return Sandwich(UNBOUNDED, UNBOUNDED, how)
    plan = greedy_cover(source, spec, D, epsilon)
    upper = entropy_of_array(induced_output_array(plan), order_for_t(t))
    return Sandwich(g, upper + math.floor(math.log2(plan.k_star)) + 1, how)


if __name__ == '__main__':
    source = FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2))
    spec = DistortionSpec.hamming('abc')
    for eps in (0.0, 0.25, 0.3):
        plan = greedy_cover(source, spec, 0.0, eps)
        q = induced_output_array(plan)
        print(f"eps={eps}: centers={plan.ordered_centers} k*={plan.k_star} "
              f"P_Yhat={np.round(q, 4).tolist()} "
              f"G_0.5={g_quantity(source, spec, 0.0, eps, 0.5):.4f}")
