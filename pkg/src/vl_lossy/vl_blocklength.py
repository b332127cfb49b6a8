"""
Blocklength-n Quantities
=========================
Product sources with additive distortion, per-symbol G and its sandwich, and
the comparison against the Gaussian approximation.

The blocklength constraint is P[d_n(X^n, Y^n) > nD] <= eps with d_n the
per-letter sum, so every expanded computation runs at threshold n*D.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, TextIO, Tuple

import numpy as np

from .vl_codec import deterministic_bound
from .vl_covering import (
    DistortionSpec,
    Sandwich,
    aligned_probs,
    converse_slack,
    g_quantity,
    greedy_cover,
    order_for_t,
)
from .vl_errors import DomainError, InstanceTooLargeError, InvalidParameterError
from .vl_probability import UNBOUNDED, Bits, FinitePmf, format_bits, product_pmf
from .vl_ratedistortion import (
    RdSolution,
    gaussian_approx,
    h_d_epsilon_bruteforce,
    r_d_epsilon,
    rd_solution,
)

logger = logging.getLogger(__name__)

PRODUCT_BUDGET = 2 ** 24


@dataclass(frozen=True, eq=False)
class ProductInstance:
    n: int
    base_source: FinitePmf
    base_spec: DistortionSpec
    expanded_source: FinitePmf
    expanded_spec: DistortionSpec


def _joiner(*alphabets) -> str:
    return '' if all(len(a) == 1 for alphabet in alphabets for a in alphabet) else ','


def build_product(base_source: FinitePmf, base_spec: DistortionSpec, n: int,
                  budget: int = PRODUCT_BUDGET) -> ProductInstance:
    """
    n-fold product of a single-letter instance.

    Symbols are concatenated (comma-joined when some base label is longer than
    one character) and ordered lexicographically, first letter most significant.

    Raises:
        InstanceTooLargeError: (|X| |Y|)^n exceeds `budget`.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"blocklength must be a positive integer, got {n}")
    n = int(n)
    n_x, n_y = base_spec.shape
    size = (n_x * n_y) ** n
    if size > budget:
        raise InstanceTooLargeError(
            f"blocklength {n} needs {size} distortion entries, budget is {budget}",
            size=size, budget=budget,
        )
    base = FinitePmf.from_array(base_spec.source_alphabet, aligned_probs(base_source, base_spec))
    if n == 1:
        return ProductInstance(1, base_source, base_spec, base, base_spec)

    joiner = _joiner(base_spec.source_alphabet, base_spec.repro_alphabet)
    source = product_pmf([base] * n, joiner)
    d = base_spec.d
    for _ in range(n - 1):
        d = (d[:, None, :, None] + base_spec.d[None, :, None, :]).reshape(
            d.shape[0] * n_x, d.shape[1] * n_y)
    repro = [()]
    for _ in range(n):
        repro = [prefix + (b,) for prefix in repro for b in base_spec.repro_alphabet]
    spec = DistortionSpec(source.alphabet, tuple(joiner.join(r) for r in repro), d)
    logger.debug("product instance n=%d: %d x %d", n, *spec.shape)
    return ProductInstance(n, base_source, base_spec, source, spec)


def normalized_g(inst: ProductInstance, D: float, epsilon: float, t: float) -> Bits:
    """(1/n) G at threshold nD and order 1/(1+t); t = 0 gives the Shannon limit."""
    g = g_quantity(inst.expanded_source, inst.expanded_spec, inst.n * D, epsilon, order_for_t(t))
    return UNBOUNDED if g is UNBOUNDED else g / inst.n


def theorem3_bounds(inst: ProductInstance, D: float, epsilon: float, t: float) -> Sandwich:
    """upper = normalized G, lower = upper - (1/n) log2 log2(1 + min(|X|^n, |Y|^n))."""
    upper = normalized_g(inst, D, epsilon, t)
    if upper is UNBOUNDED:
        return Sandwich(UNBOUNDED, UNBOUNDED, 'greedy')
    return Sandwich(upper - converse_slack(*inst.expanded_spec.shape) / inst.n, upper, 'greedy')


class BlockSandwich(NamedTuple):
    r_d_epsilon: Bits
    g_one: Bits
    h_d_epsilon: Bits


def _per_symbol(value: Bits, n: int) -> Bits:
    return UNBOUNDED if value is UNBOUNDED else value / n


def block_sandwich(inst: ProductInstance, D: float, epsilon: float) -> BlockSandwich:
    """(1/n) R_{nD,eps} <= (1/n) G_1 <= (1/n) H_{nD,eps} on the expanded instance."""
    n, src, spec = inst.n, inst.expanded_source, inst.expanded_spec
    return BlockSandwich(
        _per_symbol(r_d_epsilon(src, spec, n * D, epsilon), n),
        normalized_g(inst, D, epsilon, 0.0),
        _per_symbol(h_d_epsilon_bruteforce(src, spec, n * D, epsilon), n),
    )


# === Tables ===

class AsymptoticRow(NamedTuple):
    n: int
    normalized_g: Bits
    gaussian: Optional[float]
    gap: Optional[float]
    scaled_gap: Optional[float]


def _gaussian_solution(base_source: FinitePmf, base_spec: DistortionSpec,
                       D: float) -> Optional[RdSolution]:
    try:
        return rd_solution(base_source, base_spec, D)
    except DomainError as exc:
        logger.warning("no Gaussian column: %s", exc)
        return None


def _gaussian_columns(n: int, g: Bits, epsilon: float,
                      rd: Optional[RdSolution]) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """(gaussian, gap, scaled_gap) for a per-symbol t = 0 value g."""
    if rd is None or g is UNBOUNDED:
        return None, None, None
    gauss = gaussian_approx(rd, n, epsilon).value
    gap = abs(g - gauss)
    return gauss, gap, (gap * n / math.log2(n) if n > 1 else None)


def _asymptotic_row(n: int, base_source: FinitePmf, base_spec: DistortionSpec, D: float,
                    epsilon: float, rd: Optional[RdSolution], budget: int) -> AsymptoticRow:
    g = normalized_g(build_product(base_source, base_spec, n, budget), D, epsilon, 0.0)
    return AsymptoticRow(n, g, *_gaussian_columns(n, g, epsilon, rd))


def asymptotic_table(base_source: FinitePmf, base_spec: DistortionSpec, D: float,
                     epsilon: float, n_range: Iterable[int], workers: int = 1,
                     budget: int = PRODUCT_BUDGET) -> List[AsymptoticRow]:
    """
    Exact per-symbol G at t = 0 next to the Gaussian approximation for each n.

    ``scaled_gap`` is gap * n / log2 n (undefined at n = 1).
    """
    rd = _gaussian_solution(base_source, base_spec, D)
    ns = list(n_range)
    args = [(n, base_source, base_spec, D, epsilon, rd, budget) for n in ns]
    return _fan_out(_asymptotic_row, args, workers)


class SweepRow(NamedTuple):
    n: int
    t: float
    epsilon: float
    D: float
    lower: Optional[Bits]
    upper: Optional[Bits]
    gaussian: Optional[float]
    gap: Optional[float]
    scaled_gap: Optional[float]
    status: str


SWEEP_COLUMNS = SweepRow._fields


def _sweep_row(n: int, base_source: FinitePmf, base_spec: DistortionSpec, D: float,
               epsilon: float, t: float, rd: Optional[RdSolution], budget: int) -> SweepRow:
    try:
        inst = build_product(base_source, base_spec, n, budget)
    except InstanceTooLargeError as exc:
        logger.warning("n=%d skipped: %s", n, exc)
        return SweepRow(n, t, epsilon, D, None, None, None, None, None, 'skipped')
    bounds = theorem3_bounds(inst, D, epsilon, t)
    g0 = bounds.upper if t == 0.0 else normalized_g(inst, D, epsilon, 0.0)
    return SweepRow(n, t, epsilon, D, bounds.lower, bounds.upper,
                    *_gaussian_columns(n, g0, epsilon, rd), 'ok')


def sweep_rows(base_source: FinitePmf, base_spec: DistortionSpec, D: float, epsilon: float,
               t: float, n_range: Iterable[int], workers: int = 1,
               budget: int = PRODUCT_BUDGET) -> List[SweepRow]:
    """Sandwich at parameter t and the t = 0 Gaussian comparison, one row per n."""
    rd = _gaussian_solution(base_source, base_spec, D)
    args = [(n, base_source, base_spec, D, epsilon, t, rd, budget) for n in n_range]
    return _fan_out(_sweep_row, args, workers)


def write_sweep_csv(rows: Sequence[SweepRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    return format_bits(value)


class CorrectionRow(NamedTuple):
    n: int
    correction: float
    per_symbol: float


def deterministic_correction_sweep(base_source: FinitePmf, base_spec: DistortionSpec, D: float,
                                   epsilon: float, t: float,
                                   n_range: Iterable[int]) -> List[CorrectionRow]:
    """Extra rate the deterministic code pays over G, total and per symbol."""
    rows = []
    for n in n_range:
        inst = build_product(base_source, base_spec, n)
        plan = greedy_cover(inst.expanded_source, inst.expanded_spec, n * D, epsilon)
        correction = deterministic_bound(plan, t).correction
        rows.append(CorrectionRow(n, correction, correction / n))
    return rows


def _fan_out(fn, args: Sequence[tuple], workers: int) -> list:
    """Apply `fn` to every argument tuple, in order, optionally across processes."""
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


if __name__ == '__main__':
    base = FinitePmf(('0', '1'), (0.8, 0.2))
    spec = DistortionSpec.hamming('01')
    for row in asymptotic_table(base, spec, 0.1, 0.5, range(1, 9)):
        print(f"n={row.n:2d} G/n={format_bits(row.normalized_g):>14s} "
              f"gauss={format_bits(row.gaussian):>14s}")
