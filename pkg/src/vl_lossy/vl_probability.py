"""
Finite-Alphabet Probability Primitives
=======================================
Probability mass functions over ordered finite alphabets, Shannon and Renyi
entropies (in bits), and the majorization order on non-negative vectors.

Conventions:
- All logarithms are base 2; natural-log constants are converted explicitly.
- 0^alpha is 0 for every alpha > 0, so zero-probability symbols contribute
  nothing to entropy sums.
- Vectors of unequal length are padded with zeros before majorization
  comparisons.
- Every numerical tolerance used by the package lives in this module.
"""

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr, logsumexp

from .vl_errors import (
    InvalidComparisonError,
    InvalidDistributionError,
    InvalidParameterError,
    PreconditionError,
    UnknownSymbolError,
)

# === Tolerances ===

NORMALIZATION_TOL = 1e-12   # |sum(probs) - 1|
EQUALITY_TOL = 1e-10        # claimed equalities (excess == epsilon, ...)
INEQUALITY_TOL = 1e-9       # claimed inequalities (cgf <= G, ...)
THRESHOLD_SLACK = 1e-12     # d(x, y) <= D + slack counts as inside the ball
ALPHA_ONE_GUARD = 1e-9      # |alpha - 1| below this dispatches to Shannon
MAJORIZATION_TOL = 1e-10    # prefix-sum and total comparisons

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2


# === The +infinity of infeasible instances ===

class Unbounded:
    """Value of R* and G when no code meets the excess constraint.

    Orders above every real number, prints as ``inf`` and refuses arithmetic,
    so an infeasible result cannot silently flow into a sum.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return 'UNBOUNDED'

    def __str__(self) -> str:
        return 'inf'

    def __float__(self) -> float:
        return math.inf

    def __reduce__(self):
        return (Unbounded, ())

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash('vl_lossy.UNBOUNDED')

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True


UNBOUNDED = Unbounded()

Bits = Union[float, Unbounded]


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


def format_bits(value) -> str:
    """Render a quantity with 12 significant digits, ``inf`` for UNBOUNDED."""
    if value is UNBOUNDED:
        return 'inf'
    return f'{float(value):.12g}'


# === Value types ===

@dataclass(frozen=True)
class FinitePmf:
    """Probability mass function over a finite, ordered alphabet."""

    alphabet: Tuple[str, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'alphabet', tuple(str(a) for a in self.alphabet))
        object.__setattr__(self, 'probs', tuple(float(p) for p in self.probs))
        if not self.alphabet:
            raise InvalidDistributionError("alphabet must not be empty")
        if len(self.alphabet) != len(self.probs):
            raise InvalidDistributionError(
                f"alphabet has {len(self.alphabet)} symbols but {len(self.probs)} probabilities"
            )
        if len(set(self.alphabet)) != len(self.alphabet):
            raise InvalidDistributionError("alphabet entries must be distinct")
        for symbol, p in zip(self.alphabet, self.probs):
            if not math.isfinite(p) or p < 0.0:
                raise InvalidDistributionError(f"P({symbol}) = {p} is not a probability")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_mapping(cls, mapping) -> 'FinitePmf':
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @classmethod
    def from_array(cls, alphabet: Sequence[str], probs) -> 'FinitePmf':
        return cls(tuple(alphabet), tuple(np.asarray(probs, dtype=float).tolist()))

    @classmethod
    def uniform(cls, alphabet: Sequence[str]) -> 'FinitePmf':
        m = len(alphabet)
        return cls(tuple(alphabet), (1.0 / m,) * m)

    @classmethod
    def from_json(cls, data: dict) -> 'FinitePmf':
        try:
            return cls(tuple(data['alphabet']), tuple(data['probs']))
        except KeyError as exc:
            raise InvalidDistributionError(f"missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise InvalidDistributionError(str(exc)) from None

    def to_json(self) -> dict:
        return {'alphabet': list(self.alphabet), 'probs': list(self.probs)}

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def index(self, symbol: str) -> int:
        try:
            return self.alphabet.index(symbol)
        except ValueError:
            raise UnknownSymbolError(f"unknown source symbol {symbol!r}") from None

    def prob(self, symbol: str) -> float:
        return self.probs[self.index(symbol)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def support(self) -> Tuple[str, ...]:
        return tuple(a for a, p in zip(self.alphabet, self.probs) if p > 0.0)


@dataclass(frozen=True)
class Weights:
    """Non-negative vector, not necessarily normalized."""

    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        for v in self.values:
            if not math.isfinite(v) or v < 0.0:
                raise InvalidDistributionError(f"weight {v} is negative or not finite")

    @property
    def total(self) -> float:
        return math.fsum(self.values)

    def normalize(self) -> FinitePmf:
        """Scale to a FinitePmf over positional labels 0, 1, ..."""
        total = self.total
        if total <= 0.0:
            raise InvalidDistributionError("cannot normalize an all-zero weight vector")
        probs = np.asarray(self.values) / total
        probs = probs / probs.sum()
        return FinitePmf.from_array([str(i) for i in range(len(self.values))], probs)


VectorLike = Union[FinitePmf, Weights, Sequence[float], np.ndarray]


def _as_vector(v: VectorLike) -> np.ndarray:
    if isinstance(v, FinitePmf):
        return v.as_array()
    if isinstance(v, Weights):
        return np.asarray(v.values, dtype=float)
    return np.asarray(Weights(tuple(np.ravel(np.asarray(v, dtype=float)))).values, dtype=float)


def load_pmf(path) -> FinitePmf:
    """Read a FinitePmf from a JSON file ({"alphabet": [...], "probs": [...]})."""
    with open(path, 'r', encoding='utf-8') as f:
        return FinitePmf.from_json(json.load(f))


# === Entropies ===

def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise InvalidParameterError(f"Renyi order must lie in (0,1) or (1,inf), got {alpha}")
    return alpha


def is_shannon_order(alpha: float) -> bool:
    return abs(alpha - 1.0) < ALPHA_ONE_GUARD


def entropy_of_array(probs, alpha: float = 1.0) -> float:
    """Renyi entropy (Shannon at alpha = 1) of a probability vector, in bits.

    The vector is taken as is; callers are responsible for normalization.
    """
    alpha = _check_alpha(alpha)
    p = np.asarray(probs, dtype=float)
    p = p[p > 0.0]
    if p.size == 0:
        raise InvalidDistributionError("entropy of an all-zero vector")
    if is_shannon_order(alpha):
        return float(entr(p).sum() * LOG2E)
    return float(logsumexp(alpha * np.log(p)) / ((1.0 - alpha) * LN2))


def renyi_rows(matrix, alpha: float) -> np.ndarray:
    """Row-wise entropy of a stack of probability vectors (one per row)."""
    alpha = _check_alpha(alpha)
    P = np.atleast_2d(np.asarray(matrix, dtype=float))
    if is_shannon_order(alpha):
        return entr(P).sum(axis=1) * LOG2E
    with np.errstate(divide='ignore'):
        logP = np.log(P)
    return logsumexp(alpha * logP, axis=1) / ((1.0 - alpha) * LN2)


def shannon_entropy(p: FinitePmf) -> float:
    """H(p) = -sum p_i log2 p_i with 0 log 0 = 0."""
    return entropy_of_array(p.probs, 1.0)


def renyi_entropy(p: FinitePmf, alpha: float) -> float:
    """
    Renyi entropy of order alpha, in bits.

    Args:
        p: The distribution.
        alpha: Order in (0,1) or (1,inf). Values within ALPHA_ONE_GUARD of 1
               return the Shannon entropy (the alpha -> 1 limit).

    Raises:
        InvalidParameterError: alpha <= 0 or not finite.
    """
    return entropy_of_array(p.probs, alpha)


def renyi_entropy_weights(w: VectorLike, alpha: float) -> float:
    """Renyi entropy of the normalization of a weight vector."""
    v = _as_vector(w)
    total = v.sum()
    if total <= 0.0:
        raise InvalidDistributionError("entropy of an all-zero weight vector")
    return entropy_of_array(v / total, alpha)


# === Majorization ===

def sorted_prefix_sums(v: VectorLike, length: int = 0) -> np.ndarray:
    """Prefix sums of v sorted in decreasing order, zero-padded to `length`."""
    x = np.sort(_as_vector(v))[::-1]
    if length > x.size:
        x = np.concatenate([x, np.zeros(length - x.size)])
    return np.cumsum(x)


def majorizes(p: VectorLike, q: VectorLike, tol: float = MAJORIZATION_TOL) -> bool:
    """
    Return True iff p majorizes q (q is majorized by p).

    Both vectors are sorted in decreasing order and zero-padded to a common
    length; p majorizes q when every prefix sum of p dominates that of q and the
    totals agree.

    Raises:
        InvalidComparisonError: the totals differ by more than `tol`.
    """
    a, b = _as_vector(p), _as_vector(q)
    if abs(a.sum() - b.sum()) > tol:
        raise InvalidComparisonError(
            f"majorization needs equal totals, got {a.sum()!r} and {b.sum()!r}"
        )
    m = max(a.size, b.size)
    return bool(np.all(sorted_prefix_sums(a, m) >= sorted_prefix_sums(b, m) - tol))


class OrderingCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def schur_concavity_witness(p: VectorLike, q: VectorLike, alpha: float) -> OrderingCheck:
    """Evaluate H_alpha(p) <= H_alpha(q) for a pair with p majorizing q."""
    if not majorizes(p, q):
        raise PreconditionError("schur_concavity_witness needs p to majorize q")
    lhs = renyi_entropy_weights(p, alpha)
    rhs = renyi_entropy_weights(q, alpha)
    return OrderingCheck(lhs, rhs, lhs <= rhs + EQUALITY_TOL)


def product_pmf(pmfs: Iterable[FinitePmf], joiner: str = '') -> FinitePmf:
    """Product distribution of independent components, alphabet in lexicographic order."""
    pmfs = list(pmfs)
    labels = [()]
    probs = np.ones(1)
    for pmf in pmfs:
        labels = [prefix + (a,) for prefix in labels for a in pmf.alphabet]
        probs = np.kron(probs, pmf.as_array())
    return FinitePmf.from_array([joiner.join(t) for t in labels], probs / probs.sum())


if __name__ == '__main__':
    examples = [
        ('uniform/4', FinitePmf.uniform('abcd')),
        ('point mass', FinitePmf(('a', 'b', 'c'), (1.0, 0.0, 0.0))),
        ('(0.5,0.25,0.25)', FinitePmf(('a', 'b', 'c'), (0.5, 0.25, 0.25))),
    ]

    print("=== Entropies (bits) ===")
    for name, pmf in examples:
        print(f"  {name:18s} H={shannon_entropy(pmf):.4f}  H_0.5={renyi_entropy(pmf, 0.5):.4f}")
    print(f"  (0.75,0.25) majorizes (0.5,0.3,0.2): {majorizes([0.75, 0.25], [0.5, 0.3, 0.2])}")
