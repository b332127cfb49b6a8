"""
Variable-Length Codes
======================
Binary codeword enumeration, the three code constructions built on a greedy
CoveringPlan, and exact evaluation of their performance.

Variants:
- stochastic     (w_i per cell, the last cell split between w_k* and w_1)
- deterministic  (w_i per cell, no randomization)
- prefix         (stochastic branching over fixed-length padded codewords)

Codewords are strings over {0, 1}; the empty string is the codeword lambda.
The i-th string in the shortlex order (lambda, 0, 1, 00, 01, ...) is
``bin(i)[3:]``.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .vl_covering import CoveringPlan, DistortionSpec, aligned_probs, induced_output_array
from .vl_errors import InvalidParameterError, UnknownSymbolError
from .vl_probability import (
    EQUALITY_TOL,
    LN2,
    LOG2E,
    THRESHOLD_SLACK,
    FinitePmf,
    entropy_of_array,
)

logger = logging.getLogger(__name__)

VARIANT_INFO = {
    'stochastic': {
        'aliases': ('stochastic', 'sto'),
        'randomized': True,
        'padded': False,
        'excess': 'epsilon',
    },
    'deterministic': {
        'aliases': ('deterministic', 'det'),
        'randomized': False,
        'padded': False,
        'excess': 'gamma',
    },
    'prefix': {
        'aliases': ('prefix', 'pre'),
        'randomized': True,
        'padded': True,
        'excess': 'epsilon',
    },
}


def canonical_variant(name: str) -> str:
    key = name.strip().lower()
    for variant, info in VARIANT_INFO.items():
        if key in info['aliases']:
            return variant
    raise InvalidParameterError(
        f"unknown code variant {name!r}; expected one of {sorted(VARIANT_INFO)}"
    )


# === Codewords ===

def is_binary_string(word: str) -> bool:
    return isinstance(word, str) and all(c in '01' for c in word)


def nth_codeword(i: int) -> str:
    """
    The i-th binary string in shortlex order, 1-based.

    Examples:
        1 -> ''   2 -> '0'   3 -> '1'   4 -> '00'   8 -> '000'
    """
    if isinstance(i, bool) or not isinstance(i, (int, np.integer)) or i < 1:
        raise InvalidParameterError(f"codeword index must be a positive integer, got {i!r}")
    return bin(int(i))[3:]


def prefix_codeword(i: int, k_star: int) -> str:
    """w_i followed by '1' and zeros, padded to floor(log2 k*) + 1 bits."""
    if not 1 <= i <= k_star:
        raise InvalidParameterError(f"codeword index {i} outside 1..{k_star}")
    word = nth_codeword(i)
    width = int(k_star).bit_length()
    return word + '1' + '0' * (width - len(word) - 1)


def is_prefix_free(codewords: Iterable[str]) -> bool:
    """True iff no codeword is a proper prefix of another."""
    words = sorted(set(codewords))
    return not any(b.startswith(a) for a, b in zip(words, words[1:]))


# === Codes ===

class Branch(NamedTuple):
    codeword: str
    prob: float


@dataclass(frozen=True)
class Code:
    """
    Encoder/decoder pair.

    ``encoder`` maps every source symbol to at most two weighted branches;
    ``decoder`` maps each emitted codeword to a reproduction symbol;
    ``length_table`` holds the declared length of each codeword and is what
    the exact metrics read.
    """

    variant: str
    encoder: Mapping[str, Tuple[Branch, ...]]
    decoder: Mapping[str, str]
    length_table: Mapping[str, int]
    plan: Optional[CoveringPlan] = None

    def decode(self, codeword: str) -> Optional[str]:
        """Reproduction symbol for `codeword`, None for unused codewords."""
        return self.decoder.get(codeword)

    def codewords(self) -> Tuple[str, ...]:
        return tuple(self.decoder)

    def branches(self, symbol: str) -> Tuple[Branch, ...]:
        try:
            return self.encoder[symbol]
        except KeyError:
            raise UnknownSymbolError(f"symbol {symbol!r} has no encoding") from None

    def emitted(self) -> set:
        return {b.codeword for branches in self.encoder.values() for b in branches if b.prob > 0.0}

    def check_invariants(self) -> List[str]:
        problems = []
        emitted = self.emitted()
        if set(self.decoder) != emitted:
            problems.append("decoder domain differs from the emitted codewords")
        if len(set(self.decoder.values())) != len(self.decoder):
            problems.append("decoder is not injective")
        if not all(is_binary_string(w) for w in self.decoder):
            problems.append("codewords must be strings over {0,1}")
        for symbol, branches in self.encoder.items():
            if abs(math.fsum(b.prob for b in branches) - 1.0) > EQUALITY_TOL:
                problems.append(f"branches of {symbol!r} do not sum to 1")
            if any(b.prob < 0.0 for b in branches) or len(branches) > 2:
                problems.append(f"encoding of {symbol!r} is not a two-branch distribution")
        if self.variant == 'deterministic' and any(
            len(bs) != 1 for bs in self.encoder.values()
        ):
            problems.append("deterministic code has a randomized branch")
        if self.variant == 'prefix':
            if not is_prefix_free(self.decoder):
                problems.append("codewords are not prefix-free")
            if kraft_sum(self) > 1.0 + EQUALITY_TOL:
                problems.append("Kraft sum exceeds 1")
        if set(self.length_table) != set(self.decoder):
            problems.append("length table keys differ from the codewords")
        elif any(self.length_table[w] != len(w) for w in self.decoder):
            problems.append("declared lengths differ from the codeword lengths")
        return problems

    def output_distribution(self, source: FinitePmf) -> FinitePmf:
        """Distribution of the decoded reproduction under `source`."""
        mass: Dict[str, float] = {y: 0.0 for y in self.decoder.values()}
        for x, px in zip(source.alphabet, source.probs):
            for b in self.branches(x):
                if b.codeword in self.decoder:
                    mass[self.decoder[b.codeword]] += px * b.prob
        symbols = tuple(mass)
        probs = np.array([mass[y] for y in symbols])
        return FinitePmf.from_array(symbols, probs / probs.sum())

    def to_json(self) -> dict:
        return {
            'variant': self.variant,
            'encoder': [
                {'symbol': x,
                 'branches': [{'codeword': b.codeword, 'prob': b.prob} for b in branches]}
                for x, branches in self.encoder.items()
            ],
            'decoder': [{'codeword': w, 'symbol': y} for w, y in self.decoder.items()],
            'lengths': dict(self.length_table),
            'plan': self.plan.to_json() if self.plan is not None else None,
        }


def kraft_sum(code: Code) -> float:
    """sum 2^-len(w) over the codeword strings."""
    return math.fsum(2.0 ** -len(w) for w in code.decoder)


def _assemble(variant: str, plan: CoveringPlan, words: List[str], split_last: bool) -> Code:
    k = plan.k_star
    cell_of = plan.cell_index()
    keep = min(1.0, plan.beta_mass / plan.cell_probs[-1]) if split_last else 1.0
    encoder = {}
    for x in plan.source_alphabet:
        i = cell_of.get(x)
        if i is None:
            branches = (Branch(words[0], 1.0),)
        elif i < k - 1 or k == 1 or keep >= 1.0:
            branches = (Branch(words[i], 1.0),)
        elif keep <= 0.0:
            branches = (Branch(words[0], 1.0),)
        else:
            branches = (Branch(words[i], keep), Branch(words[0], 1.0 - keep))
        encoder[x] = branches
    used = {b.codeword for bs in encoder.values() for b in bs}
    decoder = {w: y for w, y in zip(words, plan.ordered_centers) if w in used}
    code = Code(variant, encoder, decoder, {w: len(w) for w in decoder}, plan)
    logger.debug("built %s code with %d codewords", variant, len(decoder))
    return code


def build_stochastic_code(plan: CoveringPlan) -> Code:
    """Cell i < k* -> w_i; cell k* -> w_k* w.p. beta/P[A_k*], else w_1; outside -> w_1."""
    words = [nth_codeword(i) for i in range(1, plan.k_star + 1)]
    return _assemble('stochastic', plan, words, split_last=True)


def build_deterministic_code(plan: CoveringPlan) -> Code:
    """Cell i -> w_i for every i <= k*; symbols outside all cells -> w_1."""
    words = [nth_codeword(i) for i in range(1, plan.k_star + 1)]
    return _assemble('deterministic', plan, words, split_last=False)


def build_prefix_code(plan: CoveringPlan) -> Code:
    """Stochastic branching over codewords w_i + '1' + '0'* of length floor(log2 k*) + 1."""
    words = [prefix_codeword(i, plan.k_star) for i in range(1, plan.k_star + 1)]
    return _assemble('prefix', plan, words, split_last=True)


BUILDERS = {
    'stochastic': build_stochastic_code,
    'deterministic': build_deterministic_code,
    'prefix': build_prefix_code,
}


def build_code(plan: CoveringPlan, variant: str = 'stochastic') -> Code:
    return BUILDERS[canonical_variant(variant)](plan)


def expected_excess(plan: CoveringPlan, variant: str) -> float:
    """
    Excess distortion probability a code built from `plan` attains exactly.

    The randomized variants spend the full budget epsilon once k* >= 2; with a
    single cell every symbol goes to y_1 and only the uncovered mass gamma is lost.
    """
    variant = canonical_variant(variant)
    if VARIANT_INFO[variant]['excess'] == 'epsilon' and plan.k_star >= 2:
        return plan.epsilon
    return plan.gamma_mass


def code_from_assignment(assignment: Mapping[str, str], decoder: Mapping[str, str],
                         variant: str = 'deterministic') -> Code:
    """Deterministic code from explicit symbol -> codeword and codeword -> symbol tables."""
    encoder = {x: (Branch(w, 1.0),) for x, w in assignment.items()}
    used = set(assignment.values())
    table = {w: y for w, y in decoder.items() if w in used}
    return Code(variant, encoder, table, {w: len(w) for w in table})


def tamper_lengths(code: Code) -> Code:
    """Copy of `code` whose declared lengths are all zero."""
    return replace(code, length_table={w: 0 for w in code.length_table})


# === Exact metrics ===

class CodeMetrics(NamedTuple):
    excess_probability: float
    cgf: float
    mean_length: float
    max_length: int
    t: float


class LengthLaw(NamedTuple):
    """Joint law of (codeword length, excess indicator) over (symbol, branch) pairs."""

    weights: np.ndarray
    lengths: np.ndarray
    excess: np.ndarray


def length_law(code: Code, source: FinitePmf, spec: DistortionSpec, D: float,
               declared: bool = True) -> LengthLaw:
    """
    Enumerate every (x, branch) pair weighted by P_X(x) * branch probability.

    With ``declared`` the lengths come from the code's length table,
    otherwise from the codeword strings.
    """
    p = aligned_probs(source, spec)
    rows = {x: i for i, x in enumerate(spec.source_alphabet)}
    cols = {y: j for j, y in enumerate(spec.repro_alphabet)}
    weights, lengths, excess = [], [], []
    for x, px in zip(spec.source_alphabet, p):
        for b in code.branches(x):
            y = code.decode(b.codeword)
            weights.append(px * b.prob)
            lengths.append(code.length_table[b.codeword] if declared else len(b.codeword))
            excess.append(y is None or spec.d[rows[x], cols[y]] > D + THRESHOLD_SLACK)
    return LengthLaw(np.array(weights), np.array(lengths, dtype=float), np.array(excess, dtype=bool))


def length_cgf_rows(weights, lengths, t: float) -> np.ndarray:
    """(1/t) log2 E[2^(t * length)] for every row of a (codes, outcomes) length matrix."""
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    w = np.asarray(weights, dtype=float)
    ell = np.atleast_2d(np.asarray(lengths, dtype=float))
    return logsumexp(t * LN2 * ell, b=np.broadcast_to(w, ell.shape), axis=1) / (t * LN2)


def length_cgf(weights, lengths, t: float) -> float:
    """(1/t) log2 E[2^(t * length)] under the given weights."""
    return float(length_cgf_rows(weights, lengths, t)[0])


def code_metrics(code: Code, source: FinitePmf, spec: DistortionSpec, D: float,
                 t: float) -> CodeMetrics:
    """
    Exact excess probability, CGF, mean and max length of `code`.

    Raises:
        InvalidParameterError: t <= 0.
    """
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    law = length_law(code, source, spec, D)
    live = law.weights > 0.0
    return CodeMetrics(
        excess_probability=math.fsum(law.weights[law.excess]),
        cgf=length_cgf(law.weights, law.lengths, t),
        mean_length=math.fsum(law.weights * law.lengths),
        max_length=int(law.lengths[live].max()) if live.any() else 0,
        t=float(t),
    )


class DeterministicBound(NamedTuple):
    value: float
    g: float
    correction: float


def deterministic_bound(plan: CoveringPlan, t: float) -> DeterministicBound:
    """
    Rate guaranteed for the deterministic code at parameter t:

        G + (eps - gamma) * beta^(-t/(1+t)) * log2(e) / (t * 2^((t/(1+t)) G))

    with G the order-1/(1+t) entropy of the plan's induced distribution.
    """
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    s = t / (1.0 + t)
    g = entropy_of_array(induced_output_array(plan), 1.0 / (1.0 + t))
    slack = max(0.0, plan.epsilon - plan.gamma_mass)
    correction = slack * plan.beta_mass ** (-s) * LOG2E / (t * 2.0 ** (s * g)) if slack else 0.0
    return DeterministicBound(g + correction, g, correction)


# === Seeded sampler ===

class SimulationResult(NamedTuple):
    n_samples: int
    excess_rate: float
    mean_length: float


def sample_codeword(code: Code, symbol: str, rng: np.random.Generator) -> str:
    branches = code.branches(symbol)
    if len(branches) == 1:
        return branches[0].codeword
    return branches[0].codeword if rng.random() < branches[0].prob else branches[1].codeword


def simulate(code: Code, source: FinitePmf, spec: DistortionSpec, D: float,
             n_samples: int, rng: np.random.Generator) -> SimulationResult:
    """Draw X ~ source, encode with the code's randomization and tally excess and length."""
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    p = aligned_probs(source, spec)
    xs = spec.source_alphabet
    first_prob = np.empty(len(xs))
    length = np.empty((len(xs), 2))
    bad = np.empty((len(xs), 2), dtype=bool)
    cols = {y: j for j, y in enumerate(spec.repro_alphabet)}
    for i, x in enumerate(xs):
        branches = code.branches(x)
        pair = branches if len(branches) == 2 else branches * 2
        first_prob[i] = pair[0].prob if len(branches) == 2 else 1.0
        for k, b in enumerate(pair):
            y = code.decode(b.codeword)
            length[i, k] = len(b.codeword)
            bad[i, k] = y is None or spec.d[i, cols[y]] > D + THRESHOLD_SLACK
    draws = rng.choice(len(xs), size=n_samples, p=p / p.sum())
    second = (rng.random(n_samples) >= first_prob[draws]).astype(int)
    return SimulationResult(
        n_samples=n_samples,
        excess_rate=float(bad[draws, second].mean()),
        mean_length=float(length[draws, second].mean()),
    )


if __name__ == '__main__':
    from .vl_covering import greedy_cover

    source = FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2))
    spec = DistortionSpec.hamming('abc')
    plan = greedy_cover(source, spec, 0.0, 0.25)

    print("=== Codewords ===")
    print("  " + ", ".join(repr(nth_codeword(i)) for i in range(1, 9)))
    for variant in VARIANT_INFO:
        code = build_code(plan, variant)
        m = code_metrics(code, source, spec, 0.0, 1.0)
        print(f"  {variant:14s} excess={m.excess_probability:.4f} cgf={m.cgf:.4f} "
              f"mean={m.mean_length:.4f} max={m.max_length}")
