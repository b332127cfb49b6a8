"""
Lossy Source Analyzer
======================
One object per (source, distortion) pair that computes G, builds codes,
evaluates them and reports the surrounding bounds.

Usage:
    from vl_lossy import LossySourceAnalyzer, FinitePmf, DistortionSpec
    analyzer = LossySourceAnalyzer(FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2)),
                                   DistortionSpec.hamming('abc'))
    analyzer.g(D=0.0, epsilon=0.25, t=1.0)
    # Output: 0.9000...
"""

import logging
from typing import Dict, Optional

from .vl_codec import Code, CodeMetrics, build_code, code_metrics, deterministic_bound
from .vl_covering import (
    CoveringPlan,
    DistortionSpec,
    Sandwich,
    feasibility,
    g_exact,
    g_quantity,
    greedy_cover,
    order_for_t,
    theorem2_bounds,
    theorem6_bounds,
)
from .vl_probability import Bits, FinitePmf, format_bits
from .vl_ratedistortion import RdSolution, rd_solution

logger = logging.getLogger(__name__)


class LossySourceAnalyzer:
    """Main analyzer class that ties the covering, codec and rate-distortion modules together."""

    def __init__(self, source: FinitePmf, spec: DistortionSpec, verbose: bool = False):
        self.source = source
        self.spec = spec
        self.verbose = verbose
        self._plans: Dict[tuple, CoveringPlan] = {}

    def _trace(self, tag: str, message: str, *args) -> None:
        if self.verbose:
            logger.info("[%s] " + message, tag, *args)

    def feasible(self, D: float, epsilon: float) -> bool:
        return feasibility(self.source, self.spec, D, epsilon)

    def plan(self, D: float, epsilon: float) -> CoveringPlan:
        """Greedy plan at (D, epsilon), cached per level."""
        key = (float(D), float(epsilon))
        if key not in self._plans:
            self._plans[key] = greedy_cover(self.source, self.spec, D, epsilon)
        return self._plans[key]

    def g(self, D: float, epsilon: float, t: float) -> Bits:
        value = g_quantity(self.source, self.spec, D, epsilon, order_for_t(t))
        self._trace('G', "D=%g eps=%g t=%g -> %s", D, epsilon, t, format_bits(value))
        return value

    def g_exact(self, D: float, epsilon: float, t: float) -> Bits:
        value = g_exact(self.source, self.spec, D, epsilon, order_for_t(t))
        self._trace('G', "exact D=%g eps=%g t=%g -> %s", D, epsilon, t, format_bits(value))
        return value

    def code(self, D: float, epsilon: float, variant: str = 'stochastic') -> Code:
        code = build_code(self.plan(D, epsilon), variant)
        self._trace('CODE', "%s code with %d codewords", code.variant, len(code.decoder))
        return code

    def metrics(self, code: Code, D: float, t: float) -> CodeMetrics:
        m = code_metrics(code, self.source, self.spec, D, t)
        self._trace('CODE', "%s: excess=%s cgf=%s mean=%s max=%d", code.variant,
                    format_bits(m.excess_probability), format_bits(m.cgf),
                    format_bits(m.mean_length), m.max_length)
        return m

    def bounds(self, D: float, epsilon: float, t: float) -> Dict[str, Sandwich]:
        """One-shot sandwiches for general codes and for prefix codes."""
        return {
            'theorem2': theorem2_bounds(self.source, self.spec, D, epsilon, t),
            'theorem6': theorem6_bounds(self.source, self.spec, D, epsilon, t),
        }

    def rd(self, D: float) -> RdSolution:
        solution = rd_solution(self.source, self.spec, D)
        self._trace('RD', "D=%g R=%s lambda*=%s V=%s", D, format_bits(solution.R),
                    format_bits(solution.lambda_star), format_bits(solution.V))
        return solution

    def summary(self, D: float, epsilon: float, t: float) -> dict:
        """
        Everything known about one (D, epsilon, t) point, JSON-ready.

        Infeasible points carry only the feasibility flag and G = "inf".
        """
        out = {'D': D, 'epsilon': epsilon, 't': t, 'alpha': order_for_t(t),
               'feasible': self.feasible(D, epsilon)}
        if not out['feasible']:
            out['G'] = 'inf'
            return out
        plan = self.plan(D, epsilon)
        out['G'] = self.g(D, epsilon, t)
        out['plan'] = plan.to_json()
        bounds = self.bounds(D, epsilon, t)
        out['bounds'] = {name: {'lower': float(b.lower), 'upper': float(b.upper),
                                'g_source': b.g_source} for name, b in bounds.items()}
        if t > 0.0:
            out['codes'] = {}
            for variant in ('stochastic', 'deterministic', 'prefix'):
                out['codes'][variant] = self.metrics(self.code(D, epsilon, variant), D, t)._asdict()
            out['deterministic_bound'] = deterministic_bound(plan, t)._asdict()
        return out


def analyze(source: FinitePmf, spec: DistortionSpec, D: float, epsilon: float, t: float,
            verbose: bool = False, analyzer: Optional[LossySourceAnalyzer] = None) -> dict:
    """
    Convenience function to summarize one operating point.

    Args:
        source: Source distribution.
        spec: Distortion measure.
        D: Distortion level.
        epsilon: Allowed excess probability.
        t: CGF parameter (0 gives the Shannon limit and skips the code metrics).
        verbose: Log each computed quantity.
        analyzer: Reuse an existing analyzer and its cached plans.

    Returns:
        The analyzer's summary dict.
    """
    analyzer = analyzer or LossySourceAnalyzer(source, spec, verbose=verbose)
    return analyzer.summary(D, epsilon, t)


if __name__ == '__main__':
    import json

    logging.basicConfig(level=logging.INFO, format='%(message)s')
    src = FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2))
    print(json.dumps(analyze(src, DistortionSpec.hamming('abc'), 0.0, 0.25, 1.0, verbose=True),
                     indent=2))
