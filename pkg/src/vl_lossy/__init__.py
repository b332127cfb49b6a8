"""
vl-lossy: Variable-Length Lossy Coding with Excess Distortion
==============================================================
Greedy covering codes whose codeword-length CGF is governed by a Renyi
entropy G of an induced output distribution, the matching converse bounds,
rate-distortion tools for the second-order comparison, and an executable
verification suite.

Usage:
    from vl_lossy import analyze, FinitePmf, DistortionSpec
    result = analyze(FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2)),
                     DistortionSpec.hamming('abc'), D=0.0, epsilon=0.25, t=1.0)

    from vl_lossy import LossySourceAnalyzer
    analyzer = LossySourceAnalyzer(source, spec)
    analyzer.g(0.0, 0.25, 1.0)
"""

from .vl_analyzer import LossySourceAnalyzer, analyze
from .vl_blocklength import (
    asymptotic_table,
    block_sandwich,
    build_product,
    deterministic_correction_sweep,
    normalized_g,
    sweep_rows,
    theorem3_bounds,
)
from .vl_codec import (
    Code,
    CodeMetrics,
    build_code,
    build_deterministic_code,
    build_prefix_code,
    build_stochastic_code,
    code_metrics,
    deterministic_bound,
    kraft_sum,
    nth_codeword,
    prefix_codeword,
    simulate,
)
from .vl_covering import (
    CoveringPlan,
    DistortionSpec,
    feasibility,
    g_exact,
    g_quantity,
    greedy_cover,
    induced_output_distribution,
    is_laminar,
    theorem2_bounds,
    theorem6_bounds,
)
from .vl_errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleError,
    InstanceTooLargeError,
    InvalidComparisonError,
    InvalidDistributionError,
    InvalidParameterError,
    LossyCodingError,
    PreconditionError,
    UnknownSymbolError,
)
from .vl_probability import (
    UNBOUNDED,
    FinitePmf,
    Weights,
    majorizes,
    renyi_entropy,
    schur_concavity_witness,
    shannon_entropy,
)
from .vl_ratedistortion import (
    RdSolution,
    d_tilted_renyi_entropy,
    gaussian_approx,
    h_d_epsilon_bruteforce,
    r_d_epsilon,
    rd_at_distortion,
    rd_fixed_slope,
    rd_solution,
    theorem1_check,
    zero_rate_slope,
)
from .vl_verify import BoundReport, run_suite

__version__ = "1.0.0"
__all__ = [
    'LossySourceAnalyzer',
    'analyze',
    'FinitePmf',
    'Weights',
    'UNBOUNDED',
    'shannon_entropy',
    'renyi_entropy',
    'majorizes',
    'schur_concavity_witness',
    'DistortionSpec',
    'CoveringPlan',
    'feasibility',
    'greedy_cover',
    'induced_output_distribution',
    'g_quantity',
    'g_exact',
    'is_laminar',
    'theorem2_bounds',
    'theorem6_bounds',
    'Code',
    'CodeMetrics',
    'nth_codeword',
    'prefix_codeword',
    'build_code',
    'build_stochastic_code',
    'build_deterministic_code',
    'build_prefix_code',
    'code_metrics',
    'kraft_sum',
    'deterministic_bound',
    'simulate',
    'RdSolution',
    'rd_fixed_slope',
    'rd_at_distortion',
    'rd_solution',
    'zero_rate_slope',
    'd_tilted_renyi_entropy',
    'r_d_epsilon',
    'h_d_epsilon_bruteforce',
    'gaussian_approx',
    'theorem1_check',
    'build_product',
    'normalized_g',
    'theorem3_bounds',
    'block_sandwich',
    'asymptotic_table',
    'sweep_rows',
    'deterministic_correction_sweep',
    'BoundReport',
    'run_suite',
    'LossyCodingError',
    'InvalidParameterError',
    'InvalidDistributionError',
    'InvalidComparisonError',
    'UnknownSymbolError',
    'InfeasibleError',
    'DomainError',
    'ConvergenceError',
    'InstanceTooLargeError',
    'PreconditionError',
    'ConfigError',
]
