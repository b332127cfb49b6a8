"""Shared hypothesis strategies and reference instances for the test modules."""

from hypothesis import strategies as st

from vl_lossy.vl_covering import DistortionSpec, uncovered_mass
from vl_lossy.vl_probability import FinitePmf, Weights

SOURCE = FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2))
HAMMING = DistortionSpec.hamming('abc')


@st.composite
def instances(draw, max_x=4, max_y=3):
    """Feasible (source, spec, D, epsilon) with distortions in [0, 1]."""
    n_x = draw(st.integers(2, max_x))
    n_y = draw(st.integers(2, max_y))
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=n_x, max_size=n_x).filter(lambda w: sum(w) > 0.05))
    d = draw(st.lists(st.lists(st.floats(0.0, 1.0), min_size=n_y, max_size=n_y),
                      min_size=n_x, max_size=n_x))
    spec = DistortionSpec(tuple(f'x{i}' for i in range(n_x)), tuple(f'y{j}' for j in range(n_y)), d)
    source = FinitePmf.from_array(spec.source_alphabet, Weights(tuple(weights)).normalize().probs)
    D = draw(st.sampled_from(sorted({v for row in d for v in row})))
    if uncovered_mass(source, spec, D) > 0.9:
        D = float(spec.d.min(axis=1).max())
    u = uncovered_mass(source, spec, D)
    epsilon = u + (1.0 - u) * draw(st.floats(0.0, 0.9))
    return source, spec, D, epsilon


t_values = st.sampled_from([0.1, 0.5, 1.0, 2.0, 8.0])
