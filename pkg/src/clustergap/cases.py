"""Small fixed matrices and filters used as worked examples and fixtures."""
import numpy as np

from .filters import RationalFilter

# Jordan form with eigenvalues -1/2 (simple) and 1/2 (one 2x2 block)
JORDAN_3X3 = np.array(
    [[-0.5, 0.0, 0.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]], dtype=complex
)

# Jordan form with eigenvalues 10 - i (simple) and 10 + i (one 2x2 block)
CAYLEY_3X3 = np.array(
    [[10 - 1j, 0.0, 0.0], [0.0, 10 + 1j, 1.0], [0.0, 0.0, 10 + 1j]], dtype=complex
)


def jordan_filter() -> RationalFilter:
    """``r(z) = -1 / (z^2 + 1)`` in partial fractions (poles ``+-i``).

    Maps both eigenvalues of :data:`JORDAN_3X3` to -4/5.
    """
    return RationalFilter(0.0, (1j, -1j), (-0.5j, 0.5j))
