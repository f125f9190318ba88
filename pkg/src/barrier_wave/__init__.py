"""Large-exponent defocusing wave equation toolkit.

Finite-difference solver for ``phi_tt = phi_xx - |phi|^(p-1) phi``, the
characteristic construction of its large-p limit with reflection at the
barriers +-1, closed-form reference solutions, and property checks.
"""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
