"""Exception hierarchy.

Every error raised for bad inputs or failed numerics derives from
:class:`BarrierWaveError`, which the command line maps to exit code 1.
"""


class BarrierWaveError(Exception):
    """Base class for domain errors."""


class LatticeError(BarrierWaveError, ValueError):
    """Lattice too small, mismatched shapes, or a point outside a region."""


class QuadratureError(BarrierWaveError):
    """Non-finite integrand samples or a failed adaptive quadrature."""


class BlowUpError(BarrierWaveError):
    """Solver amplitude exceeded the blow-up guard or became non-finite."""

    def __init__(self, message, t=None, max_abs=None):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs


class EnergyDriftError(BarrierWaveError):
    """Relative Hamiltonian drift beyond tolerance; the step is too large."""


class DomainViolation(BarrierWaveError, ValueError):
    """An argument falls outside the domain of a closed-form expression."""


class NondegeneracyError(BarrierWaveError):
    """Initial data has too many zero components of a null derivative."""


class CoarseLatticeError(BarrierWaveError):
    """Barrier overshoot after a double flip exceeds the lattice tolerance."""


class DefectStraddleError(BarrierWaveError):
    """A cell touching both signs carries a non-negligible parallelogram mass."""


class ConfigError(BarrierWaveError):
    """A configuration file failed validation.

    Parameters
    ----------
    problems : list of (str, str)
        Pairs of (key, message), one per offending field.
    """

    what = "configuration"

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{k}: {m}" for k, m in self.problems)
        super().__init__(f"invalid {self.what}: {text}")


class ScenarioError(ConfigError):
    """Scenario file failed validation."""

    what = "scenario"
