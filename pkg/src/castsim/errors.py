"""Typed exceptions shared across the toolkit."""


class CastsimError(Exception):
    """Base class for all castsim errors."""


class UnilateralInputError(CastsimError):
    """A cable was asked to push (negative tension/force)."""


class SingularDecouplingError(CastsimError):
    """The decoupling feedback is singular at this configuration (b21 ~ 0)."""


class DegenerateGeometryError(CastsimError):
    """Geometry degenerate: coincident anchor, collinear calibration points,
    or a homogeneous scale too close to zero."""


class NeverLandsError(CastsimError):
    """Ballistic landing prediction has no real solution."""


class IntegrationDivergedError(CastsimError):
    """State became non-finite during integration."""


class ScenarioError(CastsimError):
    """Scenario file failed validation."""


class TraceMismatchError(CastsimError):
    """A trace file is malformed or does not belong to the given scenario."""
