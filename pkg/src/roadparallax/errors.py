"""Exception types shared across the package.

Everything raises subclasses of RoadParallaxError so callers (and the CLI)
can catch one base class and map it to a structured failure.
"""


class RoadParallaxError(Exception):
    """Base class for all domain errors raised by this package."""


# -- geometry ---------------------------------------------------------------

class NonPositiveDepth(RoadParallaxError):
    """A depth value that must be > 0 is zero or negative."""


class DegeneratePlane(RoadParallaxError):
    """Plane parameters are unusable (non-unit normal, h_c <= 0, ...)."""


class MapsToInfinity(RoadParallaxError):
    """Homography sends the point (numerically) to the line at infinity."""


class ParallaxSingularity(RoadParallaxError):
    """1 - gamma*T_z/h_c vanished; the residual-flow factor blows up."""


class GridMismatch(RoadParallaxError):
    """Two per-pixel maps that must share a grid have different shapes."""


# -- plane fitting ----------------------------------------------------------

class DegenerateInput(RoadParallaxError):
    """Too few or rank-deficient points for a plane fit."""


class NoConsensus(RoadParallaxError):
    """RANSAC found no candidate reaching the inlier quorum."""


# -- solver -----------------------------------------------------------------

class EpipoleDegeneracy(RoadParallaxError):
    """Point-wise solve is undefined at (or too close to) the epipole."""


class SingularRatio(RoadParallaxError):
    """The scalar gamma solve hit a vanishing denominator."""


class ZeroTranslation(RoadParallaxError):
    """Camera motion has no translation; parallax carries no signal."""


class PatchTooLarge(RoadParallaxError):
    """Matching patch + search window do not fit inside the image."""


# -- energy / attention / metrics -------------------------------------------

class ShapeMismatch(RoadParallaxError):
    """Tensor operands have incompatible shapes."""


class EmptyMask(RoadParallaxError):
    """An aggregate was requested over zero valid cells."""


class EmptyBucket(RoadParallaxError):
    """No cells fall inside the requested metric bucket."""


# -- imaging ----------------------------------------------------------------

class SingularHomography(RoadParallaxError):
    """Homography matrix is not invertible."""


# -- i/o --------------------------------------------------------------------

class IoFailure(RoadParallaxError):
    """Underlying OS-level read/write failed."""


class MissingFile(RoadParallaxError):
    """A required file of a dataset sample does not exist."""


class MalformedHeader(RoadParallaxError):
    """A binary/ASCII image or cloud file does not parse."""


class SizeMismatch(RoadParallaxError):
    """Declared dimensions disagree with the payload."""


class IncongruentGrids(RoadParallaxError):
    """Files of one dataset sample disagree about the pixel grid."""
