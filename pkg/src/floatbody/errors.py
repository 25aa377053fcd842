"""Exception hierarchy shared by the pipeline stages.

Every class carries an ``exit_code`` so the command line front end can map a
failure class to a process status without a lookup table of its own.
"""


class FloatBodyError(Exception):
    exit_code = 1


class ConfigError(FloatBodyError):
    exit_code = 2


class ProfileError(FloatBodyError):
    """A curvature profile violates the envelope constraints."""

    exit_code = 3


class GeometryError(FloatBodyError):
    """A geometric quantity left its admissible range (e.g. Q <= 0)."""

    exit_code = 4


class SolverStall(FloatBodyError):
    """The boundary matrix became (nearly) singular while marching."""

    exit_code = 5

    def __init__(self, message, chi=None, det=None, partial=None):
        super().__init__(message)
        self.chi = chi
        self.det = det
        self.partial = partial


class NumericError(FloatBodyError):
    exit_code = 6


class InvalidShapeError(FloatBodyError):
    exit_code = 7


class VerificationFailed(FloatBodyError):
    exit_code = 8
