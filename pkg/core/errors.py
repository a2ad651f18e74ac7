"""
Exceptions raised by the GelMPM simulator
"""


class GelSimError(Exception):
    """Base class for all simulator errors"""


class ConfigError(GelSimError, ValueError):
    """Scene configuration failed validation"""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# Scene setup
class EmptyScene(GelSimError, ValueError):
    """Elastomer or indenter particle set is empty"""


class GridTooSmall(GelSimError, ValueError):
    """Particles come closer than the required margin to the grid extent"""


# Physics
class PhysicsFault(GelSimError):
    """Runtime failure of the MPM loop"""


class OutOfGrid(PhysicsFault):
    """A particle stencil left the background grid"""


class DegenerateF(PhysicsFault):
    """Deformation gradient is inverted or could not be decomposed"""


# Geometry IO
class ParseError(GelSimError, ValueError):
    """Point cloud file could not be parsed"""

    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}"
        if line_number is not None:
            location = f"{location}:{line_number}" if location else f"line {line_number}"
        super().__init__(f"{location}: {message}" if location else message)


class EmptyCloud(GelSimError, ValueError):
    """Point cloud contains no points"""


# Rendering
class NoSurface(GelSimError):
    """Simulation state has no top-surface particles to build a depth map from"""


class CropOutOfBounds(GelSimError, ValueError):
    """Crop window does not fit inside the depth map"""


class ShapeMismatch(GelSimError, ValueError):
    """Images to be compared differ in shape"""


# Bridge
class SessionNotInitialized(GelSimError):
    """Step command received before init"""


class NonMonotonicTime(GelSimError, ValueError):
    """Step command sim_time went backwards"""


class ProtocolError(GelSimError, ValueError):
    """Malformed or unknown bridge message"""

    def __init__(self, message, offending=None):
        self.offending = offending
        super().__init__(message)


# Dataset
class ManifestMismatch(GelSimError, ValueError):
    """Two dataset manifests do not index the same samples"""

    def __init__(self, missing_in_a, missing_in_b):
        self.missing_in_a = sorted(missing_in_a)
        self.missing_in_b = sorted(missing_in_b)
        parts = []
        if self.missing_in_a:
            parts.append(f"missing in first: {self.missing_in_a[:10]}")
        if self.missing_in_b:
            parts.append(f"missing in second: {self.missing_in_b[:10]}")
        super().__init__("Manifest mismatch, " + "; ".join(parts))
