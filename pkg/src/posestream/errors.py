"""Exception taxonomy shared across the package.

Subclassing the closest builtin keeps call sites free to catch either the
specific class or the generic one.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad file contents, inconsistent sizes, missing metadata."""


class DomainError(ValueError):
    """Numeric input outside an operation's mathematical domain."""


class BehindCameraError(DomainError):
    """3D point with non-positive depth handed to a projection."""


class StructuralError(ValueError):
    """Shape, length, or count mismatch between paired inputs."""


class ProtocolError(ValueError):
    """Malformed wire bytes on a transport boundary."""


class EncodeError(ValueError):
    """Ground-truth pose cannot be represented on the anchor grid."""


class BackendError(RuntimeError):
    """Inference backend failed to load or produced outputs off-contract."""


class InstrumentationError(RuntimeError):
    """Latency trace misuse: duplicate or out-of-order stage recording."""
