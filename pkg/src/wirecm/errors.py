"""Exception types shared across the package.

Two broad families matter to callers (and to the CLI exit-code mapping):
input/validation problems, and numerical checks that fail on structurally
valid input (ill conditioning, indefinite operators, violated identities).
"""


class ValidationError(ValueError):
    """Invalid input: bad geometry, mismatched references, malformed config."""


class SingularKernelError(ValidationError):
    """Kernel evaluated at zero separation without a regularizing scheme."""


class BundleFormatError(ValidationError):
    """A modal-basis bundle file is corrupt, truncated, or wrong version."""


class NumericalError(RuntimeError):
    """A numerical health check failed: conditioning, definiteness, residuals."""
