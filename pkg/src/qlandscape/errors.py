"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class NumericalError(RuntimeError):
    """An internal numerical consistency check failed."""


class NotAKCPError(ValidationError):
    """The spectral Hessian form was requested away from a kinematic critical point."""


class CertificateRefused(ValidationError):
    """The trap certificate cannot be decided for this instance.

    ``reason`` is a stable machine-readable code such as
    ``DEGENERATE_DRESSED_SPECTRUM`` or ``LAMBDA_TIE``.
    """

    def __init__(self, reason: str, message: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)
