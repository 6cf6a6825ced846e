"""Critical-point and trap analysis for quantum control landscapes."""

__version__ = "0.1.0"

from .errors import CertificateRefused, NotAKCPError, NumericalError, ValidationError
from .system import ControlField, ControlTask, QuantumSystem, kinematic_bounds, load_task, save_task
from .propagator import objective, propagate
from .landscape import gradient_discrete, gradient_kernel, hessian_kernel, quadratic_form, spectral_form
from .critical import classify, dcp_residual, kcp_residual, second_order_trap_numeric, trap_certificate

__all__ = [
    "CertificateRefused",
    "ControlField",
    "ControlTask",
    "NotAKCPError",
    "NumericalError",
    "QuantumSystem",
    "ValidationError",
    "classify",
    "dcp_residual",
    "gradient_discrete",
    "gradient_kernel",
    "hessian_kernel",
    "kcp_residual",
    "kinematic_bounds",
    "load_task",
    "objective",
    "propagate",
    "quadratic_form",
    "save_task",
    "second_order_trap_numeric",
    "spectral_form",
    "trap_certificate",
]
