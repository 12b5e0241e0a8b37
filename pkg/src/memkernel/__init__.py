"""Memory kernels of an ohmic oscillator bath, their Volterra convolutions and
diagnostics of the Markov approximation."""

__version__ = "0.1.0"

from .errors import DomainError, NumericError
from .kernels import (KINDS, NO_DAMPING, KernelEval, MenskyDamping, OhmicBath,
                      eval_kernel, friction_integral, kernel_table, kernel_time_scale,
                      markov_dissipation_coefficients, markov_weight)
from .convolution import (ConvolutionResult, ErrorReport, TimeGrid, Trajectory,
                          convolution_error_report, dissipative_pair_convolution,
                          markov_convolve, volterra_convolve)
from .influence import (ExponentParts, PathPair, dissipative_phase, gamma_exponent,
                        standard_exponent)
from .relaxation import (DecayAnalysis, FrictionKernel, OscillatorSpec, analyze_decay,
                         simulate)
from .audit import REFERENCE_PRESET, AuditInput, AuditReport, run_audit

__all__ = [
    "DomainError", "NumericError", "KINDS", "NO_DAMPING", "KernelEval", "MenskyDamping",
    "OhmicBath", "eval_kernel", "friction_integral", "kernel_table", "kernel_time_scale",
    "markov_dissipation_coefficients", "markov_weight", "ConvolutionResult",
    "ErrorReport", "TimeGrid", "Trajectory", "convolution_error_report",
    "dissipative_pair_convolution", "markov_convolve", "volterra_convolve",
    "ExponentParts", "PathPair", "dissipative_phase", "gamma_exponent",
    "standard_exponent", "DecayAnalysis", "FrictionKernel", "OscillatorSpec",
    "analyze_decay", "simulate", "REFERENCE_PRESET", "AuditInput", "AuditReport",
    "run_audit",
]
