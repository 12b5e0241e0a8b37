"""Self-consistency audit of the measurement-constrained bath (CGS units).

The Markov limit becomes objective only if ``eta < gamma < omega_cut``: the
bath correlation time ``1/omega_cut`` must be shorter than the time
``1/gamma`` over which a single bath oscillator becomes unpredictable, which
in turn must be shorter than the relaxation time ``1/eta``.  The audit checks
this ordering and reports the constraint strength
``k(w) = (gamma m_B / hbar)(w - i gamma/2)`` that it requires.
"""

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .errors import DomainError
from .kernels import MenskyDamping
from .util import dumps

HBAR_CGS = 1.054571817e-27  # erg s
WARN_RATIO = 0.1


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR_CGS


CGS = PhysicalConstants()


@dataclass(frozen=True)
class AuditInput:
    """Rates in 1/s and bath-oscillator mass in g."""

    eta: float
    gamma: float
    omega_cut: float
    mass_b: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value!r}")


REFERENCE_PRESET = AuditInput(eta=1e9, gamma=1e10, omega_cut=1e12, mass_b=1e-24)
PRESETS = {"paper": REFERENCE_PRESET}


class Ordering(NamedTuple):
    passed: bool
    gamma_over_eta: float
    omega_over_gamma: float


@dataclass(frozen=True)
class AuditReport:
    inputs: dict
    ordering_pass: bool
    margins: tuple
    k_real: float
    k_imag: float
    flags: list = field(default_factory=list)
    verdict: str = ""

    def to_dict(self):
        return {"inputs": dict(self.inputs), "ordering_pass": self.ordering_pass,
                "margins": list(self.margins), "k_real": self.k_real,
                "k_imag": self.k_imag, "flags": list(self.flags),
                "verdict": self.verdict}

    def to_json(self):
        return dumps(self.to_dict())


def ordering_check(inp: AuditInput) -> Ordering:
    """Strict ``eta < gamma < omega_cut`` with margins ``gamma/eta`` and ``omega_cut/gamma``."""
    passed = inp.eta < inp.gamma < inp.omega_cut
    return Ordering(passed, inp.gamma / inp.eta, inp.omega_cut / inp.gamma)


def mensky_strength(omega, gamma, mass_b, constants: PhysicalConstants = CGS) -> complex:
    """Constraint strength ``k(omega)`` in cm^-2 s^-1."""
    if omega < 0:
        raise DomainError("omega must be non-negative")
    return complex(MenskyDamping(gamma).strength(omega, mass_b, constants.hbar))


class NaturalUnits(NamedTuple):
    """Time unit ``1/omega_cut``, mass unit ``m_B``, action unit ``hbar``."""

    time: float
    mass: float
    length: float

    @classmethod
    def for_bath(cls, omega_cut, mass_b, constants: PhysicalConstants = CGS):
        return cls(1.0 / omega_cut, mass_b, (constants.hbar / (mass_b * omega_cut)) ** 0.5)

    def strength_to_natural(self, k_cgs):
        return k_cgs * self.length**2 * self.time

    def strength_from_natural(self, k_nat):
        return k_nat / (self.length**2 * self.time)


def perturbative_flags(gamma, omega_cut, omega_0=None):
    """Validity flags for the first-order-in-gamma kernels.

    Returns a list of ``{"level", "code", "message"}`` dicts; ``WARN`` when
    ``gamma / omega_cut`` exceeds 0.1.
    """
    if gamma < 0 or omega_cut <= 0:
        raise DomainError("need gamma >= 0 and omega_cut > 0")
    flags = []
    if gamma == 0:
        flags.append({"level": "NOTE", "code": "gamma_zero",
                      "message": "gamma = 0: the fluctuation-kernel time scale vanishes "
                                 "and the Markov limit is not rigorous"})
        return flags
    ratio = gamma / omega_cut
    if ratio > WARN_RATIO:
        flags.append({"level": "WARN", "code": "gamma_over_omega_cut",
                      "message": f"gamma/omega_cut = {ratio:.3g} > {WARN_RATIO}: "
                                 "first-order expansion in gamma is not valid"})
    else:
        flags.append({"level": "INFO", "code": "gamma_over_omega_cut",
                      "message": f"gamma/omega_cut = {ratio:.3g}"})
    if omega_0 is not None:
        flags.append({"level": "INFO", "code": "gamma_over_omega_0",
                      "message": f"gamma/omega_0 = {gamma / omega_0:.3g}"})
    return flags


def _verdict(inp, order, k_real, flags, constants):
    if not order.passed:
        return (f"inconsistent: eta < gamma < omega_cut fails "
                f"(gamma/eta = {order.gamma_over_eta:.3g}, "
                f"omega_cut/gamma = {order.omega_over_gamma:.3g}); "
                "the constraint cannot make the Markov limit objective")
    k_floor = inp.eta * inp.mass_b * inp.omega_cut / constants.hbar
    text = (f"not self-consistent: the ordering holds with gamma/eta = "
            f"{order.gamma_over_eta:.3g} and omega_cut/gamma = {order.omega_over_gamma:.3g}, "
            f"but requires Re k(omega_cut) = {k_real:.3g} cm^-2 s^-1 "
            f"(at least {k_floor:.3g} for the smallest admissible gamma = eta), "
            "an unphysically large correction to the bath dynamics")
    if any(f["level"] == "WARN" for f in flags):
        text += "; gamma is also outside the first-order expansion in gamma/omega_cut"
    return text


def run_audit(inp: AuditInput = REFERENCE_PRESET, constants: PhysicalConstants = CGS,
              omega_0=None) -> AuditReport:
    """Full audit; ``k`` is evaluated at the cutoff frequency."""
    order = ordering_check(inp)
    k = mensky_strength(inp.omega_cut, inp.gamma, inp.mass_b, constants)
    flags = perturbative_flags(inp.gamma, inp.omega_cut, omega_0)
    flags.append({"level": "INFO", "code": "timescale_identification",
                  "message": "correlation time tau_M = 1/omega_cut, "
                             "predictability time tau_S = 1/gamma (identification "
                             "taken from the model, not derived)"})
    inputs = {"eta": inp.eta, "gamma": inp.gamma, "omega_cut": inp.omega_cut,
              "mass_b": inp.mass_b, "hbar": constants.hbar}
    return AuditReport(inputs, order.passed,
                       (order.gamma_over_eta, order.omega_over_gamma),
                       k.real, k.imag, flags,
                       _verdict(inp, order, k.real, flags, constants))
