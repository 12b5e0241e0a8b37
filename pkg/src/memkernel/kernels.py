"""Memory kernels of the zero-temperature ohmic bath and their scalar weights.

Four kernels are provided, all with ohmic coupling up to a sharp cutoff
``omega_cut``::

    R        (eta/pi) * int_0^W  w cos(w tau) dw
    I       -(eta/pi) * int_0^W  w sin(w tau) dw
    R_damped R(tau) * exp(-gamma tau)
    I_damped (eta/pi) * d/dtau [ sin(W tau)/tau * exp(-gamma tau) ]

The damped variants come from a continuous-measurement constraint of rate
``gamma`` acting on every bath oscillator.  ``I`` at finite cutoff is kept in
its regular closed form; its infinite-cutoff limit ``eta * delta'(tau)`` only
enters through the Markov coefficients.
"""

import csv
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .quadrature import integrate_panels, panel_edges
from .util import fmt_float

KINDS = ("R", "I", "R_damped", "I_damped")
METHODS = ("closed", "quadrature")

# below this value of omega_cut * tau the closed forms switch to Taylor series
SERIES_CUTOFF = 1e-3
# W tau cos(W tau) - sin(W tau) cancels as (W tau)^3, so the dissipation
# kernel keeps its series further out
SERIES_CUTOFF_I = 0.1
# (x cos x - sin x) / x^2 = sum_n (-1)^n 2n x^(2n - 1) / (2n + 1)!, n = 1..6
_I_COEFFS = np.array([(-1) ** n * 2 * n / math.factorial(2 * n + 1) for n in range(6, 0, -1)])


@dataclass(frozen=True)
class OhmicBath:
    """Ohmic bath with friction ``eta``, cutoff ``omega_cut`` and mode mass ``mass_b``."""

    eta: float
    omega_cut: float
    mass_b: float = 1.0

    def __post_init__(self):
        for name in ("eta", "omega_cut", "mass_b"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    def spectral_density(self, omega):
        """J(w) = eta * w below the cutoff, zero above."""
        omega = np.asarray(omega, dtype=float)
        return np.where((omega >= 0) & (omega <= self.omega_cut), self.eta * omega, 0.0)


@dataclass(frozen=True)
class MenskyDamping:
    """Measurement-constraint rate ``gamma`` applied to every bath oscillator."""

    gamma: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise DomainError(f"gamma must be non-negative and finite, got {self.gamma!r}")

    def perturbative(self, bath: OhmicBath) -> bool:
        """True when gamma is small enough for first-order-in-gamma results."""
        return self.gamma < 0.1 * bath.omega_cut

    def strength(self, omega, mass_b, hbar):
        """Complex constraint strength ``(gamma m_B / hbar) (omega - i gamma / 2)``."""
        return self.gamma * mass_b / hbar * (np.asarray(omega) - 0.5j * self.gamma)


NO_DAMPING = MenskyDamping(0.0)


@dataclass(frozen=True)
class KernelEval:
    """Kernel values sampled at increasing, non-negative times."""

    kind: str
    method: str
    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.ndim != 1 or taus.shape != values.shape:
            raise DomainError("taus and values must be 1-d arrays of equal length")
        if taus.size and (taus[0] < 0 or np.any(np.diff(taus) <= 0)):
            raise DomainError("taus must be non-negative and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("kernel values must be finite")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)


class DissipationCoefficients(NamedTuple):
    position: float
    velocity: float


class TimeScale(NamedTuple):
    value: float
    exact_limit: bool


def _check_kind(kind, damping):
    if kind not in KINDS:
        raise DomainError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    if kind in ("R", "I") and damping.gamma != 0:
        raise DomainError(f"kernel {kind} is undamped; use {kind}_damped for gamma > 0")


def _sin_over_tau(tau, omega_cut):
    return omega_cut * np.sinc(omega_cut * tau / np.pi)


def _alpha_r(tau, eta, omega_cut):
    x = omega_cut * tau
    small = x < SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    series = omega_cut**2 * (0.5 - xs**2 / 8 + xs**4 / 144)
    tb = np.where(small, 1.0, tau)
    full = omega_cut * np.sin(x) / tb - 2 * np.sin(0.5 * x) ** 2 / tb**2
    return eta / np.pi * np.where(small, series, full)


def _alpha_i(tau, eta, omega_cut):
    x = omega_cut * tau
    small = x < SERIES_CUTOFF_I
    xs = np.where(small, x, 0.0)
    series = omega_cut**2 * xs * np.polyval(_I_COEFFS, xs**2)
    tb = np.where(small, 1.0, tau)
    full = omega_cut * np.cos(x) / tb - np.sin(x) / tb**2
    return eta / np.pi * np.where(small, series, full)


def _closed(kind, tau, bath, gamma):
    eta, w = bath.eta, bath.omega_cut
    if kind == "R":
        return _alpha_r(tau, eta, w)
    if kind == "I":
        return _alpha_i(tau, eta, w)
    decay = np.exp(-gamma * tau)
    if kind == "R_damped":
        return _alpha_r(tau, eta, w) * decay
    return (_alpha_i(tau, eta, w) - gamma * eta / np.pi * _sin_over_tau(tau, w)) * decay


def _quadrature_one(kind, tau, bath, gamma):
    eta, w = bath.eta, bath.omega_cut
    decay = math.exp(-gamma * tau)
    if kind in ("R", "R_damped"):
        def f(om):
            return om * np.cos(om * tau)
    else:
        def f(om):
            return -om * np.sin(om * tau) - gamma * np.cos(om * tau)
    # split at every zero of sin and cos in omega
    spacing = 0.5 * np.pi / tau if tau > 0 else np.inf
    edges = panel_edges(0.0, w, spacing)
    scale = w * (w + gamma)
    value, _ = integrate_panels(f, edges, epsabs=1e-14 * scale, epsrel=1e-13)
    return eta / np.pi * value * decay


def eval_kernel(kind, tau, bath: OhmicBath, damping: MenskyDamping = NO_DAMPING,
                method="closed"):
    """Evaluate a memory kernel at lag(s) ``tau``.

    Parameters
    ----------
    kind : {'R', 'I', 'R_damped', 'I_damped'}
    tau : float or array_like
        Non-negative lag(s).
    bath : OhmicBath
    damping : MenskyDamping
        Must have ``gamma == 0`` for the undamped kinds.
    method : {'closed', 'quadrature'}
        ``closed`` uses the analytic expressions (Taylor series for
        small ``omega_cut * tau``); ``quadrature`` integrates the frequency
        representation panel by panel.

    Returns
    -------
    float or ndarray
        Same shape as ``tau``.
    """
    _check_kind(kind, damping)
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    t = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("tau must be finite and non-negative")
    if method == "closed":
        out = _closed(kind, t, bath, damping.gamma)
    else:
        flat = [_quadrature_one(kind, float(x), bath, damping.gamma) for x in t.ravel()]
        out = np.array(flat).reshape(t.shape)
    return float(out) if out.ndim == 0 else out


def kernel_sampler(kind, bath, damping=NO_DAMPING):
    """Closed-form kernel as a one-argument callable of ``tau``."""
    _check_kind(kind, damping)
    return functools.partial(eval_kernel, kind, bath=bath, damping=damping)


def kernel_table(kind, taus, bath, damping=NO_DAMPING, method="closed") -> KernelEval:
    taus = np.asarray(taus, dtype=float)
    return KernelEval(kind, method, taus, eval_kernel(kind, taus, bath, damping, method))


def _numeric_tau_integral(kind, bath, damping, horizon):
    w, g = bath.omega_cut, damping.gamma
    if np.isinf(horizon):
        # exp(-g T) * (w / g) < e^-40 bounds the discarded tail
        horizon = (40.0 + math.log(max(1.0, w / g))) / g
    edges = panel_edges(0.0, horizon, 0.5 * np.pi / w)
    f = functools.partial(_closed, kind, bath=bath, gamma=g)
    value, _ = integrate_panels(f, edges, epsabs=1e-14 * bath.eta * w, epsrel=1e-12)
    return value


def markov_weight(kind, bath: OhmicBath, damping: MenskyDamping = NO_DAMPING,
                  horizon=np.inf, method="closed"):
    """Integral of a kernel over ``[0, horizon]``.

    This is the factor multiplying ``f(t)`` when a memory convolution is
    replaced by its Markov form.  Infinite horizons are always taken from
    closed antiderivatives; ``method='quadrature'`` integrates numerically
    and needs either a finite horizon or ``gamma > 0``.
    """
    _check_kind(kind, damping)
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon!r}")
    eta, w, g = bath.eta, bath.omega_cut, damping.gamma
    infinite = np.isinf(horizon)

    if method == "quadrature":
        if infinite and g == 0:
            raise DomainError("the infinite-horizon integral is only conditionally "
                              "convergent at gamma = 0; use method='closed'")
        return _numeric_tau_integral(kind, bath, damping, horizon)
    if method != "closed":
        raise DomainError(f"unknown method {method!r}")

    if kind in ("R", "R_damped") and g == 0:
        if infinite:
            return 0.0
        return 2 * eta / np.pi * math.sin(0.5 * w * horizon) ** 2 / horizon
    if kind == "R_damped":
        if infinite:
            return kernel_time_scale(bath, damping).value
        return _numeric_tau_integral(kind, bath, damping, horizon)
    # I and I_damped share the antiderivative (eta/pi) sin(W t)/t exp(-g t)
    if infinite:
        return -eta * w / np.pi
    boundary = math.sin(w * horizon) / horizon * math.exp(-g * horizon)
    return eta / np.pi * (boundary - w)


def friction_integral(omega_cut, gamma, method="closed"):
    """``int_0^inf sin(omega_cut tau)/tau * exp(-gamma tau) dtau``.

    Closed form ``arctan(omega_cut / gamma)``, ``pi/2`` at ``gamma = 0``.
    """
    if method == "closed":
        return math.atan2(omega_cut, gamma)
    if gamma <= 0:
        raise DomainError("numeric friction integral needs gamma > 0")
    horizon = (40.0 + math.log(max(1.0, omega_cut / gamma))) / gamma
    edges = panel_edges(0.0, horizon, np.pi / omega_cut)

    def f(t):
        return _sin_over_tau(t, omega_cut) * np.exp(-gamma * t)

    value, _ = integrate_panels(f, edges, epsabs=1e-15, epsrel=1e-13)
    return value


def markov_dissipation_coefficients(bath: OhmicBath,
                                    damping: MenskyDamping = NO_DAMPING):
    """Markov coefficients of the damped dissipation convolution.

    Returns ``(position, velocity)`` with ``position = -eta W / pi`` and
    ``velocity = (eta/pi) arctan(W / gamma)``, which equals ``eta/2`` at
    ``gamma = 0``.
    """
    position = -bath.eta * bath.omega_cut / np.pi
    velocity = bath.eta / np.pi * friction_integral(bath.omega_cut, damping.gamma)
    return DissipationCoefficients(position, velocity)


def kernel_time_scale(bath: OhmicBath, damping: MenskyDamping) -> TimeScale:
    """Integral of the damped fluctuation kernel,
    ``(eta / 2 pi) gamma ln((gamma^2 + W^2) / gamma^2)``.

    At ``gamma = 0`` the value is the exact limit 0, flagged by
    ``exact_limit=True``.
    """
    g = damping.gamma
    if g == 0:
        return TimeScale(0.0, True)
    ratio = bath.omega_cut / g
    return TimeScale(bath.eta / (2 * np.pi) * g * math.log1p(ratio * ratio), False)


def write_kernel_csv(fh, table: KernelEval, bath: OhmicBath,
                     damping: MenskyDamping = NO_DAMPING):
    """Write ``tau,value,kind,method,eta,omega_cut,gamma`` rows to an open file."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["tau", "value", "kind", "method", "eta", "omega_cut", "gamma"])
    for tau, value in zip(table.taus, table.values):
        writer.writerow([fmt_float(tau), fmt_float(value), table.kind, table.method,
                         fmt_float(bath.eta), fmt_float(bath.omega_cut),
                         fmt_float(damping.gamma)])
