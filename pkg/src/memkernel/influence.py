"""Influence-functional exponents on discretised path pairs.

The influence functional is written ``exp(-real_part - 1j * imag_part)``;
``real_part`` controls decoherence and ``imag_part`` the dissipative phase.
All time integrals use the trapezoid rule on the shared grid.
"""

from dataclasses import dataclass

import numpy as np

from .convolution import (Trajectory, _same_grid, dissipative_pair_convolution,
                          trapezoid_convolve)
from .errors import DomainError
from .kernels import NO_DAMPING, MenskyDamping, OhmicBath, eval_kernel

IMAG_KERNELS = ("derivative", "product")


@dataclass(frozen=True)
class PathPair:
    q1: Trajectory
    q2: Trajectory

    def __post_init__(self):
        _same_grid(self.q1.grid, self.q2.grid)
        if not (np.all(np.isfinite(self.q1.q)) and np.all(np.isfinite(self.q2.q))):
            raise DomainError("path samples must be finite")

    @property
    def grid(self):
        return self.q1.grid

    def swapped(self):
        return PathPair(self.q2, self.q1)


@dataclass(frozen=True)
class ExponentParts:
    real_part: float
    imag_part: float
    hbar: float
    gamma: float = 0.0
    total_time: float = float("nan")

    def __post_init__(self):
        if not (np.isfinite(self.real_part) and np.isfinite(self.imag_part)):
            raise DomainError("exponent parts must be finite")

    @property
    def decoherence_factor(self):
        """Magnitude of the influence functional, ``exp(-real_part)``."""
        return float(np.exp(-self.real_part))

    def to_dict(self):
        return {"real_part": self.real_part, "imag_part": self.imag_part,
                "hbar": self.hbar, "gamma": self.gamma, "T": self.total_time}


def _trapz(values, dt):
    return dt * (values.sum() - 0.5 * (values[0] + values[-1]))


def standard_exponent(paths: PathPair, bath: OhmicBath, hbar=1.0) -> ExponentParts:
    """Exponents of the undamped influence functional.

    ``real_part = (1/hbar) int (q1 - q2) I_R`` with ``I_R`` the convolution of
    the fluctuation kernel against ``q1 - q2``; ``imag_part`` likewise with the
    dissipation kernel convolved against ``q1 + q2``.
    """
    grid = paths.grid
    diff = paths.q1.q - paths.q2.q
    total = paths.q1.q + paths.q2.q
    t = grid.times
    i_r = trapezoid_convolve(eval_kernel("R", t, bath), diff, grid.dt)
    i_i = trapezoid_convolve(eval_kernel("I", t, bath), total, grid.dt)
    return ExponentParts(_trapz(diff * i_r, grid.dt) / hbar,
                         _trapz(diff * i_i, grid.dt) / hbar,
                         hbar, 0.0, grid.t_end)


def damped_kernels(bath, damping, times, imag_kernel="derivative"):
    """Samples of the damped fluctuation and dissipation kernels.

    ``imag_kernel='derivative'`` differentiates ``sin(W tau)/tau e^{-gamma tau}``;
    ``'product'`` multiplies the undamped kernel by ``e^{-gamma tau}``.  The two
    differ at first order in gamma.
    """
    k_r = eval_kernel("R_damped", times, bath, damping)
    if imag_kernel == "derivative":
        k_i = eval_kernel("I_damped", times, bath, damping)
    elif imag_kernel == "product":
        k_i = eval_kernel("I", times, bath) * np.exp(-damping.gamma * times)
    else:
        raise DomainError(f"imag_kernel must be one of {IMAG_KERNELS}")
    return k_r, k_i


def gamma_exponent(paths: PathPair, bath: OhmicBath,
                   damping: MenskyDamping = NO_DAMPING, total_time=None,
                   hbar=1.0, imag_kernel="derivative") -> ExponentParts:
    """Exponents of the measurement-damped influence functional.

    Each path is convolved separately with the damped kernels,
    ``I_{l,k}(t) = int_0^t q_k(t') a_l(t - t') dt'``, and the cross terms use
    the late-time weighted ``J_{l,k}(t) = exp(-2 gamma (T - t)) I_{l,k}(t)``::

        real = int q1 I_R1 + q2 I_R2 - q1 J_R2 - q2 J_R1
        imag = int q1 I_I1 - q2 I_I2 + q1 J_I2 - q2 J_I1

    both divided by ``hbar``.  At ``gamma = 0`` this reduces to
    :func:`standard_exponent`.

    Parameters
    ----------
    total_time : float, optional
        Final time ``T``; defaults to the last grid time and may not precede it.
    imag_kernel : {'derivative', 'product'}
        See :func:`damped_kernels`.
    """
    grid = paths.grid
    t = grid.times
    if total_time is None:
        total_time = grid.t_end
    if total_time < grid.t_end * (1 - 1e-12):
        raise DomainError(f"total_time {total_time} precedes the last grid time")
    q1, q2 = paths.q1.q, paths.q2.q
    k_r, k_i = damped_kernels(bath, damping, t, imag_kernel)
    late = np.exp(-2 * damping.gamma * (total_time - t))

    i_r1 = trapezoid_convolve(k_r, q1, grid.dt)
    i_r2 = trapezoid_convolve(k_r, q2, grid.dt)
    i_i1 = trapezoid_convolve(k_i, q1, grid.dt)
    i_i2 = trapezoid_convolve(k_i, q2, grid.dt)

    real = q1 * i_r1 + q2 * i_r2 - late * (q1 * i_r2 + q2 * i_r1)
    imag = q1 * i_i1 - q2 * i_i2 + late * (q1 * i_i2 - q2 * i_i1)
    return ExponentParts(_trapz(real, grid.dt) / hbar, _trapz(imag, grid.dt) / hbar,
                         hbar, damping.gamma, float(total_time))


def dissipative_phase(paths: PathPair, bath: OhmicBath, hbar=1.0):
    """Phase of the Markov dissipative influence functional.

    ``(1/hbar) [ (eta W/pi) int (q1^2 - q2^2) - (eta/2) int (q1 - q2)(q1' + q2') ]``
    with the cutoff standing in for the divergent ``delta(0)``.
    """
    grid = paths.grid
    q1, q2 = paths.q1.q, paths.q2.q
    v = paths.q1.velocity() + paths.q2.velocity()
    local = bath.eta * bath.omega_cut / np.pi * _trapz(q1**2 - q2**2, grid.dt)
    friction = 0.5 * bath.eta * _trapz((q1 - q2) * v, grid.dt)
    return (local - friction) / hbar


def markov_imag_part(paths: PathPair, bath: OhmicBath,
                     damping: MenskyDamping = NO_DAMPING, hbar=1.0):
    """``imag_part`` with the dissipation convolution in its Markov form."""
    conv = dissipative_pair_convolution(paths.q1, paths.q2, bath, damping, "markov")
    return _trapz((paths.q1.q - paths.q2.q) * conv.values, paths.grid.dt) / hbar
