"""Volterra convolutions of memory kernels against sampled trajectories.

The exact convolution ``I(t) = int_0^t K(t - t') f(t') dt'`` is discretised
with the trapezoid rule on a uniform grid, which keeps it exactly linear in
``f`` and second order in ``dt``.  The Markov replacement is
``f(t) * int_0^inf K``.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .errors import DomainError
from .kernels import (NO_DAMPING, KernelEval, MenskyDamping, OhmicBath,
                      markov_dissipation_coefficients)
from .util import fmt_float

# direct summation below this length, FFT above
_DIRECT_MAX = 2048


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")

    @classmethod
    def spanning(cls, t_end, dt):
        """Grid from 0 to (at least) ``t_end`` with step ``dt``."""
        return cls(dt, int(np.ceil(t_end / dt - 1e-9)) + 1)

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps)

    @property
    def t_end(self):
        return self.dt * (self.n_steps - 1)


@dataclass(frozen=True)
class Trajectory:
    """Samples ``q`` (and optionally ``qdot``) on a :class:`TimeGrid`."""

    grid: TimeGrid
    q: np.ndarray
    qdot: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.grid.n_steps,):
            raise DomainError(f"q has shape {q.shape}, grid needs ({self.grid.n_steps},)")
        object.__setattr__(self, "q", q)
        if self.qdot is not None:
            qdot = np.asarray(self.qdot, dtype=float)
            if qdot.shape != q.shape:
                raise DomainError("qdot must match q in length")
            object.__setattr__(self, "qdot", qdot)

    @classmethod
    def from_function(cls, grid, func, deriv=None):
        t = grid.times
        return cls(grid, func(t), None if deriv is None else deriv(t))

    def velocity(self):
        """``qdot`` if given, else second-order finite differences."""
        if self.qdot is not None:
            return self.qdot
        return np.gradient(self.q, self.grid.dt, edge_order=2)

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        qdot = None
        if self.qdot is not None and other.qdot is not None:
            qdot = self.qdot + other.qdot
        return Trajectory(self.grid, self.q + other.q, qdot)

    def __neg__(self):
        return Trajectory(self.grid, -self.q, None if self.qdot is None else -self.qdot)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, c):
        return Trajectory(self.grid, c * self.q, None if self.qdot is None else c * self.qdot)


@dataclass(frozen=True)
class ConvolutionResult:
    grid: TimeGrid
    values: np.ndarray
    mode: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_steps,):
            raise DomainError("values must match the grid length")
        if not np.all(np.isfinite(values)):
            raise DomainError("convolution values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ErrorReport:
    sup_rel: float
    l2_rel: float
    tail_mag: float
    transient_cut: float

    def to_dict(self):
        return {"sup_rel": self.sup_rel, "l2_rel": self.l2_rel,
                "tail_mag": self.tail_mag, "transient_cut": self.transient_cut}


def _same_grid(a, b):
    if a != b:
        raise DomainError(f"grid mismatch: {a} vs {b}")


def trapezoid_convolve(kvals, fvals, dt):
    """Trapezoid-rule ``int_0^{t_n} K(t_n - t') f(t') dt'`` for every ``n``.

    ``kvals[k]`` is ``K(k dt)`` and ``fvals[m]`` is ``f(m dt)``.
    """
    kvals = np.asarray(kvals, dtype=float)
    fvals = np.asarray(fvals, dtype=float)
    n = fvals.size
    if kvals.size < n:
        raise DomainError("kernel samples do not cover the grid")
    kvals = kvals[:n]
    if n <= _DIRECT_MAX:
        full = np.convolve(kvals, fvals)[:n]
    else:
        full = fftconvolve(kvals, fvals)[:n]
    return dt * (full - 0.5 * kvals * fvals[0] - 0.5 * kvals[0] * fvals)


def _kernel_samples(kernel, grid):
    if isinstance(kernel, KernelEval):
        if kernel.taus.size < grid.n_steps or not np.allclose(
                kernel.taus[:grid.n_steps], grid.times, rtol=1e-12, atol=0):
            raise DomainError("KernelEval taus must coincide with the grid times")
        return kernel.values[:grid.n_steps]
    if callable(kernel):
        return np.asarray(kernel(grid.times), dtype=float)
    values = np.asarray(kernel, dtype=float)
    if values.shape != (grid.n_steps,):
        raise DomainError("kernel samples must match the grid length")
    return values


def volterra_convolve(kernel, f, grid: Optional[TimeGrid] = None) -> ConvolutionResult:
    """Exact (trapezoid) memory convolution of ``kernel`` against ``f``.

    Parameters
    ----------
    kernel : callable, KernelEval or array
        Callable of lag ``tau``; or samples at the grid times.
    f : Trajectory or array
        The convolved signal (its ``q`` samples).
    grid : TimeGrid, optional
        Defaults to ``f.grid``; must match it when both are given.
    """
    if isinstance(f, Trajectory):
        if grid is not None:
            _same_grid(grid, f.grid)
        grid, fvals = f.grid, f.q
    else:
        if grid is None:
            raise DomainError("a grid is required when f is a plain array")
        fvals = np.asarray(f, dtype=float)
        if fvals.shape != (grid.n_steps,):
            raise DomainError("f must match the grid length")
    kvals = _kernel_samples(kernel, grid)
    return ConvolutionResult(grid, trapezoid_convolve(kvals, fvals, grid.dt), "exact")


def markov_convolve(f: Trajectory, weight) -> ConvolutionResult:
    return ConvolutionResult(f.grid, f.q * weight, "markov")


def dissipative_pair_convolution(q1: Trajectory, q2: Trajectory, bath: OhmicBath,
                                 damping: MenskyDamping = NO_DAMPING,
                                 mode="exact") -> ConvolutionResult:
    """Dissipation convolution of the damped kernel against ``q1 + q2``.

    ``exact`` uses the integration-by-parts form (boundary terms at both
    limits plus the convolution of ``sin(W tau)/tau e^{-gamma tau}`` with the
    summed velocity); ``markov`` uses the position and velocity coefficients
    of :func:`markov_dissipation_coefficients`.
    """
    _same_grid(q1.grid, q2.grid)
    grid = q1.grid
    qs = q1.q + q2.q
    vs = q1.velocity() + q2.velocity()
    if mode == "markov":
        pos, vel = markov_dissipation_coefficients(bath, damping)
        return ConvolutionResult(grid, pos * qs + vel * vs, "markov")
    if mode != "exact":
        raise DomainError(f"mode must be 'exact' or 'markov', got {mode!r}")

    w, g = bath.omega_cut, damping.gamma
    t = grid.times
    s = w * np.sinc(w * t / np.pi) * np.exp(-g * t)
    boundary = s * qs[0] - w * qs
    memory = trapezoid_convolve(s, vs, grid.dt)
    return ConvolutionResult(grid, bath.eta / np.pi * (boundary + memory), "exact")


def late_time_weight(result: ConvolutionResult, damping: MenskyDamping,
                     total_time) -> ConvolutionResult:
    """``exp(-2 gamma (T - t)) * I(t)``."""
    t = result.grid.times
    if total_time < t[-1] * (1 - 1e-12):
        raise DomainError(f"total_time {total_time} precedes the last grid time {t[-1]}")
    factor = np.exp(-2 * damping.gamma * (total_time - t))
    return ConvolutionResult(result.grid, factor * result.values, result.mode)


def default_transient_cut(bath: OhmicBath, damping: MenskyDamping = NO_DAMPING):
    return 5 / damping.gamma if damping.gamma > 0 else 5 / bath.omega_cut


def _ratio(num, den):
    if num == 0:
        return 0.0
    return num / den if den > 0 else float("inf")


def convolution_error_report(exact: ConvolutionResult, approx: ConvolutionResult,
                             transient_cut) -> ErrorReport:
    """Relative sup / L2 errors of ``approx`` against ``exact`` for ``t >= transient_cut``.

    ``tail_mag`` is the largest absolute difference over the final quarter of
    that window.
    """
    _same_grid(exact.grid, approx.grid)
    mask = exact.grid.times >= transient_cut
    if not mask.any():
        raise DomainError(f"no samples after transient_cut={transient_cut}")
    ex = exact.values[mask]
    diff = approx.values[mask] - ex
    sup_rel = _ratio(np.max(np.abs(diff)), np.max(np.abs(ex)))
    l2_rel = _ratio(np.sqrt(np.sum(diff**2)), np.sqrt(np.sum(ex**2)))
    tail = diff[-max(1, diff.size // 4):]
    return ErrorReport(float(sup_rel), float(l2_rel), float(np.max(np.abs(tail))),
                       float(transient_cut))


def write_convolution_csv(fh, result: ConvolutionResult):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "value", "mode"])
    for t, v in zip(result.grid.times, result.values):
        writer.writerow([fmt_float(t), fmt_float(v), result.mode])
