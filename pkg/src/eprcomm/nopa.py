"""Closed-form frequency-domain model of the below-threshold NOPA source.

The two output beams are described at a single analysis frequency by the
squeezed and antisqueezed spectra of their joint quadratures::

    s_minus = ((1 - sigma)**2 + omega**2) / ((1 + sigma)**2 + omega**2)
    s_plus  = ((1 + sigma)**2 + omega**2) / ((1 - sigma)**2 + omega**2)

which are the familiar ``1 -/+ 4 sigma / ((1 +/- sigma)**2 + omega**2)`` written
so that ``s_minus * s_plus == 1`` holds to rounding. ``sigma`` is the pump
amplitude relative to threshold and ``omega = 2 Omega / Gamma`` is the analysis
frequency in units of the cavity half-linewidth (``Gamma`` is the full
linewidth). With this normalization the single-beam gain at threshold is
``g_q -> 1/2 + 2/omega**2``, i.e. ``1 + (Gamma/Omega)**2 / 2`` for small
``Omega/Gamma``.

Losses are folded into one channel efficiency ``xi``: a variance ``v`` becomes
``xi * v + (1 - xi)`` per beam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import AboveThreshold, Infeasible, InvalidArgument


def db(x):
    """Power ratio to decibels."""
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise InvalidArgument(f"db() needs a positive argument, got {x!r}")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def undb(d):
    out = 10.0 ** (np.asarray(d, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NopaParams:
    """Physical operating point of the source and channels.

    Attributes
    ----------
    sigma : pump amplitude relative to threshold, in [0, 1).
    omega : normalized analysis frequency ``2 Omega / Gamma``, >= 0.
    xi : overall channel efficiency for the NOPA beams, in (0, 1].
    eta : propagation and detection efficiency of the message, in (0, 1].
    t2 : power transmissivity of the combining mirror, in (0, 1).
    n_common : common-mode excess noise added to both beams, >= 0.
    """

    sigma: float = 0.0
    omega: float = 0.0
    xi: float = 1.0
    eta: float = 1.0
    t2: float = 0.01
    n_common: float = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma", "omega", "xi", "eta", "t2", "n_common"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise InvalidArgument(f"{name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise InvalidArgument(f"{name} must be finite")
            object.__setattr__(self, name, float(v))
        if self.sigma >= 1.0:
            raise AboveThreshold(f"sigma={self.sigma} is at or above threshold")
        if self.sigma < 0.0:
            raise InvalidArgument("sigma must be >= 0")
        if self.omega < 0.0:
            raise InvalidArgument("omega must be >= 0")
        if not 0.0 < self.xi <= 1.0:
            raise InvalidArgument("xi must lie in (0, 1]")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidArgument("eta must lie in (0, 1]")
        if not 0.0 < self.t2 < 1.0:
            raise InvalidArgument("t2 must lie in (0, 1)")
        if self.n_common < 0.0:
            raise InvalidArgument("n_common must be >= 0")

    def with_(self, **changes) -> "NopaParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SpectraSet:
    """Analytic spectra at one analysis frequency (vacuum = 1 per beam)."""

    s_minus: float
    s_plus: float
    s_minus_d: float
    s_plus_d: float
    g_q: float
    g_q_d: float
    v_minus: float
    v_minus_d: float
    u_r: float


@dataclass(frozen=True)
class SnrReport:
    """Power signal-to-noise ratios and the tap transfer coefficient.

    ``r0`` is the SNR of the message before the mirror, ``r_ab`` that of either
    channel alone, ``r_d`` that of the difference photocurrent, ``r_r`` that of
    the reflected beam and ``t_d = (r_r + r_d) / r0``.
    """

    epsilon: float
    r0: float
    r_ab: float
    r_d: float
    r_r: float
    t_d: float


def squeezing_spectra(sigma: float, omega: float) -> tuple[float, float]:
    if not 0.0 <= sigma < 1.0:
        raise AboveThreshold(f"sigma={sigma} outside [0, 1)")
    lo = (1.0 - sigma) ** 2 + omega**2
    hi = (1.0 + sigma) ** 2 + omega**2
    return lo / hi, hi / lo


def spectra(params: NopaParams) -> SpectraSet:
    s_m, s_p = squeezing_spectra(params.sigma, params.omega)
    xi = params.xi
    g_q = 0.5 * (s_p + s_m) + params.n_common
    v_minus = 2.0 * s_m
    return SpectraSet(
        s_minus=s_m,
        s_plus=s_p,
        s_minus_d=xi * s_m + (1.0 - xi),
        s_plus_d=xi * s_p + (1.0 - xi),
        g_q=g_q,
        g_q_d=xi * g_q + (1.0 - xi),
        v_minus=v_minus,
        v_minus_d=xi * v_minus + 2.0 * (1.0 - xi),
        u_r=(1.0 - params.t2) + params.t2 * s_m,
    )


def _check_epsilon(epsilon: float) -> float:
    if not (epsilon >= 0.0 and math.isfinite(epsilon)):
        raise InvalidArgument(f"epsilon must be finite and >= 0, got {epsilon!r}")
    return float(epsilon)


def channel_snr(params: NopaParams, epsilon: float) -> float:
    """SNR of the message in either channel alone, ``xi eps**2 / (2 g_q)``."""
    epsilon = _check_epsilon(epsilon)
    return params.xi * epsilon**2 / (2.0 * spectra(params).g_q)


def receiver_snr(params: NopaParams, epsilon: float) -> float:
    """SNR of the message in the difference photocurrent, ``2 eta eps**2 / v_minus_d``."""
    epsilon = _check_epsilon(epsilon)
    return 2.0 * params.eta * epsilon**2 / spectra(params).v_minus_d


def transfer_coefficients(params: NopaParams, epsilon: float = 1.0) -> SnrReport:
    """Fill an :class:`SnrReport`; with ``sigma = 0`` ``t_d`` is the classical coefficient.

    ``t_d`` is evaluated as ``(1 - t2)/u_r + 2 eta t2 / v_minus_d`` so it stays
    defined for ``epsilon = 0``.
    """
    epsilon = _check_epsilon(epsilon)
    sp = spectra(params)
    r0 = epsilon**2 / params.t2
    return SnrReport(
        epsilon=epsilon,
        r0=r0,
        r_ab=channel_snr(params, epsilon),
        r_d=receiver_snr(params, epsilon),
        r_r=r0 * (1.0 - params.t2) / sp.u_r,
        t_d=(1.0 - params.t2) / sp.u_r + 2.0 * params.eta * params.t2 / sp.v_minus_d,
    )


def fit_operating_point(
    psi_a_db: float,
    phi_minus_db: float,
    xi: float,
    omega: float = 0.1,
    eta: float = 1.0,
    t2: float = 0.01,
) -> NopaParams:
    """Choose ``sigma`` and ``n_common`` that reproduce two measured levels.

    ``phi_minus_db`` is the detected difference floor and ``psi_a_db`` the
    detected single-beam level, both relative to one beam's vacuum level.
    The floor fixes ``sigma`` (at the given ``omega`` and ``xi``); the
    remaining single-beam excess is attributed to common-mode noise, which
    cancels in the difference current.

    Raises
    ------
    Infeasible
        If the floor is below what ``xi`` allows or the single-beam level is
        below what the squeezing alone produces.
    """
    phi = undb(phi_minus_db)
    psi = undb(psi_a_db)
    target = (phi - 2.0 * (1.0 - xi)) / (2.0 * xi)
    s_min_at_threshold = omega**2 / (4.0 + omega**2)
    if not s_min_at_threshold < target <= 1.0:
        raise Infeasible(
            f"floor {phi_minus_db} dB not reachable below threshold with xi={xi}, omega={omega}"
        )
    if target == 1.0:
        sigma = 0.0
    else:
        sigma = brentq(
            lambda s: squeezing_spectra(s, omega)[0] - target,
            0.0,
            np.nextafter(1.0, 0.0),
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
        )
    s_m, s_p = squeezing_spectra(sigma, omega)
    n_common = (psi - (1.0 - xi)) / xi - 0.5 * (s_m + s_p)
    if n_common < -1e-12:
        raise Infeasible(f"single-beam level {psi_a_db} dB is below the squeezing-only level")
    return NopaParams(sigma=sigma, omega=omega, xi=xi, eta=eta, t2=t2, n_common=max(n_common, 0.0))
