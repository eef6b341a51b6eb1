"""Eavesdropper models on channels (A, B) and the receiver's disturbance audit.

Eve acts on the beams as they leave the transmitter, before the lossy
channels; her own detection is ideal. Three strategies are modelled:

* ``tap``: a beamsplitter of reflectivity ``rho`` on each channel with vacuum
  in the open port. Eve keeps the reflected beams.
* ``intercept_resend``: Eve measures both beams (homodyne at guessed phases,
  or heterodyne) and re-emits coherent beams displaced to her results.
* ``qnd``: an ideal quantum-nondemolition readout of one quadrature per
  beam with readout noise ``m``, adding ``1/m`` back-action noise to the
  conjugate quadrature.

The receiver detects disturbances as a rise of the difference-current floor
at matched local-oscillator phases, or of the floor in the other basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import gaussian as gs
from .errors import Infeasible, InvalidArgument
from .gaussian import GaussianState, SampleBatch
from .nopa import NopaParams, SpectraSet, spectra
from .protocol import (
    MessageConfig,
    SpectralEstimate,
    build_source,
    detect,
    encode_at_mirror,
    estimate,
    propagate,
)

MATCHED_LO = (0.0, 0.0)
ORTHOGONAL_LO = (0.5 * math.pi, 1.5 * math.pi)
BASIS_LO = (MATCHED_LO, ORTHOGONAL_LO)

Variant = Literal["none", "tap", "intercept_resend", "qnd"]
Policy = Literal["fixed", "random_basis", "heterodyne"]


@dataclass(frozen=True)
class EveStrategy:
    variant: Variant = "none"
    rho: float = 0.0
    policy: Policy = "fixed"
    delta_a: float = 0.0
    delta_b: float = 0.0
    m: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in ("none", "tap", "intercept_resend", "qnd"):
            raise InvalidArgument(f"unknown eavesdropper variant {self.variant!r}")
        if self.policy not in ("fixed", "random_basis", "heterodyne"):
            raise InvalidArgument(f"unknown intercept policy {self.policy!r}")
        if self.variant == "tap" and not 0.0 <= self.rho <= 1.0:
            raise InvalidArgument("tap reflectivity must lie in [0, 1]")
        if self.variant == "qnd" and not self.m > 0.0:
            raise InvalidArgument("QND readout noise must be positive")

    @classmethod
    def none(cls) -> "EveStrategy":
        return cls()

    @classmethod
    def tap(cls, rho: float) -> "EveStrategy":
        return cls("tap", rho=rho)

    @classmethod
    def intercept_resend(cls, policy: Policy = "fixed", delta_a: float = 0.0, delta_b: float = 0.0) -> "EveStrategy":
        return cls("intercept_resend", policy=policy, delta_a=delta_a, delta_b=delta_b)

    @classmethod
    def qnd(cls, m: float, delta_a: float = 0.0, delta_b: float = 0.0) -> "EveStrategy":
        return cls("qnd", m=m, delta_a=delta_a, delta_b=delta_b)


@dataclass(frozen=True)
class DisturbanceReport:
    """Measured floors against their undisturbed expectation.

    A flag is raised when a measured floor exceeds its threshold, the
    baseline plus ``k_sigma`` standard errors of the variance estimator under
    the undisturbed hypothesis. ``orth_excess`` is ``None`` when no
    other-basis data was supplied.
    """

    bob_floor: float
    bob_orth_floor: float | None
    baseline_floor: float
    floor_threshold: float
    orth_threshold: float | None
    floor_excess: bool
    orth_excess: bool | None
    eve_snr: float | None = None

    @property
    def flags(self) -> tuple[str, ...]:
        out = []
        if self.floor_excess:
            out.append("floor-excess")
        if self.orth_excess is None:
            out.append("orth-unchecked")
        elif self.orth_excess:
            out.append("orth-excess")
        return tuple(out)

    @property
    def intrusion_detected(self) -> bool:
        return bool(self.floor_excess or self.orth_excess)


@dataclass(frozen=True)
class TapTradeoff:
    rho: float
    eve_snr: float
    bob_floor: float
    baseline_floor: float


# -- SNR accessors ------------------------------------------------------------


def homodyne_snr(state: GaussianState, phases: Sequence[float], weights: Sequence[float]) -> float:
    """SNR of ``sum_k w_k X_{phi_k}`` when the state's mean is the signal."""
    mu, cov = gs.homodyne_moments(state, phases)
    w = np.asarray(weights, dtype=float)
    return float((w @ mu) ** 2 / (w @ cov @ w))


def heterodyne_snr(state: GaussianState, phases: Sequence[float], weights: Sequence[float]) -> float:
    """SNR of the same combination built from heterodyne records of every mode.

    Each mode's records are projected on its phase ``phi_k``. For
    vacuum-limited quadratures this is exactly half of :func:`homodyne_snr`;
    in general a quadrature of variance ``V`` is penalized by ``V / (V + 1)``.
    """
    mu, cov = gs.heterodyne_moments(state, list(range(state.n_modes)))
    u = np.zeros(mu.size)
    for k, (phi, w) in enumerate(zip(phases, weights)):
        u[2 * k] = w * math.cos(phi)
        u[2 * k + 1] = w * math.sin(phi)
    return float((u @ mu) ** 2 / (u @ cov @ u))


def difference_variance(state: GaussianState, lo_phases: Sequence[float]) -> float:
    """Analytic ``Var(i_A - i_B)`` at the given local-oscillator phases."""
    _, cov = gs.homodyne_moments(state, lo_phases)
    w = np.array([1.0, -1.0])
    return float(w @ cov @ w)


# -- tap ----------------------------------------------------------------------


def tap_joint(state: GaussianState, rho: float) -> GaussianState:
    """Four-mode state ``(Bob_A, Bob_B, Eve_A, Eve_B)`` after tapping both channels."""
    if not 0.0 <= rho <= 1.0:
        raise InvalidArgument(f"tap reflectivity must lie in [0, 1], got {rho}")
    if state.n_modes != 2:
        raise InvalidArgument("tap needs a two-mode state")
    joint = gs.tensor(state, gs.make_vacuum(2))
    joint = gs.beamsplitter(joint, 0, 2, 1.0 - rho)
    return gs.beamsplitter(joint, 1, 3, 1.0 - rho)


def apply_tap(state: GaussianState, rho: float) -> tuple[GaussianState, GaussianState]:
    """Split each channel with reflectivity ``rho``; return ``(bob_state, eve_state)``."""
    joint = tap_joint(state, rho)
    return gs.reduce(joint, [0, 1]), gs.reduce(joint, [2, 3])


def tap_tradeoff(params: NopaParams, epsilon: float, rho: float) -> TapTradeoff:
    """Eve's difference-current SNR and Bob's detected floor for one reflectivity."""
    msg = MessageConfig(epsilon=epsilon, frames=1, samples_per_frame=1, frame_pattern=(1,))
    sent = encode_at_mirror(build_source(params, "quantum"), msg, 1)
    bob, eve = apply_tap(sent, rho)
    eve_snr = homodyne_snr(eve, MATCHED_LO, (1.0, -1.0)) if rho > 0 else 0.0
    bob_floor = difference_variance(propagate(params, bob), MATCHED_LO)
    return TapTradeoff(rho, eve_snr, bob_floor, spectra(params).v_minus_d)


def eve_min_rho(params: NopaParams, epsilon: float, snr_target: float = 1.0, xtol: float = 1e-6) -> TapTradeoff:
    """Smallest tap reflectivity that gives Eve an SNR of at least ``snr_target``.

    The SNR grows monotonically with ``rho``, so the answer is found by
    bisection; the returned ``rho`` is the upper end of the final bracket.

    Raises
    ------
    Infeasible
        If even full interception (``rho = 1``) stays below the target.
    """
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    if not snr_target > 0:
        raise InvalidArgument("snr_target must be positive")
    full = tap_tradeoff(params, epsilon, 1.0)
    if full.eve_snr < snr_target:
        raise Infeasible(f"full interception gives SNR {full.eve_snr:.4g} < target {snr_target}")
    lo, hi = 0.0, 1.0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if tap_tradeoff(params, epsilon, mid).eve_snr >= snr_target:
            hi = mid
        else:
            lo = mid
    return tap_tradeoff(params, epsilon, hi)


# -- intercept and resend -----------------------------------------------------


def _eve_phases(policy: Policy, delta: tuple[float, float], rng: np.random.Generator) -> tuple[float, float]:
    if policy == "fixed":
        return delta
    if policy == "random_basis":
        return BASIS_LO[int(rng.integers(2))]
    raise InvalidArgument(f"policy {policy!r} has no homodyne phases")


def _resend_map(state: GaussianState, policy: Policy, delta: tuple[float, float]):
    """Linear model of measure-and-resend: record moments and the record-to-mean map ``P``."""
    if policy == "heterodyne":
        mu, cov = gs.heterodyne_moments(state, [0, 1])
        return mu, cov, np.eye(4)
    mu, cov = gs.homodyne_moments(state, delta)
    P = np.zeros((4, 2))
    for k, d in enumerate(delta):
        P[2 * k, k] = math.cos(d)
        P[2 * k + 1, k] = math.sin(d)
    return mu, cov, P


def resend_average(
    state: GaussianState, policy: Policy = "fixed", delta: tuple[float, float] = MATCHED_LO
) -> GaussianState:
    """State Bob receives averaged over Eve's outcomes (exact, since the map is linear)."""
    if policy == "random_basis":
        raise InvalidArgument("average over a fixed guess; pass the guessed phases with policy='fixed'")
    mu, cov, P = _resend_map(state, policy, delta)
    return GaussianState(P @ mu, P @ cov @ P.T + np.eye(4))


@dataclass(frozen=True, eq=False)
class ResentBeams:
    """Coherent beams re-emitted by Eve, one pair per intercepted sample.

    ``means[k]`` is the phase-space mean of the pair prepared after Eve's
    ``k``-th measurement; every pair has vacuum covariance.
    """

    means: np.ndarray
    policy: str
    eve_phases: tuple[float, float] | None

    def __len__(self) -> int:
        return self.means.shape[0]

    def state(self, k: int) -> GaussianState:
        return GaussianState(self.means[k], np.eye(4))

    def sample(self, lo_phases: Sequence[float], seed: int) -> SampleBatch:
        """One homodyne reading of each re-emitted pair at Bob's phases."""
        M = np.zeros((2, 4))
        for k, phi in enumerate(lo_phases):
            M[k, 2 * k] = math.cos(phi)
            M[k, 2 * k + 1] = math.sin(phi)
        rng = np.random.default_rng(seed)
        out = self.means @ M.T + rng.standard_normal((len(self), 2))
        return SampleBatch(out, tuple(float(p) for p in lo_phases), seed, (0, 1))


def intercept_resend(
    state: GaussianState,
    policy: Policy = "fixed",
    n_samples: int = 1,
    seed: int = 0,
    delta: tuple[float, float] = MATCHED_LO,
) -> tuple[ResentBeams, SampleBatch]:
    """Measure both beams ``n_samples`` times and prepare coherent replacements.

    With ``random_basis`` Eve picks one of the two receiver LO pairs for the
    whole batch. Returns the re-emitted beams and Eve's raw records.
    """
    if state.n_modes != 2:
        raise InvalidArgument("intercept-resend needs a two-mode state")
    rng = np.random.default_rng(gs.derive_seed(seed, 1))
    phases = None if policy == "heterodyne" else _eve_phases(policy, tuple(delta), rng)
    record_seed = gs.derive_seed(seed, 0)
    if policy == "heterodyne":
        record = gs.heterodyne_sample(state, [0, 1], n_samples, record_seed)
        P = np.eye(4)
    else:
        record = gs.sample_quadratures(state, phases, n_samples, record_seed)
        P = _resend_map(state, "fixed", phases)[2]
    return ResentBeams(record.outcomes @ P.T, policy, phases), record


# -- QND ----------------------------------------------------------------------


def qnd_probe(state: GaussianState, mode: int, m: float, phase: float = 0.0) -> tuple[GaussianState, float]:
    """Ideal QND readout of ``X_phase`` on one mode.

    Returns the post-probe state (measured quadrature untouched, conjugate
    quadrature variance raised by ``1/m``) and the variance of Eve's record,
    ``Var(X_phase) + m``.
    """
    if not m > 0:
        raise InvalidArgument("QND readout noise must be positive")
    _, cov = gs.homodyne_moments(state, [phase], [mode])
    record_var = float(cov[0, 0] + m)
    u = np.zeros(2 * state.n_modes)
    u[2 * mode] = -math.sin(phase)
    u[2 * mode + 1] = math.cos(phase)
    return gs.add_noise(state, np.outer(u, u) / m), record_var


def qnd_eve_snr(state: GaussianState, m: float, phases: Sequence[float] = MATCHED_LO) -> float:
    """SNR of the difference of Eve's two QND records."""
    mu, cov = gs.homodyne_moments(state, phases)
    w = np.array([1.0, -1.0])
    return float((w @ mu) ** 2 / (w @ cov @ w + 2.0 * m))


def apply_eve(
    state: GaussianState, eve: EveStrategy, guess: tuple[float, float] | None = None
) -> GaussianState:
    """Bob's (outcome-averaged) state after Eve acts at the transmitter output.

    ``guess`` overrides Eve's phases, e.g. a per-frame random basis choice.
    """
    if eve.variant == "none":
        return state
    if eve.variant == "tap":
        return apply_tap(state, eve.rho)[0]
    delta = guess if guess is not None else (eve.delta_a, eve.delta_b)
    if eve.variant == "intercept_resend":
        policy = "heterodyne" if eve.policy == "heterodyne" else "fixed"
        return resend_average(state, policy, delta)
    out = state
    for mode in (0, 1):
        out = qnd_probe(out, mode, eve.m, delta[mode])[0]
    return out


# -- audit --------------------------------------------------------------------


def floor_threshold(baseline: float, n: int, k_sigma: float) -> float:
    """Baseline plus ``k_sigma`` standard errors of a Gaussian variance estimate from ``n`` samples."""
    return baseline * (1.0 + k_sigma * math.sqrt(2.0 / max(n - 1, 1)))


def audit_floors(
    bob_floor: float,
    n_bob: int,
    baseline: float,
    orth_floor: float | None = None,
    n_orth: int | None = None,
    orth_baseline: float | None = None,
    k_sigma: float = 3.0,
    eve_snr: float | None = None,
) -> DisturbanceReport:
    thr = floor_threshold(baseline, n_bob, k_sigma)
    if orth_floor is None:
        orth_thr = None
        orth_excess = None
    else:
        orth_thr = floor_threshold(baseline if orth_baseline is None else orth_baseline, n_orth, k_sigma)
        orth_excess = bool(orth_floor > orth_thr)
    return DisturbanceReport(
        bob_floor=bob_floor,
        bob_orth_floor=orth_floor,
        baseline_floor=baseline,
        floor_threshold=thr,
        orth_threshold=orth_thr,
        floor_excess=bool(bob_floor > thr),
        orth_excess=orth_excess,
        eve_snr=eve_snr,
    )


def audit(
    bob_estimate: SpectralEstimate,
    expected: SpectraSet,
    orthogonal: SpectralEstimate | None = None,
    k_sigma: float = 3.0,
    eve_snr: float | None = None,
) -> DisturbanceReport:
    """Compare measured difference floors with the undisturbed ``v_minus_d``.

    Both the matched-basis floor and the other-basis floor of the NOPA
    output equal ``v_minus_d`` when nobody interferes. Without ``orthogonal``
    the report carries the ``orth-unchecked`` flag.
    """
    return audit_floors(
        bob_estimate.phi_minus,
        bob_estimate.n_off,
        expected.v_minus_d,
        None if orthogonal is None else orthogonal.phi_minus,
        None if orthogonal is None else orthogonal.n_off,
        k_sigma=k_sigma,
        eve_snr=eve_snr,
    )


def probe_floors(state: GaussianState, n_samples: int, seed: int) -> tuple[SpectralEstimate, SpectralEstimate]:
    """Message-off floors of an arriving state in both receiver bases."""
    matched = detect(state, MATCHED_LO, n_samples, gs.derive_seed(seed, 0))
    other = detect(state, ORTHOGONAL_LO, n_samples, gs.derive_seed(seed, 1))
    return estimate(matched, (0,)), estimate(other, (0,))
