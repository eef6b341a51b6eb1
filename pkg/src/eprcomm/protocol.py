"""End-to-end two-channel pipeline: source, encoding, channels, homodyne detection.

Message coupling convention
---------------------------
The message of amplitude ``epsilon`` is split equally onto the two beams with
per-channel phases ``beta_a``, ``beta_b``::

    d_A = epsilon/sqrt(2) * (cos beta_a, sin beta_a)
    d_B = epsilon/sqrt(2) * (cos beta_b, sin beta_b)

The default ``(beta_a, beta_b) = (0, pi)`` puts ``+epsilon/sqrt(2)`` on ``X_A``
and ``-epsilon/sqrt(2)`` on ``X_B``, i.e. the message rides on the squeezed
difference ``X_A - X_B``. A common-mode message would cancel in
``i_A - i_B``. With this choice the difference current carries a mean shift
``sqrt(2 eta) epsilon`` on top of a floor ``v_minus_d``, which reproduces
``2 eta epsilon**2 / v_minus_d``.

The channel efficiency ``xi`` acts on the fluctuations; the message mean is
attenuated by ``sqrt(eta)`` instead, since ``eta`` is the efficiency of the
message path from the mirror to the photocurrents.

Frames
------
A run consists of ``frames`` independent sideband snapshots of
``samples_per_frame`` samples each. Frame ``f`` carries the message bit
``frame_pattern[f % len(frame_pattern)]`` and draws its noise from the child
seed ``derive_seed(seed, f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import gaussian as gs
from .errors import InvalidArgument, SnrUndefined
from .gaussian import GaussianState
from .nopa import NopaParams, db, spectra

SourceMode = Literal["quantum", "classical", "vacuum"]

PSI_0A = 1.0
PHI_0MINUS = 2.0 * PSI_0A


@dataclass(frozen=True)
class MessageConfig:
    """On/off keyed coherent message.

    ``omega0_label`` is bookkeeping for the sideband offset frequency; the
    simulated sideband state does not depend on it.
    """

    epsilon: float = 1.0
    beta_a: float = 0.0
    beta_b: float = math.pi
    frame_pattern: tuple[int, ...] = (0, 1)
    frames: int = 100
    samples_per_frame: int = 1000
    omega0_label: float = 1.1e6

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame_pattern", tuple(int(b) for b in self.frame_pattern))
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise InvalidArgument("epsilon must be finite and >= 0")
        if not self.frame_pattern or any(b not in (0, 1) for b in self.frame_pattern):
            raise InvalidArgument("frame_pattern must be a nonempty list of 0/1 bits")
        if self.frames < 1 or self.samples_per_frame < 1:
            raise InvalidArgument("frames and samples_per_frame must be positive")
        if self.frames % len(self.frame_pattern):
            raise InvalidArgument("frame_pattern length must divide frames")

    @property
    def n_samples(self) -> int:
        return self.frames * self.samples_per_frame

    def bits(self) -> np.ndarray:
        """Message bit of every frame."""
        pat = np.asarray(self.frame_pattern)
        return pat[np.arange(self.frames) % pat.size]


@dataclass(frozen=True, eq=False)
class PhotocurrentRecord:
    """Sampled photocurrents; ``i_minus`` is formed as ``i_a - i_b`` on construction."""

    i_a: np.ndarray
    i_b: np.ndarray
    frame_index: np.ndarray
    lo_phases: tuple[float, float]
    i_minus: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        i_a = np.asarray(self.i_a, dtype=float)
        i_b = np.asarray(self.i_b, dtype=float)
        fi = np.asarray(self.frame_index, dtype=np.int64)
        if not (i_a.shape == i_b.shape == fi.shape) or i_a.ndim != 1:
            raise InvalidArgument("photocurrent arrays must be 1-D and equally long")
        object.__setattr__(self, "i_a", i_a)
        object.__setattr__(self, "i_b", i_b)
        object.__setattr__(self, "frame_index", fi)
        object.__setattr__(self, "i_minus", i_a - i_b)

    def __len__(self) -> int:
        return self.i_a.size

    @classmethod
    def concatenate(cls, records: Sequence["PhotocurrentRecord"]) -> "PhotocurrentRecord":
        if not records:
            raise InvalidArgument("nothing to concatenate")
        return cls(
            np.concatenate([r.i_a for r in records]),
            np.concatenate([r.i_b for r in records]),
            np.concatenate([r.frame_index for r in records]),
            records[0].lo_phases,
        )


@dataclass(frozen=True)
class SpectralEstimate:
    """Noise levels and SNR estimated from a record, in vacuum units.

    ``psi_a``, ``psi_b`` and ``phi_minus`` are sample variances over the
    message-off frames. ``snr_measured`` is ``signal_shift**2 / phi_minus`` with
    ``signal_shift`` the difference of on-frame and off-frame means of
    ``i_minus``; it is ``None`` when the pattern has no on frames.
    """

    psi_a: float
    psi_b: float
    phi_minus: float
    n_off: int
    n_on: int
    snr_measured: float | None = None
    signal_shift: float | None = None
    snr_stderr: float | None = None
    psi_0a: float = PSI_0A
    phi_0minus: float = PHI_0MINUS

    @property
    def snr(self) -> float:
        if self.snr_measured is None:
            raise SnrUndefined("no message-on frames in this record")
        return self.snr_measured

    @property
    def phi_minus_stderr(self) -> float:
        return self.phi_minus * math.sqrt(2.0 / (self.n_off - 1))


@dataclass(frozen=True)
class DenseCodingResult:
    """Recovered floors and SNRs of the two message quadratures after recombination.

    ``floor_x`` is the variance of the rescaled ``(X_A - X_B)`` record and
    ``floor_y`` that of ``(Y_A + Y_B)``. ``b_mean_shift`` is the analytic
    displacement the message leaves on channel B alone.
    """

    floor_x: float
    floor_y: float
    snr_x: float | None
    snr_y: float | None
    b_mean_shift: float
    n_off: int


# -- pipeline stages ----------------------------------------------------------


def common_noise(n: float) -> np.ndarray:
    """Covariance of noise ``n`` shared by both beams, cancelling in ``X_A - X_B`` and ``Y_A + Y_B``."""
    x = np.array([[1.0, 1.0], [1.0, 1.0]])
    y = np.array([[1.0, -1.0], [-1.0, 1.0]])
    out = np.zeros((4, 4))
    out[0::2, 0::2] = n * x
    out[1::2, 1::2] = n * y
    return out


def build_source(params: NopaParams, mode: SourceMode = "quantum", excess: float = 0.0) -> GaussianState:
    """Two-beam source state at the mirror.

    ``quantum`` is the NOPA output with its common excess noise;
    ``vacuum`` is the amplifier switched off; ``classical`` is a correlated
    thermal pair with excess ``excess`` per beam, whose difference variance
    stays at the two-vacuum level 2 for every ``excess``.
    """
    if mode == "vacuum":
        return gs.make_vacuum(2)
    if mode == "classical":
        if not excess >= 0:
            raise InvalidArgument(f"classical excess noise must be >= 0, got {excess}")
        return gs.add_noise(gs.make_vacuum(2), common_noise(excess))
    if mode == "quantum":
        sp = spectra(params)
        state = gs.make_epr(sp.s_minus, sp.s_plus)
        if params.n_common > 0:
            state = gs.add_noise(state, common_noise(params.n_common))
        return state
    raise InvalidArgument(f"unknown source mode {mode!r}")


def message_displacement(epsilon: float, beta_a: float, beta_b: float) -> np.ndarray:
    amp = epsilon / math.sqrt(2.0)
    return amp * np.array([math.cos(beta_a), math.sin(beta_a), math.cos(beta_b), math.sin(beta_b)])


def encode_at_mirror(state: GaussianState, msg: MessageConfig, frame_bit: int) -> GaussianState:
    if state.n_modes != 2:
        raise InvalidArgument("encoding needs a two-mode state")
    if not frame_bit:
        return state
    return gs.displace(state, message_displacement(msg.epsilon, msg.beta_a, msg.beta_b))


def transmit(
    state: GaussianState, xi_a: float, xi_b: float | None = None, eta: float | None = None
) -> GaussianState:
    """Lossy propagation of both beams.

    Fluctuations see efficiencies ``xi_a`` and ``xi_b``. If ``eta`` is given,
    the mean (the message) is attenuated by ``sqrt(eta)`` instead of
    ``sqrt(xi)``.
    """
    xi_b = xi_a if xi_b is None else xi_b
    out = gs.loss_channel(gs.loss_channel(state, 0, xi_a), 1, xi_b)
    if eta is None:
        return out
    if not 0.0 < eta <= 1.0:
        raise InvalidArgument("eta must lie in (0, 1]")
    return GaussianState(math.sqrt(eta) * state.mean, out.cov)


def propagate(params: NopaParams, state: GaussianState) -> GaussianState:
    return transmit(state, params.xi, params.xi, params.eta)


def detect(
    state: GaussianState,
    lo_phases: tuple[float, float],
    n_samples: int,
    seed: int,
    frame_index: int = 0,
) -> PhotocurrentRecord:
    if state.n_modes != 2:
        raise InvalidArgument("detection needs a two-mode state")
    batch = gs.sample_quadratures(state, lo_phases, n_samples, seed)
    phases = (float(lo_phases[0]), float(lo_phases[1]))
    return PhotocurrentRecord(
        batch.outcomes[:, 0], batch.outcomes[:, 1], np.full(n_samples, frame_index), phases
    )


def run_frames(
    source: GaussianState,
    params: NopaParams,
    msg: MessageConfig,
    lo_phases: tuple[float, float],
    seed: int,
) -> PhotocurrentRecord:
    """Encode, propagate and detect every frame of ``msg``."""
    arriving = {bit: propagate(params, encode_at_mirror(source, msg, bit)) for bit in (0, 1)}
    records = [
        detect(arriving[int(bit)], lo_phases, msg.samples_per_frame, gs.derive_seed(seed, f), f)
        for f, bit in enumerate(msg.bits())
    ]
    return PhotocurrentRecord.concatenate(records)


def _sample_bits(frame_index: np.ndarray, frame_pattern: Sequence[int]) -> np.ndarray:
    pat = np.asarray(frame_pattern, dtype=int)
    if pat.size == 0:
        raise InvalidArgument("empty frame pattern")
    return pat[frame_index % pat.size]


def _snr_from_shift(on: np.ndarray, off: np.ndarray) -> tuple[float, float, float]:
    v = float(np.var(off, ddof=1))
    shift = float(on.mean() - off.mean())
    s2 = v * (1.0 / on.size + 1.0 / off.size)
    var_v = 2.0 * v**2 / (off.size - 1)
    snr = shift**2 / v
    var_snr = (4.0 * shift**2 * s2 + 2.0 * s2**2) / v**2 + snr**2 * var_v / v**2
    return snr, shift, math.sqrt(var_snr)


def estimate(record: PhotocurrentRecord, frame_pattern: Sequence[int]) -> SpectralEstimate:
    """Noise levels from message-off frames and SNR from the on/off mean shift.

    Raises
    ------
    SnrUndefined
        If no frame of the record is a message-off frame (or fewer than two
        off samples exist).
    """
    if len(record) == 0:
        raise InvalidArgument("empty record")
    bits = _sample_bits(record.frame_index, frame_pattern)
    off = bits == 0
    on = ~off
    if off.sum() < 2:
        raise SnrUndefined("need message-off frames to estimate the noise floor")
    snr = shift = err = None
    if on.any():
        snr, shift, err = _snr_from_shift(record.i_minus[on], record.i_minus[off])
    return SpectralEstimate(
        psi_a=float(np.var(record.i_a[off], ddof=1)),
        psi_b=float(np.var(record.i_b[off], ddof=1)),
        phi_minus=float(np.var(record.i_minus[off], ddof=1)),
        n_off=int(off.sum()),
        n_on=int(on.sum()),
        snr_measured=snr,
        signal_shift=shift,
        snr_stderr=err,
    )


def frame_trace(record: PhotocurrentRecord, frame_pattern: Sequence[int]) -> list[dict]:
    """Per-frame mean-square photocurrents, the quantity a spectrum analyzer displays.

    Levels include the coherent message power, so on frames show as steps.
    """
    bits = _sample_bits(record.frame_index, frame_pattern)
    rows = []
    for f in np.unique(record.frame_index):
        sel = record.frame_index == f
        psi_a = float(np.mean(record.i_a[sel] ** 2))
        psi_b = float(np.mean(record.i_b[sel] ** 2))
        phi = float(np.mean(record.i_minus[sel] ** 2))
        rows.append(
            {
                "frame_index": int(f),
                "psi_a_db": db(psi_a / PSI_0A),
                "psi_b_db": db(psi_b / PSI_0A),
                "phi_minus_db": db(phi / PSI_0A),
                "psi_0a_db": 0.0,
                "phi_0minus_db": db(PHI_0MINUS / PSI_0A),
                "message_bit": int(bits[sel][0]),
                "psi_a": psi_a,
                "psi_b": psi_b,
                "phi_minus": phi,
            }
        )
    return rows


def compare_to_classical(
    params: NopaParams, msg: MessageConfig, seed: int, lo_phases: tuple[float, float] = (0.0, 0.0)
) -> tuple[SpectralEstimate, SpectralEstimate, float]:
    """Run the same message with the amplifier on and off.

    Returns the two estimates and the SNR improvement in dB of the quantum
    run over the vacuum-input baseline.
    """
    quantum = estimate(run_frames(build_source(params, "quantum"), params, msg, lo_phases, seed), msg.frame_pattern)
    vacuum = estimate(
        run_frames(build_source(params, "vacuum"), params, msg, lo_phases, gs.derive_seed(seed, 1 << 32)),
        msg.frame_pattern,
    )
    return quantum, vacuum, db(quantum.snr / vacuum.snr)


def dense_coding_run(params: NopaParams, msg: MessageConfig, n_samples: int, seed: int) -> DenseCodingResult:
    """Encode the full message on channel A only and decode by recombination.

    The message displaces channel A by ``epsilon * (cos beta_a, sin beta_a)``.
    At the receiver the beams meet on a balanced beamsplitter; one output is
    read at LO phase 0 and the other at pi/2, giving rescaled records of
    ``X_A - X_B`` and ``Y_A + Y_B``.
    """
    if n_samples < msg.frames:
        raise InvalidArgument("need at least one sample per frame")
    spf = n_samples // msg.frames
    source = build_source(params, "quantum")
    d = np.array([msg.epsilon * math.cos(msg.beta_a), msg.epsilon * math.sin(msg.beta_a), 0.0, 0.0])
    encoded = {0: source, 1: gs.displace(source, d)}
    b_shift = float(np.linalg.norm(gs.reduce(encoded[1], [1]).mean - gs.reduce(encoded[0], [1]).mean))

    received = {
        bit: gs.beamsplitter(propagate(params, st), 0, 1, 0.5, 0.0) for bit, st in encoded.items()
    }
    xs, ys, bits = [], [], []
    for f, bit in enumerate(msg.bits()):
        batch = gs.sample_quadratures(received[int(bit)], (0.0, 0.5 * math.pi), spf, gs.derive_seed(seed, f))
        xs.append(math.sqrt(2.0) * batch.outcomes[:, 0])
        ys.append(math.sqrt(2.0) * batch.outcomes[:, 1])
        bits.append(np.full(spf, bit))
    x, y, b = np.concatenate(xs), np.concatenate(ys), np.concatenate(bits)
    off, on = b == 0, b == 1
    if off.sum() < 2:
        raise SnrUndefined("need message-off frames to estimate the noise floor")
    snr_x = snr_y = None
    if on.any():
        snr_x = _snr_from_shift(x[on], x[off])[0]
        snr_y = _snr_from_shift(y[on], y[off])[0]
    return DenseCodingResult(
        floor_x=float(np.var(x[off], ddof=1)),
        floor_y=float(np.var(y[off], ddof=1)),
        snr_x=snr_x,
        snr_y=snr_y,
        b_mean_shift=b_shift,
        n_off=int(off.sum()),
    )
