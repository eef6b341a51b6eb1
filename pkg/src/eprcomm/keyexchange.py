"""Random phase-switching key exchange over the two EPR channels.

Alice picks one of two bases per frame:

========  ==================  ==================  ===========================
basis     quadrature angles   message phases      minimum-variance combination
========  ==================  ==================  ===========================
0         (0, 0)              (0, pi)             X_A - X_B
pi/2      (pi/2, pi/2)        (pi/2, pi/2)        Y_A + Y_B
========  ==================  ==================  ===========================

The message phases of the second basis are ``beta_A + pi/2`` and
``beta_B - pi/2``. The opposite shifts follow the phase conjugation between
the two beams; with equal shifts on both beams the message would cancel in
Bob's combination. The NOPA output is unchanged by rotating A by ``theta``
and B by ``-theta``, so Alice's angle choice names the quadratures that carry
the message rather than rotating the source.

Bob picks the LO pair ``(0, 0)`` or ``(pi/2, 3pi/2)``; the latter reads
``(Y_A, -Y_B)`` so that ``i_A - i_B = Y_A + Y_B``. Each frame carries the
amplitude ``a0`` or ``a1``, and Bob decides with a threshold at the midpoint
of the two expected means. After the run both basis lists are compared
and frames with different bases are discarded.

Randomness
----------
Frames are processed in blocks of ``BLOCK`` frames. Block ``b`` draws all of
its choices, then its noise, from ``derive_seed(seed, b)``. Noise draws do
not depend on the alphabet, so runs that differ only in ``(a0, a1)`` share
their random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gaussian as gs
from .adversary import BASIS_LO, DisturbanceReport, EveStrategy, apply_eve, audit_floors
from .errors import InvalidArgument
from .nopa import NopaParams, spectra
from .protocol import build_source, message_displacement, propagate

BASES = (0.0, 0.5 * math.pi)
ALICE_THETAS = ((0.0, 0.0), (0.5 * math.pi, 0.5 * math.pi))
ALICE_BETAS = ((0.0, math.pi), (0.5 * math.pi, 0.5 * math.pi))
BLOCK = 4096


@dataclass(frozen=True)
class AliceChoice:
    basis: float
    thetas: tuple[float, float]
    betas: tuple[float, float]


@dataclass(frozen=True)
class BobChoice:
    basis: float
    lo_phases: tuple[float, float]


@dataclass(frozen=True)
class Frame:
    alice_basis: float
    alice_bit: int
    bob_basis: float
    outcome_mean: float
    kept: bool


@dataclass(frozen=True, eq=False)
class SessionReport:
    """Statistics of one key-exchange session.

    ``measured_floor`` is the per-sample mean-square deviation of Bob's
    outcomes from Alice's nominal means on kept frames; ``orth_floor`` is the
    same on discarded frames, where the nominal mean is zero.
    """

    n_frames: int
    n_sifted: int
    sift_fraction: float
    ber: float
    measured_floor: float
    orth_floor: float
    expected_floor: float
    eve_flags: DisturbanceReport
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    outcome_mean: np.ndarray

    @property
    def kept(self) -> np.ndarray:
        return self.alice_basis == self.bob_basis

    def frames(self) -> list[Frame]:
        return [
            Frame(BASES[a], int(bit), BASES[b], float(x), bool(a == b))
            for a, bit, b, x in zip(self.alice_basis, self.alice_bit, self.bob_basis, self.outcome_mean)
        ]


def alice_choose(rng: np.random.Generator) -> AliceChoice:
    k = int(rng.integers(2))
    return AliceChoice(BASES[k], ALICE_THETAS[k], ALICE_BETAS[k])


def bob_choose(rng: np.random.Generator) -> BobChoice:
    k = int(rng.integers(2))
    return BobChoice(BASES[k], BASIS_LO[k])


def _arriving_moments(params, source, eve, alice, bit_amp, eve_guess, bob):
    d = message_displacement(bit_amp, *ALICE_BETAS[alice])
    state = gs.displace(source, d)
    guess = BASIS_LO[eve_guess] if eve.variant == "intercept_resend" and eve.policy == "random_basis" else None
    state = propagate(params, apply_eve(state, eve, guess))
    mu, cov = gs.homodyne_moments(state, BASIS_LO[bob])
    w = np.array([1.0, -1.0])
    return float(w @ mu), float(w @ cov @ w)


def run_session(
    params: NopaParams,
    alphabet: tuple[float, float],
    n_frames: int,
    eve: EveStrategy | None = None,
    seed: int = 0,
    samples_per_frame: int = 1,
    k_sigma: float = 3.0,
) -> SessionReport:
    """Simulate ``n_frames`` frames of the phase-switching protocol."""
    a0, a1 = (float(a) for a in alphabet)
    if not a1 > a0 >= 0:
        raise InvalidArgument("alphabet must satisfy a1 > a0 >= 0")
    if not isinstance(n_frames, (int, np.integer)) or n_frames < 1:
        raise InvalidArgument("n_frames must be a positive integer")
    if samples_per_frame < 1:
        raise InvalidArgument("samples_per_frame must be positive")
    eve = eve or EveStrategy.none()
    source = build_source(params, "quantum")
    scale = math.sqrt(2.0 * params.eta)
    nominal = np.array([scale * a0, scale * a1])
    threshold = 0.5 * (nominal[0] + nominal[1])

    cache: dict[tuple[int, int, int, int], tuple[float, float]] = {}
    alice_all, bit_all, bob_all, out_all = [], [], [], []
    for b, start in enumerate(range(0, n_frames, BLOCK)):
        n = min(BLOCK, n_frames - start)
        rng = np.random.default_rng(gs.derive_seed(seed, b))
        alice = rng.integers(2, size=n)
        bits = rng.integers(2, size=n)
        bob = rng.integers(2, size=n)
        guess = rng.integers(2, size=n)
        z = rng.standard_normal((n, samples_per_frame)).mean(axis=1)

        out = np.empty(n)
        for key in set(zip(alice.tolist(), bits.tolist(), guess.tolist(), bob.tolist())):
            if key not in cache:
                a, bit, g, bb = key
                cache[key] = _arriving_moments(params, source, eve, a, (a0, a1)[bit], g, bb)
            mean, var = cache[key]
            sel = (alice == key[0]) & (bits == key[1]) & (guess == key[2]) & (bob == key[3])
            out[sel] = mean + math.sqrt(var) * z[sel]
        alice_all.append(alice)
        bit_all.append(bits)
        bob_all.append(bob)
        out_all.append(out)

    alice = np.concatenate(alice_all)
    bits = np.concatenate(bit_all)
    bob = np.concatenate(bob_all)
    outcome = np.concatenate(out_all)

    kept = alice == bob
    n_sifted = int(kept.sum())
    decided = (outcome > threshold).astype(int)
    ber = float(np.mean(decided[kept] != bits[kept])) if n_sifted else float("nan")
    resid = outcome[kept] - nominal[bits[kept]]
    measured = float(samples_per_frame * np.mean(resid**2)) if n_sifted else float("nan")
    n_disc = n_frames - n_sifted
    orth = float(samples_per_frame * np.mean(outcome[~kept] ** 2)) if n_disc else float("nan")

    expected = spectra(params).v_minus_d
    flags = audit_floors(
        measured,
        n_sifted + 1,
        expected,
        orth if n_disc else None,
        n_disc + 1,
        k_sigma=k_sigma,
    )
    return SessionReport(
        n_frames=int(n_frames),
        n_sifted=n_sifted,
        sift_fraction=n_sifted / n_frames,
        ber=ber,
        measured_floor=measured,
        orth_floor=orth,
        expected_floor=expected,
        eve_flags=flags,
        alice_basis=alice,
        alice_bit=bits,
        bob_basis=bob,
        outcome_mean=outcome,
    )
