"""Gaussian-state engine for field sidebands.

States are described by a mean vector and a covariance matrix of quadrature
amplitudes ordered ``(X1, Y1, X2, Y2, ...)``. Units are vacuum-normalized:
the vacuum has ``Var(X) = Var(Y) = 1`` for every mode, so two independent
vacua give a difference-current variance of 2.

Rotation convention, used by every module in the package: rotating a mode by
``theta`` maps ::

    X' =  X cos(theta) + Y sin(theta)
    Y' = -X sin(theta) + Y cos(theta)

so ``theta = pi/2`` sends ``X -> Y`` and ``Y -> -X``, and the quadrature read by
a homodyne detector with local-oscillator phase ``theta`` is the ``X'`` above.

All states are immutable; every operation returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, UnphysicalState

SYMMETRY_RTOL = 1e-10
PHYSICALITY_TOL = 1e-9


def physicality_tolerance(cov_eigenvalues) -> float:
    """Allowed deficit of the smallest symplectic eigenvalue below 1.

    ``PHYSICALITY_TOL`` for well-conditioned states. A strongly squeezed
    state stores its small variance as the difference of two large entries,
    so rounding alone moves ``nu`` by about ``eps * cond(cov)``; the bound
    grows with the condition number to keep such states representable.
    """
    eig = np.asarray(cov_eigenvalues, dtype=float)
    cond = float(eig[-1] / eig[0])
    return max(PHYSICALITY_TOL, 16.0 * np.finfo(float).eps * cond)


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form for the ``(X1, Y1, ...)`` ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Return the ``N`` symplectic eigenvalues of a ``2N x 2N`` covariance, ascending.

    With ``cov = L L^T`` the antisymmetric matrix ``L^T J L`` has eigenvalues
    ``+/- i nu``. Taking them from the Hermitian matrix ``1j * L^T J L`` keeps
    the error absolute in ``||cov||`` even for strongly squeezed states, where
    a general eigensolver on ``J @ cov`` loses several digits. Falls back to
    the general solver when ``cov`` is not positive definite.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    J = symplectic_form(n)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        nu = np.sort(np.abs(np.linalg.eigvals(J @ cov)))
        return nu[::2]
    ev = np.linalg.eigvalsh(1j * (L.T @ J @ L))
    return np.sort(ev[ev.size // 2 :])


def rotation_block(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64-bit child seed from ``seed`` and integer ``keys``.

    This is the splitting rule for per-frame and per-block streams: the child
    depends only on ``(seed, *keys)``, so results do not depend on the order in
    which frames or blocks are evaluated.
    """
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise InvalidArgument(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < 2**64:
        raise InvalidArgument(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(seed)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean and covariance of ``n_modes`` sideband modes.

    Construction validates shapes, symmetry (relative tolerance 1e-10) and the
    uncertainty principle (all symplectic eigenvalues >= 1 - 1e-9, widened
    for ill-conditioned matrices by :func:`physicality_tolerance`). The stored
    arrays are read-only copies.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        dim = mean.shape[0]
        if dim == 0 or dim % 2:
            raise InvalidArgument(f"mean must have even, nonzero length, got {dim}")
        if cov.shape != (dim, dim):
            raise InvalidArgument(f"cov must be {dim}x{dim}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidArgument("mean and cov must be finite")

        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise UnphysicalState("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)

        eig = np.linalg.eigvalsh(cov)
        if eig[0] <= 0.0:
            raise UnphysicalState("covariance matrix is not positive definite")
        nu_min = symplectic_eigenvalues(cov)[0]
        if nu_min < 1.0 - physicality_tolerance(eig):
            raise UnphysicalState(
                f"smallest symplectic eigenvalue {nu_min:.12g} violates the uncertainty principle"
            )

        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.shape[0] // 2

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.n_modes == other.n_modes
            and np.allclose(self.mean, other.mean, rtol=0.0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"GaussianState(n_modes={self.n_modes})"


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Measurement records drawn from a Gaussian state.

    ``outcomes`` has one row per sample and one column per recorded
    quadrature; ``phases[k]`` and ``modes[k]`` describe column ``k``.
    """

    outcomes: np.ndarray
    phases: tuple[float, ...]
    seed: int
    modes: tuple[int, ...]

    def __post_init__(self) -> None:
        outcomes = np.asarray(self.outcomes, dtype=float)
        if outcomes.ndim != 2 or outcomes.shape[1] != len(self.phases):
            raise InvalidArgument("outcomes must be n_samples x len(phases)")
        if not np.all(np.isfinite(outcomes)):
            raise InvalidArgument("sample outcomes must be finite")
        outcomes.flags.writeable = False
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n_samples(self) -> int:
        return self.outcomes.shape[0]


# -- constructors -------------------------------------------------------------


def make_vacuum(n_modes: int) -> GaussianState:
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise InvalidArgument(f"n_modes must be a positive integer, got {n_modes!r}")
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def make_thermal(variances: Sequence[float]) -> GaussianState:
    """Product of phase-insensitive states with the given per-mode variances (>= 1)."""
    v = np.asarray(variances, dtype=float).reshape(-1)
    if v.size == 0:
        raise InvalidArgument("need at least one mode")
    return GaussianState(np.zeros(2 * v.size), np.diag(np.repeat(v, 2)))


def make_epr(s_minus: float, s_plus: float) -> GaussianState:
    """Two-mode EPR state with ``Var(X_A - X_B) = Var(Y_A + Y_B) = 2 s_minus``.

    Each beam alone is phase insensitive with variance ``(s_plus + s_minus)/2``.
    X quadratures are positively correlated and Y quadratures anticorrelated;
    this sign choice is the one every other module relies on.
    """
    if not (s_minus > 0 and s_plus > 0 and np.isfinite(s_plus)):
        raise InvalidArgument("s_minus and s_plus must be positive and finite")
    if s_minus * s_plus < 1.0 - PHYSICALITY_TOL:
        raise UnphysicalState(f"s_minus * s_plus = {s_minus * s_plus:.6g} < 1")
    if not s_minus <= 1.0 + PHYSICALITY_TOL or not s_plus >= 1.0 - PHYSICALITY_TOL:
        raise InvalidArgument("need s_minus <= 1 <= s_plus")
    a = 0.5 * (s_plus + s_minus)
    c = 0.5 * (s_plus - s_minus)
    cov = np.array(
        [
            [a, 0.0, c, 0.0],
            [0.0, a, 0.0, -c],
            [c, 0.0, a, 0.0],
            [0.0, -c, 0.0, a],
        ]
    )
    return GaussianState(np.zeros(4), cov)


def tensor(*states: GaussianState) -> GaussianState:
    """Joint state of independent subsystems, modes concatenated in order."""
    if not states:
        raise InvalidArgument("need at least one state")
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((mean.size, mean.size))
    k = 0
    for s in states:
        d = s.mean.size
        cov[k : k + d, k : k + d] = s.cov
        k += d
    return GaussianState(mean, cov)


def reduce(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    """Marginal state of the listed modes (in the listed order)."""
    for m in modes:
        _check_mode(state, m)
    idx = _quad_index(modes)
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


# -- channels -----------------------------------------------------------------


def displace(state: GaussianState, d) -> GaussianState:
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.shape != state.mean.shape:
        raise InvalidArgument(f"displacement length {d.size} != {state.mean.size}")
    return GaussianState(state.mean + d, state.cov)


def phase_rotate(state: GaussianState, mode: int, theta: float) -> GaussianState:
    _check_mode(state, mode)
    S = np.eye(2 * state.n_modes)
    i = 2 * mode
    S[i : i + 2, i : i + 2] = rotation_block(theta)
    return _symplectic(state, S)


def beamsplitter(
    state: GaussianState, mode_i: int, mode_j: int, transmissivity: float, phase: float = 0.0
) -> GaussianState:
    """Mix two modes on a lossless beamsplitter of power transmissivity ``transmissivity``.

    With ``t = sqrt(transmissivity)``, ``r = sqrt(1 - transmissivity)`` and ``R``
    the rotation block for ``phase``::

        out_i = t * in_i - r * R.T @ in_j
        out_j = r * R @ in_i + t * in_j

    ``transmissivity = 0.5`` and ``phase = 0`` give ``(i - j)/sqrt(2)`` and
    ``(i + j)/sqrt(2)`` on both quadratures.
    """
    _check_mode(state, mode_i)
    _check_mode(state, mode_j)
    if mode_i == mode_j:
        raise InvalidArgument("beamsplitter needs two distinct modes")
    if not 0.0 <= transmissivity <= 1.0:
        raise InvalidArgument(f"transmissivity must lie in [0, 1], got {transmissivity}")
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    R = rotation_block(phase)
    S = np.eye(2 * state.n_modes)
    i, j = 2 * mode_i, 2 * mode_j
    S[i : i + 2, i : i + 2] = t * np.eye(2)
    S[i : i + 2, j : j + 2] = -r * R.T
    S[j : j + 2, i : i + 2] = r * R
    S[j : j + 2, j : j + 2] = t * np.eye(2)
    return _symplectic(state, S)


def loss_channel(state: GaussianState, mode: int, xi: float) -> GaussianState:
    """Pure loss on one mode: transmit power fraction ``xi``, fill the rest with vacuum."""
    _check_mode(state, mode)
    if not 0.0 < xi <= 1.0:
        raise InvalidArgument(f"loss efficiency must lie in (0, 1], got {xi}")
    scale = np.ones(2 * state.n_modes)
    scale[2 * mode : 2 * mode + 2] = np.sqrt(xi)
    added = np.zeros_like(scale)
    added[2 * mode : 2 * mode + 2] = 1.0 - xi
    cov = scale[:, None] * state.cov * scale[None, :] + np.diag(added)
    return GaussianState(scale * state.mean, cov)


def add_noise(state: GaussianState, noise: np.ndarray) -> GaussianState:
    """Add a positive-semidefinite classical noise covariance."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape != state.cov.shape:
        raise InvalidArgument("noise covariance has the wrong shape")
    if np.linalg.eigvalsh(0.5 * (noise + noise.T))[0] < -PHYSICALITY_TOL * max(1.0, np.abs(noise).max()):
        raise InvalidArgument("added noise must be positive semidefinite")
    return GaussianState(state.mean, state.cov + noise)


# -- measurement --------------------------------------------------------------


def homodyne_moments(
    state: GaussianState, phases: Sequence[float], modes: Sequence[int] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic mean and covariance of ``X_theta`` for one quadrature per mode."""
    M, _ = _selector(state, phases, modes)
    return M @ state.mean, M @ state.cov @ M.T


def heterodyne_moments(state: GaussianState, mode) -> tuple[np.ndarray, np.ndarray]:
    """Analytic mean and covariance of simultaneous (X, Y) records.

    ``mode`` is one mode index or a sequence of them; records are ordered
    ``(X, Y)`` per listed mode. Each record carries one added vacuum unit:
    ``Cov(records) = Cov(quadratures) + I``, means unchanged.
    """
    modes = [mode] if isinstance(mode, (int, np.integer)) else list(mode)
    if len(set(modes)) != len(modes) or not modes:
        raise InvalidArgument("list each heterodyned mode once")
    for m in modes:
        _check_mode(state, m)
    idx = _quad_index(modes)
    return state.mean[idx].copy(), state.cov[np.ix_(idx, idx)] + np.eye(idx.size)


def sample_quadratures(
    state: GaussianState,
    phases: Sequence[float],
    n_samples: int,
    seed: int,
    modes: Sequence[int] | None = None,
) -> SampleBatch:
    """Draw i.i.d. balanced-homodyne records, one quadrature per listed mode.

    ``phases[k]`` is the local-oscillator angle for ``modes[k]`` (all modes in
    order when ``modes`` is omitted). Identical arguments give bit-identical
    batches.
    """
    seed = _check_seed(seed)
    _check_count(n_samples)
    M, modes = _selector(state, phases, modes)
    out = draw_gaussian(np.random.default_rng(seed), M @ state.mean, M @ state.cov @ M.T, n_samples)
    return SampleBatch(out, tuple(float(p) for p in phases), seed, tuple(modes))


def heterodyne_sample(state: GaussianState, mode, n_samples: int, seed: int) -> SampleBatch:
    """Draw simultaneous X and Y records, each with one added vacuum unit.

    ``mode`` may be a single index (two columns) or a sequence of indices
    (two columns per mode, jointly sampled).
    """
    seed = _check_seed(seed)
    _check_count(n_samples)
    mu, cov = heterodyne_moments(state, mode)
    modes = [mode] if isinstance(mode, (int, np.integer)) else list(mode)
    out = draw_gaussian(np.random.default_rng(seed), mu, cov, n_samples)
    return SampleBatch(
        out, (0.0, 0.5 * np.pi) * len(modes), seed, tuple(m for m in modes for _ in (0, 1))
    )


def draw_gaussian(rng: np.random.Generator, mean: np.ndarray, cov: np.ndarray, n: int) -> np.ndarray:
    """``n`` rows from N(mean, cov) via a Cholesky factor; ``cov`` must be positive definite."""
    L = np.linalg.cholesky(cov)
    z = rng.standard_normal((n, mean.size))
    return mean + z @ L.T


# -- helpers ------------------------------------------------------------------


def _symplectic(state: GaussianState, S: np.ndarray) -> GaussianState:
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def _check_mode(state: GaussianState, mode: int) -> None:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < state.n_modes:
        raise InvalidArgument(f"mode {mode!r} out of range for {state.n_modes} modes")


def _check_count(n_samples: int) -> None:
    if not isinstance(n_samples, (int, np.integer)) or n_samples < 1:
        raise InvalidArgument(f"n_samples must be a positive integer, got {n_samples!r}")


def _quad_index(modes: Sequence[int]) -> np.ndarray:
    return np.array([q for m in modes for q in (2 * m, 2 * m + 1)], dtype=int)


def _selector(state, phases, modes):
    modes = list(range(state.n_modes)) if modes is None else list(modes)
    phases = list(phases)
    if len(phases) != len(modes):
        raise InvalidArgument(f"expected {len(modes)} phases, got {len(phases)}")
    if len(set(modes)) != len(modes):
        raise InvalidArgument("homodyne detection reads one quadrature per mode")
    M = np.zeros((len(modes), 2 * state.n_modes))
    for k, (m, th) in enumerate(zip(modes, phases)):
        _check_mode(state, m)
        M[k, 2 * m] = np.cos(th)
        M[k, 2 * m + 1] = np.sin(th)
    return M, modes
