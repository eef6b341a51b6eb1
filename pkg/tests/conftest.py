import numpy as np
import pytest

from eprcomm import gaussian as gs

_CRITERIA: list[tuple[str, bool, str]] = []


def random_symplectic(rng: np.random.Generator, n_modes: int, max_squeeze: float = 1.0) -> np.ndarray:
    """Product of random rotations, single-mode squeezers and beamsplitters."""
    S = np.eye(2 * n_modes)
    for _ in range(2 * n_modes):
        for m in range(n_modes):
            blk = np.eye(2 * n_modes)
            r = rng.uniform(-max_squeeze, max_squeeze)
            R = gs.rotation_block(rng.uniform(0, 2 * np.pi))
            blk[2 * m : 2 * m + 2, 2 * m : 2 * m + 2] = np.diag([np.exp(r), np.exp(-r)]) @ R
            S = blk @ S
        if n_modes > 1:
            i, j = rng.choice(n_modes, 2, replace=False)
            S =_bs_matrix(n_modes, int(i), int(j), rng.uniform(0, 1), rng.uniform(0, 2 * np.pi)) @ S
    return S


def _bs_matrix(n_modes, i, j, tau, phase):
    t, r = np.sqrt(tau), np.sqrt(1 - tau)
    R = gs.rotation_block(phase)
    S = np.eye(2 * n_modes)
    S[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = t * np.eye(2)
    S[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = -r * R.T
    S[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = r * R
    S[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = t * np.eye(2)
    return S


def random_state(rng: np.random.Generator, n_modes: int | None = None, max_squeeze: float = 1.0) -> gs.GaussianState:
    """Random mixed Gaussian state: thermal modes through a random symplectic map."""
    n = int(rng.integers(1, 4)) if n_modes is None else n_modes
    nu = 1.0 + rng.exponential(1.0, n)
    S = random_symplectic(rng, n, max_squeeze)
    cov = S @ np.diag(np.repeat(nu, 2)) @ S.T
    return gs.GaussianState(rng.normal(0, 2, 2 * n), cov)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record one acceptance line; fails the test if any named check is false."""

    def report(label: str, checks: dict[str, bool], detail: str = "") -> None:
        ok = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = detail + (f" | failed: {', '.join(failed)}" if failed else "")
        _CRITERIA.append((label, ok, line))
        print(f"{'PASS' if ok else 'FAIL'} {label}: {line}")
        assert ok, f"{label} failed checks: {failed} ({detail})"

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, line in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}: {line}")
