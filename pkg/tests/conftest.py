import numpy as np
import pytest

from incompat.quantum import Assembly, Measurement


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_basis_measurement(d: int, rng: np.random.Generator) -> Measurement:
    u = haar_unitary(d, rng)
    return Measurement.from_basis([u[:, i] for i in range(d)])


def random_assembly(d: int, m: int, rng: np.random.Generator, eta_range=(0.4, 1.0)) -> Assembly:
    meas = tuple(random_basis_measurement(d, rng) for _ in range(m))
    weights = rng.dirichlet(np.ones(m))
    return Assembly(meas, weights).with_sharpness(rng.uniform(*eta_range, size=m))


def random_povm(d: int, k: int, rng: np.random.Generator) -> Measurement:
    """Generic (non-projective) POVM with k outcomes."""
    raw = []
    for _ in range(k):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        raw.append(g @ g.conj().T)
    total = sum(raw)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(w**-0.5) @ v.conj().T
    return Measurement(tuple(inv_sqrt @ e @ inv_sqrt for e in raw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
