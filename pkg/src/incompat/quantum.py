"""Measurements, assemblies, ensembles and the concrete measurement families."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .linalg import HermitianOperator, is_psd

MEASUREMENT_TOL = 1e-9
DISTRIBUTION_TOL = 1e-12
STATE_TOL = 1e-10


def _as_distribution(values: Sequence[float], length: int, what: str) -> tuple[float, ...]:
    q = np.asarray(values, dtype=float).ravel()
    if q.shape != (length,):
        raise ValueError(f"{what}: expected {length} entries, got {q.size}")
    if not np.all(np.isfinite(q)) or np.any(q < -DISTRIBUTION_TOL):
        raise ValueError(f"{what}: entries must be finite and nonnegative, got {q.tolist()}")
    if abs(q.sum() - 1.0) > DISTRIBUTION_TOL * max(1, length):
        raise ValueError(f"{what}: entries must sum to 1, got {q.sum()!r}")
    return tuple(float(v) for v in np.clip(q, 0.0, None))


@dataclass(frozen=True)
class Ket:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).ravel()
        if abs(np.linalg.norm(v) - 1.0) > STATE_TOL:
            raise ValueError(f"ket must have unit norm, got {np.linalg.norm(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> HermitianOperator:
        return HermitianOperator.projector(self.amplitudes)


@dataclass(frozen=True)
class Measurement:
    """A POVM: an ordered tuple of PSD effects summing to the identity."""

    effects: tuple[HermitianOperator, ...]

    def __post_init__(self):
        effects = tuple(
            e if isinstance(e, HermitianOperator) else HermitianOperator(e)
            for e in self.effects
        )
        if not effects:
            raise ValueError("a measurement needs at least one effect")
        d = effects[0].dim
        if any(e.dim != d for e in effects):
            raise ValueError("all effects must share one dimension")
        for a, e in enumerate(effects):
            if not is_psd(e, MEASUREMENT_TOL):
                raise ValueError(f"effect {a} is not positive semidefinite")
        total = sum(e.data for e in effects)
        err = np.linalg.norm(total - np.eye(d))
        if err > MEASUREMENT_TOL:
            raise ValueError(f"effects do not sum to the identity (error {err:.3e})")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def outcomes(self) -> int:
        return len(self.effects)

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, a: int) -> HermitianOperator:
        return self.effects[a]

    @classmethod
    def from_basis(cls, vectors: Sequence[Sequence[complex]]) -> Measurement:
        """Rank-one projective measurement onto the given orthonormal vectors."""
        return cls(tuple(HermitianOperator.projector(v) for v in vectors))

    @classmethod
    def from_bloch(cls, b: Sequence[float]) -> Measurement:
        """Unbiased binary qubit measurement with effects (I +- b.sigma)/2."""
        b = np.asarray(b, dtype=float)
        if b.shape != (3,) or np.linalg.norm(b) > 1 + 1e-12:
            raise ValueError("Bloch vector must have 3 components and norm <= 1")
        bs = b[0] * PAULI_X + b[1] * PAULI_Y + b[2] * PAULI_Z
        return cls((HermitianOperator((np.eye(2) + bs) / 2), HermitianOperator((np.eye(2) - bs) / 2)))


@dataclass(frozen=True)
class Assembly:
    """Measurements indexed by x with input weights q(x) and priors q(a|x).

    ``weights`` and ``outcome_priors`` default to uniform distributions.
    """

    measurements: tuple[Measurement, ...]
    weights: tuple[float, ...] = None
    outcome_priors: tuple[tuple[float, ...], ...] = None

    def __post_init__(self):
        ms = tuple(self.measurements)
        if not ms:
            raise ValueError("an assembly needs at least one measurement")
        if any(m.dim != ms[0].dim for m in ms):
            raise ValueError("all measurements must share one dimension")
        weights = self.weights
        if weights is None:
            weights = [1.0 / len(ms)] * len(ms)
        priors = self.outcome_priors
        if priors is None:
            priors = [[1.0 / m.outcomes] * m.outcomes for m in ms]
        if len(priors) != len(ms):
            raise ValueError("need one outcome prior per measurement")
        object.__setattr__(self, "measurements", ms)
        object.__setattr__(self, "weights", _as_distribution(weights, len(ms), "weights"))
        object.__setattr__(
            self,
            "outcome_priors",
            tuple(
                _as_distribution(p, m.outcomes, f"outcome_priors[{x}]")
                for x, (p, m) in enumerate(zip(priors, ms))
            ),
        )

    @property
    def dim(self) -> int:
        return self.measurements[0].dim

    def __len__(self) -> int:
        return len(self.measurements)

    def __getitem__(self, x: int) -> Measurement:
        return self.measurements[x]

    def joint_prior(self, a: int, x: int) -> float:
        """q(a, x) = q(x) q(a|x)."""
        return self.weights[x] * self.outcome_priors[x][a]

    def restrict(self, indices: Sequence[int]) -> Assembly:
        """Sub-assembly on ``indices`` with q(x) renormalized over them."""
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx) or any(not 0 <= i < len(self) for i in idx):
            raise ValueError(f"invalid measurement indices {list(indices)}")
        w = np.array([self.weights[i] for i in idx])
        if w.sum() <= 0:
            raise ValueError("restricted weights sum to zero")
        return Assembly(
            tuple(self.measurements[i] for i in idx),
            tuple(w / w.sum()),
            tuple(self.outcome_priors[i] for i in idx),
        )

    def with_sharpness(self, etas: Sequence[float]) -> Assembly:
        """Depolarize measurement x with sharpness ``etas[x]``."""
        if len(etas) != len(self):
            raise ValueError("need one sharpness per measurement")
        return replace(self, measurements=tuple(depolarize(m, e) for m, e in zip(self.measurements, etas)))


@dataclass(frozen=True)
class Ensemble:
    """States rho_a with prior probabilities."""

    states: tuple[HermitianOperator, ...]
    priors: tuple[float, ...] = None

    def __post_init__(self):
        states = tuple(
            s if isinstance(s, HermitianOperator) else HermitianOperator(s) for s in self.states
        )
        for a, s in enumerate(states):
            if abs(s.trace() - 1.0) > STATE_TOL:
                raise ValueError(f"state {a} does not have unit trace")
            if not is_psd(s, STATE_TOL):
                raise ValueError(f"state {a} is not positive semidefinite")
        priors = self.priors if self.priors is not None else [1.0 / len(states)] * len(states)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", _as_distribution(priors, len(states), "priors"))

    def __len__(self) -> int:
        return len(self.states)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def depolarize(m: Measurement, eta: float) -> Measurement:
    """White noise: M_a -> eta M_a + (1 - eta) Tr[M_a] I / d."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"sharpness must lie in [0, 1], got {eta}")
    d = m.dim
    eye = np.eye(d)
    return Measurement(
        tuple(HermitianOperator(eta * e.data + (1 - eta) * e.trace() * eye / d) for e in m.effects)
    )


def _pauli_bases() -> list[list[np.ndarray]]:
    r = 1 / np.sqrt(2)
    return [
        [np.array([r, r]), np.array([r, -r])],
        [np.array([r, 1j * r]), np.array([r, -1j * r])],
        [np.array([1.0, 0.0]), np.array([0.0, 1.0])],
    ]


def pauli_assembly() -> Assembly:
    """Sharp X, Y, Z measurements (in that order) with uniform priors."""
    return Assembly(tuple(Measurement.from_basis(b) for b in _pauli_bases()))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, int(n**0.5) + 1))


def mub_bases(d: int) -> list[np.ndarray]:
    """All d + 1 mutually unbiased bases for prime d, as column-vector matrices.

    Odd d: the computational basis, then for b = 0..d-1 the basis with
    <j|e_l> = omega**(b j^2 + j l) / sqrt(d). d = 2: the X, Y, Z eigenbases.
    """
    if not _is_prime(d):
        raise ValueError(f"MUB construction requires a prime dimension, got {d}")
    if d == 2:
        return [np.column_stack(b) for b in _pauli_bases()]
    omega = np.exp(2j * np.pi / d)
    j = np.arange(d)
    bases = [np.eye(d, dtype=complex)]
    for b in range(d):
        phase = (b * j[:, None] ** 2 + j[:, None] * j[None, :]) % d
        bases.append(omega**phase / np.sqrt(d))
    return bases


def mub_assembly(d: int, k: int) -> Assembly:
    """The first ``k`` mutually unbiased bases in prime dimension ``d``."""
    if not _is_prime(d):
        raise ValueError(f"MUB construction requires a prime dimension, got {d}")
    if not 2 <= k <= d + 1:
        raise ValueError(f"number of bases must lie in [2, {d + 1}], got {k}")
    bases = mub_bases(d)[:k]
    return Assembly(tuple(Measurement.from_basis(basis.T) for basis in bases))


def set_weights(assembly: Assembly, q: Sequence[float]) -> Assembly:
    return replace(assembly, weights=tuple(q))


def top_eigenstate(e: HermitianOperator, degeneracy_tol: float = 1e-10) -> Ket:
    """Unit vector in the top eigenspace of ``e``, chosen canonically.

    The top eigenspace projector P is applied to the standard basis vector
    e_i with the largest ||P e_i|| (lowest i on ties), and the result's largest
    component (lowest index on ties) is made real and positive. The choice
    depends only on ``e``, not on the eigensolver's basis.
    """
    w, v = np.linalg.eigh(e.data)
    top = v[:, w >= w[-1] - degeneracy_tol * max(1.0, abs(w[-1]))]
    proj = top @ top.conj().T
    norms = np.linalg.norm(proj, axis=0)
    i = int(np.flatnonzero(norms >= norms.max() - 1e-12)[0])
    vec = proj[:, i] / norms[i]
    mags = np.abs(vec)
    k = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    vec = vec * (abs(vec[k]) / vec[k])
    return Ket(vec / np.linalg.norm(vec))
