"""Finite-statistics emulation of the prepare-and-measure runs.

Each measurement x is one setting. Bob's label a is drawn from q(a|x), the
state is prepared with isotropic error calibrated to a target fidelity, and
the detector registers white noise with probability 1 - eta_x (the LED
brightness). Sharpness is then estimated from the correct-guess frequency.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum import Assembly, Ensemble


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Detector white-noise rate per measurement (1 - eta_x), prep fidelity, shots."""

    white_noise_rate: tuple[float, ...]
    prep_fidelity: float = 1.0
    shots: int = 100_000
    rng_seed: int | tuple[int, ...] = 0

    def __post_init__(self):
        rates = tuple(float(r) for r in self.white_noise_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError(f"white-noise rates must lie in [0, 1], got {rates}")
        if not 0.0 <= self.prep_fidelity <= 1.0:
            raise ValueError("prep_fidelity must lie in [0, 1]")
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError("shots must be a positive integer")
        object.__setattr__(self, "white_noise_rate", rates)
        object.__setattr__(self, "shots", int(self.shots))

    @classmethod
    def from_sharpness(cls, etas: Sequence[float], **kwargs) -> NoiseModel:
        return cls(tuple(1.0 - float(e) for e in etas), **kwargs)

    @property
    def sharpness(self) -> tuple[float, ...]:
        return tuple(1.0 - r for r in self.white_noise_rate)

    def seed_for(self, *key: int) -> list[int]:
        base = list(self.rng_seed) if isinstance(self.rng_seed, (tuple, list)) else [int(self.rng_seed)]
        return base + [int(k) for k in key]


@dataclass(frozen=True)
class CountRecord:
    """counts[x][a_true, a_obs]; each setting x totals ``shots``."""

    counts: tuple[np.ndarray, ...]
    shots: int

    def frequencies(self, x: int) -> np.ndarray:
        """Row-normalized p(a_obs | a_true, x)."""
        c = np.asarray(self.counts[x], dtype=float)
        rows = c.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, c / rows, 0.0)

    def to_csv(self, one_based: bool = True) -> str:
        shift = 1 if one_based else 0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "a_true", "a_obs", "count"])
        for x, c in enumerate(self.counts):
            for a, b in np.ndindex(c.shape):
                value = c[a, b]
                writer.writerow([x + shift, a + shift, b + shift, int(value) if float(value).is_integer() else value])
        return buf.getvalue()


def _prep_visibility(fidelity: float, d: int) -> float:
    """Mixing weight v with F = v + (1 - v)/d for a pure target state."""
    return (fidelity - 1.0 / d) / (1.0 - 1.0 / d)


def outcome_probabilities(assembly: Assembly, ensembles: Sequence[Ensemble], noise: NoiseModel, x: int) -> np.ndarray:
    """p(a_obs | a_true, x) under prep error and detector white noise."""
    d = assembly.dim
    eta = noise.sharpness[x]
    v = _prep_visibility(noise.prep_fidelity, d)
    m = assembly[x]
    traces = np.array([e.trace() for e in m.effects])
    probs = np.empty((len(ensembles[x]), m.outcomes))
    for a, rho in enumerate(ensembles[x].states):
        rho_prep = v * rho.data + (1 - v) * np.eye(d) / d
        ideal = np.array([np.vdot(rho_prep, e.data).real for e in m.effects])
        probs[a] = eta * ideal + (1 - eta) * traces / d
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum(axis=1, keepdims=True)


def _check(assembly: Assembly, ensembles: Sequence[Ensemble], noise: NoiseModel) -> None:
    if len(ensembles) != len(assembly) or len(noise.white_noise_rate) != len(assembly):
        raise ValueError("assembly, ensembles and noise model must cover the same measurements")


def simulate_counts(assembly: Assembly, ensembles: Sequence[Ensemble], noise: NoiseModel) -> CountRecord:
    """Seeded multinomial sampling; each (x, a) draws from its own stream."""
    _check(assembly, ensembles, noise)
    out = []
    for x in range(len(assembly)):
        probs = outcome_probabilities(assembly, ensembles, noise, x)
        alloc = np.random.default_rng(noise.seed_for(x)).multinomial(noise.shots, assembly.outcome_priors[x])
        rows = [
            np.random.default_rng(noise.seed_for(x, a)).multinomial(int(n), probs[a])
            for a, n in enumerate(alloc)
        ]
        out.append(np.array(rows, dtype=np.int64))
    return CountRecord(tuple(out), noise.shots)


def expected_counts(assembly: Assembly, ensembles: Sequence[Ensemble], noise: NoiseModel) -> CountRecord:
    """Noise-free expectation of :func:`simulate_counts` (float counts)."""
    _check(assembly, ensembles, noise)
    out = []
    for x in range(len(assembly)):
        probs = outcome_probabilities(assembly, ensembles, noise, x)
        out.append(noise.shots * np.asarray(assembly.outcome_priors[x])[:, None] * probs)
    return CountRecord(tuple(out), noise.shots)


@dataclass(frozen=True)
class Calibration:
    """Per-setting sharp reference frequency and chance level."""

    reference: tuple[float, ...]
    chance: tuple[float, ...]


def calibrate(assembly: Assembly, ensembles: Sequence[Ensemble], prep_fidelity: float = 1.0) -> Calibration:
    """Correct-guess frequencies at eta = 1 (given the prep error) and eta = 0."""
    sharp = NoiseModel((0.0,) * len(assembly), prep_fidelity, 1)
    ref, chance = [], []
    for x in range(len(assembly)):
        q = np.asarray(assembly.outcome_priors[x])
        ref.append(float(q @ np.diag(outcome_probabilities(assembly, ensembles, sharp, x))))
        traces = np.array([e.trace() for e in assembly[x].effects])
        chance.append(float(q @ traces / assembly.dim))
    return Calibration(tuple(ref), tuple(chance))


@dataclass(frozen=True)
class HyperplaneEstimate:
    value: float
    stderr: float
    eta_hat: tuple[float, ...]
    eta_stderr: tuple[float, ...]


def estimate_hyperplane(counts: CountRecord, weights: Sequence[float], calibration: Calibration) -> HyperplaneEstimate:
    """sum_x q(x) eta_hat_x with binomial error propagation.

    eta_hat_x = (f_x - chance_x) / (reference_x - chance_x), where f_x is the
    prior-weighted correct-guess frequency of setting x. Settings with zero
    weight are skipped.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(counts.counts),):
        raise ValueError("need one weight per setting")
    etas, ses = [], []
    value, var = 0.0, 0.0
    for x, c in enumerate(counts.counts):
        c = np.asarray(c, dtype=float)
        n_a = c.sum(axis=1)
        if n_a.sum() <= 0:
            raise EstimationError(f"no counts for setting {x}")
        q = n_a / n_a.sum()
        correct = np.diag(c)
        with np.errstate(invalid="ignore", divide="ignore"):
            f_a = np.where(n_a > 0, correct / n_a, 0.0)
            var_a = np.where(n_a > 0, f_a * (1 - f_a) / n_a, 0.0)
        f = float(q @ f_a)
        var_f = float(q**2 @ var_a)
        denom = calibration.reference[x] - calibration.chance[x]
        if abs(denom) < 1e-12:
            if w[x] != 0:
                raise EstimationError(f"setting {x}: sharp reference equals chance level")
            etas.append(math.nan)
            ses.append(math.nan)
            continue
        eta = (f - calibration.chance[x]) / denom
        se = math.sqrt(var_f) / abs(denom)
        etas.append(eta)
        ses.append(se)
        if w[x] != 0:
            value += w[x] * eta
            var += (w[x] * se) ** 2
    return HyperplaneEstimate(value, math.sqrt(var), tuple(etas), tuple(ses))


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    stderr: float


def fidelity_report(assembly: Assembly, noise: NoiseModel) -> FidelityEstimate:
    """Mean overlap <psi|rho_prep|psi> over every eigenstate, sampled at ``shots``.

    Each eigenstate is prepared and projected back onto itself ``shots``
    times; the estimate is the mean success frequency.
    """
    from .qsd import optimal_ensembles

    d = assembly.dim
    v = _prep_visibility(noise.prep_fidelity, d)
    freqs = []
    variances = []
    for x, ens in enumerate(optimal_ensembles(assembly)):
        for a, rho in enumerate(ens.states):
            purity = float(np.vdot(rho.data, rho.data).real)
            p = float(np.clip(v * purity + (1 - v) / d, 0.0, 1.0))
            k = np.random.default_rng(noise.seed_for(10_000 + x, a)).binomial(noise.shots, p)
            f = k / noise.shots
            freqs.append(f)
            variances.append(f * (1 - f) / noise.shots)
    n = len(freqs)
    return FidelityEstimate(float(np.mean(freqs)), math.sqrt(sum(variances)) / n)
