import itertools
import math

import numpy as np
import pytest

from incompat.linalg import HermitianOperator
from incompat.quantum import Assembly, Ensemble, Measurement, depolarize, mub_assembly, pauli_assembly
from incompat.qsd import compatible_guessing, guessing_probability, optimal_ensembles, witness_w2
from incompat.sdp import SdpProblem, solve
from incompat.witness import pairwise_robustness

from conftest import haar_unitary, random_assembly, random_basis_measurement


def _random_pure(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return HermitianOperator.projector(v / np.linalg.norm(v))


def test_projective_ensembles_are_eigenbases():
    a = mub_assembly(3, 2)
    for m, ens in zip(a.measurements, optimal_ensembles(a)):
        for e, rho in zip(m.effects, ens.states):
            assert rho.allclose(e, 1e-10)


def test_depolarized_keeps_eigenbasis():
    a = pauli_assembly()
    noisy = a.with_sharpness((0.3, 0.6, 0.9))
    for e1, e2 in zip(optimal_ensembles(a), optimal_ensembles(noisy)):
        assert all(r1.allclose(r2, 1e-10) for r1, r2 in zip(e1.states, e2.states))


def test_trivial_measurement_tie_break():
    m = Measurement((np.eye(2) / 2, np.eye(2) / 2))
    ens = optimal_ensembles(Assembly((m,)))
    assert np.allclose(ens[0].states[0].data, np.diag([1, 0]))


def test_guessing_probability_values():
    a = mub_assembly(3, 4)
    assert guessing_probability(a, optimal_ensembles(a)) == pytest.approx(1.0)
    flat = a.with_sharpness((0, 0, 0, 0))
    assert guessing_probability(flat, optimal_ensembles(a)) == pytest.approx(1 / 3)
    z = Assembly((depolarize(pauli_assembly()[2], 0.5),))
    assert guessing_probability(z, optimal_ensembles(z)) == pytest.approx(0.75)


def test_guessing_shape_mismatch():
    a = pauli_assembly()
    with pytest.raises(ValueError):
        guessing_probability(a, optimal_ensembles(a)[:2])


def test_optimal_ensembles_beat_random(rng):
    a = random_assembly(3, 2, rng)
    best = guessing_probability(a, optimal_ensembles(a))
    for _ in range(100):
        ens = [Ensemble(tuple(_random_pure(3, rng) for _ in range(3)), a.outcome_priors[x]) for x in range(2)]
        assert guessing_probability(a, ens) <= best + 1e-12


def test_xz_compatible_guessing_value():
    a = pauli_assembly()
    value, povm = compatible_guessing(a, optimal_ensembles(a), 0, 2)
    assert value == pytest.approx(0.5 * (1 + 1 / math.sqrt(2)), abs=1e-6)
    assert np.linalg.norm(sum(povm.values()) - np.eye(2)) <= 1e-7


def test_xz_grid_search_oracle():
    # projective measurements in the xz-plane with every relabeling z(+), z(-)
    a = pauli_assembly()
    ens = optimal_ensembles(a)
    ex, ez = ens[0], ens[2]
    best = 0.0
    for theta in np.linspace(0, 2 * np.pi, 721):
        n = np.array([np.cos(theta / 2), np.sin(theta / 2)])
        plus = np.outer(n, n)
        proj = (plus, np.eye(2) - plus)
        for labels in itertools.product(itertools.product(range(2), range(2)), repeat=2):
            v = sum(
                np.trace(p @ (0.25 * ex.states[gs].data + 0.25 * ez.states[gt].data)).real
                for p, (gs, gt) in zip(proj, labels)
            )
            best = max(best, v)
    sdp, _ = compatible_guessing(a, ens, 0, 2)
    assert best == pytest.approx(sdp, abs=1e-4)
    assert best <= sdp + 1e-9


def test_witness_xz():
    r = witness_w2(pauli_assembly(), 0, 2)
    assert r.W2 == pytest.approx(1 - 0.5 * (1 + 1 / math.sqrt(2)), abs=1e-6)
    assert r.W2 == pytest.approx(r.P_g - r.P_g_compatible)
    assert 0 <= r.P_g_compatible <= r.P_g <= 1 + 1e-9
    assert r.to_dict()["pair"] == [1, 3]


def test_witness_identical_pair():
    z = pauli_assembly()[2]
    assert witness_w2(Assembly((z, z)), 0, 1).W2 == pytest.approx(0.0, abs=1e-7)


def test_witness_compatible_pair_nonpositive():
    a = pauli_assembly().with_sharpness((0.5, 0.5, 0.5))
    assert pairwise_robustness(a, 0, 2).R == pytest.approx(1.0, abs=1e-7)
    assert witness_w2(a, 0, 2).W2 <= 1e-6


def test_commuting_disjoint_supports():
    # d = 4: measurement s lives on span{0,1}, t on span{2,3}; both ensembles
    # can be read out perfectly by one measurement in the standard basis
    def proj(*idx):
        return np.diag([1.0 if i in idx else 0.0 for i in range(4)])

    ms = Measurement((proj(0), proj(1), proj(2, 3)))
    mt = Measurement((proj(2), proj(3), proj(0, 1)))
    a = Assembly((ms, mt), outcome_priors=((0.5, 0.5, 0.0), (0.5, 0.5, 0.0)))
    value, _ = compatible_guessing(a, optimal_ensembles(a), 0, 1)
    assert value == pytest.approx(1.0, abs=1e-6)


def test_coarser_alphabet_never_helps(rng):
    # restricting the alphabet to z = (g, g) is a coarse-graining of the full one
    a = Assembly((random_basis_measurement(2, rng), random_basis_measurement(2, rng)))
    ens = optimal_ensembles(a)
    full, _ = compatible_guessing(a, ens, 0, 1)
    p = SdpProblem()
    obj = {}
    for g in range(2):
        name = p.add_block(f"G{g}", 2)
        obj[name] = 0.5 * a.outcome_priors[0][g] * ens[0].states[g].data + 0.5 * a.outcome_priors[1][g] * ens[1].states[g].data
    p.add_operator_equality({n: 1.0 for n in obj}, None, np.eye(2), "povm")
    p.set_objective(blocks=obj)
    assert solve(p).objective <= full + 1e-7


def test_soundness_on_random_pairs():
    # a positive witness always comes with a robustness below one
    rng = np.random.default_rng(7)
    for _ in range(30):
        d = int(rng.choice([2, 3]))
        a = random_assembly(d, 2, rng, eta_range=(0.3, 1.0))
        w = witness_w2(a, 0, 1).W2
        r = pairwise_robustness(a, 0, 1).R
        if w > 1e-5:
            assert r < 1 - 1e-5


@pytest.mark.parametrize("d", [2, 3])
def test_iff_on_symmetric_mub_orbit(d):
    # unitarily rotated MUB pairs with equal sharpness: both tests agree
    rng = np.random.default_rng(d)
    base = mub_assembly(d, 2)
    for eta in np.linspace(0.3, 1.0, 15):
        u = haar_unitary(d, rng)
        rot = Assembly(tuple(Measurement(tuple(u @ e.data @ u.conj().T for e in m.effects)) for m in base.measurements))
        a = rot.with_sharpness((eta, eta))
        w = witness_w2(a, 0, 1).W2
        r = pairwise_robustness(a, 0, 1).R
        if abs(r - 1) > 1e-4:
            assert (w > 1e-5) == (r < 1 - 1e-5), (eta, w, r)


def test_same_index_rejected():
    with pytest.raises(ValueError):
        witness_w2(pauli_assembly(), 1, 1)
