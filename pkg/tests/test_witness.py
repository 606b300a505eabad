import itertools
import math

import numpy as np
import pytest

from incompat.quantum import (
    Assembly,
    Measurement,
    depolarize,
    mub_assembly,
    pauli_assembly,
    set_weights,
)
from incompat.structures import CompatPattern, StructureError, StructureSpec, full_pattern, pairwise_patterns, pin
from incompat.witness import (
    Verdict,
    bloch_vector,
    build_structure_problem,
    busch_pair_oracle,
    full_compat_robustness,
    genuine_robustness,
    mub_bound,
    pairwise_robustness,
    structure_robustness,
)

from conftest import random_assembly, random_povm

cp = pytest.importorskip("cvxpy")


def cvxpy_pair_robustness(a: Assembly, s: int, t: int) -> float:
    """Independent formulation: max sum q eta s.t. a parent G_ij reproduces
    eta M + (1 - eta) Tr[M] I / d for both measurements."""
    d = a.dim
    ms, mt = a[s], a[t]
    q = np.array([a.weights[s], a.weights[t]])
    q = q / q.sum()
    eta = cp.Variable(2)
    G = {(i, j): cp.Variable((d, d), hermitian=True) for i in range(ms.outcomes) for j in range(mt.outcomes)}
    cons = [g >> 0 for g in G.values()] + [eta >= 0, eta <= 1]
    for k, (x, m) in enumerate(((0, ms), (1, mt))):
        for o, e in enumerate(m.effects):
            target = eta[k] * e.data + (1 - eta[k]) * e.trace() / d * np.eye(d)
            marg = sum(g for key, g in G.items() if key[x] == o)
            cons.append(marg == target)
    prob = cp.Problem(cp.Maximize(q @ eta), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def _noisy_target(a: Assembly, x: int, eta: float):
    return [eta * e.data + (1 - eta) * e.trace() / a.dim * np.eye(a.dim) for e in a[x].effects]


def test_pauli_pair():
    r = pairwise_robustness(pauli_assembly(), 0, 2)
    assert r.R == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    assert r.verdict is Verdict.STRUCTURE_VIOLATED
    assert r.eta_star == pytest.approx((1 / math.sqrt(2),) * 2, abs=1e-5)


def test_pauli_genuine_and_full():
    a = pauli_assembly()
    assert genuine_robustness(a).R == pytest.approx((1 + math.sqrt(2)) / 3, abs=1e-6)
    assert full_compat_robustness(a).R == pytest.approx(1 / math.sqrt(3), abs=1e-6)


def test_certificate_reconstructs_noisy_assembly():
    a = set_weights(pauli_assembly(), (0.2, 0.3, 0.5))
    r = genuine_robustness(a)
    cert = r.certificate
    assert cert.min_eigenvalue() >= -1e-7
    assert sum(cert.probs) == pytest.approx(1.0, abs=1e-7)
    rec = cert.reconstruct()
    for x, eta in zip(r.group, r.eta_star):
        for got, want in zip(rec[x], _noisy_target(a, x, eta)):
            assert np.linalg.norm(got - want) <= 1e-6
    # each branch is a valid subnormalized measurement
    for i, p in enumerate(cert.probs):
        for effs in cert.branch_effects(i).values():
            assert np.linalg.norm(sum(effs) - p * np.eye(2)) <= 1e-6


def test_compatible_input_gives_one():
    a = pauli_assembly().with_sharpness((0.5, 0.5, 0.5))
    r = genuine_robustness(a)
    assert r.R == pytest.approx(1.0, abs=1e-7)
    assert r.verdict is Verdict.COMPATIBLE_POSSIBLE
    # trivial measurement (one outcome) is compatible with anything
    triv = Measurement((np.eye(2),))
    b = Assembly((triv, pauli_assembly()[0]))
    assert pairwise_robustness(b, 0, 1).R == pytest.approx(1.0, abs=1e-7)


def test_single_member_full_pattern():
    r = structure_robustness(pauli_assembly(), full_pattern((1,)))
    assert r.R == pytest.approx(1.0, abs=1e-7)


def test_identical_pair_compatible():
    z = pauli_assembly()[2]
    assert pairwise_robustness(Assembly((z, z)), 0, 1).R == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_pair_matches_cvxpy(seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 2
    a = random_assembly(d, 2, rng)
    ours = pairwise_robustness(a, 0, 1).R
    assert ours == pytest.approx(cvxpy_pair_robustness(a, 0, 1), abs=1e-5)


def test_nonprojective_pair_matches_cvxpy(rng):
    a = Assembly((random_povm(2, 3, rng), random_povm(2, 2, rng)))
    assert pairwise_robustness(a, 0, 1).R == pytest.approx(cvxpy_pair_robustness(a, 0, 1), abs=1e-5)


def test_mub_groups_equal():
    a = mub_assembly(3, 4)
    values = [genuine_robustness(a, g).R for g in itertools.combinations(range(4), 3)]
    assert max(values) - min(values) <= 1e-6
    assert values[0] == pytest.approx(mub_bound(3, 3), abs=1e-6)


def test_group_relabeling():
    a = mub_assembly(3, 3)
    perm = Assembly(tuple(a[i] for i in (2, 0, 1)))
    assert genuine_robustness(perm).R == pytest.approx(genuine_robustness(a).R, abs=1e-6)


def test_asymmetric_and_pinned():
    a = set_weights(mub_assembly(3, 3), (1 / 6, 1 / 3, 1 / 2))
    free = genuine_robustness(a)
    pinned = genuine_robustness(a, pins={(0, 1): 0.0})
    assert free.R == pytest.approx(0.864, abs=1e-3)
    assert pinned.R == pytest.approx(0.854, abs=1e-3)
    assert pinned.pattern_probs[0] == 0.0


def test_pins_monotone(rng):
    a = random_assembly(2, 3, rng)
    spec = pairwise_patterns((0, 1, 2))
    base = structure_robustness(a, spec).R
    for sub in [(0, 1), (0, 2), (1, 2)]:
        assert structure_robustness(a, pin(spec, sub, 0.0)).R <= base + 1e-6


def test_full_dominated_by_pairwise(rng):
    a = random_assembly(3, 3, rng)
    assert full_compat_robustness(a).R <= genuine_robustness(a).R + 1e-6


def test_all_pinned_zero_rejected():
    spec = pairwise_patterns((0, 1))
    with pytest.raises(StructureError, match="pinned to zero"):
        build_structure_problem(pauli_assembly(), pin(spec, (0, 1), 0.0))


def test_multi_subset_rejected():
    spec = StructureSpec((0, 1, 2), (CompatPattern(((0, 1), (1, 2))),))
    with pytest.raises(StructureError):
        structure_robustness(pauli_assembly(), spec)


def test_out_of_range_group():
    with pytest.raises(StructureError):
        structure_robustness(pauli_assembly(), full_pattern((0, 5)))


@pytest.mark.parametrize(
    "d,n,value",
    [(3, 3, (math.sqrt(3) + 3) / 6), (3, 4, (math.sqrt(3) + 5) / 8), (2, 2, 1 / math.sqrt(2))],
)
def test_mub_bound_values(d, n, value):
    assert mub_bound(d, n) == pytest.approx(value, abs=1e-12)


def test_mub_bound_errors():
    with pytest.raises(ValueError):
        mub_bound(1, 2)
    with pytest.raises(ValueError):
        mub_bound(3, 0)


def test_bloch_and_busch():
    z = depolarize(pauli_assembly()[2], 0.6)
    assert bloch_vector(z[0]) == pytest.approx([0, 0, 0.6])
    x = Measurement.from_bloch([0.5, 0, 0])
    assert bloch_vector(x[0]) == pytest.approx([0.5, 0, 0])
    assert busch_pair_oracle([0.7, 0, 0], [0, 0, 0.7])
    assert not busch_pair_oracle([0.72, 0, 0], [0, 0, 0.72])
    with pytest.raises(ValueError):
        busch_pair_oracle([1, 0], [0, 1, 0])


def test_report_dict_is_one_based():
    doc = pairwise_robustness(pauli_assembly(), 0, 2).to_dict(certificate=True)
    assert doc["group"] == [1, 3]
    assert doc["solver"]["status"] == "Optimal"
    assert "certificate" in doc
