"""State-discrimination witness for pairwise incompatibility.

Bob sends rho_a|x with probability q(a, x); Alice guesses a knowing x.
With the actual measurements she scores P_g. If she must commit to a single
POVM with outcomes z = (g_s, g_t) before learning x (a parent measurement with
deterministic marginals), she scores at most P_g^C. W2 = P_g - P_g^C > 0
certifies that M_s and M_t are incompatible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import HermitianOperator, frobenius_inner
from .quantum import Assembly, Ensemble, top_eigenstate
from .sdp import SdpProblem, SolverOptions, solve
from .witness import SolverFailure


@dataclass
class QsdReport:
    P_g: float
    P_g_compatible: float
    W2: float
    pair: tuple[int, int]
    weights: tuple[float, float]
    optimal_ensembles: tuple[Ensemble, ...] = field(repr=False)
    povm: dict[tuple[int, int], np.ndarray] = field(repr=False, default_factory=dict)

    def to_dict(self, one_based: bool = True) -> dict:
        shift = 1 if one_based else 0
        return {
            "pair": [x + shift for x in self.pair],
            "weights": list(self.weights),
            "P_g": self.P_g,
            "P_g_compatible": self.P_g_compatible,
            "W2": self.W2,
            "ensembles": [
                [HermitianOperator(s.data).to_literal() for s in e.states] for e in self.optimal_ensembles
            ],
            "povm": [
                {"z": [g + shift for g in z], "effect": HermitianOperator(g_).to_literal()}
                for z, g_ in self.povm.items()
            ],
        }


def optimal_ensembles(assembly: Assembly) -> list[Ensemble]:
    """rho_a|x = projector onto the top eigenvector of M_a|x, priors q(a|x)."""
    return [
        Ensemble(
            tuple(top_eigenstate(e).projector() for e in m.effects),
            assembly.outcome_priors[x],
        )
        for x, m in enumerate(assembly.measurements)
    ]


def guessing_probability(assembly: Assembly, ensembles: Sequence[Ensemble]) -> float:
    """sum_{x,a} q(a, x) Tr[rho_a|x M_a|x]."""
    if len(ensembles) != len(assembly):
        raise ValueError("need one ensemble per measurement")
    total = 0.0
    for x, (m, ens) in enumerate(zip(assembly.measurements, ensembles)):
        if len(ens) != m.outcomes:
            raise ValueError(f"ensemble {x} has {len(ens)} states but measurement has {m.outcomes} outcomes")
        for a, (effect, rho) in enumerate(zip(m.effects, ens.states)):
            total += assembly.joint_prior(a, x) * frobenius_inner(rho, effect)
    return total


def compatible_guessing(
    assembly: Assembly,
    ensembles: Sequence[Ensemble],
    s: int,
    t: int,
    opts: SolverOptions | None = None,
) -> tuple[float, dict[tuple[int, int], np.ndarray]]:
    """Best score of one POVM {G_(g_s, g_t)} on the s and t ensembles.

    Weights are q(x) renormalized over {s, t}. Returns the value and the
    optimal POVM.
    """
    if s == t:
        raise ValueError("compatible guessing needs two distinct measurements")
    pair = assembly.restrict((s, t))
    ens_s, ens_t = ensembles[s], ensembles[t]
    d = assembly.dim
    prob = SdpProblem()
    names = {}
    objective = {}
    for gs, gt in itertools.product(range(len(ens_s)), range(len(ens_t))):
        name = prob.add_block(f"G[{gs},{gt}]", d)
        names[(gs, gt)] = name
        objective[name] = (
            pair.weights[0] * ens_s.priors[gs] * ens_s.states[gs].data
            + pair.weights[1] * ens_t.priors[gt] * ens_t.states[gt].data
        )
    prob.add_operator_equality({n: 1.0 for n in names.values()}, None, np.eye(d), "povm")
    prob.set_objective(blocks=objective)
    sol = solve(prob, opts)
    if not sol.ok:
        raise SolverFailure(sol)
    return sol.objective, {z: sol.block_values[n] for z, n in names.items()}


def witness_w2(assembly: Assembly, s: int, t: int, opts: SolverOptions | None = None) -> QsdReport:
    """W2 = P_g - P_g^C on the pair (s, t) with Bob's optimal ensembles."""
    if s == t:
        raise ValueError("the witness needs two distinct measurements")
    pair = assembly.restrict((s, t))
    ensembles = optimal_ensembles(assembly)
    pg = guessing_probability(pair, [ensembles[s], ensembles[t]])
    pgc, povm = compatible_guessing(assembly, ensembles, s, t, opts)
    return QsdReport(pg, pgc, pg - pgc, (s, t), pair.weights, (ensembles[s], ensembles[t]), povm)
