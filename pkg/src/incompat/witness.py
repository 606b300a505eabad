"""Noise-robustness SDPs for compatibility structures, and closed-form oracles.

For a group of measurements with weights q(x) (renormalized over the group)
the robustness R of a :class:`~incompat.structures.StructureSpec` is

    R = max sum_x q(x) eta_x

such that the depolarized measurements eta_x M_a|x + (1 - eta_x) Tr[M_a|x] I/d
split as sum_i J^(i)_a|x over the active patterns i. Branch operators are
subnormalized (they absorb the pattern weight p_i), which keeps the program
linear: sum_a J^(i)_a|x = p_i I for free measurements, and for the compatible
subset the J^(i) are marginals of a parent G^(i) with sum_l G^(i)_l = p_i I.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .linalg import HermitianOperator
from .quantum import Assembly
from .sdp import SdpProblem, SdpSolution, SolverOptions, solve
from .structures import (
    CompatPattern,
    StructureError,
    StructureSpec,
    full_pattern,
    pairwise_patterns,
    pin,
)

VERDICT_TOL = 1e-6


class SolverFailure(RuntimeError):
    """The SDP did not reach an optimal, certified solution."""

    def __init__(self, solution: SdpSolution):
        super().__init__(f"SDP solver returned {solution.status.value}: {solution.message}")
        self.solution = solution


class Verdict(str, Enum):
    COMPATIBLE_POSSIBLE = "CompatiblePossible"
    STRUCTURE_VIOLATED = "StructureViolated"


@dataclass
class ParentCertificate:
    """Branch operators at the optimum, one entry per active pattern.

    ``parents[i]`` maps an outcome tuple (one outcome per measurement of the
    pattern's compatible subset, in index order) to a subnormalized parent
    effect. ``free_effects[i][x]`` lists the branch effects of a free
    measurement x. ``probs[i]`` is the pattern weight p_i.
    """

    patterns: tuple[CompatPattern, ...]
    probs: tuple[float, ...]
    parents: tuple[dict[tuple[int, ...], np.ndarray], ...]
    free_effects: tuple[dict[int, list[np.ndarray]], ...]

    def branch_effects(self, i: int) -> dict[int, list[np.ndarray]]:
        """Effects J^(i)_a|x for every measurement in pattern i."""
        pattern = self.patterns[i]
        out = {x: list(v) for x, v in self.free_effects[i].items()}
        subset = pattern.subset
        parent = self.parents[i]
        for pos, x in enumerate(subset):
            n_out = 1 + max(lam[pos] for lam in parent)
            out[x] = [sum(g for lam, g in parent.items() if lam[pos] == a) for a in range(n_out)]
        return out

    def reconstruct(self) -> dict[int, list[np.ndarray]]:
        """sum_i J^(i)_a|x, which should equal the depolarized assembly."""
        total: dict[int, list[np.ndarray]] = {}
        for i in range(len(self.patterns)):
            for x, effects in self.branch_effects(i).items():
                if x not in total:
                    total[x] = [np.array(e, dtype=complex) for e in effects]
                else:
                    total[x] = [t + e for t, e in zip(total[x], effects)]
        return total

    def min_eigenvalue(self) -> float:
        ops = [g for par in self.parents for g in par.values()]
        ops += [e for fe in self.free_effects for effs in fe.values() for e in effs]
        return min(float(np.linalg.eigvalsh(o)[0]) for o in ops)

    def to_dict(self) -> dict:
        lit = lambda a: HermitianOperator(a).to_literal()  # noqa: E731
        return {
            "patterns": [
                {
                    "pattern": p.to_dict(),
                    "prob": prob,
                    "parent": [{"outcomes": list(lam), "effect": lit(g)} for lam, g in par.items()],
                    "free": {str(x): [lit(e) for e in effs] for x, effs in fe.items()},
                }
                for p, prob, par, fe in zip(self.patterns, self.probs, self.parents, self.free_effects)
            ]
        }


@dataclass
class RobustnessReport:
    R: float
    group: tuple[int, ...]
    weights: tuple[float, ...]
    eta_star: tuple[float, ...]
    patterns: tuple[CompatPattern, ...]
    pattern_probs: tuple[float, ...]
    verdict: Verdict
    solver: SdpSolution
    certificate: ParentCertificate | None = field(default=None, repr=False)

    def to_dict(self, certificate: bool = False, one_based: bool = True) -> dict:
        shift = 1 if one_based else 0
        out = {
            "R": self.R,
            "verdict": self.verdict.value,
            "group": [x + shift for x in self.group],
            "weights": list(self.weights),
            "eta_star": list(self.eta_star),
            "patterns": [p.label(one_based) for p in self.patterns],
            "pattern_probs": list(self.pattern_probs),
            "solver": self.solver.summary(),
        }
        if certificate and self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def _depolarized_parts(effect: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Split eta M + (1-eta) Tr[M] I/d into constant + eta * slope."""
    d = effect.dim
    const = effect.trace() * np.eye(d) / d
    return const, effect.data - const


def build_structure_problem(assembly: Assembly, spec: StructureSpec) -> tuple[SdpProblem, dict]:
    """Assemble the robustness SDP; returns the problem and a variable map."""
    group = spec.group
    if max(group) >= len(assembly):
        raise StructureError(f"structure references measurement {max(group)} but the assembly has {len(assembly)}")
    active = spec.active_patterns
    if not active:
        raise StructureError("every pattern is pinned to zero: the structure is empty by construction")
    for p in active:
        p.subset  # raises for multi-subset patterns
    pinned = spec.pinned
    d = assembly.dim
    eye = np.eye(d)
    sub = assembly.restrict(group)
    weights = sub.weights

    prob = SdpProblem()
    etas = {x: prob.add_scalar(f"eta[{x}]", 0.0, 1.0) for x in group}
    pvars: dict[int, str] = {}
    branch: dict[tuple[int, int], list[list[str]]] = {}  # (x, a) -> blocks per pattern
    parent_names: list[dict[tuple[int, ...], str]] = []
    free_names: list[dict[int, list[str]]] = []
    for i, pattern in enumerate(active):
        fixed = pinned.get(pattern)
        pv = prob.add_scalar(f"p[{i}]", fixed if fixed is not None else 0.0, fixed if fixed is not None else 1.0)
        pvars[i] = pv
        subset = pattern.subset
        outcome_ranges = [range(assembly[x].outcomes) for x in subset]
        parents = {}
        for lam in itertools.product(*outcome_ranges):
            parents[lam] = prob.add_block(f"G[{i}]{list(lam)}", d)
        prob.add_operator_equality({g: 1.0 for g in parents.values()}, {pv: -eye}, None, f"parent[{i}]")
        for pos, x in enumerate(subset):
            for a in range(assembly[x].outcomes):
                names = [g for lam, g in parents.items() if lam[pos] == a]
                branch.setdefault((x, a), []).append(names)
        frees = {}
        for x in pattern.free:
            names = [prob.add_block(f"J[{i}][{x}][{a}]", d) for a in range(assembly[x].outcomes)]
            prob.add_operator_equality({n: 1.0 for n in names}, {pv: -eye}, None, f"valid[{i}][{x}]")
            for a, n in enumerate(names):
                branch.setdefault((x, a), []).append([n])
            frees[x] = names
        parent_names.append(parents)
        free_names.append(frees)

    for x in group:
        for a, effect in enumerate(assembly[x].effects):
            const, slope = _depolarized_parts(effect)
            terms: dict[str, float] = {}
            for names in branch[(x, a)]:
                for n in names:
                    terms[n] = terms.get(n, 0.0) + 1.0
            prob.add_operator_equality(terms, {etas[x]: -slope}, const, f"recon[{x}][{a}]")
    prob.add_constraint(scalars={pv: 1.0 for pv in pvars.values()}, rhs=1.0, label="sum p")
    prob.set_objective({etas[x]: w for x, w in zip(group, weights)})
    varmap = dict(etas=etas, pvars=pvars, parents=parent_names, frees=free_names, active=active, weights=weights)
    return prob, varmap


def structure_robustness(
    assembly: Assembly,
    spec: StructureSpec,
    opts: SolverOptions | None = None,
    tol: float = VERDICT_TOL,
) -> RobustnessReport:
    """Largest weighted sharpness at which the assembly fits the structure."""
    prob, vm = build_structure_problem(assembly, spec)
    sol = solve(prob, opts)
    if not sol.ok:
        raise SolverFailure(sol)
    group = spec.group
    eta_star = tuple(sol.scalar_values[vm["etas"][x]] for x in group)
    active = vm["active"]
    probs_active = {p: sol.scalar_values[vm["pvars"][i]] for i, p in enumerate(active)}
    pattern_probs = tuple(probs_active.get(p, spec.pinned.get(p, 0.0)) for p in spec.patterns)
    cert = ParentCertificate(
        patterns=active,
        probs=tuple(probs_active[p] for p in active),
        parents=tuple(
            {lam: sol.block_values[name] for lam, name in par.items()} for par in vm["parents"]
        ),
        free_effects=tuple(
            {x: [sol.block_values[n] for n in names] for x, names in fr.items()} for fr in vm["frees"]
        ),
    )
    R = sol.objective
    verdict = Verdict.COMPATIBLE_POSSIBLE if R >= 1 - tol else Verdict.STRUCTURE_VIOLATED
    return RobustnessReport(R, group, vm["weights"], eta_star, spec.patterns, pattern_probs, verdict, sol, cert)


def pairwise_robustness(assembly: Assembly, s: int, t: int, opts: SolverOptions | None = None) -> RobustnessReport:
    """Robustness of the joint measurability of measurements s and t."""
    if s == t:
        raise ValueError("pairwise robustness needs two distinct measurements")
    return structure_robustness(assembly, full_pattern((s, t)), opts)


def genuine_robustness(
    assembly: Assembly,
    group: Sequence[int] | None = None,
    pins: Mapping[tuple[int, int], float] | None = None,
    opts: SolverOptions | None = None,
) -> RobustnessReport:
    """Hyperplane for genuine n-wise incompatibility of ``group``.

    The structure is the hull of all within-group pairwise-compatible
    patterns; ``pins`` optionally fixes some pair weights (e.g. to 0).
    """
    group = tuple(range(len(assembly))) if group is None else tuple(group)
    if len(group) < 2:
        raise StructureError("genuine incompatibility needs at least two measurements")
    spec = pairwise_patterns(group)
    for pair, value in (pins or {}).items():
        spec = pin(spec, pair, value)
    return structure_robustness(assembly, spec, opts)


def full_compat_robustness(
    assembly: Assembly, group: Sequence[int] | None = None, opts: SolverOptions | None = None
) -> RobustnessReport:
    """Robustness of full joint measurability (one common parent)."""
    group = tuple(range(len(assembly))) if group is None else tuple(group)
    if len(group) < 2:
        raise StructureError("full compatibility needs at least two measurements")
    return structure_robustness(assembly, full_pattern(group), opts)


def mub_bound(d: int, n: int) -> float:
    """Closed-form genuine n-wise hyperplane for n MUBs in dimension d."""
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    return (math.sqrt(d) - 1) / (n * (d - 1)) + (n - 1) / n


def bloch_vector(effect: np.ndarray | HermitianOperator) -> np.ndarray:
    """b with effect = (I + b.sigma)/2 for an unbiased qubit effect."""
    e = np.asarray(effect.data if isinstance(effect, HermitianOperator) else effect)
    if e.shape != (2, 2):
        raise ValueError("Bloch vectors are only defined for qubit effects")
    return np.array([2 * e[0, 1].real, -2 * e[0, 1].imag, (e[0, 0] - e[1, 1]).real])


def busch_pair_oracle(b1: Sequence[float], b2: Sequence[float]) -> bool:
    """Joint measurability of unbiased qubit pairs: |b1+b2| + |b1-b2| <= 2."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.shape != (3,) or b2.shape != (3,):
        raise ValueError("busch_pair_oracle expects qubit Bloch vectors of length 3")
    return bool(np.linalg.norm(b1 + b2) + np.linalg.norm(b1 - b2) <= 2.0)
