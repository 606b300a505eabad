"""SDP problem description, presolve and conversion to conic standard form.

User-facing problems have named Hermitian PSD blocks, named bounded scalars
and real equality rows

    sum_j <A_cj, X_j> + sum_k b_ck v_k = r_c

with a linear objective to maximize. The solver works on the standard form

    maximize <c, x>  s.t.  A x = b,  x in a product of PSD cones

where every block is stored in orthonormal Hermitian coordinates (``hvec``)
and each scalar bound becomes a 1 x 1 cone.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from ..linalg import HermitianOperator, hermitian_basis

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
CONSISTENCY_TOL = 1e-8

_BASIS_CACHE: dict[int, np.ndarray] = {}


def basis(n: int) -> np.ndarray:
    if n not in _BASIS_CACHE:
        b = hermitian_basis(n)
        b.setflags(write=False)
        _BASIS_CACHE[n] = b
    return _BASIS_CACHE[n]


def hvec(mats: np.ndarray) -> np.ndarray:
    """Orthonormal Hermitian coordinates of a (..., n, n) stack."""
    n = mats.shape[-1]
    return np.einsum("kij,...ij->...k", basis(n).conj(), mats).real


def unhvec(coords: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("...k,kij->...ij", coords, basis(n))


@dataclass
class Constraint:
    blocks: dict[str, np.ndarray]
    scalars: dict[str, float]
    rhs: float
    label: str = ""


@dataclass
class PresolveLog:
    removed_rows: list[int] = field(default_factory=list)
    eliminated_scalars: dict[str, float] = field(default_factory=dict)
    infeasible: bool = False
    inconsistency: float = 0.0


@dataclass
class SdpProblem:
    """Maximize a linear objective over PSD blocks and bounded scalars."""

    blocks: dict[str, int] = field(default_factory=dict)
    scalars: dict[str, tuple[float, float]] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective_blocks: dict[str, np.ndarray] = field(default_factory=dict)
    objective_scalars: dict[str, float] = field(default_factory=dict)
    objective_offset: float = 0.0
    presolve_log: PresolveLog | None = None

    def add_block(self, name: str, dim: int) -> str:
        if name in self.blocks or name in self.scalars:
            raise ValueError(f"duplicate variable name {name!r}")
        if dim < 1:
            raise ValueError("block dimension must be positive")
        self.blocks[name] = int(dim)
        return name

    def add_scalar(self, name: str, lower: float = 0.0, upper: float = math.inf) -> str:
        if name in self.blocks or name in self.scalars:
            raise ValueError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise ValueError(f"empty bounds [{lower}, {upper}] for {name!r}")
        self.scalars[name] = (float(lower), float(upper))
        return name

    def add_constraint(
        self,
        blocks: Mapping[str, np.ndarray] | None = None,
        scalars: Mapping[str, float] | None = None,
        rhs: float = 0.0,
        label: str = "",
    ) -> int:
        blocks = dict(blocks or {})
        scalars = {k: float(v) for k, v in (scalars or {}).items()}
        for name, coef in blocks.items():
            if name not in self.blocks:
                raise KeyError(f"unknown block {name!r}")
            coef = np.asarray(coef, dtype=complex)
            n = self.blocks[name]
            if coef.shape != (n, n):
                raise ValueError(f"coefficient for {name!r} must be {n}x{n}")
            if np.linalg.norm(coef - coef.conj().T) > 1e-12 * max(1.0, np.linalg.norm(coef)):
                raise ValueError(f"coefficient for {name!r} is not Hermitian")
            blocks[name] = coef
        for name in scalars:
            if name not in self.scalars:
                raise KeyError(f"unknown scalar {name!r}")
        self.constraints.append(Constraint(blocks, scalars, float(rhs), label))
        return len(self.constraints) - 1

    def add_operator_equality(
        self,
        blocks: Mapping[str, float],
        scalars: Mapping[str, np.ndarray] | None = None,
        rhs: np.ndarray | None = None,
        label: str = "",
    ) -> list[int]:
        """Hermitian matrix equation sum_j c_j X_j + sum_k v_k H_k = H_0.

        ``blocks`` maps block names to real multipliers and ``scalars`` maps
        scalar names to Hermitian matrices. One real row is added per
        Hermitian basis element.
        """
        dims = {self.blocks[name] for name in blocks}
        scalars = {k: np.asarray(v, dtype=complex) for k, v in (scalars or {}).items()}
        dims |= {v.shape[0] for v in scalars.values()}
        if rhs is not None:
            dims.add(np.asarray(rhs).shape[0])
        if len(dims) != 1:
            raise ValueError(f"inconsistent operator dimensions {sorted(dims)}")
        (n,) = dims
        rhs = np.zeros((n, n)) if rhs is None else np.asarray(rhs, dtype=complex)
        rows = []
        rhs_coords = hvec(rhs)
        scalar_coords = {k: hvec(v) for k, v in scalars.items()}
        for k, bk in enumerate(basis(n)):
            rows.append(
                self.add_constraint(
                    {name: float(c) * bk for name, c in blocks.items()},
                    {name: float(coords[k]) for name, coords in scalar_coords.items() if coords[k] != 0.0},
                    float(rhs_coords[k]),
                    f"{label}[{k}]",
                )
            )
        return rows

    def set_objective(
        self,
        scalars: Mapping[str, float] | None = None,
        blocks: Mapping[str, np.ndarray] | None = None,
        offset: float = 0.0,
    ) -> None:
        self.objective_scalars = {k: float(v) for k, v in (scalars or {}).items()}
        self.objective_blocks = {k: np.asarray(v, dtype=complex) for k, v in (blocks or {}).items()}
        self.objective_offset = float(offset)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def copy(self) -> SdpProblem:
        return SdpProblem(
            dict(self.blocks),
            dict(self.scalars),
            [Constraint(dict(c.blocks), dict(c.scalars), c.rhs, c.label) for c in self.constraints],
            dict(self.objective_blocks),
            dict(self.objective_scalars),
            self.objective_offset,
        )

    def row_matrix(self) -> tuple[np.ndarray, np.ndarray, dict[str, slice], dict[str, int]]:
        """Dense real constraint matrix over (block hvec coords, scalars)."""
        cols: dict[str, slice] = {}
        off = 0
        for name, n in self.blocks.items():
            cols[name] = slice(off, off + n * n)
            off += n * n
        scol = {}
        for name in self.scalars:
            scol[name] = off
            off += 1
        mat = np.zeros((len(self.constraints), off))
        rhs = np.zeros(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for name, coef in con.blocks.items():
                mat[i, cols[name]] = hvec(coef)
            for name, v in con.scalars.items():
                mat[i, scol[name]] = v
            rhs[i] = con.rhs
        return mat, rhs, cols, scol

    def to_json(self) -> str:
        """Problem dump for cross-checking with external solvers."""
        lit = lambda a: HermitianOperator(a).to_literal()  # noqa: E731
        bound = lambda v: None if math.isinf(v) else v  # noqa: E731
        doc = {
            "sense": "maximize",
            "blocks": [{"name": k, "dim": n} for k, n in self.blocks.items()],
            "scalars": [{"name": k, "lower": bound(lo), "upper": bound(hi)} for k, (lo, hi) in self.scalars.items()],
            "constraints": [
                {
                    "label": c.label,
                    "blocks": {k: lit(v) for k, v in c.blocks.items()},
                    "scalars": c.scalars,
                    "rhs": c.rhs,
                }
                for c in self.constraints
            ],
            "objective": {
                "blocks": {k: lit(v) for k, v in self.objective_blocks.items()},
                "scalars": self.objective_scalars,
                "offset": self.objective_offset,
            },
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> SdpProblem:
        doc = json.loads(text)
        unbound = lambda v, inf: inf if v is None else float(v)  # noqa: E731
        p = cls()
        for b in doc["blocks"]:
            p.add_block(b["name"], b["dim"])
        for s in doc["scalars"]:
            p.add_scalar(s["name"], unbound(s["lower"], -math.inf), unbound(s["upper"], math.inf))
        for c in doc["constraints"]:
            p.add_constraint(
                {k: HermitianOperator.from_literal(v).data for k, v in c["blocks"].items()},
                c["scalars"],
                c["rhs"],
                c.get("label", ""),
            )
        obj = doc["objective"]
        p.set_objective(
            obj["scalars"],
            {k: HermitianOperator.from_literal(v).data for k, v in obj["blocks"].items()},
            obj.get("offset", 0.0),
        )
        return p


def presolve(problem: SdpProblem) -> SdpProblem:
    """Substitute fixed scalars and drop linearly dependent rows.

    The result carries a :class:`PresolveLog`. Dependent rows whose right-hand
    sides disagree with the kept rows mark the problem infeasible.
    """
    p = problem.copy()
    plog = PresolveLog()
    fixed = {k: lo for k, (lo, hi) in p.scalars.items() if lo == hi}
    for name, value in fixed.items():
        del p.scalars[name]
        for con in p.constraints:
            if name in con.scalars:
                con.rhs -= con.scalars.pop(name) * value
        if name in p.objective_scalars:
            p.objective_offset += p.objective_scalars.pop(name) * value
        plog.eliminated_scalars[name] = value

    if p.constraints:
        mat, rhs, _, _ = p.row_matrix()
        norms = np.linalg.norm(mat, axis=1)
        zero = norms <= RANK_TOL
        keep_candidates = np.flatnonzero(~zero)
        kept: list[int] = []
        if keep_candidates.size:
            scaled = mat[keep_candidates] / norms[keep_candidates, None]
            _, r, piv = scipy.linalg.qr(scaled.T, mode="economic", pivoting=True)
            diag = np.abs(np.diag(r))
            rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1.0))) if diag.size else 0
            kept = sorted(int(keep_candidates[i]) for i in piv[:rank])
        removed = sorted(set(range(len(p.constraints))) - set(kept))
        if removed:
            sub = mat[kept]
            coef, *_ = np.linalg.lstsq(sub.T, mat[removed].T, rcond=None)
            mismatch = np.abs(rhs[removed] - coef.T @ rhs[kept])
            scale = 1.0 + np.abs(rhs[removed]) + np.abs(coef.T) @ np.abs(rhs[kept])
            worst = float(np.max(mismatch / scale))
            plog.inconsistency = worst
            if worst > CONSISTENCY_TOL:
                plog.infeasible = True
                log.warning("presolve: dependent rows are inconsistent (residual %.3e)", worst)
            log.debug("presolve: removed %d dependent rows", len(removed))
        plog.removed_rows = removed
        p.constraints = [p.constraints[i] for i in kept]
    p.presolve_log = plog
    return p


@dataclass
class StandardForm:
    """maximize c.x s.t. A x = b, x in prod of Hermitian PSD cones."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    offset: float
    groups: list[tuple[int, int, int]]  # (n, count, column offset)
    row_scale: np.ndarray
    block_index: dict[str, tuple[int, int]]  # name -> (group, position)
    scalar_map: dict[str, tuple[float, list[tuple[tuple[int, int], float]]]]
    num_user_rows: int

    @property
    def degree(self) -> int:
        return sum(n * k for n, k, _ in self.groups)

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Cone vector -> per-group (count, n, n) matrix stacks."""
        return [unhvec(x[off : off + k * n * n].reshape(k, n * n), n) for n, k, off in self.groups]

    def join(self, mats: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([hvec(m).ravel() for m in mats]) if mats else np.zeros(0)

    def identity(self) -> np.ndarray:
        return self.join([np.broadcast_to(np.eye(n), (k, n, n)) for n, k, _ in self.groups])


def to_standard_form(p: SdpProblem) -> StandardForm:
    """Lower a presolved problem to standard form with unit-norm rows."""
    # Each scalar becomes v = v0 + sum(coef * slack) over 1x1 cone slacks.
    one_by_one: list[str] = []
    scalar_map: dict[str, tuple[float, list[tuple[str, float]]]] = {}
    bound_rows: list[tuple[list[tuple[str, float]], float]] = []
    for name, (lo, hi) in p.scalars.items():
        lo_f, hi_f = math.isfinite(lo), math.isfinite(hi)
        if lo_f:
            sp = f"{name}#lo"
            one_by_one.append(sp)
            scalar_map[name] = (lo, [(sp, 1.0)])
            if hi_f:
                sq = f"{name}#hi"
                one_by_one.append(sq)
                bound_rows.append(([(sp, 1.0), (sq, 1.0)], hi - lo))
        elif hi_f:
            sq = f"{name}#hi"
            one_by_one.append(sq)
            scalar_map[name] = (hi, [(sq, -1.0)])
        else:
            sp, sm = f"{name}#pos", f"{name}#neg"
            one_by_one += [sp, sm]
            scalar_map[name] = (0.0, [(sp, 1.0), (sm, -1.0)])

    entries: dict[int, list[str]] = {}
    for name, n in p.blocks.items():
        entries.setdefault(n, []).append(name)
    entries.setdefault(1, [])
    entries[1] = entries[1] + one_by_one
    groups = []
    position: dict[str, tuple[int, int]] = {}
    col_of: dict[str, int] = {}
    off = 0
    for gi, n in enumerate(sorted(k for k, v in entries.items() if v)):
        names = entries[n]
        groups.append((n, len(names), off))
        for j, name in enumerate(names):
            position[name] = (len(groups) - 1, j)
            col_of[name] = off + j * n * n
        off += len(names) * n * n

    m = len(p.constraints) + len(bound_rows)
    A = np.zeros((m, off))
    b = np.zeros(m)
    c = np.zeros(off)
    offset = p.objective_offset

    def put_block(row: np.ndarray, name: str, coef: np.ndarray):
        n = p.blocks[name]
        start = col_of[name]
        row[start : start + n * n] += hvec(coef)

    def put_scalar(row: np.ndarray, name: str, weight: float) -> float:
        v0, terms = scalar_map[name]
        for slack, e in terms:
            row[col_of[slack]] += weight * e
        return weight * v0

    for i, con in enumerate(p.constraints):
        shift = 0.0
        for name, coef in con.blocks.items():
            put_block(A[i], name, coef)
        for name, v in con.scalars.items():
            shift += put_scalar(A[i], name, v)
        b[i] = con.rhs - shift
    for j, (terms, r) in enumerate(bound_rows):
        i = len(p.constraints) + j
        for slack, e in terms:
            A[i, col_of[slack]] += e
        b[i] = r
    for name, coef in p.objective_blocks.items():
        put_block(c, name, coef)
    for name, v in p.objective_scalars.items():
        offset += put_scalar(c, name, v)

    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        bad = [p.constraints[i].label for i in np.flatnonzero(norms == 0) if i < len(p.constraints)]
        raise ValueError(f"empty constraint rows: {bad}")
    row_scale = 1.0 / norms
    A *= row_scale[:, None]
    b *= row_scale

    smap = {
        name: (v0, [(position[s], e) for s, e in terms]) for name, (v0, terms) in scalar_map.items()
    }
    return StandardForm(
        A, b, c, offset, groups, row_scale,
        {name: position[name] for name in p.blocks}, smap, len(p.constraints),
    )
