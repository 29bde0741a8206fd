"""Solver-agnostic conic problem builder.

A :class:`ConicProblem` has free scalar variables, nonnegative scalar
variables, PSD matrix blocks, linear equality constraints, and a linear
objective (always minimized).  Inequalities are expressed by the caller via
explicit slack variables; 1x1 PSD blocks are routed to the nonnegative
orthant internally.

``solve`` hands the built problem to the interior-point method in
:mod:`polyce.ipm` and returns a :class:`ConicSolution` with primal values,
equality multipliers, and a status in {Optimal, Infeasible, Unbounded,
NumericalFailure}.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    """Builder misuse or an unexpected solver breakdown."""


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class ScalarVar:
    index: int
    nonneg: bool = False


@dataclass(frozen=True)
class PsdBlock:
    index: int
    dim: int

    def entry(self, i: int, j: int) -> "LinExpr":
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise SolverError(f"entry ({i},{j}) outside {self.dim}x{self.dim} block")
        if i > j:
            i, j = j, i
        return LinExpr({("p", self.index, i, j): 1.0})


@dataclass(frozen=True)
class EqConstraint:
    index: int


class LinExpr:
    """Affine expression over problem variables: ``coeffs . vars + const``."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const: float = 0.0):
        self.coeffs: dict = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @staticmethod
    def of(x) -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, ScalarVar):
            return LinExpr({("s", x.index): 1.0})
        if isinstance(x, (int, float, np.floating, np.integer)):
            return LinExpr(const=float(x))
        raise SolverError(f"cannot interpret {x!r} as a linear expression")

    def copy(self) -> "LinExpr":
        return LinExpr(self.coeffs, self.const)

    def add_term(self, key, coef: float) -> None:
        if coef == 0.0:
            return
        self.coeffs[key] = self.coeffs.get(key, 0.0) + coef

    def __add__(self, other):
        other = LinExpr.of(other)
        out = self.copy()
        out.const += other.const
        for k, v in other.coeffs.items():
            out.add_term(k, v)
        return out

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-LinExpr.of(other))

    def __rsub__(self, other):
        return LinExpr.of(other) + (-self)

    def __mul__(self, a):
        a = float(a)
        return LinExpr({k: a * v for k, v in self.coeffs.items()}, a * self.const)

    __rmul__ = __mul__


def expr(x) -> LinExpr:
    return LinExpr.of(x)


class ConicProblem:
    """Builder for minimize c.x subject to linear equalities and cone
    membership.  Construction is single-owner; ``solve`` is a pure function
    of the built data, so distinct problems solve concurrently."""

    def __init__(self):
        self.num_scalars = 0
        self.scalar_nonneg: list[bool] = []
        self.blocks: list[PsdBlock] = []
        self.equalities: list[tuple[dict, float]] = []  # (coeffs, rhs)
        self.objective: LinExpr = LinExpr()
        self.trivially_infeasible = False

    # -- builder ops -------------------------------------------------------

    def add_scalar_var(self, nonneg: bool = False) -> ScalarVar:
        v = ScalarVar(self.num_scalars, nonneg)
        self.num_scalars += 1
        self.scalar_nonneg.append(nonneg)
        return v

    def add_nonneg_var(self) -> ScalarVar:
        return self.add_scalar_var(nonneg=True)

    def add_psd_block(self, dim: int) -> PsdBlock:
        if dim < 1:
            raise SolverError("PSD block dimension must be >= 1")
        blk = PsdBlock(len(self.blocks), int(dim))
        self.blocks.append(blk)
        return blk

    def _check_expr(self, e: LinExpr) -> None:
        for key in e.coeffs:
            if key[0] == "s":
                if not 0 <= key[1] < self.num_scalars:
                    raise SolverError(f"undeclared scalar variable {key[1]}")
            elif key[0] == "p":
                _, b, i, j = key
                if not 0 <= b < len(self.blocks):
                    raise SolverError(f"undeclared PSD block {b}")
                if not (0 <= i <= j < self.blocks[b].dim):
                    raise SolverError(f"bad entry ({i},{j}) for block {b}")
            else:
                raise SolverError(f"unknown variable key {key}")

    def add_equality(self, e, rhs: float = 0.0) -> EqConstraint:
        e = LinExpr.of(e)
        self._check_expr(e)
        rhs = float(rhs) - e.const
        coeffs = {k: v for k, v in e.coeffs.items() if v != 0.0}
        if not coeffs:
            if abs(rhs) > 1e-12:
                self.trivially_infeasible = True
            return EqConstraint(-1)
        self.equalities.append((coeffs, rhs))
        return EqConstraint(len(self.equalities) - 1)

    def add_leq(self, e, rhs: float = 0.0) -> ScalarVar:
        """Add ``e <= rhs`` via an explicit nonnegative slack; returns the slack."""
        slack = self.add_nonneg_var()
        self.add_equality(LinExpr.of(e) + LinExpr.of(slack), rhs)
        return slack

    def set_objective(self, e) -> None:
        e = LinExpr.of(e)
        self._check_expr(e)
        self.objective = e

    def solve(self, tol: float = 1e-8, max_iter: int = 200,
              centering: str = "mehrotra") -> "ConicSolution":
        if not (0 < tol <= 1e-2):
            raise SolverError("tol must lie in (0, 1e-2]")
        if self.num_scalars == 0 and not self.blocks:
            raise SolverError("problem has no variables")
        from . import ipm

        return ipm.solve(self, tol=tol, max_iter=max_iter, centering=centering)


@dataclass
class ConicSolution:
    """Primal/dual solution of a built conic problem."""

    status: Status
    objective_value: float = float("nan")
    dual_objective: float = float("nan")
    scalar_values: np.ndarray | None = None
    block_values: list[np.ndarray] = field(default_factory=list)
    eq_duals: np.ndarray | None = None
    iterations: int = 0
    eq_residual: float = float("nan")
    min_block_eig: float = float("nan")

    def value(self, handle):
        if self.status is not Status.OPTIMAL:
            raise SolverError(f"no primal values: status is {self.status.value}")
        if isinstance(handle, ScalarVar):
            return float(self.scalar_values[handle.index])
        if isinstance(handle, PsdBlock):
            return self.block_values[handle.index]
        raise SolverError(f"cannot look up {handle!r}")

    def evaluate(self, e: LinExpr) -> float:
        total = e.const
        for key, coef in e.coeffs.items():
            if key[0] == "s":
                total += coef * float(self.scalar_values[key[1]])
            else:
                _, b, i, j = key
                total += coef * float(self.block_values[b][i, j])
        return total

    def dual(self, eq: EqConstraint) -> float:
        if self.status is not Status.OPTIMAL:
            raise SolverError(f"no duals: status is {self.status.value}")
        if eq.index < 0:
            return 0.0
        return float(self.eq_duals[eq.index])


def dump_sdpa_like(problem: ConicProblem) -> str:
    """Sparse SDPA-flavored text dump of a built problem, for cross-checking
    against external solvers.

    Layout (not bit-mandated): a header with variable counts, one ``C`` line
    per objective entry and one ``A`` line per equality entry, written as
    ``<row> <kind> <index...> <value>`` where kind ``s`` is a scalar variable
    and kind ``p`` is (block, i, j).  Row 0 is the objective; equality row k
    also records its right-hand side on the ``rhs`` line.
    """
    out = io.StringIO()
    dims = " ".join(str(b.dim) for b in problem.blocks)
    print(f"* polyce conic dump: {problem.num_scalars} scalars, "
          f"{len(problem.blocks)} psd blocks, {len(problem.equalities)} equalities", file=out)
    print(f"scalars {problem.num_scalars}", file=out)
    print("nonneg " + "".join("1" if f else "0" for f in problem.scalar_nonneg), file=out)
    print(f"blocks {dims}", file=out)

    def emit(row: int, coeffs: dict):
        for key in sorted(coeffs, key=repr):
            v = coeffs[key]
            if key[0] == "s":
                print(f"{row} s {key[1]} {v!r}", file=out)
            else:
                _, b, i, j = key
                print(f"{row} p {b} {i} {j} {v!r}", file=out)

    emit(0, problem.objective.coeffs)
    rhs = []
    for k, (coeffs, b) in enumerate(problem.equalities, start=1):
        emit(k, coeffs)
        rhs.append(repr(b))
    print("rhs " + " ".join(rhs), file=out)
    return out.getvalue()
