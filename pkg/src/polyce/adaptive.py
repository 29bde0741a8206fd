"""Adaptive discretization: support-growing approximate-equilibrium SDPs.

Each iteration solves, over distributions supported on the current grids,

    minimize eps
    s.t.     restricted deviation gains <= alpha * eps   (grid deviations)
             eps_{i,s} - g_{i,s}(t) >= 0 on [-1,1]       (continuous deviations,
                                                          interval SOS encoding)
             sum_s eps_{i,s} <= eps                      (per player)
             pi a probability distribution

then, for players whose total deviation gain is binding (>= beta * eps),
adds the maximizers of their deviation-gain polynomials to the grids and
repeats.  With 0 <= alpha < beta <= 1 the minimum epsilon converges to zero;
the degenerate alpha = beta = 1 mode (restricted constraints dropped,
explicit flag) exists to reproduce the known stalling behavior and is
documented as non-convergent.

Maximizers come from derivative root finding rather than SDP dual decoding;
both extract the tight deviation points, and root finding is self-contained
and independently testable.  Per-recommendation gains are always recomputed
exactly from the solved distribution before strategies are added, so slack
in the SDP's eps_{i,s} variables never injects spurious grid points.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, LinExpr, SolverError, Status, expr
from .finite_ce import EpsilonReport, min_epsilon
from .games import FiniteGame, PolynomialGame, SupportedDistribution, sample_game
from .polynomials import maximize_univariate, merge_points
from .sos import interval_nonneg_constraint

__all__ = [
    "AdaptiveConfig",
    "IterationRecord",
    "IterationTrace",
    "build_iteration_sdp",
    "maximize_univariate",
    "run_adaptive",
    "run_adaptive_finite",
]

_BIND_TOL = 1e-6
_NEAR_OPT_TOL = 1e-6


@dataclass(frozen=True)
class AdaptiveConfig:
    """Loop parameters.  Requires 0 <= alpha < beta <= 1 unless the
    degenerate flag explicitly selects the non-convergent alpha=beta=1 mode."""

    alpha: float = 0.0
    beta: float = 1.0
    eps_stop: float = 1e-6
    max_iter: int = 50
    merge_tol: float = 1e-6
    degenerate: bool = False
    solver_tol: float = 1e-8

    def __post_init__(self):
        if self.degenerate:
            if not (self.alpha == self.beta == 1.0):
                raise ValueError("degenerate mode means alpha = beta = 1")
        elif not (0.0 <= self.alpha < self.beta <= 1.0):
            raise ValueError("need 0 <= alpha < beta <= 1 (or the degenerate flag)")
        if self.eps_stop <= 0 or self.max_iter < 1:
            raise ValueError("eps_stop must be positive and max_iter >= 1")


@dataclass(frozen=True)
class IterationRecord:
    """One row of the trace.  ``new_strategies[i]`` lists the points that
    were added to player i's grid to *form* this iteration (the initial grid
    at k=0), matching the usual trace-table layout."""

    k: int
    grids: tuple[np.ndarray, ...]
    new_strategies: tuple[tuple[float, ...], ...]
    epsilon: float
    epsilon_exact: float
    distribution: SupportedDistribution
    per_recommendation: dict[tuple[int, float], tuple[float, float]]


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "max_iter"  # converged | max_iter | stalled

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def epsilons(self) -> list[float]:
        return [r.epsilon for r in self.records]

    def to_json(self, player_names=None) -> str:
        doc = {
            "status": self.status,
            "iterations": [
                {
                    "k": r.k,
                    "epsilon": r.epsilon,
                    "epsilon_exact": r.epsilon_exact,
                    "grids": [g.tolist() for g in r.grids],
                    "added": [list(a) for a in r.new_strategies],
                    "support": [
                        {"point": list(pt), "prob": p}
                        for pt, p in r.distribution.support(1e-12)
                    ],
                }
                for r in self.records
            ],
            "final_distribution": {
                "grids": [g.tolist() for g in self.final.distribution.grids],
                "probs": self.final.distribution.probs.tolist(),
            },
        }
        if player_names is not None:
            doc["players"] = list(player_names)
        return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# the per-iteration optimization problem


def build_iteration_sdp(
    game: PolynomialGame,
    grids,
    alpha: float,
    include_restricted: bool = True,
):
    """Build the per-iteration problem over the given grids.

    Returns ``(problem, handles)`` with handles for the cell probabilities
    (``pi``), the per-recommendation bounds (``eps_rec``), the objective
    variable (``eps``), and the SOS Gram blocks (``grams``).
    """
    grids = tuple(np.asarray(g, dtype=float) for g in grids)
    if any(g.size == 0 for g in grids):
        raise SolverError("empty strategy grid")
    fg = sample_game(game, grids)
    problem = ConicProblem()
    cells = list(fg.cells())
    pi = {cell: problem.add_nonneg_var() for cell in cells}
    eps = problem.add_scalar_var()
    eps_rec: dict[tuple[int, int], object] = {}
    grams = {}

    total = LinExpr()
    for v in pi.values():
        total = total + expr(v)
    problem.add_equality(total, 1.0)

    for i in range(game.num_players):
        size = len(grids[i])
        other_axes = [j for j in range(game.num_players) if j != i]
        other_cells = list(itertools.product(*(range(len(grids[j])) for j in other_axes)))

        def full_cell(s_idx, rest):
            cell = list(rest)
            cell.insert(i, s_idx)
            return tuple(cell)

        # restricted-deviation inequalities over the grid itself
        if include_restricted:
            for s_idx in range(size):
                for t_idx in range(size):
                    if t_idx == s_idx:
                        continue
                    e = LinExpr()
                    for rest in other_cells:
                        gain = float(
                            fg.payoffs[i][full_cell(t_idx, rest)]
                            - fg.payoffs[i][full_cell(s_idx, rest)]
                        )
                        e.add_term(("s", pi[full_cell(s_idx, rest)].index), gain)
                    slack = problem.add_nonneg_var()
                    problem.add_equality(e - alpha * expr(eps) + expr(slack), 0.0)

        # continuous deviations: eps_{i,s} - g_{i,s}(t) nonnegative on [-1,1]
        deg = game.utilities[i].degree_in(i)
        restricted_coeffs = {
            rest: game.utilities[i].restrict(
                i, {j: float(grids[j][k]) for j, k in zip(other_axes, rest)}
            )
            for rest in other_cells
        }
        player_sum = LinExpr()
        for s_idx in range(size):
            ev = problem.add_scalar_var()
            eps_rec[(i, s_idx)] = ev
            player_sum = player_sum + expr(ev)
            coeff_exprs = [LinExpr() for _ in range(deg + 1)]
            coeff_exprs[0] = expr(ev)
            for rest in other_cells:
                c = restricted_coeffs[rest]
                base = float(np.polynomial.polynomial.polyval(grids[i][s_idx], c))
                key = ("s", pi[full_cell(s_idx, rest)].index)
                for k, ck in enumerate(c):
                    coeff_exprs[k].add_term(key, -float(ck))
                coeff_exprs[0].add_term(key, base)
            grams[(i, s_idx)] = interval_nonneg_constraint(problem, coeff_exprs, max(deg, 1))
        slack = problem.add_nonneg_var()
        problem.add_equality(player_sum - expr(eps) + expr(slack), 0.0)

    problem.set_objective(expr(eps))
    handles = {"pi": pi, "eps": eps, "eps_rec": eps_rec, "grams": grams, "grids": grids}
    return problem, handles


def _solve_iteration(game, grids, config: AdaptiveConfig):
    problem, handles = build_iteration_sdp(
        game, grids, config.alpha, include_restricted=not config.degenerate
    )
    # strong centering: the terminal iterate is the loop's selected
    # equilibrium, and loosely centered endpoints wander across fat optimal
    # faces from run to run of the formulation
    sol = problem.solve(tol=config.solver_tol, centering="strong")
    if sol.status is not Status.OPTIMAL:
        raise SolverError(f"iteration SDP ended with status {sol.status.value}")
    probs = np.zeros(tuple(len(g) for g in grids))
    for cell, v in handles["pi"].items():
        probs[cell] = sol.value(v)
    dist = SupportedDistribution.from_solver(grids, probs)
    return float(sol.value(handles["eps"])), dist


def _grow(grids, additions, merge_tol):
    out = []
    for g, extra in zip(grids, additions):
        out.append(merge_points(list(g) + list(extra), merge_tol) if extra else g)
    return tuple(out)


def run_adaptive(game: PolynomialGame, initial_grids, config: AdaptiveConfig | None = None) -> IterationTrace:
    """Run the adaptive loop from per-player initial grids.

    Terminates when the iteration optimum drops to ``eps_stop`` or after
    ``max_iter`` iterations; reports status ``stalled`` when no new strategy
    clears the beta threshold (expected only in the degenerate mode).
    """
    config = config or AdaptiveConfig()
    grids = tuple(merge_points(g, config.merge_tol) for g in initial_grids)
    trace = IterationTrace()
    pending = tuple(tuple(float(p) for p in g) for g in grids)
    stalled = False

    for k in range(config.max_iter):
        eps_k, dist = _solve_iteration(game, grids, config)
        report = min_epsilon(game, dist)
        trace.records.append(
            IterationRecord(
                k=k,
                grids=grids,
                new_strategies=pending,
                epsilon=eps_k,
                epsilon_exact=report.epsilon,
                distribution=dist,
                per_recommendation=dict(report.per_recommendation),
            )
        )
        if eps_k <= config.eps_stop:
            trace.status = "converged"
            return trace

        additions: list[list[float]] = [[] for _ in range(game.num_players)]
        for i in range(game.num_players):
            if report.player_total(i) < config.beta * eps_k - _BIND_TOL * (1 + eps_k):
                continue
            for (j, s_i), (gain, _) in report.per_recommendation.items():
                if j != i or gain <= config.eps_stop:
                    continue
                from .games import deviation_gain_poly

                g_poly = deviation_gain_poly(game, i, dist, s_i)
                _, _, maximizers = maximize_univariate(g_poly, _NEAR_OPT_TOL)
                for t in maximizers:
                    if np.min(np.abs(grids[i] - t), initial=np.inf) > config.merge_tol and all(
                        abs(t - u) > config.merge_tol for u in additions[i]
                    ):
                        additions[i].append(t)

        if not any(additions):
            stalled = True
            if not config.degenerate:
                break
            pending = tuple(() for _ in range(game.num_players))
            continue
        pending = tuple(tuple(a) for a in additions)
        grids = _grow(grids, additions, config.merge_tol)

    trace.status = "stalled" if stalled else "max_iter"
    return trace


# ---------------------------------------------------------------------------
# finite-game variant: deviations enumerate the full strategy set


def _finite_report(fg: FiniteGame, subset_idx, probs) -> EpsilonReport:
    per = {}
    totals = np.zeros(fg.num_players)
    for i in range(fg.num_players):
        axes = tuple(j for j in range(fg.num_players) if j != i)
        marg = probs.sum(axis=axes)
        for pos, s_idx in enumerate(subset_idx[i]):
            if marg[pos] <= 1e-12:
                continue
            best, best_t = 0.0, int(s_idx)
            for t_idx in range(fg.shape[i]):
                gain = _finite_gain(fg, subset_idx, probs, i, pos, t_idx)
                if gain > best + 1e-12:
                    best, best_t = gain, t_idx
            per[(i, float(fg.grids[i][s_idx]))] = (best, float(fg.grids[i][best_t]))
            totals[i] += best
    return EpsilonReport(float(totals.max(initial=0.0)), per)


def _finite_gain(fg, subset_idx, probs, player, pos, t_idx):
    other_axes = [j for j in range(fg.num_players) if j != player]
    total = 0.0
    for rest in itertools.product(*(range(len(subset_idx[j])) for j in other_axes)):
        p_cell = list(rest)
        p_cell.insert(player, pos)
        p = float(probs[tuple(p_cell)])
        if p == 0.0:
            continue
        cell = [subset_idx[j][r] for j, r in zip(other_axes, rest)]
        cell.insert(player, subset_idx[player][pos])
        dev = list(cell)
        dev[player] = t_idx
        total += p * float(fg.payoffs[player][tuple(dev)] - fg.payoffs[player][tuple(cell)])
    return total


def run_adaptive_finite(fg: FiniteGame, initial_subsets, config: AdaptiveConfig | None = None) -> IterationTrace:
    """Adaptive loop on a finite game: the per-iteration problem is an LP and
    deviations/maximizers range over the full finite strategy set."""
    config = config or AdaptiveConfig()
    subset_idx = []
    for i, pts in enumerate(initial_subsets):
        idx = sorted({int(np.argmin(np.abs(fg.grids[i] - float(p)))) for p in pts})
        subset_idx.append(idx)
    trace = IterationTrace()
    pending = tuple(tuple(float(fg.grids[i][j]) for j in subset_idx[i]) for i in range(fg.num_players))
    stalled = False

    for k in range(config.max_iter):
        eps_k, probs = _solve_finite_iteration(fg, subset_idx, config)
        grids_k = tuple(fg.grids[i][subset_idx[i]] for i in range(fg.num_players))
        dist = SupportedDistribution.from_solver(grids_k, probs)
        report = _finite_report(fg, subset_idx, dist.probs)
        trace.records.append(
            IterationRecord(
                k=k,
                grids=grids_k,
                new_strategies=pending,
                epsilon=eps_k,
                epsilon_exact=report.epsilon,
                distribution=dist,
                per_recommendation=dict(report.per_recommendation),
            )
        )
        if eps_k <= config.eps_stop:
            trace.status = "converged"
            return trace

        additions = [[] for _ in range(fg.num_players)]
        for i in range(fg.num_players):
            if report.player_total(i) < config.beta * eps_k - _BIND_TOL * (1 + eps_k):
                continue
            for pos, s_idx in enumerate(subset_idx[i]):
                marg = dist.probs.sum(axis=tuple(j for j in range(fg.num_players) if j != i))
                if marg[pos] <= 1e-12:
                    continue
                gains = [
                    _finite_gain(fg, subset_idx, dist.probs, i, pos, t_idx)
                    for t_idx in range(fg.shape[i])
                ]
                best = max(gains)
                if best <= config.eps_stop:
                    continue
                for t_idx, gain in enumerate(gains):
                    if gain >= best - _NEAR_OPT_TOL and t_idx not in subset_idx[i] \
                            and t_idx not in additions[i]:
                        additions[i].append(t_idx)

        if not any(additions):
            stalled = True
            if not config.degenerate:
                break
            pending = tuple(() for _ in range(fg.num_players))
            continue
        pending = tuple(
            tuple(float(fg.grids[i][j]) for j in additions[i]) for i in range(fg.num_players)
        )
        subset_idx = [sorted(set(subset_idx[i]) | set(additions[i])) for i in range(fg.num_players)]

    trace.status = "stalled" if stalled else "max_iter"
    return trace


def _solve_finite_iteration(fg: FiniteGame, subset_idx, config: AdaptiveConfig):
    problem = ConicProblem()
    shape = tuple(len(s) for s in subset_idx)
    cells = list(itertools.product(*(range(n) for n in shape)))
    pi = {cell: problem.add_nonneg_var() for cell in cells}
    eps = problem.add_scalar_var()

    total = LinExpr()
    for v in pi.values():
        total = total + expr(v)
    problem.add_equality(total, 1.0)

    for i in range(fg.num_players):
        other_axes = [j for j in range(fg.num_players) if j != i]
        other_cells = list(itertools.product(*(range(len(subset_idx[j])) for j in other_axes)))

        def gain_expr(pos, t_idx):
            e = LinExpr()
            for rest in other_cells:
                p_cell = list(rest)
                p_cell.insert(i, pos)
                cell = [subset_idx[j][r] for j, r in zip(other_axes, rest)]
                cell.insert(i, subset_idx[i][pos])
                dev = list(cell)
                dev[i] = t_idx
                e.add_term(
                    ("s", pi[tuple(p_cell)].index),
                    float(fg.payoffs[i][tuple(dev)] - fg.payoffs[i][tuple(cell)]),
                )
            return e

        player_sum = LinExpr()
        for pos in range(len(subset_idx[i])):
            if not config.degenerate:
                for t_pos, t_idx in enumerate(subset_idx[i]):
                    if t_pos == pos:
                        continue
                    slack = problem.add_nonneg_var()
                    problem.add_equality(
                        gain_expr(pos, t_idx) - config.alpha * expr(eps) + expr(slack), 0.0
                    )
            ev = problem.add_scalar_var()
            player_sum = player_sum + expr(ev)
            for t_idx in range(fg.shape[i]):
                slack = problem.add_nonneg_var()
                problem.add_equality(gain_expr(pos, t_idx) - expr(ev) + expr(slack), 0.0)
        slack = problem.add_nonneg_var()
        problem.add_equality(player_sum - expr(eps) + expr(slack), 0.0)

    problem.set_objective(expr(eps))
    sol = problem.solve(tol=config.solver_tol, centering="strong")
    if sol.status is not Status.OPTIMAL:
        raise SolverError(f"finite iteration LP ended with status {sol.status.value}")
    probs = np.zeros(shape)
    for cell, v in pi.items():
        probs[cell] = sol.value(v)
    return float(sol.value(eps)), probs
