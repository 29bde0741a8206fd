"""Polynomial and finite (sampled) games on [-1,1]^n, and distributions over grids.

All types are immutable after construction and safe to share across
concurrent solves.  The JSON game format used by every CLI command is::

    {"players": ["x", "y"],
     "utilities": [{"terms": [{"exp": [2, 0], "coef": 0.596}, ...]}, ...]}

Exponent tuple order follows the ``players`` array.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .polynomials import MultiPoly, PolynomialError, merge_points

GRID_MERGE_TOL = 1e-9
_COORD_TOL = 1e-12


class GameFormatError(ValueError):
    """Malformed game or distribution document."""


@dataclass(frozen=True)
class PolynomialGame:
    """n players; utility i is a polynomial in n variables; variable j is
    player j's strategy in [-1, 1]."""

    utilities: tuple[MultiPoly, ...]
    player_names: tuple[str, ...]

    def __post_init__(self):
        n = len(self.utilities)
        if n < 1:
            raise GameFormatError("a game needs at least one player")
        if len(self.player_names) != n:
            raise GameFormatError("player_names length mismatch")
        for u in self.utilities:
            if u.num_vars != n:
                raise GameFormatError(
                    f"utility in {u.num_vars} variables for an {n}-player game"
                )

    @property
    def num_players(self) -> int:
        return len(self.utilities)

    def scale_player(self, player: int, lam: float) -> "PolynomialGame":
        """Scale one player's utility by ``lam`` (coefficient-level)."""
        utils = list(self.utilities)
        utils[player] = utils[player] * lam
        return PolynomialGame(tuple(utils), self.player_names)


@dataclass(frozen=True)
class FiniteGame:
    """Per-player strictly increasing strategy grids in [-1,1] and one dense
    payoff tensor per player over the product grid."""

    grids: tuple[np.ndarray, ...]
    payoffs: tuple[np.ndarray, ...]

    def __post_init__(self):
        shape = self.shape
        for g in self.grids:
            if g.size == 0:
                raise GameFormatError("empty strategy grid")
            if np.any(np.diff(g) <= 0):
                raise GameFormatError("grid points must be strictly increasing")
            if g[0] < -1 - _COORD_TOL or g[-1] > 1 + _COORD_TOL:
                raise GameFormatError("grid points must lie in [-1, 1]")
        for p in self.payoffs:
            if p.shape != shape:
                raise GameFormatError(f"payoff tensor shape {p.shape} != grid shape {shape}")

    @property
    def num_players(self) -> int:
        return len(self.grids)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.grids)

    def cells(self):
        return itertools.product(*(range(s) for s in self.shape))


@dataclass(frozen=True)
class SupportedDistribution:
    """Finitely supported joint probability measure on a product grid."""

    grids: tuple[np.ndarray, ...]
    probs: np.ndarray

    def __post_init__(self):
        shape = tuple(len(g) for g in self.grids)
        if self.probs.shape != shape:
            raise GameFormatError(f"probs shape {self.probs.shape} != grid shape {shape}")
        if np.any(self.probs < 0):
            raise GameFormatError("negative probability entry")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise GameFormatError(f"probabilities sum to {total}, not 1")

    @staticmethod
    def from_solver(grids, probs) -> "SupportedDistribution":
        """Build from solver output: clips tiny negatives and renormalizes."""
        probs = np.asarray(probs, dtype=float)
        if probs.min() < -1e-6:
            raise GameFormatError(f"solver probability {probs.min()} too negative")
        probs = np.clip(probs, 0.0, None)
        s = probs.sum()
        if not (0.5 < s < 2.0):
            raise GameFormatError(f"solver probabilities sum to {s}")
        return SupportedDistribution(tuple(np.asarray(g, float) for g in grids), probs / s)

    @staticmethod
    def point_mass(point) -> "SupportedDistribution":
        grids = tuple(np.array([float(c)]) for c in point)
        return SupportedDistribution(grids, np.ones((1,) * len(grids)))

    @property
    def num_players(self) -> int:
        return len(self.grids)

    def marginal(self, player: int) -> np.ndarray:
        axes = tuple(j for j in range(self.probs.ndim) if j != player)
        return self.probs.sum(axis=axes)

    def support(self, tol: float = 0.0):
        """Yield ``(point, prob)`` for every cell with probability > tol."""
        for cell in itertools.product(*(range(len(g)) for g in self.grids)):
            p = float(self.probs[cell])
            if p > tol:
                yield tuple(float(self.grids[j][cell[j]]) for j in range(len(self.grids))), p

    def moment(self, exponent: tuple[int, ...]) -> float:
        """Joint moment: sum over support of prob * prod_j s_j^k_j."""
        total = 0.0
        for point, p in self.support():
            v = p
            for x, k in zip(point, exponent):
                if k:
                    v *= x**k
            total += v
        return total


# ---------------------------------------------------------------------------
# operations


def _check_point(game: PolynomialGame, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.shape != (game.num_players,):
        raise GameFormatError(
            f"point has {point.size} coordinates, expected {game.num_players}"
        )
    if np.any(np.abs(point) > 1 + _COORD_TOL):
        raise GameFormatError(f"point {point.tolist()} outside [-1, 1]^n")
    return point


def eval_utility(game: PolynomialGame, player: int, point) -> float:
    """Exact polynomial evaluation of one player's utility at a profile."""
    return game.utilities[player](_check_point(game, point))


def _grid_index(grid: np.ndarray, value: float, tol: float = GRID_MERGE_TOL) -> int:
    idx = int(np.argmin(np.abs(grid - value)))
    if abs(grid[idx] - value) > tol:
        raise GameFormatError(f"strategy {value} not in grid {grid.tolist()}")
    return idx


def deviation_gain_poly(
    game: PolynomialGame, player: int, dist: SupportedDistribution, s_i: float
) -> MultiPoly:
    """Expected-gain polynomial g(t) for player ``player`` deviating to t when
    recommended ``s_i``, under ``dist``:

        g(t) = sum over s_{-i} of pi(s_i, s_{-i}) * [u_i(t, s_{-i}) - u_i(s)]

    Coefficients are accumulated exactly over the finite support, so
    g(s_i) = 0 up to float cancellation.
    """
    s_idx = _grid_index(dist.grids[player], s_i)
    u = game.utilities[player]
    coeffs = np.zeros(u.degree_in(player) + 1)
    other_axes = [j for j in range(dist.num_players) if j != player]
    for other_cell in itertools.product(*(range(len(dist.grids[j])) for j in other_axes)):
        cell = list(other_cell)
        cell.insert(player, s_idx)
        p = float(dist.probs[tuple(cell)])
        if p == 0.0:
            continue
        others = {j: float(dist.grids[j][k]) for j, k in zip(other_axes, other_cell)}
        c = u.restrict(player, others)
        base = float(np.polynomial.polynomial.polyval(dist.grids[player][s_idx], c))
        coeffs[: c.size] += p * c
        coeffs[0] -= p * base
    return MultiPoly.univariate(coeffs)


def sample_game(game: PolynomialGame, grids) -> FiniteGame:
    """Restrict utilities to a product of finite grids (the sampled game)."""
    grids = tuple(merge_points(g) for g in grids)
    if len(grids) != game.num_players:
        raise GameFormatError("one grid per player required")
    for g in grids:
        if g.size == 0:
            raise GameFormatError("empty strategy grid")
    shape = tuple(len(g) for g in grids)
    payoffs = []
    for i in range(game.num_players):
        tensor = np.empty(shape)
        for cell in itertools.product(*(range(s) for s in shape)):
            point = [grids[j][cell[j]] for j in range(len(grids))]
            tensor[cell] = eval_utility(game, i, point)
        payoffs.append(tensor)
    return FiniteGame(grids, tuple(payoffs))


def expected_utilities(game: PolynomialGame, dist: SupportedDistribution) -> np.ndarray:
    """Expected utility per player under a finitely supported distribution."""
    out = np.zeros(game.num_players)
    for point, p in dist.support():
        for i in range(game.num_players):
            out[i] += p * eval_utility(game, i, point)
    return out


# ---------------------------------------------------------------------------
# serialization


def serialize_game(game: PolynomialGame) -> str:
    utilities = []
    for u in game.utilities:
        terms = [
            {"exp": list(exp), "coef": coef}
            for exp, coef in sorted(u.terms.items(), key=lambda t: (sum(t[0]), t[0]))
        ]
        utilities.append({"terms": terms})
    doc = {"players": list(game.player_names), "utilities": utilities}
    return json.dumps(doc, indent=2)


def parse_game(text: str) -> PolynomialGame:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "players" not in doc or "utilities" not in doc:
        raise GameFormatError("document must have 'players' and 'utilities'")
    players = doc["players"]
    if not isinstance(players, list) or not players:
        raise GameFormatError("'players' must be a nonempty list")
    n = len(players)
    utilities = doc["utilities"]
    if not isinstance(utilities, list) or len(utilities) != n:
        raise GameFormatError(f"expected {n} utilities, got {len(utilities)}")
    polys = []
    for i, entry in enumerate(utilities):
        terms = {}
        for term in entry.get("terms", []):
            exp = term.get("exp")
            coef = term.get("coef")
            if not isinstance(exp, list) or len(exp) != n:
                raise GameFormatError(
                    f"utility {i}: term {term} has {len(exp) if isinstance(exp, list) else '?'}"
                    f" exponents, expected {n}"
                )
            if any((not isinstance(e, int)) or e < 0 for e in exp):
                raise GameFormatError(f"utility {i}: bad exponent tuple {exp}")
            if not isinstance(coef, (int, float)) or not math.isfinite(coef):
                raise GameFormatError(f"utility {i}: non-finite coefficient in term {term}")
            key = tuple(exp)
            terms[key] = terms.get(key, 0.0) + float(coef)
        try:
            polys.append(MultiPoly(n, terms))
        except PolynomialError as exc:
            raise GameFormatError(f"utility {i}: {exc}") from exc
    return PolynomialGame(tuple(polys), tuple(str(p) for p in players))


def serialize_distribution(dist: SupportedDistribution) -> str:
    doc = {
        "grids": [g.tolist() for g in dist.grids],
        "probs": dist.probs.tolist(),
        "support": [
            {"point": list(point), "prob": prob} for point, prob in dist.support(1e-12)
        ],
    }
    return json.dumps(doc, indent=2)


def parse_distribution(text: str) -> SupportedDistribution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"not valid JSON: {exc}") from exc
    if "grids" not in doc or "probs" not in doc:
        raise GameFormatError("distribution document must have 'grids' and 'probs'")
    raw_grids = [np.asarray(g, dtype=float) for g in doc["grids"]]
    probs = np.asarray(doc["probs"], dtype=float)
    if probs.shape != tuple(len(g) for g in raw_grids):
        raise GameFormatError("probs shape does not match grids")
    # merge grid points closer than GRID_MERGE_TOL, accumulating their mass
    grids, out = [], probs
    for axis, g in enumerate(raw_grids):
        merged = merge_points(g, GRID_MERGE_TOL)
        if len(merged) == len(g) and np.all(np.diff(g) > 0):
            grids.append(np.asarray(g, dtype=float))
            continue
        idx = [_grid_index(merged, v) for v in g]
        folded = np.zeros(out.shape[:axis] + (len(merged),) + out.shape[axis + 1 :])
        for k, m in enumerate(idx):
            sl_src = [slice(None)] * out.ndim
            sl_dst = [slice(None)] * out.ndim
            sl_src[axis], sl_dst[axis] = k, m
            folded[tuple(sl_dst)] += out[tuple(sl_src)]
        grids.append(merged)
        out = folded
    return SupportedDistribution.from_solver(grids, out)


# ---------------------------------------------------------------------------
# random games

_DEFAULT_NAMES = ("x", "y", "z")


def player_names(n: int) -> tuple[str, ...]:
    if n <= len(_DEFAULT_NAMES):
        return _DEFAULT_NAMES[:n]
    return tuple(f"s{i}" for i in range(n))


def random_polynomial_game(
    num_players: int, degree: int, seed: int, coef_std: float = 1.0
) -> PolynomialGame:
    """Random game: every monomial of total degree <= ``degree`` gets an
    independent N(0, coef_std^2) coefficient.  Deterministic per seed."""
    rng = np.random.default_rng(seed)
    exponents = [
        exp
        for exp in itertools.product(range(degree + 1), repeat=num_players)
        if sum(exp) <= degree
    ]
    exponents.sort(key=lambda e: (sum(e), e))
    utilities = []
    for _ in range(num_players):
        coefs = rng.normal(0.0, coef_std, size=len(exponents))
        utilities.append(MultiPoly(num_players, dict(zip(exponents, coefs))))
    return PolynomialGame(tuple(utilities), player_names(num_players))
