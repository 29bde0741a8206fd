"""Brute-force oracles kept independent of the library code paths."""

import itertools

import numpy as np


def dense_max_on_interval(coeffs, points=200001):
    """Independent oracle for univariate maximization: dense sampling."""
    ts = np.linspace(-1.0, 1.0, points)
    vals = np.polynomial.polynomial.polyval(ts, np.asarray(coeffs, dtype=float))
    k = int(np.argmax(vals))
    return float(ts[k]), float(vals[k])


def departure_gain(fg, dist, player, zeta):
    """Total expected gain for one player from the departure map ``zeta``
    (index -> index), enumerated cell by cell."""
    total = 0.0
    shape = fg.shape
    for cell in itertools.product(*(range(s) for s in shape)):
        p = float(dist.probs[cell])
        if p == 0.0:
            continue
        dev = list(cell)
        dev[player] = zeta[cell[player]]
        total += p * float(fg.payoffs[player][tuple(dev)] - fg.payoffs[player][cell])
    return total


def all_departures(size):
    return itertools.product(range(size), repeat=size)


def max_departure_gain(fg, dist):
    """Brute-force oracle over every departure function of every player."""
    worst = 0.0
    for i in range(fg.num_players):
        size = fg.shape[i]
        for zeta in all_departures(size):
            worst = max(worst, departure_gain(fg, dist, i, zeta))
    return worst
