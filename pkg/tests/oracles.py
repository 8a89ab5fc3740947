"""Independent brute-force references used by the tests.

Nothing here imports the package: each oracle re-derives its answer by
exhaustive search so that agreement is meaningful.
"""

import itertools
import math

import numpy as np


def dispatch_enumeration(prices, cvar, cstart, capacity, min_load, initial_on=False):
    """Best (objective, state tuple) over all 2**H on/off sequences.

    Output when on is chosen per hour: capacity if the margin is non-negative,
    otherwise minimum load (the profit is linear in output between the two).
    """
    H = len(prices)
    best = (-math.inf, None)
    for states in itertools.product((0, 1), repeat=H):
        total = 0.0
        prev = 1 if initial_on else 0
        for h, d in enumerate(states):
            if d:
                m = prices[h] - cvar[h]
                total += max(m * capacity, m * min_load)
                if not prev:
                    total -= cstart[h]
            prev = d
        if total > best[0]:
            best = (total, states)
    return best


def partition_enumeration(X, k):
    """Minimum within-segment SSE over all contiguous (k + 1)-segment splits of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    best = (math.inf, None)
    for cuts in itertools.combinations(range(1, n), k):
        edges = (0,) + cuts + (n,)
        sse = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            seg = X[a:b]
            sse += float(((seg - seg.mean(axis=0)) ** 2).sum())
        if sse < best[0] - 1e-12:
            best = (sse, cuts)
    return best


def logit_loglik(b0, b1, x, y):
    eta = b0 + b1 * np.asarray(x, dtype=float)
    return float(np.sum(np.asarray(y) * eta - np.logaddexp(0.0, eta)))


def logit_grid_search(x, y, center=(0.0, 0.0), half_width=(8.0, 8.0), final_step=1e-4):
    """Maximise the logit likelihood on successively finer 2-D grids.

    Starts from a coarse 41 x 41 grid around ``center``, then repeatedly
    re-centres on the best point and shrinks the window until the grid step
    reaches ``final_step``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c0, c1 = center
    w0, w1 = half_width
    points = 41
    while True:
        g0 = np.linspace(c0 - w0, c0 + w0, points)
        g1 = np.linspace(c1 - w1, c1 + w1, points)
        eta = g0[:, None, None] + g1[None, :, None] * x[None, None, :]
        ll = np.sum(y * eta - np.logaddexp(0.0, eta), axis=2)
        i, j = np.unravel_index(np.argmax(ll), ll.shape)
        c0, c1 = g0[i], g1[j]
        step0, step1 = g0[1] - g0[0], g1[1] - g1[0]
        if max(step0, step1) <= final_step * (1 + 1e-9):
            return float(c0), float(c1)
        w0, w1 = max(4 * step0, final_step * 20), max(4 * step1, final_step * 20)


def hedge_neutral_means(E, cells):
    """Mean of E within each cell label."""
    return {c: float(np.mean(E[cells == c])) for c in np.unique(cells)}
