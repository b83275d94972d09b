"""Independent reference computations used by the tests."""

import math

import numpy as np


def _grid_round(h, a, gain, need, noise_eve, P, lo, hi, points, keep):
    """One pass over ``points**6`` directions; returns the ``keep`` best cells.

    Cells are ``(eve, params, feasible)``; while nothing fits the power
    budget the cheapest directions are returned instead.
    """
    axes = [np.linspace(l, u, points) for l, u in zip(lo, hi)]
    t1, t2, t3 = np.meshgrid(*axes[:3], indexing="ij")
    amp = np.stack([np.cos(t1), np.sin(t1) * np.cos(t2), np.sin(t1) * np.sin(t2) * np.cos(t3),
                    np.sin(t1) * np.sin(t2) * np.sin(t3)], -1).reshape(-1, 4)
    p1, p2, p3 = np.meshgrid(*axes[3:], indexing="ij")
    ph = np.exp(1j * np.stack([np.zeros_like(p1), p1, p2, p3], -1).reshape(-1, 4))
    eve = np.empty((len(amp), len(ph)))
    cost = np.empty_like(eve)
    for i, r in enumerate(amp):
        U = r * ph
        gh = np.abs(U @ h.conj()) ** 2
        ga = np.abs(U @ a.conj()) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            p = need / gh
        cost[i] = p
        eve[i] = np.where(p <= P, abs(gain) ** 2 * p * ga / noise_eve, np.inf)
    feasible = np.isfinite(eve).any()
    score = eve if feasible else cost
    flat = np.argsort(score, axis=None)[:keep]
    out = []
    for f in flat:
        i, j = np.unravel_index(f, score.shape)
        x = np.array([*[ax[idx] for ax, idx in zip(axes[:3], np.unravel_index(i, t1.shape))],
                      *[ax[idx] for ax, idx in zip(axes[3:], np.unravel_index(j, p1.shape))]])
        out.append((float(eve[i, j]), x))
    return out


def grid_min_eve_k1(h, a, gain, gamma, noise, noise_eve, P, points=10, rounds=6, starts=8):
    """Exhaustive phase/amplitude grid over rank-one beamformers (N=4, K=1).

    A direction ``u`` is parametrized by three hyperspherical amplitude
    angles and three relative phases; its power is the least meeting the
    SINR target, and directions needing more than ``P`` are discarded.
    The first pass searches ``points**6`` directions; the ``starts`` best
    cells are then refined by zooming rounds of the same size. Returns the
    smallest eavesdropping SINR found.
    """
    lo0 = np.array([0, 0, 0, -np.pi, -np.pi, -np.pi], float)
    hi0 = np.array([np.pi / 2] * 3 + [np.pi] * 3)
    need = gamma * noise
    best = math.inf
    step0 = (hi0 - lo0) / (points - 1)
    for val, x in _grid_round(h, a, gain, need, noise_eve, P, lo0, hi0, points, starts):
        best = min(best, val)
        step = step0
        for _ in range(rounds - 1):
            lo, hi = x - step, x + step
            val, x = _grid_round(h, a, gain, need, noise_eve, P, lo, hi, points, 1)[0]
            best = min(best, val)
            step = 2 * step / (points - 1)
    return best


def qfunc(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def projected_gradient_min_power(G, b, iters=20000):
    """Dual FISTA for min |x|^2 s.t. G x <= b; returns x = -G' lam / 2."""
    Q = G @ G.T / 2
    L = np.linalg.eigvalsh(Q).max()
    lam = y = np.zeros(len(b))
    t = 1.0
    for _ in range(iters):
        grad = Q @ y + b
        nxt = np.maximum(y - grad / L, 0.0)
        t_next = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = nxt + (t - 1) / t_next * (nxt - lam)
        lam, t = nxt, t_next
    return -G.T @ lam / 2
