"""Independent reference implementations used to freeze expected values.

Nothing here imports the scheduler or theory modules; each oracle is a
straight-line rewrite from the definitions.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def rounds(n, eta):
    L = 0
    while eta**L < n:
        L += 1
    return L


def straight_sh(curves, budget, eta, incumbents=()):
    """Rung-by-rung SH/RUSH over plain lists. Returns (selected, total_pulls, actives per rung)."""
    arms = sorted(curves)
    n = len(arms)
    L = rounds(n, eta)
    if L == 0:
        return arms[0], 0, []
    active = list(arms)
    t = 0
    total = 0
    sizes = []
    order = None
    for k in range(L):
        p = budget // (max(1, n // eta**k) * L)
        t += p
        total += p * len(active)
        sizes.append(len(active))
        order = sorted(active, key=lambda a: (curves[a][t - 1], a not in incumbents, a))
        inc_ranks = [i for i, a in enumerate(order) if a in incumbents]
        limit = n // eta ** (k + 1)
        if inc_ranks:
            limit = min(limit, inc_ranks[0])
        active = order[: max(limit, 1)]
    return order[0], total, sizes


def bracket_table(R, eta):
    """(n_s, r_s) from the bracket arithmetic, using exact rationals."""
    s_max = 0
    while eta ** (s_max + 1) <= R:
        s_max += 1
    B = (s_max + 1) * R
    out = []
    for s in range(s_max, -1, -1):
        n = Fraction(B, R) * Fraction(eta**s, s + 1)
        n_int = n.numerator // n.denominator + (n.numerator % n.denominator != 0)
        r = Fraction(R, eta**s)
        out.append((n_int, r.numerator // r.denominator))
    return out


def bracket_total(R, eta, s, n):
    """Pulls of one bracket with ``n`` arms and no incumbents."""
    levels = [R // eta ** (s - i) for i in range(s + 1)]
    total, prev, active = 0, 0, n
    for i, lvl in enumerate(levels):
        active = max(1, n // eta**i)
        total += active * (lvl - prev)
        prev = lvl
    return total


def suffix_max_envelope(curve):
    nu = curve[-1]
    out = []
    for t in range(len(curve)):
        out.append(max(abs(x - nu) for x in curve[t:]))
    return out


def first_index_at_most(gamma, alpha):
    for t, g in enumerate(gamma, start=1):
        if g <= alpha:
            return t
    return None


def brute_force_ranking(losses, incumbents):
    """Search all permutations for the one consistent with the pairwise order."""

    def before(a, b):
        if losses[a] != losses[b]:
            return losses[a] < losses[b]
        if (a in incumbents) != (b in incumbents):
            return a in incumbents
        return a < b

    for perm in itertools.permutations(losses):
        if all(before(perm[i], perm[j]) for i in range(len(perm)) for j in range(i + 1, len(perm))):
            return list(perm)
    raise AssertionError("no consistent order")


def hand_trace_sizes(n, eta, L, incumbent_on_top):
    """Active arms per rung. With an incumbent ranked 0 everywhere only it
    survives rung 0; otherwise the plain cut by eta applies."""
    sizes = [n]
    for k in range(1, L):
        sizes.append(1 if incumbent_on_top else max(1, n // eta**k))
    return sizes


def hand_trace_pulls(budget, n, eta, incumbent_on_top):
    L = rounds(n, eta)
    schedule = [budget // (max(1, n // eta**k) * L) for k in range(L)]
    sizes = hand_trace_sizes(n, eta, L, incumbent_on_top)
    return sum(s * p for s, p in zip(sizes, schedule)), sizes, schedule
