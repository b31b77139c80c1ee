"""Independent oracles: matrix algebra via numpy, naive set saturation, DFS.

These deliberately avoid immlab.relalg so each check has two routes.
"""

import numpy as np


def matrix_of(pairs, n):
    m = np.zeros((n, n), dtype=bool)
    for a, b in pairs:
        m[a, b] = True
    return m


def pairs_of(m):
    return {(int(a), int(b)) for a, b in zip(*np.nonzero(m))}


def matrix_compose(a_pairs, b_pairs, n):
    return pairs_of(matrix_of(a_pairs, n) @ matrix_of(b_pairs, n))


def matrix_closure(pairs, n):
    """Transitive closure by repeated boolean squaring."""
    m = matrix_of(pairs, n)
    acc = m.copy()
    while True:
        nxt = acc | (acc @ acc)
        if (nxt == acc).all():
            return pairs_of(acc)
        acc = nxt


def dfs_has_cycle(pairs, n):
    adj = {}
    for a, b in pairs:
        adj.setdefault(a, []).append(b)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n

    def visit(u):
        color[u] = GRAY
        for v in adj.get(u, ()):
            if color[v] == GRAY:
                return True
            if color[v] == WHITE and visit(v):
                return True
        color[u] = BLACK
        return False

    return any(color[u] == WHITE and visit(u) for u in range(n))


def hasse_oracle(pairs, n):
    """Immediate edges of a strict partial order: drop pairs with a 2-step path."""
    closed = matrix_closure(pairs, n)
    return {
        (a, b)
        for a, b in pairs
        if not any((a, c) in closed and (c, b) in closed for c in range(n))
    }


def _compose(a, b):
    by_src = {}
    for x, y in b:
        by_src.setdefault(x, set()).add(y)
    return {(x, z) for x, y in a for z in by_src.get(y, ())}


def power_fixpoint_oracle(seeds, armv7=False):
    """Naive rule-at-a-time saturation of the ii/ic/ci/cc table.

    seeds: dict with addr, data, rdw, rfi, ctrl_isync, detour, ctrl,
    addr_po_opt, po_loc (sets of pairs).
    """
    ii = set(seeds["addr"]) | set(seeds["data"]) | set(seeds["rdw"]) | set(seeds["rfi"])
    ic, ci, cc = set(), set(), set()
    ci |= set(seeds["ctrl_isync"]) | set(seeds["detour"])
    cc |= set(seeds["data"]) | set(seeds["ctrl"]) | set(seeds["addr_po_opt"])
    if not armv7:
        cc |= set(seeds["po_loc"])
    changed = True
    while changed:
        changed = False
        rules = [
            (ii, ci), (ii, _compose(ic, ci)), (ii, _compose(ii, ii)),
            (ic, ii), (ic, cc), (ic, _compose(ic, cc)), (ic, _compose(ii, ic)),
            (ci, _compose(ci, ii)), (ci, _compose(cc, ci)),
            (cc, ci), (cc, _compose(ci, ic)), (cc, _compose(cc, cc)),
        ]
        for target, extra in rules:
            before = len(target)
            target |= extra
            if len(target) != before:
                changed = True
    return ii, ic, ci, cc
