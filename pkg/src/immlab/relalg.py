"""Finite binary relations over dense integer event ids.

Every consistency predicate in the package is a formula over these. Relations
carry their universe size; ids are 0..n-1. All values are immutable.
"""

from __future__ import annotations

from . import kernels

EventSet = frozenset


class UniverseMismatch(ValueError):
    pass


class Rel:
    """A binary relation over {0..n-1}, stored as a frozenset of pairs."""

    __slots__ = ("n", "pairs", "_rows")

    def __init__(self, n, pairs=()):
        self.n = n
        self.pairs = pairs if isinstance(pairs, frozenset) else frozenset(pairs)
        for x, y in self.pairs:
            if not (0 <= x < n and 0 <= y < n):
                raise ValueError(f"pair ({x},{y}) outside universe of size {n}")
        self._rows = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def identity(n, members=None):
        if members is None:
            members = range(n)
        return Rel(n, ((x, x) for x in members))

    @staticmethod
    def from_rows(n, rows):
        pairs = set()
        for i in range(n):
            rest = rows[i]
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                pairs.add((i, j))
        return Rel(n, pairs)

    def rows(self):
        if self._rows is None:
            rows = [0] * self.n
            for x, y in self.pairs:
                rows[x] |= 1 << y
            self._rows = rows
        return self._rows

    # -- set algebra -----------------------------------------------------------

    def _check(self, other):
        if self.n != other.n:
            raise UniverseMismatch(f"universes differ: {self.n} vs {other.n}")

    def __or__(self, other):
        self._check(other)
        return Rel(self.n, self.pairs | other.pairs)

    def __and__(self, other):
        self._check(other)
        return Rel(self.n, self.pairs & other.pairs)

    def __sub__(self, other):
        self._check(other)
        return Rel(self.n, self.pairs - other.pairs)

    def __eq__(self, other):
        return isinstance(other, Rel) and self.n == other.n and self.pairs == other.pairs

    def __hash__(self):
        return hash((self.n, self.pairs))

    def __contains__(self, pair):
        return pair in self.pairs

    def __len__(self):
        return len(self.pairs)

    def __bool__(self):
        return bool(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __repr__(self):
        return f"Rel({self.n}, {sorted(self.pairs)})"

    def inverse(self):
        return Rel(self.n, ((y, x) for x, y in self.pairs))

    def dom(self):
        return frozenset(x for x, _ in self.pairs)

    def codom(self):
        return frozenset(y for _, y in self.pairs)

    # -- composition and closures ----------------------------------------------

    def compose(self, other):
        """Left composition self;other."""
        self._check(other)
        if not self.pairs or not other.pairs:
            return Rel(self.n)
        rows = kernels.compose(self.rows(), other.rows(), self.n)
        return Rel.from_rows(self.n, rows)

    def seq(self, *others):
        out = self
        for r in others:
            out = out.compose(r)
        return out

    def plus(self):
        """Transitive closure (least fixpoint of r ∪ r;r)."""
        if not self.pairs:
            return self
        return Rel.from_rows(self.n, kernels.transitive_closure(self.rows(), self.n))

    def opt(self):
        """Reflexive closure: adds identity on the whole universe."""
        return self | Rel.identity(self.n)

    def star(self):
        return self.plus() | Rel.identity(self.n)

    def closures(self):
        """(reflexive, transitive, reflexive-transitive) closures."""
        return (self.opt(), self.plus(), self.star())

    def immediate(self):
        """Immediate edges: r \\ r;r."""
        return self - self.compose(self)

    # -- predicates -------------------------------------------------------------

    def is_irreflexive(self):
        return all(x != y for x, y in self.pairs)

    def is_acyclic(self):
        if not self.pairs:
            return True
        return not kernels.has_cycle(self.rows(), self.n)

    def is_transitive(self):
        return self.compose(self).pairs <= self.pairs

    def is_total_on(self, members):
        """Strict total order on members: total, and a strict order there."""
        members = frozenset(members)
        restricted = self.restrict(members, members)
        if not restricted.is_irreflexive() or not restricted.is_transitive():
            return False
        for x in members:
            for y in members:
                if x < y and (x, y) not in restricted.pairs and (y, x) not in restricted.pairs:
                    return False
        return True

    # -- restrictions -----------------------------------------------------------

    def restrict(self, a, b):
        """[A];r;[B]."""
        a = frozenset(a)
        b = frozenset(b)
        return Rel(self.n, ((x, y) for x, y in self.pairs if x in a and y in b))

    def restrict_loc(self, locmap):
        """Pairs whose endpoints have the same (non-None) location."""
        return Rel(
            self.n,
            (
                (x, y)
                for x, y in self.pairs
                if locmap[x] is not None and locmap[x] == locmap[y]
            ),
        )

    def image(self, members):
        members = frozenset(members)
        return frozenset(y for x, y in self.pairs if x in members)

    def preimage(self, members):
        members = frozenset(members)
        return frozenset(x for x, y in self.pairs if y in members)

    def find_cycle(self):
        """A shortest cycle (event list, first repeated) or None. BFS per node."""
        if self.is_acyclic():
            return None
        adj = {}
        for x, y in self.pairs:
            adj.setdefault(x, []).append(y)
        for a in adj:
            adj[a].sort()
        best = None
        for start in sorted(adj):
            # BFS back to start
            parent = {start: None}
            queue = [start]
            found = False
            while queue and not found:
                nxt = []
                for u in queue:
                    for v in adj.get(u, ()):
                        if v == start:
                            cycle = [start]
                            w = u
                            while w is not None:
                                cycle.append(w)
                                w = parent[w]
                            cycle.reverse()
                            if best is None or len(cycle) < len(best):
                                best = cycle
                            found = True
                            break
                        if v not in parent:
                            parent[v] = u
                            nxt.append(v)
                    if found:
                        break
                queue = nxt
        return best


def union_all(n, rels):
    pairs = set()
    for r in rels:
        if r.n != n:
            raise UniverseMismatch(f"universes differ: {n} vs {r.n}")
        pairs |= r.pairs
    return Rel(n, pairs)
