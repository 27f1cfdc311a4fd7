"""Finite posets, order maps, finite topologies and derived lattices.

Element ids are strings.  Everything that has to pick an order picks the
lexicographic one, so chain indices (and hence coboundary matrices) are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Mapping

from .errors import (
    CycleDetected,
    EmptyInput,
    TopologyError,
    TopologyTooLarge,
    UnknownElement,
)

Chain = tuple  # strictly increasing tuple of element ids

MAX_SUBSET_CHECKS = 2**16


class Poset:
    """A finite partial order given by generating pairs.

    ``covers`` holds the Hasse diagram (the transitive reduction of the
    generating pairs); the reflexive-transitive closure is computed once
    at construction.
    """

    def __init__(self, elements: Iterable[str], pairs: Iterable[tuple[str, str]] = ()):
        elems = list(elements)
        for e in elems:
            if not isinstance(e, str):
                raise TypeError(f"element ids must be strings, got {e!r}")
        if len(set(elems)) != len(elems):
            dup = sorted({e for e in elems if elems.count(e) > 1})
            raise ValueError(f"duplicate element ids: {dup}")
        self.elements: tuple[str, ...] = tuple(sorted(elems))
        known = set(self.elements)
        succ: dict[str, set[str]] = {e: set() for e in self.elements}
        for lo, hi in pairs:
            for e in (lo, hi):
                if e not in known:
                    raise UnknownElement(f"unknown element {e!r}")
            if lo != hi:
                succ[lo].add(hi)
        _check_acyclic(self.elements, succ)

        up: dict[str, frozenset[str]] = {}
        for e in self.elements:
            seen = {e}
            stack = [e]
            while stack:
                for nxt in succ[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            up[e] = frozenset(seen)
        self._up = up
        down: dict[str, set[str]] = {e: set() for e in self.elements}
        for e, ups in up.items():
            for u in ups:
                down[u].add(e)
        self._down = {e: frozenset(v) for e, v in down.items()}

        hasse = []
        for lo in self.elements:
            strict = up[lo] - {lo}
            for hi in strict:
                # hi covers lo unless something strictly between
                if not any(hi in up[mid] for mid in strict if mid != hi):
                    hasse.append((lo, hi))
        self.covers: tuple[tuple[str, str], ...] = tuple(sorted(hasse))

    # queries ----------------------------------------------------------
    def __contains__(self, x) -> bool:
        return x in self._up

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[str]:
        return iter(self.elements)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poset):
            return NotImplemented
        return self.elements == other.elements and self.covers == other.covers

    def __hash__(self) -> int:
        return hash((self.elements, self.covers))

    def __repr__(self) -> str:
        return f"Poset({len(self.elements)} elements, {len(self.covers)} covers)"

    def _check(self, x: str) -> None:
        if x not in self._up:
            raise UnknownElement(f"unknown element {x!r}")

    def leq(self, x: str, y: str) -> bool:
        self._check(x)
        self._check(y)
        return y in self._up[x]

    def lt(self, x: str, y: str) -> bool:
        return x != y and self.leq(x, y)

    def up(self, x: str) -> frozenset[str]:
        self._check(x)
        return self._up[x]

    def down(self, x: str) -> frozenset[str]:
        self._check(x)
        return self._down[x]

    def upper_covers(self, x: str) -> list[str]:
        return [hi for lo, hi in self.covers if lo == x]

    def relations(self) -> list[tuple[str, str]]:
        """All strict pairs x < y, sorted."""
        return [(x, y) for x in self.elements for y in sorted(self._up[x]) if y != x]

    def minimal(self) -> list[str]:
        return [e for e in self.elements if len(self._down[e]) == 1]

    def maximal(self) -> list[str]:
        return [e for e in self.elements if len(self._up[e]) == 1]

    @property
    def height(self) -> int:
        """Length of the longest strict chain (0 for an antichain, -1 if empty)."""
        if not self.elements:
            return -1
        best: dict[str, int] = {}
        for x in reversed(self.linear_extension()):
            above = [best[y] + 1 for y in self._up[x] if y != x]
            best[x] = max(above, default=0)
        return max(best.values())

    def linear_extension(self) -> list[str]:
        """Deterministic topological order (ties broken lexicographically)."""
        return _topo(self)

    def subposet(self, subset: Iterable[str]) -> "Poset":
        """Induced subposet on ``subset``."""
        sub = sorted(set(subset))
        for x in sub:
            self._check(x)
        pairs = [(x, y) for x in sub for y in sub if x != y and y in self._up[x]]
        return Poset(sub, pairs)

    def to_json(self) -> dict:
        return {"elements": list(self.elements), "covers": [list(c) for c in self.covers]}

    @classmethod
    def from_json(cls, data: Mapping) -> "Poset":
        return cls(data["elements"], [tuple(c) for c in data.get("covers", [])])


def _topo(p: Poset) -> list[str]:
    indeg = {e: len(p._down[e]) - 1 for e in p.elements}
    ready = sorted(e for e, d in indeg.items() if d == 0)
    out = []
    remaining = {e: set(p._down[e]) - {e} for e in p.elements}
    while ready:
        x = ready.pop(0)
        out.append(x)
        for y in p._up[x]:
            if y != x and x in remaining[y]:
                remaining[y].discard(x)
                if not remaining[y]:
                    ready.append(y)
        ready.sort()
    return out


def _check_acyclic(elements: tuple[str, ...], succ: dict[str, set[str]]) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {e: WHITE for e in elements}
    for start in elements:
        if colour[start] != WHITE:
            continue
        path = [start]
        iters = [iter(sorted(succ[start]))]
        colour[start] = GREY
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = BLACK
                iters.pop()
                continue
            if colour[nxt] == GREY:
                cyc = path[path.index(nxt):] + [nxt]
                raise CycleDetected(cyc)
            if colour[nxt] == WHITE:
                colour[nxt] = GREY
                path.append(nxt)
                iters.append(iter(sorted(succ[nxt])))


def build_poset(elements: Iterable[str], cover_pairs: Iterable[tuple[str, str]] = ()) -> Poset:
    return Poset(elements, cover_pairs)


def enumerate_chains(p: Poset, k: int) -> list[Chain]:
    """All strict chains a0 < ... < ak, lexicographically sorted."""
    if k < 0:
        raise ValueError("chain length must be non-negative")
    out: list[Chain] = []

    def grow(chain: tuple[str, ...]) -> None:
        if len(chain) == k + 1:
            out.append(chain)
            return
        top = chain[-1]
        for nxt in sorted(p._up[top]):
            if nxt != top:
                grow(chain + (nxt,))

    for e in p.elements:
        grow((e,))
    out.sort()
    return out


def up_set(p: Poset, x: str) -> frozenset[str]:
    return p.up(x)


def dual_poset(p: Poset) -> Poset:
    return Poset(p.elements, [(hi, lo) for lo, hi in p.covers])


def alexandroff_opens(p: Poset) -> list[frozenset[str]]:
    """Every up-closed subset of ``p`` (exponential; meant for tiny posets)."""
    elems = p.elements
    opens = []
    for r in range(len(elems) + 1):
        for combo in combinations(elems, r):
            s = frozenset(combo)
            if all(p._up[x] <= s for x in s):
                opens.append(s)
    return opens


# order maps ------------------------------------------------------------

@dataclass(frozen=True)
class OrderMap:
    source: Poset
    target: Poset
    mapping: Mapping[str, str]

    def __call__(self, x: str) -> str:
        try:
            return self.mapping[x]
        except KeyError:
            raise UnknownElement(f"order map undefined on {x!r}") from None

    def fiber(self, y: str) -> list[str]:
        return [x for x in self.source.elements if self.mapping[x] == y]

    def compose(self, first: "OrderMap") -> "OrderMap":
        """``self ∘ first``."""
        return OrderMap(first.source, self.target, {x: self.mapping[first.mapping[x]] for x in first.source})

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "mapping": {k: self.mapping[k] for k in sorted(self.mapping)},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "OrderMap":
        return cls(Poset.from_json(data["source"]), Poset.from_json(data["target"]), dict(data["mapping"]))


def identity_map(p: Poset) -> OrderMap:
    return OrderMap(p, p, {x: x for x in p})


def inclusion_map(sub: Poset, p: Poset) -> OrderMap:
    return OrderMap(sub, p, {x: x for x in sub})


@dataclass
class OrderReport:
    ok: bool
    violations: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"pair": list(pair), "image": list(img)} for pair, img in self.violations
            ],
        }


def check_order_preserving(m: OrderMap) -> OrderReport:
    for x in m.source:
        if x not in m.mapping:
            raise UnknownElement(f"order map undefined on {x!r}")
        if m.mapping[x] not in m.target:
            raise UnknownElement(f"order map sends {x!r} to unknown {m.mapping[x]!r}")
    bad = []
    for x, y in m.source.relations():
        fx, fy = m.mapping[x], m.mapping[y]
        if not m.target.leq(fx, fy):
            bad.append(((x, y), (fx, fy)))
    return OrderReport(not bad, bad)


# topologies and subset lattices ----------------------------------------

def subset_id(s: Iterable) -> str:
    return "{" + ",".join(sorted(str(v) for v in s)) + "}"


class SubsetPoset(Poset):
    """A poset of point-subsets ordered by inclusion (or its reverse)."""

    def __init__(self, subsets: Iterable[frozenset], reverse: bool = False):
        subs = {subset_id(s): frozenset(s) for s in subsets}
        pairs = []
        for a, sa in subs.items():
            for b, sb in subs.items():
                if a != b and sa <= sb:
                    pairs.append((b, a) if reverse else (a, b))
        super().__init__(subs, pairs)
        self.subsets: dict[str, frozenset] = subs
        self.reverse = reverse


class FiniteTopology:
    """Finite space with an explicit list of open sets, validated at build.

    ``require_unions=False`` accepts families that contain the empty set and
    the whole space and are closed under intersection but not union; gluing
    can still be checked on them, only over the covers that are present.
    """

    def __init__(self, points: Iterable, opens: Iterable[Iterable], require_unions: bool = True):
        self.points = frozenset(points)
        self.require_unions = require_unions
        uniq: dict[frozenset, None] = {}
        for o in opens:
            s = frozenset(o)
            if not s <= self.points:
                raise TopologyError(f"open set {subset_id(s)} contains unknown points")
            uniq[s] = None
        self.opens: tuple[frozenset, ...] = tuple(sorted(uniq, key=lambda s: (len(s), sorted(map(str, s)))))
        self._validate()

    def _validate(self) -> None:
        opens = set(self.opens)
        if frozenset() not in opens:
            raise TopologyError("empty set is not open")
        if self.points not in opens:
            raise TopologyError("whole space is not open")
        n = len(self.opens)
        if n * n > MAX_SUBSET_CHECKS:
            raise TopologyTooLarge(f"{n} open sets exceeds the {MAX_SUBSET_CHECKS} check limit")
        # pairwise closure implies closure under every finite union and
        # intersection by induction, and finite families are all there is
        for a in self.opens:
            for b in self.opens:
                if a & b not in opens:
                    raise TopologyError(f"{subset_id(a)} ∩ {subset_id(b)} is not open")
                if self.require_unions and a | b not in opens:
                    raise TopologyError(f"{subset_id(a)} ∪ {subset_id(b)} is not open")

    def to_json(self) -> dict:
        out = {
            "points": sorted(self.points, key=str),
            "opens": [sorted(o, key=str) for o in self.opens],
        }
        if not self.require_unions:
            out["require_unions"] = False
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "FiniteTopology":
        return cls(data["points"], data["opens"], data.get("require_unions", True))


def alexandroff_topology(p: Poset) -> FiniteTopology:
    return FiniteTopology(p.elements, alexandroff_opens(p))


def open_set_poset(t: FiniteTopology, reverse: bool = False) -> SubsetPoset:
    """Open(X) ordered by inclusion; ``reverse=True`` gives Open(X)^op."""
    return SubsetPoset(t.opens, reverse=reverse)


def intersection_lattice(closed_subsets: Iterable[Iterable]) -> SubsetPoset:
    """All intersections and unions generated by the inputs, ordered by ⊆."""
    gens = [frozenset(s) for s in closed_subsets]
    if not gens:
        raise EmptyInput("intersection_lattice needs at least one subset")
    found = set(gens)
    found.add(frozenset().union(*gens))
    frontier = True
    while frontier:
        frontier = False
        current = list(found)
        for a, b in combinations(current, 2):
            for c in (a & b, a | b):
                if c not in found:
                    found.add(c)
                    frontier = True
    return SubsetPoset(found)
