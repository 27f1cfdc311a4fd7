"""Moving sheaves along order-preserving maps, and reassembling a sheaf
from a dual sheaf of sheaves."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

from . import linalg
from .errors import (
    BaseMismatch,
    FiberSectionSpaceEmpty,
    InconsistentQuotient,
    NotOrderPreserving,
    PushforwardUndefined,
    SingularMatrix,
)
from .linalg import RATIONAL, Matrix
from .poset import OrderMap, Poset, check_order_preserving, dual_poset
from .sheaf import (
    DUAL,
    SHEAF,
    Assignment,
    Morphism,
    SetStalk,
    Sheaf,
    SheafMap,
    Table,
    VecStalk,
    apply_map,
    compose_maps,
    find_sections,
    section_space,
    sheaf_from_working,
)


def _require_monotone(f: OrderMap) -> None:
    rep = check_order_preserving(f)
    if not rep.ok:
        raise NotOrderPreserving(f"order map breaks {rep.violations[:3]}")


def _kind(s: Sheaf) -> str:
    return SHEAF if s.orientation == SHEAF else DUAL


# pullback ------------------------------------------------------------------

def pullback(s: Sheaf, f: OrderMap) -> tuple[Sheaf, Morphism]:
    """Reindex ``s`` (on Y) along ``f: X -> Y``; every related pair gets
    ``s``'s map on the image pair, so repeated pullbacks compare exactly."""
    if f.target != s.base:
        raise BaseMismatch("order map does not land in the sheaf's base")
    _require_monotone(f)
    x = f.source
    stalks = {a: s.stalk(f(a)) for a in x}
    maps = {}
    for lo, hi in x.relations():
        maps[(lo, hi)] = s.restriction(f(lo), f(hi))
    out = Sheaf(x, stalks, maps, s.orientation)
    comps = {a: _identity(s.stalk(f(a))) for a in x}
    return out, Morphism(_kind(s), s, out, f, comps)


def _identity(st) -> SheafMap:
    from .sheaf import identity_map

    return identity_map(st)


# pushforward ----------------------------------------------------------------

@dataclass
class _Piece:
    """Section data over one preimage set."""

    elements: tuple[str, ...]
    space: object  # SectionSpace (vector) or list of Assignment (finite)


def _preimages(s: Sheaf, f: OrderMap, preimage: str) -> dict[str, tuple[str, ...]]:
    wy = f.target if s.orientation == SHEAF else dual_poset(f.target)
    out = {}
    for c in f.target:
        if preimage == "star":
            up = wy.up(c)
            out[c] = tuple(a for a in f.source if f(a) in up)
        elif preimage == "fiber":
            out[c] = tuple(f.fiber(c))
        else:
            raise ValueError(f"preimage must be 'star' or 'fiber', not {preimage!r}")
    return out


def pushforward(
    s: Sheaf, f: OrderMap, variant: str | None = None, preimage: str = "star"
) -> tuple[Sheaf, Morphism]:
    """Stalk at ``c`` = sections of ``s`` over a preimage of ``c``.

    ``preimage="star"`` (default) uses ``f^-1`` of the working up-set of
    ``c``.  These sets shrink along the order, so the induced maps are plain
    restriction of sections, and pushforward is strictly functorial.
    ``preimage="fiber"`` uses the bare fiber ``f^-1(c)``; its maps are
    found by propagating a section into the next fiber and solving for the
    unique section there, raising PushforwardUndefined when none or many
    exist.

    Returns the pushed sheaf and the canonical morphism ``f_* s -> s``.
    """
    if variant is not None and variant != s.orientation:
        raise BaseMismatch(f"{variant} pushforward requested for a {s.orientation}")
    if f.source != s.base:
        raise BaseMismatch("order map does not start at the sheaf's base")
    _require_monotone(f)
    pre = _preimages(s, f, preimage)
    wy = f.target if s.orientation == SHEAF else dual_poset(f.target)
    finite = any(isinstance(st, SetStalk) for st in s.stalks.values())
    if finite:
        return _push_finite(s, f, pre, wy, preimage)
    return _push_linear(s, f, pre, wy, preimage)


def _push_linear(s, f, pre, wy, preimage):
    spaces = {c: section_space(s, pre[c], orthonormal=True) for c in f.target}
    fld = linalg.promote(*(sp.field for sp in spaces.values()))
    stalks = {c: VecStalk(sp.dim, fld) for c, sp in spaces.items()}
    wmaps = {}
    for c, d in wy.covers:
        a, b = spaces[c], spaces[d]
        if preimage == "star":
            rows = [i for x in b.elements for i in range(a.offsets[x], a.offsets[x] + a.dims[x])]
            target = a.basis.submatrix(rows) if rows else Matrix.zeros(0, a.dim, a.field)
            wmaps[(c, d)] = _coords(b, target, fld)
        else:
            wmaps[(c, d)] = _fiber_map(s, a, b, fld, c, d)
    out = sheaf_from_working(f.target, stalks, wmaps, s.orientation)
    comps = {x: spaces[f(x)].component(x).to_field(linalg.promote(fld, s.stalks[x].field)) for x in s.base}
    return out, Morphism(_kind(s), out, s, f, comps)


def _coords(space, vectors: Matrix, fld: str) -> Matrix:
    """Coordinates of columns of ``vectors`` in ``space``'s basis."""
    if space.dim == 0:
        return Matrix.zeros(0, vectors.cols, fld)
    if space.field == RATIONAL:
        return linalg.solve_matrix(space.basis, vectors).to_field(fld)
    return (space.basis.H @ vectors.to_field(space.field)).to_field(fld)


def _fiber_map(s, a, b, fld, c, d) -> Matrix:
    """Unique-extension map from sections over fiber ``c`` to fiber ``d``."""
    rows, blocks = [], []
    for y in b.elements:
        src = [x for x in a.elements if s.work.leq(x, y)]
        if not src:
            continue
        x = src[0]
        rows.extend(range(b.offsets[y], b.offsets[y] + b.dims[y]))
        blocks.append(s.map(x, y) @ a.component(x))
    if b.dim == 0:
        return Matrix.zeros(0, a.dim, fld)
    if not blocks:
        raise PushforwardUndefined(f"fiber over {d} is not reached from fiber over {c}")
    target = blocks[0]
    for blk in blocks[1:]:
        target = target.vstack(blk)
    sub = b.basis.submatrix(rows)
    if linalg.rank(sub) != b.dim:
        raise PushforwardUndefined(f"sections over fiber {d} are not determined by fiber {c}")
    try:
        return linalg.solve_matrix(sub, target).to_field(fld)
    except SingularMatrix:
        raise PushforwardUndefined(f"sections over fiber {c} do not extend to fiber {d}") from None


def _push_finite(s, f, pre, wy, preimage):
    secs = {}
    for c in f.target:
        found = find_sections(s, "enumerate", pre[c]).assignments if pre[c] else [Assignment({})]
        if not found:
            warnings.warn(FiberSectionSpaceEmpty(f"no sections over the preimage of {c!r}"), stacklevel=3)
        secs[c] = found

    def label(c, a: Assignment):
        return tuple(a.values[x] for x in pre[c])

    stalks = {c: SetStalk(tuple(label(c, a) for a in secs[c])) for c in f.target}
    wmaps = {}
    for c, d in wy.covers:
        pairs = []
        for a in secs[c]:
            if preimage == "star":
                img = {x: a.values[x] for x in pre[d]}
                match = [b for b in secs[d] if b.values == img]
            else:
                known = {}
                for y in pre[d]:
                    src = [x for x in pre[c] if s.work.leq(x, y)]
                    if src:
                        known[y] = apply_map(s.map(src[0], y), a.values[src[0]])
                match = [b for b in secs[d] if all(b.values[y] == v for y, v in known.items())]
            if len(match) != 1:
                raise PushforwardUndefined(f"section over {c} does not determine one over {d}")
            pairs.append((label(c, a), label(d, match[0])))
        wmaps[(c, d)] = Table(pairs)
    out = sheaf_from_working(f.target, stalks, wmaps, s.orientation)
    comps = {}
    for x in s.base:
        c = f(x)
        comps[x] = Table((label(c, a), a.values[x]) for a in secs[c])
    return out, Morphism(_kind(s), out, s, f, comps)


# dual sheaves of sheaves -----------------------------------------------------

def compose_morphisms(second: Morphism, first: Morphism) -> Morphism:
    """``second ∘ first`` where ``first: A -> B`` and ``second: B -> C``."""
    if first.target is not second.source and first.target != second.source:
        raise BaseMismatch("morphisms are not composable")
    along = first.along.compose(second.along)
    comps = {x: compose_maps(second.components[x], first.components[second.along(x)]) for x in second.target.base}
    return Morphism(first.kind if first.kind == second.kind else "sheaf", first.source, second.target, along, comps)


class SheafDiagram:
    """A dual sheaf of sheaves: node sheaves on ``base`` and, for each
    related pair ``A <= B``, an extension morphism ``node(B) -> node(A)``.

    Edges are required on covering pairs; longer ones are composed.
    """

    def __init__(self, base: Poset, nodes: Mapping[str, Sheaf], edges: Mapping[tuple[str, str], Morphism]):
        self.base = base
        missing = [a for a in base if a not in nodes]
        if missing:
            raise BaseMismatch(f"no node sheaf for {missing}")
        self.nodes = {a: nodes[a] for a in base}
        for a, n in self.nodes.items():
            if n.orientation != SHEAF:
                raise InconsistentQuotient(f"node {a!r} must be a sheaf")
        self.edges: dict[tuple[str, str], Morphism] = {}
        for (a, b), m in edges.items():
            if not base.lt(a, b):
                raise BaseMismatch(f"edge on unrelated pair {a}|{b}")
            if m.source != self.nodes[b] or m.target != self.nodes[a]:
                raise BaseMismatch(f"edge {a}|{b} must run from node {b} to node {a}")
            self.edges[(a, b)] = m
        for a, b in base.covers:
            if (a, b) not in self.edges:
                raise BaseMismatch(f"no extension morphism on covering pair {a}|{b}")
        for a, b in base.relations():
            self._edge(a, b)

    def _edge(self, a: str, b: str) -> Morphism:
        if (a, b) not in self.edges:
            mid = next(c for c in self.base.upper_covers(a) if self.base.leq(c, b))
            # node(b) -> node(mid) -> node(a)
            self.edges[(a, b)] = compose_morphisms(self.edges[(a, mid)], self._edge(mid, b))
        return self.edges[(a, b)]

    def edge(self, a: str, b: str) -> Morphism:
        return self.edges[(a, b)]


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


@dataclass
class LimitResult:
    sheaf: Sheaf
    projections: dict[str, Morphism]
    classes: dict[str, dict[str, str]]  # class id -> {node: local element}


def limit_sheaf(d: SheafDiagram) -> LimitResult:
    """Glue the node posets along the edge order maps and take, at each
    glued element, the sections of the fiber dual sheaf across nodes."""
    items = [(a, x) for a in d.base for x in d.nodes[a].base]
    uf = _UnionFind(items)
    for (a, b), m in d.edges.items():
        for x in d.nodes[a].base:
            uf.union((a, x), (b, m.along(x)))
    groups: dict = {}
    for it in items:
        groups.setdefault(uf.find(it), []).append(it)
    local_names: dict[str, int] = {}
    for _, x in items:
        local_names[x] = 0
    for members in groups.values():
        for name in {x for _, x in members}:
            local_names[name] += 1
    classes: dict[str, dict[str, str]] = {}
    cls_of: dict = {}
    for members in groups.values():
        per_node: dict[str, str] = {}
        for a, x in members:
            if a in per_node and per_node[a] != x:
                raise InconsistentQuotient(f"elements {per_node[a]!r} and {x!r} of node {a!r} are identified")
            per_node[a] = x
        names = sorted({x for _, x in members})
        if len(names) == 1 and local_names[names[0]] == 1:
            cid = names[0]
        else:
            first = min(per_node)
            cid = f"{first}:{per_node[first]}"
        classes[cid] = dict(sorted(per_node.items()))
        for it in members:
            cls_of[it] = cid
    kinds = {isinstance(st, SetStalk) for n in d.nodes.values() for st in n.stalks.values()}
    if len(kinds) > 1:
        raise InconsistentQuotient("diagram mixes finite-set and vector stalks")
    finite = kinds == {True}

    pairs = set()
    for a, n in d.nodes.items():
        for x, y in n.base.covers:
            cx, cy = cls_of[(a, x)], cls_of[(a, y)]
            if cx == cy:
                raise InconsistentQuotient(f"identification collapses {x!r} <= {y!r} in node {a!r}")
            pairs.add((cx, cy))
    try:
        glued = Poset(classes, pairs)
    except Exception as err:  # cycles from conflicting identifications
        raise InconsistentQuotient(f"glued order is not a partial order: {err}") from None

    fibers = {c: _fiber_dual(d, members) for c, members in classes.items()}
    if finite:
        data = {c: (find_sections(fs, "enumerate").assignments if fs else []) for c, fs in fibers.items()}
        stalks = {c: SetStalk(tuple(_flat(a) for a in data[c])) for c in classes}
    else:
        data = {c: section_space(fs, orthonormal=True) for c, fs in fibers.items()}
        fld = linalg.promote(*(sp.field for sp in data.values()))
        stalks = {c: VecStalk(sp.dim, fld) for c, sp in data.items()}

    wmaps = {}
    for cx, cy in glued.covers:
        wmaps[(cx, cy)] = _limit_restriction(d, classes, cx, cy, data, finite)
    s = Sheaf(glued, stalks, wmaps, SHEAF)

    projections = {}
    for a, n in d.nodes.items():
        along = OrderMap(n.base, glued, {x: cls_of[(a, x)] for x in n.base})
        comps = {}
        for x in n.base:
            c = cls_of[(a, x)]
            if finite:
                comps[x] = Table((_flat(sec), sec.values[a]) for sec in data[c])
            else:
                comps[x] = data[c].component(a).to_field(linalg.promote(data[c].field, n.stalks[x].field))
        projections[a] = Morphism(SHEAF, s, n, along, comps)
    return LimitResult(s, projections, classes)


def _flat(a: Assignment) -> tuple:
    return tuple(a.values[k] for k in sorted(a.values))


def _fiber_dual(d: SheafDiagram, members: Mapping[str, str]) -> Sheaf | None:
    nodes = sorted(members)
    sub = d.base.subposet(nodes)
    stalks = {a: d.nodes[a].stalk(members[a]) for a in nodes}
    maps = {}
    for a, b in sub.relations():
        maps[(a, b)] = d.edge(a, b).components[members[a]]
    return Sheaf(sub, stalks, maps, DUAL)


def _limit_restriction(d, classes, cx, cy, data, finite) -> SheafMap:
    """Push each fiber section at ``cx`` through node restrictions and
    find the unique fiber section at ``cy`` that it determines."""
    mx, my = classes[cx], classes[cy]
    shared = [a for a in my if a in mx and d.nodes[a].base.leq(mx[a], my[a])]
    if finite:
        pairs = []
        for sec in data[cx]:
            known = {a: apply_map(d.nodes[a].map(mx[a], my[a]), sec.values[a]) for a in shared}
            match = [t for t in data[cy] if all(t.values[a] == v for a, v in known.items())]
            if len(match) != 1:
                raise InconsistentQuotient(f"restriction {cx}->{cy} is not determined")
            pairs.append((_flat(sec), _flat(match[0])))
        return Table(pairs)
    a_sp, b_sp = data[cx], data[cy]
    fld = linalg.promote(a_sp.field, b_sp.field)
    if b_sp.dim == 0:
        return Matrix.zeros(0, a_sp.dim, fld)
    rows, blocks = [], []
    for a in shared:
        rows.extend(range(b_sp.offsets[a], b_sp.offsets[a] + b_sp.dims[a]))
        blocks.append(d.nodes[a].map(mx[a], my[a]) @ a_sp.component(a))
    if not blocks:
        raise InconsistentQuotient(f"restriction {cx}->{cy} is not determined")
    target = blocks[0]
    for blk in blocks[1:]:
        target = target.vstack(blk)
    sub = b_sp.basis.submatrix(rows)
    if linalg.rank(sub) != b_sp.dim:
        raise InconsistentQuotient(f"restriction {cx}->{cy} is not determined")
    try:
        return linalg.solve_matrix(sub, target.to_field(fld)).to_field(fld)
    except SingularMatrix:
        raise InconsistentQuotient(f"restriction {cx}->{cy} leaves the fiber sections") from None


def diagram_global_sections(d: SheafDiagram) -> Sheaf:
    """The dual sheaf on ``d.base`` of global-section spaces of the nodes,
    with extensions induced by the edge morphisms (vector nodes only)."""
    spaces = {a: section_space(n, orthonormal=True) for a, n in d.nodes.items()}
    fld = linalg.promote(*(sp.field for sp in spaces.values()))
    stalks = {a: VecStalk(sp.dim, fld) for a, sp in spaces.items()}
    maps = {}
    for a, b in d.base.covers:
        m = d.edge(a, b)
        sa, sb = spaces[a], spaces[b]
        blocks = []
        for x in sa.elements:
            blocks.append(m.components[x] @ sb.component(m.along(x)))
        if sa.dim == 0 or not blocks:
            maps[(a, b)] = Matrix.zeros(sa.dim, sb.dim, fld)
            continue
        img = blocks[0]
        for blk in blocks[1:]:
            img = img.vstack(blk)
        maps[(a, b)] = _coords(sa, img.to_field(linalg.promote(img.field, sa.field)), fld)
    return Sheaf(d.base, stalks, maps, DUAL)
