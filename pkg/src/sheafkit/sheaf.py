"""Sheaves and dual sheaves on finite posets.

A dual sheaf is stored as a sheaf on the dual poset.  Every sheaf keeps
its user-facing ``base`` poset plus a ``work`` poset (``base`` itself, or
its dual) in which all maps point upward; maps are keyed by working-order
pairs ``(x, y)`` with ``x <= y`` and send ``stalk(x)`` to ``stalk(y)``.
Section, validation and cohomology code only ever looks at ``work``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import linalg
from .errors import (
    ArityMismatch,
    BaseMismatch,
    DivideByZero,
    DomainError,
    MissingMap,
    MissingStalk,
    ModeUnsupported,
    NotASection,
    NotOrderPreserving,
    PartialTable,
    ShapeMismatch,
    TopologyTooLarge,
    UnknownElement,
    ValueOutsideStalk,
)
from .expr import (
    Binary,
    Const,
    ExprMap,
    PROBE_COUNT,
    Var,
    eval_node,
    evaluate,
    partial,
    probe_points,
    seed_from_env,
)
from .linalg import COMPLEX, RATIONAL, REAL, Matrix
from .poset import FiniteTopology, OrderMap, Poset, check_order_preserving, dual_poset, subset_id

SHEAF, DUAL = "sheaf", "dual"
VALIDATION_TOL = 1e-9
RESIDUAL_TOL = 1e-6


# stalks --------------------------------------------------------------------

@dataclass(frozen=True)
class SetStalk:
    """A finite set of hashable labels."""

    labels: tuple

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in finite stalk")

    def __contains__(self, v) -> bool:
        return v in set(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Constraint:
    """Membership test cutting a subset out of a vector stalk.

    ``expr`` gives a residual map that must vanish; ``matrix``/``offset``
    give the affine condition ``A v = b``.
    """

    expr: ExprMap | None = None
    matrix: Matrix | None = None
    offset: tuple = ()

    def residual_vector(self, v: Sequence) -> tuple:
        if self.expr is not None:
            return evaluate(self.expr, v)
        got = self.matrix.apply(v)
        return tuple(a - b for a, b in zip(got, self.offset))

    def residual(self, v: Sequence) -> float:
        return linalg.vector_norm(self.residual_vector(v))

    def jacobian(self, v: Sequence) -> np.ndarray:
        if self.expr is not None:
            env = dict(zip(self.expr.inputs, (float(x) for x in v)))
            return np.array(
                [[float(eval_node(partial(o, name), env)) for name in self.expr.inputs] for o in self.expr.outputs],
                dtype=float,
            ).reshape(len(self.expr.outputs), len(self.expr.inputs))
        return self.matrix.to_numpy()

    @property
    def homogeneous_linear(self) -> bool:
        return self.matrix is not None and all(b == 0 for b in self.offset)


@dataclass(frozen=True)
class VecStalk:
    """The vector space field^dim, optionally cut down by a constraint.

    ``embedding`` (ambient x dim) records how the stalk sits inside a larger
    coordinate space when it was built as a subspace; it does not affect
    section computations.
    """

    dim: int
    field: str = RATIONAL
    embedding: Matrix | None = None
    constraint: Constraint | None = None

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("stalk dimension must be non-negative")
        if self.field not in linalg.FIELDS:
            raise ValueError(f"unknown field {self.field!r}")
        if self.embedding is not None and self.embedding.cols != self.dim:
            raise ShapeMismatch("embedding must have one column per stalk coordinate")

    @property
    def linear(self) -> bool:
        return self.constraint is None or self.constraint.homogeneous_linear


Stalk = Union[SetStalk, VecStalk]


# maps ----------------------------------------------------------------------

class Table:
    """Total function between finite label sets."""

    __slots__ = ("pairs", "_lookup")

    def __init__(self, pairs: Iterable[tuple]):
        self.pairs = tuple((a, b) for a, b in pairs)
        self._lookup = dict(self.pairs)
        if len(self._lookup) != len(self.pairs):
            raise ValueError("table lists a source label twice")

    def __getitem__(self, v):
        return self._lookup[v]

    def __contains__(self, v) -> bool:
        return v in self._lookup

    def keys(self):
        return self._lookup.keys()

    def __eq__(self, other) -> bool:
        return isinstance(other, Table) and self._lookup == other._lookup

    def __hash__(self) -> int:
        return hash(frozenset(self._lookup.items()))

    def __repr__(self) -> str:
        return f"Table({dict(self.pairs)!r})"


SheafMap = Union[Table, Matrix, ExprMap]


def identity_map(stalk: Stalk) -> SheafMap:
    if isinstance(stalk, SetStalk):
        return Table((v, v) for v in stalk.labels)
    return Matrix.identity(stalk.dim, stalk.field)


def apply_map(m: SheafMap, value):
    if isinstance(m, Table):
        return m[value]
    if isinstance(m, Matrix):
        return m.apply(value)
    return tuple(m(value))


def matrix_as_expr(m: Matrix) -> ExprMap:
    if m.field == COMPLEX:
        raise ModeUnsupported("complex matrices cannot be mixed with expression maps")
    names = tuple(f"x{i}" for i in range(m.cols))
    outs = []
    for row in m.data:
        term = None
        for c, name in zip(row, names):
            if c == 0:
                continue
            piece = Var(name) if c == 1 else Binary("*", Const(c), Var(name))
            term = piece if term is None else Binary("+", term, piece)
        outs.append(term if term is not None else Const(Fraction(0)))
    return ExprMap(names, tuple(outs))


def compose_maps(g: SheafMap, f: SheafMap) -> SheafMap:
    """``g ∘ f``."""
    if isinstance(g, Table) and isinstance(f, Table):
        return Table((k, g[v]) for k, v in f.pairs)
    if isinstance(g, Matrix) and isinstance(f, Matrix):
        return g @ f
    if isinstance(g, Table) or isinstance(f, Table):
        raise ModeUnsupported("cannot compose table maps with vector maps")
    gx = matrix_as_expr(g) if isinstance(g, Matrix) else g
    fx = matrix_as_expr(f) if isinstance(f, Matrix) else f
    return gx.compose(fx)


def map_kind(m: SheafMap) -> str:
    return "table" if isinstance(m, Table) else "matrix" if isinstance(m, Matrix) else "expr"


def check_map(m: SheafMap, src: Stalk, dst: Stalk, where: str) -> None:
    """Raise if ``m`` cannot act from ``src`` to ``dst``."""
    if isinstance(m, Table):
        if not (isinstance(src, SetStalk) and isinstance(dst, SetStalk)):
            raise ShapeMismatch(f"{where}: table map between non-finite stalks")
        missing = [v for v in src.labels if v not in m]
        if missing:
            raise PartialTable(f"{where}: table undefined on labels {missing}")
        extra = [k for k in m.keys() if k not in src]
        if extra:
            raise ValueOutsideStalk(f"{where}: table mentions unknown source labels {extra}")
        bad = [v for _, v in m.pairs if v not in dst]
        if bad:
            raise ValueOutsideStalk(f"{where}: table values {bad} outside target stalk")
        return
    if not (isinstance(src, VecStalk) and isinstance(dst, VecStalk)):
        raise ShapeMismatch(f"{where}: {map_kind(m)} map needs vector stalks")
    if isinstance(m, Matrix):
        if m.shape != (dst.dim, src.dim):
            raise ShapeMismatch(f"{where}: matrix is {m.rows}x{m.cols}, expected {dst.dim}x{src.dim}")
        return
    if m.arity != (src.dim, dst.dim):
        raise ShapeMismatch(f"{where}: expression has arity {m.arity}, expected {(src.dim, dst.dim)}")


# the sheaf -------------------------------------------------------------------

class Sheaf:
    """Stalks and maps on a poset, populated on every related pair.

    ``maps`` passed to the constructor are keyed by ``(lo, hi)`` pairs of the
    base order.  For a sheaf the map sends ``stalk(lo)`` to ``stalk(hi)``; for a
    dual sheaf it is the extension from ``stalk(hi)`` to ``stalk(lo)``.  At
    least every covering pair needs a map; the rest are composed along a
    cover path (lexicographically first) and recorded in ``paths``.
    """

    def __init__(
        self,
        base: Poset,
        stalks: Mapping[str, Stalk],
        maps: Mapping[tuple[str, str], SheafMap],
        orientation: str = SHEAF,
    ):
        if orientation not in (SHEAF, DUAL):
            raise ValueError(f"orientation must be 'sheaf' or 'dual', not {orientation!r}")
        self.base = base
        self.orientation = orientation
        self.work = base if orientation == SHEAF else dual_poset(base)
        missing = [x for x in base.elements if x not in stalks]
        if missing:
            raise MissingStalk(f"no stalk for elements {missing}")
        extra = [x for x in stalks if x not in base]
        if extra:
            raise UnknownElement(f"stalks given for unknown elements {sorted(extra)}")
        self.stalks: dict[str, Stalk] = {x: stalks[x] for x in base.elements}

        given: dict[tuple[str, str], SheafMap] = {}
        for (lo, hi), m in maps.items():
            if lo == hi:
                continue
            if not base.leq(lo, hi):
                raise UnknownElement(f"map given on unrelated pair {lo}|{hi}")
            key = (lo, hi) if orientation == SHEAF else (hi, lo)
            check_map(m, self.stalks[key[0]], self.stalks[key[1]], f"maps.{lo}|{hi}")
            given[key] = m
        for lo, hi in self.work.covers:
            if (lo, hi) not in given:
                pair = f"{lo}|{hi}" if orientation == SHEAF else f"{hi}|{lo}"
                raise MissingMap(f"no map on covering pair {pair}")
        self.given = given
        self.maps: dict[tuple[str, str], SheafMap] = dict(given)
        self.paths: dict[tuple[str, str], tuple[str, ...]] = {}
        for x, y in self.work.relations():
            self._synth(x, y)

    def _synth(self, x: str, y: str) -> SheafMap:
        if (x, y) in self.maps:
            return self.maps[(x, y)]
        nxt = next(c for c in self.work.upper_covers(x) if self.work.leq(c, y))
        rest = self._synth(nxt, y)
        m = compose_maps(rest, self.maps[(x, nxt)])
        self.maps[(x, y)] = m
        self.paths[(x, y)] = (x,) + self.paths.get((nxt, y), (nxt, y))
        return m

    # access ------------------------------------------------------------
    def stalk(self, x: str) -> Stalk:
        try:
            return self.stalks[x]
        except KeyError:
            raise UnknownElement(f"unknown element {x!r}") from None

    def map(self, x: str, y: str) -> SheafMap:
        """Working-order map stalk(x) -> stalk(y) for x <= y (identity if equal)."""
        if x == y:
            return identity_map(self.stalk(x))
        try:
            return self.maps[(x, y)]
        except KeyError:
            raise UnknownElement(f"{x!r} is not below {y!r} in the working order") from None

    def restriction(self, lo: str, hi: str) -> SheafMap:
        """The map attached to ``lo <= hi`` in the base order, in its natural direction."""
        return self.map(lo, hi) if self.orientation == SHEAF else self.map(hi, lo)

    def path(self, x: str, y: str) -> tuple[str, ...]:
        return self.paths.get((x, y), (x, y))

    @property
    def is_linear(self) -> bool:
        return all(isinstance(s, VecStalk) and s.constraint is None for s in self.stalks.values()) and all(
            isinstance(m, Matrix) for m in self.maps.values()
        )

    @property
    def field(self) -> str:
        fields = [s.field for s in self.stalks.values() if isinstance(s, VecStalk)]
        fields += [m.field for m in self.maps.values() if isinstance(m, Matrix)]
        if any(isinstance(m, ExprMap) for m in self.maps.values()):
            fields.append(REAL)
        return linalg.promote(*fields) if fields else RATIONAL

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sheaf):
            return NotImplemented
        return (
            self.orientation == other.orientation
            and self.base == other.base
            and self.stalks == other.stalks
            and self.maps == other.maps
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Sheaf({self.orientation}, {len(self.base)} elements)"

    def restrict(self, subset: Iterable[str]) -> "Sheaf":
        """The sheaf on the induced subposet (working maps carried over)."""
        sub = self.base.subposet(subset)
        maps = {}
        for lo, hi in sub.relations():
            maps[(lo, hi)] = self.restriction(lo, hi)
        return Sheaf(sub, {x: self.stalks[x] for x in sub}, maps, self.orientation)

    def with_maps(self, maps: Mapping[tuple[str, str], SheafMap], stalks: Mapping[str, Stalk] | None = None) -> "Sheaf":
        """Same base and orientation, new working-order maps (and stalks)."""
        base_maps = {((x, y) if self.orientation == SHEAF else (y, x)): m for (x, y), m in maps.items()}
        return Sheaf(self.base, stalks or self.stalks, base_maps, self.orientation)


def build_sheaf(base: Poset, stalks, maps, orientation: str = SHEAF) -> Sheaf:
    return Sheaf(base, stalks, maps, orientation)


# assignments and sections ----------------------------------------------------

@dataclass
class Assignment:
    values: dict

    @property
    def support(self) -> frozenset:
        return frozenset(self.values)

    def __getitem__(self, x):
        return self.values[x]


def check_value(stalk: Stalk, v, where: str = "") -> None:
    if isinstance(stalk, SetStalk):
        if v not in stalk:
            raise ValueOutsideStalk(f"{where}: {v!r} is not a label of the stalk")
        return
    if not isinstance(v, tuple) or len(v) != stalk.dim:
        raise ValueOutsideStalk(f"{where}: expected a {stalk.dim}-vector, got {v!r}")
    for c in v:
        if isinstance(c, bool) or not isinstance(c, (int, Fraction, float, complex)):
            raise ValueOutsideStalk(f"{where}: non-numeric coordinate {c!r}")
        if isinstance(c, complex) and stalk.field != COMPLEX:
            raise ValueOutsideStalk(f"{where}: complex coordinate in a {stalk.field} stalk")


def _distance(stalk: Stalk, a, b) -> float:
    if isinstance(stalk, SetStalk):
        return 0.0 if a == b else 1.0
    sq = sum((abs(x - y) ** 2 for x, y in zip(a, b)), Fraction(0))
    return float(math.sqrt(sq)) if sq else 0.0


def _all_exact(values: Iterable) -> bool:
    for v in values:
        if isinstance(v, tuple) and any(isinstance(c, (float, complex)) for c in v):
            return False
    return True


def section_residual(s: Sheaf, a: Assignment) -> float:
    """Largest violation of the section law over related pairs in the support."""
    for x, v in a.values.items():
        check_value(s.stalk(x), v, x)
    support = sorted(a.values)
    worst = 0.0
    for x in support:
        st = s.stalks[x]
        if isinstance(st, VecStalk) and st.constraint is not None:
            worst = max(worst, st.constraint.residual(a.values[x]))
        for y in sorted(s.work.up(x) & a.support):
            if y == x:
                continue
            try:
                img = apply_map(s.maps[(x, y)], a.values[x])
            except (DivideByZero, DomainError):
                return math.inf
            worst = max(worst, _distance(s.stalks[y], img, a.values[y]))
    return worst


def is_section(s: Sheaf, a: Assignment, tol: float | None = None) -> tuple[bool, float]:
    """Section test; exact assignments on exact data need zero residual."""
    r = section_residual(s, a)
    if tol is None:
        tol = 0.0 if _all_exact(a.values.values()) and s.field == RATIONAL else RESIDUAL_TOL
    return r <= tol, r


@dataclass
class SectionSpace:
    """Linear section space over a support set, as columns of ``basis``."""

    elements: tuple[str, ...]
    offsets: dict[str, int]
    dims: dict[str, int]
    basis: Matrix
    field: str

    @property
    def dim(self) -> int:
        return self.basis.cols

    @property
    def total(self) -> int:
        return self.basis.rows

    def block(self, x: str, vector: Sequence) -> tuple:
        o = self.offsets[x]
        return tuple(vector[o : o + self.dims[x]])

    def selector(self, x: str) -> Matrix:
        """Matrix picking element ``x``'s coordinates out of the ambient vector."""
        o = self.offsets[x]
        return Matrix.selection(range(o, o + self.dims[x]), self.total, self.field)

    def component(self, x: str) -> Matrix:
        """Map from section coordinates to the value at ``x``."""
        return self.selector(x) @ self.basis if self.total else Matrix.zeros(0, self.dim, self.field)

    def assignments(self) -> list[Assignment]:
        out = []
        for j in range(self.dim):
            col = self.basis.column(j)
            out.append(Assignment({x: self.block(x, col) for x in self.elements}))
        return out

    def coordinates(self, values: Mapping[str, Sequence]) -> tuple:
        vec = []
        for x in self.elements:
            vec.extend(values[x])
        x = linalg.solve(self.basis, vec)
        if x is None:
            raise NotASection("vector is not in the section space")
        return x


def _linear_check(s: Sheaf, support: Sequence[str]) -> None:
    for x in support:
        st = s.stalks[x]
        if not isinstance(st, VecStalk):
            raise ModeUnsupported("linear mode needs vector stalks everywhere on the support")
        if st.constraint is not None and not st.constraint.homogeneous_linear:
            raise ModeUnsupported(f"stalk at {x!r} is not a linear subspace")
    for x in support:
        for y in s.work.up(x):
            if y != x and y in support and not isinstance(s.maps[(x, y)], Matrix):
                raise ModeUnsupported(f"map {x}->{y} is not a matrix; linearize first")


def constraint_matrix(s: Sheaf, support: Sequence[str] | None = None) -> tuple[Matrix, dict, dict]:
    """Stacked section-law rows ``M_xy v_x - v_y = 0`` over all related pairs."""
    elems = sorted(s.base.elements if support is None else set(support))
    _linear_check(s, elems)
    dims = {x: s.stalks[x].dim for x in elems}
    offsets, total = {}, 0
    for x in elems:
        offsets[x] = total
        total += dims[x]
    fld = linalg.promote(
        *[s.stalks[x].field for x in elems],
        *[s.maps[(x, y)].field for x in elems for y in s.work.up(x) if y != x and y in offsets],
    ) if elems else RATIONAL
    blocks, row = [], 0
    for x in elems:
        st = s.stalks[x]
        if st.constraint is not None:
            blocks.append((row, offsets[x], st.constraint.matrix))
            row += st.constraint.matrix.rows
        for y in sorted(s.work.up(x)):
            if y == x or y not in offsets:
                continue
            m = s.maps[(x, y)]
            blocks.append((row, offsets[x], m))
            blocks.append((row, offsets[y], -Matrix.identity(dims[y], fld)))
            row += dims[y]
    return linalg.block_matrix(row, total, blocks, fld), offsets, dims


def section_space(s: Sheaf, support: Iterable[str] | None = None, orthonormal: bool = False) -> SectionSpace:
    """Kernel of the stacked constraints; reduced-echelon basis, or
    orthonormal columns when ``orthonormal`` and the field is floating."""
    c, offsets, dims = constraint_matrix(s, support)
    basis, _ = linalg.kernel_basis(c)
    if orthonormal and c.field != RATIONAL:
        basis = linalg.orthonormalize(basis)
    elems = tuple(sorted(offsets))
    k = Matrix.from_columns(basis, c.cols, c.field) if basis else Matrix.zeros(c.cols, 0, c.field)
    return SectionSpace(elems, offsets, dims, k, c.field)


@dataclass
class SectionResult:
    mode: str
    assignments: list[Assignment]
    residuals: list[float]
    field: str  # "exact" or "approximate"
    complete: bool
    note: str = ""

    @property
    def dim(self) -> int | None:
        return len(self.assignments) if self.mode == "linear" else None


def find_sections(
    s: Sheaf,
    mode: str = "linear",
    support: Iterable[str] | None = None,
    tol: float = RESIDUAL_TOL,
    seed: int | None = None,
    starts: int = 32,
    boxes: Mapping[str, tuple[float, float]] | None = None,
) -> SectionResult:
    elems = sorted(s.base.elements if support is None else set(support))
    for x in elems:
        s.stalk(x)
    if mode == "enumerate":
        return _enumerate(s, elems)
    if mode == "linear":
        sp = section_space(s, elems)
        exact = sp.field == RATIONAL
        return SectionResult(
            "linear", sp.assignments(), [0.0] * sp.dim, "exact" if exact else "approximate", True, "basis"
        )
    if mode == "minimize":
        return _minimize(s, elems, tol, seed_from_env() if seed is None else seed, starts, boxes or {})
    raise ModeUnsupported(f"unknown mode {mode!r}")


def _enumerate(s: Sheaf, elems: list[str]) -> SectionResult:
    for x in elems:
        if not isinstance(s.stalks[x], SetStalk):
            raise ModeUnsupported("enumerate mode needs finite-set stalks on the support")
    order = [x for x in s.work.linear_extension() if x in set(elems)]
    found: list[Assignment] = []
    current: dict = {}

    def extend(i: int) -> None:
        if i == len(order):
            found.append(Assignment(dict(sorted(current.items()))))
            return
        x = order[i]
        for label in s.stalks[x].labels:
            ok = True
            for y, val in current.items():
                if s.work.leq(y, x) and apply_map(s.maps[(y, x)], val) != label:
                    ok = False
                    break
                if s.work.leq(x, y) and apply_map(s.maps[(x, y)], label) != val:
                    ok = False
                    break
            if ok:
                current[x] = label
                extend(i + 1)
                del current[x]

    extend(0)
    return SectionResult("enumerate", found, [0.0] * len(found), "exact", True)


# Gauss-Newton with Levenberg damping ------------------------------------------

class _Residual:
    def __init__(self, s: Sheaf, elems: list[str]):
        self.s = s
        self.elems = elems
        self.offsets, total = {}, 0
        for x in elems:
            st = s.stalks[x]
            if not isinstance(st, VecStalk) or st.field == COMPLEX:
                raise ModeUnsupported("minimize mode needs real vector stalks")
            self.offsets[x] = total
            total += st.dim
        self.n = total
        self.pairs = []
        for x in elems:
            for y in sorted(s.work.up(x)):
                if y != x and y in self.offsets:
                    m = s.maps[(x, y)]
                    if isinstance(m, Table):
                        raise ModeUnsupported("minimize mode cannot use table maps")
                    if isinstance(m, ExprMap):
                        jac = [[partial(o, v) for v in m.inputs] for o in m.outputs]
                        self.pairs.append((x, y, m, jac))
                    else:
                        self.pairs.append((x, y, m.to_numpy().real.astype(float), None))

    def block(self, z, x):
        o = self.offsets[x]
        return z[o : o + self.s.stalks[x].dim]

    def __call__(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rows, jrows = [], []
        for x in self.elems:
            st = self.s.stalks[x]
            if st.constraint is not None:
                v = self.block(z, x)
                r = np.asarray(st.constraint.residual_vector(tuple(v)), dtype=float)
                jac = np.zeros((len(r), self.n))
                o = self.offsets[x]
                jac[:, o : o + st.dim] = st.constraint.jacobian(tuple(v))
                rows.append(r)
                jrows.append(jac)
        for x, y, m, jac_nodes in self.pairs:
            vx = self.block(z, x)
            dy = self.s.stalks[y].dim
            jac = np.zeros((dy, self.n))
            ox, oy = self.offsets[x], self.offsets[y]
            if jac_nodes is None:
                img = m @ vx
                jac[:, ox : ox + len(vx)] = m
            else:
                env = dict(zip(m.inputs, (float(v) for v in vx)))
                img = np.array([float(eval_node(o, env)) for o in m.outputs])
                jac[:, ox : ox + len(vx)] = np.array(
                    [[float(eval_node(d, env)) for d in row] for row in jac_nodes]
                ).reshape(dy, len(vx))
            jac[:, oy : oy + dy] -= np.eye(dy)
            rows.append(img - self.block(z, y))
            jrows.append(jac)
        if not rows:
            return np.zeros(0), np.zeros((0, self.n))
        return np.concatenate(rows), np.vstack(jrows)


def _levenberg(fun: _Residual, z0: np.ndarray, iters: int = 200) -> np.ndarray:
    z = z0.copy()
    lam = 1e-3
    r, j = fun(z)
    cost = float(r @ r)
    for _ in range(iters):
        if cost < 1e-30:
            break
        g = j.T @ r
        a = j.T @ j
        step = np.linalg.solve(a + lam * np.diag(np.diag(a) + 1e-12), -g)
        trial = z + step
        rt, jt = fun(trial)
        ct = float(rt @ rt)
        if np.isfinite(ct) and ct < cost:
            z, r, j, cost = trial, rt, jt, ct
            lam = max(lam / 3, 1e-12)
            if np.linalg.norm(step) < 1e-15 * (1 + np.linalg.norm(z)):
                break
        else:
            lam *= 4
            if lam > 1e12:
                break
    return z


def _minimize(s, elems, tol, seed, starts, boxes) -> SectionResult:
    fun = _Residual(s, elems)
    rng = np.random.default_rng(seed)
    lo = np.full(fun.n, -10.0)
    hi = np.full(fun.n, 10.0)
    for x, (a, b) in boxes.items():
        if x in fun.offsets:
            o = fun.offsets[x]
            lo[o : o + s.stalks[x].dim] = a
            hi[o : o + s.stalks[x].dim] = b
    sols: list[np.ndarray] = []
    resids: list[float] = []
    for _ in range(starts):
        z0 = rng.uniform(lo, hi)
        try:
            z = _levenberg(fun, z0)
            r, _ = fun(z)
        except (DivideByZero, DomainError, np.linalg.LinAlgError, OverflowError):
            continue
        res = float(np.max(np.abs(r))) if r.size else 0.0
        if not np.isfinite(res) or res > tol:
            continue
        if any(np.linalg.norm(z - w) <= 1e-6 * (1 + np.linalg.norm(w)) for w in sols):
            continue
        sols.append(z)
        resids.append(res)
    assigns = [
        Assignment({x: tuple(float(v) for v in fun.block(z, x)) for x in elems}) for z in sols
    ]
    return SectionResult("minimize", assigns, resids, "approximate", False, f"best effort, {starts} starts")


# validation --------------------------------------------------------------------

@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    checked: int = 0
    tol: float = VALIDATION_TOL

    @property
    def probabilistic(self) -> bool:
        return any("probabilistic" in n for n in self.notes)

    def to_json(self) -> dict:
        if not self.ok:
            status = "fail"
        elif self.probabilistic:
            status = f"probabilistic pass ({PROBE_COUNT} probes)"
        else:
            status = "pass"
        return {
            "ok": self.ok,
            "status": status,
            "checked": self.checked,
            "tol": self.tol,
            "notes": list(self.notes),
            "violations": list(self.violations),
        }


def _matrices_agree(a: Matrix, b: Matrix, tol: float) -> bool:
    if a.shape != b.shape:
        return False
    if a.field == RATIONAL and b.field == RATIONAL:
        return a.data == b.data
    return a.allclose(b, tol)


def maps_agree(f: SheafMap, g: SheafMap, src: Stalk, tol: float, seed: int | None = None) -> tuple[bool, bool]:
    """(agree, sampled): Expression comparisons are sampled at probe points."""
    if isinstance(f, Matrix) and isinstance(g, Matrix):
        return _matrices_agree(f, g, tol), False
    if isinstance(f, Table) and isinstance(g, Table):
        return f == g, False
    if isinstance(f, Table) or isinstance(g, Table):
        return False, False
    for p in probe_points(src.dim, seed=seed):
        try:
            a, b = apply_map(f, p), apply_map(g, p)
        except (DivideByZero, DomainError):
            continue
        for u, v in zip(a, b):
            if abs(u - v) > tol * max(1.0, abs(u), abs(v)):
                return False, True
    return True, True


def map_summary(m: SheafMap):
    from .io import map_to_json

    return map_to_json(m)


def validate_commutativity(s: Sheaf, tol: float = VALIDATION_TOL, seed: int | None = None) -> ValidationReport:
    """Check map(x<=z) = map(y<=z) ∘ map(x<=y) on every strict triple."""
    violations, sampled, checked = [], False, 0
    w = s.work
    for x, z in w.relations():
        direct = s.maps[(x, z)]
        for y in sorted(w.up(x) & w.down(z)):
            if y in (x, z):
                continue
            checked += 1
            via = compose_maps(s.maps[(y, z)], s.maps[(x, y)])
            ok, probed = maps_agree(direct, via, s.stalks[x], tol, seed)
            sampled |= probed
            if not ok:
                violations.append(
                    {
                        "pair": [x, z],
                        "chain": [x, y, z],
                        "paths": [list(s.path(x, z)), [x, y, z]],
                        "maps": [map_summary(direct), map_summary(via)],
                    }
                )
    notes = [f"probabilistic pass ({PROBE_COUNT} probes)"] if sampled else []
    if s.orientation == DUAL:
        notes.append("chains are listed in the dual order")
    return ValidationReport(not violations, violations, notes, checked, tol)


# morphisms -------------------------------------------------------------------------

HYBRID = "hybrid"


@dataclass(frozen=True)
class Morphism:
    """Stalkwise maps ``components[x]: source.stalk(f(x)) -> target.stalk(x)``.

    ``kind`` is ``"sheaf"`` (both sheaves), ``"dual"`` (both dual sheaves) or
    ``"hybrid"`` (dual source, sheaf target).  ``along`` maps the target's
    base to the source's base.
    """

    kind: str
    source: Sheaf
    target: Sheaf
    along: OrderMap
    components: Mapping[str, SheafMap]

    def __post_init__(self):
        want = {SHEAF: (SHEAF, SHEAF), DUAL: (DUAL, DUAL), HYBRID: (DUAL, SHEAF)}
        if self.kind not in want:
            raise ValueError(f"unknown morphism kind {self.kind!r}")
        if (self.source.orientation, self.target.orientation) != want[self.kind]:
            raise ArityMismatch(f"{self.kind} morphism between {self.source.orientation} and {self.target.orientation}")
        if self.along.source != self.target.base or self.along.target != self.source.base:
            raise BaseMismatch("order map does not run from the target base to the source base")
        for x in self.target.base:
            if x not in self.components:
                raise ArityMismatch(f"no component at {x!r}")
            try:
                check_map(self.components[x], self.source.stalk(self.along(x)), self.target.stalk(x), f"component {x}")
            except (ShapeMismatch, PartialTable, ValueOutsideStalk) as err:
                raise ArityMismatch(str(err)) from None


def validate_morphism(m: Morphism, tol: float = VALIDATION_TOL, seed: int | None = None) -> ValidationReport:
    rep = check_order_preserving(m.along)
    if not rep.ok:
        raise NotOrderPreserving(f"order map violates {rep.violations[:3]}")
    f = m.along
    src, tgt = m.source, m.target
    violations, sampled, checked = [], False, 0
    for x, y in tgt.work.relations():
        fx, fy = f(x), f(y)
        checked += 1
        if m.kind == HYBRID:
            ext = src.map(fy, fx)  # extension D(f(x) <= f(y)): D(f(y)) -> D(f(x))
            lhs = compose_maps(tgt.map(x, y), compose_maps(m.components[x], ext))
            rhs = m.components[y]
            dom = src.stalk(fy)
        else:
            lhs = compose_maps(tgt.map(x, y), m.components[x])
            rhs = compose_maps(m.components[y], src.map(fx, fy))
            dom = src.stalk(fx)
        ok, probed = maps_agree(lhs, rhs, dom, tol, seed)
        sampled |= probed
        if not ok:
            violations.append({"pair": [x, y], "image": [fx, fy], "maps": [map_summary(lhs), map_summary(rhs)]})
    notes = [f"probabilistic pass ({PROBE_COUNT} probes)"] if sampled else []
    return ValidationReport(not violations, violations, notes, checked, tol)


def push_section(m: Morphism, section: Assignment, tol: float | None = None) -> Assignment:
    """Image of a section of ``m.source`` under the induced map."""
    ok, r = is_section(m.source, section, tol)
    if not ok:
        raise NotASection(f"input is not a section (residual {r:.3g})")
    out = {}
    for x in m.target.base:
        fx = m.along(x)
        if fx in section.values:
            out[x] = apply_map(m.components[x], section.values[fx])
    return Assignment(out)


def identity_morphism(s: Sheaf) -> Morphism:
    from .poset import identity_map as id_order

    kind = SHEAF if s.orientation == SHEAF else DUAL
    return Morphism(kind, s, s, id_order(s.base), {x: identity_map(s.stalk(x)) for x in s.base})


# gluing --------------------------------------------------------------------------

@dataclass
class GluingReport:
    ok: bool
    failures: list = field(default_factory=list)
    checked: int = 0

    def to_json(self) -> dict:
        return {"ok": self.ok, "checked": self.checked, "failures": list(self.failures)}


def _families(members: list[str], sets: Mapping[str, frozenset], target: frozenset):
    n = len(members)
    for mask in range(1 << n):
        fam = [members[i] for i in range(n) if mask >> i & 1]
        union = frozenset().union(*(sets[v] for v in fam)) if fam else frozenset()
        if union == target:
            yield fam


def check_gluing(s: Sheaf, t: FiniteTopology, tol: float = VALIDATION_TOL) -> GluingReport:
    """Compare stalk(U) with sections over every cover of U by opens.

    The base must consist of the opens of ``t`` (named by ``subset_id``)
    with maps running from larger to smaller opens, i.e. a sheaf on
    Open(X)^op or a dual sheaf on Open(X).  The empty family covers the
    empty set, so the stalk there must be trivial.
    """
    sets = {subset_id(o): o for o in t.opens}
    if set(sets) != set(s.base.elements):
        raise BaseMismatch("base elements are not the open sets of the topology")
    for a, sa in sets.items():
        for b, sb in sets.items():
            if a != b and sb < sa and not s.work.leq(a, b):
                raise BaseMismatch(f"no restriction from {a} to {b}")
    failures, checked = [], 0
    order = sorted(sets, key=lambda k: (len(sets[k]), k))
    for u in order:
        inside = [v for v in order if sets[v] <= sets[u]]
        if 2 ** len(inside) > 2**16:
            raise TopologyTooLarge(f"too many candidate covers of {u}")
        for fam in _families(inside, sets, sets[u]):
            checked += 1
            if u in fam:
                continue
            overlaps = {subset_id(sets[v] & sets[w]) for v in fam for w in fam}
            res = _compare_cover(s, u, fam, sorted(set(fam) | overlaps), tol)
            if res is not None:
                failures.append(res)
    return GluingReport(not failures, failures, checked)


def _compare_cover(s: Sheaf, u: str, fam: list[str], support: list[str], tol: float):
    """Sections over ``support`` (the cover plus pairwise overlaps) are the
    families on the cover that agree on overlaps."""
    st = s.stalks[u]
    if isinstance(st, SetStalk):
        secs = _enumerate(s, support).assignments if fam else [Assignment({})]
        images = [
            Assignment({v: apply_map(s.map(u, v), label) for v in support}) for label in st.labels
        ]
        keys = [tuple(sorted(a.values.items())) for a in images]
        sec_keys = {tuple(sorted(a.values.items())) for a in secs}
        bij = len(set(keys)) == len(keys) and set(keys) == sec_keys
        if bij:
            return None
        return {"open": u, "cover": fam, "stalk_size": st.size, "sections": len(secs)}
    sp = section_space(s, support) if fam else None
    sec_dim = sp.dim if sp else 0
    if fam:
        comp = None
        for v in sp.elements:
            block = s.map(u, v)
            if not isinstance(block, Matrix):
                raise ModeUnsupported("gluing checks need linear maps")
            comp = block if comp is None else comp.vstack(block)
        rk = linalg.rank(comp)
    else:
        rk = 0
    if rk == st.dim == sec_dim:
        return None
    return {"open": u, "cover": fam, "stalk_dim": st.dim, "sections_dim": sec_dim, "comparison_rank": rk}


def alexandroff_presheaf(s: Sheaf) -> tuple[Sheaf, FiniteTopology]:
    """Extend a linear sheaf to the open sets of the Alexandroff topology.

    The stalk on an up-set U is the section space over U; restrictions
    forget coordinates.  Returned as a sheaf on Open(X)^op together with
    the topology, ready for :func:`check_gluing`.
    """
    from .poset import SubsetPoset, alexandroff_opens

    opens = alexandroff_opens(s.work)
    top = FiniteTopology(s.base.elements, opens)
    base = SubsetPoset(top.opens, reverse=True)
    spaces = {subset_id(o): section_space(s, o) for o in top.opens}
    fld = s.field
    stalks = {k: VecStalk(sp.dim, fld) for k, sp in spaces.items()}
    maps = {}
    for big, small in base.covers:
        a, b = spaces[big], spaces[small]
        if b.dim == 0:
            maps[(big, small)] = Matrix.zeros(0, a.dim, fld)
            continue
        rows = [i for x in b.elements for i in range(a.offsets[x], a.offsets[x] + a.dims[x])]
        restricted = a.basis.submatrix(rows) if a.dim else Matrix.zeros(len(rows), 0, fld)
        maps[(big, small)] = linalg.solve_matrix(b.basis, restricted).to_field(fld)
    return Sheaf(base, stalks, maps, SHEAF), top


def product_labels(stalks: Sequence[SetStalk]) -> tuple:
    return tuple(product(*(st.labels for st in stalks)))


def sheaf_from_working(base: Poset, stalks, wmaps: Mapping[tuple[str, str], SheafMap], orientation: str = SHEAF) -> Sheaf:
    """Build from maps keyed by working-order pairs."""
    maps = {((x, y) if orientation == SHEAF else (y, x)): m for (x, y), m in wmaps.items()}
    return Sheaf(base, stalks, maps, orientation)
