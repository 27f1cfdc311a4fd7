"""Builders for the worked models: sampling grids, discretized ODEs, the
Helmholtz stencil, spline coefficient spaces, marginalization and
graphical-model sheaves, and the two-segment string.

Function spaces are replaced by finite coordinate surrogates; each builder
says which one it uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import prod
from typing import Mapping, Sequence

from . import linalg
from .cohomology import betti_numbers
from .errors import BadStencil, ExtentTooSmall, IndexOutOfRange, NonStochastic, ShapeMismatch, ZeroWavenumber
from .expr import ExprMap, eval_node, evaluate_exact, partial
from .linalg import COMPLEX, RATIONAL, REAL, Matrix
from .poset import OrderMap, Poset
from .sheaf import DUAL, SHEAF, Assignment, Morphism, Sheaf, VecStalk
from .systems import ExplicitSystem, real
from .transport import SheafDiagram


def _exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _num_field(*xs) -> str:
    return RATIONAL if all(_exact(x) for x in xs) else REAL


# sampling grids ---------------------------------------------------------------------

@dataclass
class GridPoset:
    """Cells of a unit grid plus the unions of edge-adjacent cell pairs.

    A union sits below each of its two cells (bigger open set, lower
    element).  ``boxes`` gives each element's closed box per axis.
    """

    dimension: int
    extent: tuple[int, ...]
    poset: Poset
    boxes: dict[str, tuple[tuple[int, int], ...]]
    cells: list[str]
    overlaps: list[str]


def _box_name(box) -> str:
    return "x".join(f"({a},{b})" for a, b in box)


def sampling_poset(dim: int, extent) -> GridPoset:
    if dim not in (1, 2):
        raise ValueError("grid dimension must be 1 or 2")
    ext = (extent,) * dim if isinstance(extent, int) else tuple(extent)
    if len(ext) != dim:
        raise ShapeMismatch(f"need {dim} extents, got {len(ext)}")
    if any(e < 2 for e in ext):
        raise ExtentTooSmall(f"extent {ext} must be at least 2 per axis")
    boxes, cells, overlaps, pairs = {}, [], [], []
    for idx in product(*(range(e) for e in ext)):
        box = tuple((i, i + 1) for i in idx)
        name = _box_name(box)
        boxes[name] = box
        cells.append(name)
    for idx in product(*(range(e) for e in ext)):
        for axis in range(dim):
            if idx[axis] + 1 >= ext[axis]:
                continue
            box = tuple((i, i + 2) if a == axis else (i, i + 1) for a, i in enumerate(idx))
            nxt = tuple(i + 1 if a == axis else i for a, i in enumerate(idx))
            name = _box_name(box)
            boxes[name] = box
            overlaps.append(name)
            pairs.append((name, _box_name(tuple((i, i + 1) for i in idx))))
            pairs.append((name, _box_name(tuple((i, i + 1) for i in nxt))))
    return GridPoset(dim, ext, Poset(overlaps + cells, pairs), boxes, cells, overlaps)


def _lattice(box, m: int) -> list[tuple[Fraction, ...]]:
    axes = [[Fraction(a) + Fraction(j, m) for j in range((b - a) * m + 1)] for a, b in box]
    return list(product(*axes))


def sampled_grid_sheaf(grid: GridPoset, samples: int = 1) -> Sheaf:
    """Values at the lattice points of spacing ``1/samples`` in each closed
    box; a union restricts to a cell by picking that cell's points."""
    if samples < 1:
        raise ValueError("need at least one sample per unit")
    pts = {x: _lattice(grid.boxes[x], samples) for x in grid.poset}
    stalks = {x: VecStalk(len(p)) for x, p in pts.items()}
    maps = {}
    for lo, hi in grid.poset.covers:
        where = {p: i for i, p in enumerate(pts[lo])}
        maps[(lo, hi)] = Matrix.selection([where[p] for p in pts[hi]], len(pts[lo]))
    return Sheaf(grid.poset, stalks, maps)


# ODE discretization ------------------------------------------------------------------

STENCILS = ("central", "forward")


@dataclass
class OdeDiscretization:
    """Sampled form of ``u' = f(u)`` with step ``h`` on ``N`` samples.

    Variables ``u<n>`` hold state samples and ``v<n>`` derivative samples.
    Equation ``D<n>`` computes ``v<n>`` from neighbouring ``u`` by the
    stencil; equation ``F<n>`` computes it as ``f(u<n>)``.
    """

    sheaf: Sheaf
    f: ExprMap
    dim: int
    h: object
    n: int
    stencil: str

    @property
    def nodes(self) -> list[int]:
        return list(range(1, self.n - 1)) if self.stencil == "central" else list(range(self.n - 1))

    def stencil_value(self, samples: Sequence[Sequence], n: int) -> tuple:
        if self.stencil == "central":
            a, b, w = samples[n - 1], samples[n + 1], 2 * self.h
        else:
            a, b, w = samples[n], samples[n + 1], self.h
        return tuple((q - p) / w for p, q in zip(a, b))

    def sample(self, u: ExprMap, t0=0) -> list[tuple]:
        """Delta_h u: the values u(t0 + n h)."""
        _check_test_function(u, self.dim)
        return [evaluate_exact(u, (t0 + k * self.h,)) for k in range(self.n)]

    def residual(self, u: ExprMap, t0=0):
        """max_n |D_h(Delta_h u)_n - u'(t0 + n h)| over stencil nodes."""
        samples = self.sample(u, t0)
        dnodes = [partial(o, u.inputs[0]) for o in u.outputs]
        worst = 0
        for n in self.nodes:
            t = t0 + n * self.h
            exact = [eval_node(d, {u.inputs[0]: t}) for d in dnodes]
            approx = self.stencil_value(samples, n)
            worst = max([worst] + [abs(a - e) for a, e in zip(approx, exact)])
        return worst

    def assignment(self, u: ExprMap, t0=0) -> Assignment:
        """Samples of ``u`` and its stencil derivative, as an assignment."""
        samples = self.sample(u, t0)
        vals = {f"u{k}": tuple(samples[k]) for k in range(self.n)}
        for n in self.nodes:
            vals[f"v{n}"] = self.stencil_value(samples, n)
            vals[f"D{n}"] = tuple(samples[n - 1 if self.stencil == "central" else n]) + tuple(samples[n + 1])
            vals[f"F{n}"] = tuple(samples[n])
        return Assignment(vals)


def _check_test_function(u: ExprMap, d: int) -> None:
    if len(u.inputs) != 1 or len(u.outputs) != d:
        raise ShapeMismatch(f"test function must map t to R^{d}")


def ode_discretization(f: ExprMap, d: int, h, n: int, stencil: str = "central") -> tuple[Sheaf, OdeDiscretization]:
    if stencil not in STENCILS:
        raise BadStencil(f"unknown stencil {stencil!r}; use one of {STENCILS}")
    if not h > 0:
        raise BadStencil("step must be positive")
    if n < 3:
        raise BadStencil("need at least three samples")
    if f.arity != (d, d):
        raise ShapeMismatch(f"f must map R^{d} to R^{d}, got arity {f.arity}")
    fld = _num_field(h)
    width = 2 * h if stencil == "central" else h
    step = Fraction(1) / Fraction(width) if fld == RATIONAL else 1.0 / float(width)
    # (q - p) / width on the stacked pair (p, q)
    diff = Matrix([[-step if j == i else step if j == d + i else 0 for j in range(2 * d)] for i in range(d)], fld, 2 * d)
    nodes = list(range(1, n - 1)) if stencil == "central" else list(range(n - 1))
    elements = [f"u{k}" for k in range(n)] + [f"v{k}" for k in nodes]
    stalks = {x: VecStalk(d, fld) for x in elements}
    maps, pairs = {}, []
    for k in nodes:
        lo = k - 1 if stencil == "central" else k
        de, fe = f"D{k}", f"F{k}"
        stalks[de] = VecStalk(2 * d, fld)
        stalks[fe] = VecStalk(d, fld)
        pairs += [(de, f"u{lo}"), (de, f"u{k + 1}"), (de, f"v{k}"), (fe, f"u{k}"), (fe, f"v{k}")]
        maps[(de, f"u{lo}")] = Matrix.selection(range(d), 2 * d, fld)
        maps[(de, f"u{k + 1}")] = Matrix.selection(range(d, 2 * d), 2 * d, fld)
        maps[(de, f"v{k}")] = diff
        maps[(fe, f"u{k}")] = Matrix.identity(d, fld)
        maps[(fe, f"v{k}")] = f
    base = Poset(elements + [x for k in nodes for x in (f"D{k}", f"F{k}")], pairs)
    s = Sheaf(base, stalks, maps)
    return s, OdeDiscretization(s, f, d, h, n, stencil)


# Helmholtz stencil ---------------------------------------------------------------------

def laplace_stencil(samples: Sequence) -> object:
    """(1/2n) * sum(a_1..a_2n) - a_0 for samples (a_0, a_1, ..., a_2n)."""
    if len(samples) < 3 or len(samples) % 2 == 0:
        raise BadStencil("stencil needs a centre and 2n neighbours")
    k = len(samples) - 1
    tail = sum(samples[1:])
    return (Fraction(tail) / k if _exact(tail) else tail / k) - samples[0]


def helmholtz_stencil_sheaf(extent=(3, 3), k=1) -> Sheaf:
    """Discrete Helmholtz problem on an ``nx`` by ``ny`` unit grid.

    Variables ``v(i,j)`` at every node and ``u(i,j)`` at interior nodes.
    Interior node ``x`` carries two equations: ``S(i,j)`` with solution set
    ``u + k^2 v_0 = 0`` inside R^6 (coordinates u, v_0, v at x+e1, x-e1,
    x+e2, x-e2), stored as a 5-dimensional kernel; and ``D(i,j)`` on the
    five samples of v, sending them to ``u`` by the averaging stencil.
    """
    nx, ny = (extent, extent) if isinstance(extent, int) else extent
    if nx < 3 or ny < 3:
        raise ExtentTooSmall(f"grid {nx}x{ny} has no interior node; need at least 3x3")
    fld = _num_field(k)
    k2 = k * k
    c = [1, k2, 0, 0, 0, 0]
    basis, _ = linalg.kernel_basis(Matrix([c], fld))
    emb = Matrix.from_columns(basis, 6, fld)
    s_stalk = VecStalk(5, fld, embedding=emb)
    quarter = Fraction(1, 4) if fld == RATIONAL else 0.25
    dmap = Matrix([[-1, quarter, quarter, quarter, quarter]], fld)

    def v(i, j):
        return f"v({i},{j})"

    stalks = {v(i, j): VecStalk(1, fld) for i in range(nx) for j in range(ny)}
    maps, pairs = {}, []
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            u, se, de = f"u({i},{j})", f"S({i},{j})", f"D({i},{j})"
            near = [v(i, j), v(i + 1, j), v(i - 1, j), v(i, j + 1), v(i, j - 1)]
            stalks[u] = VecStalk(1, fld)
            stalks[se] = s_stalk
            stalks[de] = VecStalk(5, fld)
            pairs += [(se, u), (de, u)] + [(se, w) for w in near] + [(de, w) for w in near]
            maps[(se, u)] = Matrix.selection([0], 6, fld) @ emb
            maps[(de, u)] = dmap
            for p, w in enumerate(near):
                maps[(se, w)] = Matrix.selection([p + 1], 6, fld) @ emb
                maps[(de, w)] = Matrix.selection([p], 5, fld)
    return Sheaf(Poset(list(stalks), pairs), stalks, maps)


# nonlinear heat --------------------------------------------------------------------------

def heat_system(kappa=1) -> ExplicitSystem:
    """Pointwise form of the nonlinear heat equation with a source.

    The derivative values ``T`` (time) and ``L`` (Laplacian) enter as free
    inputs; ``V = u^2`` and ``f = T - L + kappa V``.
    """
    vs = [real(n) for n in ("u", "V", "T", "L", "f")]
    eqs = {"square": ["u", "V"], "source": ["T", "L", "V", "f"]}
    gamma = {"square": "V", "source": "f"}
    kap = str(kappa) if _exact(kappa) else repr(float(kappa))
    rhs = {
        "square": ExprMap.from_strings(["u"], ["u^2"]),
        "source": ExprMap.from_strings(["T", "L", "V"], [f"T - L + ({kap})*V"]),
    }
    return ExplicitSystem(vs, eqs, gamma, rhs)


# splines ---------------------------------------------------------------------------------

def monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors of total degree <= ``degree``, by degree then lex."""
    out = [e for e in product(range(degree + 1), repeat=n) if sum(e) <= degree]
    return sorted(out, key=lambda e: (sum(e), tuple(-x for x in e)))


def truncation_matrix(n: int, degree: int) -> Matrix:
    """Drop the top-degree coefficients of a degree-``degree`` polynomial."""
    src = monomials(n, degree)
    keep = [i for i, e in enumerate(src) if sum(e) < degree]
    return Matrix.selection(keep, len(src))


def spline_dual_sheaf(cover_size: int, n: int = 1, k: int = 1, overlaps: Sequence[tuple[int, int]] | None = None) -> Sheaf:
    """Coefficient spaces of degree-``k`` polynomials on cover sets ``U<i>``
    and degree ``k-1`` on their overlaps ``U<i>^U<j>``.

    The overlap lies below each of its two sets and every map truncates
    degree (transition maps are identities).  Overlaps default to
    consecutive pairs.
    """
    if k < 1:
        raise ValueError("spline degree must be at least 1")
    if cover_size < 1 or n < 1:
        raise ValueError("need at least one cover set and one variable")
    if overlaps is None:
        overlaps = [(i, i + 1) for i in range(cover_size - 1)]
    sets = [f"U{i}" for i in range(cover_size)]
    hi_dim, lo_dim = len(monomials(n, k)), len(monomials(n, k - 1))
    stalks = {u: VecStalk(hi_dim) for u in sets}
    maps, pairs = {}, []
    t = truncation_matrix(n, k)
    for i, j in overlaps:
        if not (0 <= i < cover_size and 0 <= j < cover_size) or i == j:
            raise IndexOutOfRange(f"overlap ({i}, {j}) is not a pair of cover sets")
        ov = f"U{min(i, j)}^U{max(i, j)}"
        stalks[ov] = VecStalk(lo_dim)
        for u in (f"U{i}", f"U{j}"):
            pairs.append((ov, u))
            maps[(ov, u)] = t
    return Sheaf(Poset(list(stalks), pairs), stalks, maps, DUAL)


# marginalization ------------------------------------------------------------------------

def _assignments(cards: Sequence[int]) -> list[tuple[int, ...]]:
    # lexicographic with the last variable fastest
    return list(product(*(range(c) for c in cards)))


def projection_matrix(cards: Sequence[int], keep: Sequence[int]) -> Matrix:
    """Lift of the coordinate projection onto ``keep`` (0-based, increasing)."""
    rows = {a: i for i, a in enumerate(_assignments([cards[i] for i in keep]))}
    cols = _assignments(cards)
    data = [[0] * len(cols) for _ in rows]
    for j, a in enumerate(cols):
        data[rows[tuple(a[i] for i in keep)]][j] = 1
    return Matrix(data, RATIONAL, len(cols))


def marginalization_matrix(cards: Sequence[int], j: int) -> Matrix:
    """Marginalize out variable ``j`` (1-based)."""
    if not 1 <= j <= len(cards):
        raise IndexOutOfRange(f"variable index {j} outside 1..{len(cards)}")
    if any(c < 1 for c in cards):
        raise ValueError("cardinalities must be positive")
    return projection_matrix(cards, [i for i in range(len(cards)) if i != j - 1])


@dataclass
class CPT:
    """P(target | given) with one column per assignment of ``given`` and one
    row per assignment of ``target`` (both lexicographic, last fastest)."""

    target: tuple[str, ...]
    given: tuple[str, ...]
    table: Matrix

    @property
    def name(self) -> str:
        return ",".join(self.target) + "|" + ",".join(self.given)


@dataclass
class RandomVariableSystem:
    names: tuple[str, ...]
    cards: tuple[int, ...]
    cpts: tuple[CPT, ...] = ()
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.cards = tuple(self.cards)
        self.cpts = tuple(self.cpts)
        if len(self.names) != len(self.cards) or not self.names:
            raise ShapeMismatch("need one cardinality per variable and at least one variable")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate variable name")
        for nm in self.names:
            if any(ch in nm for ch in ",|/"):
                raise ValueError(f"variable name {nm!r} may not contain ',', '|' or '/'")
        if any(c < 1 for c in self.cards):
            raise ValueError("cardinalities must be at least 1")
        self._index = {n: i for i, n in enumerate(self.names)}
        for c in self.cpts:
            self._check_cpt(c)

    def card(self, group: Sequence[str]) -> int:
        return prod(self.cards[self._index[n]] for n in group)

    def ordered(self, group) -> tuple[str, ...]:
        return tuple(sorted(set(group), key=self._index.__getitem__))

    def label(self, group) -> str:
        return ",".join(self.ordered(group))

    def _check_cpt(self, c: CPT) -> None:
        for n in c.target + c.given:
            if n not in self._index:
                raise ValueError(f"CPT {c.name} names unknown variable {n!r}")
        if not c.target or set(c.target) & set(c.given):
            raise ValueError(f"CPT {c.name} must add new target variables")
        if c.table.shape != (self.card(c.target), self.card(c.given)):
            raise ShapeMismatch(f"CPT {c.name} should be {self.card(c.target)}x{self.card(c.given)}")
        tol = 0.0 if c.table.field == RATIONAL else 1e-12
        for j in range(c.table.cols):
            total = sum(c.table.data[i][j] for i in range(c.table.rows))
            if abs(total - 1) > tol:
                raise NonStochastic(f"column {j} of CPT {c.name} sums to {total}")


def _subsets(sys: RandomVariableSystem) -> list[tuple[str, ...]]:
    out = []
    for r in range(len(sys.names), 0, -1):
        out.extend(combinations(sys.names, r))
    return out


def _marg(sys: RandomVariableSystem, big: Sequence[str], small: Sequence[str]) -> Matrix:
    cards = [sys.cards[sys._index[n]] for n in big]
    return projection_matrix(cards, [big.index(n) for n in small])


def marginalization_sheaf(sys: RandomVariableSystem, reduced: bool = False) -> tuple[Sheaf, OrderMap | None]:
    """Joint distributions over nonempty variable subsets.

    Full form: factor graph with one equation ``I/Xj`` per way to
    marginalize one variable out of ``I``; identity to ``I`` and ``m_j`` to
    the smaller set.  Reduced form: subsets ordered by reverse inclusion
    with composite marginalizations, returned with the collapsing map from
    the full base.
    """
    groups = _subsets(sys)
    labels = [sys.label(g) for g in groups]
    stalks = {sys.label(g): VecStalk(sys.card(g)) for g in groups}
    covers = []
    for g in groups:
        if len(g) < 2:
            continue
        for name in g:
            small = tuple(n for n in g if n != name)
            covers.append((g, small, name))
    full_stalks = dict(stalks)
    full_maps, full_pairs, collapse = {}, [], {l: l for l in labels}
    for g, small, name in covers:
        e = f"{sys.label(g)}/{name}"
        full_stalks[e] = VecStalk(sys.card(g))
        full_pairs += [(e, sys.label(g)), (e, sys.label(small))]
        full_maps[(e, sys.label(g))] = Matrix.identity(sys.card(g))
        full_maps[(e, sys.label(small))] = _marg(sys, g, small)
        collapse[e] = sys.label(g)
    full = Sheaf(Poset(list(full_stalks), full_pairs), full_stalks, full_maps)
    if not reduced:
        return full, None
    red_maps = {(sys.label(g), sys.label(small)): _marg(sys, g, small) for g, small, _ in covers}
    red = Sheaf(Poset(labels, list(red_maps)), stalks, red_maps)
    return red, OrderMap(full.base, red.base, collapse)


def conditional_matrix(sys: RandomVariableSystem, c: CPT) -> tuple[Matrix, tuple[str, ...], tuple[str, ...]]:
    """L_e: M(X_J) -> M(X_I) for I = given + target, J = given."""
    big = sys.ordered(c.given + c.target)
    small = sys.ordered(c.given)
    rows = _assignments([sys.cards[sys._index[n]] for n in big])
    t_idx = {a: i for i, a in enumerate(_assignments([sys.cards[sys._index[n]] for n in c.target]))}
    g_idx = {a: i for i, a in enumerate(_assignments([sys.cards[sys._index[n]] for n in c.given]))}
    s_idx = {a: i for i, a in enumerate(_assignments([sys.cards[sys._index[n]] for n in small]))}
    fld = c.table.field
    data = [[0] * len(s_idx) for _ in rows]
    for r, a in enumerate(rows):
        val = dict(zip(big, a))
        tpart = tuple(val[n] for n in c.target)
        gpart = tuple(val[n] for n in c.given)
        spart = tuple(val[n] for n in small)
        data[r][s_idx[spart]] = c.table.data[t_idx[tpart]][g_idx[gpart]]
    return Matrix(data, fld, len(s_idx)), big, small


def graphical_model_sheaf(sys: RandomVariableSystem) -> tuple[Sheaf, OrderMap]:
    """The marginalization sheaf plus one equation node per CPT.

    The CPT node carries M(X_J); it maps to ``J`` by the identity and to
    ``I = J + targets`` by L_e.  Also returns the collapsing map onto the
    reduced subset poset, sending each equation to its larger subset.
    """
    full, _ = marginalization_sheaf(sys)
    red, collapse = marginalization_sheaf(sys, reduced=True)
    stalks = dict(full.stalks)
    maps = dict(full.given)
    pairs = list(full.base.covers)
    mapping = dict(collapse.mapping)
    fld = RATIONAL
    for c in sys.cpts:
        lmat, big, small = conditional_matrix(sys, c)
        fld = linalg.promote(fld, lmat.field)
        e = c.name
        stalks[e] = VecStalk(sys.card(small), lmat.field)
        pairs += [(e, sys.label(small)), (e, sys.label(big))]
        maps[(e, sys.label(small))] = Matrix.identity(sys.card(small), lmat.field)
        maps[(e, sys.label(big))] = lmat
        mapping[e] = sys.label(big)
    if fld != RATIONAL:
        stalks = {x: VecStalk(st.dim, fld) for x, st in stalks.items()}
        maps = {k: m.to_field(fld) for k, m in maps.items()}
    base = Poset(list(stalks), pairs)
    s = Sheaf(base, stalks, maps)
    return s, OrderMap(base, red.base, mapping)


def fiber_cohomology(s: Sheaf, f: OrderMap) -> dict:
    """Betti numbers of ``s`` restricted to each fiber of ``f`` and whether
    all positive-degree ones vanish."""
    fibers = {}
    for v in f.target:
        pre = f.fiber(v)
        fibers[v] = betti_numbers(s.restrict(pre)) if pre else []
    holds = all(b == 0 for bs in fibers.values() for b in bs[1:])
    return {"fibers": fibers, "condition_holds": holds}


def uniform_cpt(sys_names: Sequence[str], cards: Mapping[str, int], target: Sequence[str], given: Sequence[str]) -> CPT:
    nt = prod(cards[n] for n in target)
    ng = prod(cards[n] for n in given)
    return CPT(tuple(target), tuple(given), Matrix([[Fraction(1, nt)] * ng for _ in range(nt)], RATIONAL, ng))


def alarm_system(cpts: Mapping[str, Matrix] | None = None) -> RandomVariableSystem:
    """Burglary and earthquake trigger the alarm; John and Mary respond.

    Variables B, E, A, J, M are binary.  Conditionals A|B,E, J|A and M|A
    default to uniform tables; pass ``cpts`` keyed by those names to
    supply real ones.
    """
    names = ("B", "E", "A", "J", "M")
    cards = {n: 2 for n in names}
    shapes = {"A|B,E": (("A",), ("B", "E")), "J|A": (("J",), ("A",)), "M|A": (("M",), ("A",))}
    given = dict(cpts or {})
    unknown = set(given) - set(shapes)
    if unknown:
        raise ValueError(f"unknown conditionals {sorted(unknown)}")
    out = []
    for key, (t, g) in shapes.items():
        out.append(CPT(t, g, given[key]) if key in given else uniform_cpt(names, cards, t, g))
    return RandomVariableSystem(names, tuple(cards[n] for n in names), tuple(out))


# string scattering ---------------------------------------------------------------------

def _wave_matrix(k) -> Matrix:
    """Value and derivative at 0 of a e^{ikx} + b e^{-ikx}, on (a, b)."""
    return Matrix([[1, 1], [1j * k, -1j * k]], COMPLEX)


def string_scattering_diagram(k_minus, k_plus) -> SheafDiagram:
    """Two string segments meeting at a knot.

    Each node is a one-point sheaf on ``knot``: the segment nodes ``X-`` and
    ``X+`` hold the wave amplitudes (a, b) and the knot node ``{0}`` holds
    value and slope; the extensions evaluate at the knot.
    """
    if k_minus == 0 or k_plus == 0:
        raise ZeroWavenumber("wavenumbers must be nonzero")
    base = Poset(["{0}", "X-", "X+"], [("{0}", "X-"), ("{0}", "X+")])
    pt = Poset(["knot"], [])
    nodes = {a: Sheaf(pt, {"knot": VecStalk(2, COMPLEX)}, {}) for a in base}
    along = OrderMap(pt, pt, {"knot": "knot"})
    edges = {
        ("{0}", side): Morphism(SHEAF, nodes[side], nodes["{0}"], along, {"knot": _wave_matrix(k)})
        for side, k in (("X-", k_minus), ("X+", k_plus))
    }
    return SheafDiagram(base, nodes, edges)


def transfer_matrix(k_minus, k_plus) -> Matrix:
    """Amplitudes on X+ produced by amplitudes on X- through the knot."""
    if k_minus == 0 or k_plus == 0:
        raise ZeroWavenumber("wavenumbers must be nonzero")
    return linalg.inverse(_wave_matrix(k_plus)) @ _wave_matrix(k_minus)


# expression catalogue -------------------------------------------------------------------

def model_expressions() -> dict[str, tuple[ExprMap, tuple]]:
    """Nonlinear maps used by the builders, each with a sample point."""
    from .systems import lorenz_rhs

    return {
        "lorenz": (lorenz_rhs(), (1, 3, 2, 10, 28, Fraction(8, 3))),
        "square": (ExprMap.from_strings(["u"], ["u^2"]), (3,)),
        "heat-source": (heat_system().rhs["source"], (1, 2, 3)),
        "circle": (ExprMap.from_strings(["x", "y"], ["x^2 + y^2 - 4"]), (Fraction(1, 2), 1)),
        "paraboloid": (ExprMap.from_strings(["x", "y", "z"], ["y - (x^2 + z^2 + 1)"]), (1, 2, Fraction(1, 3))),
        "pendulum": (ExprMap.from_strings(["p", "q"], ["q", "-sin(p)"]), (0.3, -0.2)),
        "decay": (ExprMap.from_strings(["u"], ["-u*exp(-u)"]), (0.5,)),
    }
