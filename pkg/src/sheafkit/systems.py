"""Equation systems and their sheaf encodings on the factor-graph poset."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import networkx as nx

from . import linalg
from .errors import InvalidSystem, UnrepresentablePredicate
from .expr import Binary, Const, ExprMap, Var, substitute
from .linalg import REAL, Matrix
from .poset import Poset
from .sheaf import Constraint, SetStalk, Sheaf, SheafMap, Table, VecStalk

TABLE, AFFINE, EXPR = "table", "affine", "expr"


@dataclass(frozen=True)
class Variable:
    """A variable and its value space.  ``box`` bounds minimizer starts."""

    name: str
    space: SetStalk | VecStalk
    box: tuple[float, float] | None = None

    @property
    def finite(self) -> bool:
        return isinstance(self.space, SetStalk)

    def coordinates(self) -> list[str]:
        if self.finite:
            return [self.name]
        if self.space.dim == 1:
            return [self.name]
        return [f"{self.name}_{i}" for i in range(self.space.dim)]


def real(name: str, dim: int = 1, box=None, field: str = REAL) -> Variable:
    return Variable(name, VecStalk(dim, field), box)


def finite(name: str, labels: Sequence) -> Variable:
    return Variable(name, SetStalk(tuple(labels)))


@dataclass(frozen=True)
class Equation:
    """Predicate on the ordered variables ``variables``.

    ``table``: the allowed rows; ``affine``: ``matrix @ x = offset`` on the
    concatenated coordinates; ``expr``: residual expressions that vanish.
    """

    name: str
    variables: tuple[str, ...]
    kind: str
    rows: tuple = ()
    matrix: Matrix | None = None
    offset: tuple = ()
    residual: ExprMap | None = None
    texts: tuple = ()

    def __post_init__(self):
        if self.kind not in (TABLE, AFFINE, EXPR):
            raise InvalidSystem(f"equation {self.name!r}: unknown predicate kind {self.kind!r}")


def table_equation(name: str, variables: Sequence[str], rows: Sequence[Sequence]) -> Equation:
    return Equation(name, tuple(variables), TABLE, rows=tuple(tuple(r) for r in rows))


def affine_equation(name: str, variables: Sequence[str], matrix, offset=None) -> Equation:
    m = matrix if isinstance(matrix, Matrix) else Matrix(matrix)
    off = tuple(offset) if offset is not None else tuple(0 for _ in range(m.rows))
    return Equation(name, tuple(variables), AFFINE, matrix=m, offset=off)


def expr_equation(name: str, variables: Sequence[str], residuals: Sequence[str]) -> Equation:
    # parsed by the system once coordinate names are known
    return Equation(name, tuple(variables), EXPR, texts=tuple(residuals))


class EquationSystem:
    def __init__(self, variables: Sequence[Variable], equations: Sequence[Equation]):
        self.variables: dict[str, Variable] = {}
        for v in variables:
            if v.name in self.variables:
                raise InvalidSystem(f"variable {v.name!r} declared twice")
            self.variables[v.name] = v
        self.equations: dict[str, Equation] = {}
        for e in equations:
            if e.name in self.equations or e.name in self.variables:
                raise InvalidSystem(f"name {e.name!r} is used twice")
            for v in e.variables:
                if v not in self.variables:
                    raise InvalidSystem(f"equation {e.name!r} uses undeclared variable {v!r}")
            if len(set(e.variables)) != len(e.variables):
                raise InvalidSystem(f"equation {e.name!r} repeats a variable")
            if e.kind == EXPR and e.residual is None:
                coords = [c for v in e.variables for c in self.variables[v].coordinates()]
                e = Equation(e.name, e.variables, EXPR, residual=ExprMap.from_strings(coords, e.texts), texts=e.texts)
            self.equations[e.name] = e
        used = {v for e in self.equations.values() for v in e.variables}
        idle = sorted(set(self.variables) - used)
        if idle:
            raise InvalidSystem(f"variables {idle} appear in no equation")

    def ambient(self, e: Equation) -> int:
        return sum(self.variables[v].space.dim for v in e.variables)

    def offsets(self, e: Equation) -> dict[str, int]:
        out, o = {}, 0
        for v in e.variables:
            out[v] = o
            o += self.variables[v].space.dim
        return out


# posets ---------------------------------------------------------------------------

def factor_graph(sys: EquationSystem) -> Poset:
    """Variables and equations, with e <= v whenever e involves v."""
    pairs = [(e.name, v) for e in sys.equations.values() for v in e.variables]
    return Poset(list(sys.variables) + list(sys.equations), pairs)


def _field(sys: EquationSystem, names) -> str:
    fields = [sys.variables[v].space.field for v in names if not sys.variables[v].finite]
    return linalg.promote(*fields) if fields else linalg.RATIONAL


def _projection(sys: EquationSystem, names: Sequence[str], v: str, fld: str) -> Matrix:
    offs, o = {}, 0
    for n in names:
        offs[n] = o
        o += sys.variables[n].space.dim
    d = sys.variables[v].space.dim
    return Matrix.selection(range(offs[v], offs[v] + d), o, fld)


def _all_finite(sys, names) -> bool:
    kinds = {sys.variables[v].finite for v in names}
    if len(kinds) > 1:
        raise UnrepresentablePredicate(f"mixed finite and vector variables in {list(names)}")
    return kinds == {True}


def _product_stalk(sys, names) -> SetStalk | VecStalk:
    if _all_finite(sys, names):
        return SetStalk(tuple(product(*(sys.variables[v].space.labels for v in names))))
    return VecStalk(sum(sys.variables[v].space.dim for v in names), _field(sys, names))


def _tuple_projection(stalk: SetStalk, i: int) -> Table:
    return Table((row, row[i]) for row in stalk.labels)


def aggregation_sheaf(sys: EquationSystem) -> Sheaf:
    """Stalk over an equation is the product of its variables' spaces."""
    base = factor_graph(sys)
    stalks = {v: var.space for v, var in sys.variables.items()}
    maps: dict[tuple[str, str], SheafMap] = {}
    for e in sys.equations.values():
        st = _product_stalk(sys, e.variables)
        stalks[e.name] = st
        for i, v in enumerate(e.variables):
            if isinstance(st, SetStalk):
                maps[(e.name, v)] = _tuple_projection(st, i)
            else:
                maps[(e.name, v)] = _projection(sys, e.variables, v, st.field)
    return Sheaf(base, stalks, maps)


def solution_stalk(sys: EquationSystem, e: Equation):
    """The solution set S_e and the projections out of it."""
    names = e.variables
    if e.kind == TABLE:
        if not _all_finite(sys, names):
            raise UnrepresentablePredicate(f"table predicate {e.name!r} needs finite variables")
        for row in e.rows:
            if len(row) != len(names):
                raise InvalidSystem(f"row {row!r} of {e.name!r} has the wrong length")
            for v, val in zip(names, row):
                if val not in sys.variables[v].space:
                    raise InvalidSystem(f"{val!r} is not a value of {v!r}")
        st = SetStalk(tuple(dict.fromkeys(e.rows)))
        return st, {v: _tuple_projection(st, i) for i, v in enumerate(names)}
    if _all_finite(sys, names):
        raise UnrepresentablePredicate(f"{e.kind} predicate {e.name!r} over finite variables; list a table")
    n = sys.ambient(e)
    fld = _field(sys, names)
    if e.kind == AFFINE:
        if e.matrix.cols != n or len(e.offset) != e.matrix.rows:
            raise InvalidSystem(f"affine predicate {e.name!r} has the wrong shape")
        fld = linalg.promote(fld, e.matrix.field)
        if all(b == 0 for b in e.offset):
            basis, _ = linalg.kernel_basis(e.matrix.to_field(fld))
            k = Matrix.from_columns(basis, n, fld) if basis else Matrix.zeros(n, 0, fld)
            st = VecStalk(len(basis), fld, embedding=k)
            return st, {v: _projection(sys, names, v, fld) @ k for v in names}
        st = VecStalk(n, fld, constraint=Constraint(matrix=e.matrix, offset=tuple(e.offset)))
        return st, {v: _projection(sys, names, v, fld) for v in names}
    if e.residual.arity[0] != n:
        raise InvalidSystem(f"residual of {e.name!r} has {e.residual.arity[0]} inputs, expected {n}")
    st = VecStalk(n, fld, constraint=Constraint(expr=e.residual))
    return st, {v: _projection(sys, names, v, fld) for v in names}


def solution_sheaf(sys: EquationSystem) -> Sheaf:
    """Stalk over an equation is its solution set; sections solve the system."""
    base = factor_graph(sys)
    stalks = {v: var.space for v, var in sys.variables.items()}
    maps = {}
    for e in sys.equations.values():
        st, proj = solution_stalk(sys, e)
        stalks[e.name] = st
        for v, m in proj.items():
            maps[(e.name, v)] = m
    return Sheaf(base, stalks, maps)


def minimizer_boxes(sys: EquationSystem) -> dict[str, tuple[float, float]]:
    return {v: var.box for v, var in sys.variables.items() if var.box is not None}


# explicit systems -------------------------------------------------------------------

@dataclass
class ExplicitSystem:
    """Each equation ``e`` reads ``gamma[e] = rhs[e](other variables of e)``.

    ``rhs`` is an ExprMap over the coordinates of the other variables (in
    equation order), a Matrix on their concatenation, or a Table from
    tuples of their values.
    """

    variables: Sequence[Variable]
    equations: Mapping[str, Sequence[str]]
    gamma: Mapping[str, str]
    rhs: Mapping[str, SheafMap]
    _vars: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._vars = {v.name: v for v in self.variables}
        if len(self._vars) != len(self.variables):
            raise InvalidSystem("variable declared twice")
        targets = list(self.gamma.values())
        if len(set(targets)) != len(targets):
            raise InvalidSystem("selector is not injective")
        for e, vs in self.equations.items():
            if e not in self.gamma or e not in self.rhs:
                raise InvalidSystem(f"equation {e!r} needs a selected variable and a right-hand side")
            if self.gamma[e] not in vs:
                raise InvalidSystem(f"selected variable of {e!r} is not one of its variables")
            for v in vs:
                if v not in self._vars:
                    raise InvalidSystem(f"equation {e!r} uses undeclared variable {v!r}")
            self._check_rhs(e)
        self.as_equation_system()  # validates coverage and names

    def inputs(self, e: str) -> list[str]:
        return [v for v in self.equations[e] if v != self.gamma[e]]

    def _check_rhs(self, e: str) -> None:
        ins = self.inputs(e)
        out = self._vars[self.gamma[e]]
        f = self.rhs[e]
        if isinstance(f, Table):
            st = SetStalk(tuple(product(*(self._vars[v].space.labels for v in ins))))
            missing = [k for k in st.labels if k not in f]
            if missing:
                raise InvalidSystem(f"table for {e!r} misses inputs {missing[:3]}")
            return
        n_in = sum(self._vars[v].space.dim for v in ins)
        got = f.arity if isinstance(f, ExprMap) else (f.cols, f.rows)
        if got != (n_in, out.space.dim):
            raise InvalidSystem(f"right-hand side of {e!r} has arity {got}, expected {(n_in, out.space.dim)}")

    @property
    def free(self) -> list[str]:
        dep = set(self.gamma.values())
        return [v.name for v in self.variables if v.name not in dep]

    def as_equation_system(self) -> EquationSystem:
        """The same equations as generic predicates."""
        eqs = []
        for e, vs in self.equations.items():
            f = self.rhs[e]
            ins = self.inputs(e)
            g = self.gamma[e]
            if isinstance(f, Table):
                rows = []
                for key in product(*(self._vars[v].space.labels for v in ins)):
                    vals = dict(zip(ins, key))
                    vals[g] = f[key]
                    rows.append(tuple(vals[v] for v in vs))
                eqs.append(table_equation(e, vs, rows))
            elif isinstance(f, Matrix):
                # gamma - f(inputs) = 0 on the equation's coordinate order
                blocks, col = {}, 0
                for v in vs:
                    d = self._vars[v].space.dim
                    blocks[v] = (col, d)
                    col += d
                rows = []
                for r in range(f.rows):
                    row = [0] * col
                    fin = 0
                    for v in ins:
                        c0, d = blocks[v]
                        for j in range(d):
                            row[c0 + j] = -f.data[r][fin + j]
                        fin += d
                    row[blocks[g][0] + r] += 1
                    rows.append(row)
                eqs.append(affine_equation(e, vs, Matrix(rows, f.field, col)))
            else:
                coords = {v: self._vars[v].coordinates() for v in vs}
                env = dict(zip(f.inputs, (Var(c) for v in ins for c in coords[v])))
                outs = [
                    Binary("-", Var(c), substitute(o, env)) for c, o in zip(coords[g], f.outputs)
                ]
                names = [c for v in vs for c in coords[v]]
                eqs.append(Equation(e, tuple(vs), EXPR, residual=ExprMap(tuple(names), tuple(outs))))
        return EquationSystem(self.variables, eqs)


def explicit_solution_sheaf(sys: ExplicitSystem) -> Sheaf:
    """Stalk over ``e`` is the product of its input spaces; the map to the
    selected variable is the right-hand side, the others are projections."""
    generic = sys.as_equation_system()
    base = factor_graph(generic)
    stalks = {v.name: v.space for v in sys.variables}
    maps: dict[tuple[str, str], SheafMap] = {}
    for e in sys.equations:
        ins = sys.inputs(e)
        st = _product_stalk(generic, ins) if ins else _empty_product(generic, sys.gamma[e])
        stalks[e] = st
        maps[(e, sys.gamma[e])] = sys.rhs[e]
        for i, v in enumerate(ins):
            if isinstance(st, SetStalk):
                maps[(e, v)] = _tuple_projection(st, i)
            else:
                maps[(e, v)] = _projection(generic, ins, v, st.field)
    return Sheaf(base, stalks, maps)


def _empty_product(sys: EquationSystem, target: str):
    if sys.variables[target].finite:
        return SetStalk(((),))
    return VecStalk(0, sys.variables[target].space.field)


def dependency_graph(sys: ExplicitSystem) -> nx.DiGraph:
    """Vertices are equations and free variables; an edge feeds each
    equation from whatever produces its inputs.  Each edge carries the
    variable it transports; the classification of variables (free,
    intermediate, terminal) is attached as ``graph.graph["classification"]``."""
    g = nx.DiGraph()
    free = sys.free
    producer = {v: e for e, v in sys.gamma.items()}
    for v in free:
        g.add_node(v, kind="variable")
    for e in sys.equations:
        g.add_node(e, kind="equation", produces=sys.gamma[e])
    for e in sys.equations:
        for v in sys.inputs(e):
            src = producer.get(v, v)
            g.add_edge(src, e, variable=v)
    used = {v for e in sys.equations for v in sys.inputs(e)}
    dep = [sys.gamma[e] for e in sys.equations]
    g.graph["classification"] = {
        "free": sorted(free),
        "intermediate": sorted(v for v in dep if v in used),
        "terminal": sorted(v for v in dep if v not in used),
    }
    return g


# worked systems ---------------------------------------------------------------------

def circle_paraboloid_system(box: tuple[float, float] = (-10.0, 10.0)) -> EquationSystem:
    vs = [real("x", box=box), real("y", box=box), real("z", box=box)]
    eqs = [
        expr_equation("1", ["x", "y"], ["x^2 + y^2 - 4"]),
        expr_equation("2", ["x", "y", "z"], ["y - (x^2 + z^2 + 1)"]),
    ]
    return EquationSystem(vs, eqs)


def stoichiometry_system() -> EquationSystem:
    """Photosynthesis p and combustion c at equilibrium, as linear
    constraints on the five concentrations."""
    names = ["CO2", "H2O", "CH2O", "O2", "H2"]
    vs = [Variable(n, VecStalk(1, linalg.RATIONAL)) for n in names]
    eqs = [
        affine_equation("p", ["CO2", "H2O", "CH2O", "O2"], [[1, 2, -1, -1]]),
        affine_equation("c", ["H2", "O2", "H2O"], [[2, 1, -2]]),
    ]
    return EquationSystem(vs, eqs)


def _const(v) -> Const:
    return Const(Fraction(v) if not isinstance(v, float) else v)


def lorenz_system(a=10, b=28, c=Fraction(8, 3), constants: bool = True) -> ExplicitSystem:
    """The three Lorenz equations with pointwise derivatives ``dx, dy, dz``.

    Parameters are variables too; with ``constants`` each one is pinned by
    an equation ``pa``/``pb``/``pc`` that has no inputs.
    """
    vs = [real(n) for n in ("x", "y", "z", "a", "b", "c", "dx", "dy", "dz")]
    equations = {
        "ex": ["x", "y", "a", "dx"],
        "ey": ["x", "y", "z", "b", "dy"],
        "ez": ["x", "y", "z", "c", "dz"],
    }
    gamma = {"ex": "dx", "ey": "dy", "ez": "dz"}
    rhs: dict[str, SheafMap] = {
        "ex": ExprMap.from_strings(["x", "y", "a"], ["a*(y - x)"]),
        "ey": ExprMap.from_strings(["x", "y", "z", "b"], ["x*(b - z) - y"]),
        "ez": ExprMap.from_strings(["x", "y", "z", "c"], ["x*y - c*z"]),
    }
    if constants:
        for name, val in (("a", a), ("b", b), ("c", c)):
            e = "p" + name
            equations[e] = [name]
            gamma[e] = name
            rhs[e] = ExprMap((), (_const(val),))
    return ExplicitSystem(vs, equations, gamma, rhs)


def lorenz_rhs() -> ExprMap:
    """The Lorenz vector field as one map of (x, y, z, a, b, c)."""
    return ExprMap.from_strings(
        ["x", "y", "z", "a", "b", "c"], ["a*(y - x)", "x*(b - z) - y", "x*y - c*z"]
    )


# JSON ----------------------------------------------------------------------------------

def system_from_json(data: Mapping):
    """Read ``{"variables": {...}, "equations": {...}, "explicit": {...}}``."""
    from .io import map_from_json, matrix_from_json, stalk_from_json, label_from_json

    vs = []
    for name, spec in data["variables"].items():
        box = tuple(spec["box"]) if "box" in spec else None
        spec = {k: v for k, v in spec.items() if k != "box"}
        vs.append(Variable(name, stalk_from_json(spec, f"variables.{name}"), box))
    if "explicit" in data:
        ex = data["explicit"]
        eqs = {e: list(spec["variables"]) for e, spec in data["equations"].items()}
        rhs = {e: map_from_json(m, f"explicit.rhs.{e}") for e, m in ex["rhs"].items()}
        return ExplicitSystem(vs, eqs, dict(ex["gamma"]), rhs)
    eqs = []
    for name, spec in data["equations"].items():
        kind = spec["kind"]
        if kind == TABLE:
            eqs.append(table_equation(name, spec["variables"], [label_from_json(r) for r in spec["rows"]]))
        elif kind == AFFINE:
            m = matrix_from_json(spec["matrix"], f"equations.{name}.matrix")
            eqs.append(affine_equation(name, spec["variables"], m, spec.get("offset")))
        elif kind == EXPR:
            eqs.append(expr_equation(name, spec["variables"], spec["residuals"]))
        else:
            raise InvalidSystem(f"equation {name!r}: unknown kind {kind!r}")
    return EquationSystem(vs, eqs)

