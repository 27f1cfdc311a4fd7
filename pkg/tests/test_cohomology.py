from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from helpers import diamond, random_sheaves, scalar

from sheafkit import linalg
from sheafkit.cohomology import (
    betti_numbers,
    coboundary,
    cochain_complex,
    cochain_dims,
    cohomology_report,
    linearize,
    numeric_rank_gap,
    restricted_betti,
    zero_section,
)
from sheafkit.errors import ModeUnsupported, NotASection, NotLinear
from sheafkit.expr import ExprMap
from sheafkit.linalg import Matrix
from sheafkit.poset import Poset
from sheafkit.sheaf import Assignment, Constraint, SetStalk, Sheaf, VecStalk


def crown(twist=1):
    """Constant line on the four-element crown a, b < c, d: a discrete circle."""
    p = Poset(list("abcd"), [("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")])
    maps = {pair: scalar(1) for pair in p.covers}
    maps[("b", "d")] = scalar(twist)
    return Sheaf(p, {x: VecStalk(1) for x in "abcd"}, maps)


def test_crown_is_a_circle():
    assert cochain_dims(crown()) == [4, 4]
    assert betti_numbers(crown()) == [1, 1]


def test_twisted_crown_has_no_sections():
    # a sign flip on one edge: the Moebius line bundle on the circle
    assert betti_numbers(crown(-1)) == [0, 0]


def test_diamond_coboundary_entries():
    d0 = coboundary(diamond(), 0)
    assert d0.shape == (5, 4)
    # rows (a,c),(b,c),(d,a),(d,b),(d,c); columns a, b, c, d
    assert d0.data[0] == (-1, 0, 1, 0)
    assert d0.data[2] == (1, 0, 0, -2)


def test_complex_bookkeeping():
    cx = cochain_complex(diamond())
    assert cx.dims == [4, 5, 2]
    assert cx.offsets[1][("d", "c")] == 4


def test_report_fields():
    rep = cohomology_report(diamond(), 1)
    assert rep == {"betti": [1, 0], "chain_dims": [4, 5], "field": "exact"}
    flt = Sheaf(diamond().base, {x: VecStalk(1, "real") for x in "abcd"}, {k: scalar(1.0) for k in diamond().base.covers})
    assert cohomology_report(flt)["field"] == "approximate"


def test_restricted_betti():
    # the two middle elements alone form a discrete two-point space
    assert restricted_betti(diamond(), ["a", "b"]) == [2]


def test_finite_sheaf_rejected():
    p = Poset(["u"])
    with pytest.raises(NotLinear):
        betti_numbers(Sheaf(p, {"u": SetStalk((0, 1))}, {}))


def test_linearize_circle_constraint():
    circle = Constraint(expr=ExprMap.from_strings(["x", "y"], ["x^2 + y^2 - 25"]))
    p = Poset(["u", "v"], [("u", "v")])
    s = Sheaf(p, {"u": VecStalk(2, "real", constraint=circle), "v": VecStalk(1, "real")}, {("u", "v"): ExprMap.from_strings(["x", "y"], ["x*y"])})
    lin = linearize(s, Assignment({"u": (3, 4), "v": (12,)}))
    assert lin.stalks["u"].dim == 1
    # tangent t is orthogonal to (3, 4); d(xy) along t is y*t0 + x*t1 = 4*t0 + 3*t1
    t = np.array(lin.stalks["u"].embedding.to_numpy(), dtype=float).ravel()
    slope = float(lin.map("u", "v").to_numpy()[0, 0])
    assert abs(slope - (4 * t[0] + 3 * t[1])) < 1e-9
    assert abs(t[0] * 3 + t[1] * 4) < 1e-9


def test_linearize_errors():
    p = Poset(["u", "v"], [("u", "v")])
    s = Sheaf(p, {"u": VecStalk(1), "v": VecStalk(1)}, {("u", "v"): ExprMap.from_strings(["u"], ["u^2"])})
    with pytest.raises(NotASection):
        linearize(s, Assignment({"u": (2,), "v": (5,)}))
    fin = Sheaf(Poset(["u"]), {"u": SetStalk((0,))}, {})
    with pytest.raises(ModeUnsupported):
        linearize(fin, Assignment({"u": 0}))
    inv = Sheaf(p, {"u": VecStalk(1), "v": VecStalk(1)}, {("u", "v"): ExprMap.from_strings(["u"], ["1/u"])})
    # 1/u cannot even be evaluated at 0, so the point is rejected first
    with pytest.raises(NotASection, match="inf"):
        linearize(inv, Assignment({"u": (0,), "v": (0,)}))


def test_linearize_finite_difference_mode():
    p = Poset(["u", "v"], [("u", "v")])
    s = Sheaf(p, {"u": VecStalk(1), "v": VecStalk(1)}, {("u", "v"): ExprMap.from_strings(["u"], ["u^3"])})
    lin = linearize(s, Assignment({"u": (2,), "v": (8,)}), "finite-diff")
    assert abs(float(lin.map("u", "v").to_numpy()[0, 0]) - 12) < 1e-5


def test_linear_sheaf_linearizes_to_itself():
    s = diamond((Fraction(1, 2), 3, 1, Fraction(3, 2)))
    assert linearize(s, zero_section(s)) == s


def test_rank_gap():
    assert numeric_rank_gap(Matrix([[1.0, 0.0], [0.0, 1e-3]])) == pytest.approx(1e-3)
    assert numeric_rank_gap(Matrix.zeros(0, 2)) == 1.0


@settings(max_examples=80)
@given(random_sheaves())
def test_euler_characteristic(s):
    dims = cochain_dims(s)
    b = betti_numbers(s)
    assert sum((-1) ** k * n for k, n in enumerate(dims)) == sum((-1) ** k * n for k, n in enumerate(b))


@settings(max_examples=80)
@given(random_sheaves())
def test_betti_matches_numpy_ranks(s):
    n = len(cochain_dims(s))
    ranks = [0] + [
        np.linalg.matrix_rank(coboundary(s, k).to_numpy().astype(float)) if coboundary(s, k).rows and coboundary(s, k).cols else 0
        for k in range(n - 1)
    ] + [0]
    dims = cochain_dims(s)
    assert betti_numbers(s) == [dims[k] - ranks[k + 1] - ranks[k] for k in range(n)]


@settings(max_examples=40)
@given(random_sheaves(max_dim=2))
def test_dd_zero_over_reals(s):
    flt = Sheaf(
        s.base,
        {x: VecStalk(st.dim, linalg.REAL) for x, st in s.stalks.items()},
        {k: m.to_field(linalg.REAL) for k, m in s.given.items()},
    )
    for k in range(max(s.base.height - 1, 0)):
        assert (coboundary(flt, k + 1) @ coboundary(flt, k)).is_zero(1e-12)
