from fractions import Fraction

import pytest
from hypothesis import given, settings

from helpers import diamond, diamond_poset, random_sheaves, scalar

from sheafkit.errors import ArityMismatch, MissingMap, MissingStalk, ModeUnsupported, NotASection, ShapeMismatch
from sheafkit.expr import ExprMap
from sheafkit.linalg import Matrix
from sheafkit.poset import OrderMap, Poset
from sheafkit.sheaf import (
    DUAL,
    Assignment,
    Constraint,
    Morphism,
    SetStalk,
    Sheaf,
    Table,
    VecStalk,
    alexandroff_presheaf,
    check_gluing,
    find_sections,
    identity_morphism,
    is_section,
    push_section,
    section_space,
    validate_commutativity,
    validate_morphism,
)


def line(lo="u", hi="v"):
    return Poset([lo, hi], [(lo, hi)])


def test_construction_errors():
    with pytest.raises(MissingStalk):
        Sheaf(line(), {"u": VecStalk(1)}, {})
    with pytest.raises(MissingMap):
        Sheaf(line(), {"u": VecStalk(1), "v": VecStalk(1)}, {})
    with pytest.raises(ShapeMismatch):
        Sheaf(line(), {"u": VecStalk(2), "v": VecStalk(1)}, {("u", "v"): scalar(1)})


def test_composites_follow_first_path():
    s = diamond()
    assert s.map("d", "c") == scalar(2)
    assert s.path("d", "c") == ("d", "a", "c")


def test_dual_orientation_stores_extensions():
    s = Sheaf(line(), {"u": VecStalk(2), "v": VecStalk(1)}, {("u", "v"): Matrix([[1], [0]])}, DUAL)
    assert s.work.leq("v", "u")
    assert s.map("v", "u") == Matrix([[1], [0]])
    assert s.restriction("u", "v") == Matrix([[1], [0]])
    assert section_space(s).dim == 1


def test_finite_enumeration():
    p = line()
    parity = Table([((0, 0), 0), ((0, 1), 1), ((1, 0), 1), ((1, 1), 0)])
    s = Sheaf(p, {"u": SetStalk(((0, 0), (0, 1), (1, 0), (1, 1))), "v": SetStalk((0, 1))}, {("u", "v"): parity})
    res = find_sections(s, "enumerate")
    assert len(res.assignments) == 4 and res.complete
    only_v = find_sections(s, "enumerate", support=["v"])
    assert len(only_v.assignments) == 2


def test_finite_non_commuting_square_found():
    p = diamond_poset()
    flip = Table([(0, 1), (1, 0)])
    ident = Table([(0, 0), (1, 1)])
    stalks = {x: SetStalk((0, 1)) for x in "abcd"}
    s = Sheaf(p, stalks, {("d", "a"): flip, ("d", "b"): ident, ("a", "c"): ident, ("b", "c"): ident})
    rep = validate_commutativity(s)
    assert not rep.ok and rep.violations[0]["pair"] == ["d", "c"]
    assert find_sections(s, "enumerate").assignments == []


def test_expr_map_validation_is_sampled():
    p = diamond_poset()
    sq = ExprMap.from_strings(["x"], ["x^2"])
    ident = ExprMap.from_strings(["x"], ["x"])
    stalks = {x: VecStalk(1, "real") for x in "abcd"}
    good = Sheaf(p, stalks, {("d", "a"): sq, ("d", "b"): ident, ("a", "c"): ident, ("b", "c"): sq})
    rep = validate_commutativity(good)
    assert rep.ok and rep.probabilistic
    bad = Sheaf(p, stalks, {("d", "a"): sq, ("d", "b"): ident, ("a", "c"): ident, ("b", "c"): ident})
    assert not validate_commutativity(bad).ok


def test_is_section_and_residual():
    s = diamond()
    assert is_section(s, Assignment({"d": (1,), "a": (2,), "b": (1,), "c": (2,)}))[0]
    ok, r = is_section(s, Assignment({"d": (1,), "a": (2,), "b": (1,), "c": (3,)}))
    assert not ok and r > 0


def test_linear_mode_rejects_nonlinear():
    s = Sheaf(line(), {"u": VecStalk(1, "real"), "v": VecStalk(1, "real")}, {("u", "v"): ExprMap.from_strings(["u"], ["u^2"])})
    with pytest.raises(ModeUnsupported):
        find_sections(s, "linear")


def test_minimize_on_constrained_stalk():
    circle = Constraint(expr=ExprMap.from_strings(["x", "y"], ["x^2 + y^2 - 1"]))
    s = Sheaf(
        line(),
        {"u": VecStalk(2, "real", constraint=circle), "v": VecStalk(1, "real")},
        {("u", "v"): Matrix([[1.0, -1.0]])},
    )
    res = find_sections(s, "minimize", seed=3)
    assert res.assignments
    for a in res.assignments:
        x, y = a.values["u"]
        assert abs(x * x + y * y - 1) < 1e-6
        assert abs(a.values["v"][0] - (x - y)) < 1e-6


def test_morphism_validation_and_push():
    s = diamond()
    ident = identity_morphism(s)
    assert validate_morphism(ident).ok
    t = diamond((4, 1, 1, 4))
    comps = {x: scalar(2) if x in "ac" else scalar(1) for x in "abcd"}
    along = OrderMap(t.base, s.base, {x: x for x in "abcd"})
    m = Morphism("sheaf", s, t, along, comps)
    assert validate_morphism(m).ok
    image = push_section(m, Assignment({"d": (1,), "a": (2,), "b": (1,), "c": (2,)}))
    assert is_section(t, image)[0]
    with pytest.raises(NotASection):
        push_section(m, Assignment({"d": (1,), "a": (0,), "b": (1,), "c": (2,)}))
    broken = Morphism("sheaf", s, t, along, {x: scalar(1) for x in "abcd"})
    assert not validate_morphism(broken).ok
    with pytest.raises(ArityMismatch):
        Morphism("sheaf", s, t, along, {x: scalar(1) for x in "abc"})


def test_alexandroff_extension_glues():
    s, t = alexandroff_presheaf(diamond())
    assert check_gluing(s, t).ok


@settings(max_examples=20)
@given(random_sheaves(max_size=4, max_dim=2))
def test_alexandroff_extension_glues_random(s):
    ext, t = alexandroff_presheaf(s)
    assert check_gluing(ext, t).ok


@settings(max_examples=60)
@given(random_sheaves())
def test_pullbacks_from_chains_commute(s):
    assert validate_commutativity(s).ok


@settings(max_examples=60)
@given(random_sheaves())
def test_section_space_basis_vectors_are_sections(s):
    sp = section_space(s)
    for a in sp.assignments():
        assert is_section(s, a) == (True, 0)
    assert sp.dim == find_sections(s, "linear").dim


@settings(max_examples=40)
@given(random_sheaves())
def test_local_section_bounds(s):
    # a global section is fixed by its values on the minimal elements
    low = list(s.base.minimal())
    assert section_space(s).dim <= section_space(s, low).dim
    # the maximal elements form an antichain: no conditions at all
    top = list(s.base.maximal())
    assert section_space(s, top).dim == sum(s.stalks[x].dim for x in top)


def test_rational_results_stay_exact():
    s = diamond((Fraction(1, 3), 1, 1, Fraction(1, 3)))
    res = find_sections(s, "linear")
    assert res.field == "exact"
    assert all(isinstance(v, Fraction) for a in res.assignments for vs in a.values.values() for v in vs)
