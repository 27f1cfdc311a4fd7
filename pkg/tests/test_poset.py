import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import diamond, diamond_poset, monotone_into, posets

from sheafkit.errors import CycleDetected, NotOrderPreserving, TopologyError, UnknownElement
from sheafkit.poset import (
    FiniteTopology,
    OrderMap,
    Poset,
    alexandroff_opens,
    alexandroff_topology,
    check_order_preserving,
    dual_poset,
    enumerate_chains,
    intersection_lattice,
    open_set_poset,
    subset_id,
)
from sheafkit.transport import pullback


def test_diamond_covers_and_closure():
    p = diamond_poset()
    assert p.covers == (("a", "c"), ("b", "c"), ("d", "a"), ("d", "b"))
    assert p.leq("d", "c") and not p.leq("a", "b")
    assert p.up("a") == {"a", "c"}
    assert p.down("c") == set("abcd")
    assert p.height == 2
    assert sorted(p.minimal()) == ["d"] and sorted(p.maximal()) == ["c"]


def test_redundant_pairs_are_reduced():
    p = Poset(["x", "y", "z"], [("x", "y"), ("y", "z"), ("x", "z")])
    assert p.covers == (("x", "y"), ("y", "z"))
    assert p.lt("x", "z")


def test_cycle_rejected():
    with pytest.raises(CycleDetected):
        Poset(["x", "y"], [("x", "y"), ("y", "x")])


def test_unknown_and_duplicate_elements():
    with pytest.raises(UnknownElement):
        Poset(["x"], [("x", "q")])
    with pytest.raises(ValueError):
        Poset(["x", "x"])
    with pytest.raises(UnknownElement):
        diamond_poset().up("zz")


def test_chains_of_diamond():
    p = diamond_poset()
    assert len(enumerate_chains(p, 0)) == 4
    assert enumerate_chains(p, 1) == [("a", "c"), ("b", "c"), ("d", "a"), ("d", "b"), ("d", "c")]
    assert enumerate_chains(p, 2) == [("d", "a", "c"), ("d", "b", "c")]
    assert enumerate_chains(p, 3) == []


def test_dual_reverses_order():
    p = diamond_poset()
    q = dual_poset(p)
    assert all(q.leq(b, a) for a, b in p.relations())
    assert dual_poset(q) == p


def test_order_map_checks():
    p = diamond_poset()
    pt = Poset(["*"])
    f = OrderMap(p, pt, {x: "*" for x in p})
    assert f.fiber("*") == ["a", "b", "c", "d"]
    assert check_order_preserving(f).ok
    two = Poset(["lo", "hi"], [("lo", "hi")])
    bad = OrderMap(p, two, {"a": "hi", "b": "lo", "c": "lo", "d": "lo"})
    assert not check_order_preserving(bad).ok
    sub = diamond().restrict(["a", "c"])
    with pytest.raises(NotOrderPreserving):
        pullback(sub, OrderMap(two, sub.base, {"lo": "c", "hi": "a"}))


def test_subset_id_sorted():
    assert subset_id({"c", "a"}) == "{a,c}"
    assert subset_id(()) == "{}"


def test_topology_axioms():
    FiniteTopology("ab", [set(), {"a"}, {"a", "b"}])
    with pytest.raises(TopologyError):
        FiniteTopology("ab", [{"a"}, {"a", "b"}])
    with pytest.raises(TopologyError):
        FiniteTopology("abc", [set(), {"a"}, {"b"}, {"a", "b", "c"}])
    # without the union requirement the same family is accepted
    FiniteTopology("abc", [set(), {"a"}, {"b"}, {"a", "b", "c"}], require_unions=False)
    with pytest.raises(TopologyError):
        FiniteTopology("abc", [set(), {"a", "b"}, {"b", "c"}, {"a", "b", "c"}], require_unions=False)


def test_alexandroff_opens_of_diamond():
    opens = alexandroff_opens(diamond_poset())
    assert frozenset({"c"}) in opens and frozenset({"a"}) not in opens
    assert len(opens) == 6
    t = alexandroff_topology(diamond_poset())
    assert len(t.opens) == 6


def test_open_set_poset_orientation():
    t = FiniteTopology("ab", [set(), {"a"}, {"a", "b"}])
    up = open_set_poset(t)
    down = open_set_poset(t, reverse=True)
    assert up.leq("{a}", "{a,b}") and down.leq("{a,b}", "{a}")


def test_intersection_lattice_closes():
    lat = intersection_lattice([{1, 2}, {2, 3}])
    assert set(lat.subsets) == {"{1,2}", "{2,3}", "{2}", "{1,2,3}"}


@given(posets(max_size=7))
def test_linear_extension_respects_order(p):
    pos = {x: i for i, x in enumerate(p.linear_extension())}
    assert all(pos[a] < pos[b] for a, b in p.relations() if a != b)


@given(posets(max_size=7))
def test_covers_generate_the_same_order(p):
    q = Poset(p.elements, p.covers)
    assert q == p
    assert all(q.leq(a, b) == p.leq(a, b) for a in p for b in p)


@given(posets(max_size=7))
def test_json_round_trip(p):
    assert Poset.from_json(p.to_json()) == p


@given(st.data())
def test_composition_of_monotone_maps_is_monotone(data):
    z = data.draw(posets(max_size=4))
    g = data.draw(monotone_into(z))
    f = data.draw(monotone_into(g.source))
    assert check_order_preserving(g.compose(f)).ok
