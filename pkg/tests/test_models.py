import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafkit import linalg, models
from sheafkit.cohomology import betti_numbers
from sheafkit.errors import BadStencil, ExtentTooSmall, IndexOutOfRange, NonStochastic, ShapeMismatch, ZeroWavenumber
from sheafkit.expr import ExprMap
from sheafkit.linalg import Matrix
from sheafkit.sheaf import find_sections, is_section, section_space, validate_commutativity
from sheafkit.transport import pushforward


# grids ----------------------------------------------------------------------------------

def test_one_dimensional_grid():
    g = models.sampling_poset(1, 3)
    assert g.cells == ["(0,1)", "(1,2)", "(2,3)"]
    assert g.overlaps == ["(0,2)", "(1,3)"]
    assert len(g.poset.covers) == 4
    assert g.poset.lt("(0,2)", "(1,2)")


def test_two_dimensional_grid_and_sheaf():
    g = models.sampling_poset(2, 2)
    assert len(g.cells) == 4 and len(g.overlaps) == 4
    s = models.sampled_grid_sheaf(g, 2)
    assert s.stalks["(0,1)x(0,1)"].dim == 9
    assert s.stalks["(0,2)x(0,1)"].dim == 15
    assert validate_commutativity(s).ok


def test_grid_extent_checked():
    with pytest.raises(ExtentTooSmall):
        models.sampling_poset(1, 1)
    with pytest.raises(ShapeMismatch):
        models.sampling_poset(2, (3,))


def test_one_dimensional_grid_sections_are_point_values():
    s = models.sampled_grid_sheaf(models.sampling_poset(1, 4), 1)
    # one value per lattice point 0..4
    assert section_space(s).dim == 5


# ODE --------------------------------------------------------------------------------------

def test_forward_stencil_is_first_order():
    f = ExprMap.from_strings(["u"], ["u"])
    u = ExprMap.from_strings(["t"], ["t^2"])
    _, ode = models.ode_discretization(f, 1, Fraction(1, 10), 5, "forward")
    # (t+h)^2 - t^2 over h is 2t + h: error exactly h
    assert ode.residual(u) == Fraction(1, 10)


def test_exact_solution_of_linear_ode_is_a_section():
    f = ExprMap.from_strings(["u"], ["0*u + 3"])
    s, ode = models.ode_discretization(f, 1, Fraction(1, 4), 6)
    a = ode.assignment(ExprMap.from_strings(["t"], ["3*t + 1"]))
    assert is_section(s, a) == (True, 0)
    bad = ode.assignment(ExprMap.from_strings(["t"], ["t^2"]))
    assert not is_section(s, bad)[0]


def test_ode_arguments_checked():
    f = ExprMap.from_strings(["u"], ["u"])
    with pytest.raises(BadStencil):
        models.ode_discretization(f, 1, 0, 5)
    with pytest.raises(BadStencil):
        models.ode_discretization(f, 1, 1, 2)
    with pytest.raises(BadStencil):
        models.ode_discretization(f, 1, 1, 5, "backward")
    with pytest.raises(ShapeMismatch):
        models.ode_discretization(f, 2, 1, 5)


def test_two_dimensional_ode():
    rot = ExprMap.from_strings(["p", "q"], ["-q", "p"])
    s, ode = models.ode_discretization(rot, 2, 0.05, 20)
    u = ExprMap.from_strings(["t"], ["cos(t)", "sin(t)"])
    assert ode.residual(u) < 1e-3
    assert validate_commutativity(s).ok


# Helmholtz ----------------------------------------------------------------------------------

def test_laplace_stencil_checks_length():
    with pytest.raises(BadStencil):
        models.laplace_stencil([1, 2, 3, 4])
    assert models.laplace_stencil([0, 1, 1]) == 1


def test_helmholtz_needs_interior():
    with pytest.raises(ExtentTooSmall):
        models.helmholtz_stencil_sheaf((2, 5))


def test_helmholtz_small_grid_dimension():
    # 3x3: 9 values of v, one interior u; two independent equations there
    s = models.helmholtz_stencil_sheaf((3, 3), 2)
    assert section_space(s).dim == 9 + 1 - 2


def test_helmholtz_float_wavenumber():
    s = models.helmholtz_stencil_sheaf((4, 4), 0.5)
    assert s.field == linalg.REAL
    assert betti_numbers(s, 0)[0] == betti_numbers(models.helmholtz_stencil_sheaf((4, 4), Fraction(1, 2)), 0)[0]


# heat ---------------------------------------------------------------------------------------

def test_heat_system_sheaf_validates():
    from sheafkit.systems import explicit_solution_sheaf

    assert validate_commutativity(explicit_solution_sheaf(models.heat_system(Fraction(1, 2)))).ok


# splines ------------------------------------------------------------------------------------

def test_monomials_and_truncation():
    assert models.monomials(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    t = models.truncation_matrix(2, 2)
    assert t.shape == (3, 6)


def test_spline_sheaf_dims():
    s = models.spline_dual_sheaf(3, 1, 2)
    assert s.stalks["U0"].dim == 3 and s.stalks["U0^U1"].dim == 2
    assert validate_commutativity(s).ok
    # three quadratics agreeing to first order on two overlaps
    assert section_space(s).dim == 3 * 3 - 2 * 2


def test_spline_overlap_checked():
    with pytest.raises(IndexOutOfRange):
        models.spline_dual_sheaf(2, overlaps=[(0, 2)])


# marginalization ------------------------------------------------------------------------------

def test_marginalization_index_checked():
    with pytest.raises(IndexOutOfRange):
        models.marginalization_matrix((2, 2), 3)


def test_cpt_must_be_stochastic():
    with pytest.raises(NonStochastic):
        models.RandomVariableSystem(("A", "B"), (2, 2), (models.CPT(("B",), ("A",), Matrix([[1, 0], [1, 1]])),))


def test_conditional_matrix_reproduces_joint():
    cpt = models.CPT(("B",), ("A",), Matrix([[Fraction(1, 4), Fraction(2, 3)], [Fraction(3, 4), Fraction(1, 3)]]))
    sysm = models.RandomVariableSystem(("A", "B"), (2, 2), (cpt,))
    lmat, big, small = models.conditional_matrix(sysm, cpt)
    assert big == ("A", "B") and small == ("A",)
    joint = lmat.apply((Fraction(1, 2), Fraction(1, 2)))
    assert joint == (Fraction(1, 8), Fraction(3, 8), Fraction(1, 3), Fraction(1, 6))
    # and marginalizing the joint back over B gives P(A)
    assert models.marginalization_matrix((2, 2), 2).apply(joint) == (Fraction(1, 2), Fraction(1, 2))


def test_alarm_model():
    s, collapse = models.graphical_model_sheaf(models.alarm_system())
    assert len(s.base) == 109
    assert validate_commutativity(s).ok
    pushed, _ = pushforward(s, collapse)
    assert section_space(pushed).dim == section_space(s).dim


def test_fiber_cohomology_on_marginal_system():
    sysm = models.RandomVariableSystem(("X1", "X2"), (2, 2))
    full, _ = models.marginalization_sheaf(sysm)
    _, collapse = models.marginalization_sheaf(sysm, True)
    rep = models.fiber_cohomology(full, collapse)
    assert rep["condition_holds"]
    assert rep["fibers"]["X1,X2"] == [4, 0]  # the joint itself, through identities


@st.composite
def _cards(draw):
    return draw(st.sampled_from([(2, 2, 2), (2, 3, 2), (3, 2), (2, 2, 3, 2)]))


@given(_cards(), st.data())
def test_marginalization_preserves_total_mass(cards, data):
    j = data.draw(st.integers(1, len(cards)))
    m = models.marginalization_matrix(cards, j)
    # every column holds exactly one 1, so column sums are 1
    assert all(sum(col) == 1 for col in zip(*m.data))
    n = math.prod(cards)
    raw = data.draw(st.lists(st.integers(0, 9), min_size=n, max_size=n).filter(any))
    p = [Fraction(x, sum(raw)) for x in raw]
    assert sum(m.apply(p)) == 1


@given(st.sampled_from([(2, 2, 2), (2, 3, 2)]), st.data())
def test_marginalization_order_independent(cards, data):
    i, j = sorted(data.draw(st.lists(st.integers(1, 3), min_size=2, max_size=2, unique=True)))
    # out j then i, versus out i then (j - 1) in the shortened list
    a = models.marginalization_matrix(cards[:j - 1] + cards[j:], i) @ models.marginalization_matrix(cards, j)
    rest = cards[:i - 1] + cards[i:]
    b = models.marginalization_matrix(rest, j - 1) @ models.marginalization_matrix(cards, i)
    assert a == b


@settings(max_examples=30)
@given(st.sampled_from([(2, 2), (2, 3), (3, 2), (2, 2, 2)]))
def test_reduced_sections_are_joint_distributions(cards):
    names = tuple(f"X{i + 1}" for i in range(len(cards)))
    red, _ = models.marginalization_sheaf(models.RandomVariableSystem(names, cards), True)
    assert section_space(red).dim == math.prod(cards)


# string ---------------------------------------------------------------------------------------

def test_zero_wavenumber_rejected():
    with pytest.raises(ZeroWavenumber):
        models.string_scattering_diagram(0, 1)
    with pytest.raises(ZeroWavenumber):
        models.transfer_matrix(1, 0)


@given(st.floats(0.1, 5), st.floats(0.1, 5))
def test_transfer_matches_continuity(km, kp):
    t = models.transfer_matrix(km, kp).to_numpy()
    wm = np.array([[1, 1], [1j * km, -1j * km]])
    wp = np.array([[1, 1], [1j * kp, -1j * kp]])
    assert np.allclose(wp @ t, wm)


def test_string_limit_validates():
    from sheafkit.transport import limit_sheaf

    lim = limit_sheaf(models.string_scattering_diagram(1, 3))
    assert validate_commutativity(lim.sheaf).ok
    assert find_sections(lim.sheaf, "linear").dim == 2
