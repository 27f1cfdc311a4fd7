"""Shared builders and hypothesis strategies for the test suite."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from hypothesis import strategies as st

from sheafkit.linalg import RATIONAL, Matrix
from sheafkit.poset import FiniteTopology, OrderMap, Poset, subset_id
from sheafkit.sheaf import Sheaf, VecStalk, build_sheaf

FIXTURES = Path(__file__).parent / "fixtures"


def scalar(v) -> Matrix:
    return Matrix([[v]])


def diamond_poset() -> Poset:
    return Poset(["a", "b", "c", "d"], [("d", "a"), ("d", "b"), ("a", "c"), ("b", "c")])


def diamond(maps=(2, 1, 1, 2)) -> Sheaf:
    """R at each of d < a, b < c with maps d<a, d<b, a<c, b<c scaling by ``maps``."""
    da, db, ac, bc = maps
    stalks = {x: VecStalk(1) for x in "abcd"}
    return build_sheaf(
        diamond_poset(),
        stalks,
        {("d", "a"): scalar(da), ("d", "b"): scalar(db), ("a", "c"): scalar(ac), ("b", "c"): scalar(bc)},
    )


def identity_presheaf(opens: list[set]) -> tuple[Sheaf, FiniteTopology]:
    """R on every nonempty open, the zero space on the empty one, identities
    between nonempty opens (maps run from larger to smaller)."""
    t = FiniteTopology({"a", "b", "c"}, opens, require_unions=False)
    names = {subset_id(o): frozenset(o) for o in opens}
    pairs = [(u, v) for u in names for v in names if u != v and names[v] < names[u]]
    p = Poset(list(names), pairs)
    stalks = {u: VecStalk(len(names[u]) and 1) for u in names}
    maps = {}
    for lo, hi in p.covers:
        maps[(lo, hi)] = Matrix.zeros(stalks[hi].dim, stalks[lo].dim) if not names[hi] else scalar(1)
    return Sheaf(p, stalks, maps), t


T1 = [set(), {"a", "b"}, {"c"}, {"a", "b", "c"}]
T2 = [set(), {"a"}, {"c"}, {"a", "b", "c"}]


# random data -----------------------------------------------------------------------

small_rationals = st.fractions(min_value=-3, max_value=3, max_denominator=3)


@st.composite
def posets(draw, max_size: int = 6, min_size: int = 1) -> Poset:
    n = draw(st.integers(min_size, max_size))
    names = [f"p{i}" for i in range(n)]
    pairs = []
    for j in range(n):
        for i in range(j):
            if draw(st.booleans()):
                pairs.append((names[i], names[j]))
    return Poset(names, pairs)


@st.composite
def matrices(draw, rows: int, cols: int) -> Matrix:
    return Matrix([[draw(small_rationals) for _ in range(cols)] for _ in range(rows)], RATIONAL, cols)


def _levels(p: Poset, bumps) -> dict[str, int]:
    """Monotone map to a chain: each element sits at or above its lower covers."""
    lower = {x: [] for x in p}
    for a, b in p.covers:
        lower[b].append(a)
    out = {}
    for x, bump in zip(p.linear_extension(), bumps):
        out[x] = max((out[y] for y in lower[x]), default=0) + bump
    return out


@st.composite
def chain_sheaves(draw, length: int, max_dim: int = 3) -> Sheaf:
    names = [f"c{i}" for i in range(length)]
    chain = Poset(names, [(names[i], names[i + 1]) for i in range(length - 1)])
    dims = [draw(st.integers(0, max_dim)) for _ in names]
    stalks = {c: VecStalk(d) for c, d in zip(names, dims)}
    maps = {(names[i], names[i + 1]): draw(matrices(dims[i + 1], dims[i])) for i in range(length - 1)}
    return Sheaf(chain, stalks, maps)


@st.composite
def random_sheaves(draw, max_size: int = 6, max_dim: int = 3) -> Sheaf:
    """A rational sheaf on a random poset, pulled back from a chain along a
    random monotone map; every such pullback is a genuine sheaf."""
    from sheafkit.transport import pullback

    p = draw(posets(max_size))
    bumps = [draw(st.integers(0, 1)) for _ in p]
    lv = _levels(p, bumps)
    chain = draw(chain_sheaves(max(lv.values()) + 1, max_dim))
    f = OrderMap(p, chain.base, {x: f"c{lv[x]}" for x in p})
    s, _ = pullback(chain, f)
    return s


@st.composite
def monotone_into(draw, target: Poset, max_size: int = 5) -> OrderMap:
    """A random poset X with an order-preserving map into ``target``.

    X's relations are a random subset of the pairs whose images are strictly
    related, closed transitively (so images stay strictly related).
    """
    n = draw(st.integers(1, max_size))
    names = [f"q{i}" for i in range(n)]
    tnames = list(target.elements)
    img = {x: draw(st.sampled_from(tnames)) for x in names}
    pairs = [(a, b) for a in names for b in names if a != b and target.lt(img[a], img[b]) and draw(st.booleans())]
    return OrderMap(Poset(names, pairs), target, img)


def as_fraction_rows(m: Matrix) -> list[list[Fraction]]:
    return [list(r) for r in m.data]
