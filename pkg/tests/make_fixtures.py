"""Regenerate the JSON files in tests/fixtures.

Run from the repository root: ``python3 tests/make_fixtures.py``.
The files are committed; tests read them and check canonical round-trips.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from helpers import FIXTURES, T1, T2, diamond, identity_presheaf  # noqa: E402

from sheafkit import io as sio  # noqa: E402
from sheafkit import models, systems  # noqa: E402
from sheafkit.expr import ExprMap  # noqa: E402
from sheafkit.poset import OrderMap, Poset  # noqa: E402
from sheafkit.sheaf import Assignment, SetStalk, Sheaf, VecStalk  # noqa: E402


def write(name: str, obj) -> None:
    doc = obj if isinstance(obj, dict) else sio.to_document(obj)
    (FIXTURES / name).write_text(sio.dumps(doc))


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    good = diamond()
    write("diamond.json", good)
    write("diamond_bad.json", diamond((1, 1, 1, -1)))
    write("diamond_section.json", sio.assignment_to_json(Assignment({"d": (1,), "a": (2,), "b": (1,), "c": (2,)})))
    point = Poset(["*"], [])
    write("to_point.json", OrderMap(good.base, point, {x: "*" for x in good.base}))

    anti = Poset(["p", "q"], [])
    write("antichain01.json", Sheaf(anti, {"p": SetStalk((0, 1)), "q": SetStalk((0, 1))}, {}))

    line = Poset(["u", "v"], [("u", "v")])
    sq = Sheaf(line, {"u": VecStalk(1), "v": VecStalk(1)}, {("u", "v"): ExprMap.from_strings(["u"], ["u^2"])})
    write("square.json", sq)
    write("square_at.json", sio.assignment_to_json(Assignment({"u": (3,), "v": (9,)})))

    for tag, opens in (("t1", T1), ("t2", T2)):
        s, t = identity_presheaf(opens)
        write(f"{tag}_presheaf.json", s)
        write(f"{tag}.json", t)
    write("alexandroff_diamond_topology.json", _alex(good))

    write("string.json", models.string_scattering_diagram(1, 2))
    write("lorenz.json", systems.explicit_solution_sheaf(systems.lorenz_system()))
    red, _ = models.marginalization_sheaf(models.RandomVariableSystem(("X1", "X2", "X3"), (2, 2, 2)), True)
    write("marginal_reduced.json", red)
    write("grid_2x2.json", models.sampled_grid_sheaf(models.sampling_poset(2, 2)))
    write("helmholtz_4x4.json", models.helmholtz_stencil_sheaf((4, 4), Fraction(1, 2)))
    write("spline_3_k2.json", models.spline_dual_sheaf(3, 1, 2))
    write("circle_paraboloid.json", systems.solution_sheaf(systems.circle_paraboloid_system()))
    write("stoichiometry.json", systems.solution_sheaf(systems.stoichiometry_system()))


def _alex(s):
    from sheafkit.sheaf import alexandroff_presheaf

    return alexandroff_presheaf(s)[1]


if __name__ == "__main__":
    main()
