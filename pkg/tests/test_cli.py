import json

import pytest

from helpers import FIXTURES

from sheafkit import io as sio
from sheafkit.cli import main
from sheafkit.linalg import REAL
from sheafkit.sheaf import Sheaf, VecStalk, section_space, validate_commutativity


@pytest.fixture(autouse=True)
def _in_fixtures(monkeypatch):
    monkeypatch.chdir(FIXTURES)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert "sheafkit" in capsys.readouterr().out


def test_sections_linear_with_support(capsys):
    code, out, _ = run(capsys, "sections", "diamond.json", "--support", "a,b")
    rep = json.loads(out)
    assert code == 0 and rep["dim"] == 2 and rep["field"] == "exact"


def test_sections_over_reals(capsys):
    code, out, _ = run(capsys, "sections", "diamond.json", "--field", "real")
    rep = json.loads(out)
    assert rep["dim"] == 1 and rep["field"] == "approximate"


def test_sections_mode_mismatch_is_input_error(capsys):
    code, _, err = run(capsys, "sections", "square.json", "--mode", "linear")
    assert code == 2 and json.loads(err)["error"] == "ModeUnsupported"


def test_cohomology_default_degrees(capsys):
    code, out, _ = run(capsys, "cohomology", "diamond.json")
    rep = json.loads(out)
    assert rep["betti"] == [1, 0, 0] and rep["chain_dims"] == [4, 5, 2]


def test_linearize_square(capsys):
    code, out, _ = run(capsys, "linearize", "square.json", "--at", "square_at.json")
    lin = sio.from_document(json.loads(out))
    assert code == 0 and lin.map("u", "v").data == ((6,),)
    code, _, err = run(capsys, "linearize", "square.json")
    assert code == 2 and "--at" in json.loads(err)["message"]


def test_pullback_and_pushforward_to_point(capsys, tmp_path):
    code, out, _ = run(capsys, "pushforward", "diamond.json", "--map", "to_point.json")
    pushed = sio.from_document(json.loads(out))
    assert code == 0 and pushed.stalks["*"].dim == 1
    code, out, _ = run(capsys, "pushforward", "diamond.json", "--map", "to_point.json", "--mode", "fiber")
    assert code == 0 and sio.from_document(json.loads(out)).stalks["*"].dim == 1
    # pull the point sheaf back: the constant line on the diamond
    (tmp_path / "point.json").write_text(out)
    code, out, _ = run(capsys, "pullback", str(tmp_path / "point.json"), "--map", "to_point.json")
    back = sio.from_document(json.loads(out))
    assert code == 0 and section_space(back).dim == 1


def test_wrong_document_kind(capsys):
    code, _, err = run(capsys, "pullback", "diamond.json", "--map", "diamond.json")
    assert code == 2 and "ordermap" in json.loads(err)["message"]


def test_limit_of_string(capsys):
    code, out, _ = run(capsys, "limit", "string.json")
    lim = sio.from_document(json.loads(out))
    assert code == 0 and lim.stalks["knot"].dim == 2


def test_validate_diagram_and_fixture_sheaves(capsys):
    code, out, _ = run(capsys, "validate", "string.json")
    assert code == 0 and json.loads(out)["kind"] == "diagram"
    for name in ("helmholtz_4x4.json", "spline_3_k2.json", "marginal_reduced.json", "grid_2x2.json", "lorenz.json"):
        code, out, _ = run(capsys, "validate", name)
        assert code == 0, name


def test_glue_check_default_topology(capsys):
    code, out, _ = run(capsys, "glue-check", "diamond.json")
    rep = json.loads(out)
    assert code == 0 and rep["ok"] and rep["checked"] > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "lorenz"],
        ["build", "helmholtz", "--nx", "3", "--ny", "4", "--k", "1/2"],
        ["build", "helmholtz", "--k", "0.5"],
        ["build", "marginal", "--cards", "2,3", "--reduced"],
        ["build", "grid", "--dim", "2", "--extent", "2,3", "--samples", "2"],
    ],
)
def test_build_emits_valid_sheaves(capsys, argv):
    code, out, _ = run(capsys, *argv)
    s = sio.from_document(json.loads(out))
    assert code == 0 and isinstance(s, Sheaf)
    assert validate_commutativity(s).ok


def test_build_string(capsys):
    code, out, _ = run(capsys, "build", "string", "--kminus", "2", "--kplus", "1/3")
    doc = json.loads(out)
    assert code == 0 and sio.detect_kind(doc) == "diagram"


def test_build_rejects_small_grid(capsys):
    code, _, err = run(capsys, "build", "helmholtz", "--nx", "2")
    assert code == 2 and json.loads(err)["error"] == "ExtentTooSmall"


def test_bad_number_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["build", "string", "--kminus", "abc"])
    assert err.value.code == 2


def test_recast_refuses_float_to_exact(capsys, tmp_path):
    s = sio.from_document(json.loads((FIXTURES / "diamond.json").read_text()))
    flt = Sheaf(s.base, {x: VecStalk(1, REAL) for x in s.stalks}, {k: m.to_field(REAL) for k, m in s.given.items()})
    (tmp_path / "h.json").write_text(sio.dumps(sio.to_document(flt)))
    code, _, err = run(capsys, "sections", str(tmp_path / "h.json"), "--field", "rational")
    assert code == 2 and json.loads(err)["error"] == "UsageError"
