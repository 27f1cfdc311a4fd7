"""Command-line front end.

Exit status: 0 on success or a passing check, 1 when a check fails (not a
sheaf, gluing fails, broken morphism square), 2 on usage or input errors.
Reports are canonical JSON on standard output.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__
from . import io as sio
from .cohomology import cohomology_report, linearize
from .errors import SheafKitError
from .expr import seed_from_env
from .linalg import COMPLEX, RATIONAL, REAL
from .sheaf import (
    RESIDUAL_TOL,
    VALIDATION_TOL,
    Morphism,
    Sheaf,
    VecStalk,
    alexandroff_presheaf,
    check_gluing,
    find_sections,
    validate_commutativity,
    validate_morphism,
)
from .transport import SheafDiagram, limit_sheaf, pullback, pushforward

FIELD_NAMES = {"rational": RATIONAL, "real": REAL, "complex": COMPLEX}


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(sio.dumps(obj))


def _report(command: str, field: str, **extra) -> dict:
    out = {"command": command, "version": __version__, "field": field}
    out.update(extra)
    return out


def _exactness(s: Sheaf) -> str:
    return "exact" if s.field == RATIONAL else "approximate"


def _load(path: str, *kinds: str):
    data = sio.load_json(path)
    kind = sio.detect_kind(data)
    if kinds and kind not in kinds:
        raise UsageError(f"{path}: expected a {' or '.join(kinds)} document, got a {kind}")
    return sio.from_document(data)


def _convert(s: Sheaf, name: str | None) -> Sheaf:
    """Recast a linear sheaf over another field."""
    if name is None:
        return s
    fld = FIELD_NAMES[name]
    if not s.is_linear or any(getattr(st, "constraint", None) is not None for st in s.stalks.values()):
        raise UsageError("--field applies to linear sheaves with unconstrained stalks")
    if fld == RATIONAL and s.field != RATIONAL:
        raise UsageError("cannot recast approximate data as exact")
    stalks = {x: VecStalk(st.dim, fld, st.embedding.to_field(fld) if st.embedding is not None else None) for x, st in s.stalks.items()}
    return s.with_maps({k: m.to_field(fld) for k, m in s.given.items()}, stalks)


# commands -----------------------------------------------------------------------------

def cmd_validate(args) -> int:
    obj = _load(args.file, "sheaf", "morphism", "diagram")
    seed = seed_from_env()
    if isinstance(obj, Sheaf):
        rep = validate_commutativity(obj, args.tol, seed)
        _emit(_report("validate", _exactness(obj), kind="sheaf", seed=seed, **rep.to_json()))
        return 0 if rep.ok else 1
    if isinstance(obj, Morphism):
        rep = validate_morphism(obj, args.tol, seed)
        fld = "exact" if obj.source.field == obj.target.field == RATIONAL else "approximate"
        _emit(_report("validate", fld, kind="morphism", seed=seed, **rep.to_json()))
        return 0 if rep.ok else 1
    assert isinstance(obj, SheafDiagram)
    parts, ok = {}, True
    for a, n in obj.nodes.items():
        r = validate_commutativity(n, args.tol, seed)
        parts[f"node:{a}"] = r.to_json()
        ok &= r.ok
    for (a, b), m in obj.edges.items():
        if (a, b) in obj.base.covers:
            r = validate_morphism(m, args.tol, seed)
            parts[f"edge:{a}|{b}"] = r.to_json()
            ok &= r.ok
    exact = all(n.field == RATIONAL for n in obj.nodes.values())
    _emit(_report("validate", "exact" if exact else "approximate", kind="diagram", seed=seed, tol=args.tol, ok=ok, parts=parts))
    return 0 if ok else 1


def cmd_sections(args) -> int:
    s = _convert(_load(args.file, "sheaf"), args.field)
    support = args.support.split(",") if args.support else None
    seed = seed_from_env()
    res = find_sections(s, args.mode, support, args.tol, seed)
    body = {
        "mode": res.mode,
        "count": len(res.assignments),
        "complete": res.complete,
        "note": res.note,
        "tol": args.tol,
        "seed": seed,
        "sections": [sio.assignment_to_json(a)["values"] for a in res.assignments],
        "residuals": list(res.residuals),
    }
    if res.mode == "linear":
        body["dim"] = res.dim
    _emit(_report("sections", res.field, **body))
    return 0


def cmd_cohomology(args) -> int:
    s = _convert(_load(args.file, "sheaf"), args.field)
    rep = cohomology_report(s, args.k)
    _emit(_report("cohomology", rep.pop("field"), **rep))
    return 0


def cmd_linearize(args) -> int:
    s = _load(args.file, "sheaf")
    if not args.at:
        raise UsageError("linearize needs --at <assignment.json>")
    at = sio.assignment_from_json(sio.load_json(args.at), s, "at")
    _emit(sio.to_document(linearize(s, at, args.mode, args.tol)))
    return 0


def _ordermap(args):
    if not args.map:
        raise UsageError(f"{args.command} needs --map <ordermap.json>")
    return _load(args.map, "ordermap")


def cmd_pullback(args) -> int:
    s = _load(args.file, "sheaf")
    out, _ = pullback(s, _ordermap(args))
    _emit(sio.to_document(out))
    return 0


def cmd_pushforward(args) -> int:
    s = _load(args.file, "sheaf")
    out, _ = pushforward(s, _ordermap(args), preimage=args.preimage)
    _emit(sio.to_document(out))
    return 0


def cmd_limit(args) -> int:
    d = _load(args.file, "diagram")
    _emit(sio.to_document(limit_sheaf(d).sheaf))
    return 0


def cmd_glue_check(args) -> int:
    s = _load(args.file, "sheaf")
    if args.topology:
        t = _load(args.topology, "topology")
    else:
        s, t = alexandroff_presheaf(s)
    rep = check_gluing(s, t, args.tol)
    _emit(
        _report(
            "glue-check",
            _exactness(s),
            ok=rep.ok,
            tol=args.tol,
            checked=rep.checked,
            failures=rep.failures,
        )
    )
    return 0 if rep.ok else 1


def _number(text: str):
    try:
        return Fraction(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _exact_or_float(v):
    return int(v) if isinstance(v, Fraction) and v.denominator == 1 else v


def cmd_build(args) -> int:
    from . import models, systems

    what = args.model
    if what == "lorenz":
        obj = systems.explicit_solution_sheaf(systems.lorenz_system())
    elif what == "helmholtz":
        obj = models.helmholtz_stencil_sheaf((args.nx, args.ny), _exact_or_float(args.k))
    elif what == "marginal":
        cards = [int(c) for c in args.cards.split(",")]
        names = tuple(f"X{i + 1}" for i in range(len(cards)))
        obj, _ = models.marginalization_sheaf(models.RandomVariableSystem(names, cards), args.reduced)
    elif what == "alarm":
        obj, _ = models.graphical_model_sheaf(models.alarm_system())
    elif what == "string":
        obj = models.string_scattering_diagram(_exact_or_float(args.kminus), _exact_or_float(args.kplus))
    elif what == "grid":
        extent = [int(e) for e in args.extent.split(",")]
        grid = models.sampling_poset(args.dim, extent[0] if len(extent) == 1 else extent)
        obj = models.sampled_grid_sheaf(grid, args.samples)
    else:  # argparse restricts the choices
        raise UsageError(f"unknown model {what!r}")
    _emit(sio.to_document(obj))
    return 0


def cmd_format(args) -> int:
    sys.stdout.write(sio.canonical_text(args.file))
    return 0


# parser -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sheafkit", description="Sheaf models of multi-model systems.")
    p.add_argument("--version", action="version", version=f"sheafkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, func, help_text, file=True):
        sp = sub.add_parser(name, help=help_text)
        if file:
            sp.add_argument("file", help="input JSON document ('-' for stdin)")
        sp.set_defaults(func=func)
        return sp

    sp = cmd("validate", cmd_validate, "check a sheaf, morphism or diagram")
    sp.add_argument("--tol", type=float, default=VALIDATION_TOL)

    sp = cmd("sections", cmd_sections, "find sections")
    sp.add_argument("--mode", choices=("enumerate", "linear", "minimize"), default="linear")
    sp.add_argument("--tol", type=float, default=RESIDUAL_TOL)
    sp.add_argument("--support", help="comma-separated elements (default: all)")
    sp.add_argument("--field", choices=sorted(FIELD_NAMES))

    sp = cmd("cohomology", cmd_cohomology, "Betti numbers of a linear sheaf")
    sp.add_argument("--k", type=int, help="highest degree (default: poset height)")
    sp.add_argument("--field", choices=sorted(FIELD_NAMES))

    sp = cmd("linearize", cmd_linearize, "linearize about a global section")
    sp.add_argument("--at", help="assignment JSON")
    sp.add_argument("--mode", choices=("symbolic", "finite-diff"), default="symbolic")
    sp.add_argument("--tol", type=float, default=None)

    sp = cmd("pullback", cmd_pullback, "pull back along an order map")
    sp.add_argument("--map", help="order map JSON")

    sp = cmd("pushforward", cmd_pushforward, "push forward along an order map")
    sp.add_argument("--map", help="order map JSON")
    sp.add_argument("--mode", dest="preimage", choices=("star", "fiber"), default="star")

    cmd("limit", cmd_limit, "limit sheaf of a diagram")

    sp = cmd("glue-check", cmd_glue_check, "gluing axiom on a finite topology")
    sp.add_argument("--topology", help="topology JSON (default: Alexandroff topology of the base)")
    sp.add_argument("--tol", type=float, default=VALIDATION_TOL)

    cmd("format", cmd_format, "re-emit a document canonically")

    sp = cmd("build", cmd_build, "emit a model", file=False)
    sp.add_argument("model", choices=("lorenz", "helmholtz", "marginal", "alarm", "string", "grid"))
    sp.add_argument("--nx", type=int, default=4)
    sp.add_argument("--ny", type=int, default=4)
    sp.add_argument("--k", type=_number, default=Fraction(1))
    sp.add_argument("--cards", default="2,2,2")
    sp.add_argument("--reduced", action="store_true")
    sp.add_argument("--kminus", type=_number, default=Fraction(1))
    sp.add_argument("--kplus", type=_number, default=Fraction(2))
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--extent", default="3", help="cells per axis, e.g. 3 or 2,3")
    sp.add_argument("--samples", type=int, default=1)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SheafKitError, OSError) as err:
        info = {"error": type(err).__name__, "message": str(err), "version": __version__}
        for attr in ("field", "line", "column"):
            if getattr(err, attr, None) is not None:
                info[attr] = getattr(err, attr)
        sys.stderr.write(sio.dumps(info))
        return 2


if __name__ == "__main__":
    sys.exit(main())
