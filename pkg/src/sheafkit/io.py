"""JSON persistence with a canonical, byte-stable encoding.

Rationals are written as integers when integral and as ``"p/q"`` strings
otherwise, floats with 17 significant digits (always carrying a ``.`` or an
exponent so they reload as floats), complex numbers as ``[re, im]``.
"""

from __future__ import annotations

import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .errors import ParseError, SchemaError, SheafKitError
from .expr import ExprMap
from .linalg import FIELDS, Matrix
from .poset import FiniteTopology, OrderMap, Poset
from .sheaf import (
    Assignment,
    Constraint,
    Morphism,
    SetStalk,
    Sheaf,
    SheafMap,
    Table,
    VecStalk,
)


# canonical emitter -------------------------------------------------------------

def _float_text(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    t = "%.17g" % x
    if not any(c in t for c in ".en"):
        t += ".0"
    return t


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else json.dumps(str(v))
    if isinstance(v, float):
        return _float_text(v)
    if isinstance(v, complex):
        return f"[{_float_text(v.real)}, {_float_text(v.imag)}]"
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"cannot encode {type(v).__name__}")


def _flat(v) -> bool:
    return not isinstance(v, (dict, list, tuple)) or (
        isinstance(v, (list, tuple)) and all(not isinstance(x, (dict, list, tuple)) for x in v)
    )


def _emit(v, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(v, Mapping):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_emit(v[k], indent + 1)}" for k in sorted(v, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(_flat(x) and not isinstance(x, (list, tuple)) for x in v):
            return "[" + ", ".join(_scalar(x) for x in v) + "]"
        if all(isinstance(x, (list, tuple)) and _flat(x) for x in v):
            return "[\n" + ",\n".join(pad + _emit(x, indent + 1) for x in v) + "\n" + end + "]"
        return "[\n" + ",\n".join(pad + _emit(x, indent + 1) for x in v) + "\n" + end + "]"
    return _scalar(v)


def dumps(obj: Any) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return _emit(obj, 0) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, err.lineno, err.colno) from None


def read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def load_json(path: str) -> Any:
    return loads(read_text(path))


def write_text(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# value encoding --------------------------------------------------------------------

def _need(data: Mapping, key: str, where: str):
    if not isinstance(data, Mapping):
        raise SchemaError(where, "expected an object")
    if key not in data:
        raise SchemaError(f"{where}.{key}", "missing")
    return data[key]


def label_to_json(v):
    if isinstance(v, tuple):
        return [label_to_json(x) for x in v]
    return v


def label_from_json(v):
    if isinstance(v, list):
        return tuple(label_from_json(x) for x in v)
    return v


def scalar_from_json(v, where: str):
    if isinstance(v, bool):
        raise SchemaError(where, "boolean is not a number")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            try:
                return float(v)
            except ValueError:
                raise SchemaError(where, f"not a number: {v!r}") from None
    if isinstance(v, list) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise SchemaError(where, f"not a number: {v!r}")


def value_to_json(v):
    if isinstance(v, tuple) and all(isinstance(c, (int, Fraction, float, complex)) and not isinstance(c, bool) for c in v):
        return [c if not isinstance(c, complex) else [c.real, c.imag] for c in v]
    return label_to_json(v)


def value_from_json(v, stalk, where: str):
    if isinstance(stalk, SetStalk):
        return label_from_json(v)
    if not isinstance(v, list):
        raise SchemaError(where, "vector value must be a list")
    return tuple(scalar_from_json(c, f"{where}[{i}]") for i, c in enumerate(v))


# stalks and maps ------------------------------------------------------------------

def stalk_to_json(st) -> dict:
    if isinstance(st, SetStalk):
        return {"kind": "set", "labels": [label_to_json(v) for v in st.labels]}
    out: dict = {"kind": "vec", "dim": st.dim, "field": st.field}
    if st.embedding is not None:
        out["embedding"] = st.embedding.to_json()
    if st.constraint is not None:
        c = st.constraint
        if c.expr is not None:
            out["constraint"] = c.expr.to_json()
        else:
            out["constraint"] = {
                "kind": "affine",
                "matrix": c.matrix.to_json(),
                "offset": [value_to_json((b,))[0] for b in c.offset],
            }
    return out


def stalk_from_json(data, where: str):
    kind = _need(data, "kind", where)
    if kind == "set":
        labels = _need(data, "labels", where)
        if not isinstance(labels, list):
            raise SchemaError(f"{where}.labels", "expected a list")
        try:
            return SetStalk(tuple(label_from_json(v) for v in labels))
        except (ValueError, TypeError) as err:
            raise SchemaError(f"{where}.labels", str(err)) from None
    if kind != "vec":
        raise SchemaError(f"{where}.kind", f"unknown stalk kind {kind!r}")
    dim = _need(data, "dim", where)
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 0:
        raise SchemaError(f"{where}.dim", "must be a non-negative integer")
    fld = data.get("field", "rational")
    if fld not in FIELDS:
        raise SchemaError(f"{where}.field", f"unknown field {fld!r}")
    emb = matrix_from_json(data["embedding"], f"{where}.embedding") if "embedding" in data else None
    con = None
    if "constraint" in data:
        cd = data["constraint"]
        ck = _need(cd, "kind", f"{where}.constraint")
        if ck == "expr":
            con = Constraint(expr=_expr_from_json(cd, f"{where}.constraint"))
        elif ck == "affine":
            a = matrix_from_json(_need(cd, "matrix", f"{where}.constraint"), f"{where}.constraint.matrix")
            off = tuple(scalar_from_json(v, f"{where}.constraint.offset") for v in cd.get("offset", [0] * a.rows))
            con = Constraint(matrix=a, offset=off)
        else:
            raise SchemaError(f"{where}.constraint.kind", f"unknown constraint kind {ck!r}")
    try:
        return VecStalk(dim, fld, emb, con)
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None


def matrix_from_json(data, where: str) -> Matrix:
    try:
        return Matrix.from_json(data)
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None
    except (KeyError, TypeError, ValueError, IndexError) as err:
        raise SchemaError(where, f"malformed matrix ({err})") from None


def _expr_from_json(data, where: str) -> ExprMap:
    ins = _need(data, "inputs", where)
    outs = _need(data, "outputs", where)
    try:
        return ExprMap.from_strings(ins, outs)
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None


def map_to_json(m: SheafMap) -> dict:
    if isinstance(m, Table):
        return {"kind": "table", "pairs": [[label_to_json(a), label_to_json(b)] for a, b in m.pairs]}
    return m.to_json()


def map_from_json(data, where: str) -> SheafMap:
    kind = _need(data, "kind", where)
    if kind == "table":
        pairs = _need(data, "pairs", where)
        try:
            return Table((label_from_json(a), label_from_json(b)) for a, b in pairs)
        except (ValueError, TypeError) as err:
            raise SchemaError(f"{where}.pairs", str(err)) from None
    if kind == "matrix":
        return matrix_from_json(data, where)
    if kind == "expr":
        return _expr_from_json(data, where)
    raise SchemaError(f"{where}.kind", f"unknown map kind {kind!r}")


# posets and friends ----------------------------------------------------------------

def poset_from_json(data, where: str = "base") -> Poset:
    elements = _need(data, "elements", where)
    if not isinstance(elements, list) or not all(isinstance(e, str) for e in elements):
        raise SchemaError(f"{where}.elements", "expected a list of strings")
    covers = data.get("covers", [])
    try:
        return Poset(elements, [tuple(c) for c in covers])
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None
    except (TypeError, ValueError) as err:
        raise SchemaError(f"{where}.covers", str(err)) from None


def ordermap_from_json(data, where: str = "map") -> OrderMap:
    src = poset_from_json(_need(data, "source", where), f"{where}.source")
    tgt = poset_from_json(_need(data, "target", where), f"{where}.target")
    mapping = dict(_need(data, "mapping", where))
    for x in src:
        if x not in mapping:
            raise SchemaError(f"{where}.mapping", f"undefined on {x!r}")
        if mapping[x] not in tgt:
            raise SchemaError(f"{where}.mapping.{x}", f"{mapping[x]!r} is not in the target")
    return OrderMap(src, tgt, mapping)


def topology_from_json(data, where: str = "topology") -> FiniteTopology:
    pts = _need(data, "points", where)
    opens = _need(data, "opens", where)
    return FiniteTopology(pts, opens, data.get("require_unions", True))


def _split_key(key: str, base: Poset, where: str) -> tuple[str, str]:
    options = []
    for i, ch in enumerate(key):
        if ch == "|" and key[:i] in base and key[i + 1 :] in base:
            options.append((key[:i], key[i + 1 :]))
    if len(options) != 1:
        raise SchemaError(f"{where}.{key}", "map key must be 'lo|hi' naming two base elements")
    return options[0]


# sheaves ----------------------------------------------------------------------------

def sheaf_to_json(s: Sheaf) -> dict:
    maps = {}
    for (x, y), m in s.given.items():
        lo, hi = (x, y) if s.orientation == "sheaf" else (y, x)
        maps[f"{lo}|{hi}"] = map_to_json(m)
    return {
        "base": s.base.to_json(),
        "orientation": s.orientation,
        "stalks": {x: stalk_to_json(st) for x, st in s.stalks.items()},
        "maps": maps,
    }


def sheaf_from_json(data, where: str = "sheaf") -> Sheaf:
    base = poset_from_json(_need(data, "base", where), f"{where}.base")
    orientation = data.get("orientation", "sheaf")
    if orientation not in ("sheaf", "dual"):
        raise SchemaError(f"{where}.orientation", f"must be 'sheaf' or 'dual', not {orientation!r}")
    raw_stalks = _need(data, "stalks", where)
    stalks = {x: stalk_from_json(v, f"{where}.stalks.{x}") for x, v in raw_stalks.items()}
    maps = {}
    for key, m in data.get("maps", {}).items():
        lo, hi = _split_key(key, base, f"{where}.maps")
        maps[(lo, hi)] = map_from_json(m, f"{where}.maps.{key}")
    try:
        return Sheaf(base, stalks, maps, orientation)
    except SheafKitError as err:
        msg = str(err)
        field = f"{where}.{msg.split(':')[0]}" if msg.startswith("maps.") else where
        raise SchemaError(field, msg) from None


def assignment_to_json(a: Assignment) -> dict:
    return {"values": {x: value_to_json(v) for x, v in a.values.items()}}


def assignment_from_json(data, s: Sheaf, where: str = "assignment") -> Assignment:
    vals = data.get("values", data) if isinstance(data, Mapping) else None
    if not isinstance(vals, Mapping):
        raise SchemaError(where, "expected an object of element values")
    out = {}
    for x, v in vals.items():
        if x not in s.base:
            raise SchemaError(f"{where}.values.{x}", "unknown element")
        out[x] = value_from_json(v, s.stalks[x], f"{where}.values.{x}")
    return Assignment(out)


def morphism_to_json(m: Morphism) -> dict:
    return {
        "kind": m.kind,
        "source": sheaf_to_json(m.source),
        "target": sheaf_to_json(m.target),
        "along": m.along.to_json(),
        "components": {x: map_to_json(c) for x, c in m.components.items()},
    }


def morphism_from_json(data, where: str = "morphism") -> Morphism:
    src = sheaf_from_json(_need(data, "source", where), f"{where}.source")
    tgt = sheaf_from_json(_need(data, "target", where), f"{where}.target")
    along = _along(data, tgt.base, src.base, f"{where}.along")
    comps = {x: map_from_json(c, f"{where}.components.{x}") for x, c in _need(data, "components", where).items()}
    try:
        return Morphism(_need(data, "kind", where), src, tgt, along, comps)
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None


def _along(data, source: Poset, target: Poset, where: str) -> OrderMap:
    raw = data.get("along", {})
    mapping = raw.get("mapping", raw) if isinstance(raw, Mapping) else None
    if not isinstance(mapping, Mapping):
        raise SchemaError(where, "expected an element mapping")
    for x in source:
        if x not in mapping or mapping[x] not in target:
            raise SchemaError(f"{where}.{x}", "mapping missing or outside the target poset")
    return OrderMap(source, target, {x: mapping[x] for x in source})


def diagram_to_json(d) -> dict:
    edges = {}
    for (a, b), m in d.edges.items():
        if (a, b) in d.base.covers:
            edges[f"{a}|{b}"] = {
                "along": {x: m.along(x) for x in m.target.base},
                "components": {x: map_to_json(c) for x, c in m.components.items()},
            }
    return {
        "base": d.base.to_json(),
        "nodes": {a: sheaf_to_json(n) for a, n in d.nodes.items()},
        "edges": edges,
    }


def diagram_from_json(data, where: str = "diagram"):
    from .transport import SheafDiagram

    base = poset_from_json(_need(data, "base", where), f"{where}.base")
    nodes = {a: sheaf_from_json(n, f"{where}.nodes.{a}") for a, n in _need(data, "nodes", where).items()}
    edges = {}
    for key, e in data.get("edges", {}).items():
        a, b = _split_key(key, base, f"{where}.edges")
        if a not in nodes or b not in nodes:
            raise SchemaError(f"{where}.edges.{key}", "edge between unknown nodes")
        along = _along(e, nodes[a].base, nodes[b].base, f"{where}.edges.{key}.along")
        comps = {x: map_from_json(c, f"{where}.edges.{key}.components.{x}") for x, c in _need(e, "components", f"{where}.edges.{key}").items()}
        try:
            edges[(a, b)] = Morphism("sheaf", nodes[b], nodes[a], along, comps)
        except SheafKitError as err:
            raise SchemaError(f"{where}.edges.{key}", str(err)) from None
    try:
        return SheafDiagram(base, nodes, edges)
    except SheafKitError as err:
        raise SchemaError(where, str(err)) from None


# documents ----------------------------------------------------------------------------

def detect_kind(data) -> str:
    if not isinstance(data, Mapping):
        raise SchemaError("document", "top level must be an object")
    if "nodes" in data:
        return "diagram"
    if "stalks" in data:
        return "sheaf"
    if "components" in data:
        return "morphism"
    if "mapping" in data:
        return "ordermap"
    if "opens" in data:
        return "topology"
    if "elements" in data:
        return "poset"
    if set(data) == {"values"}:
        return "assignment"
    raise SchemaError("document", "unrecognized document kind")


def from_document(data):
    """Build the object a document describes.  Assignments need a sheaf to
    be interpreted, so they come back as plain data."""
    kind = detect_kind(data)
    if kind == "assignment":
        return dict(data)
    return {
        "diagram": diagram_from_json,
        "sheaf": sheaf_from_json,
        "morphism": morphism_from_json,
        "ordermap": ordermap_from_json,
        "topology": topology_from_json,
        "poset": poset_from_json,
    }[kind](data)


def to_document(obj) -> dict:
    from .transport import SheafDiagram

    if isinstance(obj, Sheaf):
        return sheaf_to_json(obj)
    if isinstance(obj, SheafDiagram):
        return diagram_to_json(obj)
    if isinstance(obj, Morphism):
        return morphism_to_json(obj)
    if isinstance(obj, (OrderMap, FiniteTopology, Poset)):
        return obj.to_json()
    if isinstance(obj, Assignment):
        return assignment_to_json(obj)
    if isinstance(obj, Mapping) and detect_kind(obj) == "assignment":
        return dict(obj)
    raise TypeError(f"no document form for {type(obj).__name__}")


def load_sheaf(path: str) -> Sheaf:
    return sheaf_from_json(load_json(path))


def save_sheaf(s: Sheaf, path: str | None) -> None:
    write_text(dumps(sheaf_to_json(s)), path)


def canonical_text(path: str) -> str:
    """Load any document and re-emit it canonically."""
    return dumps(to_document(from_document(load_json(path))))
