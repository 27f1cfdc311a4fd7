"""Cochain complexes of linear sheaves, Betti numbers, and linearization
of nonlinear sheaves about a global section."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import linalg
from .errors import DivideByZero, DomainError, ModeUnsupported, NonDifferentiable, NotASection, NotLinear
from .expr import ExprMap, jacobian
from .linalg import RATIONAL, REAL, Matrix
from .poset import enumerate_chains
from .sheaf import Assignment, SetStalk, Sheaf, VecStalk, is_section, sheaf_from_working

Chain = tuple


def _require_linear(s: Sheaf) -> None:
    if not s.is_linear:
        raise NotLinear("cohomology needs vector stalks and matrix maps; linearize first")


@dataclass
class CochainComplex:
    """Chains per degree, block offsets into each cochain space, and the
    coboundary matrices ``d[k]: C^k -> C^{k+1}``."""

    chains: list[list[Chain]]
    offsets: list[dict[Chain, int]]
    dims: list[int]
    d: list[Matrix]
    field: str

    @property
    def top(self) -> int:
        return len(self.chains) - 1

    def exactness(self) -> str:
        return "exact" if self.field == RATIONAL else "approximate"


def cochain_dims(s: Sheaf, upto: int | None = None) -> list[int]:
    _require_linear(s)
    h = s.work.height if len(s.base) else -1
    top = h if upto is None else upto
    return [sum(s.stalks[c[-1]].dim for c in enumerate_chains(s.work, k)) for k in range(top + 1)]


def _chain_index(s: Sheaf, k: int) -> tuple[list[Chain], dict[Chain, int], int]:
    chains = enumerate_chains(s.work, k) if len(s.base) else []
    offs, total = {}, 0
    for c in chains:
        offs[c] = total
        total += s.stalks[c[-1]].dim
    return chains, offs, total


def coboundary(s: Sheaf, k: int) -> Matrix:
    """``d^k``; the face dropping ``a_i`` (i <= k) enters with sign (-1)^i,
    the face dropping the top element is carried along S(a_k < a_{k+1})."""
    _require_linear(s)
    if k < 0:
        raise ValueError("degree must be non-negative")
    src, src_off, n = _chain_index(s, k)
    dst, dst_off, m = _chain_index(s, k + 1)
    fld = s.field
    blocks = []
    for c in dst:
        r = dst_off[c]
        top = c[-1]
        for i in range(k + 1):
            face = c[:i] + c[i + 1 :]
            eye = Matrix.identity(s.stalks[top].dim, fld)
            blocks.append((r, src_off[face], eye if i % 2 == 0 else -eye))
        face = c[:-1]
        restr = s.map(c[-2], top).to_field(fld)
        blocks.append((r, src_off[face], restr if (k + 1) % 2 == 0 else -restr))
    return linalg.block_matrix(m, n, blocks, fld)


def cochain_complex(s: Sheaf, upto: int | None = None) -> CochainComplex:
    _require_linear(s)
    h = s.work.height if len(s.base) else 0
    top = h if upto is None else upto
    chains, offsets, dims, ds = [], [], [], []
    for k in range(top + 1):
        c, o, n = _chain_index(s, k)
        chains.append(c)
        offsets.append(o)
        dims.append(n)
        ds.append(coboundary(s, k))
    return CochainComplex(chains, offsets, dims, ds, s.field)


def betti(s: Sheaf, k: int) -> int:
    """dim ker d^k - rank d^{k-1}."""
    dk = coboundary(s, k)
    kernel = dk.cols - linalg.rank(dk)
    if k == 0:
        return kernel
    return kernel - linalg.rank(coboundary(s, k - 1))


def betti_numbers(s: Sheaf, upto: int | None = None) -> list[int]:
    _require_linear(s)
    h = s.work.height if len(s.base) else 0
    top = h if upto is None else upto
    ranks = [linalg.rank(coboundary(s, k)) for k in range(top + 1)]
    dims = [sum(s.stalks[c[-1]].dim for c in enumerate_chains(s.work, k)) if len(s.base) else 0 for k in range(top + 1)]
    return [dims[k] - ranks[k] - (ranks[k - 1] if k else 0) for k in range(top + 1)]


def cohomology_report(s: Sheaf, upto: int | None = None) -> dict:
    b = betti_numbers(s, upto)
    return {
        "betti": b,
        "chain_dims": cochain_dims(s, len(b) - 1),
        "field": "exact" if s.field == RATIONAL else "approximate",
    }


def restricted_betti(s: Sheaf, subset: Iterable[str], upto: int | None = None) -> list[int]:
    """Betti numbers of the sheaf restricted to the induced subposet."""
    return betti_numbers(s.restrict(subset), upto)


# linearization ---------------------------------------------------------------------

def _tangent_basis(st: VecStalk, point) -> Matrix | None:
    """Columns spanning the tangent space of a constrained stalk, or None
    when the stalk is a whole vector space."""
    if st.constraint is None:
        return None
    c = st.constraint
    if c.matrix is not None:
        jac = c.matrix
    else:
        jac = Matrix(_jac(c.expr, point, "symbolic"), cols=st.dim)
    basis, _ = linalg.kernel_basis(jac)
    fld = jac.field
    if fld != RATIONAL:
        basis = linalg.orthonormalize(basis)
    return Matrix.from_columns(basis, st.dim, fld) if basis else Matrix.zeros(st.dim, 0, fld)


def _jac(m: ExprMap, point, mode: str) -> list[list]:
    try:
        return jacobian(m, point, "symbolic" if mode == "symbolic" else "finite-diff")
    except (DivideByZero, DomainError, ZeroDivisionError) as err:
        raise NonDifferentiable(f"derivative undefined at {tuple(point)}: {err}") from None


def linearize(s: Sheaf, at: Assignment, mode: str = "symbolic", tol: float | None = None) -> Sheaf:
    """Replace stalks by tangent spaces at ``at`` and maps by Jacobians."""
    if mode not in ("symbolic", "finite-diff"):
        raise ModeUnsupported(f"unknown differentiation mode {mode!r}")
    if set(at.values) != set(s.base.elements):
        raise NotASection("linearization needs a global section")
    ok, r = is_section(s, at, tol)
    if not ok:
        raise NotASection(f"not a section (residual {r:.3g})")
    tangents = {}
    for x, st in s.stalks.items():
        if isinstance(st, SetStalk):
            raise ModeUnsupported("finite-set stalks have no tangent spaces")
        tangents[x] = _tangent_basis(st, at.values[x])
    jacs = {}
    for (x, y), m in s.given.items():
        if isinstance(m, Matrix):
            j = m
        elif isinstance(m, ExprMap):
            j = Matrix(_jac(m, at.values[x], mode), cols=s.stalks[x].dim) if m.outputs else Matrix.zeros(0, s.stalks[x].dim)
        else:
            raise ModeUnsupported("table maps cannot be linearized")
        jacs[(x, y)] = j
    fields = [s.stalks[x].field for x in s.stalks] + [j.field for j in jacs.values()]
    fields += [t.field for t in tangents.values() if t is not None]
    fld = linalg.promote(*fields) if fields else RATIONAL
    if mode == "finite-diff" and fld == RATIONAL:
        fld = REAL
    stalks = {
        x: VecStalk(s.stalks[x].dim, fld) if t is None else VecStalk(t.cols, fld, t.to_field(fld))
        for x, t in tangents.items()
    }
    wmaps = {}
    for (x, y), j in jacs.items():
        j = j.to_field(fld)
        tx, ty = tangents[x], tangents[y]
        if tx is not None:
            j = j @ tx.to_field(fld)
        if ty is not None:
            ty = ty.to_field(fld)
            if fld == RATIONAL:
                j = linalg.solve_matrix(ty, j)
            else:
                j = ty.H @ j
        wmaps[(x, y)] = j
    return sheaf_from_working(s.base, stalks, wmaps, s.orientation)


def zero_section(s: Sheaf) -> Assignment:
    return Assignment({x: tuple(0 for _ in range(st.dim)) for x, st in s.stalks.items()})


def numeric_rank_gap(m: Matrix) -> float:
    """Smallest nonzero singular value over the largest (diagnostic only)."""
    if m.rows == 0 or m.cols == 0:
        return 1.0
    sv = np.linalg.svd(m.to_numpy(), compute_uv=False)
    nz = sv[sv > linalg.RANK_TOL * max(1.0, sv[0])]
    return float(nz[-1] / sv[0]) if len(nz) else 0.0
