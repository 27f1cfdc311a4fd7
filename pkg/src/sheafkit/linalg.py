"""Dense matrices over exact rationals, 64-bit reals or complex numbers.

Rational entries are :class:`fractions.Fraction` and never round.  Float
ranks use a relative pivot tolerance of ``1e-9 * max(1, max|a_ij|)``.
Elimination is plain row-major Gauss-Jordan, deterministic for a given
input.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import FieldMismatch, ShapeMismatch, SingularMatrix

RATIONAL, REAL, COMPLEX = "rational", "real", "complex"
FIELDS = (RATIONAL, REAL, COMPLEX)
RANK_TOL = 1e-9
RIDGE = 1e-12


def promote(*fields: str) -> str:
    """Smallest field containing all of ``fields``."""
    best = 0
    for f in fields:
        if f not in FIELDS:
            raise FieldMismatch(f"unknown field {f!r}")
        best = max(best, FIELDS.index(f))
    return FIELDS[best]


def field_of(x) -> str:
    if isinstance(x, bool):
        raise FieldMismatch("booleans are not scalars")
    if isinstance(x, (int, Fraction)):
        return RATIONAL
    if isinstance(x, float):
        return REAL
    if isinstance(x, complex):
        return COMPLEX
    raise FieldMismatch(f"not a scalar: {x!r}")


def coerce(x, field: str):
    """Convert a scalar (or its JSON form) into ``field``."""
    tx = type(x)
    if field == RATIONAL and tx is Fraction or field == REAL and tx is float or field == COMPLEX and tx is complex:
        return x
    if isinstance(x, (list, tuple)) and len(x) == 2:
        if field != COMPLEX:
            raise FieldMismatch(f"complex pair {x!r} in a {field} matrix")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        x = Fraction(x) if "/" in x or x.strip().lstrip("-").isdigit() else float(x)
    if field == RATIONAL:
        if isinstance(x, float):
            if not x.is_integer():
                raise FieldMismatch(f"float {x!r} in a rational matrix")
            return Fraction(int(x))
        if isinstance(x, complex):
            raise FieldMismatch(f"complex {x!r} in a rational matrix")
        return Fraction(x)
    if field == REAL:
        if isinstance(x, complex):
            if x.imag != 0:
                raise FieldMismatch(f"complex {x!r} in a real matrix")
            x = x.real
        return float(x)
    if field == COMPLEX:
        return complex(x)
    raise FieldMismatch(f"unknown field {field!r}")


def scalar_to_json(x, field: str):
    if field == RATIONAL:
        q = Fraction(x)
        return q.numerator if q.denominator == 1 else str(q)
    if field == COMPLEX:
        x = complex(x)
        return [x.real, x.imag]
    return float(x)


def is_zero(x, tol: float = 0.0) -> bool:
    return x == 0 if tol == 0 else abs(x) <= tol


class Matrix:
    """Immutable rows x cols matrix over one field."""

    __slots__ = ("rows", "cols", "field", "data")

    def __init__(self, data: Iterable[Sequence], field: str | None = None, cols: int | None = None):
        raw = [list(r) for r in data]
        if field is None:
            field = promote(*(field_of(v) for r in raw for v in r)) if any(raw) else RATIONAL
        if cols is None:
            if not raw:
                raise ShapeMismatch("column count required for a matrix with no rows")
            cols = len(raw[0])
        for i, r in enumerate(raw):
            if len(r) != cols:
                raise ShapeMismatch(f"row {i} has {len(r)} entries, expected {cols}")
        self.rows = len(raw)
        self.cols = cols
        self.field = field
        self.data = tuple(tuple(coerce(v, field) for v in r) for r in raw)

    # constructors ------------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int, field: str = RATIONAL) -> "Matrix":
        return cls([[0] * cols for _ in range(rows)], field, cols)

    @classmethod
    def identity(cls, n: int, field: str = RATIONAL) -> "Matrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], field, n)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], rows: int, field: str) -> "Matrix":
        return cls([[c[i] for c in columns] for i in range(rows)], field, len(columns))

    @classmethod
    def selection(cls, picks: Sequence[int], n: int, field: str = RATIONAL) -> "Matrix":
        """Row i picks coordinate ``picks[i]`` of an n-vector."""
        return cls([[1 if j == p else 0 for j in range(n)] for p in picks], field, n)

    # basic protocol ----------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols}, {self.field}, {[list(r) for r in self.data]})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and self.field == other.field and self.data == other.data

    def __hash__(self) -> int:
        return hash((self.shape, self.field, self.data))

    def to_field(self, field: str) -> "Matrix":
        if field == self.field:
            return self
        return Matrix(self.data, field, self.cols)

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.data)

    def max_abs(self) -> float:
        return max((abs(v) for r in self.data for v in r), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(is_zero(v, tol) for r in self.data for v in r)

    def allclose(self, other: "Matrix", tol: float) -> bool:
        if self.shape != other.shape:
            return False
        return all(
            abs(a - b) <= tol for ra, rb in zip(self.data, other.data) for a, b in zip(ra, rb)
        )

    # arithmetic --------------------------------------------------------
    def __matmul__(self, other: "Matrix") -> "Matrix":
        if not isinstance(other, Matrix):
            return NotImplemented
        if self.cols != other.rows:
            raise ShapeMismatch(f"cannot multiply {self.shape} by {other.shape}")
        f = promote(self.field, other.field)
        zero = coerce(0, f)
        ocols = other.columns_cache()
        out = []
        for r in self.data:
            out.append([sum((a * b for a, b in zip(r, c) if a and b), zero) for c in ocols])
        return Matrix(out, f, other.cols)

    def columns_cache(self) -> list[tuple]:
        return [self.column(j) for j in range(self.cols)]

    def apply(self, v: Sequence) -> tuple:
        if len(v) != self.cols:
            raise ShapeMismatch(f"vector of length {len(v)} for a {self.shape} matrix")
        zero = coerce(0, self.field)
        return tuple(sum((a * b for a, b in zip(r, v) if a and b), zero) for r in self.data)

    def _zip(self, other: "Matrix", op) -> "Matrix":
        if self.shape != other.shape:
            raise ShapeMismatch(f"shapes {self.shape} and {other.shape} differ")
        f = promote(self.field, other.field)
        return Matrix(
            [[op(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.data, other.data)], f, self.cols
        )

    def __add__(self, other: "Matrix") -> "Matrix":
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self) -> "Matrix":
        return Matrix([[-v for v in r] for r in self.data], self.field, self.cols)

    def scale(self, c) -> "Matrix":
        f = promote(self.field, field_of(c))
        return Matrix([[c * v for v in r] for r in self.data], f, self.cols)

    @property
    def T(self) -> "Matrix":
        return Matrix([self.column(j) for j in range(self.cols)], self.field, self.rows)

    @property
    def H(self) -> "Matrix":
        """Conjugate transpose."""
        if self.field != COMPLEX:
            return self.T
        return Matrix([[v.conjugate() for v in self.column(j)] for j in range(self.cols)], COMPLEX, self.rows)

    def hstack(self, other: "Matrix") -> "Matrix":
        if self.rows != other.rows:
            raise ShapeMismatch("hstack needs equal row counts")
        f = promote(self.field, other.field)
        return Matrix([ra + rb for ra, rb in zip(self.data, other.data)], f, self.cols + other.cols)

    def vstack(self, other: "Matrix") -> "Matrix":
        if self.cols != other.cols:
            raise ShapeMismatch("vstack needs equal column counts")
        f = promote(self.field, other.field)
        return Matrix(self.data + other.data, f, self.cols)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int] | None = None) -> "Matrix":
        cols = range(self.cols) if cols is None else cols
        return Matrix([[self.data[i][j] for j in cols] for i in rows], self.field, len(cols))

    def to_numpy(self) -> np.ndarray:
        dtype = complex if self.field == COMPLEX else float
        return np.array([[dtype(v) for v in r] for r in self.data], dtype=dtype).reshape(self.rows, self.cols)

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "kind": "matrix",
            "field": self.field,
            "rows": self.rows,
            "cols": self.cols,
            "data": [[scalar_to_json(v, self.field) for v in r] for r in self.data],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Matrix":
        field = data.get("field", RATIONAL)
        rows = data["data"]
        cols = data.get("cols", len(rows[0]) if rows else 0)
        if "rows" in data and data["rows"] != len(rows):
            raise ShapeMismatch(f"declared {data['rows']} rows, found {len(rows)}")
        return cls(rows, field, cols)


def block_matrix(rows: int, cols: int, blocks: Iterable[tuple[int, int, Matrix]], field: str) -> Matrix:
    """Assemble a matrix from (row offset, column offset, block) triples; blocks add."""
    zero = coerce(0, field)
    out = [[zero] * cols for _ in range(rows)]
    for r0, c0, b in blocks:
        for i, row in enumerate(b.data):
            target = out[r0 + i]
            for j, v in enumerate(row):
                if v:
                    target[c0 + j] += coerce(v, field)
    return Matrix(out, field, cols)


# elimination -------------------------------------------------------------

def _tolerance(m: Matrix) -> float:
    return 0.0 if m.field == RATIONAL else RANK_TOL * max(1.0, m.max_abs())


def _rref_exact(m: Matrix) -> tuple[list[list], list[int]]:
    """Exact RREF on sparse rows.  Columns are still taken left to right,
    so the pivots (and the reduced form, which is unique) match the dense
    elimination; only the choice of pivot row favours the sparsest."""
    rows = [{j: v for j, v in enumerate(r) if v} for r in m.data]
    col_rows: dict[int, set[int]] = {}
    for i, r in enumerate(rows):
        for j in r:
            col_rows.setdefault(j, set()).add(i)
    used: set[int] = set()
    pivots: list[int] = []
    order: list[int] = []
    for c in range(m.cols):
        cand = [i for i in col_rows.get(c, ()) if i not in used]
        if not cand:
            continue
        p = min(cand, key=lambda i: (len(rows[i]), i))
        piv = rows[p][c]
        r = rows[p] if piv == 1 else {j: v / piv for j, v in rows[p].items()}
        rows[p] = r
        for i in list(col_rows[c]):
            if i == p:
                continue
            ri = rows[i]
            fac = ri[c]
            for j, v in r.items():
                nv = ri.get(j, 0) - fac * v
                if nv:
                    if j not in ri:
                        col_rows.setdefault(j, set()).add(i)
                    ri[j] = nv
                elif j in ri:
                    del ri[j]
                    col_rows[j].discard(i)
        used.add(p)
        pivots.append(c)
        order.append(p)
    zero = Fraction(0)
    dense = []
    for p in order:
        row = [zero] * m.cols
        for j, v in rows[p].items():
            row[j] = v
        dense.append(row)
    dense.extend([zero] * m.cols for _ in range(m.rows - len(order)))
    return dense, pivots


def rref(m: Matrix, tol: float | None = None) -> tuple[list[list], list[int]]:
    """Reduced row echelon form as a list of rows plus the pivot columns.

    Float matrices pick the largest pivot in each column (partial
    pivoting) and treat anything at or below ``tol`` as zero.
    """
    if m.field == RATIONAL:
        return _rref_exact(m)
    if tol is None:
        tol = _tolerance(m)
    a = [list(r) for r in m.data]
    pivots: list[int] = []
    r = 0
    for c in range(m.cols):
        if r == m.rows:
            break
        p = max(range(r, m.rows), key=lambda i: abs(a[i][c]))
        if abs(a[p][c]) <= tol:
            for i in range(r, m.rows):
                a[i][c] = 0.0 * a[i][c]
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        row = [v / piv for v in a[r]]
        a[r] = row
        for i in range(m.rows):
            if i != r:
                fac = a[i][c]
                if fac:
                    ai = a[i]
                    for j in range(c, m.cols):
                        if row[j]:
                            ai[j] -= fac * row[j]
                    ai[c] = 0.0 * ai[c]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m: Matrix) -> int:
    return len(rref(m)[1])


def kernel_basis(m: Matrix) -> tuple[list[tuple], int]:
    """Basis of the null space (as tuples) and the rank of ``m``."""
    a, pivots = rref(m)
    free = [c for c in range(m.cols) if c not in set(pivots)]
    one, zero = coerce(1, m.field), coerce(0, m.field)
    basis = []
    for f in free:
        v = [zero] * m.cols
        v[f] = one
        for i, pc in enumerate(pivots):
            v[pc] = -a[i][f]
        basis.append(tuple(v))
    return basis, len(pivots)


def nullity(m: Matrix) -> int:
    return m.cols - rank(m)


def image_basis(m: Matrix) -> list[tuple]:
    """Pivot columns of ``m`` (a basis of its column space)."""
    _, pivots = rref(m)
    return [m.column(c) for c in pivots]


def solve(a: Matrix, b: Sequence, tol: float | None = None) -> tuple | None:
    """A particular solution of ``a x = b`` or None if inconsistent."""
    f = promote(a.field, *(field_of(v) for v in b)) if len(b) else a.field
    aug = a.to_field(f).hstack(Matrix([[v] for v in b], f, 1) if a.rows else Matrix.zeros(0, 1, f))
    if tol is None:
        tol = _tolerance(aug)
    red, pivots = rref(aug, tol)
    if a.cols in pivots:
        return None
    zero = coerce(0, f)
    x = [zero] * a.cols
    for i, pc in enumerate(pivots):
        x[pc] = red[i][a.cols]
    if f != RATIONAL:
        resid = max((abs(u - v) for u, v in zip(a.to_field(f).apply(x), b)), default=0.0)
        if resid > 1e-7 * max(1.0, aug.max_abs()):
            return None
    return tuple(x)


def solve_matrix(a: Matrix, b: Matrix) -> Matrix:
    """X with ``a X = b``; raises SingularMatrix when some column is unsolvable."""
    cols = []
    for j in range(b.cols):
        x = solve(a, b.column(j))
        if x is None:
            raise SingularMatrix("right-hand side not in the column space")
        cols.append(x)
    f = promote(a.field, b.field)
    return Matrix.from_columns(cols, a.cols, f) if cols else Matrix.zeros(a.cols, 0, f)


def inverse(a: Matrix) -> Matrix:
    if a.rows != a.cols:
        raise ShapeMismatch("only square matrices are invertible")
    if rank(a) != a.rows:
        raise SingularMatrix("matrix is singular")
    return solve_matrix(a, Matrix.identity(a.rows, a.field))


def least_squares_solve(m: Matrix, b: Sequence) -> tuple[tuple, float]:
    """Minimize ``|m x - b|`` via ridge-regularized normal equations."""
    if m.field == RATIONAL:
        raise FieldMismatch("least squares is only offered over floating fields")
    if len(b) != m.rows:
        raise ShapeMismatch(f"right-hand side has length {len(b)}, expected {m.rows}")
    a = m.to_numpy()
    rhs = np.asarray(b, dtype=a.dtype)
    gram = a.conj().T @ a + RIDGE * np.eye(m.cols)
    x = np.linalg.solve(gram, a.conj().T @ rhs) if m.cols else np.zeros(0, dtype=a.dtype)
    resid = float(np.linalg.norm(a @ x - rhs)) if m.rows else 0.0
    cast = complex if m.field == COMPLEX else float
    return tuple(cast(v) for v in x), resid


def orthonormalize(vectors: Sequence[Sequence], tol: float = RANK_TOL) -> list[tuple]:
    """Modified Gram-Schmidt; drops vectors that become negligible."""
    out: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=complex if any(isinstance(x, complex) for x in v) else float)
        for q in out:
            w = w - np.vdot(q, w) * q
        n = np.linalg.norm(w)
        if n > tol:
            out.append(w / n)
    return [tuple(x.item() for x in q) for q in out]


def vector_norm(v: Sequence) -> float:
    return math.sqrt(sum(abs(x) ** 2 for x in v))
