"""Exact scalar and matrix arithmetic over the rationals and prime fields.

Rationals are stored as :class:`fractions.Fraction` (always normalized),
prime-field elements as Python ints in ``[0, p)``.  Matrices act on column
vectors, so ``A @ B`` means "apply B, then A".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FieldError",
    "FieldMismatchError",
    "ShapeError",
    "FieldSpec",
    "QQ",
    "GF",
    "Matrix",
    "mat_rank",
    "kernel_basis",
    "mat_trace",
    "solve",
    "rref",
    "BlockSystem",
]

# int64 is safe while n * p**2 stays far below 2**63 for any matrix we build.
_SMALL_PRIME = 1 << 20


class FieldError(ValueError):
    pass


class FieldMismatchError(FieldError):
    pass


class ShapeError(ValueError):
    pass


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def _is_prime(n: int) -> bool:
    """Miller-Rabin with the first 13 prime bases; exact below 3.3e24."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    if n >= 3_317_044_064_679_887_385_961_981:
        raise FieldError(f"characteristic {n} is too large to certify as prime")
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Either the rationals (``kind="Q"``) or the prime field ``F_p``."""

    kind: str
    p: int | None = None

    def __post_init__(self):
        if self.kind == "Q":
            if self.p is not None:
                raise FieldError("the rationals take no characteristic")
        elif self.kind == "F":
            if not isinstance(self.p, int) or not _is_prime(self.p):
                raise FieldError(f"F_p needs a prime p, got {self.p!r}")
        else:
            raise FieldError(f"unknown field kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "FieldSpec":
        t = text.strip()
        if t in ("Q", "QQ"):
            return QQ
        if t[:1] in ("F", "f") and t[1:].isdigit():
            return cls("F", int(t[1:]))
        raise FieldError(f"cannot parse field {text!r}; expected Q or F<p>")

    def __str__(self):
        return "Q" if self.kind == "Q" else f"F{self.p}"

    @property
    def is_rational(self) -> bool:
        return self.kind == "Q"

    @property
    def dtype(self):
        if self.kind == "F" and self.p < _SMALL_PRIME:
            return np.int64
        return object

    def element(self, x):
        """Canonical representative of ``x`` (int, Fraction or ``"a/b"`` string)."""
        if isinstance(x, str):
            try:
                x = Fraction(x.strip())
            except (ValueError, ZeroDivisionError) as exc:
                raise FieldError(f"bad scalar {x!r}") from exc
        if isinstance(x, np.integer):
            x = int(x)
        if self.kind == "Q":
            if isinstance(x, (int, Fraction)):
                return Fraction(x)
            raise FieldError(f"not an exact rational: {x!r}")
        p = self.p
        if isinstance(x, int):
            return x % p
        if isinstance(x, Fraction):
            den = x.denominator % p
            if den == 0:
                raise FieldError(f"{x} has denominator divisible by {p}")
            return x.numerator * pow(den, -1, p) % p
        raise FieldError(f"not an exact scalar: {x!r}")

    def zero(self):
        return self.element(0)

    def one(self):
        return self.element(1)

    def add(self, a, b):
        return self.element(a + b)

    def mul(self, a, b):
        return self.element(a * b)

    def neg(self, a):
        return self.element(-a)

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        if self.kind == "Q":
            return 1 / Fraction(a)
        return pow(int(a), -1, self.p)

    def sign(self, k: int):
        """The scalar (-1)**k."""
        return self.element(-1 if k % 2 else 1)

    def random_element(self, rng, spread: int = 3):
        if self.kind == "Q":
            return Fraction(int(rng.integers(-spread, spread + 1)))
        return int(rng.integers(0, self.p))


QQ = FieldSpec("Q")


def GF(p: int) -> FieldSpec:
    return FieldSpec("F", p)


def _normalize(field: FieldSpec, arr: np.ndarray) -> np.ndarray:
    if field.kind == "F":
        if field.dtype is np.int64:
            return np.mod(arr.astype(np.int64, copy=False), field.p)
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = field.element(v)
        return out
    if arr.dtype.kind in "iu":
        out = np.empty(arr.size, dtype=object)
        out[:] = [Fraction(v) for v in arr.ravel().tolist()]
        return out.reshape(arr.shape)
    flat = arr.ravel().tolist()
    if all(type(v) is Fraction for v in flat):
        return arr.astype(object, copy=True)
    out = np.empty(len(flat), dtype=object)
    out[:] = [v if type(v) is Fraction else field.element(v) for v in flat]
    return out.reshape(arr.shape)


def _scaled_ints(arr: np.ndarray) -> tuple[list[int], int]:
    """Integers ``N`` and a common denominator ``D`` with ``arr = N / D``."""
    flat = arr.ravel().tolist()
    den = math.lcm(*(v.denominator for v in flat)) if flat else 1
    return [v.numerator * (den // v.denominator) for v in flat], den


def _q_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Fraction arithmetic dominates otherwise; multiply scaled integers instead.
    na, da = _scaled_ints(a)
    nb, db = _scaled_ints(b)
    ba = max(map(abs, na), default=0)
    bb = max(map(abs, nb), default=0)
    if ba * bb * a.shape[1] < 2**62:
        prod = np.array(na, dtype=np.int64).reshape(a.shape) @ np.array(nb, dtype=np.int64).reshape(b.shape)
        vals = prod.ravel().tolist()
    else:
        ia = np.array(na, dtype=object).reshape(a.shape)
        ib = np.array(nb, dtype=object).reshape(b.shape)
        vals = (ia @ ib).ravel().tolist()
    return _from_scaled(vals, da * db, (a.shape[0], b.shape[1]))


def _q_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na, da = _scaled_ints(a)
    nb, db = _scaled_ints(b)
    ia = np.array(na, dtype=object).reshape(a.shape)
    ib = np.array(nb, dtype=object).reshape(b.shape)
    vals = np.kron(ia, ib).ravel().tolist()
    return _from_scaled(vals, da * db, (a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]))


def _from_scaled(vals: list[int], den: int, shape) -> np.ndarray:
    out = np.empty(len(vals), dtype=object)
    out[:] = [Fraction(v, den) if v else _FZERO for v in vals]
    return out.reshape(shape)


_FZERO = Fraction(0)


class Matrix:
    """An immutable matrix over an exact field."""

    __slots__ = ("field", "_a")

    def __init__(self, field: FieldSpec, data, *, shape: tuple[int, int] | None = None):
        self.field = field
        if isinstance(data, Matrix):
            if data.field != field:
                raise FieldMismatchError(f"{data.field} matrix given for {field}")
            self._a = data._a
            return
        if isinstance(data, np.ndarray):
            arr = data
        else:
            rows = [list(r) for r in data]
            if shape is None:
                shape = (len(rows), len(rows[0]) if rows else 0)
            if any(len(r) != shape[1] for r in rows) or len(rows) != shape[0]:
                raise ShapeError("ragged matrix data")
            arr = np.empty(shape, dtype=object)
            for i, r in enumerate(rows):
                for j, v in enumerate(r):
                    arr[i, j] = field.element(v)
        if arr.ndim != 2:
            if shape is not None and arr.size == 0:
                arr = arr.reshape(shape)
            else:
                raise ShapeError("matrix data must be two-dimensional")
        if shape is not None and arr.shape != tuple(shape):
            raise ShapeError(f"expected shape {shape}, got {arr.shape}")
        arr = _normalize(field, arr)
        arr.flags.writeable = False
        self._a = arr

    @classmethod
    def _wrap(cls, field: FieldSpec, arr: np.ndarray) -> "Matrix":
        m = cls.__new__(cls)
        m.field = field
        arr = _normalize(field, arr)
        arr.flags.writeable = False
        m._a = arr
        return m

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> "Matrix":
        arr = np.zeros((rows, cols), dtype=field.dtype)
        if field.dtype is object:
            arr[...] = field.zero()
        return cls._wrap(field, arr)

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "Matrix":
        return cls.scalar(field, n, 1)

    @classmethod
    def scalar(cls, field: FieldSpec, n: int, c) -> "Matrix":
        arr = np.zeros((n, n), dtype=field.dtype)
        if field.dtype is object:
            arr[...] = field.zero()
        c = field.element(c)
        for i in range(n):
            arr[i, i] = c
        return cls._wrap(field, arr)

    @classmethod
    def random(cls, field: FieldSpec, rows: int, cols: int, rng) -> "Matrix":
        if field.kind == "F":
            arr = rng.integers(0, field.p, size=(rows, cols))
            return cls._wrap(field, arr.astype(field.dtype) if field.dtype is np.int64 else arr.astype(object))
        arr = rng.integers(-3, 4, size=(rows, cols)).astype(object)
        return cls._wrap(field, arr)

    # -- basic protocol -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __getitem__(self, idx):
        return self._a[idx]

    def tolist(self) -> list[list]:
        return [[self.field.element(v) for v in row] for row in self._a]

    def __repr__(self):
        body = "; ".join(" ".join(str(v) for v in row) for row in self.tolist())
        return f"Matrix[{self.field}]({self.rows}x{self.cols}: {body})"

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            self.field == other.field
            and self.shape == other.shape
            and bool(np.all(self._a == other._a))
        )

    def __hash__(self):
        return hash((self.field, self.shape, tuple(self._a.ravel().tolist())))

    def is_zero(self) -> bool:
        if self._a.dtype == object:
            # Fraction.__bool__ is a numerator test, far cheaper than != 0
            return not any(self._a.ravel().tolist())
        return not self._a.any()

    # -- arithmetic -----------------------------------------------------

    def _check(self, other: "Matrix"):
        if not isinstance(other, Matrix):
            raise TypeError(f"expected Matrix, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(f"{self.field} vs {other.field}")

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return Matrix._wrap(self.field, self._a + other._a)

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot subtract {self.shape} and {other.shape}")
        return Matrix._wrap(self.field, self._a - other._a)

    def __neg__(self) -> "Matrix":
        return Matrix._wrap(self.field, -self._a)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.cols != other.rows:
            raise ShapeError(f"cannot compose {self.shape} after {other.shape}")
        if self.cols == 0:
            return Matrix.zeros(self.field, self.rows, other.cols)
        if self.field.kind == "Q":
            return Matrix._wrap(self.field, _q_matmul(self._a, other._a))
        return Matrix._wrap(self.field, self._a @ other._a)

    def scale(self, c) -> "Matrix":
        c = self.field.element(c)
        if c == 1:
            return self
        if c == self.field.neg(self.field.one()):
            return -self
        if self.field.dtype is np.int64:
            return Matrix._wrap(self.field, self._a * int(c))
        return Matrix._wrap(self.field, self._a * c)

    @property
    def T(self) -> "Matrix":
        return Matrix._wrap(self.field, self._a.T.copy())

    def kron(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self._a.size == 0 or other._a.size == 0:
            return Matrix.zeros(self.field, self.rows * other.rows, self.cols * other.cols)
        if self.field.kind == "Q":
            return Matrix._wrap(self.field, _q_kron(self._a, other._a))
        return Matrix._wrap(self.field, np.kron(self._a, other._a))

    def submatrix(self, rows: slice, cols: slice) -> "Matrix":
        return Matrix._wrap(self.field, self._a[rows, cols].copy())

    @staticmethod
    def block(field: FieldSpec, blocks: Sequence[Sequence["Matrix"]]) -> "Matrix":
        """Assemble a block matrix; every block must be given (use zeros)."""
        if not blocks or not blocks[0]:
            raise ShapeError("empty block layout")
        heights = [row[0].rows for row in blocks]
        widths = [m.cols for m in blocks[0]]
        arr = np.zeros((sum(heights), sum(widths)), dtype=field.dtype)
        if field.dtype is object:
            arr[...] = field.zero()
        r0 = 0
        for bi, row in enumerate(blocks):
            c0 = 0
            for bj, m in enumerate(row):
                if m.field != field:
                    raise FieldMismatchError(f"{m.field} block in a {field} matrix")
                if m.shape != (heights[bi], widths[bj]):
                    raise ShapeError(f"block ({bi},{bj}) has shape {m.shape}")
                arr[r0 : r0 + m.rows, c0 : c0 + m.cols] = m._a
                c0 += m.cols
            r0 += heights[bi]
        return Matrix._wrap(field, arr)

    @staticmethod
    def hstack(field: FieldSpec, mats: Sequence["Matrix"], rows: int) -> "Matrix":
        if not mats:
            return Matrix.zeros(field, rows, 0)
        return Matrix.block(field, [list(mats)])

    @staticmethod
    def vstack(field: FieldSpec, mats: Sequence["Matrix"], cols: int) -> "Matrix":
        if not mats:
            return Matrix.zeros(field, 0, cols)
        return Matrix.block(field, [[m] for m in mats])

    @staticmethod
    def column(field: FieldSpec, values: Iterable) -> "Matrix":
        vals = list(values)
        return Matrix(field, [[v] for v in vals], shape=(len(vals), 1))


# -- elimination ----------------------------------------------------------


def _rref_mod(a: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    a = a.copy()
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            a[[r, i]] = a[[i, r]]
        a[r] = (a[r] * pow(int(a[r, c]), -1, p)) % p
        col = a[:, c].copy()
        col[r] = 0
        hit = np.flatnonzero(col)
        if hit.size:
            a[hit] = (a[hit] - np.outer(col[hit], a[r])) % p
        pivots.append(c)
        r += 1
    return a, pivots


def _rref_generic(field: FieldSpec, a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    rows, cols = a.shape
    m = [list(row) for row in a]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        i = next((k for k in range(r, rows) if m[k][c] != 0), None)
        if i is None:
            continue
        m[r], m[i] = m[i], m[r]
        inv = field.inv(m[r][c])
        prow = [field.element(v * inv) for v in m[r]]
        m[r] = prow
        support = [j for j in range(c, cols) if prow[j] != 0]
        for k in range(rows):
            if k == r:
                continue
            f = m[k][c]
            if f != 0:
                row = m[k]
                for j in support:
                    row[j] = field.element(row[j] - f * prow[j])
        pivots.append(c)
        r += 1
    out = np.empty((rows, cols), dtype=object)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = m[i][j]
    return out, pivots


def rref(M: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns."""
    if M.field.dtype is np.int64:
        a, piv = _rref_mod(M.array, M.field.p)
    else:
        a, piv = _rref_generic(M.field, M.array)
    return Matrix._wrap(M.field, a), piv


def mat_rank(M: Matrix) -> int:
    if M.rows == 0 or M.cols == 0:
        return 0
    return len(rref(M)[1])


def kernel_basis(M: Matrix) -> list[Matrix]:
    """Basis of ``{v : M v = 0}`` as column vectors, one per free column."""
    field = M.field
    n = M.cols
    if M.rows == 0:
        return [Matrix.column(field, [1 if i == j else 0 for i in range(n)]) for j in range(n)]
    R, piv = rref(M)
    pivset = set(piv)
    free = [j for j in range(n) if j not in pivset]
    basis = []
    for fcol in free:
        v = [field.zero()] * n
        v[fcol] = field.one()
        for i, pc in enumerate(piv):
            v[pc] = field.neg(R[i, fcol])
        basis.append(Matrix.column(field, v))
    return basis


def mat_trace(M: Matrix):
    if M.rows != M.cols:
        raise ShapeError(f"trace of a non-square {M.shape} matrix")
    f = M.field
    total = f.zero()
    for i in range(M.rows):
        total = f.add(total, M[i, i])
    return total


def solve(A: Matrix, b: Matrix) -> Matrix | None:
    """One solution ``x`` of ``A x = b`` (free variables set to 0), or None."""
    if A.field != b.field:
        raise FieldMismatchError(f"{A.field} vs {b.field}")
    if b.rows != A.rows:
        raise ShapeError(f"right-hand side has {b.rows} rows, matrix has {A.rows}")
    field = A.field
    k = b.cols
    if A.rows == 0:
        return Matrix.zeros(field, A.cols, k)
    aug = Matrix.block(field, [[A, b]])
    R, piv = rref(aug)
    if any(pc >= A.cols for pc in piv):
        return None
    x = np.zeros((A.cols, k), dtype=field.dtype)
    if field.dtype is object:
        x[...] = field.zero()
    for i, pc in enumerate(piv):
        x[pc, :] = R.array[i, A.cols :]
    return Matrix._wrap(field, x)


class BlockSystem:
    """Linear equations whose unknowns are matrices.

    Each equation is ``sum_t L_t X_t R_t = C`` with known ``L_t, R_t, C``.
    Row-major vectorization turns ``L X R`` into ``(L kron R^T) vec(X)``.
    """

    def __init__(self, field: FieldSpec):
        self.field = field
        self._shapes: dict = {}
        self._offset: dict = {}
        self._size = 0
        self._eqs: list = []

    def unknown(self, key, rows: int, cols: int):
        if key in self._shapes:
            raise KeyError(f"unknown {key!r} declared twice")
        self._shapes[key] = (rows, cols)
        self._offset[key] = self._size
        self._size += rows * cols
        return key

    def equation(self, terms, rhs: Matrix | None = None, shape: tuple[int, int] | None = None):
        """Add ``sum L X R = rhs``; ``terms`` is a list of ``(L, key, R)``.

        ``L`` or ``R`` may be None for the identity.
        """
        if rhs is None and shape is None:
            for L, key, R in terms:
                r, c = self._shapes[key]
                shape = (L.rows if L is not None else r, R.cols if R is not None else c)
                break
        if rhs is None:
            rhs = Matrix.zeros(self.field, *shape)
        self._eqs.append((list(terms), rhs))

    def _assemble(self) -> tuple[Matrix, Matrix]:
        f = self.field
        blocks_rows = []
        rhs_rows = []
        for terms, rhs in self._eqs:
            nrow = rhs.rows * rhs.cols
            if nrow == 0:
                continue
            arr = np.zeros((nrow, self._size), dtype=f.dtype)
            if f.dtype is object:
                arr[...] = f.zero()
            for L, key, R in terms:
                r, c = self._shapes[key]
                if r * c == 0:
                    continue
                L = L if L is not None else Matrix.identity(f, r)
                R = R if R is not None else Matrix.identity(f, c)
                if L.cols != r or R.rows != c or L.rows != rhs.rows or R.cols != rhs.cols:
                    raise ShapeError(f"term for {key!r} does not fit equation of shape {rhs.shape}")
                off = self._offset[key]
                arr[:, off : off + r * c] = arr[:, off : off + r * c] + L.kron(R.T).array
            blocks_rows.append(arr)
            rhs_rows.append(rhs.array.reshape(nrow, 1))
        if not blocks_rows:
            return Matrix.zeros(f, 0, self._size), Matrix.zeros(f, 0, 1)
        A = Matrix._wrap(f, np.vstack(blocks_rows))
        b = Matrix._wrap(f, np.vstack(rhs_rows))
        return A, b

    def _unpack(self, vec: Matrix) -> dict:
        out = {}
        for key, (r, c) in self._shapes.items():
            off = self._offset[key]
            chunk = vec.array[off : off + r * c, 0].reshape(r, c)
            out[key] = Matrix._wrap(self.field, chunk.copy())
        return out

    def solve(self) -> dict | None:
        A, b = self._assemble()
        x = solve(A, b)
        return None if x is None else self._unpack(x)

    def solution_space(self) -> tuple[dict | None, list[dict]]:
        """A particular solution and a basis of the homogeneous solutions."""
        A, b = self._assemble()
        x = solve(A, b)
        if x is None:
            return None, []
        return self._unpack(x), [self._unpack(v) for v in kernel_basis(A)]

    def sample(self, rng) -> dict | None:
        """A random solution: particular plus a random kernel combination."""
        part, basis = self.solution_space()
        if part is None:
            return None
        f = self.field
        acc = {k: v for k, v in part.items()}
        for vec in basis:
            c = f.random_element(rng)
            if c == 0:
                continue
            for k in acc:
                acc[k] = acc[k] + vec[k].scale(c)
        return acc
