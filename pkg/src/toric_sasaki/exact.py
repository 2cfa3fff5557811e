"""Exact rational linear algebra on tuples of :class:`fractions.Fraction`.

Dimensions here are tiny (at most 4x4), so plain Gauss-Jordan elimination over
the rationals is both fast and exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

Vector = tuple[Fraction, ...]
Matrix = list[list[Fraction]]


def vec(values: Iterable) -> Vector:
    return tuple(Fraction(v) for v in values)


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b, strict=True)), Fraction(0))


def scale(c, a: Sequence[Fraction]) -> Vector:
    c = Fraction(c)
    return tuple(c * x for x in a)


def add(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vector:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def sub(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vector:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def is_zero(a: Sequence[Fraction]) -> bool:
    return all(x == 0 for x in a)


def rref(rows: Sequence[Sequence[Fraction]]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the pivot column of each nonzero row."""
    mat = [[Fraction(x) for x in row] for row in rows]
    if not mat:
        return mat, []
    n_rows, n_cols = len(mat), len(mat[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if mat[i][c] != 0), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        inv = 1 / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(n_rows):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
    return mat, pivots


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    return len(rref(rows)[1])


def solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Vector | None:
    """Solve ``a x = b`` exactly.

    Returns ``None`` when the system is inconsistent. Raises ``ValueError`` if it
    is consistent but underdetermined.
    """
    n_cols = len(a[0])
    aug = [list(row) + [Fraction(bi)] for row, bi in zip(a, b, strict=True)]
    red, pivots = rref(aug)
    if n_cols in pivots:
        return None
    if len(pivots) < n_cols:
        raise ValueError("system is underdetermined")
    x = [Fraction(0)] * n_cols
    for row, c in zip(red, pivots):
        x[c] = row[n_cols]
    return tuple(x)


def nullspace(rows: Sequence[Sequence[Fraction]], n_cols: int) -> list[Vector]:
    """Basis of the right kernel, one vector per free column (in column order)."""
    red, pivots = rref(rows) if rows else ([], [])
    basis = []
    for free in range(n_cols):
        if free in pivots:
            continue
        v = [Fraction(0)] * n_cols
        v[free] = Fraction(1)
        for row, c in zip(red, pivots):
            v[c] = -row[free]
        basis.append(tuple(v))
    return basis


def det(a: Sequence[Sequence[Fraction]]) -> Fraction:
    mat = [[Fraction(x) for x in row] for row in a]
    n = len(mat)
    sign = 1
    result = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if mat[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            mat[c], mat[p] = mat[p], mat[c]
            sign = -sign
        piv = mat[c][c]
        result *= piv
        for i in range(c + 1, n):
            f = mat[i][c] / piv
            if f:
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[c])]
    return sign * result


def inverse(a: Sequence[Sequence[Fraction]]) -> Matrix:
    n = len(a)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(a)]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


def matvec(a: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> Vector:
    return tuple(dot(row, x) for row in a)


def transpose(a: Sequence[Sequence[Fraction]]) -> Matrix:
    return [list(col) for col in zip(*a)]


def primitive(v: Sequence[Fraction]) -> Vector:
    """Scale a nonzero rational vector to the primitive integer vector along it."""
    den = lcm(*(x.denominator for x in v))
    ints = [int(x * den) for x in v]
    g = gcd(*ints)
    return tuple(Fraction(i // g) for i in ints)


def parse_rational(text) -> Fraction:
    """Parse an integer or a ``"p/q"`` string. Floats are rejected."""
    if isinstance(text, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, Fraction):
        return text
    if isinstance(text, str):
        s = text.strip()
        if "." in s or "e" in s.lower():
            raise ValueError(f"decimal literal {text!r} is not an exact rational; use 'p/q'")
        return Fraction(s)
    raise TypeError(f"expected int or 'p/q' string, got {type(text).__name__}")


def fmt(q: Fraction) -> str:
    return str(Fraction(q))


def fmt_vec(v: Sequence[Fraction]) -> list[str]:
    return [fmt(x) for x in v]
