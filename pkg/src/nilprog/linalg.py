"""Exact integer and rational linear algebra used across the package.

Matrices are lists of lists (rows); no floating point anywhere.
"""

from fractions import Fraction
from math import gcd


def xgcd(a, b):
    """Return (g, x, y) with g = gcd(a, b) = a*x + b*y and g >= 0."""
    x, next_x = 1, 0
    y, next_y = 0, 1
    g, next_g = a, b
    while next_g:
        q = g // next_g
        x, next_x = next_x, x - q * next_x
        y, next_y = next_y, y - q * next_y
        g, next_g = next_g, g - q * next_g
    if g < 0:
        g, x, y = -g, -x, -y
    return g, x, y


def vec_content(v):
    """gcd of the entries (0 for the zero vector)."""
    g = 0
    for a in v:
        g = gcd(g, abs(a))
    return g


def mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [
        [sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)]
        for i in range(n)
    ]


def mat_vec(a, v):
    return [sum(row[j] * v[j] for j in range(len(v))) for row in a]


def identity_matrix(n, one=1):
    return [[one if i == j else one * 0 for j in range(n)] for i in range(n)]


def transpose(a):
    return [list(col) for col in zip(*a)]


def row_hnf(mat):
    """Row-style Hermite normal form over Z.

    Returns (H, U) with U unimodular, U*mat == H, H in row echelon form
    with positive pivots and reduced entries above each pivot.  Zero rows
    of H sink to the bottom.
    """
    m = [list(row) for row in mat]
    n = len(m)
    cols = len(m[0]) if n else 0
    u = identity_matrix(n)
    r = 0
    for c in range(cols):
        # eliminate below row r in column c via extended gcd
        piv = None
        for i in range(r, n):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        u[r], u[piv] = u[piv], u[r]
        for i in range(r + 1, n):
            while m[i][c] != 0:
                if abs(m[i][c]) >= abs(m[r][c]):
                    q = m[i][c] // m[r][c]
                    m[i] = [a - q * b for a, b in zip(m[i], m[r])]
                    u[i] = [a - q * b for a, b in zip(u[i], u[r])]
                else:
                    m[r], m[i] = m[i], m[r]
                    u[r], u[i] = u[i], u[r]
        if m[r][c] < 0:
            m[r] = [-a for a in m[r]]
            u[r] = [-a for a in u[r]]
        # reduce entries above the pivot
        for i in range(r):
            q = m[i][c] // m[r][c]
            if q:
                m[i] = [a - q * b for a, b in zip(m[i], m[r])]
                u[i] = [a - q * b for a, b in zip(u[i], u[r])]
        r += 1
        if r == n:
            break
    return m, u


def hnf_rank(mat):
    h, _ = row_hnf(mat)
    return sum(1 for row in h if any(a != 0 for a in row))


def lattice_index(mat):
    """Index of the lattice spanned by integer rows inside Z^d.

    Returns 0 if the rows do not span a full-rank sublattice, else the
    (positive) index = |det| of the HNF.
    """
    h, _ = row_hnf(mat)
    d = len(h[0]) if h else 0
    nonzero = [row for row in h if any(a != 0 for a in row)]
    if len(nonzero) < d:
        return 0
    det = 1
    for i in range(d):
        det *= nonzero[i][i]
    return abs(det)


def integer_kernel(mat):
    """Basis (list of integer vectors) of {x in Z^n : mat @ x = 0}."""
    n = len(mat[0]) if mat else 0
    # column operations: transpose, row-reduce, read off zero rows of H
    t = transpose(mat) if mat else []
    if not t:
        return [list(row) for row in identity_matrix(n)]
    h, u = row_hnf(t)
    ker = []
    for i, row in enumerate(h):
        if all(a == 0 for a in row):
            ker.append(u[i])
    return ker


def unimodular_with_first_row(z):
    """Return an integer matrix with determinant +-1 whose first row is z.

    Requires content(z) == 1.
    """
    d = len(z)
    assert vec_content(list(z)) == 1
    # U @ z^T = (1, 0, ..., 0)^T for a unimodular U from row reduction of the
    # column vector; then z @ U^T = e1, so z is the first row of (U^T)^{-1}.
    h, u = row_hnf([[a] for a in z])
    assert h[0][0] == 1
    w = transpose(u)
    w_inv = frac_inverse(w)
    out = [[int(a) for a in row] for row in w_inv]
    assert out[0] == list(z)
    assert abs(det_int(out)) == 1
    return out


def det_int(mat):
    """Exact determinant of an integer matrix (fraction-free not required)."""
    n = len(mat)
    m = [[Fraction(a) for a in row] for row in mat]
    det = Fraction(1)
    for c in range(n):
        piv = None
        for i in range(c, n):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        inv = 1 / m[c][c]
        for i in range(c + 1, n):
            if m[i][c]:
                f = m[i][c] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    if det.denominator == 1:
        return int(det)
    return det


def frac_solve(mat, rhs):
    """Solve mat @ x = rhs exactly over Q; mat square nonsingular."""
    n = len(mat)
    m = [[Fraction(a) for a in row] + [Fraction(b)] for row, b in zip(mat, rhs)]
    for c in range(n):
        piv = None
        for i in range(c, n):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            raise ValueError("singular matrix")
        m[c], m[piv] = m[piv], m[c]
        inv = 1 / m[c][c]
        m[c] = [a * inv for a in m[c]]
        for i in range(n):
            if i != c and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return [m[i][n] for i in range(n)]


def frac_inverse(mat):
    """Exact inverse of a square rational matrix."""
    n = len(mat)
    m = [
        [Fraction(a) for a in row] + [Fraction(1 if i == j else 0) for j in range(n)]
        for i, row in enumerate(mat)
    ]
    for c in range(n):
        piv = None
        for i in range(c, n):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            raise ValueError("singular matrix")
        m[c], m[piv] = m[piv], m[c]
        inv = 1 / m[c][c]
        m[c] = [a * inv for a in m[c]]
        for i in range(n):
            if i != c and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return [row[n:] for row in m]


def frac_rank(mat):
    if not mat:
        return 0
    m = [[Fraction(a) for a in row] for row in mat]
    rows, cols = len(m), len(m[0])
    r = 0
    for c in range(cols):
        piv = None
        for i in range(r, rows):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [a * inv for a in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == rows:
            break
    return r


def independent_over_q(vectors, new):
    """True if `new` is outside the rational span of `vectors`."""
    return frac_rank(vectors + [new]) > frac_rank(vectors) if vectors else any(
        a != 0 for a in new
    )


def frac_det(mat):
    n = len(mat)
    m = [[Fraction(a) for a in row] for row in mat]
    det = Fraction(1)
    for c in range(n):
        piv = None
        for i in range(c, n):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        inv = 1 / m[c][c]
        for i in range(c + 1, n):
            if m[i][c]:
                f = m[i][c] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return det
