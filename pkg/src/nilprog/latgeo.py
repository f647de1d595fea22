"""Exact geometry of numbers: polytope norms, successive minima with
witnesses, Mahler bases, unimodular completion, and the bracket-compatible
box approximation used by the dimension-reduction pipeline.

Ambient space is Q^n; lattices are given by square rational basis
matrices (rows).  All norms evaluate to exact rationals; bodies are
closed, so witnesses attain their minima.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import (
    BudgetExceededError,
    NotPrimitiveError,
    ThicknessError,
    ValidationError,
    check_budget,
    DEFAULT_BUDGET,
)
from .linalg import (
    frac_det,
    frac_inverse,
    frac_rank,
    lattice_index,
    mat_vec,
    unimodular_with_first_row,
    vec_content,
)


def _frac_vec(v):
    return tuple(Fraction(a) for a in v)


class LatticeBasis:
    """Full-rank lattice in Q^n given by basis rows."""

    def __init__(self, rows):
        self.rows = tuple(_frac_vec(r) for r in rows)
        self.n = len(self.rows)
        if any(len(r) != self.n for r in self.rows):
            raise ValidationError("lattice basis must be square")
        self.det = frac_det([list(r) for r in self.rows])
        if self.det == 0:
            raise ValidationError("lattice basis is singular")
        self._inv = frac_inverse([list(r) for r in self.rows])

    def to_ambient(self, coords):
        return tuple(
            sum(Fraction(c) * self.rows[i][t] for i, c in enumerate(coords))
            for t in range(self.n)
        )

    def coords_of(self, x):
        """Rational coordinates of an ambient vector in this basis."""
        return tuple(
            sum(Fraction(x[i]) * self._inv[i][t] for i in range(self.n))
            for t in range(self.n)
        )

    def contains(self, x):
        return all(c.denominator == 1 for c in self.coords_of(x))

    def to_json(self):
        return {
            "n": self.n,
            "rows": [[_fmt(a) for a in r] for r in self.rows],
        }


def _fmt(a):
    a = Fraction(a)
    return f"{a.numerator}/{a.denominator}"


def standard_lattice(n):
    return LatticeBasis([[1 if i == j else 0 for j in range(n)] for i in range(n)])


class Box:
    """Symmetric box: unit ball of max_i |coeff_i| / L_i in basis e."""

    kind = "box"

    def __init__(self, basis_rows, lengths):
        self.e = LatticeBasis(basis_rows)
        self.L = tuple(Fraction(x) for x in lengths)
        if len(self.L) != self.e.n or any(l <= 0 for l in self.L):
            raise ValidationError("box needs one positive length per basis vector")
        self.n = self.e.n

    def norm(self, v):
        coeffs = self.e.coords_of(v)
        return max(abs(c) / l for c, l in zip(coeffs, self.L))

    def vertices(self):
        out = []
        for signs in product((1, -1), repeat=self.n):
            out.append(
                tuple(
                    sum(s * l * self.e.rows[i][t] for i, (s, l) in enumerate(zip(signs, self.L)))
                    for t in range(self.n)
                )
            )
        return out

    def volume(self):
        """Lebesgue volume in ambient coordinates."""
        out = abs(self.e.det)
        for l in self.L:
            out *= 2 * l
        return out

    def to_json(self):
        return {
            "kind": self.kind,
            "basis": self.e.to_json(),
            "L": [_fmt(l) for l in self.L],
        }


class ProjectedBox:
    """Image of a box under the quotient by a line R*z.

    Quotient vectors live in the (n-1)-dimensional coordinate space of a
    chosen integral section; the norm of w is the minimum over real t of
    the box norm of lift(w) + t*z, computed exactly over the breakpoints
    of the piecewise-linear objective.
    """

    kind = "projected_box"

    def __init__(self, box, z, section_rows=None):
        self.box = box
        self.z = _frac_vec(z)
        if not any(self.z):
            raise ValidationError("projection direction must be nonzero")
        n = box.n
        if section_rows is None:
            # pick n-1 standard basis vectors completing z to a basis
            rows = []
            for i in range(n):
                cand = tuple(Fraction(1 if t == i else 0) for t in range(n))
                if frac_rank([list(self.z)] + [list(r) for r in rows] + [list(cand)]) > 1 + len(rows):
                    rows.append(cand)
                if len(rows) == n - 1:
                    break
            section_rows = rows
        self.section = tuple(_frac_vec(r) for r in section_rows)
        self.n = n - 1
        full = [list(self.z)] + [list(r) for r in self.section]
        if frac_det(full) == 0:
            raise ValidationError("section does not complement the direction")
        self._full_inv = frac_inverse(full)

    def lift(self, w):
        return tuple(
            sum(Fraction(w[i]) * self.section[i][t] for i in range(self.n))
            for t in range(len(self.z))
        )

    def project(self, x):
        """Quotient coordinates of an ambient vector."""
        # x = t*z + sum w_i section_i
        coeffs = [
            sum(Fraction(x[i]) * self._full_inv[i][t] for i in range(len(x)))
            for t in range(len(x))
        ]
        return tuple(coeffs[1:])

    def norm(self, w):
        x = self.lift(w)
        a = self.box.e.coords_of(x)
        b = self.box.e.coords_of(self.z)
        L = self.box.L
        funcs = [(a[i] / L[i], b[i] / L[i]) for i in range(len(L))]
        candidates = set()
        for ai, bi in funcs:
            if bi != 0:
                candidates.add(-ai / bi)
        for i in range(len(funcs)):
            ai, bi = funcs[i]
            for j in range(i + 1, len(funcs)):
                aj, bj = funcs[j]
                for sgn in (1, -1):
                    den = bi - sgn * bj
                    if den != 0:
                        candidates.add((sgn * aj - ai) / den)
        if not candidates:
            candidates.add(Fraction(0))
        best = None
        for t in sorted(candidates):
            val = max(abs(ai + bi * t) for ai, bi in funcs)
            if best is None or val < best:
                best = val
        return best

    def vertices(self):
        seen = {}
        for v in self.box.vertices():
            w = self.project(v)
            seen.setdefault(w, w)
        return list(seen.values())

    def to_json(self):
        return {
            "kind": self.kind,
            "box": self.box.to_json(),
            "z": [_fmt(a) for a in self.z],
            "section": [[_fmt(a) for a in r] for r in self.section],
        }


def norm_eval(body, v):
    """Exact norm of v under a Box or ProjectedBox."""
    return body.norm(v)


@dataclass(frozen=True)
class MinimaReport:
    lambdas: tuple          # non-decreasing rationals, length d
    witnesses: tuple        # lattice vectors in lattice coordinates (ints)
    witnesses_ambient: tuple
    thickness_index: int    # index of the sublattice spanned by all points
                            # of norm < 1 (0 if not full rank)

    def to_json(self):
        return {
            "lambda": [_fmt(l) for l in self.lambdas],
            "witnesses": [list(w) for w in self.witnesses],
            "witnesses_ambient": [[_fmt(a) for a in w] for w in self.witnesses_ambient],
            "thickness_index": self.thickness_index,
        }


def _sign_canonical(a):
    """Flip the sign so the first nonzero coordinate is positive."""
    for c in a:
        if c > 0:
            return tuple(a)
        if c < 0:
            return tuple(-x for x in a)
    return tuple(a)


def _coord_bounds(body, lattice):
    """sup over the unit ball of |i-th lattice coordinate|, per i,
    computed over the polytope's vertices."""
    sups = [Fraction(0)] * lattice.n
    for v in body.vertices():
        coords = lattice.coords_of(v)
        for i, c in enumerate(coords):
            if abs(c) > sups[i]:
                sups[i] = abs(c)
    return sups


def successive_minima(body, lattice, budget=DEFAULT_BUDGET, dim_cap=8):
    """Exact successive minima of `body` with respect to `lattice`,
    with witnesses chosen greedily by (norm, lex) with independence
    filtering.  Enumerates the integer box bounded by the dual
    description of the norm; exact throughout."""
    d = lattice.n
    if dim_cap is not None and d > dim_cap:
        raise BudgetExceededError(f"dimension {d} exceeds cap {dim_cap}")
    radius = max(body.norm(row) for row in lattice.rows)
    radius = max(radius, Fraction(1))  # also collect all norm < 1 points
    sups = _coord_bounds(body, lattice)
    bounds = [int(radius * s) for s in sups]
    size = 1
    for b in bounds:
        size *= 2 * b + 1
    check_budget(size, budget, "successive-minima enumeration")
    scored = []
    seen = set()
    for a in product(*[range(-b, b + 1) for b in bounds]):
        if not any(a):
            continue
        a = _sign_canonical(a)
        if a in seen:
            continue
        seen.add(a)
        x = lattice.to_ambient(a)
        nv = body.norm(x)
        if nv <= radius:
            scored.append((nv, a, x))
    scored.sort(key=lambda t: (t[0], sum(abs(c) for c in t[1]), t[1]))
    lambdas, wits, wits_amb = [], [], []
    picked = []
    for nv, a, x in scored:
        if len(wits) == d:
            break
        if frac_rank(picked + [list(a)]) > len(picked):
            picked.append(list(a))
            lambdas.append(nv)
            wits.append(tuple(a))
            wits_amb.append(x)
    if len(wits) < d:
        raise ValidationError(
            "enumeration window did not contain d independent vectors; "
            "the initial radius bound is violated (internal error)"
        )
    thin = [list(a) for nv, a, x in scored if nv < 1]
    index = lattice_index(thin) if thin else 0
    return MinimaReport(tuple(lambdas), tuple(wits), tuple(wits_amb), index)


def brute_force_minima(body, lattice, window_scale=2, budget=DEFAULT_BUDGET):
    """Independent check: scan every lattice point of a window_scale-times
    larger coordinate window and read the minima off the definition."""
    d = lattice.n
    radius = max(body.norm(row) for row in lattice.rows)
    sups = _coord_bounds(body, lattice)
    bounds = [int(window_scale * radius * s) + 1 for s in sups]
    size = 1
    for b in bounds:
        size *= 2 * b + 1
    check_budget(size, budget, "brute-force minima scan")
    pts = []
    for a in product(*[range(-b, b + 1) for b in bounds]):
        if any(a):
            pts.append((body.norm(lattice.to_ambient(a)), a))
    pts.sort(key=lambda t: (t[0], t[1]))
    lambdas = []
    span = []
    for nv, a in pts:
        if frac_rank(span + [list(a)]) > len(span):
            span.append(list(a))
            lambdas.append(nv)
            if len(lambdas) == d:
                break
    return tuple(lambdas)


def _acoords(vec, awits, k):
    """Coordinates of vec (lattice coords) in the basis a_1..a_k (rows)."""
    cols = []
    rank = 0
    idxs = []
    for t in range(len(vec)):
        col = [awits[j][t] for j in range(k)]
        if frac_rank([list(x) for x in (cols + [col])]) > rank:
            cols.append(col)
            idxs.append(t)
            rank += 1
        if rank == k:
            break
    mat = [[Fraction(awits[j][t]) for j in range(k)] for t in idxs]
    rhs = [Fraction(vec[t]) for t in idxs]
    from .linalg import frac_solve

    sol = frac_solve(mat, rhs)
    # verify consistency on the remaining coordinates
    for t in range(len(vec)):
        assert sum(sol[j] * awits[j][t] for j in range(k)) == vec[t], (
            "vector not in the witness span"
        )
    return sol


def _saturation_basis(rows, n):
    """Basis of {x in Z^n : x in Q-span(rows)} for integer rows."""
    from .linalg import integer_kernel

    orth = integer_kernel([list(r) for r in rows])
    if not orth:
        return [list(r) for r in standard_lattice(n).rows]  # full space
    sat = integer_kernel([list(c) for c in orth])
    return sat


def mahler_basis(report: MinimaReport, lattice: LatticeBasis):
    """Basis e_1..e_d of the lattice with ||e_1|| = lambda_1,
    ||e_i|| <= max(1, i/2) lambda_i, and Span(e_1..e_i) = Span(a_1..a_i).

    Successive lifting of the witnesses through the saturated filtration;
    a witness is kept outright whenever it extends the previous basis,
    otherwise a generator of the next filtration quotient is reduced to
    half-integral witness coordinates.
    """
    d = lattice.n
    awits = [list(w) for w in report.witnesses]
    basis = []  # rows in lattice coordinates
    for i in range(1, d + 1):
        sat = _saturation_basis(awits[:i], d)
        assert len(sat) == i
        # find g in sat-lattice whose a_i-coefficient generates the image
        fvals = []
        for b in sat:
            fvals.append(_acoords(b, awits, i)[i - 1])
        den = 1
        for q in fvals:
            den = den * q.denominator // _gcd(den, q.denominator)
        nums = [int(q * den) for q in fvals]
        g_int, combo = _gcd_combo(nums)
        assert g_int > 0, "a_i has zero coefficient against its own filtration"
        # f(a_i) = 1 must be an integer multiple of the generator g_int/den
        assert den % g_int == 0, "witness coefficient lattice inconsistency"
        m = den // g_int
        if m == 1:
            e = list(awits[i - 1])
        else:
            e = [sum(combo[j] * sat[j][t] for j in range(i)) for t in range(d)]
            # reduce the a_j-coefficients (j < i) into [-1/2, 1/2] * t_jj
            for j in range(i - 1, 0, -1):
                delta = _acoords(e, awits, i)[j - 1]
                tjj = _acoords(basis[j - 1], awits, j)[j - 1]
                c = _round_nearest(delta / tjj)
                if c:
                    e = [a - c * b for a, b in zip(e, basis[j - 1])]
        basis.append(e)
    rows = [lattice.to_ambient(e) for e in basis]
    out = LatticeBasis(rows)
    # exact basis-of-the-same-lattice certificate
    assert abs(frac_det([list(lattice.coords_of(r)) for r in rows])) == 1
    return out


def _gcd(a, b):
    from math import gcd as _g

    return _g(a, b)


def _gcd_combo(nums):
    """(g, coeffs) with g = gcd(nums) = sum coeffs[i]*nums[i], g >= 0."""
    from .linalg import xgcd

    g, combo = 0, [0] * len(nums)
    for i, v in enumerate(nums):
        if v == 0:
            continue
        if g == 0:
            g = abs(v)
            combo = [0] * len(nums)
            combo[i] = 1 if v > 0 else -1
            continue
        gg, x, y = xgcd(g, v)
        combo = [x * c for c in combo]
        combo[i] += y
        g = gg
    return g, combo


def _round_nearest(q):
    """Nearest integer, ties toward even (deterministic)."""
    fl = q.numerator // q.denominator
    rem = q - fl
    if rem > Fraction(1, 2):
        return fl + 1
    if rem < Fraction(1, 2):
        return fl
    return fl if fl % 2 == 0 else fl + 1


def complete_primitive_to_basis(z, lattice: LatticeBasis):
    """Extend a primitive lattice vector (given in lattice coordinates)
    to a basis of the lattice, primitive vector first."""
    z = [int(a) for a in z]
    c = vec_content(z)
    if c != 1:
        raise NotPrimitiveError(f"vector has content {c}, expected 1", content=c)
    u = unimodular_with_first_row(z)
    return LatticeBasis([lattice.to_ambient(row) for row in u])


@dataclass(frozen=True)
class BoxApproximation:
    basis: LatticeBasis       # rows e_1..e_d (ambient)
    lengths: tuple            # positive integers
    blowup: Fraction          # B_R(e;L) subset of blowup * B
    minima: MinimaReport

    def to_json(self):
        return {
            "basis": self.basis.to_json(),
            "L": [int(l) for l in self.lengths],
            "blowup": _fmt(self.blowup),
            "minima": self.minima.to_json(),
        }


def nilp_box_approx(body, lattice, bracket, budget=DEFAULT_BUDGET):
    """Bracket-compatible box approximation.

    Requires body strictly thick w.r.t. the lattice, [B,B] contained in B
    (exact check on vertices, sufficient by bilinearity and convexity) and
    [Lambda, Lambda] contained in Lambda (checked on basis pairs).  Returns
    a reversed-order Mahler basis with integer lengths such that
    B is contained in B_R(e;L), (e;L) is in 1-upper-triangular form, and
    B_R(e;L) is contained in blowup * B with the blowup reported.
    """
    d = lattice.n
    verts = body.vertices()
    for i, v in enumerate(verts):
        for w in verts[i:]:
            if body.norm(bracket(v, w)) > 1:
                raise ValidationError("[B,B] not contained in B on vertices")
    for i in range(d):
        for j in range(i + 1, d):
            val = bracket(lattice.rows[i], lattice.rows[j])
            if not lattice.contains(val):
                raise ValidationError("[Lambda,Lambda] not contained in Lambda")
    report = successive_minima(body, lattice, budget=budget)
    if report.lambdas[-1] >= 1:
        raise ThicknessError(
            f"body is not strictly thick: lambda_d = {report.lambdas[-1]}",
            lambda_last=report.lambdas[-1],
        )
    if report.thickness_index != 1:
        raise ThicknessError(
            "norm < 1 lattice points do not generate the lattice "
            f"(index {report.thickness_index})",
            lambda_last=report.lambdas[-1],
        )
    mb = mahler_basis(report, lattice)
    rows = list(mb.rows)[::-1]
    e = LatticeBasis(rows)
    # initial integer lengths: cover the body exactly
    maxima = [Fraction(0)] * d
    for v in verts:
        coords = e.coords_of(v)
        for i, c in enumerate(coords):
            if abs(c) > maxima[i]:
                maxima[i] = abs(c)
    L = [max(1, -(-m.numerator // m.denominator)) for m in maxima]
    # bracket table in the new basis; must be integral and lower-supported
    table = {}
    for i in range(d):
        for j in range(i + 1, d):
            coords = e.coords_of(bracket(e.rows[i], e.rows[j]))
            for k, c in enumerate(coords):
                if c and k <= j:
                    raise ValidationError(
                        "bracket incompatibility: [e_i,e_j] not supported "
                        "strictly past j after reordering"
                    )
                if c.denominator != 1:
                    raise ValidationError("bracket not integral on the lattice")
            table[(i, j)] = [int(c) for c in coords]
    # fix-up loop: ensure |c_m| <= L_m / (L_i L_j) for m > j, growing tails
    for k in range(1, d):
        for i in range(k):
            coords = table[(i, k)]
            for m in range(k + 1, d):
                need = abs(coords[m]) * L[i] * L[k]
                if L[m] < need:
                    L[m] = need
    # closed-inequality certificate of 1-upper-triangular form
    for (i, j), coords in table.items():
        for m in range(j + 1, d):
            assert abs(coords[m]) * L[i] * L[j] <= L[m]
    blowup = Fraction(0)
    for signs in product((1, -1), repeat=d):
        corner = tuple(
            sum(s * l * e.rows[i][t] for i, (s, l) in enumerate(zip(signs, L)))
            for t in range(d)
        )
        nv = body.norm(corner)
        if nv > blowup:
            blowup = nv
    return BoxApproximation(e, tuple(L), blowup, report)
