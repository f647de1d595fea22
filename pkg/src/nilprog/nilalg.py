"""Exact rational arithmetic in nilpotent Lie algebras over a Hall basis.

Structure constants for the free nilpotent Lie algebra come from Jacobi
rewriting of non-basic brackets (no group machinery involved), so this
module is an independent route against which group collection is tested.
The Baker-Campbell-Hausdorff series is computed once per step in the
rational truncated tensor algebra on two letters and decomposed over the
rank-2 Hall basis; evaluation in any context folds the stored bracket
trees through that context's structure constants.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm

from .errors import (
    CapExceededError,
    TriangularityError,
    ValidationError,
    DEFAULT_BCH_STEP_CAP,
)
from .hall import HallBasis, _p_mul, _p_add, _p_one
from .linalg import frac_inverse, frac_rank


def _vec(d, items=()):
    v = [Fraction(0)] * d
    for k, c in items:
        v[k] = c
    return v


class LieAlgebraContext:
    """Nilpotent Lie algebra of dimension d given by sparse structure
    constants {(i, j): {k: c}} for 0-based i < j, [e_i, e_j] = sum c e_k.

    Antisymmetry is by construction; the Jacobi identity and nilpotency
    of step <= `step` are verified exactly on creation.
    """

    def __init__(self, d, step, structure, grading=None, check=True,
                 jacobi_sample_cap=36):
        self.d = d
        self.step = step
        self.structure = {
            key: {k: Fraction(c) for k, c in val.items() if c}
            for key, val in structure.items()
        }
        self.structure = {key: val for key, val in self.structure.items() if val}
        self.grading = tuple(grading) if grading is not None else None
        self.integer_constants = all(
            c.denominator == 1 for val in self.structure.values() for c in val.values()
        )
        if check:
            self._check_nilpotent()
            self._check_jacobi(jacobi_sample_cap)

    # -- basic bracket machinery -------------------------------------------

    def basis_bracket(self, i, j):
        """[e_i, e_j] as a dense vector (0-based indices)."""
        v = [Fraction(0)] * self.d
        if i == j:
            return v
        if i < j:
            for k, c in self.structure.get((i, j), {}).items():
                v[k] = c
        else:
            for k, c in self.structure.get((j, i), {}).items():
                v[k] = -c
        return v

    def bracket(self, u, v):
        """Bracket of two rational coordinate vectors."""
        out = [Fraction(0)] * self.d
        for (i, j), comps in self.structure.items():
            t = u[i] * v[j] - u[j] * v[i]
            if t:
                for k, c in comps.items():
                    out[k] += t * c
        return out

    def _bracket_int(self, u, v):
        """Bracket of integer vectors with integer constants (fast path)."""
        out = [0] * self.d
        for (i, j), comps in self._int_structure.items():
            t = u[i] * v[j] - u[j] * v[i]
            if t:
                for k, c in comps.items():
                    out[k] += t * c
        return out

    @property
    def _int_structure(self):
        if not hasattr(self, "_int_structure_cache"):
            assert self.integer_constants
            self._int_structure_cache = {
                key: {k: int(c) for k, c in val.items()}
                for key, val in self.structure.items()
            }
        return self._int_structure_cache

    # -- consistency checks -------------------------------------------------

    def _check_nilpotent(self):
        layer = [
            _vec(self.d, [(k, Fraction(1))]) for k in range(self.d)
        ]
        for depth in range(2, self.step + 2):
            nxt = []
            for i in range(self.d):
                ei = _vec(self.d, [(i, Fraction(1))])
                for v in layer:
                    w = self.bracket(ei, v)
                    if any(w):
                        nxt.append(w)
            if not nxt:
                self.nilpotency_class = depth - 1
                return
            # keep an independent spanning subset to bound growth
            span = []
            for w in nxt:
                if frac_rank(span + [w]) > len(span):
                    span.append(w)
            layer = span
        raise ValidationError(
            f"algebra is not nilpotent of step <= {self.step}"
        )

    def _sparse_basis_bracket(self, i, j):
        if i == j:
            return {}
        if i < j:
            return self.structure.get((i, j), {})
        return {k: -c for k, c in self.structure.get((j, i), {}).items()}

    def _sparse_vec_basis_bracket(self, vec, k):
        out = {}
        for m, c in vec.items():
            for t, c2 in self._sparse_basis_bracket(m, k).items():
                v = out.get(t, 0) + c * c2
                if v:
                    out[t] = v
                elif t in out:
                    del out[t]
        return out

    def _check_jacobi(self, sample_cap):
        d = self.d
        triples = []
        if d <= sample_cap:
            triples = [
                (i, j, k)
                for i in range(d)
                for j in range(i + 1, d)
                for k in range(j + 1, d)
            ]
        else:
            # deterministic sample
            step = max(1, (d * d * d) // 20000)
            count = 0
            for i in range(d):
                for j in range(i + 1, d):
                    for k in range(j + 1, d):
                        if count % step == 0:
                            triples.append((i, j, k))
                        count += 1
        for i, j, k in triples:
            total = {}
            for (a, b), c in (((i, j), k), ((j, k), i), ((k, i), j)):
                term = self._sparse_vec_basis_bracket(
                    self._sparse_basis_bracket(a, b), c
                )
                for t, v in term.items():
                    w = total.get(t, 0) + v
                    if w:
                        total[t] = w
                    elif t in total:
                        del total[t]
            if total:
                raise ValidationError(f"Jacobi identity fails on triple {(i, j, k)}")

    # -- serialization -------------------------------------------------------

    def to_json(self):
        return {
            "d": self.d,
            "step": self.step,
            "grading": list(self.grading) if self.grading else None,
            "structure": {
                f"{i + 1},{j + 1}": {
                    str(k + 1): f"{c.numerator}/{c.denominator}"
                    for k, c in sorted(comps.items())
                }
                for (i, j), comps in sorted(self.structure.items())
            },
        }


# ---------------------------------------------------------------------------
# free nilpotent Lie algebra via Jacobi rewriting of Hall brackets


def free_nilpotent_lie(basis: HallBasis) -> LieAlgebraContext:
    """Structure constants of the free s-step nilpotent Lie algebra on the
    Hall basis, by recursive rewriting with antisymmetry and Jacobi."""
    d, s = basis.d, basis.s
    pair_index = {
        (c.left, c.right): c.index for c in basis.basis if not c.is_leaf
    }
    weight = [c.zeta for c in basis.basis]
    memo = {}

    def bracket_pair(i, j):
        """[u_i, u_j] for 1-based i > j as {index: int}."""
        if (i, j) in memo:
            return memo[(i, j)]
        assert i > j
        w = weight[i - 1] + weight[j - 1]
        if w > s:
            memo[(i, j)] = {}
            return {}
        ci = basis.basis[i - 1]
        if ci.is_leaf or j >= ci.right:
            out = {pair_index[(i, j)]: 1}
        else:
            # u_i = [u_a, u_b] with j < b:   [[a,b],j] = [[a,j],b] + [a,[b,j]]
            a, b = ci.left, ci.right
            out = {}
            for k, c in _bracket_vec_basis(bracket_pair(a, j), b).items():
                out[k] = out.get(k, 0) + c
            for k, c in _bracket_basis_vec(a, bracket_pair(b, j)).items():
                out[k] = out.get(k, 0) + c
            out = {k: c for k, c in out.items() if c}
        memo[(i, j)] = out
        return out

    def bracket_any(i, j):
        if i == j:
            return {}
        if i > j:
            return bracket_pair(i, j)
        return {k: -c for k, c in bracket_pair(j, i).items()}

    def _bracket_vec_basis(vec, b):
        out = {}
        for k, c in vec.items():
            for m, c2 in bracket_any(k, b).items():
                out[m] = out.get(m, 0) + c * c2
        return {k: c for k, c in out.items() if c}

    def _bracket_basis_vec(a, vec):
        out = {}
        for k, c in vec.items():
            for m, c2 in bracket_any(a, k).items():
                out[m] = out.get(m, 0) + c * c2
        return {k: c for k, c in out.items() if c}

    structure = {}
    for j in range(2, d + 1):
        for i in range(1, j):
            comps = bracket_any(i, j)
            if comps:
                structure[(i - 1, j - 1)] = {k - 1: Fraction(c) for k, c in comps.items()}
    ctx = LieAlgebraContext(d, s, structure, grading=weight)
    return ctx


# ---------------------------------------------------------------------------
# Baker-Campbell-Hausdorff series on two letters


@dataclass(frozen=True)
class BCHSeries:
    """log(exp X exp Y) truncated at ``step``, decomposed over the rank-2
    Hall basis: term ``k`` contributes ``coeffs[k] * H_k(X, Y)``."""

    step: int
    hall2: HallBasis
    coeffs: tuple  # Fraction per 1-based rank-2 Hall basis index

    def denominator_lcm(self):
        out = 1
        for c in self.coeffs:
            out = lcm(out, c.denominator)
        return out


_series_cache = {}


def bch_series(step, cap=DEFAULT_BCH_STEP_CAP):
    if cap is not None and step > cap:
        raise CapExceededError(f"BCH step {step} exceeds cap {cap}")
    if step in _series_cache:
        return _series_cache[step]
    h2 = HallBasis(2, step, max_rank=None)
    # exp(X) exp(Y) in Q<X,Y> truncated at degree `step`
    def exp_letter(letter):
        out = {(): Fraction(1)}
        fact = 1
        for k in range(1, step + 1):
            fact *= k
            out[(letter,) * k] = Fraction(1, fact)
        return out

    e = _p_mul(exp_letter(0), exp_letter(1), step)
    u = {m: c for m, c in e.items() if m != ()}
    z = {}
    term = _p_one()
    for k in range(1, step + 1):
        term = _p_mul(term, u, step)
        sign = Fraction((-1) ** (k + 1), k)
        z = _p_add(z, {m: sign * c for m, c in term.items()})

    # tensor expansion of each Hall bracket: iota([a,b]) = ab - ba
    iota = []
    for c in h2.basis:
        if c.is_leaf:
            iota.append({(c.index - 1,): Fraction(1)})
        else:
            a, b = iota[c.left - 1], iota[c.right - 1]
            iota.append(_p_add(_p_mul(a, b, step), _p_mul(b, a, step), -1))

    coeffs = [Fraction(0)] * h2.d
    for weight in range(1, step + 1):
        idxs = [c.index for c in h2.basis if c.zeta == weight]
        if not idxs:
            continue
        cols = [iota[i - 1] for i in idxs]
        monomials = sorted({m for col in cols for m in col})
        pivots, rows = [], []
        for m in monomials:
            row = [col.get(m, Fraction(0)) for col in cols]
            if frac_rank(rows + [row]) > len(pivots):
                pivots.append(m)
                rows.append(row)
                if len(pivots) == len(idxs):
                    break
        inv = frac_inverse(rows)
        rhs = [z.get(m, Fraction(0)) for m in pivots]
        sol = [sum(inv[i][j] * rhs[j] for j in range(len(rhs))) for i in range(len(idxs))]
        for i, k in enumerate(idxs):
            coeffs[k - 1] = sol[i]
        # verify the decomposition reproduces the full degree-w component
        recon = {}
        for i, k in enumerate(idxs):
            recon = _p_add(recon, {m: sol[i] * c for m, c in cols[i].items()})
        zw = {m: c for m, c in z.items() if len(m) == weight}
        assert recon == zw, f"BCH degree {weight} is not a Lie element?"

    series = BCHSeries(step, h2, tuple(coeffs))
    assert series.coeffs[0] == 1 and series.coeffs[1] == 1
    if step >= 2:
        assert series.coeffs[2] == Fraction(-1, 2)  # [u2,u1] = -[X,Y]
    _series_cache[step] = series
    return series


def bch_denominator_lcm(step, cap=DEFAULT_BCH_STEP_CAP):
    """lcm of the denominators of all BCH coefficients of weight <= step."""
    return bch_series(step, cap=cap).denominator_lcm()


def bch(x, y, ctx: LieAlgebraContext):
    """log(exp(x) exp(y)) in ctx, exactly, truncated at the context step."""
    step = min(ctx.step, ctx.nilpotency_class)
    series = bch_series(max(step, 1))
    h2 = series.hall2
    d = ctx.d
    if ctx.integer_constants:
        den = 1
        for a in x:
            den = lcm(den, Fraction(a).denominator)
        for a in y:
            den = lcm(den, Fraction(a).denominator)
        xi = [int(Fraction(a) * den) for a in x]
        yi = [int(Fraction(a) * den) for a in y]
        vals = [None] * h2.d
        out = [Fraction(xv + yv, den) for xv, yv in zip(xi, yi)]
        for c in h2.basis:
            k = c.index - 1
            if c.is_leaf:
                vals[k] = xi if c.index == 1 else yi
                continue
            if c.zeta > step:
                vals[k] = None
                continue
            a, b = vals[c.left - 1], vals[c.right - 1]
            vals[k] = ctx._bracket_int(a, b) if (a and any(a) and b and any(b)) else [0] * d
            coeff = series.coeffs[k]
            if coeff and any(vals[k]):
                scale = coeff / den ** c.zeta
                for t in range(d):
                    if vals[k][t]:
                        out[t] += scale * vals[k][t]
        return tuple(out)
    vals = [None] * h2.d
    xf = [Fraction(a) for a in x]
    yf = [Fraction(a) for a in y]
    out = [a + b for a, b in zip(xf, yf)]
    for c in h2.basis:
        k = c.index - 1
        if c.is_leaf:
            vals[k] = xf if c.index == 1 else yf
            continue
        if c.zeta > step:
            vals[k] = None
            continue
        vals[k] = ctx.bracket(vals[c.left - 1], vals[c.right - 1])
        coeff = series.coeffs[k]
        if coeff:
            for t in range(d):
                if vals[k][t]:
                    out[t] += coeff * vals[k][t]
    return tuple(out)


def bch_inverse(x):
    """log of the group inverse: exp(x)^{-1} = exp(-x)."""
    return tuple(-Fraction(a) for a in x)


# ---------------------------------------------------------------------------
# Mal'cev coordinates of the first and second kind


def check_triangular(ctx: LieAlgebraContext):
    """Require [e_i, e_j] in Span(e_j, ..., e_d) for all i < j."""
    for (i, j), comps in ctx.structure.items():
        bad = [k for k in comps if k < j]
        if bad:
            raise TriangularityError(
                f"[e_{i + 1}, e_{j + 1}] has support on e_{bad[0] + 1} < e_{j + 1}"
            )


def second_kind_from_first(x, ctx: LieAlgebraContext, vectors=None):
    """Exponents (l_1, ..., l_d) with exp(x) = u_1^{l_1} ... u_d^{l_d},
    where u_i = exp(vectors[i]); rationals in general.

    ``vectors`` defaults to the standard basis e_1..e_d and must in any
    case be unitriangular: vectors[i] = e_i + combination of e_{i+1..d}.
    """
    check_triangular(ctx)
    if vectors is not None:
        for i, v in enumerate(vectors):
            assert v[i] == 1 and not any(v[t] for t in range(i)), (
                "peeling basis must be unitriangular"
            )
    y = tuple(Fraction(a) for a in x)
    ell = []
    for i in range(ctx.d):
        li = y[i]
        ell.append(li)
        if li:
            if vectors is None:
                peel = tuple(-li if t == i else Fraction(0) for t in range(ctx.d))
            else:
                peel = tuple(-li * Fraction(a) for a in vectors[i])
            y = bch(peel, y, ctx)
        assert y[i] == 0
    assert not any(y), "peeling left a nonzero residue"
    return tuple(ell)


def first_kind_from_second(ell, ctx: LieAlgebraContext, vectors=None):
    """log(u_1^{l_1} ... u_d^{l_d}) for rational exponents, with
    u_i = exp(vectors[i]) (standard basis by default)."""
    check_triangular(ctx)
    x = tuple(Fraction(0) for _ in range(ctx.d))
    for i in range(ctx.d - 1, -1, -1):
        li = Fraction(ell[i])
        if li:
            if vectors is None:
                vec = tuple(li if t == i else Fraction(0) for t in range(ctx.d))
            else:
                vec = tuple(li * Fraction(a) for a in vectors[i])
            x = bch(vec, x, ctx)
    return x


def second_kind_integer(x, ctx, vectors=None):
    ell = second_kind_from_first(x, ctx, vectors=vectors)
    out = []
    for c in ell:
        if c.denominator != 1:
            raise ValidationError(
                "second-kind coordinates are not integral; exp lattice is "
                "not multiplicatively closed here"
            )
        out.append(int(c))
    return tuple(out)


def group_commutator_log(a, b, ctx):
    """log([exp a, exp b]) with [g, h] = g^-1 h^-1 g h."""
    na = bch_inverse(a)
    nb = bch_inverse(b)
    return bch(bch(bch(na, nb, ctx), a, ctx), b, ctx)


def group_exp_logs(basis: HallBasis, ctx: LieAlgebraContext):
    """Logs of the group basic commutators: leaf k has log e_k; a pair
    [u_a, u_b] has the log of the group commutator of the factor logs.

    The result is a unitriangular family (corrections sit at strictly
    higher weight, hence strictly higher index), suitable as the peeling
    basis for second_kind_from_first."""
    logs = []
    for c in basis.basis:
        if c.is_leaf:
            logs.append(
                tuple(Fraction(1 if t == c.index - 1 else 0) for t in range(ctx.d))
            )
        else:
            logs.append(group_commutator_log(logs[c.left - 1], logs[c.right - 1], ctx))
    for i, v in enumerate(logs):
        assert v[i] == 1 and not any(v[t] for t in range(i))
    return tuple(logs)


# ---------------------------------------------------------------------------
# log of a group-commutator word (bracket forms)

# A bracket form is an int (1-based letter) or a pair (f, g).


def form_weight(form):
    if isinstance(form, int):
        return 1
    return form_weight(form[0]) + form_weight(form[1])


def form_letters(form, acc=None):
    if acc is None:
        acc = set()
    if isinstance(form, int):
        acc.add(form)
    else:
        form_letters(form[0], acc)
        form_letters(form[1], acc)
    return acc


def form_word(form):
    """Group word of the commutator form: [f, g] = f^-1 g^-1 f g."""
    if isinstance(form, int):
        return [(form, 1)]
    wf, wg = form_word(form[0]), form_word(form[1])
    inv = lambda w: [(i, -e) for i, e in reversed(w)]
    return inv(wf) + inv(wg) + wf + wg


def form_eval(form, vectors, ctx):
    if isinstance(form, int):
        return list(vectors[form - 1])
    return ctx.bracket(
        form_eval(form[0], vectors, ctx), form_eval(form[1], vectors, ctx)
    )


def log_commutator(form, step):
    """Expand log alpha(exp v_1, ..., exp v_m) over the free rank-m,
    step-`step` algebra on leaf vectors v_i = e_i.

    Returns (ctx, leading, corrections, total) with total = leading +
    corrections; leading is exactly alpha(v)."""
    m = max(form_letters(form))
    basis = HallBasis(m, step)
    ctx = free_nilpotent_lie(basis)
    unit = [
        tuple(Fraction(1 if t == i else 0) for t in range(ctx.d))
        for i in range(m)
    ]
    acc = tuple(Fraction(0) for _ in range(ctx.d))
    for letter, sign in form_word(form):
        vec = tuple(sign * a for a in unit[letter - 1])
        acc = bch(acc, vec, ctx)
    leading = tuple(form_eval(form, unit, ctx))
    corrections = tuple(a - b for a, b in zip(acc, leading))
    return ctx, leading, corrections, acc


# ---------------------------------------------------------------------------
# integral rescaling: bracket-integral basis + uniform group closure factor


@dataclass(frozen=True)
class RescaledLattice:
    Q: tuple                 # per-coordinate factors f_i = Q_i e_i
    group_factor: int        # uniform q: exp(q * Lambda_f) is a group
    context: LieAlgebraContext   # structure constants in the f-basis


def rescale_to_lattice(basis: HallBasis, ctx: LieAlgebraContext):
    """Integers Q_1..Q_d making all [f_i, f_j] integral in the f-basis
    (f_i = Q_i e_i), chosen greedily from the highest index downward, and
    the smallest uniform factor q such that exp(q Lambda_f) is closed
    under multiplication (certified through the BCH coefficient
    denominators, then spot-verified on basis pairs)."""
    d = ctx.d
    q_vec = [1] * d
    for _ in range(d + 1):
        changed = False
        for k in range(d - 1, -1, -1):
            need = 1
            for (i, j), comps in ctx.structure.items():
                c = comps.get(k)
                if c is None:
                    continue
                val = c * q_vec[i] * q_vec[j] / q_vec[k]
                need = lcm(need, val.denominator)
            if need > 1:
                q_vec[k] *= need
                changed = True
        if not changed:
            break
    else:
        raise ValidationError("bracket rescaling did not stabilize")
    structure_f = {}
    for (i, j), comps in ctx.structure.items():
        new = {}
        for k, c in comps.items():
            val = c * q_vec[i] * q_vec[j] / q_vec[k]
            assert val.denominator == 1
            if val:
                new[k] = val
        if new:
            structure_f[(i, j)] = new
    ctx_f = LieAlgebraContext(d, ctx.step, structure_f, grading=ctx.grading)

    step = min(ctx.step, ctx_f.nilpotency_class)
    series = bch_series(max(step, 1))
    q = 1
    for c in series.hall2.basis:
        if c.zeta < 2 or c.zeta > step:
            continue
        den = series.coeffs[c.index - 1].denominator
        if den == 1:
            continue
        # smallest q with q^(w-1) divisible by den, prime by prime
        need = 1
        n = den
        p = 2
        while p * p <= n:
            if n % p == 0:
                e = 0
                while n % p == 0:
                    n //= p
                    e += 1
                need *= p ** -(-e // (c.zeta - 1))
            p += 1
        if n > 1:
            need *= n
        q = lcm(q, need)
    # spot verification on basis pairs of the scaled lattice
    for i in range(d):
        for j in range(i + 1, d):
            x = tuple(Fraction(q if t == i else 0) for t in range(d))
            y = tuple(Fraction(q if t == j else 0) for t in range(d))
            z = bch(x, y, ctx_f)
            for a in z:
                assert (a / q).denominator == 1, "closure verification failed"
    return RescaledLattice(tuple(q_vec), q, ctx_f)
