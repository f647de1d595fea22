"""Hall basic commutators and exact multiplication in free nilpotent groups.

A group element is identified by its collected exponent vector
(l_1, ..., l_d) meaning u_1^{l_1} ... u_d^{l_d} over the ordered list of
basic commutators u_1, ..., u_d of total weight <= s.  Collection is done
from the left with a memoized table of commutator normal forms; the table
itself is bootstrapped through the faithful embedding of the free
nilpotent group into the units of the degree-truncated free associative
ring Z<X_1,...,X_r> (x_i -> 1 + X_i), where equality is literal equality
of polynomials and normal forms are recovered by weight-by-weight peeling.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import CapExceededError, DEFAULT_RANK_CAP
from .linalg import frac_inverse, frac_rank

# ---------------------------------------------------------------------------
# truncated free associative ring  Z<X_1..X_r> / (words of degree > s)
# monomial = tuple of letter indices (0-based); {} means the zero polynomial


def _p_mul(a, b, s):
    out = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            if len(ma) + len(mb) > s:
                continue
            m = ma + mb
            v = out.get(m, 0) + ca * cb
            if v:
                out[m] = v
            elif m in out:
                del out[m]
    return out


def _p_add(a, b, sign=1):
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + sign * c
        if v:
            out[m] = v
        elif m in out:
            del out[m]
    return out


def _p_one():
    return {(): 1}


def _p_inv(a, s):
    # a = 1 + u with u of positive degree; inverse = sum_k (-u)^k, k <= s
    assert a.get((), 0) == 1
    neg_u = {m: -c for m, c in a.items() if m != ()}
    out = _p_one()
    term = _p_one()
    for _ in range(s):
        term = _p_mul(term, neg_u, s)
        if not term:
            break
        out = _p_add(out, term)
    return out


def _p_pow(a, e, s):
    if e < 0:
        return _p_pow(_p_inv(a, s), -e, s)
    out = _p_one()
    base = a
    while e:
        if e & 1:
            out = _p_mul(out, base, s)
        e >>= 1
        if e:
            base = _p_mul(base, base, s)
    return out


def _p_comm(a, b, s):
    # [a, b] = a^-1 b^-1 a b
    return _p_mul(_p_mul(_p_inv(a, s), _p_inv(b, s), s), _p_mul(a, b, s), s)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasicCommutator:
    """One entry of the ordered Hall list.

    ``left``/``right`` are 1-based basis indices for [u_left, u_right]
    (left > right); both are 0 for the rank generators themselves.
    """

    index: int            # 1-based position in the list
    left: int
    right: int
    chi: tuple            # weight vector, length r
    zeta: int             # total weight |chi|

    @property
    def is_leaf(self):
        return self.left == 0

    def def_json(self):
        if self.is_leaf:
            return {"leaf": self.index}
        return {"pair": [self.left, self.right]}


def witt_dimension(r, s):
    """Number of basic commutators of total weight <= s in rank r."""
    return sum(_witt(r, n) for n in range(1, s + 1))


def _witt(r, n):
    total = 0
    for m in range(1, n + 1):
        if n % m == 0:
            total += _moebius(m) * r ** (n // m)
    return total // n


def _moebius(n):
    if n == 1:
        return 1
    result, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


class HallBasis:
    """Ordered Hall list for rank r, step s, plus the collection machinery.

    All tables are built eagerly in the constructor; instances are
    immutable afterwards and safe to share across threads.
    """

    def __init__(self, r, s, max_rank=DEFAULT_RANK_CAP):
        if r < 1 or s < 1:
            raise ValueError("rank and step must be >= 1")
        d_expected = witt_dimension(r, s)
        if max_rank is not None and d_expected > max_rank:
            raise CapExceededError(
                f"Hall basis for rank {r}, step {s} has total rank "
                f"{d_expected} > cap {max_rank}"
            )
        self.r = r
        self.s = s
        self.basis = self._enumerate(r, s)
        self.d = len(self.basis)
        assert self.d == d_expected
        self._gen_poly = []
        for c in self.basis:
            self._gen_poly.append(self._commutator_poly(c))
        self._build_peel_tables()
        self._table = self._build_table()

    # -- construction ------------------------------------------------------

    @staticmethod
    def _enumerate(r, s):
        basis = [
            BasicCommutator(i + 1, 0, 0, tuple(1 if j == i else 0 for j in range(r)), 1)
            for i in range(r)
        ]
        for weight in range(2, s + 1):
            found = []
            for i, ui in enumerate(basis, start=1):
                for j, uj in enumerate(basis, start=1):
                    if i <= j:
                        continue
                    if ui.zeta + uj.zeta != weight:
                        continue
                    # Hall condition: if u_i = [u_s, u_t] then j >= t
                    if not ui.is_leaf and j < ui.right:
                        continue
                    chi = tuple(a + b for a, b in zip(ui.chi, uj.chi))
                    found.append((chi, i, j))
            found.sort()
            for chi, i, j in found:
                basis.append(BasicCommutator(len(basis) + 1, i, j, chi, weight))
        return basis

    def _commutator_poly(self, c):
        if c.is_leaf:
            return _p_add(_p_one(), {(c.index - 1,): 1})
        a = self._gen_poly[c.left - 1]
        b = self._gen_poly[c.right - 1]
        return _p_comm(a, b, self.s)

    def _build_peel_tables(self):
        """Per weight class: pivot monomials and the inverse coefficient
        matrix used to read off exponents from the leading homogeneous
        component of a partially collected element."""
        self._classes = []   # list of (index_list, pivot_monomials, inverse)
        by_weight = {}
        for c in self.basis:
            by_weight.setdefault(c.zeta, []).append(c.index)
        for weight in sorted(by_weight):
            idxs = by_weight[weight]
            lead = []
            for i in idxs:
                poly = self._gen_poly[i - 1]
                lead.append(
                    {m: c for m, c in poly.items() if len(m) == weight}
                )
            monomials = sorted({m for l in lead for m in l})
            # choose a row (monomial) subset making the matrix invertible
            pivots = []
            chosen_rows = []
            for m in monomials:
                row = [l.get(m, 0) for l in lead]
                if frac_rank(chosen_rows + [row]) > len(pivots):
                    pivots.append(m)
                    chosen_rows.append(row)
                    if len(pivots) == len(idxs):
                        break
            assert len(pivots) == len(idxs)
            inv = frac_inverse(chosen_rows)
            self._classes.append((idxs, pivots, inv))

    def _peel(self, poly):
        """Collected exponent vector of a group element given as a
        truncated Magnus polynomial."""
        ell = [0] * self.d
        rem = poly
        for idxs, pivots, inv in self._classes:
            weight = self.basis[idxs[0] - 1].zeta
            rhs = [rem.get(m, 0) for m in pivots]
            if any(rhs):
                coeffs = [
                    sum(inv[i][j] * rhs[j] for j in range(len(rhs)))
                    for i in range(len(idxs))
                ]
                for i, k in enumerate(idxs):
                    c = coeffs[i]
                    assert c.denominator == 1, "non-integral collected exponent"
                    ell[k - 1] = int(c)
                # divide off this weight class: rem <- (u_i^l..)^{-1} rem
                strip = _p_one()
                for k in idxs:
                    if ell[k - 1]:
                        strip = _p_mul(
                            strip, _p_pow(self._gen_poly[k - 1], ell[k - 1], self.s),
                            self.s,
                        )
                rem = _p_mul(_p_inv(strip, self.s), rem, self.s)
            # sanity: no residue at or below this weight
            assert not any(
                c and 0 < len(m) <= weight for m, c in rem.items()
            ), "peel residue"
        assert rem == _p_one(), "element did not collect to the identity"
        return tuple(ell)

    def _build_table(self):
        """Normal forms of [u_i^{ei}, u_j^{ej}] for i < j, all four signs.

        Every entry is supported on indices k with chi(u_k) >= chi_i + chi_j
        componentwise; in particular on indices > j.
        """
        table = {}
        for j in range(2, self.d + 1):
            for i in range(1, j):
                wi = self.basis[i - 1].zeta
                wj = self.basis[j - 1].zeta
                zero = (0,) * self.d
                for ei in (1, -1):
                    for ej in (1, -1):
                        if wi + wj > self.s:
                            table[(i, j, ei, ej)] = zero
                            continue
                        pa = _p_pow(self._gen_poly[i - 1], ei, self.s)
                        pb = _p_pow(self._gen_poly[j - 1], ej, self.s)
                        table[(i, j, ei, ej)] = self._peel(_p_comm(pa, pb, self.s))
        return table

    # -- public operations --------------------------------------------------

    def commutator_table(self):
        """Mapping (i, j, e_i, e_j) with i < j -> collected exponent vector
        of [u_i^{e_i}, u_j^{e_j}]."""
        return dict(self._table)

    def identity(self):
        return (0,) * self.d

    def word_of(self, ell):
        """The letters of u_1^{l_1}...u_d^{l_d} as (index, sign) pairs."""
        word = []
        for k, e in enumerate(ell, start=1):
            sign = 1 if e > 0 else -1
            word.extend([(k, sign)] * abs(e))
        return word

    def collect(self, word):
        """Unique collected form of a word of signed letters (index, sign).

        Collection from the left: letters are merged one at a time into an
        already-collected prefix, swapping each letter past higher-index
        generators via the memoized table.
        """
        ell = [0] * self.d
        for idx, sign in word:
            if not 1 <= idx <= self.d:
                raise ValueError(f"letter index {idx} out of range 1..{self.d}")
            if sign not in (1, -1):
                raise ValueError("letter sign must be +1 or -1")
            self._merge_letter(ell, idx, sign)
        return tuple(ell)

    def _merge_letter(self, ell, g0, t0):
        pending = [(g0, t0)]
        while pending:
            g, t = pending.pop()
            j = None
            for k in range(self.d, g, -1):
                if ell[k - 1]:
                    j = k
                    break
            if j is None:
                ell[g - 1] += t
                continue
            sigma = 1 if ell[j - 1] > 0 else -1
            ell[j - 1] -= sigma
            # u_j^sigma u_g^t = u_g^t u_j^sigma [u_j^sigma, u_g^t]
            # [u_j^sigma, u_g^t] = [u_g^t, u_j^sigma]^{-1}
            w = self._table[(g, j, t, sigma)]
            # letters of the inverse of the collected tail, highest first
            inv_letters = []
            for k in range(self.d, j, -1):
                e = w[k - 1]
                if e:
                    sgn = -1 if e > 0 else 1
                    inv_letters.extend([(k, sgn)] * abs(e))
            pending.extend(reversed(inv_letters))
            pending.append((j, sigma))
            pending.append((g, t))

    def poly_of(self, ell):
        """Truncated Magnus polynomial of a collected element."""
        out = _p_one()
        for k, e in enumerate(ell, start=1):
            if e:
                out = _p_mul(out, _p_pow(self._gen_poly[k - 1], e, self.s), self.s)
        return out

    def multiply(self, a, b):
        """Product of two collected elements, again in collected form."""
        return self._peel(_p_mul(self.poly_of(a), self.poly_of(b), self.s))

    def multiply_letter(self, a, idx, sign):
        """Product a * u_idx^{sign} via one collection merge (fast path)."""
        ell = list(a)
        self._merge_letter(ell, idx, sign)
        return tuple(ell)

    def invert(self, a):
        return self._peel(_p_inv(self.poly_of(a), self.s))

    def power(self, a, e):
        return self._peel(_p_pow(self.poly_of(a), e, self.s))

    def conjugate(self, a, g):
        """g^-1 a g in collected form."""
        pg = self.poly_of(g)
        return self._peel(
            _p_mul(_p_mul(_p_inv(pg, self.s), self.poly_of(a), self.s), pg, self.s)
        )

    def commutator(self, a, b):
        return self._peel(_p_comm(self.poly_of(a), self.poly_of(b), self.s))

    def chi(self, k):
        return self.basis[k - 1].chi

    def weight(self, k):
        return self.basis[k - 1].zeta

    def to_json(self):
        return {
            "r": self.r,
            "s": self.s,
            "d": self.d,
            "basis": [
                {
                    "index": c.index,
                    "def": c.def_json(),
                    "chi": list(c.chi),
                    "zeta": c.zeta,
                }
                for c in self.basis
            ],
        }


def build_hall_basis(r, s, max_rank=DEFAULT_RANK_CAP):
    """Public constructor mirroring HallBasis(...)."""
    return HallBasis(r, s, max_rank=max_rank)


def parse_word(text):
    """Parse a word like "1,-2,1" into letters [(1,+1),(2,-1),(1,+1)]."""
    letters = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        v = int(tok)
        if v == 0:
            raise ValueError("letter 0 is not a generator")
        letters.append((abs(v), 1 if v > 0 else -1))
    return letters
