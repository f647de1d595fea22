"""Ordered progressions and coset progressions over concrete target groups.

Target groups provide exact multiplication, inversion and a canonical
hashable key per element: integer unitriangular matrices, unitriangular
matrices mod N, and the free nilpotent group in collected coordinates.
Every exhaustive operation is governed by an explicit element budget and
iterates in lexicographic exponent order, so results are deterministic
and identical across worker counts.
"""

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from math import floor

from .errors import (
    BudgetExceededError,
    ValidationError,
    check_budget,
    DEFAULT_BUDGET,
)
from .hall import HallBasis


# ---------------------------------------------------------------------------
# target groups


class Unitriangular:
    """n x n upper unitriangular integer matrices (tuples of row tuples)."""

    name = "unitriangular"

    def __init__(self, n):
        self.n = n

    def identity(self):
        return tuple(
            tuple(1 if i == j else 0 for j in range(self.n)) for i in range(self.n)
        )

    def mult(self, a, b):
        n = self.n
        return tuple(
            tuple(sum(a[i][k] * b[k][j] for k in range(i, j + 1)) if j >= i else 0
                  for j in range(n))
            for i in range(n)
        )

    def inv(self, a):
        n = self.n
        ident = self.identity()
        u = tuple(tuple(a[i][j] - ident[i][j] for j in range(n)) for i in range(n))
        out = ident
        term = ident
        for k in range(1, n):
            term = self.mult_raw(term, u)
            out = tuple(
                tuple(out[i][j] + (-1) ** k * term[i][j] for j in range(n))
                for i in range(n)
            )
        return out

    def mult_raw(self, a, b):
        n = self.n
        return tuple(
            tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
            for i in range(n)
        )

    def power(self, a, e):
        return _generic_power(self, a, e)

    def key(self, a):
        return a

    def element_from_json(self, j):
        m = tuple(tuple(int(x) for x in row) for row in j)
        self._check(m)
        return m

    def element_to_json(self, a):
        return [list(row) for row in a]

    def _check(self, m):
        n = self.n
        if len(m) != n or any(len(r) != n for r in m):
            raise ValidationError(f"expected a {n}x{n} matrix")
        for i in range(n):
            if m[i][i] != 1 or any(m[i][j] != 0 for j in range(i)):
                raise ValidationError("matrix is not upper unitriangular")

    def descriptor(self):
        return {"target": self.name, "n": self.n}


class UnitriangularMod(Unitriangular):
    """Unitriangular matrices with entries mod N (a finite group)."""

    name = "unitriangular_mod"

    def __init__(self, n, modulus):
        super().__init__(n)
        if modulus < 1:
            raise ValidationError("modulus must be >= 1")
        self.modulus = modulus

    def mult(self, a, b):
        m = super().mult(a, b)
        q = self.modulus
        return tuple(
            tuple(x % q if j > i else x for j, x in enumerate(row))
            for i, row in enumerate(m)
        )

    def inv(self, a):
        m = super().inv(a)
        q = self.modulus
        return tuple(
            tuple(x % q if j > i else x for j, x in enumerate(row))
            for i, row in enumerate(m)
        )

    def reduce(self, a):
        q = self.modulus
        return tuple(
            tuple(x % q if j > i else x for j, x in enumerate(row))
            for i, row in enumerate(a)
        )

    def order(self):
        n, q = self.n, self.modulus
        return q ** (n * (n - 1) // 2)

    def elements(self):
        from itertools import product as iproduct

        n, q = self.n, self.modulus
        slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for vals in iproduct(range(q), repeat=len(slots)):
            m = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
            for (i, j), v in zip(slots, vals):
                m[i][j] = v
            yield tuple(tuple(r) for r in m)

    def descriptor(self):
        return {"target": self.name, "n": self.n, "modulus": self.modulus}


class FreeNilpotentGroup:
    """Free nilpotent group of rank r, step s; elements are collected
    exponent vectors over the Hall basis."""

    name = "free_nilpotent"

    def __init__(self, basis: HallBasis):
        self.basis = basis

    def identity(self):
        return self.basis.identity()

    def mult(self, a, b):
        return self.basis.multiply(a, b)

    def mult_letter(self, a, idx, sign):
        return self.basis.multiply_letter(a, idx, sign)

    def inv(self, a):
        return self.basis.invert(a)

    def power(self, a, e):
        return self.basis.power(a, e)

    def key(self, a):
        return a

    def element_from_json(self, j):
        v = tuple(int(x) for x in j)
        if len(v) != self.basis.d:
            raise ValidationError(f"expected a coordinate vector of length {self.basis.d}")
        return v

    def element_to_json(self, a):
        return list(a)

    def descriptor(self):
        return {"target": self.name, "r": self.basis.r, "s": self.basis.s}


def _generic_power(group, a, e):
    if e < 0:
        return _generic_power(group, group.inv(a), -e)
    out = group.identity()
    base = a
    while e:
        if e & 1:
            out = group.mult(out, base)
        e >>= 1
        if e:
            base = group.mult(base, base)
    return out


def target_from_json(desc):
    kind = desc["target"]
    if kind == "unitriangular":
        return Unitriangular(int(desc["n"]))
    if kind == "unitriangular_mod":
        return UnitriangularMod(int(desc["n"]), int(desc["modulus"]))
    if kind == "free_nilpotent":
        return FreeNilpotentGroup(HallBasis(int(desc["r"]), int(desc["s"])))
    raise ValidationError(f"unknown target kind {kind!r}")


# ---------------------------------------------------------------------------
# element sets


class ElementSet:
    """Finite set of target elements with canonical-key dedup and
    deterministic (insertion-order) iteration."""

    def __init__(self, group, elements=()):
        self.group = group
        self._d = {}
        for x in elements:
            self.add(x)

    def add(self, x):
        k = self.group.key(x)
        if k not in self._d:
            self._d[k] = x
            return True
        return False

    def __contains__(self, x):
        return self.group.key(x) in self._d

    def contains_key(self, k):
        return k in self._d

    def __len__(self):
        return len(self._d)

    def __iter__(self):
        return iter(self._d.values())

    def keys(self):
        return self._d.keys()

    def issubset(self, other):
        return all(k in other._d for k in self._d)

    def union(self, other):
        out = ElementSet(self.group)
        out._d.update(self._d)
        out._d.update(other._d)
        return out

    def to_json(self):
        return [self.group.element_to_json(x) for x in self]


def mult_sets(A, B, budget=DEFAULT_BUDGET):
    """{a*b : a in A, b in B} with dedup; budget on |A|*|B| work."""
    check_budget(len(A) * len(B), budget, "set product")
    g = A.group
    out = ElementSet(g)
    for a in A:
        for b in B:
            out.add(g.mult(a, b))
    return out


def set_power(A, n, budget=DEFAULT_BUDGET):
    """A^n as exact n-fold products (A^1 = A)."""
    if n < 1:
        raise ValidationError("set power needs n >= 1")
    out = A
    for _ in range(n - 1):
        out = mult_sets(out, A, budget=budget)
    return out


def inverse_set(A):
    g = A.group
    return ElementSet(g, (g.inv(a) for a in A))


# ---------------------------------------------------------------------------
# homomorphisms


class Homomorphism:
    """Map from a free nilpotent domain (all d basic commutators as
    generators) into a target group, stored by generator images."""

    def __init__(self, basis: HallBasis, target, images):
        self.basis = basis
        self.target = target
        self.images = tuple(images)
        if len(self.images) != basis.d:
            raise ValidationError("need one image per basic commutator")

    @classmethod
    def from_generator_images(cls, basis, target, gen_images):
        if len(gen_images) != basis.r:
            raise ValidationError("need one image per rank generator")
        images = list(gen_images)
        for c in basis.basis[basis.r:]:
            a = images[c.left - 1]
            b = images[c.right - 1]
            images.append(
                target.mult(
                    target.mult(target.inv(a), target.inv(b)), target.mult(a, b)
                )
            )
        return cls(basis, target, images)

    @classmethod
    def identity_on_free(cls, basis):
        g = FreeNilpotentGroup(basis)
        images = [
            tuple(1 if t == k else 0 for t in range(basis.d)) for k in range(basis.d)
        ]
        return cls(basis, g, images)

    def apply(self, ell):
        g = self.target
        out = g.identity()
        for i, e in enumerate(ell):
            if e:
                out = g.mult(out, g.power(self.images[i], e))
        return out

    def validate(self, budget=DEFAULT_BUDGET):
        """Check every commutator-table relation on the images; sufficient
        for well-definedness on a free nilpotent domain."""
        g = self.target
        table = self.basis.commutator_table()
        check_budget(len(table), budget, "homomorphism validation")
        for (i, j, si, sj), coords in table.items():
            a = self.images[i - 1] if si == 1 else g.inv(self.images[i - 1])
            b = self.images[j - 1] if sj == 1 else g.inv(self.images[j - 1])
            lhs = g.mult(g.mult(g.inv(a), g.inv(b)), g.mult(a, b))
            if g.key(lhs) != g.key(self.apply(coords)):
                raise ValidationError(
                    f"images violate the collection relation at {(i, j, si, sj)}"
                )
        return True

    def to_json(self):
        return {
            "domain": {"r": self.basis.r, "s": self.basis.s},
            "target": self.target.descriptor(),
            "images": [self.target.element_to_json(x) for x in self.images],
        }


# ---------------------------------------------------------------------------
# progressions


class OrderedProgression:
    """P_ord(u; L) = {u_1^{l_1} ... u_d^{l_d} : |l_i| <= L_i}."""

    def __init__(self, group, gens, L, chi=None, pexprs=None, hall=None):
        self.group = group
        self.gens = tuple(gens)
        self.L = tuple(int(x) for x in L)
        if len(self.gens) != len(self.L) or any(l < 1 for l in self.L):
            raise ValidationError("need one positive length per generator")
        self.chi = tuple(chi) if chi is not None else None
        self.pexprs = dict(pexprs) if pexprs is not None else None
        self.hall = hall

    @property
    def d(self):
        return len(self.gens)

    def grid_size(self, scale=1):
        size = 1
        for l in self.L:
            size *= 2 * _scaled_bound(scale, l) + 1
        return size

    def to_json(self):
        out = dict(self.group.descriptor())
        out["gens"] = [self.group.element_to_json(g) for g in self.gens]
        out["L"] = list(self.L)
        return out


class CosetProgression:
    """HP for a finite subgroup H normalized by the generators of P."""

    def __init__(self, H: ElementSet, P: OrderedProgression, check=True):
        self.H = H
        self.P = P
        if check:
            self.validate()

    def validate(self):
        g = self.P.group
        ident = g.identity()
        if ident not in self.H:
            raise ValidationError("H does not contain the identity")
        for a in self.H:
            if g.inv(a) not in self.H:
                raise ValidationError("H is not closed under inversion")
            for b in self.H:
                if g.mult(a, b) not in self.H:
                    raise ValidationError("H is not closed under multiplication")
        for u in self.P.gens:
            ui = g.inv(u)
            for h in self.H:
                if g.mult(g.mult(u, h), ui) not in self.H:
                    raise ValidationError("H is not normalized by a generator")
        return True

    def coset_key(self, x):
        g = self.P.group
        return min(g.key(g.mult(x, h)) for h in self.H)

    def to_json(self):
        out = self.P.to_json()
        out["H"] = self.H.to_json()
        return out


def _scaled_bound(scale, l):
    return int(floor(Fraction(scale) * l))


def _grid_ranges(L, scale):
    return [range(-_scaled_bound(scale, l), _scaled_bound(scale, l) + 1) for l in L]


def _iter_lex(P, scale, shard=None):
    """Yield (ell, element) over the exponent grid in lexicographic order,
    multiplying one letter at a time off prefix products."""
    g = P.group
    ranges = _grid_ranges(P.L, scale)
    d = P.d
    if d == 0:
        yield (), g.identity()
        return
    first = ranges[0] if shard is None else shard
    gen_inv = [g.inv(u) for u in P.gens]

    def powers(i, e):
        return g.power(P.gens[i], e)

    # prefix[i] = product of gens[0..i]^{ell[0..i]}
    for e0 in first:
        ell = [e0] + [r.start for r in ranges[1:]]
        prefix = [None] * d
        prefix[0] = powers(0, e0)
        for i in range(1, d):
            prefix[i] = g.mult(prefix[i - 1], powers(i, ell[i]))
        fast = hasattr(g, "mult_letter") and all(
            P.gens[i] == _unit_vector(d, i) for i in range(d)
        )
        while True:
            yield tuple(ell), prefix[d - 1]
            # odometer increment on positions d-1 .. 1
            pos = d - 1
            while pos >= 1 and ell[pos] == ranges[pos].stop - 1:
                pos -= 1
            if pos < 1:
                break
            ell[pos] += 1
            if fast:
                prefix[pos] = g.mult_letter(prefix[pos], pos + 1, 1)
            else:
                prefix[pos] = g.mult(prefix[pos], P.gens[pos])
            for i in range(pos + 1, d):
                ell[i] = ranges[i].start
                prefix[i] = g.mult(prefix[i - 1], powers(i, ell[i]))


def _unit_vector(d, pos):
    return tuple(1 if t == pos else 0 for t in range(d))


def _shards(rng, workers):
    items = list(rng)
    if workers <= 1 or len(items) <= 1:
        return [items]
    n = min(workers, len(items))
    size = -(-len(items) // n)
    return [items[i * size:(i + 1) * size] for i in range(n) if items[i * size:(i + 1) * size]]


def enumerate_progression(P, scale=1, budget=DEFAULT_BUDGET, workers=1):
    """Exact element set {u^ell : |ell_i| <= scale*L_i}."""
    check_budget(P.grid_size(scale), budget, "progression enumeration")
    out = ElementSet(P.group)
    ranges = _grid_ranges(P.L, scale)
    if workers > 1 and P.d >= 1:
        shard_lists = _shards(ranges[0], workers)
        with ThreadPoolExecutor(max_workers=len(shard_lists)) as ex:
            results = ex.map(
                lambda sh: [x for _, x in _iter_lex(P, scale, shard=sh)], shard_lists
            )
            for chunk in results:
                for x in chunk:
                    out.add(x)
    else:
        for _, x in _iter_lex(P, scale):
            out.add(x)
    return out


def enumerate_coset(HP: CosetProgression, scale=1, budget=DEFAULT_BUDGET, workers=1):
    """{h p} over H and the enumerated progression."""
    base = enumerate_progression(HP.P, scale, budget=budget, workers=workers)
    check_budget(len(base) * len(HP.H), budget, "coset enumeration")
    g = HP.P.group
    out = ElementSet(g)
    for p in base:
        for h in HP.H:
            out.add(g.mult(h, p))
    return out


def is_proper(P, hom_images, m, H=None, budget=DEFAULT_BUDGET, workers=1):
    """Distinctness of pi(u_1^{l_1}...u_d^{l_d}) over |l_i| <= m L_i.

    ``hom_images`` is either a Homomorphism (whose target carries the
    images of P's generators) or a list of target images; H (optional)
    is an explicit finite subgroup, in which case distinctness is tested
    modulo H via canonical coset keys.  Returns (True, None) or
    (False, (ell_a, ell_b)) with the lexicographically first collision:
    ell_b is the first grid point (in lex order) whose image repeats an
    earlier point ell_a, and ell_a is the earliest point with that image.
    """
    if isinstance(hom_images, Homomorphism):
        target = hom_images.target
        images = hom_images.images
    else:
        target, images = hom_images
    check_budget(P.grid_size(m), budget, "properness scan")
    imgP = OrderedProgression(target, images, P.L)
    if H is not None:
        keyfn = lambda x: min(target.key(target.mult(x, h)) for h in H)
    else:
        keyfn = target.key

    def scan(shard):
        seen = {}
        collision = None
        for ell, x in _iter_lex(imgP, m, shard=shard):
            k = keyfn(x)
            if k in seen:
                collision = (seen[k], ell)
                break
            seen[k] = ell
        return seen, collision

    ranges = _grid_ranges(P.L, m)
    shard_lists = _shards(ranges[0], workers) if P.d else [[0]]
    if P.d == 0:
        return True, None
    results = []
    if len(shard_lists) > 1:
        with ThreadPoolExecutor(max_workers=len(shard_lists)) as ex:
            results = list(ex.map(scan, shard_lists))
    else:
        results = [scan(shard_lists[0])]
    # merge: global first-occurrence map, then earliest second hit
    first = {}
    for seen, _ in results:
        for k, ell in seen.items():
            if k not in first or ell < first[k]:
                first[k] = ell
    best = None
    for seen, collision in results:
        cands = []
        if collision is not None:
            cands.append(collision[1])
        for k, ell in seen.items():
            if first[k] != ell:
                cands.append(ell)
        for ell in cands:
            if best is None or ell < best:
                best = ell
    if best is None:
        return True, None
    # recompute the image of `best` to find its first partner
    x = target.identity()
    for i, e in enumerate(best):
        if e:
            x = target.mult(x, target.power(images[i], e))
    kb = keyfn(x)
    return False, (first[kb], tuple(best))


def is_upper_triangular(P, C, budget=DEFAULT_BUDGET, H=None):
    """Check the commutator tail condition for every i < j and all four
    sign choices.  Returns (True, None) or (False, (i, j, si, sj)) with
    1-based indices; membership is tested in the target group (modulo H
    when given) against the enumerated tail progression."""
    g = P.group
    C = Fraction(C)
    tail_cache = {}
    if H is not None:
        keyfn = lambda x: min(g.key(g.mult(x, h)) for h in H)
    else:
        keyfn = g.key
    for j in range(2, P.d + 1):
        for i in range(1, j):
            denom = P.L[i - 1] * P.L[j - 1]
            bounds = tuple(
                int(floor(C * P.L[k - 1] / denom)) for k in range(j + 1, P.d + 1)
            )
            key = (j, bounds)
            if key not in tail_cache:
                members = set()
                size = 1
                for b in bounds:
                    size *= 2 * b + 1
                check_budget(size, budget, "tail membership enumeration")
                from itertools import product as iproduct

                for exps in iproduct(*[range(-b, b + 1) for b in bounds]):
                    x = g.identity()
                    for t, e in enumerate(exps):
                        if e:
                            x = g.mult(x, g.power(P.gens[j + t], e))
                    members.add(keyfn(x))
                tail_cache[key] = members
            members = tail_cache[key]
            for si in (1, -1):
                for sj in (1, -1):
                    a = P.gens[i - 1] if si == 1 else g.inv(P.gens[i - 1])
                    b = P.gens[j - 1] if sj == 1 else g.inv(P.gens[j - 1])
                    comm = g.mult(g.mult(g.inv(a), g.inv(b)), g.mult(a, b))
                    if keyfn(comm) not in members:
                        return False, (i, j, si, sj)
    return True, None


def min_upper_triangular_constant(P, budget=DEFAULT_BUDGET, H=None, c_max=64):
    """Smallest integer C <= c_max with is_upper_triangular(P, C) true."""
    for c in range(0, c_max + 1):
        ok, _ = is_upper_triangular(P, c, budget=budget, H=H)
        if ok:
            return c
    raise ValidationError(f"not upper-triangular for any C <= {c_max}")


def zeta_weights(P):
    """Recursive weights from the recorded commutator expressions."""
    if P.pexprs is None:
        raise ValidationError("progression has no recorded commutator expressions")
    d = P.d
    zeta = [None] * (d + 1)
    appears = {k: [] for k in range(1, d + 1)}
    for (i, j, si, sj), coords in P.pexprs.items():
        for k, e in enumerate(coords, start=1):
            if e:
                if k <= j:
                    raise ValidationError(
                        "malformed expression: support does not sit past j"
                    )
                appears[k].append((i, j))
    for k in range(1, d + 1):
        if not appears[k]:
            zeta[k] = 1
        else:
            best = 0
            for i, j in appears[k]:
                if zeta[i] is None or zeta[j] is None:
                    raise ValidationError("zeta recursion is not well-founded")
                best = max(best, zeta[i] + zeta[j])
            zeta[k] = best
    return tuple(zeta[1:])


def power_envelope(P, n, K=None, budget=DEFAULT_BUDGET):
    """Envelope P_ord(u; K n^{zeta} L) with P^n verified inside it when K
    is measured here (K=None measures the smallest sufficient integer)."""
    zeta = zeta_weights(P)
    if K is None:
        K = measure_envelope_constant(P, n, budget=budget)
    lengths = [K * n ** z * l for z, l in zip(zeta, P.L)]
    return OrderedProgression(
        P.group, P.gens, lengths, chi=P.chi, pexprs=P.pexprs, hall=P.hall
    ), K


def _free_membership_bounds(P, element, bounds):
    """Membership of a free-group element in P_ord(u;bounds) when the
    generators are the unit coordinate vectors (unique collected form)."""
    return all(abs(c) <= b for c, b in zip(element, bounds))


def _is_canonical_free(P):
    return isinstance(P.group, FreeNilpotentGroup) and all(
        P.gens[k] == _unit_vector(P.d, k) for k in range(P.d)
    )


def measure_envelope_constant(P, n, budget=DEFAULT_BUDGET, K_cap=64):
    """Smallest integer K >= 1 with P^n inside P_ord(u; K n^zeta L),
    verified exhaustively."""
    zeta = zeta_weights(P)
    base = enumerate_progression(P, 1, budget=budget)
    power = base
    for _ in range(n - 1):
        power = mult_sets(power, base, budget=budget)
    for K in range(1, K_cap + 1):
        bounds = [K * n ** z * l for z, l in zip(zeta, P.L)]
        if _is_canonical_free(P):
            ok = all(_free_membership_bounds(P, x, bounds) for x in power)
        else:
            env = OrderedProgression(P.group, P.gens, bounds)
            env_set = enumerate_progression(env, 1, budget=budget)
            ok = power.issubset(env_set)
        if ok:
            return K
    raise ValidationError(f"no envelope constant K <= {K_cap} suffices")


def nilpotent_progression(r, s, base_lengths, images=None, target=None,
                          max_rank=None):
    """Progression on the full ordered list of basic commutators with
    lengths L^chi; free images when none are given."""
    from .errors import DEFAULT_RANK_CAP

    basis = HallBasis(r, s, max_rank=max_rank or DEFAULT_RANK_CAP)
    if len(base_lengths) != r:
        raise ValidationError("need one base length per rank generator")
    lengths = []
    for c in basis.basis:
        v = 1
        for li, e in zip(base_lengths, c.chi):
            v *= li ** e
        lengths.append(v)
    if images is None:
        group = FreeNilpotentGroup(basis)
        gens = [
            tuple(1 if t == k else 0 for t in range(basis.d)) for k in range(basis.d)
        ]
    else:
        if target is None:
            raise ValidationError("explicit images need a target group")
        group = target
        hom = Homomorphism.from_generator_images(basis, target, images)
        gens = hom.images
    return OrderedProgression(
        group,
        gens,
        lengths,
        chi=[c.chi for c in basis.basis],
        pexprs=basis.commutator_table(),
        hall=basis,
    )


def dilate_powers(P, n, gamma=None, budget=DEFAULT_BUDGET):
    """Nilpotent progression P_n with lengths (gamma n)^{|chi|} L^chi
    containing P^n; gamma measured minimal when not supplied."""
    if P.chi is None:
        raise ValidationError("dilate_powers needs a nilpotent progression")
    weights = [sum(c) for c in P.chi]
    if gamma is None:
        base = enumerate_progression(P, 1, budget=budget)
        power = base
        for _ in range(n - 1):
            power = mult_sets(power, base, budget=budget)
        for g0 in range(1, 65):
            bounds = [(g0 * n) ** w * l for w, l in zip(weights, P.L)]
            if _is_canonical_free(P):
                ok = all(_free_membership_bounds(P, x, bounds) for x in power)
            else:
                env = OrderedProgression(P.group, P.gens, bounds)
                ok = power.issubset(enumerate_progression(env, 1, budget=budget))
            if ok:
                gamma = g0
                break
        else:
            raise ValidationError("no dilation constant gamma <= 64 suffices")
    lengths = [(gamma * n) ** w * l for w, l in zip(weights, P.L)]
    return OrderedProgression(
        P.group, P.gens, lengths, chi=P.chi, pexprs=P.pexprs, hall=P.hall
    ), gamma


def coset_reps_split(P, Q, budget=DEFAULT_BUDGET, K_cap=64):
    """Split P_ord(u;L) into P_ord(u;Q) * P_ord(u^Q; K ceil(L/Q)) with the
    smallest integer K verified exhaustively.

    Returns (reps element set, progression on u_i^{Q_i}, K)."""
    if len(Q) != P.d or any(q < 1 for q in Q):
        raise ValidationError("need one positive Q per generator")
    g = P.group
    reps_prog = OrderedProgression(g, P.gens, Q)
    reps = enumerate_progression(reps_prog, 1, budget=budget)
    big_gens = [g.power(u, q) for u, q in zip(P.gens, Q)]
    whole = enumerate_progression(P, 1, budget=budget)
    for K in range(1, K_cap + 1):
        lengths = [max(1, K * (-(-l // q))) for l, q in zip(P.L, Q)]
        bigP = OrderedProgression(g, big_gens, lengths)
        big = enumerate_progression(bigP, 1, budget=budget)
        prod = mult_sets(reps, big, budget=budget)
        if whole.issubset(prod):
            return reps, bigP, K
    raise ValidationError(f"no split constant K <= {K_cap} suffices")


def progression_from_json(desc):
    group = target_from_json(desc)
    if desc.get("gens") == "basic_commutators":
        raise ValidationError("symbolic generator lists need explicit elements")
    gens = [group.element_from_json(x) for x in desc["gens"]]
    P = OrderedProgression(group, gens, [int(x) for x in desc["L"]])
    H = desc.get("H")
    if H:
        hset = ElementSet(group, (group.element_from_json(x) for x in H))
        return CosetProgression(hset, P)
    return P
