"""Cayley-ball growth, covering experiments, and the discrete forms of the
finite-group covering lemmas.

Ball sizes are exact (BFS with canonical keys, or an exact interval DP
for box-shaped Heisenberg generating sets); the only floating point is in
the reported log-log slope fits, which are diagnostics over exact counts.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    BudgetExceededError,
    HypothesisFailure,
    ValidationError,
    check_budget,
    DEFAULT_BUDGET,
)
from .linalg import lattice_index
from .progressions import (
    ElementSet,
    Unitriangular,
    UnitriangularMod,
    inverse_set,
    mult_sets,
    set_power,
)


@dataclass
class GeneratingSet:
    elements: ElementSet
    symmetric: bool = True
    contains_identity: bool = True

    def validate(self):
        g = self.elements.group
        if self.contains_identity and g.identity() not in self.elements:
            raise ValidationError("generating set flagged 1 in S but 1 missing")
        if self.symmetric:
            for x in self.elements:
                if g.inv(x) not in self.elements:
                    raise ValidationError("generating set flagged symmetric but is not")
        return True


@dataclass
class GrowthCurve:
    entries: list                      # [(radius, exact size)]
    meta: dict = field(default_factory=dict)

    def size(self, n):
        for r, s in self.entries:
            if r == n:
                return s
        raise KeyError(n)

    def csv_rows(self):
        rows = [("n", "size", "ratio", "loglog_slope")]
        prev = None
        for n, s in self.entries:
            if prev is None or prev[0] < 1 or n <= prev[0]:
                ratio = ""
                slope = ""
            else:
                ratio = f"{s / prev[1]:.6f}"
                slope = (
                    f"{(math.log(s) - math.log(prev[1])) / (math.log(n) - math.log(prev[0])):.6f}"
                    if n > prev[0] and prev[0] >= 1
                    else ""
                )
            rows.append((n, s, ratio, slope))
            prev = (n, s)
        return rows


def ball_growth(S: GeneratingSet, n_max, budget=DEFAULT_BUDGET, workers=1):
    """Exact |S^n| for n = 1..n_max by frontier BFS.

    Requires 1 in S so that S^n is the radius-n ball and sizes are
    non-decreasing."""
    S.validate()
    if not S.contains_identity:
        raise ValidationError("ball growth needs the identity in S")
    g = S.elements.group
    gens = list(S.elements)
    ball = ElementSet(g, gens)
    frontier = list(ball)
    entries = [(1, len(ball))]
    total_work = len(ball)
    for n in range(2, n_max + 1):
        total_work += len(frontier) * len(gens)
        check_budget(total_work, budget, "ball growth BFS")
        if workers > 1 and len(frontier) > workers:
            size = -(-len(frontier) // workers)
            shards = [frontier[i * size:(i + 1) * size] for i in range(workers)]
            shards = [sh for sh in shards if sh]

            def expand(sh):
                return [g.mult(x, s) for x in sh for s in gens]

            new = []
            with ThreadPoolExecutor(max_workers=len(shards)) as ex:
                for chunk in ex.map(expand, shards):
                    new.extend(chunk)
        else:
            new = [g.mult(x, s) for x in frontier for s in gens]
        frontier = []
        for y in new:
            if ball.add(y):
                frontier.append(y)
        entries.append((n, len(ball)))
    return GrowthCurve(entries, meta={"generators": len(gens)})


def fit_exponent(curve: GrowthCurve, r_min=None, r_max=None, top_half=False):
    """Least-squares slope of log|S^r| against log r with the residual.

    Diagnostic only: counts stay exact, the fit is floating point."""
    pts = [(n, s) for n, s in curve.entries if n >= 1]
    if r_min is not None:
        pts = [(n, s) for n, s in pts if n >= r_min]
    if r_max is not None:
        pts = [(n, s) for n, s in pts if n <= r_max]
    if top_half and len(pts) > 1:
        pts = pts[len(pts) // 2:]
    if len(pts) < 2:
        raise ValidationError("need at least two radii to fit a slope")
    xs = [math.log(n) for n, _ in pts]
    ys = [math.log(s) for _, s in pts]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    slope = num / den
    resid = sum((y - my - slope * (x - mx)) ** 2 for x, y in zip(xs, ys))
    return slope, resid


# ---------------------------------------------------------------------------
# pigeonhole scale selection


def _le_rational_power(lhs, base, expo: Fraction, rhs):
    """Exact test  lhs <= base**expo * rhs  for non-negative integers."""
    p, q = expo.numerator, expo.denominator
    return lhs ** q <= base ** p * rhs ** q


def pigeonhole_scale(curve: GrowthCurve, n, q, alpha, beta, M, D):
    """Smallest k with n^alpha < k < beta*n and
    |S^{qk}| <= q^{(D+1)/(1-alpha)} |S^k|; requires the polynomial-growth
    hypothesis |S^n| <= M n^D |S| to hold at n."""
    alpha = Fraction(alpha)
    beta = Fraction(beta)
    M = Fraction(M)
    D = Fraction(D)
    if not (0 < alpha < 1 and 0 < beta <= 1):
        raise ValidationError("need 0 < alpha < 1 and 0 < beta <= 1")
    s1 = curve.size(1)
    sn = curve.size(n)
    # |S^n| <= M n^D |S|  <=>  sn^Dq * Mden^Dq <= Mnum^Dq * n^Dp * s1^Dq
    dp, dq = D.numerator, D.denominator
    if not (sn ** dq * M.denominator ** dq
            <= M.numerator ** dq * n ** dp * s1 ** dq):
        raise HypothesisFailure(
            f"|S^{n}| = {sn} exceeds M n^D |S| = {M} * {n}^{D} * {s1}"
        )
    threshold = (D + 1) / (1 - alpha)
    best = None
    k = 1
    while True:
        # k > n^alpha  <=>  k^aden > n^anum
        if k ** alpha.denominator > n ** alpha.numerator:
            if Fraction(k) >= beta * n:
                break
            try:
                sk = curve.size(k)
                sqk = curve.size(q * k)
            except KeyError:
                raise ValidationError(
                    f"curve too short: need radii {k} and {q * k}"
                )
            if _le_rational_power(sqk, q, threshold, sk):
                best = (k, Fraction(sqk, sk))
                break
        k += 1
    if best is None:
        raise HypothesisFailure(
            "no scale in (n^alpha, beta n) meets the doubling threshold"
        )
    return best


# ---------------------------------------------------------------------------
# dense subsets of boxes in Z^d: exact sumset covers


class BitGrid2D:
    """Subsets of a centered rectangle of Z^2 as one big integer bitmask;
    sumset with a finite shift set is a masked shift-OR."""

    def __init__(self, xmax, ymax):
        self.xmax = xmax
        self.ymax = ymax
        self.width = 2 * ymax + 1
        self.height = 2 * xmax + 1
        self.stride = self.width + 2 * ymax + 2  # guard columns against bleed
        mask = 0
        row_mask = (1 << self.width) - 1
        for i in range(self.height):
            mask |= row_mask << (i * self.stride)
        self.mask = mask

    def bit(self, x, y):
        return (x + self.xmax) * self.stride + (y + self.ymax)

    def from_points(self, pts):
        v = 0
        for x, y in pts:
            v |= 1 << self.bit(x, y)
        return v

    def shift(self, v, dx, dy):
        amt = dx * self.stride + dy
        return ((v << amt) if amt >= 0 else (v >> -amt)) & self.mask

    def sumset(self, v, shifts):
        out = 0
        for dx, dy in shifts:
            out |= self.shift(v, dx, dy)
        return out & self.mask

    def count(self, v):
        return v.bit_count()


def _check_symmetric_generating(points, d):
    pts = set(points)
    for p in pts:
        if tuple(-c for c in p) not in pts:
            raise ValidationError("A is not symmetric")
    base = next(iter(sorted(pts)))
    diffs = [[a - b for a, b in zip(p, base)] for p in sorted(pts)]
    idx = lattice_index(diffs)
    if idx != 1:
        raise HypothesisFailure(
            f"A does not generate Z^{d}: difference lattice has index {idx}"
        )


def rom8_check(A, L, k_cap=16, budget=DEFAULT_BUDGET):
    """Smallest k with B_Z(e;L) contained in the k-fold sumset of A.

    A is a symmetric generating subset of the box (verified: symmetry, and
    full-rank index-1 difference lattice).  Exact iterated sumsets; for
    d = 2 a bitmask grid keeps this fast."""
    d = len(L)
    pts = [tuple(int(c) for c in p) for p in A]
    for p in pts:
        if len(p) != d or any(abs(c) > l for c, l in zip(p, L)):
            raise ValidationError("A must sit inside the box")
    _check_symmetric_generating(pts, d)
    if d == 2:
        reach = max(max(abs(p[0]) for p in pts), 1)
        reach_y = max(max(abs(p[1]) for p in pts), 1)
        grid = BitGrid2D(k_cap * reach, k_cap * reach_y)
        check_budget(grid.height * grid.stride // 8, budget, "bit grid bytes")
        box = grid.from_points(
            (x, y) for x in range(-L[0], L[0] + 1) for y in range(-L[1], L[1] + 1)
        )
        cur = grid.from_points(pts)
        for k in range(1, k_cap + 1):
            if box & ~cur == 0:
                return k
            cur = grid.sumset(cur, pts)
        raise BudgetExceededError(f"box not covered by {k_cap} sumsets")
    from itertools import product as iproduct

    box = set(iproduct(*[range(-l, l + 1) for l in L]))
    cur = set(pts)
    for k in range(1, k_cap + 1):
        if box <= cur:
            return k
        check_budget(len(cur) * len(pts), budget, "sumset step")
        cur = {tuple(a + b for a, b in zip(p, q)) for p in cur for q in pts}
    raise BudgetExceededError(f"box not covered by {k_cap} sumsets")


def modular_cover_curve(pattern, moduli, k_cap=512):
    """For the cyclic counterexample: smallest k with k-fold sumset of
    `pattern` equal to Z/n, per n in `moduli`."""
    out = []
    for n in moduli:
        target = set(range(n))
        cur = {x % n for x in pattern}
        k = 1
        while cur != target:
            cur = {(a + b) % n for a in cur for b in ((x % n) for x in pattern)}
            k += 1
            if k > k_cap:
                raise BudgetExceededError(f"no cover within {k_cap} steps at n={n}")
        out.append((n, k))
    return out


# ---------------------------------------------------------------------------
# finite group covering


def finite_group_cover(omega: ElementSet, group_order, budget=DEFAULT_BUDGET):
    """Smallest k with Omega^k = H (|H| = group_order), for symmetric
    generating Omega.  Along the way, whenever |Omega^3| <= (1+eps)|Omega|
    with eps < 1, the squared set is asserted to be a subgroup."""
    g = omega.group
    if g.identity() not in omega:
        raise ValidationError("Omega must contain the identity")
    for x in omega:
        if g.inv(x) not in omega:
            raise ValidationError("Omega must be symmetric")
    omega2 = mult_sets(omega, omega, budget=budget)
    omega3 = mult_sets(omega2, omega, budget=budget)
    dichotomy_triggered = False
    if len(omega3) < 2 * len(omega):  # |Omega^3| <= (1+eps)|Omega|, eps < 1
        dichotomy_triggered = True
        for a in omega2:
            if g.inv(a) not in omega2:
                raise ValidationError("small tripling but Omega^2 not symmetric")
            for b in omega2:
                if g.mult(a, b) not in omega2:
                    raise ValidationError("small tripling but Omega^2 not closed")
    cur = omega
    k = 1
    while len(cur) < group_order:
        cur = mult_sets(cur, omega, budget=budget)
        k += 1
        if k > group_order:
            raise ValidationError("Omega does not generate the group")
    return k, dichotomy_triggered


def cyclic_group(n):
    return UnitriangularMod(2, n)


def cyclic_element(group, a):
    return ((1, a % group.modulus), (0, 1))


# ---------------------------------------------------------------------------
# interval DP for box-like Heisenberg generating sets


def _merge_intervals(ivs):
    ivs = sorted(ivs)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1] + 1:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def heisenberg_interval_growth(fibers, r_max, budget=DEFAULT_BUDGET):
    """Exact |S^r| for S = {(a, b, c) : c in fiber(a, b)} in the integer
    Heisenberg group, fibers being integer intervals per (a, b) slot.

    (1 a c; 0 1 b; 0 0 1)(1 A C; 0 1 B; 0 0 1) has top corner c + C + aB,
    so products of interval fibers stay unions of intervals and the whole
    computation is exact interval arithmetic.
    """
    gen = {ab: _merge_intervals(list(ivs)) for ab, ivs in fibers.items()}
    state = {ab: list(ivs) for ab, ivs in gen.items()}
    sizes = []
    for r in range(1, r_max + 1):
        if r > 1:
            nxt = {}
            work = 0
            for (a, b), ivs in state.items():
                for (al, be), givs in gen.items():
                    shift = a * be
                    dst = (a + al, b + be)
                    acc = nxt.setdefault(dst, [])
                    for lo, hi in ivs:
                        for glo, ghi in givs:
                            acc.append((lo + glo + shift, hi + ghi + shift))
                    work += len(ivs) * len(givs)
            check_budget(work, budget, "interval DP step")
            state = {ab: _merge_intervals(ivs) for ab, ivs in nxt.items()}
        total = sum(hi - lo + 1 for ivs in state.values() for lo, hi in ivs)
        sizes.append((r, total))
    return GrowthCurve(sizes, meta={"kind": "heisenberg-intervals"})


def heisenberg_cube_fibers(n):
    """The symmetrized set with entries [-n,n], [-n,n], [-n^3,n^3]:
    S0 union S0^{-1} (and the identity, already inside)."""
    fibers = {}
    n3 = n ** 3
    for a in range(-n, n + 1):
        for b in range(-n, n + 1):
            lo = -n3 + min(0, a * b)
            hi = n3 + max(0, a * b)
            fibers[(a, b)] = [(lo, hi)]
    return fibers


def heisenberg_standard_fibers():
    """Standard symmetric generators with identity: 1, x1^{±1}, x2^{±1},
    x3^{±1}."""
    return {
        (0, 0): [(-1, 1)],
        (1, 0): [(0, 0)],
        (-1, 0): [(0, 0)],
        (0, 1): [(0, 0)],
        (0, -1): [(0, 0)],
    }


def heisenberg_generating_set(fibers):
    """The same set as explicit 3x3 matrices (for BFS cross-checks)."""
    g = Unitriangular(3)
    out = ElementSet(g)
    for (a, b), ivs in sorted(fibers.items()):
        for lo, hi in ivs:
            for c in range(lo, hi + 1):
                out.add(((1, a, c), (0, 1, b), (0, 0, 1)))
    return GeneratingSet(out, symmetric=True, contains_identity=True)


# ---------------------------------------------------------------------------
# persistence-of-polynomial-growth harness


@dataclass
class PersistenceReport:
    n: int
    hypothesis_holds: bool
    size_at_n: int
    bound_at_n: str
    fitted_exponent: float
    residual: float
    floor_D: int


def check_poly_bound(size, M, n, D):
    """Exact test |S^n| <= M n^D (M rational, D rational)."""
    M = Fraction(M)
    D = Fraction(D)
    dp, dq = D.numerator, D.denominator
    return size ** dq * M.denominator ** dq <= M.numerator ** dq * n ** dp


def persistence_harness(curve_for_n, ns, M, D, r_max):
    """For each n: does |S^n| <= M n^D hold (exactly), and what is the
    fitted growth exponent of |S^r| over the top half of [n, r_max]?

    ``curve_for_n`` maps n to a GrowthCurve covering radii up to r_max.
    """
    M = Fraction(M)
    D = Fraction(D)
    reports = []
    for n in ns:
        curve = curve_for_n(n)
        size_n = curve.size(n)
        holds = check_poly_bound(size_n, M, n, D)
        slope, resid = fit_exponent(curve, r_min=n, r_max=r_max, top_half=True)
        reports.append(
            PersistenceReport(
                n=n,
                hypothesis_holds=holds,
                size_at_n=size_n,
                bound_at_n=f"{M}*{n}^{D}",
                fitted_exponent=slope,
                residual=resid,
                floor_D=int(D),
            )
        )
    return reports


# ---------------------------------------------------------------------------
# local coset utilities


def cosets_far_apart(X: ElementSet, P, k, budget=DEFAULT_BUDGET, H=None):
    """Prune X and dilate P until the translates x (H)P^k are pairwise
    disjoint; exhaustive at desk scale.

    Returns (X', P', certificate) where the certificate records the merge
    trace and the final disjointness/coverage checks."""
    from .progressions import (
        CosetProgression,
        OrderedProgression,
        enumerate_progression,
        power_envelope,
    )

    g = X.group
    P0 = P
    X0 = list(X)
    trace = []
    cur_X = ElementSet(g, X0)
    cur_P = P
    d = P.d
    while True:
        base = enumerate_progression(cur_P, 1, budget=budget)
        if H is not None:
            base = ElementSet(g, (g.mult(h, p) for p in base for h in H))
        pk = set_power(base, k, budget=budget) if k > 1 else base
        keysets = {}
        for x in list(cur_X):
            keysets[g.key(x)] = {g.key(g.mult(x, p)) for p in pk}
        collide = None
        xs = sorted(keysets)
        for i in range(len(xs)):
            for j in range(i + 1, len(xs)):
                if keysets[xs[i]] & keysets[xs[j]]:
                    collide = (xs[i], xs[j])
                    break
            if collide:
                break
        if collide is None:
            break
        # drop the lexicographically larger translate and dilate P
        drop = collide[1]
        cur_X = ElementSet(g, (x for x in cur_X if g.key(x) != drop))
        factor = d * k + k + 1
        if cur_P.pexprs is not None:
            cur_P, _ = power_envelope(cur_P, factor, budget=budget)
        else:
            cur_P = OrderedProgression(
                g, cur_P.gens, [l * factor for l in cur_P.L]
            )
        trace.append({"dropped": str(drop), "dilation": factor})
    # coverage certificate: X0 * P0-ball inside X' * P'-ball
    base0 = enumerate_progression(P0, 1, budget=budget)
    basef = enumerate_progression(cur_P, 1, budget=budget)
    if H is not None:
        base0 = ElementSet(g, (g.mult(h, p) for p in base0 for h in H))
        basef = ElementSet(g, (g.mult(h, p) for p in basef for h in H))
    lhs = ElementSet(g, (g.mult(x, p) for x in X0 for p in base0))
    rhs = ElementSet(g, (g.mult(x, p) for x in cur_X for p in basef))
    covered = lhs.issubset(rhs)
    cert = {"merges": trace, "disjoint": True, "covers": covered}
    return cur_X, cur_P, cert


def coset_reps_local(S: ElementSet, X: ElementSet, A: ElementSet, k,
                     budget=DEFAULT_BUDGET):
    """Replace X by representatives X' inside S^{|X|} with
    S^k contained in X' A^{-1} A; hypotheses are the stated containments."""
    g = S.group
    if len(X) >= k:
        raise HypothesisFailure(f"need |X| < k, got |X| = {len(X)}, k = {k}")
    if g.identity() not in S or g.identity() not in X or g.identity() not in A:
        raise ValidationError("S, X, A must all contain the identity")
    powers = {1: S}
    for j in range(2, k + 1):
        powers[j] = mult_sets(powers[j - 1], S, budget=budget)
    # S^k subset of X A (hypothesis)
    xa = ElementSet(g, (g.mult(x, a) for x in X for a in A))
    if not powers[k].issubset(xa):
        raise HypothesisFailure("S^k not contained in X A")
    xs = sorted(X, key=g.key)
    x_sets = {}
    for j in range(1, k + 1):
        cur = set()
        for x in xs:
            kx = g.key(x)
            if any(g.mult(x, a) in powers[j] for a in A):
                cur.add(kx)
        x_sets[j] = cur
    r = None
    for j in range(1, k):
        if x_sets[j] == x_sets[j + 1]:
            r = j
            break
    assert r is not None, "stabilization must occur before k by pigeonhole"
    ident_key = g.key(g.identity())
    reps = []
    for x in xs:
        if g.key(x) not in x_sets[r]:
            continue
        if g.key(x) == ident_key:
            reps.append(g.identity())
            continue
        cands = sorted(
            (g.mult(x, a) for a in A if g.mult(x, a) in powers[r]), key=g.key
        )
        reps.append(cands[0])
    xprime = ElementSet(g, reps)
    ainva = mult_sets(inverse_set(A), A, budget=budget)
    cover = ElementSet(g, (g.mult(x, y) for x in xprime for y in ainva))
    if not powers[k].issubset(cover):
        raise ValidationError("representative set fails to cover S^k")
    return xprime


def power_cover(S: ElementSet, X: ElementSet, A: ElementSet, t, r,
                budget=DEFAULT_BUDGET):
    """Verify S^{rt} inside X (A intersect S^{-t} S^{2t})^{r-1}."""
    g = S.group
    st = set_power(S, t, budget=budget)
    s2t = set_power(S, 2 * t, budget=budget)
    if not set_power(S, 2 * t, budget=budget).issubset(
        ElementSet(g, (g.mult(x, a) for x in X for a in A))
    ):
        raise HypothesisFailure("S^{2t} not contained in X A")
    window = ElementSet(
        g, (g.mult(g.inv(a), b) for a in st for b in s2t)
    )
    core = ElementSet(g, (a for a in A if a in window))
    part = set_power(core, r - 1, budget=budget) if r >= 2 else ElementSet(
        g, [g.identity()]
    )
    rhs = ElementSet(g, (g.mult(x, p) for x in X for p in part))
    srt = set_power(S, r * t, budget=budget)
    return srt.issubset(rhs)
