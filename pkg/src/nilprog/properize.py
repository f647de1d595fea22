"""Dimension-reduction pipeline: from a (possibly improper) free nilpotent
progression and a homomorphism, produce an m-proper ordered coset
progression in upper-triangular form, with exhaustively verified sandwich
certificates.

The driver works in exact lattice coordinates.  Basis vectors of the
initial lattice are the logs of the group basic commutators scaled to an
integral, multiplicatively closed lattice; each round finds a central
kernel vector from a properness collision, quotients the Lie algebra by
its line, reboxes the projected body with a Mahler basis, and carries the
homomorphism along by lifting.  Properness of the final output is always
re-verified directly; if it fails at the requested scale the internal
scan scale doubles and the pipeline reruns.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

from .errors import (
    BudgetExceededError,
    ThicknessError,
    ValidationError,
    check_budget,
    DEFAULT_BUDGET,
)
from .hall import HallBasis
from .latgeo import Box, ProjectedBox, nilp_box_approx, standard_lattice
from .linalg import frac_inverse, unimodular_with_first_row, vec_content
from .nilalg import (
    LieAlgebraContext,
    bch,
    bch_inverse,
    free_nilpotent_lie,
    group_commutator_log,
    group_exp_logs,
    rescale_to_lattice,
    second_kind_integer,
)
from .progressions import (
    CosetProgression,
    ElementSet,
    Homomorphism,
    OrderedProgression,
    enumerate_progression,
    is_proper,
    min_upper_triangular_constant,
    mult_sets,
)


@dataclass
class PipelineState:
    ctx: LieAlgebraContext      # structure constants in the current basis
    lengths: tuple              # positive integers, one per basis vector
    images: tuple               # pi(exp basis_k) as elements of the target
    H: ElementSet               # explicit finite normal subgroup of the target
    iteration: int = 0

    @property
    def dim(self):
        return self.ctx.d


@dataclass
class ProperizationResult:
    H: ElementSet
    P: OrderedProgression       # image progression over the target
    X: ElementSet
    proper: bool
    internal_scale: Fraction
    measured_C: int
    sandwich_power: int         # XP inside H P0^k with this k
    h_power: int                # H inside P0^k with this k
    certificates: dict

    def to_json(self):
        return {
            "H": self.H.to_json(),
            "P": self.P.to_json(),
            "X": self.X.to_json(),
            "proper": self.proper,
            "internal_scale": str(self.internal_scale),
            "measured_C": self.measured_C,
            "sandwich_power": self.sandwich_power,
            "h_power": self.h_power,
            "certificates": self.certificates,
        }


def _coset_key(target, H, x):
    return min(target.key(target.mult(x, h)) for h in H)


def _image_of_lattice_vector(state, v, target):
    """pi(exp v) for an integral vector in the current coordinates."""
    ell = second_kind_integer(tuple(Fraction(a) for a in v), state.ctx)
    out = target.identity()
    for k, e in enumerate(ell):
        if e:
            out = target.mult(out, target.power(state.images[k], e))
    return out


def _box_points(lengths, scale=1):
    from itertools import product as iproduct

    bounds = [int(Fraction(scale) * l) for l in lengths]
    return iproduct(*[range(-b, b + 1) for b in bounds]), bounds


def _box_grid_size(lengths, scale=1):
    size = 1
    for l in lengths:
        size *= 2 * int(Fraction(scale) * l) + 1
    return size


def box_properness_scan(state, target, scale, budget=DEFAULT_BUDGET):
    """Distinctness of pi(exp(sum l_k b_k)) over |l_k| <= scale * L_k,
    modulo H; returns (True, None) or (False, (v, v')) in lex scan order."""
    check_budget(_box_grid_size(state.lengths, scale), budget, "box properness scan")
    pts, _ = _box_points(state.lengths, scale)
    seen = {}
    use_coset = len(state.H) > 1
    for v in pts:
        x = _image_of_lattice_vector(state, v, target)
        k = _coset_key(target, state.H, x) if use_coset else target.key(x)
        if k in seen:
            return False, (seen[k], v)
        seen[k] = v
    return True, None


def find_central_kernel_element(state, collision, target):
    """Descend from a collision to a nonzero central lattice vector whose
    exponential lies in the kernel (modulo H)."""
    va, vb = collision
    x = bch(
        tuple(Fraction(c) for c in vb),
        bch_inverse(tuple(Fraction(c) for c in va)),
        state.ctx,
    )
    d = state.dim
    for _ in range(d + 1):
        for a in x:
            assert Fraction(a).denominator == 1, "kernel descent left the lattice"
        basis_dirs = [
            tuple(Fraction(1 if t == k else 0) for t in range(d)) for k in range(d)
        ]
        noncentral = None
        for k in range(d):
            if any(state.ctx.bracket(list(x), list(basis_dirs[k]))):
                noncentral = k
                break
        if noncentral is None:
            break
        x = group_commutator_log(x, basis_dirs[noncentral], state.ctx)
    else:
        raise AssertionError("central descent did not terminate in d steps")
    z = tuple(int(Fraction(a)) for a in x)
    if not any(z):
        raise AssertionError("collision produced the zero kernel vector")
    img = _image_of_lattice_vector(state, z, target)
    if len(state.H) > 1:
        assert _coset_key(target, state.H, img) == _coset_key(
            target, state.H, target.identity()
        ), "descent output is not in the kernel"
    else:
        assert target.key(img) == target.key(target.identity())
    return z


def quotient_step(state, z, target, budget=DEFAULT_BUDGET, h_cap=10**5):
    """Quotient by the central line through z: extends H by the finite
    cyclic image of exp(z/content), drops the dimension by one, and
    returns (new state pieces, certificate record)."""
    content = vec_content(list(z))
    z0 = tuple(c // content for c in z)
    g_z = _image_of_lattice_vector(state, z0, target)
    # order of g_z modulo H divides the content
    order = None
    power = g_z
    for t in range(1, content + 1):
        if (len(state.H) > 1 and _coset_key(target, state.H, power)
                == _coset_key(target, state.H, target.identity())) or (
                len(state.H) == 1 and target.key(power) == target.key(target.identity())):
            order = t
            break
        power = target.mult(power, g_z)
    if order is None:
        raise ValidationError(
            "image of the primitive kernel direction has order not dividing "
            "the content; collision certificate is inconsistent"
        )
    new_H = ElementSet(target)
    acc = target.identity()
    for t in range(order):
        for h in state.H:
            new_H.add(target.mult(h, acc))
        acc = target.mult(acc, g_z)
    check_budget(len(new_H) * len(new_H), budget, "subgroup closure check")
    if len(new_H) > h_cap:
        raise BudgetExceededError(f"|H| = {len(new_H)} exceeds cap {h_cap}")
    for a in new_H:
        if target.inv(a) not in new_H:
            raise ValidationError("extended H not closed under inversion")
        for b in new_H:
            if target.mult(a, b) not in new_H:
                raise ValidationError("extended H not closed under product")
    for u in state.images:
        ui = target.inv(u)
        for h in new_H:
            if target.mult(target.mult(u, h), ui) not in new_H:
                raise ValidationError("extended H not normalized by the images")

    v_mat = unimodular_with_first_row(list(z0))
    d = state.dim
    # quotient structure constants in the basis v_mat[1..]
    structure = {}
    basis_vecs = [tuple(Fraction(a) for a in row) for row in v_mat]
    v_inv = frac_inverse([list(r) for r in v_mat])

    def to_vcoords(x):
        return [
            sum(Fraction(x[i]) * v_inv[i][t] for i in range(d)) for t in range(d)
        ]

    for i in range(1, d):
        for j in range(i + 1, d):
            br = state.ctx.bracket(list(basis_vecs[i]), list(basis_vecs[j]))
            coords = to_vcoords(br)
            comps = {}
            for k in range(1, d):
                c = coords[k]
                assert c.denominator == 1
                if c:
                    comps[k - 1] = c
            if comps:
                structure[(i - 1, j - 1)] = comps
    new_ctx = LieAlgebraContext(d - 1, state.ctx.step, structure)
    cert = {
        "z": list(z),
        "content": content,
        "cyclic_order": order,
        "H_size": len(new_H),
    }
    return z0, v_mat, new_ctx, new_H, cert


def rebox_step(state, z0, v_mat, new_ctx, new_H, target,
               budget=DEFAULT_BUDGET, k_cap=64):
    """Rebox the projected body with a Mahler basis; returns the next
    PipelineState plus a certificate with the shrink factor, blowup and
    the measured lift constant K."""
    d = state.dim
    old_box = Box([[1 if i == j else 0 for j in range(d)] for i in range(d)],
                  state.lengths)
    section = v_mat[1:]
    projected = ProjectedBox(old_box, z0, section_rows=section)
    # shrink until [B,B] inside B (exact on vertices)
    verts = projected.vertices()
    worst = Fraction(0)
    for i, v in enumerate(verts):
        for w in verts[i:]:
            nv = projected.norm(tuple(new_ctx.bracket(list(v), list(w))))
            if nv > worst:
                worst = nv
    kappa = Fraction(1) if worst <= 1 else 1 / worst
    if kappa != 1:
        shrunk_box = Box(old_box.e.rows, [kappa * l for l in state.lengths])
        body = ProjectedBox(shrunk_box, z0, section_rows=section)
    else:
        body = projected
    approx = nilp_box_approx(
        body, standard_lattice(d - 1),
        lambda u, v: tuple(new_ctx.bracket(list(u), list(v))),
        budget=budget,
    )
    e_rows = [[int(a) for a in row] for row in approx.basis.rows]
    lengths = tuple(
        int(-(-(Fraction(l) / kappa)).__floor__() if False else -(-l * kappa.denominator // kappa.numerator))
        for l in approx.lengths
    )
    # conjugate the quotient constants into the new basis
    e_inv = frac_inverse([list(r) for r in e_rows])

    def to_ecoords(x):
        return [
            sum(Fraction(x[i]) * e_inv[i][t] for i in range(d - 1))
            for t in range(d - 1)
        ]

    structure = {}
    for i in range(d - 1):
        for j in range(i + 1, d - 1):
            br = new_ctx.bracket(
                [Fraction(a) for a in e_rows[i]], [Fraction(a) for a in e_rows[j]]
            )
            coords = to_ecoords(br)
            comps = {}
            for k in range(d - 1):
                c = coords[k]
                assert c.denominator == 1
                if c:
                    comps[k] = c
            if comps:
                structure[(i, j)] = comps
    next_ctx = LieAlgebraContext(d - 1, state.ctx.step, structure)
    # images of the new basis vectors, by lifting through the section
    new_images = []
    for row in e_rows:
        lift = [
            sum(row[i] * v_mat[1 + i][t] for i in range(d - 1)) for t in range(d)
        ]
        new_images.append(_image_of_lattice_vector(state, lift, target))
    next_state = PipelineState(
        ctx=next_ctx,
        lengths=lengths,
        images=tuple(new_images),
        H=new_H,
        iteration=state.iteration + 1,
    )
    cert = {
        "kappa": str(kappa),
        "blowup": str(approx.blowup),
        "lengths": list(lengths),
        "dim": d - 1,
    }
    # sandwich certificates at desk scale
    cert.update(
        _sandwich_certificates(state, z0, v_mat, e_rows, lengths, budget, k_cap)
    )
    # lift independence probe: two lifts of each new basis vector agree mod H
    probe_ok = True
    for row in e_rows:
        lift = [
            sum(row[i] * v_mat[1 + i][t] for i in range(d - 1)) for t in range(d)
        ]
        lift2 = [a + b for a, b in zip(lift, z0)]
        x1 = _image_of_lattice_vector(state, lift, target)
        x2 = _image_of_lattice_vector(state, lift2, target)
        if _coset_key(target, new_H, x1) != _coset_key(target, new_H, x2):
            probe_ok = False
    cert["lift_independent"] = probe_ok
    if not probe_ok:
        raise ValidationError("quotient homomorphism depends on the lift choice")
    return next_state, cert


def _sandwich_certificates(state, z0, v_mat, e_rows, lengths, budget, k_cap):
    """phi(B_Z(e;L)) inside B_Z(e';L') checked exhaustively, and the
    smallest K with B_Z(e';L') inside phi(B_Z(e;K L)) measured per point."""
    d = state.dim
    v_inv = frac_inverse([list(r) for r in v_mat])
    e_inv = frac_inverse([list(r) for r in e_rows])
    out = {}
    size = _box_grid_size(state.lengths, 1)
    if size <= budget:
        pts, _ = _box_points(state.lengths, 1)
        ok = True
        for v in pts:
            vq = [
                sum(Fraction(v[i]) * v_inv[i][t] for i in range(d))
                for t in range(1, d)
            ]
            coords = [
                sum(vq[i] * e_inv[i][t] for i in range(d - 1))
                for t in range(d - 1)
            ]
            for c, l in zip(coords, lengths):
                if c.denominator != 1 or abs(c) > l:
                    ok = False
                    break
            if not ok:
                break
        out["projection_inside_new_box"] = ok
        if not ok:
            raise ValidationError("projected box escaped the rebox certificate")
    else:
        out["projection_inside_new_box"] = "skipped:budget"
    # lift measurement
    size_new = 1
    for l in lengths:
        size_new *= 2 * l + 1
    if size_new <= budget:
        from itertools import product as iproduct

        worst_K = 1
        for coords in iproduct(*[range(-l, l + 1) for l in lengths]):
            amb = [
                sum(coords[i] * e_rows[i][t] for i in range(d - 1))
                for t in range(d - 1)
            ]
            lift = [
                sum(amb[i] * v_mat[1 + i][t] for i in range(d - 1))
                for t in range(d)
            ]
            K = None
            for cand in range(1, k_cap + 1):
                lo, hi = None, None
                feasible = True
                for t in range(d):
                    bound = cand * state.lengths[t]
                    if z0[t] == 0:
                        if abs(lift[t]) > bound:
                            feasible = False
                            break
                        continue
                    a = Fraction(-bound - lift[t], z0[t])
                    b = Fraction(bound - lift[t], z0[t])
                    if a > b:
                        a, b = b, a
                    lo = a if lo is None or a > lo else lo
                    hi = b if hi is None or b < hi else hi
                if feasible and (lo is None or _has_integer(lo, hi)):
                    K = cand
                    break
            if K is None:
                raise ValidationError("no lift constant within cap")
            worst_K = max(worst_K, K)
        out["lift_constant_K"] = worst_K
    else:
        out["lift_constant_K"] = "skipped:budget"
    return out


def _has_integer(lo, hi):
    if lo is None or hi is None:
        return True
    from math import ceil, floor

    return floor(hi) >= ceil(lo) and hi >= lo


def _initial_state(basis, hom, lengths, H0, target, budget):
    """Scale the group-log basis to an integral, closed lattice and push
    the homomorphism through."""
    ctx_free = free_nilpotent_lie(basis)
    glogs = group_exp_logs(basis, ctx_free)
    d = basis.d
    g_mat = [list(v) for v in glogs]
    g_inv = frac_inverse(g_mat)
    structure = {}
    for i in range(d):
        for j in range(i + 1, d):
            br = ctx_free.bracket(list(glogs[i]), list(glogs[j]))
            coords = [
                sum(Fraction(br[t]) * g_inv[t][k] for t in range(d)) for k in range(d)
            ]
            comps = {k: c for k, c in enumerate(coords) if c}
            if comps:
                structure[(i, j)] = comps
    ctx_glog = LieAlgebraContext(d, basis.s, structure,
                                 grading=[c.zeta for c in basis.basis])
    scaled = rescale_to_lattice(basis, ctx_glog)
    q = scaled.group_factor
    qvec = [q * qi for qi in scaled.Q]
    # constants in the f-basis, f_k = qvec_k * glog_k
    structure_f = {}
    for (i, j), comps in ctx_glog.structure.items():
        new = {}
        for k, c in comps.items():
            val = c * qvec[i] * qvec[j] / qvec[k]
            assert val.denominator == 1
            if val:
                new[k] = val
        if new:
            structure_f[(i, j)] = new
    ctx0 = LieAlgebraContext(d, basis.s, structure_f,
                             grading=[c.zeta for c in basis.basis])
    images0 = tuple(
        target.power(hom.images[k], qvec[k]) for k in range(d)
    )
    state = PipelineState(
        ctx=ctx0, lengths=tuple(int(l) for l in lengths), images=images0,
        H=H0, iteration=0,
    )
    return state, qvec


def properize(P0, hom: Homomorphism, m, C=None, budget=DEFAULT_BUDGET,
              workers=1, max_scale_doublings=8, power_cap=64):
    """Full pipeline: returns a ProperizationResult whose progression is
    m-proper (re-verified), in measured upper-triangular form (inflated to
    the requested C when given), with exhaustively verified containments
    H P0 inside X P inside H P0^k."""
    if isinstance(P0, CosetProgression):
        H0 = P0.H
        prog0 = P0.P
    else:
        H0 = ElementSet(hom.target, [hom.target.identity()])
        prog0 = P0
    basis = prog0.hall
    if basis is None:
        raise ValidationError("properize needs a free nilpotent progression")
    target = hom.target
    lengths0 = prog0.L
    # image of P0 in the target
    p0_img = OrderedProgression(target, hom.images, lengths0)

    scale = Fraction(m)
    trace = []
    for attempt in range(max_scale_doublings):
        result = _run_pipeline(
            basis, hom, lengths0, H0, target, scale, budget, workers, trace
        )
        state, iter_certs = result
        final_prog = OrderedProgression(target, state.images, state.lengths)
        ok, witness = is_proper(
            final_prog, (target, state.images), m,
            H=state.H if len(state.H) > 1 else None,
            budget=budget, workers=workers,
        )
        if ok:
            break
        trace.append({"rerun": f"final properness failed at m={m}, doubling "
                               f"internal scale from {scale}"})
        scale *= 2
    else:
        raise ValidationError(
            "pipeline did not reach a proper output within the scale cap"
        )

    measured_C = min_upper_triangular_constant(
        final_prog, budget=budget, H=state.H if len(state.H) > 1 else None
    )
    if C is not None and measured_C > C:
        rho = -(-measured_C // int(C)) if int(C) == C else -(-measured_C // C)
        infl = [rho ** (3 ** (i + 1)) for i in range(final_prog.d)]
        final_prog = OrderedProgression(
            target, final_prog.gens, [l * f for l, f in zip(final_prog.L, infl)]
        )
        ok_c, _ = __import__("nilprog.progressions", fromlist=["is_upper_triangular"]).is_upper_triangular(
            final_prog, C, budget=budget, H=state.H if len(state.H) > 1 else None
        )
        if not ok_c:
            raise ValidationError("length inflation failed to reach the requested C")
        measured_C = C
        ok, witness = is_proper(
            final_prog, (target, final_prog.gens), m,
            H=state.H if len(state.H) > 1 else None,
            budget=budget, workers=workers,
        )
        if not ok:
            raise ValidationError(
                "C-inflation broke properness; rerun with a larger internal scale"
            )

    # X from the coset-representative window of the initial rescaling
    qvec = iter_certs["qvec"]
    if all(qi == 1 for qi in qvec):
        X = ElementSet(target, [target.identity()])
    else:
        reps_dom = OrderedProgression(target, hom.images, qvec)
        reps = enumerate_progression(reps_dom, 1, budget=budget, workers=workers)
        X = ElementSet(target)
        seen = set()
        for x in reps:
            k = _coset_key(target, state.H, x) if len(state.H) > 1 else target.key(x)
            if k not in seen:
                seen.add(k)
                X.add(x)

    # sandwich verification
    p0_set = enumerate_progression(p0_img, 1, budget=budget, workers=workers)
    hp0 = ElementSet(target)
    for p in p0_set:
        for h in state.H:
            hp0.add(target.mult(h, p))
    p_set = enumerate_progression(final_prog, 1, budget=budget, workers=workers)
    xp = ElementSet(target)
    for x in X:
        for p in p_set:
            xp.add(target.mult(x, p))
    lhs_ok = hp0.issubset(xp)
    power = None
    hp0_pow = hp0
    base = hp0
    for k in range(1, power_cap + 1):
        if xp.issubset(hp0_pow):
            power = k
            break
        hp0_pow = mult_sets(hp0_pow, base, budget=budget)
    if power is None:
        raise ValidationError(f"sandwich power exceeds cap {power_cap}")
    h_power = None
    p0_pow = p0_set
    for k in range(1, power_cap + 1):
        if all(h in p0_pow for h in state.H):
            h_power = k
            break
        p0_pow = mult_sets(p0_pow, p0_set, budget=budget)
    if h_power is None:
        raise ValidationError(f"H containment power exceeds cap {power_cap}")
    if not lhs_ok:
        raise ValidationError("H P0 not inside X P; pipeline certificate failed")

    certs = {
        "iterations": iter_certs["steps"],
        "rank_trace": iter_certs["dims"],
        "qvec": qvec,
        "reruns": [t for t in trace if "rerun" in t],
        "hp0_in_xp": lhs_ok,
    }
    return ProperizationResult(
        H=state.H,
        P=final_prog,
        X=X,
        proper=True,
        internal_scale=scale,
        measured_C=measured_C,
        sandwich_power=power,
        h_power=h_power,
        certificates=certs,
    )


def _run_pipeline(basis, hom, lengths0, H0, target, scale, budget, workers,
                  trace):
    state, qvec = _initial_state(basis, hom, lengths0, H0, target, budget)
    steps = []
    dims = [state.dim]
    while True:
        if state.dim == 0:
            break
        ok, witness = box_properness_scan(state, target, scale, budget=budget)
        if ok:
            break
        z = find_central_kernel_element(state, witness, target)
        z0, v_mat, new_ctx, new_H, cert_q = quotient_step(
            state, z, target, budget=budget
        )
        prev_dim = state.dim
        if state.dim == 1:
            # quotient to the trivial algebra
            state = PipelineState(
                ctx=LieAlgebraContext(0, state.ctx.step, {}),
                lengths=(),
                images=(),
                H=new_H,
                iteration=state.iteration + 1,
            )
            steps.append({"quotient": cert_q, "rebox": {"dim": 0}})
            dims.append(0)
            continue
        state, cert_r = rebox_step(
            state, z0, v_mat, new_ctx, new_H, target, budget=budget
        )
        assert state.dim == prev_dim - 1
        steps.append({"quotient": cert_q, "rebox": cert_r})
        dims.append(state.dim)
    return state, {"steps": steps, "dims": dims, "qvec": qvec}


def abelian_properize(P0, hom, m, budget=DEFAULT_BUDGET, workers=1):
    """Abelian specialization: zero brackets, trivial representative set,
    plus the stronger containment of the output inside a power of the
    input (asserted)."""
    result = properize(P0, hom, m, budget=budget, workers=workers)
    if len(result.X) != 1:
        raise ValidationError("abelian pipeline should not need translates")
    return result
