"""Finite exceptional configurations of the base dynamics and the
genericity conditions on them.

Two kinds of colliding pairs matter. Branch collisions: distinct base
points with the same image under the augmented base map; their first
components join the critical points to form x_minus1. Rotation
collisions: distinct fiber branches over one base point whose
fiber-normalized R values differ by a nontrivial d-th root of unity;
their first components join the roots of R to form y_minus2. Pushing
forward gives x_set (one step) and y_set (two steps), the merged z_set,
and the recurrent part script_z.

Pairs are located by eliminating one variable: for a sampled left
point p, both pair equations become univariate in the partner q, and
the resultant in q is a polynomial in p of bounded degree. Sampling
that polynomial on a unit circle and inverse-FFT interpolation recovers
its coefficients without symbolic algebra. Candidate roots are then
validated against the defining equations directly, which also rejects
the spurious roots the resultant manufactures when its leading
structure collapses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData
from .pencilmap import PencilEndo, base_apply, base_preimages
from .precision import DEFAULT, Profile
from .projgeom import (
    BinaryForm,
    ProjPoint,
    chordal_distance,
    critical_points,
    dedup_points,
    lists_match,
    min_dist_to,
    resultant,
    sphere_extrema,
)

__all__ = [
    "SpecialSets",
    "ConditionVerdict",
    "compute_x_minus1",
    "compute_y_minus2",
    "assemble_sets",
    "check_conditions",
    "estimate_gamma",
    "epsilon_max",
]

# phase offset for the interpolation circle; an irrational multiple of
# 2*pi keeps samples away from the symmetric configurations that root
#-of-unity coefficient patterns pin at rational angles
GOLDEN_PHASE = 2.0 * np.pi * 0.3819660112501051


@dataclass(frozen=True)
class SpecialSets:
    x_minus1: list
    y_minus2: list
    x_set: list
    y_set: list
    z_set: list
    script_z: list
    margin_r: float
    degenerate: bool
    # image of y_minus2 under a single base step; no condition depends
    # on it, kept for completeness of the reported configuration
    y_minus1: list = field(default_factory=list)


@dataclass(frozen=True)
class ConditionVerdict:
    cond1_disjoint: bool
    cond1_margin: float
    cond2_chain: bool
    cond2_margin: float
    cond2_simplified: bool
    cond2_simplified_margin: float
    cond_53_relaxed: bool
    gamma_hat: float
    epsilon_max: float


def _unit_forms(f: PencilEndo):
    """Copies of P, Q, R scaled to unit sup-norm. Collision geometry is
    scale-free, and fixing the scale once keeps every interpolated
    eliminant on a comparable magnitude so the identically-zero test
    has teeth. Never rescale per sample point."""
    return (
        f.P.scaled_to_unit(),
        f.Q.scaled_to_unit(),
        f.R.scaled_to_unit(),
    )


def _deflate_diagonal(m_coeffs, p_raw):
    """Divide a q-form vanishing at q = p by the linear form
    p_z q_w - p_w q_z. Synthetic division starts from whichever end of
    the divisor has the larger coefficient, so the pivot is never
    small. The remainder is discarded: callers only pass forms that
    vanish on the diagonal up to rounding."""
    a = p_raw[0]
    b = -p_raw[1]
    m = np.asarray(m_coeffs, dtype=complex)
    n = m.size - 1
    c = np.zeros(n, dtype=complex)
    if abs(b) >= abs(a):
        c[n - 1] = m[n] / b
        for j in range(n - 1, 0, -1):
            c[j - 1] = (m[j] - a * c[j]) / b
    else:
        c[0] = m[0] / a
        for j in range(1, n):
            c[j] = (m[j] - b * c[j - 1]) / a
    return c


def _pair_form_base(P, Q, p_raw):
    """B(p, .): the base-collision form in q, diagonal factor removed.
    Degree d-1 in q."""
    vp = P.evaluate(p_raw[0], p_raw[1])
    vq = Q.evaluate(p_raw[0], p_raw[1])
    m = vp * Q.coeffs - vq * P.coeffs
    return _deflate_diagonal(m, p_raw)


def _pair_form_twisted(P, R, omega, p_raw):
    """C_omega(p, .) = R(p) P(q) - omega P(p) R(q), degree d in q. Does
    not vanish on the diagonal, so no deflation."""
    vp = P.evaluate(p_raw[0], p_raw[1])
    vr = R.evaluate(p_raw[0], p_raw[1])
    return vr * P.coeffs - omega * vp * R.coeffs


def _interp_eliminant(value_at, degree_cap, profile: Profile):
    """Interpolate x -> value_at(x) (a polynomial of degree at most
    degree_cap in the chart p = [x:1]) from unit-circle samples.
    Returns the trimmed coefficient array, or None when the polynomial
    is numerically identically zero."""
    n = degree_cap + 1
    alpha = np.exp(1j * GOLDEN_PHASE)
    xs = alpha * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([value_at(x) for x in xs], dtype=complex)
    # evaluation at alpha * unit roots is a forward DFT in the degree
    # index, so the coefficients come back through fft / n
    coeffs = np.fft.fft(vals) / n
    coeffs = coeffs * alpha ** (-np.arange(n))
    mag = float(np.max(np.abs(coeffs)))
    if mag < profile.degenerate_tol:
        return None
    keep = np.nonzero(np.abs(coeffs) > profile.eliminant_trim * mag)[0]
    return coeffs[: keep[-1] + 1]


def _resultant_value(b1, b2):
    s1 = float(np.max(np.abs(b1)))
    s2 = float(np.max(np.abs(b2)))
    if s1 == 0.0 or s2 == 0.0:
        return 0.0
    return resultant(BinaryForm(b1), BinaryForm(b2))


def _candidate_points(coeffs, extras, profile: Profile):
    pts = list(extras)
    if coeffs is not None and coeffs.size >= 2:
        pts.extend(BinaryForm(coeffs).roots(profile).points())
    return dedup_points(pts, profile.point_tol)


def _collision_partners(P, Q, R, p: ProjPoint, omega, profile: Profile):
    """Partners q != p with a base collision at p and the omega-twisted
    R condition. Validation happens on the dominant slot of the
    augmented image at p, which is exactly the fiber-normalized
    condition with the normalizer eliminated; the subordinate slot is
    skipped because a true pair forces it and a spurious one fails the
    dominant slot already."""
    p_raw = p.coords
    b = _pair_form_base(P, Q, p_raw)
    if float(np.max(np.abs(b))) == 0.0:
        return []
    if b.size < 2:
        roots = []
    else:
        roots = BinaryForm(b).roots(profile).points()
    vp_p = P.at_point(p)
    vq_p = Q.at_point(p)
    vr_p = R.at_point(p)
    out = []
    for q in roots:
        if chordal_distance(p, q) <= profile.point_tol:
            continue
        vp_q = P.at_point(q)
        vq_q = Q.at_point(q)
        vr_q = R.at_point(q)
        # base collision residual on the dominant base slot
        base_cross = vp_p * vq_q - vq_p * vp_q
        base_scale = max(abs(vp_p), abs(vq_p)) * max(abs(vp_q), abs(vq_q))
        if abs(base_cross) > profile.pair_residual_tol * max(base_scale, 1e-300):
            continue
        if abs(vp_p) >= abs(vq_p):
            s_p, s_q = vp_p, vp_q
        else:
            s_p, s_q = vq_p, vq_q
        # the twisted condition compares the two products, so the
        # residual is measured against their own magnitude; an absolute
        # scale would wave through near-roots of R where both products
        # are tiny for no dynamical reason
        cross = vr_p * s_q - omega * s_p * vr_q
        denom = max(abs(vr_p * s_q), abs(s_p * vr_q))
        if abs(cross) > profile.pair_residual_tol * max(denom, 1e-300):
            continue
        if omega != 1.0:
            # rotation pairs must not be plain branch collisions; both
            # R values vanishing, or an untwisted match, disqualifies
            plain = vr_p * s_q - s_p * vr_q
            if abs(plain) <= profile.pair_residual_tol * max(denom, 1e-300):
                continue
        out.append(q)
    return out


def _standard_extras(P, Q, R, profile: Profile):
    """Cheap candidate points the circle chart can miss or a collapsed
    resultant can hide: the chart's infinity and every vanishing point
    of one of the three forms."""
    extras = [ProjPoint([1.0, 0.0])]
    for form in (P, Q, R):
        extras.extend(form.roots(profile).points())
    return extras


def compute_x_minus1(f: PencilEndo, profile: Profile = DEFAULT):
    """Critical points of the base map plus first components of
    off-diagonal augmented-image collisions. Returns (points, flag);
    the flag reports a positive-dimensional collision family, in which
    case the points are witnesses only."""
    P, Q, R = _unit_forms(f)
    d = f.d
    points = list(critical_points(P, Q, profile).points())
    extras = _standard_extras(P, Q, R, profile)

    def value_at(x):
        p_raw = (x, 1.0)
        b1 = _pair_form_base(P, Q, p_raw)
        b2 = _deflate_diagonal(
            P.evaluate(x, 1.0) * R.coeffs - R.evaluate(x, 1.0) * P.coeffs,
            p_raw,
        )
        return _resultant_value(b1, b2)

    coeffs = _interp_eliminant(value_at, 4 * d * d, profile)
    degenerate = coeffs is None
    for p in _candidate_points(coeffs, extras, profile):
        partners = _collision_partners(P, Q, R, p, 1.0, profile)
        if partners:
            points.append(p)
            points.extend(partners)
    return dedup_points(points, profile.point_tol), degenerate


def compute_y_minus2(f: PencilEndo, profile: Profile = DEFAULT):
    """Roots of R plus first components of off-diagonal rotation
    collisions, one twisted system per nontrivial d-th root of unity.
    Returns (points, flag) as in compute_x_minus1."""
    P, Q, R = _unit_forms(f)
    d = f.d
    points = list(R.roots(profile).points())
    extras = _standard_extras(P, Q, R, profile)
    degenerate = False
    for k in range(1, d):
        omega = np.exp(2j * np.pi * k / d)

        def value_at(x, _omega=omega):
            p_raw = (x, 1.0)
            b1 = _pair_form_base(P, Q, p_raw)
            b2 = _pair_form_twisted(P, R, _omega, p_raw)
            return _resultant_value(b1, b2)

        coeffs = _interp_eliminant(value_at, 4 * d * d, profile)
        if coeffs is None:
            degenerate = True
        for p in _candidate_points(coeffs, extras, profile):
            partners = _collision_partners(P, Q, R, p, omega, profile)
            if partners:
                points.append(p)
                points.extend(partners)
    return dedup_points(points, profile.point_tol), degenerate


def _image_points(f, pts, steps=1):
    out = []
    for p in pts:
        q = p
        for _ in range(steps):
            q = base_apply(f, q)
        out.append(q)
    return out


def _preimage_points(f, pts, profile):
    out = []
    for q in pts:
        out.extend(l.base for l in base_preimages(f, q, profile))
    return out


def assemble_sets(f: PencilEndo, profile: Profile = DEFAULT) -> SpecialSets:
    """Builds the full configuration. Only the coefficient triple
    (P, Q, R) enters; epsilon never does, so runs that differ only in
    epsilon produce identical sets."""
    x_minus1, deg_x = compute_x_minus1(f, profile)
    y_minus2, deg_y = compute_y_minus2(f, profile)
    tol = profile.point_tol
    x_set = dedup_points(_image_points(f, x_minus1, 1), tol)
    y_minus1 = dedup_points(_image_points(f, y_minus2, 1), tol)
    y_set = dedup_points(_image_points(f, y_minus2, 2), tol)
    z_set = dedup_points(x_set + y_set, tol)
    script_z = [
        z for z in z_set if min_dist_to(base_apply(f, z), z_set) <= tol
    ]
    pre1 = dedup_points(_preimage_points(f, z_set, profile), tol)
    pre2 = dedup_points(_preimage_points(f, pre1, profile), tol)
    cloud = dedup_points(x_set + y_set + pre1 + pre2, tol)
    margin_r = 0.5
    for i in range(len(cloud)):
        for j in range(i + 1, len(cloud)):
            dist = chordal_distance(cloud[i], cloud[j])
            if dist > tol:
                margin_r = min(margin_r, 0.5 * dist)
    return SpecialSets(
        x_minus1=x_minus1,
        y_minus2=y_minus2,
        x_set=x_set,
        y_set=y_set,
        z_set=z_set,
        script_z=script_z,
        margin_r=margin_r,
        degenerate=deg_x or deg_y,
        y_minus1=y_minus1,
    )


def check_conditions(
    sets: SpecialSets,
    f: PencilEndo,
    profile: Profile = DEFAULT,
    r: float | None = None,
    samples: int = 20000,
    seed: int = 0,
) -> ConditionVerdict:
    """Disjointness and non-recurrence checks with realized margins.

    cond1: x_set and y_set disjoint. cond2: no two-step chain stays in
    z_set. cond2_simplified: no one-step return to z_set at all, a
    strictly stronger one-step form. cond_53_relaxed: the two-step
    chain set is exactly {[1:0]}. A margin passes when it clears twice
    the point tolerance. Degenerate configurations fail everything."""
    if sets.degenerate:
        return ConditionVerdict(
            cond1_disjoint=False,
            cond1_margin=0.0,
            cond2_chain=False,
            cond2_margin=0.0,
            cond2_simplified=False,
            cond2_simplified_margin=0.0,
            cond_53_relaxed=False,
            gamma_hat=0.0,
            epsilon_max=0.0,
        )
    tol = profile.point_tol
    pass_bar = 2.0 * tol

    cond1_margin = min(
        (
            chordal_distance(x, y)
            for x in sets.x_set
            for y in sets.y_set
        ),
        default=1.0,
    )

    chain_margins = []
    step_margins = []
    chain_members = []
    for z in sets.z_set:
        f1 = base_apply(f, z)
        f2 = base_apply(f, f1)
        d1 = min_dist_to(f1, sets.z_set)
        d2 = min_dist_to(f2, sets.z_set)
        step_margins.append(d1)
        chain_margins.append(max(d1, d2))
        if d1 <= tol and d2 <= tol:
            chain_members.append(z)
    cond2_margin = min(chain_margins, default=1.0)
    cond2s_margin = min(step_margins, default=1.0)
    relaxed = lists_match(chain_members, [ProjPoint([1.0, 0.0])], tol)

    r_used = 0.5 * sets.margin_r if r is None else r
    gamma_hat = estimate_gamma(f, sets, r_used, profile, samples, seed)
    alpha_lo, beta_hi = sphere_extrema(f.P, f.Q, f.R, profile)
    eps_max = epsilon_max(alpha_lo, gamma_hat, f.d, beta_hi)

    return ConditionVerdict(
        cond1_disjoint=cond1_margin > pass_bar,
        cond1_margin=float(cond1_margin),
        cond2_chain=cond2_margin > pass_bar,
        cond2_margin=float(cond2_margin),
        cond2_simplified=cond2s_margin > pass_bar,
        cond2_simplified_margin=float(cond2s_margin),
        cond_53_relaxed=relaxed,
        gamma_hat=float(gamma_hat),
        epsilon_max=float(eps_max),
    )


def _batched_roots(coeffs):
    """Roots of many univariate polynomials at once; coeffs is (n, d+1)
    ascending. Closed form at degree 2, batched companion eigenvalues
    above. Rows must have a nonvanishing top coefficient."""
    n, dd = coeffs.shape
    d = dd - 1
    if d == 2:
        a = coeffs[:, 2]
        b = coeffs[:, 1]
        c = coeffs[:, 0]
        s = np.sqrt(b * b - 4.0 * a * c)
        # pick the sign that avoids cancellation in b + s
        flip = (np.conj(b) * s).real < 0.0
        s = np.where(flip, -s, s)
        t = -(b + s)
        small = np.abs(t) < 1e-300
        t = np.where(small, 1e-300, t)
        u1 = t / (2.0 * a)
        u2 = 2.0 * c / t
        direct = np.sqrt(-c / a)
        u1 = np.where(small, direct, u1)
        u2 = np.where(small, -direct, u2)
        return np.stack([u1, u2], axis=1)
    monic = coeffs / coeffs[:, -1:]
    comp = np.zeros((n, d, d), dtype=complex)
    comp[:, 1:, :-1] = np.eye(d - 1)
    comp[:, :, -1] = -monic[:, :d]
    return np.linalg.eigvals(comp)


def _batched_fiber_data(f: PencilEndo, al, be):
    """Fiber-normalized R values and lift sup-norms of every base
    branch over the targets [al_i : be_i]. Rows whose fiber form drops
    degree (a branch at the chart's infinity) are dropped. Returns the
    kept (al, be, rvals, mvals); value arrays have shape (kept, d)."""
    d = f.d
    G = be[:, None] * f.P.coeffs[None, :] - al[:, None] * f.Q.coeffs[None, :]
    scale = np.max(np.abs(G), axis=1)
    good = np.abs(G[:, -1]) > 1e-12 * np.maximum(scale, 1e-300)
    al, be, G = al[good], be[good], G[good]
    u = _batched_roots(G)
    pv = f.P.evaluate(u, 1.0)
    qv = f.Q.evaluate(u, 1.0)
    rv = f.R.evaluate(u, 1.0)
    # normalizer through the dominant target slot; that slot's form
    # value cannot vanish at a preimage
    use_p = (np.abs(al) >= np.abs(be))[:, None]
    lam_d = np.where(use_p, al[:, None] / pv, be[:, None] / qv)
    rvals = lam_d * rv
    mvals = np.abs(lam_d) ** (1.0 / d) * np.maximum(np.abs(u), 1.0)
    return al, be, rvals, mvals


def _dist_to_set(al, be, points):
    """Chordal distance from [al_i : be_i] to the nearest point of a
    unit-lift point list; vectorized over i."""
    if not points:
        return np.full(al.shape, np.inf)
    norm = np.sqrt(np.abs(al) ** 2 + np.abs(be) ** 2)
    best = np.full(al.shape, np.inf)
    for p in points:
        z0, w0 = p.coords
        dist = np.abs(al * w0 - be * z0) / norm
        best = np.minimum(best, dist)
    return best


def _ring_targets(center: ProjPoint, rho: float, n_angles: int):
    """Points at exact chordal distance rho from center: the circle is
    |t| = rho / sqrt(1 - rho^2) in the unitary chart centered there."""
    rho = min(rho, 0.999999)
    z0, w0 = center.coords
    u1 = np.array([-np.conj(w0), np.conj(z0)])
    t = rho / np.sqrt(1.0 - rho * rho)
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    offs = t * np.exp(1j * theta)
    al = z0 + offs * u1[0]
    be = w0 + offs * u1[1]
    return al, be


def estimate_gamma(
    f: PencilEndo,
    sets: SpecialSets,
    r: float,
    profile: Profile = DEFAULT,
    samples: int = 20000,
    seed: int = 0,
) -> float:
    """Sampled lower envelope of the fiber separation quantities.

    Over base points clear of x_set, distinct branches i != j
    contribute |R_i - R_j| / (m_i + m_j)^d; over base points whose
    image is clear of y_set, every ordered branch pair and nontrivial
    rotation contributes |R_i - omega R_j| / (m_i + m_j)^d. R values
    are taken on the fiber-normalized lifts, m is the lift sup-norm.

    The infimum over the allowed region sits on the exclusion-circle
    boundaries, where branch quantities degenerate toward zero; uniform
    sampling alone converges to it slowly. Deterministic rings just
    outside each exclusion circle (pulled back through the base map for
    the image-side exclusion) pin the boundary minimum, and the seeded
    uniform cloud covers the interior.
    """
    rng = np.random.default_rng(seed)
    d = f.d
    gauss = rng.standard_normal((samples, 4))
    al = gauss[:, 0] + 1j * gauss[:, 1]
    be = gauss[:, 2] + 1j * gauss[:, 3]

    ring_al, ring_be = [al], [be]
    n_ang = 256
    for mult in (1.0 + 1e-9, 1.05):
        for x0 in sets.x_set:
            a2, b2 = _ring_targets(x0, r * mult, n_ang)
            ring_al.append(a2)
            ring_be.append(b2)
        for y0 in sets.y_set:
            a2, b2 = _ring_targets(y0, r * mult, n_ang)
            # pull the image-side ring back one base step
            G = b2[:, None] * f.P.coeffs[None, :] - a2[:, None] * f.Q.coeffs[None, :]
            keep = np.abs(G[:, -1]) > 1e-12 * np.max(np.abs(G), axis=1)
            u = _batched_roots(G[keep])
            ring_al.append(u.ravel())
            ring_be.append(np.ones(u.size, dtype=complex))
    al = np.concatenate(ring_al)
    be = np.concatenate(ring_be)

    al, be, rvals, mvals = _batched_fiber_data(f, al, be)
    far_x = _dist_to_set(al, be, sets.x_set) > r
    fz = f.P.evaluate(al, be)
    fw = f.Q.evaluate(al, be)
    far_y = _dist_to_set(fz, fw, sets.y_set) > r
    if not (np.any(far_x) or np.any(far_y)):
        raise InsufficientData(
            "no sample cleared the exclusion radius; r too large"
        )
    best = np.inf
    for i in range(d):
        for j in range(d):
            denom = (mvals[:, i] + mvals[:, j]) ** d
            if i < j and np.any(far_x):
                v = np.abs(rvals[:, i] - rvals[:, j]) / denom
                best = min(best, float(np.min(v[far_x])))
            if np.any(far_y):
                for k in range(1, d):
                    om = np.exp(2j * np.pi * k / d)
                    v = np.abs(rvals[:, i] - om * rvals[:, j]) / denom
                    best = min(best, float(np.min(v[far_y])))
    if not np.isfinite(best):
        raise InsufficientData("separation sampling produced no values")
    return float(best)


def epsilon_max(
    alpha_lo: float, gamma_hat: float, d: int, beta_hi: float = 1.0
) -> float:
    """Largest epsilon for which the sampled separation dominates the
    trapping-radius power: solves eps * gamma = (4 eps beta / alpha)^d
    for eps. With alpha = gamma = 1 and d = 2 this is 1/16."""
    if gamma_hat <= 0.0:
        return 0.0
    return float(
        (gamma_hat * alpha_lo**d / (4.0 * beta_hi) ** d) ** (1.0 / (d - 1))
    )
