"""Three-dimensional skew-product extensions and box diagnostics.

Two ways to stack a second fiber on a plane pencil map, both keeping
every solve univariate:

* hyperplane variant: [z:w:t:u] -> [P:Q:t^d+e1*R:u^d+e2*Q-e2^d*w^d].
  The hyperplane {u = e2*w} is invariant by the algebraic identity
  (e2*w)^d + e2*Q - e2^d*w^d = e2*Q, and the attractor inside the
  doubled collar is one-dimensional but non-algebraic.
* product variant: two independent pencil fibers over one fixed
  quadratic base, [z:w:t:u] -> [z^2+0.1w^2:w^2:t^2+e1*(z^2+zw):
  u^2+e2*(z^2+zw)]; the factors differ only in their fiber scale.

Backward steps use the skew ladder (base branch, then each fiber
separately), so an m-step preimage tree costs d^m univariate base
solves and two d^m-leaf scalar fiber cascades per base path instead
of d^{3m} polynomial-system solves. Box checks sample the two
horizontal-like boundary conditions with margins and estimate the
restricted-injectivity count that upgrades a horizontal-like map to
a Henon-like one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .degcert import DegreeCertificate
from .errors import BudgetExceeded, ConfigInvalid, InsufficientData, PrerequisiteFailed
from .pencilmap import PencilEndo, apply, base_apply, preimages
from .precision import DEFAULT, Profile
from .projgeom import BinaryForm, ProjPoint, chordal_distance
from .potential import slice_measure
from .specialsets import assemble_sets, check_conditions

__all__ = [
    "P3Endo",
    "Box",
    "HorizontalLikeReport",
    "BoxCountFit",
    "build",
    "apply3",
    "iterate3",
    "project_first_fiber",
    "project_second_fiber",
    "check_fixed_point_condition",
    "horizontal_like_check",
    "count_p3_preimages_in",
    "certify_p3_degree",
    "fiber_slice_cloud",
    "box_counting_dim",
    "sample_p3_collar",
]

# fixed base/fiber forms of the product variant (quadratic box family)
_PRODUCT_P = (0.1, 0.0, 1.0)
_PRODUCT_Q = (1.0, 0.0, 0.0)
_PRODUCT_R = (0.0, 1.0, 1.0)

# second-fiber smallness constant: collar radius rho2 = _C * |e2|
_C = 1.0


@dataclass(frozen=True)
class P3Endo:
    """Skew endomorphism of P^3 over a plane pencil base."""

    variant: str  # "hyperplane" | "product"
    P: BinaryForm
    Q: BinaryForm
    R: BinaryForm
    epsilon1: complex
    epsilon2: complex

    @property
    def d(self) -> int:
        return self.P.degree

    def factor(self, which: int) -> PencilEndo:
        """The P^2 pencil map governing fiber 1 (t) or 2 (u)."""
        if which == 1:
            return PencilEndo(P=self.P, Q=self.Q, R=self.R, epsilon=self.epsilon1)
        if which != 2:
            raise ValueError("factor index must be 1 or 2")
        if self.variant == "product":
            return PencilEndo(P=self.P, Q=self.Q, R=self.R, epsilon=self.epsilon2)
        # u^d + e2*Q - e2^d w^d == u^d + e2*(Q - e2^{d-1} w^d)
        shifted = np.array(self.Q.coeffs, dtype=complex)
        shifted[0] -= self.epsilon2 ** (self.d - 1)
        return PencilEndo(
            P=self.P, Q=self.Q, R=BinaryForm(shifted), epsilon=self.epsilon2
        )

    def _fiber_rhs_u(self, q_val: complex, r_val: complex, w_lift: complex) -> complex:
        """Value that the d-th power of the second fiber must hit."""
        if self.variant == "product":
            return self.epsilon2 * r_val
        return self.epsilon2 * q_val - self.epsilon2**self.d * w_lift**self.d


def build(
    variant: str,
    epsilon1: complex,
    epsilon2: complex,
    P: BinaryForm | None = None,
    Q: BinaryForm | None = None,
    R: BinaryForm | None = None,
    profile: Profile = DEFAULT,
    fixed_point_steps: int = 6,
) -> P3Endo:
    """Construct a P^3 skew map, enforcing the base prerequisites.

    The hyperplane variant requires its plane data: non-degenerate
    special sets, disjointness and a non-recurrence condition, the
    base fixed-point avoidance of [1:0] for `fixed_point_steps`
    iterates, and second-fiber smallness ((1+c)^d+1)|e2|^d < c|e2|.
    The product variant carries the fixed quadratic forms and accepts
    any nonzero fiber scales.
    """
    if variant == "product":
        if P is not None or Q is not None or R is not None:
            raise ConfigInvalid("product variant carries fixed forms")
        return P3Endo(
            variant="product",
            P=BinaryForm(_PRODUCT_P),
            Q=BinaryForm(_PRODUCT_Q),
            R=BinaryForm(_PRODUCT_R),
            epsilon1=epsilon1,
            epsilon2=epsilon2,
        )
    if variant != "hyperplane":
        raise ConfigInvalid(f"unknown variant {variant!r}")
    if P is None or Q is None or R is None:
        raise ConfigInvalid("hyperplane variant needs P, Q, R")

    base = PencilEndo(P=P, Q=Q, R=R, epsilon=epsilon1)
    failures = []
    sets = assemble_sets(base, profile)
    if sets.degenerate:
        failures.append("special sets are degenerate")
    else:
        verdict = check_conditions(sets, base, profile)
        if not verdict.cond1_disjoint:
            failures.append("critical/image set disjointness fails")
        if not (verdict.cond2_chain or verdict.cond2_simplified):
            failures.append("two-step non-recurrence fails in both forms")
        if abs(epsilon1) > verdict.epsilon_max:
            warnings.warn(
                f"fiber scale {abs(epsilon1):.3g} exceeds the genericity bound "
                f"{verdict.epsilon_max:.3g}",
                UserWarning,
            )
    if not check_fixed_point_condition(P, Q, fixed_point_steps, profile):
        failures.append(
            f"base orbit of [1:0] returns within {fixed_point_steps} steps"
        )
    d = P.degree
    e2 = abs(epsilon2)
    if not ((1 + _C) ** d + 1) * e2**d < _C * e2:
        failures.append("second-fiber smallness inequality fails")
    if failures:
        raise PrerequisiteFailed("; ".join(failures))
    return P3Endo(
        variant="hyperplane", P=P, Q=Q, R=R, epsilon1=epsilon1, epsilon2=epsilon2
    )


def apply3(f3: P3Endo, x: ProjPoint) -> ProjPoint:
    z, w, t, u = x.coords
    p = f3.P.evaluate(z, w)
    q = f3.Q.evaluate(z, w)
    r = f3.R.evaluate(z, w)
    return ProjPoint(
        [
            p,
            q,
            t**f3.d + f3.epsilon1 * r,
            u**f3.d + f3._fiber_rhs_u(q, r, w),
        ]
    )


def iterate3(f3: P3Endo, x: ProjPoint, n: int) -> ProjPoint:
    for _ in range(n):
        x = apply3(f3, x)
    return x


def project_first_fiber(x: ProjPoint) -> ProjPoint:
    """[z:w:t:u] -> [z:w:t]."""
    z, w, t, u = x.coords
    return ProjPoint([z, w, t])


def project_second_fiber(x: ProjPoint) -> ProjPoint:
    """[z:w:t:u] -> [z:w:u]."""
    z, w, t, u = x.coords
    return ProjPoint([z, w, u])


def check_fixed_point_condition(
    P: BinaryForm, Q: BinaryForm, n_max: int = 6, profile: Profile = DEFAULT
) -> bool:
    """True iff the base orbit of [1:0] stays away from [1:0] for
    n_max steps, the genericity needed by the hyperplane construction."""
    base = PencilEndo(P=P, Q=Q, R=P, epsilon=0.0)
    start = ProjPoint([1.0, 0.0])
    p = start
    for _ in range(n_max):
        p = base_apply(base, p)
        if chordal_distance(p, start) <= profile.point_tol:
            return False
    return True


# ---------------------------------------------------------------------------
# boxes and horizontal-like checks


@dataclass(frozen=True)
class Box:
    """Bidisk region: base annulus inner|w| < |z| < outer|w| crossed
    with the fiber disc |t| < rho*max(|z|,|w|)."""

    inner: float
    outer: float
    rho: float

    def __post_init__(self):
        if not (0.0 < self.inner < 1.0 < self.outer):
            raise ConfigInvalid("box annulus must satisfy inner < 1 < outer")
        if self.rho <= 0.0:
            raise ConfigInvalid("box fiber radius must be positive")

    def base_ratio(self, x: ProjPoint) -> float:
        z, w = x.coords[0], x.coords[1]
        if w == 0:
            return math.inf
        return abs(z) / abs(w)

    def fiber_ratio(self, x: ProjPoint) -> float:
        z, w, t = x.coords
        return abs(t) / (self.rho * max(abs(z), abs(w)))

    def contains(self, x: ProjPoint) -> bool:
        r = self.base_ratio(x)
        return self.inner < r < self.outer and self.fiber_ratio(x) < 1.0


@dataclass(frozen=True)
class HorizontalLikeReport:
    vertical_escape: bool  # images of the vertical boundary avoid the box
    horizontal_contraction: bool  # images of the closure avoid the fiber rim
    margin_vertical: float
    margin_horizontal: float
    witness_vertical: ProjPoint
    witness_horizontal: ProjPoint
    injectivity_max: int
    horizontal_like: bool
    henon_like: bool
    boundary_samples: int
    injectivity_samples: int


def _box_points(box: Box, count: int, rng, ratio_mode: str):
    """Sample points of the box: ratio_mode 'interior' draws open-box
    ratios and fibers, 'vertical' pins the ratio to the annulus edges,
    'closure' includes both edges and the full closed fiber disc."""
    if ratio_mode == "vertical":
        r = np.where(rng.uniform(size=count) < 0.5, box.inner, box.outer)
        s = rng.uniform(0.0, 1.0, count)  # closed fiber disc
    elif ratio_mode == "closure":
        r = rng.uniform(box.inner, box.outer, count)
        edge = rng.uniform(size=count)
        r = np.where(edge < 0.1, box.inner, np.where(edge > 0.9, box.outer, r))
        s = np.minimum(rng.uniform(0.0, 1.0, count) * 1.12, 1.0)  # bias to rim
    else:
        r = rng.uniform(box.inner, box.outer, count)
        s = rng.uniform(0.0, 1.0, count) * 0.999
    theta = rng.uniform(0.0, 2.0 * np.pi, count)
    phi = rng.uniform(0.0, 2.0 * np.pi, count)
    z = r * np.exp(1j * theta)
    w = np.ones(count, dtype=complex)
    t = box.rho * np.maximum(r, 1.0) * s * np.exp(1j * phi)
    return z, w, t


def _escape_margin(box: Box, y: ProjPoint) -> float:
    """How far the image point is from the open box: positive numbers
    certify escape in at least one direction."""
    r = box.base_ratio(y)
    fiber_excess = box.fiber_ratio(y) - 1.0
    if math.isinf(r):
        return math.inf
    return max(box.inner - r, r - box.outer, fiber_excess)


def horizontal_like_check(
    f: PencilEndo,
    box: Box,
    boundary_samples: int = 10**4,
    injectivity_samples: int = 10**3,
    seed: int = 0,
    profile: Profile = DEFAULT,
) -> HorizontalLikeReport:
    """Sampled horizontal-like conditions with margins, plus the
    restricted-injectivity count.

    Condition 1: images of the vertical boundary miss the box (margin =
    worst escape distance). Condition 2: images of the box closure
    whose base lands back in the annulus stay strictly inside the fiber
    disc (margin = worst rim clearance). Injectivity: for samples x of
    f(f(B) cap B), count preimages of x lying in both B and f(B) (the
    latter decided by a one-step back-check); the Henon-like verdict
    needs that count to stay at 1, since a doubled count is exactly a
    self-overlap of f on f(B)."""
    rng = np.random.default_rng(seed)

    half = boundary_samples // 2
    z, w, t = _box_points(box, half, rng, "vertical")
    margin_v = math.inf
    witness_v = None
    for k in range(half):
        x = ProjPoint([z[k], w[k], t[k]])
        m = _escape_margin(box, apply(f, x))
        if m < margin_v:
            margin_v, witness_v = m, x

    z, w, t = _box_points(box, boundary_samples - half, rng, "closure")
    margin_h = math.inf
    witness_h = None
    for k in range(boundary_samples - half):
        x = ProjPoint([z[k], w[k], t[k]])
        y = apply(f, x)
        if box.inner < box.base_ratio(y) < box.outer:
            m = 1.0 - box.fiber_ratio(y)
            if m < margin_h:
                margin_h, witness_h = m, x

    def _in_image_of_box(p: ProjPoint) -> bool:
        return any(box.contains(yy) for yy, _ in preimages(f, p, profile))

    inj_max = 0
    accepted = 0
    attempts = 0
    while accepted < injectivity_samples and attempts < 60 * injectivity_samples:
        attempts += 1
        za, wa, ta = _box_points(box, 1, rng, "interior")
        b = apply(f, ProjPoint([za[0], wa[0], ta[0]]))
        if not box.contains(b):
            continue
        x = apply(f, b)
        if not box.contains(x):
            continue
        count = 0
        for y, _ in preimages(f, x, profile):
            if box.contains(y) and _in_image_of_box(y):
                count += 1
        inj_max = max(inj_max, count)
        accepted += 1

    cond_v = margin_v > 0.0
    cond_h = margin_h > 0.0  # no constrained sample leaves margin at +inf
    horizontal = cond_v and cond_h
    return HorizontalLikeReport(
        vertical_escape=cond_v,
        horizontal_contraction=cond_h,
        margin_vertical=margin_v,
        margin_horizontal=margin_h,
        witness_vertical=witness_v,
        witness_horizontal=witness_h,
        injectivity_max=inj_max,
        horizontal_like=horizontal,
        henon_like=horizontal and inj_max <= 1,
        boundary_samples=boundary_samples,
        injectivity_samples=accepted,
    )


# ---------------------------------------------------------------------------
# degree certification through the skew ladder


def _collar_u_offset(f3: P3Endo, w_value: complex) -> complex:
    """Center of the second-fiber collar over a base lift: e2*w for the
    hyperplane variant (collar tracks the invariant section), 0 for the
    product variant."""
    if f3.variant == "hyperplane":
        return f3.epsilon2 * w_value
    return 0.0


def sample_p3_collar(
    f3: P3Endo, rho1: float, rho2: float, count: int, seed: int = 0, burn: int = 0
):
    """Random points of the doubled collar, optionally pushed forward."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, 4))
    z = g[:, 0] + 1j * g[:, 1]
    w = g[:, 2] + 1j * g[:, 3]
    out = []
    for k in range(count):
        mx = max(abs(z[k]), abs(w[k]))
        t = rho1 * mx * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        du = rho2 * mx * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        x = ProjPoint([z[k], w[k], t, _collar_u_offset(f3, w[k]) + du])
        out.append(iterate3(f3, x, burn))
    return out


# Backward fiber cascades are ill-conditioned: reconstructing a fiber
# value one level back divides its relative error by the (small) local
# fiber derivative, and chains of m levels multiply those factors into
# 1e15-and-beyond amplification whenever the orbit passes near the
# fiber center. Doubles cannot decide deep-leaf membership, so the
# counting engine runs in mpmath extended precision end to end (base
# solves included -- double-precision lift noise injected mid-cascade
# would be amplified by the remaining levels all the same).

_LADDER_DPS = 60


class _MpForms:
    """Map data lifted to mpmath scalars at the working precision."""

    __slots__ = ("p", "q", "r", "d", "eps1", "eps2", "hyperplane", "units")

    def __init__(self, f3: P3Endo):
        self.p = [mp.mpc(c) for c in f3.P.coeffs]
        self.q = [mp.mpc(c) for c in f3.Q.coeffs]
        self.r = [mp.mpc(c) for c in f3.R.coeffs]
        self.d = f3.d
        self.eps1 = mp.mpc(f3.epsilon1)
        self.eps2 = mp.mpc(f3.epsilon2)
        self.hyperplane = f3.variant == "hyperplane"
        self.units = [mp.expjpi(mp.mpf(2 * k) / self.d) for k in range(self.d)]

    def eval_form(self, coeffs, z, w):
        """sum_k coeffs[k] z^k w^(d-k)."""
        total = mp.mpc(0)
        zp = mp.mpc(1)
        wp = [mp.mpc(1)]
        for _ in range(self.d):
            wp.append(wp[-1] * w)
        for k in range(self.d + 1):
            total += coeffs[k] * zp * wp[self.d - k]
            zp = zp * z
        return total

    def u_shift(self, qv, rv, w_lift):
        if self.hyperplane:
            return self.eps2 * qv - self.eps2**self.d * w_lift**self.d
        return self.eps2 * rv

    def u_center(self, w_lift):
        return self.eps2 * w_lift if self.hyperplane else mp.mpc(0)

    def apply4(self, z, w, t, u):
        """Forward step on a raw four-coordinate lift (no rescaling)."""
        pv = self.eval_form(self.p, z, w)
        qv = self.eval_form(self.q, z, w)
        rv = self.eval_form(self.r, z, w)
        return pv, qv, t**self.d + self.eps1 * rv, u**self.d + self.u_shift(
            qv, rv, w
        )

    def base_branches(self, alpha, beta):
        """Normalized lifts of the d base preimages of [alpha:beta]:
        roots of beta*P - alpha*Q, scaled so (P,Q)(lift) = (alpha,beta)."""
        d = self.d
        c = [beta * self.p[k] - alpha * self.q[k] for k in range(d + 1)]
        scale = max(abs(ck) for ck in c)
        tol = scale * mp.mpf(10) ** (12 - mp.mp.dps)
        pairs = []
        top = d
        while top > 0 and abs(c[top]) <= tol:
            pairs.append((mp.mpc(1), mp.mpc(0)))  # root at [1:0]
            top -= 1
        if top == 1:
            pairs.append((-c[0] / c[1], mp.mpc(1)))
        elif top == 2:
            disc = mp.sqrt(c[1] * c[1] - 4 * c[2] * c[0])
            q = -(c[1] + disc) / 2 if mp.re(
                mp.conj(c[1]) * disc
            ) >= 0 else -(c[1] - disc) / 2
            if q == 0:
                pairs.extend([(mp.mpc(0), mp.mpc(1))] * 2)
            else:
                pairs.append((q / c[2], mp.mpc(1)))
                pairs.append((c[0] / q, mp.mpc(1)))
        elif top > 2:
            for z0 in mp.polyroots(
                [c[k] for k in range(top, -1, -1)], maxsteps=200, extraprec=80
            ):
                pairs.append((mp.mpc(z0), mp.mpc(1)))
        out = []
        for z0, w0 in pairs:
            pv = self.eval_form(self.p, z0, w0)
            qv = self.eval_form(self.q, z0, w0)
            mu = pv / alpha if abs(alpha) >= abs(beta) else qv / beta
            lam = (1 / mu) ** (1 / mp.mpf(d))
            out.append((lam * z0, lam * w0))
        return out

    def roots_of(self, rhs):
        """All d-th roots of rhs (with repetition at zero)."""
        if rhs == 0:
            return [mp.mpc(0)] * self.d
        principal = rhs ** (1 / mp.mpf(self.d))
        return [principal * ukth for ukth in self.units]


def _mp_ladder_step(values, mults, inv_nu, shift, forms):
    """One backward fiber level: roots of y^d = v*inv_nu - shift."""
    new_v, new_m = [], []
    for v, mlt in zip(values, mults):
        rhs = v * inv_nu - shift
        if rhs == 0:
            new_v.append(mp.mpc(0))
            new_m.append(mlt * forms.d)
            continue
        principal = rhs ** (1 / mp.mpf(forms.d))
        for ukth in forms.units:
            new_v.append(principal * ukth)
            new_m.append(mlt)
    return new_v, new_m


def _mp_leaf_count(
    forms, zl, wl, t_vals, t_mults, u_vals, u_mults, mult, rho1, rho2,
    region, weighted,
):
    mx = max(abs(zl), abs(wl))
    t_wt = np.array(t_mults if weighted else [1] * len(t_mults), dtype=np.int64)
    u_wt = np.array(u_mults if weighted else [1] * len(u_mults), dtype=np.int64)
    if region == "all":
        return mult * int(t_wt.sum()) * int(u_wt.sum())
    center = forms.u_center(wl)
    t_in = np.array([abs(v) < rho1 * mx for v in t_vals], dtype=bool)
    u_in = np.array([abs(v - center) < rho2 * mx for v in u_vals], dtype=bool)
    pair_ok = np.outer(t_in, u_in)
    if region == "image":
        # one-step back-check through each base branch: a leaf lies in
        # the image of the collar iff some branch admits both fiber
        # preimages within their collars.
        dominant = zl if abs(zl) >= abs(wl) else wl
        alpha, beta = zl / dominant, wl / dominant
        inv_nu = 1 / dominant
        any_branch = np.zeros_like(pair_ok)
        for zb, wb in forms.base_branches(alpha, beta):
            mb = max(abs(zb), abs(wb))
            rv = forms.eval_form(forms.r, zb, wb)
            qv = forms.eval_form(forms.q, zb, wb)
            t_bound = (rho1 * mb) ** forms.d
            shift_t = forms.eps1 * rv
            shift_u = forms.u_shift(qv, rv, wb)
            center_b = forms.u_center(wb)
            t_pre = np.array(
                [abs(v * inv_nu - shift_t) < t_bound for v in t_vals], dtype=bool
            )
            u_pre = np.array(
                [
                    any(
                        abs(root - center_b) < rho2 * mb
                        for root in forms.roots_of(v * inv_nu - shift_u)
                    )
                    for v in u_vals
                ],
                dtype=bool,
            )
            any_branch |= np.outer(t_pre, u_pre)
        pair_ok &= any_branch
    return mult * int((np.outer(t_wt, u_wt) * pair_ok).sum())


def _mp_count(forms, coords, m, rho1, rho2, region, weighted):
    """Skew-ladder preimage count on raw mpmath coordinates: enumerate
    base itineraries, cascade each fiber independently along them, and
    combine the two membership masks pairwise at the leaves."""
    z, w, t, u = coords
    rho1 = mp.mpf(rho1)
    rho2 = mp.mpf(rho2)

    def recurse(z, w, t_vals, t_mults, u_vals, u_mults, mult, level):
        dominant = z if abs(z) >= abs(w) else w
        alpha, beta = z / dominant, w / dominant
        inv_nu = 1 / dominant
        total = 0
        for zl, wl in forms.base_branches(alpha, beta):
            rv = forms.eval_form(forms.r, zl, wl)
            qv = forms.eval_form(forms.q, zl, wl)
            tv, tm = _mp_ladder_step(
                t_vals, t_mults, inv_nu, forms.eps1 * rv, forms
            )
            uv, um = _mp_ladder_step(
                u_vals, u_mults, inv_nu, forms.u_shift(qv, rv, wl), forms
            )
            if level + 1 == m:
                total += _mp_leaf_count(
                    forms, zl, wl, tv, tm, uv, um, mult, rho1, rho2,
                    region, weighted,
                )
            else:
                total += recurse(zl, wl, tv, tm, uv, um, mult, level + 1)
        return total

    return recurse(z, w, [t], [1], [u], [1], 1, 0)


def count_p3_preimages_in(
    f3: P3Endo,
    x: ProjPoint,
    m: int,
    rho1: float,
    rho2: float,
    region: str = "image",
    profile: Profile = DEFAULT,
    budget: int = 10**6,
    weighted: bool = True,
    dps: int = _LADDER_DPS,
) -> int:
    """Multiplicity-weighted (or cardinality) count of m-step preimages
    of x inside the doubled collar ("collar"), its forward image
    ("image"), or unconstrained ("all")."""
    if region not in ("image", "collar", "all"):
        raise ValueError(f"unknown region {region!r}")
    if f3.d ** (3 * m) > budget:
        raise BudgetExceeded(
            f"skew tree holds {f3.d ** (3 * m)} leaves, budget {budget}"
        )
    with mp.workdps(dps):
        forms = _MpForms(f3)
        coords = [mp.mpc(c) for c in x.coords]
        return _mp_count(forms, coords, m, rho1, rho2, region, weighted)


def _mp_collar_orbit(forms, rho1, rho2, rng, burn):
    """Random collar point pushed forward `burn` steps, kept as raw
    mpmath coordinates so the deep backward cascade starts exact."""
    g = rng.standard_normal(4)
    z = mp.mpc(g[0], g[1])
    w = mp.mpc(g[2], g[3])
    mx = max(abs(z), abs(w))
    t = mp.mpc(rho1) * mx * mp.mpf(rng.uniform()) * mp.expjpi(2 * mp.mpf(rng.uniform()))
    du = mp.mpc(rho2) * mx * mp.mpf(rng.uniform()) * mp.expjpi(2 * mp.mpf(rng.uniform()))
    u = forms.u_center(w) + du
    for _ in range(burn):
        z, w, t, u = forms.apply4(z, w, t, u)
        # keep magnitudes tame without touching the projective class
        dominant = abs(z if abs(z) >= abs(w) else w)
        z, w, t, u = z / dominant, w / dominant, t / dominant, u / dominant
    return z, w, t, u


def _to_projpoint(coords) -> ProjPoint:
    dominant = max(abs(c) for c in coords)
    return ProjPoint([complex(c / dominant) for c in coords])


def certify_p3_degree(
    f3: P3Endo,
    rho1: float,
    rho2: float,
    m: int = 6,
    samples: int = 200,
    seed: int = 0,
    profile: Profile = DEFAULT,
    budget: int = 10**6,
    dps: int = _LADDER_DPS,
) -> DegreeCertificate:
    """Small-topological-degree certificate for the m-th iterate on the
    image of the doubled collar: samples are drawn from the (m+1)-fold
    forward image, counted against the threshold d^m."""
    if f3.variant != "hyperplane":
        raise ConfigInvalid("degree certification applies to the hyperplane variant")
    if f3.d ** (3 * m) > budget:
        raise BudgetExceeded(
            f"skew tree holds {f3.d ** (3 * m)} leaves, budget {budget}"
        )
    rng = np.random.default_rng(seed)
    threshold = f3.d**m
    max_count = -1
    worst = None
    with mp.workdps(dps):
        forms = _MpForms(f3)
        for _ in range(samples):
            coords = _mp_collar_orbit(forms, rho1, rho2, rng, burn=m + 1)
            c = _mp_count(forms, coords, m, rho1, rho2, "image", True)
            if c > max_count:
                max_count, worst = c, _to_projpoint(coords)
        dt = 0
        rng_dt = np.random.default_rng(seed + 1)
        for _ in range(min(samples, 50)):
            coords = _mp_collar_orbit(forms, rho1, rho2, rng_dt, burn=2)
            dt = max(dt, _mp_count(forms, coords, 1, rho1, rho2, "collar", False))
    return DegreeCertificate(
        iterate_m=m,
        samples=samples,
        max_count=max_count,
        threshold=threshold,
        verdict=max_count < threshold,
        worst_point=worst,
        dt_one_step=dt,
    )


# ---------------------------------------------------------------------------
# box-counting diagnostics


@dataclass(frozen=True)
class BoxCountFit:
    slope: float
    counts: list  # (scale, occupied boxes) pairs; offset-averaged, so float
    residual: float  # max log-space deviation from the fitted line


def fiber_slice_cloud(f, base_point, depth, profile=DEFAULT, budget=10**6):
    """Leaf multiset of the depth-level backward slice over base_point.

    Expands the atoms of slice_measure back to one entry per preimage
    leaf (multiplicity = weight * d^depth), as a complex vector ready
    for box_counting_dim.  Leaves closer than the profile cluster
    tolerance land on the same double, which caps the resolvable depth;
    box counts on scales above that floor are unaffected."""
    sm = slice_measure(f, base_point, depth=depth, budget=budget, profile=profile)
    total = f.d ** depth
    atoms = np.asarray([a for a, _ in sm.atoms], dtype=complex)
    mult = np.rint(np.asarray([w for _, w in sm.atoms]) * total).astype(int)
    return np.repeat(atoms, np.maximum(mult, 1))


def box_counting_dim(cloud, chart, scales, offsets=8) -> BoxCountFit:
    """Least-squares box-counting slope of a planar cloud.

    chart maps each cloud item to an (x, y) pair; pass chart=None when
    the cloud already is an (n, 2) real array or a complex vector.
    scales must span at least 1.5 decades and the cloud must hold at
    least 10^4 points.  Each per-scale count is averaged over `offsets`
    random grid translations (fixed internal seed, so deterministic);
    offsets=0 counts on the origin-anchored grid only."""
    if chart is None:
        arr = np.asarray(cloud)
        if np.iscomplexobj(arr):
            pts = np.column_stack([arr.real, arr.imag]).astype(float)
        else:
            pts = np.asarray(arr, dtype=float)
    else:
        pts = np.array([chart(c) for c in cloud], dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 10**4:
        raise InsufficientData(
            f"box counting needs at least 10^4 points, got {0 if pts.ndim != 2 else pts.shape[0]}"
        )
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    span = math.log10(scales[0] / scales[-1])
    if len(scales) < 3 or span < 1.5 - 1e-9:
        raise InsufficientData(
            f"scales span {span:.3f} decades, need at least 1.5"
        )
    rng = np.random.default_rng(0x5ca1e)
    counts = []
    for delta in scales:
        if offsets:
            vals = []
            for _ in range(offsets):
                off = rng.uniform(0.0, delta, size=pts.shape[1])
                keys = np.unique(np.floor((pts + off) / delta).astype(np.int64), axis=0)
                vals.append(keys.shape[0])
            counts.append((float(delta), float(np.mean(vals))))
        else:
            keys = np.unique(np.floor(pts / delta).astype(np.int64), axis=0)
            counts.append((float(delta), float(keys.shape[0])))
    xs = np.log(1.0 / scales)
    ys = np.log([c for _, c in counts])
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.max(np.abs(slope * xs + intercept - ys)))
    return BoxCountFit(slope=float(slope), counts=counts, residual=residual)
