"""The pencil-preserving endomorphism [P(z,w) : Q(z,w) : t^d + eps R(z,w)]
of P^2, its base map on P^1, and complete preimage enumeration.

The map sends the pencil of lines through the center [0:0:1] to itself;
the induced dynamics on the line at infinity is base_apply. Fibers over
a base point are enumerated through NormalizedFiberLift, which pins the
representative (z_i, w_i) of each base preimage so that the fiber
equation t^d = t' - eps R(z_i, w_i) is literal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFamily, NonConvergence
from .precision import DEFAULT, Profile
from .projgeom import BinaryForm, ProjPoint, chordal_distance, resultant

__all__ = [
    "PencilEndo",
    "NormalizedFiberLift",
    "apply",
    "base_apply",
    "base_apply_aug",
    "base_preimages",
    "preimages",
    "green_correction",
    "iterate",
    "is_center",
    "CENTER",
]

CENTER = ProjPoint([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class PencilEndo:
    """Immutable map data. Construction enforces membership in the
    admissible coefficient family: resultant(P, Q) must be nonzero so
    that (0,0) is the only common zero of P and Q."""

    P: BinaryForm
    Q: BinaryForm
    R: BinaryForm
    epsilon: complex

    def __post_init__(self):
        d = self.P.degree
        if d < 2:
            raise ValueError("degree must be at least 2")
        if self.Q.degree != d or self.R.degree != d:
            raise ValueError("P, Q, R must share a degree")
        scale = (np.max(np.abs(self.P.coeffs)) * np.max(np.abs(self.Q.coeffs))) ** d
        res = resultant(self.P, self.Q)
        if abs(res) <= 1e-10 * scale:
            raise DegenerateFamily(
                f"resultant(P,Q) = {res:.3e} is numerically zero"
            )
        object.__setattr__(self, "epsilon", complex(self.epsilon))

    @property
    def d(self) -> int:
        return self.P.degree

    def __repr__(self):
        return (
            f"PencilEndo(d={self.d}, eps={self.epsilon:.6g}, "
            f"P={list(self.P.coeffs)}, Q={list(self.Q.coeffs)}, "
            f"R={list(self.R.coeffs)})"
        )


@dataclass(frozen=True)
class NormalizedFiberLift:
    """One base preimage of `target` with the representative scaled so
    that (P, Q) at `lift` equals the stored lift of `target` exactly.
    That scaling makes R(lift) a well-defined per-branch quantity: the
    residual d-th root ambiguity cancels in the d-th power."""

    base: ProjPoint
    lift: tuple
    target: ProjPoint
    multiplicity: int

    def r_value(self, R: BinaryForm) -> complex:
        return R.evaluate(self.lift[0], self.lift[1])

    def max_modulus(self) -> float:
        return max(abs(self.lift[0]), abs(self.lift[1]))


def is_center(x: ProjPoint, tol: float = 1e-12) -> bool:
    return x.dim == 2 and abs(x.coords[0]) < tol and abs(x.coords[1]) < tol


def apply(f: PencilEndo, x: ProjPoint) -> ProjPoint:
    z, w, t = x.coords
    return ProjPoint(
        [f.P.evaluate(z, w), f.Q.evaluate(z, w), t**f.d + f.epsilon * f.R.evaluate(z, w)]
    )


def base_apply(f: PencilEndo, p: ProjPoint) -> ProjPoint:
    z, w = p.coords
    return ProjPoint([f.P.evaluate(z, w), f.Q.evaluate(z, w)])


def base_apply_aug(f: PencilEndo, p: ProjPoint) -> ProjPoint:
    z, w = p.coords
    return ProjPoint(
        [f.P.evaluate(z, w), f.Q.evaluate(z, w), f.R.evaluate(z, w)]
    )


def iterate(f: PencilEndo, x: ProjPoint, n: int) -> ProjPoint:
    for _ in range(n):
        x = apply(f, x)
    return x


def green_correction(f: PencilEndo, x: ProjPoint) -> float:
    """log of the Euclidean norm of the coefficient-fixed lift of f at
    the canonical unit lift of x. A gauge quantity: it depends on the
    stored coefficients, and downstream consumers only ever use
    differences in which the gauge constant cancels."""
    z, w, t = x.coords
    vec = np.array(
        [
            f.P.evaluate(z, w),
            f.Q.evaluate(z, w),
            t**f.d + f.epsilon * f.R.evaluate(z, w),
        ]
    )
    return float(np.log(np.linalg.norm(vec)))


def base_preimages(f: PencilEndo, q: ProjPoint, profile: Profile = DEFAULT):
    """All solutions of base_apply(p) = q, with multiplicity summing to
    d, each equipped with a normalized lift. The fiber form is
    beta P - alpha Q for the stored lift (alpha, beta) of q."""
    alpha, beta = q.coords
    fiber_form = BinaryForm(beta * f.P.coeffs - alpha * f.Q.coeffs)
    out = []
    for point, mult in fiber_form.roots(profile):
        lift = _normalize_lift(f, point, q)
        out.append(
            NormalizedFiberLift(base=point, lift=lift, target=q, multiplicity=mult)
        )
        resid = chordal_distance(base_apply(f, point), q)
        if resid >= profile.residual_tol:
            raise NonConvergence(
                f"base preimage residual {resid:.3e} at {point}"
            )
    return out


def _normalize_lift(f: PencilEndo, p: ProjPoint, target: ProjPoint):
    v = p.coords
    a = f.P.evaluate(v[0], v[1])
    b = f.Q.evaluate(v[0], v[1])
    tz, tw = target.coords
    # proportionality constant through the dominant target coordinate
    if abs(tz) >= abs(tw):
        mu = a / tz
    else:
        mu = b / tw
    lam = (1.0 / mu) ** (1.0 / f.d)
    return (lam * v[0], lam * v[1])


def preimages(f: PencilEndo, x: ProjPoint, profile: Profile = DEFAULT):
    """All f-preimages of a P^2 point, as (point, multiplicity) pairs
    summing to d^2.

    The pencil center is its own full fiber: P and Q vanish only at the
    origin, so f^{-1}([0:0:1]) = {[0:0:1]} with multiplicity d^2.
    """
    d = f.d
    if is_center(x):
        return [(CENTER, d * d)]
    zx, wx, tx = x.coords
    base_target = ProjPoint([zx, wx])
    # rescale the fiber coordinate to the lift normalization of the base
    # target: base_target.coords = (zx, wx) / nu with nu the canonical
    # rescale factor, and the fiber equation must use the matching t
    nu = _lift_ratio((zx, wx), base_target.coords)
    t_prime = tx / nu
    out = []
    for branch in base_preimages(f, base_target, profile):
        rhs = t_prime - f.epsilon * branch.r_value(f.R)
        zl, wl = branch.lift
        if rhs == 0.0:
            out.append((ProjPoint([zl, wl, 0.0]), branch.multiplicity * d))
            continue
        radius = abs(rhs) ** (1.0 / d)
        theta = np.angle(rhs)
        for k in range(d):
            t_k = radius * np.exp(1j * (theta + 2.0 * np.pi * k) / d)
            out.append((ProjPoint([zl, wl, t_k]), branch.multiplicity))
    for y, _ in out:
        resid = chordal_distance(apply(f, y), x)
        if resid >= profile.residual_tol:
            raise NonConvergence(f"preimage residual {resid:.3e} at {y}")
    return out


def _lift_ratio(raw, canonical):
    """Scalar nu with raw = nu * canonical, via the dominant slot."""
    i = 0 if abs(canonical[0]) >= abs(canonical[1]) else 1
    return raw[i] / canonical[i]
