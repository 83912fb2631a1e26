"""Projective points in dimensions 1 to 3, the chordal metric, and the
algebra of homogeneous binary forms.

Everything downstream is built on the two classes here. ProjPoint stores
a canonical unit lift so that equal projective points have (nearly) equal
coordinate arrays. BinaryForm stores ascending z-power coefficients:
coeffs[j] multiplies z^j w^(d-j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFamily, NonConvergence
from .precision import DEFAULT, Profile

__all__ = [
    "ProjPoint",
    "BinaryForm",
    "RootSet",
    "chordal_distance",
    "resultant",
    "critical_points",
    "sphere_extrema",
    "dedup_points",
    "min_dist_to",
    "point_in",
    "intersect_lists",
    "lists_match",
]


class ProjPoint:
    """A point of P^1, P^2 or P^3 held as a canonical unit lift.

    Canonical means: Euclidean norm 1, and the first coordinate of
    maximal modulus is real and positive. Two lifts of the same point
    therefore agree up to floating error, which keeps serialized output
    stable across runs.
    """

    __slots__ = ("coords", "dim")

    def __init__(self, coords):
        v = np.asarray(coords, dtype=complex).ravel()
        if v.size < 2 or v.size > 4:
            raise ValueError("ProjPoint needs 2 to 4 coordinates")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("non-finite coordinates")
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("zero vector is not a projective point")
        v = v / norm
        k = int(np.argmax(np.abs(v)))
        phase = v[k] / abs(v[k])
        v = v / phase
        # one more normalization pass; the phase division can nudge the norm
        v = v / np.linalg.norm(v)
        v.setflags(write=False)
        object.__setattr__(self, "coords", v)
        object.__setattr__(self, "dim", v.size - 1)

    def __setattr__(self, name, value):
        raise AttributeError("ProjPoint is immutable")

    def chordal(self, other: "ProjPoint") -> float:
        return chordal_distance(self, other)

    def isclose(self, other: "ProjPoint", tol: float = DEFAULT.point_tol) -> bool:
        return chordal_distance(self, other) < tol

    def affine(self):
        """z/w for a dim-1 point, or None for [1:0]."""
        if self.dim != 1:
            raise ValueError("affine() is for P^1 points")
        z, w = self.coords
        if abs(w) <= 1e-14:
            return None
        return z / w

    def __repr__(self):
        inner = ":".join(_fmt_c(c) for c in self.coords)
        return f"[{inner}]"

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.dim == other.dim and self.isclose(other)

    __hash__ = None  # tolerance-based equality is incompatible with hashing


def _fmt_c(c: complex) -> str:
    if abs(c.imag) < 5e-13:
        return f"{c.real:.6g}"
    return f"({c.real:.6g}{c.imag:+.6g}i)"


def chordal_distance(p: ProjPoint, q: ProjPoint) -> float:
    """Fubini-Study chordal distance in [0, 1].

    Computed from the 2x2 minors of the two lifts (the Lagrange
    identity), which stays accurate for nearby points where the
    inner-product formula sqrt(1 - |<p,q>|^2) loses all digits.
    """
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    a, b = p.coords, q.coords
    s = 0.0
    n = a.size
    for i in range(n - 1):
        for j in range(i + 1, n):
            m = a[i] * b[j] - a[j] * b[i]
            s += (m * m.conjugate()).real
    # unit lifts, so the denominator ||p|| ||q|| is 1
    return min(1.0, np.sqrt(max(s, 0.0)))


# ---------------------------------------------------------------------------
# point-list utilities (the special-set comparisons are all set-theoretic)


def min_dist_to(p: ProjPoint, points) -> float:
    if not points:
        return float("inf")
    return min(chordal_distance(p, q) for q in points)


def point_in(p: ProjPoint, points, tol: float) -> bool:
    return min_dist_to(p, points) < tol


def dedup_points(points, tol: float):
    """Order-stable reduction of a multiset of points to a set."""
    out = []
    for p in points:
        if not point_in(p, out, tol):
            out.append(p)
    return out


def intersect_lists(a, b, tol: float):
    return [p for p in dedup_points(a, tol) if point_in(p, b, tol)]


def lists_match(a, b, tol: float) -> bool:
    """Set equality of two point lists at the given tolerance."""
    da, db = dedup_points(a, tol), dedup_points(b, tol)
    if len(da) != len(db):
        return False
    return all(point_in(p, db, tol) for p in da)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootSet:
    """Projective roots with multiplicity; multiplicities sum to the
    degree of the form they came from."""

    entries: tuple

    def points(self):
        return [p for p, _ in self.entries]

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


class BinaryForm:
    """Homogeneous polynomial of degree d in (z, w).

    coeffs[j] multiplies z^j w^(d-j). Evaluation switches charts so that
    the Horner argument always has modulus <= 1; this keeps huge lifts
    from overflowing and makes F(lambda z, lambda w) = lambda^d F(z, w)
    hold to relative 1e-12 over the documented lambda range.
    """

    __slots__ = ("coeffs", "degree")

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size < 2:
            raise ValueError("degree must be at least 1")
        if not np.any(np.abs(c) > 0.0):
            raise ValueError("identically zero form")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "degree", c.size - 1)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryForm is immutable")

    def __call__(self, z, w):
        return self.evaluate(z, w)

    def evaluate(self, z, w):
        z_arr = np.asarray(z, dtype=complex)
        w_arr = np.asarray(w, dtype=complex)
        z_arr, w_arr = np.broadcast_arrays(z_arr, w_arr)
        use_w = np.abs(z_arr) <= np.abs(w_arr)
        dw = np.where(use_w & (w_arr != 0), w_arr, 1.0)
        dz = np.where(~use_w, z_arr, 1.0)
        xw = np.where(use_w, z_arr, 0.0) / dw
        yz = np.where(~use_w, w_arr, 0.0) / dz
        c = self.coeffs
        d = self.degree
        val_w = w_arr**d * np.polyval(c[::-1], xw)
        val_z = z_arr**d * np.polyval(c, yz)
        out = np.where(use_w, val_w, val_z)
        if out.ndim == 0:
            return complex(out)
        return out

    def at_point(self, p: ProjPoint):
        """Value on the canonical unit lift of a P^1 point."""
        return self.evaluate(p.coords[0], p.coords[1])

    def derivative_z(self) -> "BinaryForm":
        """Raises ValueError when the form has no z dependence; use
        deriv_z_coeffs for the raw array in that case."""
        return BinaryForm(deriv_z_coeffs(self.coeffs))

    def derivative_w(self) -> "BinaryForm":
        return BinaryForm(deriv_w_coeffs(self.coeffs))

    def __mul__(self, other):
        if isinstance(other, BinaryForm):
            return BinaryForm(np.convolve(self.coeffs, other.coeffs))
        return BinaryForm(self.coeffs * other)

    __rmul__ = __mul__

    def scaled_to_unit(self) -> "BinaryForm":
        return BinaryForm(self.coeffs / np.max(np.abs(self.coeffs)))

    def roots(self, profile: Profile = DEFAULT) -> RootSet:
        """All projective roots with multiplicity.

        The top coefficient block decides the multiplicity at [1:0];
        the rest is simultaneous iteration on the dehomogenization,
        chordal clustering, and a derivative-Newton polish of each
        cluster center.
        """
        c = self.coeffs
        scale = float(np.max(np.abs(c)))
        d = self.degree
        n_eff = d
        while n_eff > 0 and abs(c[n_eff]) <= profile.top_trim_rel * scale:
            n_eff -= 1
        entries = []
        if n_eff < d:
            entries.append((ProjPoint([1.0, 0.0]), d - n_eff))
        p = np.array(c[: n_eff + 1], dtype=complex)
        # factor out exact roots at [0:1] before iterating
        t = 0
        while t < p.size - 1 and p[t] == 0.0:
            t += 1
        if t > 0:
            entries.append((ProjPoint([0.0, 1.0]), t))
            p = p[t:]
        if p.size > 1:
            affine = _solve_poly(p, profile)
            for center, mult in _cluster_affine(affine, profile.cluster_tol):
                center = _polish_root(p, center, mult, profile)
                entries.append((ProjPoint([center, 1.0]), mult))
        entries = _merge_entries(entries, profile.cluster_tol)
        self._check_backward(entries, scale, profile)
        return RootSet(tuple(entries))

    def _check_backward(self, entries, scale, profile):
        for pt, mult in entries:
            if mult != 1:
                continue
            resid = abs(self.evaluate(pt.coords[0], pt.coords[1])) / scale
            if resid >= profile.root_backward_tol:
                raise NonConvergence(
                    f"simple root {pt} has backward error {resid:.3e}"
                )

    def __repr__(self):
        terms = ", ".join(_fmt_c(c) for c in self.coeffs)
        return f"BinaryForm(d={self.degree}, [{terms}])"


def _merge_entries(entries, tol):
    out = []
    for pt, mult in entries:
        for i, (q, m) in enumerate(out):
            if chordal_distance(pt, q) < tol:
                out[i] = (q if m >= mult else pt, m + mult)
                break
        else:
            out.append((pt, mult))
    return out


def _solve_poly(c, profile: Profile):
    """Roots of a dense polynomial, ascending coefficients, exact top
    coefficient nonzero. Closed forms through degree 2, then
    Ehrlich-Aberth simultaneous iteration."""
    n = c.size - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    if n == 1:
        return np.array([-c[0] / c[1]])
    if n == 2:
        a2, a1, a0 = c[2], c[1], c[0]
        disc = a1 * a1 - 4.0 * a2 * a0
        sq = np.sqrt(disc)
        if (np.conj(a1) * sq).real < 0.0:
            sq = -sq
        qq = -0.5 * (a1 + sq)
        r1 = qq / a2
        r2 = a0 / qq if qq != 0.0 else 0.0
        return np.array([r1, r2])
    return _aberth(c, profile)


def _aberth(c, profile: Profile):
    n = c.size - 1
    m = c / c[-1]
    desc = m[::-1]
    dere = np.polyder(desc)
    radius = 1.0 + float(np.max(np.abs(m[:-1])))
    center = -m[n - 1] / n
    abs_desc = np.abs(desc)
    for attempt, offset in enumerate((0.3762, 1.2424)):
        ang = 2.0 * np.pi * (np.arange(n) + 0.5) / n + offset
        z = center + 0.7 * radius * np.exp(1j * ang)
        for _ in range(profile.aberth_max_iter):
            pv = np.polyval(desc, z)
            dv = np.polyval(dere, z)
            done = pv == 0.0
            dv = np.where(dv == 0.0, 1e-300, dv)
            newton = np.where(done, 0.0, pv / dv)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = (1.0 / diff).sum(axis=1)
            denom = 1.0 - newton * s
            denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
            corr = newton / denom
            z = z - corr
            if np.max(np.abs(corr) / (1.0 + np.abs(z))) < 5e-15:
                return z
        # multiple roots floor the step size at the evaluation-noise
        # radius, so a stalled run can still be backward stable: accept
        # when every residual is below the rounding envelope of the
        # evaluation itself
        pv = np.polyval(desc, z)
        env = np.polyval(abs_desc, np.abs(z))
        if np.all(np.abs(pv) <= 1e-12 * np.maximum(env, 1e-300)):
            return z
        if attempt == 0:
            continue
    raise NonConvergence(
        f"simultaneous iteration stalled at degree {n} "
        f"after {profile.aberth_max_iter} steps"
    )


def _cluster_affine(roots, tol):
    """Group affine roots whose chordal distance (as [r:1] points) is
    below tol; returns (center, multiplicity) pairs."""
    n = roots.size
    if n == 0:
        return []
    norm = np.sqrt(1.0 + np.abs(roots) ** 2)
    dist = np.abs(roots[:, None] - roots[None, :]) / (norm[:, None] * norm[None, :])
    adj = dist < tol
    seen = np.zeros(n, dtype=bool)
    clusters = []
    for i in range(n):
        if seen[i]:
            continue
        # breadth-first component of the adjacency graph
        comp = [i]
        seen[i] = True
        frontier = [i]
        while frontier:
            j = frontier.pop()
            for k in np.nonzero(adj[j])[0]:
                if not seen[k]:
                    seen[k] = True
                    comp.append(int(k))
                    frontier.append(int(k))
        vals = roots[comp]
        if np.all(np.abs(vals) <= 2.0):
            center = vals.mean()
        else:
            # average in the chart at infinity for big roots
            center = 1.0 / (1.0 / vals).mean()
        clusters.append((center, len(comp)))
    return clusters


def _polish_root(c, x0, mult, profile: Profile):
    """Newton refinement of a multiplicity-mult cluster center on the
    (mult-1)-th derivative, in whichever chart keeps the argument
    inside the unit disc."""
    desc = np.array(c[::-1], dtype=complex)
    for _ in range(mult - 1):
        desc = np.polyder(desc)
    if desc.size < 2:
        return x0
    x = x0
    if abs(x0) <= 1.0:
        g = desc
        gp = np.polyder(desc)
        for _ in range(profile.newton_max_iter):
            gv = np.polyval(g, x)
            gd = np.polyval(gp, x)
            if gd == 0.0:
                break
            step = gv / gd
            x = x - step
            if abs(step) < 1e-15 * (1.0 + abs(x)):
                break
    else:
        # polish y = 1/x as a root of the reversed polynomial
        g = desc[::-1]
        gp = np.polyder(g)
        y = 1.0 / x0
        for _ in range(profile.newton_max_iter):
            gv = np.polyval(g, y)
            gd = np.polyval(gp, y)
            if gd == 0.0:
                break
            step = gv / gd
            y = y - step
            if abs(step) < 1e-15 * (1.0 + abs(y)):
                break
        if y != 0.0:
            x = 1.0 / y
    # reject a polish that left the cluster
    na, nb = np.sqrt(1 + abs(x) ** 2), np.sqrt(1 + abs(x0) ** 2)
    if abs(x - x0) / (na * nb) > 10.0 * profile.cluster_tol:
        return x0
    return x


def resultant(P: BinaryForm, Q: BinaryForm) -> complex:
    """Sylvester resultant with the formal-degree (homogeneous)
    convention: a shared root at [1:0] also produces zero."""
    dp, dq = P.degree, Q.degree
    n = dp + dq
    mat = np.zeros((n, n), dtype=complex)
    p_desc = P.coeffs[::-1]
    q_desc = Q.coeffs[::-1]
    for i in range(dq):
        mat[i, i : i + dp + 1] = p_desc
    for i in range(dp):
        mat[dq + i, i : i + dq + 1] = q_desc
    return complex(np.linalg.det(mat))


def deriv_z_coeffs(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    d = c.size - 1
    return np.array([(j + 1) * c[j + 1] for j in range(d)], dtype=complex)


def deriv_w_coeffs(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    d = c.size - 1
    return np.array([(d - j) * c[j] for j in range(d)], dtype=complex)


def critical_points(P: BinaryForm, Q: BinaryForm, profile: Profile = DEFAULT) -> RootSet:
    """Roots of the Jacobian form of [P:Q], with multiplicity."""
    # raw arrays here: a partial derivative may be the zero form
    jac = np.convolve(deriv_z_coeffs(P.coeffs), deriv_w_coeffs(Q.coeffs)) - np.convolve(
        deriv_w_coeffs(P.coeffs), deriv_z_coeffs(Q.coeffs)
    )
    scale = np.max(np.abs(P.coeffs)) * np.max(np.abs(Q.coeffs))
    if np.all(np.abs(jac) <= 1e-14 * scale):
        raise DegenerateFamily("Jacobian form is identically zero")
    return BinaryForm(jac).roots(profile)


def sphere_extrema(
    P: BinaryForm, Q: BinaryForm, R: BinaryForm, profile: Profile = DEFAULT
):
    """Certified bounds on the unit sphere {max(|z|,|w|) = 1}.

    Returns (alpha_lo, beta_hi) with alpha_lo <= inf max(|P|,|Q|) and
    beta_hi >= sup |R|. By homogeneity the two solid-torus pieces of
    the sphere reduce to the closed unit disc in each dehomogenizing
    chart, so the bounds come from a polar grid on two discs padded by
    a derivative-norm Lipschitz constant times the covering radius.
    """
    d = P.degree
    if Q.degree != d or R.degree != d:
        raise ValueError("forms must share a degree")
    na, nr = profile.sphere_angles, profile.sphere_radii
    theta = 2.0 * np.pi * np.arange(na) / na
    rad = np.linspace(0.0, 1.0, nr)
    grid = (rad[:, None] * np.exp(1j * theta)[None, :]).ravel()
    # covering radius of the polar grid, with a small safety factor
    h = 1.05 * np.hypot(0.5 / (nr - 1), np.pi / na)

    alpha_lo = np.inf
    beta_hi = -np.inf
    for chart in ("w", "z"):
        vp = _disc_values(P, grid, chart)
        vq = _disc_values(Q, grid, chart)
        vr = _disc_values(R, grid, chart)
        lip_pq = max(_disc_lipschitz(P, chart), _disc_lipschitz(Q, chart))
        lip_r = _disc_lipschitz(R, chart)
        alpha_lo = min(alpha_lo, float(np.min(np.maximum(np.abs(vp), np.abs(vq)))) - lip_pq * h)
        beta_hi = max(beta_hi, float(np.max(np.abs(vr))) + lip_r * h)
    if alpha_lo <= 0.0:
        raise DegenerateFamily(
            f"sphere infimum bound {alpha_lo:.3e} <= 0; the pair (P,Q) is "
            "numerically outside the admissible family"
        )
    return alpha_lo, beta_hi


def _disc_values(F: BinaryForm, grid, chart: str):
    # chart "w": x = z/w on |w| = 1, |F| = |dehom(x)|; chart "z" swaps roles
    c = F.coeffs
    if chart == "w":
        return np.polyval(c[::-1], grid)
    return np.polyval(c, grid)


def _disc_lipschitz(F: BinaryForm, chart: str) -> float:
    c = np.abs(F.coeffs)
    d = F.degree
    if chart == "w":
        return float(sum(j * c[j] for j in range(1, d + 1)))
    return float(sum((d - j) * c[j] for j in range(d)))
