"""Forward-invariant collar certification and attractor sampling.

The collar of width rho is the set of [z:w:t] with
|t| < rho * max(|z|, |w|). With alpha a certified lower bound for
max(|P|, |Q|) on the sup-norm sphere and beta a certified upper bound
for |R| there, the perturbation strength is eps = |epsilon| * beta
(folding beta into epsilon normalizes it away), and one step of the map
sends the collar of width rho inside the collar of width
(rho^d + eps) / alpha. At rho = 4 eps / alpha that width shrinks
whenever the slack rho - (rho^d + eps)/alpha is positive, which makes
the collar a trapping region and its shrinking intersection the
attracting set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DepthExceeded, TrappingFails
from .pencilmap import PencilEndo, apply, base_preimages, iterate, preimages
from .precision import DEFAULT, Profile
from .projgeom import ProjPoint, sphere_extrema

__all__ = [
    "TrappingCertificate",
    "trapping_constants",
    "certify_trapping",
    "in_U",
    "in_fU",
    "sample_attractor",
    "solenoid_points",
]


@dataclass(frozen=True)
class TrappingCertificate:
    alpha_lo: float
    beta_hi: float
    rho: float
    epsilon_used: float
    inequality_slack: float
    sampled_ok: bool
    samples: int
    # observed one-step contraction: every sampled image landed in the
    # collar of width rho * (1 - delta)
    delta: float


def trapping_constants(alpha_lo, beta_hi, epsilon, d):
    """(rho, slack) for the collar inequality at the canonical radius
    choice rho = 4 eps / alpha with eps = |epsilon| * beta."""
    eps_used = abs(epsilon) * beta_hi
    rho = 4.0 * eps_used / alpha_lo
    slack = rho - (rho**d + eps_used) / alpha_lo
    return rho, slack


def collar_ratio(x: ProjPoint) -> float:
    """|t| / max(|z|, |w|) on any lift; infinite at the pencil center."""
    z, w, t = x.coords
    base = max(abs(z), abs(w))
    if base == 0.0:
        return np.inf
    return abs(t) / base


def in_U(x: ProjPoint, rho: float) -> bool:
    return collar_ratio(x) < rho


def in_fU(f: PencilEndo, x: ProjPoint, rho: float, profile: Profile = DEFAULT) -> bool:
    """Membership in the one-step image of the collar, decided by
    searching the preimages for a collar point."""
    return any(in_U(y, rho) for y, _ in preimages(f, x, profile))


def _collar_samples(rho: float, count: int, rng, boundary_bias: bool):
    """Vectorized draw of collar points: Fubini-Study uniform base
    direction, uniform fiber disc. With boundary_bias, half the fiber
    radii concentrate in the outer tenth of the disc, where escape
    from the collar would show first."""
    g = rng.standard_normal((count, 4))
    z = g[:, 0] + 1j * g[:, 1]
    w = g[:, 2] + 1j * g[:, 3]
    u = rng.uniform(0.0, 1.0, size=count)
    radius = np.sqrt(u)
    if boundary_bias:
        half = count // 2
        radius[:half] = 0.9 + 0.1 * u[:half]
    phase = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=count))
    t = radius * phase * rho * np.maximum(np.abs(z), np.abs(w))
    return z, w, t


def _map_arrays(f: PencilEndo, z, w, t):
    z2 = f.P.evaluate(z, w)
    w2 = f.Q.evaluate(z, w)
    t2 = t**f.d + f.epsilon * f.R.evaluate(z, w)
    return z2, w2, t2


def certify_trapping(
    f: PencilEndo,
    profile: Profile = DEFAULT,
    samples: int = 10000,
    seed: int = 0,
    epsilon_bound: float | None = None,
) -> TrappingCertificate:
    """Analytic collar inequality plus Monte Carlo containment.

    epsilon_bound is the admissible-perturbation bound from the
    genericity analysis; when omitted it is recomputed here.
    Exceeding it only warns: the collar inequality itself is the
    trapping criterion, and it is checked exactly.
    """
    alpha_lo, beta_hi = sphere_extrema(f.P, f.Q, f.R, profile)
    if epsilon_bound is None:
        from .specialsets import assemble_sets, check_conditions

        sets = assemble_sets(f, profile)
        epsilon_bound = check_conditions(sets, f, profile).epsilon_max
    if abs(f.epsilon) >= epsilon_bound:
        warnings.warn(
            "perturbation exceeds the certified genericity bound "
            f"({abs(f.epsilon):.3g} >= {epsilon_bound:.3g}); the collar "
            "inequality is still decided on its own",
            stacklevel=2,
        )
    rho, slack = trapping_constants(alpha_lo, beta_hi, f.epsilon, f.d)
    eps_used = abs(f.epsilon) * beta_hi
    if slack <= 0.0:
        raise TrappingFails(
            f"collar inequality has slack {slack:.3g} at rho {rho:.3g}"
        )

    rng = np.random.default_rng(seed)
    z, w, t = _collar_samples(rho, samples, rng, boundary_bias=True)
    z2, w2, t2 = _map_arrays(f, z, w, t)
    after = np.abs(t2) / np.maximum(np.abs(z2), np.abs(w2))
    worst = float(np.max(after))
    delta = 1.0 - worst / rho
    return TrappingCertificate(
        alpha_lo=float(alpha_lo),
        beta_hi=float(beta_hi),
        rho=float(rho),
        epsilon_used=float(eps_used),
        inequality_slack=float(slack),
        sampled_ok=bool(delta > 0.0),
        samples=samples,
        delta=float(delta),
    )


def sample_attractor(
    f: PencilEndo, rho: float, burn: int = 50, keep: int = 1000, seed: int = 0
):
    """Deterministic-by-seed cloud of burned-in collar points.

    Iteration runs on raw coordinate arrays with a per-step sup-norm
    rescale; projective points tolerate the rescale and the raw arrays
    would overflow within a few squarings without it.
    """
    rng = np.random.default_rng(seed)
    z, w, t = _collar_samples(rho, keep, rng, boundary_bias=False)
    for _ in range(burn):
        z, w, t = _map_arrays(f, z, w, t)
        scale = np.maximum(np.abs(z), np.maximum(np.abs(w), np.abs(t)))
        z, w, t = z / scale, w / scale, t / scale
    return [ProjPoint([z[i], w[i], t[i]]) for i in range(keep)]


def solenoid_points(
    f: PencilEndo,
    p: ProjPoint,
    depth: int,
    rho: float,
    budget: int = 10**6,
    profile: Profile = DEFAULT,
):
    """Fiber-slice points over p from backward base itineraries.

    Each itinerary descends `depth` base steps below p; pushing the
    zero-fiber lift of its endpoint forward `depth` steps lands on the
    line over p, inside the depth-fold image of the collar. Multiple
    preimages collapse branches, so the list holds at most d^depth
    points.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if f.d**depth > budget:
        raise DepthExceeded(
            f"itinerary tree would hold {f.d**depth} leaves, budget {budget}"
        )
    frontier = [p]
    for _ in range(depth):
        nxt = []
        for q in frontier:
            nxt.extend(l.base for l in base_preimages(f, q, profile))
        frontier = nxt
    out = []
    for leaf in frontier:
        lift = ProjPoint([leaf.coords[0], leaf.coords[1], 0.0])
        out.append(iterate(f, lift, depth))
    return out
