"""Topological-degree certification on the trapping collar.

The certificate counts m-fold preimages, with multiplicity, of points
sampled from the deep forward image of the collar, keeping only
preimages that lie back in the chosen region. A count strictly below
d^m for every sample certifies small topological degree of the m-th
iterate there; one count at or above the bar falsifies it, as happens
for maps whose attracting set carries full fiber multiplicity.

Backward fiber orbits are numerically delicate: each pull subtracts
two nearly equal quantities (the rescaled fiber value and the
perturbation term) whose difference is the d-th power of the child
fiber value, so at perturbation strengths far below 1 the true
difference can drop under the rounding noise of its terms. The
expansion therefore carries a rigorous absolute error bound per node
and classifies region membership three ways: in, out, or undecided.
Undecided points are counted as in, which can only inflate max_count
and push the verdict toward refusal, never toward a false certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .pencilmap import PencilEndo, _lift_ratio, base_preimages, is_center, preimages
from .precision import DEFAULT, Profile
from .projgeom import ProjPoint, chordal_distance
from .trapping import sample_attractor

__all__ = [
    "DegreeCertificate",
    "count_preimages_in",
    "certify",
    "asymptotic_rate",
]

# rounding slop per arithmetic stage, deliberately generous
_STAGE_REL = 1e-14
# relative fiber uncertainty granted to a sampled root point
_SEED_REL = 1e-12

_IN, _OUT, _UND = 1, 0, -1


@dataclass(frozen=True)
class DegreeCertificate:
    iterate_m: int
    samples: int
    max_count: int
    threshold: int
    verdict: bool
    worst_point: ProjPoint
    dt_one_step: int
    # populated only when intermediate pruning was requested; the
    # verdict always comes from the unpruned (defining) count
    max_count_pruned: int | None = None


@dataclass(frozen=True)
class _Node:
    z: complex
    w: complex
    t: complex
    err: float  # absolute uncertainty of t at this lift scale
    mult: int


def _expand(f: PencilEndo, node: _Node, profile: Profile):
    """One backward step with error propagation.

    rhs = t' - eps * R(lift) is the d-th power of every child fiber
    value; its error bound is the parent's rescaled uncertainty plus
    rounding slop on both terms. When the bound swallows rhs itself the
    children's magnitudes are unresolved and their uncertainty is the
    whole outer radius."""
    d = f.d
    bt = ProjPoint([node.z, node.w])
    nu = _lift_ratio((node.z, node.w), bt.coords)
    tp = node.t / nu
    err_p = node.err / abs(nu)
    out = []
    for branch in base_preimages(f, bt, profile):
        rv = branch.r_value(f.R)
        rhs = tp - f.epsilon * rv
        err_rhs = err_p + (abs(tp) + abs(f.epsilon * rv)) * _STAGE_REL
        zl, wl = branch.lift
        if rhs == 0.0:
            out.append(
                _Node(zl, wl, 0.0, err_rhs ** (1.0 / d), node.mult * branch.multiplicity * d)
            )
            continue
        mag = abs(rhs)
        if mag <= err_rhs:
            err_child = (mag + err_rhs) ** (1.0 / d)
        else:
            lo = mag - err_rhs
            err_child = err_rhs * lo ** ((1.0 - d) / d) / d
        radius = mag ** (1.0 / d)
        theta = np.angle(rhs)
        for k in range(d):
            t_k = radius * np.exp(1j * (theta + 2.0 * np.pi * k) / d)
            out.append(
                _Node(zl, wl, t_k, err_child, node.mult * branch.multiplicity)
            )
    return out


def _collar_side(node: _Node, rho: float) -> int:
    bar = rho * max(abs(node.z), abs(node.w))
    lo = max(abs(node.t) - node.err, 0.0)
    hi = abs(node.t) + node.err
    if hi < bar:
        return _IN
    if lo >= bar:
        return _OUT
    return _UND


def _image_side(f: PencilEndo, node: _Node, rho: float, profile: Profile) -> int:
    sides = [_collar_side(c, rho) for c in _expand(f, node, profile)]
    if any(s == _IN for s in sides):
        return _IN
    if all(s == _OUT for s in sides):
        return _OUT
    return _UND


def _side(f, node, rho, region, profile) -> int:
    if region == "all":
        return _IN
    if region == "collar":
        return _collar_side(node, rho)
    if region == "image":
        return _image_side(f, node, rho, profile)
    raise ValueError(f"unknown region {region!r}")


def _seed(x: ProjPoint) -> _Node:
    zx, wx, tx = x.coords
    return _Node(zx, wx, tx, abs(tx) * _SEED_REL, 1)


def count_preimages_in(
    f: PencilEndo,
    x: ProjPoint,
    m: int,
    rho: float,
    region: str = "image",
    profile: Profile = DEFAULT,
    budget: int = 10**6,
    prune_intermediate: bool = False,
    weighted: bool = True,
) -> int:
    """Multiplicity-weighted count of m-fold preimages of x inside the
    region ("collar" for the width-rho collar, "image" for its one-step
    forward image, "all" for no constraint).

    Membership is tested at the final level only: a preimage of f^m is
    any y with f^m(y) = x, wherever its intermediate images wander.
    prune_intermediate filters every level instead, reproducing the
    stepwise casework count; the two agree on the final verdict but not
    per level. Membership that double precision cannot resolve counts
    as inside. weighted=False counts distinct points instead, the
    cardinality notion used by the asymptotic growth rate.
    """
    if f.d ** (2 * m) > budget:
        raise BudgetExceeded(
            f"full preimage tree has {f.d ** (2 * m)} leaves, budget {budget}"
        )
    if is_center(x):
        if region != "all":
            return 0
        return f.d ** (2 * m) if weighted else 1
    level = [_seed(x)]
    for step in range(m):
        nxt = []
        for node in level:
            nxt.extend(_expand(f, node, profile))
        if prune_intermediate:
            nxt = [n for n in nxt if _side(f, n, rho, region, profile) != _OUT]
        level = nxt
    if not prune_intermediate:
        level = [n for n in level if _side(f, n, rho, region, profile) != _OUT]
    return sum(n.mult for n in level) if weighted else len(level)


def _near_critical_value(f: PencilEndo, x: ProjPoint, profile: Profile) -> bool:
    """Proxy for proximity to the critical-value locus: the preimage
    solver reports a multiple point, or two preimages nearly collide.
    A point at distance delta from the locus has a preimage pair about
    sqrt(delta) apart, so the 1e-4 separation bar matches a 1e-8
    distance bar on the locus itself."""
    pre = preimages(f, x, profile)
    if any(mult > 1 for _, mult in pre):
        return True
    pts = [y for y, _ in pre]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if chordal_distance(pts[i], pts[j]) < 1e-4:
                return True
    return False


def certify(
    f: PencilEndo,
    rho: float,
    m: int = 3,
    samples: int = 100,
    seed: int = 0,
    profile: Profile = DEFAULT,
    budget: int = 10**6,
    prune_intermediate: bool = False,
) -> DegreeCertificate:
    """Sample the deep forward image of the collar and bound the
    preimage counts of f^m there.

    Sample points come from (m+1)-fold forward iteration of uniform
    collar points, which guarantees membership. Points flagged near the
    critical-value locus are replaced from an oversampled reserve; when
    the reserve is exhausted (the flag is structural, e.g. the
    attracting set itself is critical), flagged points are kept, since
    that is precisely the degeneracy the certificate must expose.
    """
    reserve = sample_attractor(f, rho, burn=m + 1, keep=2 * samples, seed=seed)
    flags = [_near_critical_value(f, x, profile) for x in reserve]
    clean = [x for x, bad in zip(reserve, flags) if not bad]
    flagged = [x for x, bad in zip(reserve, flags) if bad]
    chosen = clean[:samples]
    if len(chosen) < samples:
        chosen = chosen + flagged[: samples - len(chosen)]

    threshold = f.d**m
    max_count = -1
    max_pruned = -1
    worst = chosen[0]
    dt = 0
    for x in chosen:
        c = count_preimages_in(
            f, x, m, rho, region="image", profile=profile, budget=budget
        )
        if c > max_count:
            max_count = c
            worst = x
        if prune_intermediate:
            cp = count_preimages_in(
                f,
                x,
                m,
                rho,
                region="image",
                profile=profile,
                budget=budget,
                prune_intermediate=True,
            )
            max_pruned = max(max_pruned, cp)
        dt = max(
            dt,
            count_preimages_in(
                f,
                x,
                1,
                rho,
                region="collar",
                profile=profile,
                budget=budget,
                weighted=False,
            ),
        )
    return DegreeCertificate(
        iterate_m=m,
        samples=len(chosen),
        max_count=max_count,
        threshold=threshold,
        verdict=max_count < threshold,
        worst_point=worst,
        dt_one_step=dt,
        max_count_pruned=max_pruned if prune_intermediate else None,
    )


def asymptotic_rate(
    f: PencilEndo,
    rho: float,
    p: ProjPoint,
    n_max: int,
    profile: Profile = DEFAULT,
    budget: int = 10**6,
):
    """Normalized collar preimage counts (n, count^{1/n}) for
    n = 1..n_max, a diagnostic trend toward the growth rate of backward
    orbits in the collar. Counts are cardinalities (distinct points),
    matching the growth-rate definition; the n = 1 value is the
    one-step count at p."""
    if f.d ** (2 * n_max) > budget:
        raise BudgetExceeded(
            f"depth-{n_max} preimage tree has {f.d ** (2 * n_max)} leaves, "
            f"budget {budget}"
        )
    out = []
    level = [_seed(p)]
    for n in range(1, n_max + 1):
        nxt = []
        for node in level:
            nxt.extend(_expand(f, node, profile))
        level = nxt
        cnt = sum(1 for n_ in level if _collar_side(n_, rho) != _OUT)
        out.append((n, cnt ** (1.0 / n)))
    return out
