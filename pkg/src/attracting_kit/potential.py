"""Quasi-potential transport, boundedness traces, and slice measures.

The seed current is the line {t = 0}, whose quasi-potential against the
Fubini-Study form is the closed form u0 = log(|t| / ||x||). One
backward transport step sends a quasi-potential u of a current T to a
quasi-potential of the mass-normalized push-forward of T:

    v(x) = (1/d) sum u(y) - (1/d^2) sum phi(y)

over the preimages y of x with multiplicity, where phi is the gauge
term log ||F(y)|| of the coefficient-fixed lift F. The second sum is
what makes v a potential in the same Fubini-Study gauge; its sign and
scale are pinned by a finite-difference harmonicity oracle in the
tests. Spreads (max - min over a fixed sample set) of the iterated
potentials are gauge-free, so boundedness of the transported
potentials is read off a spread plateau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded
from .pencilmap import (
    PencilEndo,
    base_preimages,
    green_correction,
    iterate,
    preimages,
)
from .precision import DEFAULT, Profile
from .projgeom import ProjPoint
from .trapping import sample_attractor

__all__ = [
    "PotentialEvaluator",
    "PotentialTrace",
    "SliceMeasure",
    "u0",
    "push_potential",
    "potential_trace",
    "slice_measure",
    "canonical_potential",
    "fiber_chart",
]


def u0(x: ProjPoint) -> float:
    """log(|t| / ||lift||): the quasi-potential of the line current
    {t = 0}. Scale-free; exactly -inf on the line."""
    t = abs(x.coords[2])
    if t == 0.0:
        return float("-inf")
    return float(math.log(t))


def push_potential(f: PencilEndo, u, x: ProjPoint, profile: Profile = DEFAULT, correction=None) -> float:
    """One transport step of the quasi-potential u at x; -inf
    propagates from preimages on the pole locus. correction replaces
    the gauge term (the tests use 0 to check the counting skeleton and
    a shifted gauge to check spread invariance)."""
    corr = correction if correction is not None else (lambda y: green_correction(f, y))
    pre = preimages(f, x, profile)
    s_u = 0.0
    for y, mult in pre:
        s_u += mult * u(y)
    s_phi = 0.0
    for y, mult in pre:
        s_phi += mult * corr(y)
    return s_u / f.d - s_phi / f.d**2


class _TreeNode:
    __slots__ = ("point", "children", "phi")

    def __init__(self, point):
        self.point = point
        self.children = []  # (node, edge multiplicity)
        self.phi = None


class PotentialEvaluator:
    """Deterministic evaluation of the transported potentials u_n.

    One backward tree expansion per evaluation point, then a bottom-up
    pass: the depth-j node holds u_k for k up to n - j, and each level
    applies the transport formula to its children's values.
    """

    def __init__(
        self,
        f: PencilEndo,
        depth_budget: int = 10**6,
        profile: Profile = DEFAULT,
        correction=None,
    ):
        self.f = f
        self.depth_budget = depth_budget
        self.profile = profile
        self.correction = (
            correction if correction is not None else (lambda y: green_correction(f, y))
        )

    def _build(self, x: ProjPoint, n: int) -> _TreeNode:
        root = _TreeNode(x)
        level = [root]
        for _ in range(n):
            nxt = []
            for node in level:
                for y, mult in preimages(self.f, node.point, self.profile):
                    child = _TreeNode(y)
                    child.phi = self.correction(y)
                    node.children.append((child, mult))
                    nxt.append(child)
            level = nxt
        return root

    def evaluate_all(self, x: ProjPoint, n: int):
        """[u_0(x), u_1(x), ..., u_n(x)] from a single tree."""
        if self.f.d ** (2 * n) > self.depth_budget:
            raise BudgetExceeded(
                f"potential tree has {self.f.d ** (2 * n)} leaves, "
                f"budget {self.depth_budget}"
            )
        root = self._build(x, n)

        def values(node, k):
            # u_0..u_k at this node
            out = [u0(node.point)]
            if k == 0:
                return out
            child_vals = [(values(c, k - 1), c.phi, m) for c, m in node.children]
            d = self.f.d
            for j in range(1, k + 1):
                s_u = sum(m * vals[j - 1] for vals, _, m in child_vals)
                s_phi = sum(m * phi for _, phi, m in child_vals)
                out.append(s_u / d - s_phi / d**2)
            return out

        return values(root, n)

    def evaluate(self, x: ProjPoint, n: int) -> float:
        return self.evaluate_all(x, n)[n]


@dataclass(frozen=True)
class PotentialTrace:
    spreads: list  # (n, spread_n) pairs, n = 0..n_max
    predicted_contraction: float
    verdict: str  # "bounded" | "diverging" | "inconclusive"
    resampled: int = 0  # pole-locus hits replaced during sampling


def _classify(spreads, plateau_rel: float, plateau_runs: int) -> str:
    vals = [s for _, s in spreads]
    if len(vals) < plateau_runs + 1:
        return "inconclusive"
    deltas = [(vals[i + 1] - vals[i], vals[i]) for i in range(len(vals) - 1)]
    tail = deltas[-plateau_runs:]
    if all(abs(dl) < plateau_rel * max(base, 1e-300) for dl, base in tail):
        return "bounded"
    if all(dl >= plateau_rel * max(base, 1e-300) for dl, base in tail):
        return "diverging"
    return "inconclusive"


def potential_trace(
    f: PencilEndo,
    rho: float,
    n_max: int,
    sample_count: int = 20,
    seed: int = 0,
    profile: Profile = DEFAULT,
    dt_one_step: int | None = None,
    plateau_rel: float = 0.05,
    plateau_runs: int = 3,
    fiber_shrink: bool = False,
    budget: int = 10**6,
) -> PotentialTrace:
    """Spreads of the transported potentials over collar-image samples.

    Default protocol: one fixed sample set drawn from the forward image
    of the collar; samples whose evaluation hits the pole locus exactly
    are replaced from a reserve and counted in `resampled`. A plateau
    of the spreads certifies empirical boundedness.

    fiber_shrink protocol: at step n the sample set is the union of
    shells at fiber radii rho * 2^{-j}, j = 0..n, approaching the
    invariant line; a potential with a logarithmic pole along the line
    then shows linearly growing spreads (the diverging signature),
    while a bounded limit potential keeps them flat.
    """
    if f.d ** (2 * n_max) > budget:
        raise BudgetExceeded(
            f"potential tree has {f.d ** (2 * n_max)} leaves, budget {budget}"
        )
    if dt_one_step is None:
        from .degcert import certify

        dt_one_step = certify(
            f, rho, m=1, samples=24, seed=seed, profile=profile
        ).dt_one_step
    predicted = dt_one_step / f.d

    ev = PotentialEvaluator(f, depth_budget=budget, profile=profile)
    resampled = 0

    if fiber_shrink:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((sample_count, 4))
        zs = g[:, 0] + 1j * g[:, 1]
        ws = g[:, 2] + 1j * g[:, 3]
        phases = np.exp(2j * np.pi * rng.uniform(size=sample_count))
        spreads = []
        for n in range(n_max + 1):
            vals = []
            for j in range(n + 1):
                radius = rho * 2.0**-j
                for z, w, ph in zip(zs, ws, phases):
                    x = ProjPoint([z, w, radius * ph * max(abs(z), abs(w))])
                    v = ev.evaluate(x, n)
                    if math.isinf(v):
                        resampled += 1
                        continue
                    vals.append(v)
            spreads.append((n, max(vals) - min(vals)))
    else:
        reserve = sample_attractor(f, rho, burn=1, keep=3 * sample_count, seed=seed)
        table = []  # per accepted sample: [u_0..u_n]
        for x in reserve:
            if len(table) == sample_count:
                break
            vals = ev.evaluate_all(x, n_max)
            if any(math.isinf(v) for v in vals):
                resampled += 1
                continue
            table.append(vals)
        arr = np.array(table)
        spreads = [
            (n, float(arr[:, n].max() - arr[:, n].min())) for n in range(n_max + 1)
        ]

    verdict = _classify(spreads, plateau_rel, plateau_runs)
    return PotentialTrace(
        spreads=spreads,
        predicted_contraction=float(predicted),
        verdict=verdict,
        resampled=resampled,
    )


@dataclass(frozen=True)
class SliceMeasure:
    base: ProjPoint
    atoms: list  # (fiber coordinate: complex, weight: float)


def fiber_chart(p: ProjPoint, x: ProjPoint) -> complex:
    """Fiber coordinate of a point x on the line over p: the t
    component of the lift of x whose base part equals p's canonical
    lift."""
    a, b = p.coords
    z, w, t = x.coords
    if abs(z * b - w * a) > 1e-8:
        raise ValueError("point does not lie on the line over p")
    mu = z / a if abs(a) >= abs(b) else w / b
    return complex(t / mu)


def slice_measure(
    f: PencilEndo,
    p: ProjPoint,
    depth: int,
    budget: int = 10**6,
    profile: Profile = DEFAULT,
) -> SliceMeasure:
    """Atomic approximation of the attracting current sliced along the
    line over p: push the zero-fiber seed of every depth-deep backward
    base itinerary forward again, weighting each itinerary by its
    branch multiplicities over d^depth. Coincident atoms merge."""
    if f.d**depth > budget:
        raise BudgetExceeded(
            f"itinerary tree would hold {f.d ** depth} leaves, budget {budget}"
        )
    frontier = [(p, 1)]
    for _ in range(depth):
        nxt = []
        for q, m in frontier:
            for branch in base_preimages(f, q, profile):
                nxt.append((branch.base, m * branch.multiplicity))
        frontier = nxt
    total = f.d**depth
    raw = []
    for q, m in frontier:
        lift = ProjPoint([q.coords[0], q.coords[1], 0.0])
        x = iterate(f, lift, depth)
        raw.append((fiber_chart(p, x), m / total))
    # merge atoms that are numerically the same point
    merged: list[list] = []
    for pos, wt in raw:
        for slot in merged:
            if abs(pos - slot[0]) < profile.cluster_tol:
                slot[0] = (slot[0] * slot[1] + pos * wt) / (slot[1] + wt)
                slot[1] += wt
                break
        else:
            merged.append([pos, wt])
    return SliceMeasure(base=p, atoms=[(complex(a), float(w)) for a, w in merged])


def canonical_potential(mu: SliceMeasure, w: complex) -> float:
    """Logarithmic potential of the slice measure at the fiber
    coordinate w; -inf exactly on atoms."""
    total = 0.0
    for pos, weight in mu.atoms:
        r = abs(w - pos)
        if r == 0.0:
            return float("-inf")
        total += weight * math.log(r)
    return total
