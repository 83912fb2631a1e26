"""Precision profiles.

Every numeric routine in the toolkit takes a Profile so a failed
certification can be re-run tighter without touching call sites.
Profiles are immutable; derive variants with dataclasses.replace.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Profile:
    # root finding
    aberth_max_iter: int = 256
    newton_max_iter: int = 64
    top_trim_rel: float = 1e-13        # relative cutoff for leading coefficients
    cluster_tol: float = 1e-6          # chordal radius for multiplicity merging
    root_backward_tol: float = 1e-12   # |F(root)| / ||coeffs|| on the unit lift

    # projective point comparisons
    point_tol: float = 1e-8            # projective equality
    set_tol: float = 1e-6              # membership when comparing point lists

    # residual checks on preimages and collision pairs
    residual_tol: float = 1e-9
    pair_residual_tol: float = 1e-6

    # eliminant interpolation
    eliminant_trim: float = 1e-10
    degenerate_tol: float = 1e-9

    # sphere extrema grid (per disc chart)
    sphere_angles: int = 2048
    sphere_radii: int = 256

    # tree budgets
    tree_budget: int = 2_000_000
    solenoid_budget: int = 1_000_000

    def tightened(self) -> "Profile":
        """Variant with doubled iteration budgets and a denser grid."""
        return dataclasses.replace(
            self,
            aberth_max_iter=self.aberth_max_iter * 2,
            newton_max_iter=self.newton_max_iter * 2,
            sphere_angles=self.sphere_angles * 2,
            sphere_radii=self.sphere_radii * 2,
        )


DEFAULT = Profile()
TIGHT = DEFAULT.tightened()
# coarse grid for scans; tolerances unchanged so verdicts stay comparable
FAST = dataclasses.replace(DEFAULT, sphere_angles=512, sphere_radii=64)

PROFILES = {"default": DEFAULT, "tight": TIGHT, "fast": FAST}
