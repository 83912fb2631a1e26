"""Named coefficient families used by the test suite, the shipped
configs, and the CLI examples.

Coefficient convention follows BinaryForm: index j holds the z^j w^(d-j)
coefficient, ascending in j.
"""

from __future__ import annotations

import numpy as np

from .pencilmap import PencilEndo
from .projgeom import BinaryForm

__all__ = [
    "attractor_example",
    "simplified_condition_example",
    "generic_family",
    "henon_box_example",
    "power_map",
    "shipped_examples",
]


def attractor_example(epsilon: complex = 1e-3) -> PencilEndo:
    """Quadratic family ((z-2w)^2, z^2, z^2+zw).

    The base map fixes [1:0] and the invariant line {t=0} carries the
    attractor; the standard worked example for set assembly, trapping,
    and degree certification.
    """
    return PencilEndo(
        P=BinaryForm([4, -4, 1]),
        Q=BinaryForm([0, 0, 1]),
        R=BinaryForm([0, 1, 1]),
        epsilon=epsilon,
    )


def simplified_condition_example(
    a: complex = 0.05, b: complex = 0.07, epsilon: complex = 1e-3
) -> PencilEndo:
    """Quadratic family (w^2 + a z^2, b w^2 + z^2, (z+w)^2).

    For small generic (a, b) the one-step non-recurrence condition
    (preimage of the merged set misses the merged set) holds, which is
    strictly stronger than the two-step chain condition.
    """
    return PencilEndo(
        P=BinaryForm([1, 0, a]),
        Q=BinaryForm([b, 0, 1]),
        R=BinaryForm([1, 2, 1]),
        epsilon=epsilon,
    )


def generic_family(
    d: int = 2, a: complex = 0.05, b: complex = 0.07, epsilon: complex = 1e-3
) -> PencilEndo:
    """Degree-d family (w^d + a z^d, b w^d + z^d, z^d + z^(d-1) w).

    Closed-form special sets for every d: the base critical set is
    {[0:1],[1:0]} and the rotation-collision set has explicit root
    formulas, which makes this the calibration family for eliminant
    code at d > 2.
    """
    if d < 2:
        raise ValueError("degree must be at least 2")
    P = np.zeros(d + 1, dtype=complex)
    P[0] = 1.0
    P[d] = a
    Q = np.zeros(d + 1, dtype=complex)
    Q[0] = b
    Q[d] = 1.0
    R = np.zeros(d + 1, dtype=complex)
    R[d] = 1.0
    R[d - 1] = 1.0
    return PencilEndo(
        P=BinaryForm(P), Q=BinaryForm(Q), R=BinaryForm(R), epsilon=epsilon
    )


def henon_box_example(epsilon: complex = 1e-3) -> PencilEndo:
    """Quadratic family (z^2 + 0.1 w^2, w^2, z^2 + zw).

    Its slice dynamics restricted to a bidisk box is horizontal-like
    and injective (Henon-like), the fixture for the box checks.
    """
    return PencilEndo(
        P=BinaryForm([0.1, 0, 1]),
        Q=BinaryForm([1, 0, 0]),
        R=BinaryForm([0, 1, 1]),
        epsilon=epsilon,
    )


def power_map(d: int = 2, epsilon: complex = 1e-3) -> PencilEndo:
    """Diagnostic family (z^d, w^d, z^d), the standard non-example.

    R shares its zero set with P, so the collision machinery
    degenerates and degree certification must come back false; with
    epsilon = 0 the fiber dynamics is exactly t^d and potential spreads
    diverge.
    """
    if d < 2:
        raise ValueError("degree must be at least 2")
    zd = np.zeros(d + 1, dtype=complex)
    zd[d] = 1.0
    wd = np.zeros(d + 1, dtype=complex)
    wd[0] = 1.0
    return PencilEndo(
        P=BinaryForm(zd), Q=BinaryForm(wd), R=BinaryForm(zd), epsilon=epsilon
    )


def shipped_examples() -> dict:
    """The example set that gets a config and a golden file each."""
    return {
        "attractor": attractor_example(),
        "simplified": simplified_condition_example(),
        "generic-d3": generic_family(d=3),
        "henon-box": henon_box_example(),
        "power-nonexample": power_map(),
    }
