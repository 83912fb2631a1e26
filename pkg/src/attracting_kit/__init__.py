"""Construction and certification toolkit for plane-pencil-preserving
holomorphic maps with attracting invariant lines, plus their projective
3-space extensions."""

__version__ = "0.1.0"

from .projgeom import (  # noqa: F401
    BinaryForm,
    ProjPoint,
    RootSet,
    chordal_distance,
    critical_points,
    resultant,
    sphere_extrema,
)
