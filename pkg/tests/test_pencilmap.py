"""Forward map, base map, and preimage enumeration.

ORACLES
    apply on the invariant line, attractor example, eps symbolic:
        P(1,1) = (1-2)^2 = 1, Q(1,1) = 1, R(1,1) = 2
            so [1:1:0] -> [1:1:2eps]                 (hand substitution)
        P(2,1) = 0, Q(2,1) = 4, R(2,1) = 6
            so [2:1:0] -> [0:4:6eps] = [0:1:1.5eps]  (hand substitution)
    base map values, attractor example:
        P(1,-1) = 9,  so [1:-1] -> [9:1]
        P(1,9) = (1-18)^2 = 289, so [1:9] -> [289:1]
    henon box base: P(0,1) = 0.1, Q(0,1) = 1, so [0:1] -> [0.1:1]
    base preimages, attractor example:
        q = [1:1]: unit lift (1,1)/sqrt2, fiber form prop. to
        P - Q = 4w(w-z), roots {[1:0], [1:1]}
        q = [0:1]: fiber form prop. to P = (z-2w)^2, root [2:1] twice
        q = [1:0]: fiber form prop. to -Q = -z^2, root [0:1] twice
    power map d=2, q = [1:1]: fiber form prop. to z^2 - w^2,
        roots {[1:1], [1:-1]}
"""

import numpy as np
import pytest

from attracting_kit.errors import DegenerateFamily
from attracting_kit.families import (
    attractor_example,
    generic_family,
    henon_box_example,
    power_map,
    simplified_condition_example,
)
from attracting_kit.pencilmap import (
    CENTER,
    PencilEndo,
    apply,
    base_apply,
    base_apply_aug,
    base_preimages,
    green_correction,
    is_center,
    iterate,
    preimages,
)
from attracting_kit.projgeom import BinaryForm, ProjPoint, chordal_distance

from _support import pt, set_match

EPS = 1e-3


@pytest.fixture(scope="module")
def fmap():
    return attractor_example(EPS)


def random_points(rng, n, dim=3):
    out = []
    for _ in range(n):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        out.append(ProjPoint(v))
    return out


class TestConstruction:
    def test_degree_fields(self, fmap):
        assert fmap.d == 2
        assert fmap.epsilon == complex(EPS)

    def test_rejects_proportional_pq(self):
        with pytest.raises(DegenerateFamily):
            PencilEndo(
                P=BinaryForm([1, 2, 1]),
                Q=BinaryForm([2, 4, 2]),
                R=BinaryForm([0, 1, 1]),
                epsilon=EPS,
            )

    def test_rejects_degree_mismatch(self):
        with pytest.raises(ValueError):
            PencilEndo(
                P=BinaryForm([1, 0, 1]),
                Q=BinaryForm([1, 1]),
                R=BinaryForm([0, 1, 1]),
                epsilon=EPS,
            )

    def test_rejects_linear(self):
        with pytest.raises(ValueError):
            PencilEndo(
                P=BinaryForm([1, 1]),
                Q=BinaryForm([1, -1]),
                R=BinaryForm([0, 1]),
                epsilon=EPS,
            )

    def test_zero_epsilon_allowed_for_diagnostics(self):
        f = power_map(2, 0.0)
        assert f.epsilon == 0.0


class TestApply:
    def test_invariant_line_hand_values(self, fmap):
        img = apply(fmap, pt(1, 1, 0))
        assert img.isclose(pt(1, 1, 2 * EPS), tol=1e-12)
        img = apply(fmap, pt(2, 1, 0))
        assert img.isclose(pt(0, 1, 1.5 * EPS), tol=1e-12)

    def test_center_fixed(self, fmap):
        assert apply(fmap, CENTER).isclose(CENTER, tol=1e-15)

    def test_lift_independence(self, fmap):
        x1 = ProjPoint([0.3 + 1j, -2.0, 0.7j])
        x2 = ProjPoint(np.array([0.3 + 1j, -2.0, 0.7j]) * (5.0 - 3.0j))
        assert apply(fmap, x1).isclose(apply(fmap, x2), tol=1e-12)


class TestBaseApply:
    def test_hand_values(self, fmap):
        assert base_apply(fmap, pt(1, -1)).isclose(pt(9, 1), tol=1e-12)
        assert base_apply(fmap, pt(1, 9)).isclose(pt(289, 1), tol=1e-12)

    def test_henon_critical_image(self):
        f = henon_box_example(EPS)
        assert base_apply(f, pt(0, 1)).isclose(pt(0.1, 1), tol=1e-12)
        assert base_apply(f, pt(1, 0)).isclose(pt(1, 0), tol=1e-12)

    def test_augmented_consistency(self, fmap):
        # first two coordinates of the augmented image agree with the
        # base image projectively
        p = pt(0.4, 1.3 - 0.2j)
        aug = base_apply_aug(fmap, p)
        base = base_apply(fmap, p)
        assert base.isclose(ProjPoint(aug.coords[:2]), tol=1e-12)

    def test_pencil_equivariance(self, fmap):
        rng = np.random.default_rng(7)
        for x in random_points(rng, 50):
            if is_center(x):
                continue
            lhs = base_apply(fmap, ProjPoint(x.coords[:2]))
            rhs_full = apply(fmap, x)
            rhs = ProjPoint(rhs_full.coords[:2])
            assert chordal_distance(lhs, rhs) < 1e-10


class TestBasePreimages:
    def test_attractor_hand_values(self, fmap):
        lifts = base_preimages(fmap, pt(1, 1))
        assert set_match([l.base for l in lifts], [pt(1, 0), pt(1, 1)])
        assert sum(l.multiplicity for l in lifts) == 2

        lifts = base_preimages(fmap, pt(0, 1))
        assert set_match([l.base for l in lifts], [pt(2, 1)])
        assert lifts[0].multiplicity == 2

        lifts = base_preimages(fmap, pt(1, 0))
        assert set_match([l.base for l in lifts], [pt(0, 1)])
        assert lifts[0].multiplicity == 2

    def test_power_map_roots_of_unity(self):
        f = power_map(2, EPS)
        lifts = base_preimages(f, pt(1, 1))
        assert set_match([l.base for l in lifts], [pt(1, 1), pt(1, -1)])

    def test_normalization_invariant(self):
        # (P,Q) at the stored lift reproduces the target's stored lift
        rng = np.random.default_rng(11)
        for f in (attractor_example(EPS), generic_family(3, 0.05, 0.07, EPS)):
            for q in random_points(rng, 25, dim=2):
                for lift in base_preimages(f, q):
                    a = f.P.evaluate(lift.lift[0], lift.lift[1])
                    b = f.Q.evaluate(lift.lift[0], lift.lift[1])
                    tz, tw = q.coords
                    err = max(abs(a - tz), abs(b - tw))
                    assert err <= 1e-10

    def test_right_inverse(self, fmap):
        rng = np.random.default_rng(13)
        for p in random_points(rng, 40, dim=2):
            q = base_apply(fmap, p)
            pts = [l.base for l in base_preimages(fmap, q)]
            assert any(p.isclose(c, tol=1e-7) for c in pts)

    def test_multiplicity_totals(self):
        rng = np.random.default_rng(17)
        for f in (attractor_example(EPS), generic_family(3, 0.05, 0.07, EPS)):
            for q in random_points(rng, 30, dim=2):
                lifts = base_preimages(f, q)
                assert sum(l.multiplicity for l in lifts) == f.d


class TestPreimages:
    def test_invariant_line_forward_oracle(self, fmap):
        x = pt(1, 1, 2 * EPS)
        pre = preimages(fmap, x)
        assert sum(m for _, m in pre) == 4
        assert any(y.isclose(pt(1, 1, 0), tol=1e-8) for y, _ in pre)

    def test_center_fiber(self, fmap):
        pre = preimages(fmap, CENTER)
        assert len(pre) == 1
        assert pre[0][0].isclose(CENTER, tol=1e-15)
        assert pre[0][1] == 4

    def test_multiplicity_sums_d_squared(self):
        rng = np.random.default_rng(19)
        for f, nn in ((attractor_example(EPS), 100), (generic_family(3), 40)):
            for x in random_points(rng, nn):
                pre = preimages(f, x)
                assert sum(m for _, m in pre) == f.d**2

    def test_residuals(self, fmap):
        rng = np.random.default_rng(23)
        for x in random_points(rng, 50):
            for y, _ in preimages(fmap, x):
                assert chordal_distance(apply(fmap, y), x) < 1e-9

    def test_fiber_rotation_symmetry(self, fmap):
        rng = np.random.default_rng(29)
        for x in random_points(rng, 20):
            pre = [y for y, _ in preimages(fmap, x)]
            for y in pre:
                z, w, t = y.coords
                rot = ProjPoint([z, w, -t])
                assert any(rot.isclose(c, tol=1e-8) for c in pre)

    def test_push_pull_identity(self, fmap):
        rng = np.random.default_rng(31)
        tests = [
            lambda x: abs(x.coords[2]) ** 2,
            lambda x: (x.coords[0] * np.conj(x.coords[1])).real + 2.0,
            lambda x: float(np.log1p(abs(x.coords[0]) ** 2)) + 1.0,
        ]
        for u in tests:
            for x in random_points(rng, 34):
                pre = preimages(fmap, x)
                lhs = sum(m * u(apply(fmap, y)) for y, m in pre)
                rhs = fmap.d**2 * u(x)
                assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs))


class TestGreenCorrection:
    def test_unit_coordinate_point(self):
        f = power_map(2, 0.0)
        assert abs(green_correction(f, pt(1, 0, 0))) < 1e-14

    def test_power_mean_bound(self):
        # squaring a unit vector coordinatewise cannot grow the norm
        f = power_map(2, 0.0)
        rng = np.random.default_rng(37)
        for x in random_points(rng, 50):
            assert green_correction(f, x) <= 1e-14

    def test_matches_direct_formula(self, fmap):
        rng = np.random.default_rng(41)
        for x in random_points(rng, 20):
            z, w, t = x.coords
            vec = [
                fmap.P.evaluate(z, w),
                fmap.Q.evaluate(z, w),
                t**2 + fmap.epsilon * fmap.R.evaluate(z, w),
            ]
            oracle = float(np.log(np.linalg.norm(vec)))
            assert abs(green_correction(fmap, x) - oracle) < 1e-13

    def test_lift_invariance(self, fmap):
        x1 = ProjPoint([1.0, 2.0, 3.0])
        x2 = ProjPoint([-2.0, -4.0, -6.0])
        assert green_correction(fmap, x1) == green_correction(fmap, x2)


class TestIterate:
    def test_identity_and_single(self, fmap):
        x = pt(0.2, 1.0, 0.3)
        assert iterate(fmap, x, 0).isclose(x, tol=1e-15)
        assert iterate(fmap, x, 1).isclose(apply(fmap, x), tol=1e-15)

    def test_semigroup_law(self, fmap):
        rng = np.random.default_rng(43)
        for x in random_points(rng, 10):
            whole = iterate(fmap, x, 5)
            split = iterate(fmap, iterate(fmap, x, 2), 3)
            assert chordal_distance(whole, split) < 1e-9


class TestFamilies:
    def test_simplified_structure(self):
        f = simplified_condition_example(0.05, 0.07, EPS)
        assert base_apply(f, pt(0, 1)).isclose(pt(1, 0.07), tol=1e-12)
        assert base_apply(f, pt(1, 0)).isclose(pt(0.05, 1), tol=1e-12)

    def test_generic_family_matches_simplified_base(self):
        # same P and Q at d=2; only R differs
        g = generic_family(2, 0.05, 0.07, EPS)
        s = simplified_condition_example(0.05, 0.07, EPS)
        assert np.allclose(g.P.coeffs, s.P.coeffs)
        assert np.allclose(g.Q.coeffs, s.Q.coeffs)

    def test_power_map_is_the_nonexample(self):
        f = power_map(2, EPS)
        assert np.allclose(f.P.coeffs, f.R.coeffs)
