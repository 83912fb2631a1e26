"""Exceptional-set construction and genericity-condition tests.

ORACLES
-------
Quadratic attractor family P = (z-2w)^2, Q = z^2, R = z(z+w), hand
derivations in the w = 1 chart (x = z/w):

* critical points: the Jacobian determinant of (P, Q) is
  2(x-2)*0 - (-4)(x-2)*2x = 8x(x-2), so crit = {[0:1], [2:1]}.
* branch-collision pairs: base collinearity forces xy = x + y, and
  substituting y = x/(x-1) into the augmented cross
  R(x)P(y) - P(x)R(y) and clearing (x-1)^2 leaves x(2-x)(x-2)^2.
  Every root sits on the diagonal (x=0 -> y=0, x=2 -> y=2), so there
  are no off-diagonal pairs and x_minus1 is exactly crit.
* rotation pairs (omega = -1): the same substitution gives
  3x^2(x-2)^2, again diagonal only, so y_minus2 is exactly roots(R)
  = {[0:1], [1:-1]}.
* images: f[0:1] = [4:0] = [1:0], f[2:1] = [0:4] = [0:1], so
  X = {[1:0], [0:1]}.  f[1:-1] = [9:1], f[9:1] = [49:81], and
  f[1:0] = [1:1] is fixed, so Y = {[1:1], [49:81]}.
* recurrence: [1:0] -> [1:1] -> [1:1], [0:1] -> [1:0], both stay in
  Z, and [49:81] -> [12769:2401] leaves, so script_z =
  {[1:0], [0:1], [1:1]} and the two-step chain is nonempty: the
  two-step condition honestly fails for this family.
* first-condition margin: the closest X/Y pair is [0:1] against
  [49:81] at chordal distance 49/hypot(49, 81).

Degree-3 generic family P = w^3 + a z^3, Q = b w^3 + z^3,
R = z^2(z+w): base collinearity reduces to (1-ab)(y^3-x^3) = 0, so
partners are rotations y = zeta x, and the twisted cross factors as
(1+ax^3) x^2 [(x+1) - omega(x+zeta^2)].  The off-diagonal solutions
are the displayed points [e^{2i(k+l)pi/3}-1 : 1-e^{2ilpi/3}].

Independent machinery used below, none of it shared with the library
code paths: numpy companion-matrix roots, polynomial long division
from numpy.polynomial, a damped finite-difference Newton solver for
the two-variable pair systems, and a direct vectorized resampling of
the branch-separation quantity with its own ring construction.
"""

import numpy as np
import pytest

from attracting_kit.errors import InsufficientData
from attracting_kit.families import (
    attractor_example,
    generic_family,
    henon_box_example,
    power_map,
    simplified_condition_example,
)
from attracting_kit.pencilmap import PencilEndo, base_apply
from attracting_kit.precision import DEFAULT
from attracting_kit.projgeom import BinaryForm, ProjPoint, chordal_distance
from attracting_kit.specialsets import (
    GOLDEN_PHASE,
    _batched_roots,
    _deflate_diagonal,
    _dist_to_set,
    _interp_eliminant,
    _ring_targets,
    assemble_sets,
    check_conditions,
    compute_x_minus1,
    compute_y_minus2,
    epsilon_max,
    estimate_gamma,
)

from _support import np_roots_of_form, pt, set_match


def chart_poly(form):
    """Descending numpy coefficients of form(x, 1)."""
    return np.asarray(form.coeffs, dtype=complex)[::-1]


def newton_pair_oracle(P, Q, R, omega, seed=0, n_seeds=150):
    """Independent locator of off-diagonal collision pairs.

    Damped Newton with a finite-difference Jacobian on the deflated
    two-variable system, followed by a rank-one check of the full
    augmented pair matrix.  Minor residuals are measured against their
    own product magnitudes; an absolute scale would admit the spurious
    branch that pinches into the diagonal at multiple roots of R.
    """
    pc, qc, rc = chart_poly(P), chart_poly(Q), chart_poly(R)
    untwisted = abs(omega - 1.0) < 1e-12

    def system(v):
        x, y = v
        dxy = x - y
        f1 = (np.polyval(pc, x) * np.polyval(qc, y)
              - np.polyval(qc, x) * np.polyval(pc, y)) / dxy
        f2 = (np.polyval(rc, x) * np.polyval(pc, y)
              - omega * np.polyval(pc, x) * np.polyval(rc, y))
        if untwisted:
            f2 = f2 / dxy
        return np.array([f1, f2])

    rng = np.random.default_rng(seed)
    found = []
    for _ in range(n_seeds):
        v = rng.standard_normal(2) * 1.5 + 1j * rng.standard_normal(2) * 1.5
        if abs(v[0] - v[1]) < 1e-3:
            continue
        converged = False
        for _ in range(60):
            if abs(v[0] - v[1]) < 1e-8:
                break
            f0 = system(v)
            r0 = np.linalg.norm(f0)
            if r0 < 1e-11:
                converged = True
                break
            jac = np.zeros((2, 2), dtype=complex)
            for j in range(2):
                h = 1e-7 * (1 + abs(v[j]))
                vp = v.copy()
                vp[j] += h
                jac[:, j] = (system(vp) - f0) / h
            try:
                step = np.linalg.solve(jac, f0)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            for _ in range(25):
                vn = v - lam * step
                if abs(vn[0] - vn[1]) > 1e-10 and np.linalg.norm(system(vn)) < r0:
                    break
                lam *= 0.5
            else:
                break
            v = v - lam * step
        if not converged:
            continue
        x, y = v
        if abs(x - y) < 1e-5:
            continue
        row1 = np.array([np.polyval(pc, x), np.polyval(qc, x), np.polyval(rc, x)])
        row2 = np.array([np.polyval(pc, y), np.polyval(qc, y),
                         omega * np.polyval(rc, y)])
        rowscale = np.linalg.norm(row1) * np.linalg.norm(row2)
        good = True
        informative = 0
        for i, j in ((0, 1), (0, 2), (1, 2)):
            p1 = row1[i] * row2[j]
            p2 = row1[j] * row2[i]
            denom = max(abs(p1), abs(p2))
            if denom < 1e-14 * rowscale:
                continue
            informative += 1
            if abs(p1 - p2) > 1e-6 * denom:
                good = False
                break
        if not good or informative == 0:
            continue
        if not untwisted:
            # genuine rotation pairs must fail the untwisted comparison
            r2u = np.array([np.polyval(pc, y), np.polyval(qc, y),
                            np.polyval(rc, y)])
            plain_ok = True
            for i, j in ((0, 2), (1, 2)):
                p1 = row1[i] * r2u[j]
                p2 = row1[j] * r2u[i]
                denom = max(abs(p1), abs(p2))
                if denom < 1e-14 * rowscale:
                    continue
                if abs(p1 - p2) > 1e-6 * denom:
                    plain_ok = False
                    break
            if plain_ok:
                continue
        found.append(ProjPoint([x, 1.0]))
        found.append(ProjPoint([y, 1.0]))
    out = []
    for p in found:
        if not any(chordal_distance(p, q) < 1e-6 for q in out):
            out.append(p)
    return out


def chart_base_apply(P, Q, p):
    zv = P.evaluate(p.coords[0], p.coords[1])
    wv = Q.evaluate(p.coords[0], p.coords[1])
    return ProjPoint([zv, wv])


class TestDeflateDiagonal:
    def test_matches_long_division_large_second_slot(self):
        rng = np.random.default_rng(1)
        quot = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        p_raw = (0.3 + 0.1j, 1.0)  # divisor [a, b] with |b| > |a|
        divisor = np.array([p_raw[0], -p_raw[1]], dtype=complex)
        m = np.convolve(divisor, quot)
        out = _deflate_diagonal(m, p_raw)
        assert np.allclose(out, quot, atol=1e-13)

    def test_matches_long_division_large_first_slot(self):
        rng = np.random.default_rng(2)
        quot = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        p_raw = (1.0, 0.2 - 0.4j)
        divisor = np.array([p_raw[0], -p_raw[1]], dtype=complex)
        m = np.convolve(divisor, quot)
        out = _deflate_diagonal(m, p_raw)
        assert np.allclose(out, quot, atol=1e-13)


class TestInterpolation:
    def test_recovers_known_coefficients(self):
        target = np.array([3.0, 2.0, 0.0, -1.0], dtype=complex)

        def value_at(x):
            return np.polyval(target[::-1], x)

        out = _interp_eliminant(value_at, 5, DEFAULT)
        assert out.size == 4
        assert np.allclose(out, target, atol=1e-12)

    def test_identically_small_reports_degenerate(self):
        out = _interp_eliminant(lambda x: 1e-13, 6, DEFAULT)
        assert out is None

    def test_interpolation_nodes_avoid_rational_angles(self):
        # the sampling circle phase is an irrational fraction of a turn
        frac = GOLDEN_PHASE / (2.0 * np.pi)
        for q in range(1, 20):
            assert abs(frac * q - round(frac * q)) > 1e-3


class TestBatchedRoots:
    def test_quadratic_against_companion(self):
        rng = np.random.default_rng(3)
        coeffs = rng.standard_normal((40, 3)) + 1j * rng.standard_normal((40, 3))
        roots = _batched_roots(coeffs)
        for row, pair in zip(coeffs, roots):
            expect = np.roots(row[::-1])
            got = sorted(pair, key=lambda z: (z.real, z.imag))
            want = sorted(expect, key=lambda z: (z.real, z.imag))
            assert np.allclose(got, want, atol=1e-9)

    def test_quadratic_cancellation_regime(self):
        # roots -1e8 and -1e-8; the naive formula loses the small one
        coeffs = np.array([[1.0, 1e8 + 1e-8, 1.0]], dtype=complex)
        roots = _batched_roots(coeffs)[0]
        small = min(roots, key=abs)
        large = max(roots, key=abs)
        assert abs(small + 1e-8) < 1e-16
        assert abs(large + 1e8) < 1e-4

    def test_cubic_against_companion(self):
        rng = np.random.default_rng(4)
        coeffs = rng.standard_normal((25, 4)) + 1j * rng.standard_normal((25, 4))
        roots = _batched_roots(coeffs)
        for row, trio in zip(coeffs, roots):
            expect = np.roots(row[::-1])
            got = sorted(trio, key=lambda z: (z.real, z.imag))
            want = sorted(expect, key=lambda z: (z.real, z.imag))
            assert np.allclose(got, want, atol=1e-8)


class TestRingGeometry:
    def test_ring_sits_at_exact_chordal_distance(self):
        for center in (pt(1.0, 0.0), pt(0.3 + 0.2j, 1.0)):
            al, be = _ring_targets(center, 0.05, 64)
            for a, b in zip(al, be):
                q = ProjPoint([a, b])
                assert abs(chordal_distance(q, center) - 0.05) < 1e-12

    def test_dist_to_set_matches_loop(self):
        rng = np.random.default_rng(5)
        al = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        be = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        pts = [pt(1.0, 0.0), pt(1.0, 1.0), pt(0.2j, 1.0)]
        got = _dist_to_set(al, be, pts)
        for i in range(30):
            q = ProjPoint([al[i], be[i]])
            want = min(chordal_distance(q, p) for p in pts)
            assert abs(got[i] - want) < 1e-12


class TestAttractorConfiguration:
    def setup_method(self):
        self.f = attractor_example()
        self.sets = assemble_sets(self.f)

    def test_x_minus1_is_critical_only(self):
        assert set_match(self.sets.x_minus1, [pt(0, 1), pt(2, 1)], tol=1e-8)

    def test_y_minus2_is_roots_of_r_only(self):
        assert set_match(self.sets.y_minus2, [pt(0, 1), pt(1, -1)], tol=1e-8)

    def test_image_sets(self):
        assert set_match(self.sets.x_set, [pt(1, 0), pt(0, 1)], tol=1e-8)
        assert set_match(self.sets.y_set, [pt(1, 1), pt(49, 81)], tol=1e-8)
        assert set_match(self.sets.y_minus1, [pt(1, 0), pt(9, 1)], tol=1e-8)
        assert len(self.sets.z_set) == 4

    def test_recurrent_part(self):
        assert set_match(
            self.sets.script_z, [pt(1, 0), pt(0, 1), pt(1, 1)], tol=1e-8
        )

    def test_margin_r_frozen_and_against_independent_cloud(self):
        assert self.sets.margin_r == pytest.approx(
            0.007468416700930458, rel=1e-9
        )
        # rebuild the point cloud with numpy root solving only
        cloud = list(self.sets.x_set) + list(self.sets.y_set)
        level = list(self.sets.z_set)
        for _ in range(2):
            nxt = []
            for q in level:
                a, b = q.coords
                fiber = BinaryForm(b * self.f.P.coeffs - a * self.f.Q.coeffs)
                finite, inf_mult = np_roots_of_form(fiber)
                nxt.extend(ProjPoint([x, 1.0]) for x in finite)
                if inf_mult:
                    nxt.append(pt(1, 0))
            cloud.extend(nxt)
            level = nxt
        # numpy splits double preimages into twin roots a few 1e-9
        # apart; merge at the clustering scale so each geometric point
        # appears once, as the library's multiplicity handling ensures
        dedup = []
        for p in cloud:
            if not any(chordal_distance(p, q) < 1e-6 for q in dedup):
                dedup.append(p)
        best = 0.5
        for i in range(len(dedup)):
            for j in range(i + 1, len(dedup)):
                best = min(best, 0.5 * chordal_distance(dedup[i], dedup[j]))
        assert self.sets.margin_r == pytest.approx(best, rel=1e-9)

    def test_conditions_split_honestly(self):
        v = check_conditions(self.sets, self.f)
        assert v.cond1_disjoint
        assert v.cond1_margin == pytest.approx(
            49.0 / np.hypot(49.0, 81.0), rel=1e-12
        )
        # [1:0] -> [1:1] -> [1:1] is a genuine two-step chain in z_set,
        # so both recurrence conditions fail with zero margin
        assert not v.cond2_chain
        assert v.cond2_margin == 0.0
        assert not v.cond2_simplified
        assert v.cond2_simplified_margin == 0.0
        assert not v.cond_53_relaxed

    def test_newton_oracle_confirms_no_collision_pairs(self):
        for omega in (1.0, -1.0):
            extra = newton_pair_oracle(
                self.f.P.scaled_to_unit(),
                self.f.Q.scaled_to_unit(),
                self.f.R.scaled_to_unit(),
                omega,
            )
            assert extra == []


class TestSimplifiedFamily:
    def setup_method(self):
        self.a, self.b = 0.05, 0.07
        self.f = simplified_condition_example(self.a, self.b)
        self.sets = assemble_sets(self.f)

    def test_x_set_displayed_points(self):
        assert set_match(
            self.sets.x_set, [pt(self.a, 1), pt(1, self.b)], tol=1e-10
        )

    def test_y_minus2_roots_and_rotations(self):
        assert set_match(
            self.sets.y_minus2, [pt(1, -1), pt(1j, 1), pt(-1j, 1)], tol=1e-8
        )

    def test_newton_oracle_matches_rotation_points(self):
        found = newton_pair_oracle(
            self.f.P.scaled_to_unit(),
            self.f.Q.scaled_to_unit(),
            self.f.R.scaled_to_unit(),
            -1.0,
        )
        assert set_match(found, [pt(1j, 1), pt(-1j, 1)], tol=1e-6)

    def test_y_set_displayed_formulas(self):
        a, b = self.a, self.b
        y1 = pt((1 + b) ** 2 + a * (1 + a) ** 2,
                b * (1 + b) ** 2 + (1 + a) ** 2)
        y2 = pt((b - 1) ** 2 + a * (1 - a) ** 2,
                b * (b - 1) ** 2 + (1 - a) ** 2)
        assert set_match(self.sets.y_set, [y1, y2], tol=1e-10)

    def test_one_step_condition_passes(self):
        v = check_conditions(self.sets, self.f)
        assert v.cond1_disjoint
        assert v.cond2_chain
        assert v.cond2_simplified
        assert v.cond2_simplified_margin == pytest.approx(
            0.0024783549035582997, rel=1e-9
        )
        assert self.sets.script_z == []

    def test_one_step_margin_against_direct_recompute(self):
        margin = min(
            min(
                chordal_distance(chart_base_apply(self.f.P, self.f.Q, z), w)
                for w in self.sets.z_set
            )
            for z in self.sets.z_set
        )
        v = check_conditions(self.sets, self.f)
        assert v.cond2_simplified_margin == pytest.approx(margin, rel=1e-12)


class TestGenericFamilies:
    def test_x_minus1_exact_for_both_degrees(self):
        for d in (2, 3):
            sets = assemble_sets(generic_family(d))
            assert len(sets.x_minus1) == 2
            for p in sets.x_minus1:
                assert min(
                    chordal_distance(p, pt(0, 1)), chordal_distance(p, pt(1, 0))
                ) < 1e-12

    def test_degree3_rotation_points_match_closed_form(self):
        sets = assemble_sets(generic_family(3))
        expected = [pt(0, 1), pt(1, -1)]
        for k in (1, 2):
            for l in (1, 2):
                num = np.exp(2j * (k + l) * np.pi / 3) - 1
                den = 1 - np.exp(2j * l * np.pi / 3)
                if abs(num) < 1e-12:
                    continue  # collapses onto a root of R
                expected.append(ProjPoint([num, den]))
        dedup = []
        for p in expected:
            if not any(chordal_distance(p, q) < 1e-8 for q in dedup):
                dedup.append(p)
        assert set_match(sets.y_minus2, dedup, tol=1e-8)
        for p in sets.y_minus2:
            assert min(chordal_distance(p, q) for q in dedup) < 1e-8

    def test_degree3_newton_oracle_agreement(self):
        f = generic_family(3)
        union = []
        for k in (1, 2):
            omega = np.exp(2j * np.pi * k / 3)
            union.extend(
                newton_pair_oracle(
                    f.P.scaled_to_unit(),
                    f.Q.scaled_to_unit(),
                    f.R.scaled_to_unit(),
                    omega,
                )
            )
        dedup = []
        for p in union:
            if not any(chordal_distance(p, q) < 1e-6 for q in dedup):
                dedup.append(p)
        rotation_only = [
            p
            for p in assemble_sets(f).y_minus2
            if min(chordal_distance(p, q) for q in (pt(0, 1), pt(1, -1))) > 1e-6
        ]
        assert set_match(dedup, rotation_only, tol=1e-6)

    def test_recurrent_part_is_single_fixed_point(self):
        for d in (2, 3):
            f = generic_family(d)
            sets = assemble_sets(f)
            assert set_match(sets.script_z, [pt(1, 0.07)], tol=1e-8)

    def test_two_step_condition_passes(self):
        for d, margin in ((2, 0.0024783549035582997), (3, 0.00012395326872728651)):
            f = generic_family(d)
            v = check_conditions(assemble_sets(f), f)
            assert v.cond1_disjoint
            assert v.cond2_chain
            assert v.cond2_margin == pytest.approx(margin, rel=1e-9)


class TestHenonBoxFamily:
    def setup_method(self):
        self.f = henon_box_example()
        self.sets = assemble_sets(self.f)

    def test_image_sets(self):
        assert set_match(self.sets.x_set, [pt(1, 0), pt(0.1, 1)], tol=1e-8)
        assert set_match(
            self.sets.y_set, [pt(0.11, 1), pt(1.31, 1)], tol=1e-8
        )

    def test_relaxed_chain_is_infinity_only(self):
        v = check_conditions(self.sets, self.f)
        assert v.cond1_disjoint
        assert v.cond1_margin == pytest.approx(
            0.01 / (np.hypot(1, 0.1) * np.hypot(1, 0.11)), rel=1e-12
        )
        # [1:0] is fixed, so the strict recurrence conditions fail,
        # but the only chain member is the point at infinity
        assert not v.cond2_chain
        assert not v.cond2_simplified
        assert v.cond_53_relaxed


class TestDegenerateFamily:
    def test_power_map_flags_positive_dimensional_collisions(self):
        f = power_map()
        _, flag_x = compute_x_minus1(f)
        _, flag_y = compute_y_minus2(f)
        assert flag_x           # P proportional to R collapses the system
        assert not flag_y
        sets = assemble_sets(f)
        assert sets.degenerate
        assert set_match(sets.x_minus1, [pt(1, 0), pt(0, 1)], tol=1e-8)

    def test_degenerate_configuration_fails_everything(self):
        f = power_map()
        v = check_conditions(assemble_sets(f), f)
        assert not v.cond1_disjoint
        assert not v.cond2_chain
        assert not v.cond2_simplified
        assert not v.cond_53_relaxed
        assert v.gamma_hat == 0.0
        assert v.epsilon_max == 0.0


def resampled_gamma_oracle(f, sets, r, samples, seed):
    """Direct vectorized recomputation of the separation envelope with
    its own ring construction (different radii and angle count than the
    library) and numpy-only fiber solving."""
    pc = np.asarray(f.P.coeffs, dtype=complex)
    qc = np.asarray(f.Q.coeffs, dtype=complex)
    rc = np.asarray(f.R.coeffs, dtype=complex)

    def ev(c, a, b):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        usew = np.abs(a) <= np.abs(b)
        dw = np.where(usew & (b != 0), b, 1.0)
        dz = np.where(~usew, a, 1.0)
        d = c.size - 1
        vw = b**d * np.polyval(c[::-1], np.where(usew, a, 0) / dw)
        vz = a**d * np.polyval(c, np.where(~usew, b, 0) / dz)
        return np.where(usew, vw, vz)

    def pullback(a2, b2):
        G = b2[:, None] * pc[None, :] - a2[:, None] * qc[None, :]
        keep = np.abs(G[:, -1]) > 1e-12 * np.max(np.abs(G), axis=1)
        A, B, C = G[keep, 2], G[keep, 1], G[keep, 0]
        sq = np.sqrt(B * B - 4 * A * C)
        sq = np.where((np.conj(B) * sq).real < 0, -sq, sq)
        tt = -(B + sq)
        tt = np.where(np.abs(tt) < 1e-300, 1e-300, tt)
        return np.concatenate([tt / (2 * A), 2 * C / tt])

    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, 4))
    blocks_a = [g[:, 0] + 1j * g[:, 1]]
    blocks_b = [g[:, 2] + 1j * g[:, 3]]
    angles = np.exp(2j * np.pi * np.arange(512) / 512)
    for mult in (1.0 + 1e-12, 1.02, 1.08):
        rho = min(r * mult, 0.999999)
        t = rho / np.sqrt(1 - rho * rho)
        for p0 in sets.x_set:
            z0, w0 = p0.coords
            blocks_a.append(z0 + t * angles * (-np.conj(w0)))
            blocks_b.append(w0 + t * angles * np.conj(z0))
        for p0 in sets.y_set:
            z0, w0 = p0.coords
            a2 = z0 + t * angles * (-np.conj(w0))
            b2 = w0 + t * angles * np.conj(z0)
            u = pullback(a2, b2)
            blocks_a.append(u)
            blocks_b.append(np.ones(u.size, dtype=complex))
    al = np.concatenate(blocks_a)
    be = np.concatenate(blocks_b)

    G = be[:, None] * pc[None, :] - al[:, None] * qc[None, :]
    keep = np.abs(G[:, -1]) > 1e-12 * np.max(np.abs(G), axis=1)
    al, be, G = al[keep], be[keep], G[keep]
    A, B, C = G[:, 2], G[:, 1], G[:, 0]
    sq = np.sqrt(B * B - 4 * A * C)
    sq = np.where((np.conj(B) * sq).real < 0, -sq, sq)
    tt = -(B + sq)
    tt = np.where(np.abs(tt) < 1e-300, 1e-300, tt)
    U = np.stack([tt / (2 * A), 2 * C / tt], axis=1)
    Pv = np.polyval(pc[::-1], U)
    Qv = np.polyval(qc[::-1], U)
    Rv = np.polyval(rc[::-1], U)
    use_p = (np.abs(al) >= np.abs(be))[:, None]
    lam2 = np.where(use_p, al[:, None] / Pv, be[:, None] / Qv)
    Rn = lam2 * Rv
    M = np.sqrt(np.abs(lam2)) * np.maximum(np.abs(U), 1.0)

    nrm = np.sqrt(np.abs(al) ** 2 + np.abs(be) ** 2)
    dX = np.full(al.shape, np.inf)
    for p0 in sets.x_set:
        z0, w0 = p0.coords
        dX = np.minimum(dX, np.abs(al * w0 - be * z0) / nrm)
    fz = ev(pc, al, be)
    fw = ev(qc, al, be)
    nf = np.sqrt(np.abs(fz) ** 2 + np.abs(fw) ** 2)
    dY = np.full(al.shape, np.inf)
    for p0 in sets.y_set:
        z0, w0 = p0.coords
        dY = np.minimum(dY, np.abs(fz * w0 - fw * z0) / nf)
    far_x = dX > r
    far_y = dY > r

    best = np.inf
    pair = (M[:, 0] + M[:, 1]) ** 2
    best = min(best, float(np.min((np.abs(Rn[:, 0] - Rn[:, 1]) / pair)[far_x])))
    for i, j in ((0, 0), (1, 1), (0, 1), (1, 0)):
        dij = (M[:, i] + M[:, j]) ** 2
        best = min(best, float(np.min((np.abs(Rn[:, i] + Rn[:, j]) / dij)[far_y])))
    return best


class TestSeparationEstimate:
    def setup_method(self):
        self.f = attractor_example()
        self.sets = assemble_sets(self.f)
        self.r = self.sets.margin_r / 2

    def test_frozen_default_value(self):
        g = estimate_gamma(self.f, self.sets, self.r, samples=20000, seed=0)
        assert g == pytest.approx(0.005472146386919619, rel=1e-9)

    def test_against_independent_resampling(self):
        g = estimate_gamma(self.f, self.sets, self.r, samples=20000, seed=0)
        oracle = resampled_gamma_oracle(
            self.f, self.sets, self.r, samples=200000, seed=123
        )
        assert abs(g / oracle - 1.0) < 0.1

    def test_seed_stability(self):
        vals = {
            estimate_gamma(self.f, self.sets, self.r, samples=20000, seed=s)
            for s in (0, 5, 9)
        }
        spread = max(vals) - min(vals)
        assert spread < 0.1 * max(vals)

    def test_monotone_in_exclusion_radius(self):
        gs = [
            estimate_gamma(self.f, self.sets, m * self.r, samples=5000, seed=3)
            for m in (0.5, 1.0, 1.5)
        ]
        assert gs[0] <= gs[1] <= gs[2]

    def test_epsilon_plays_no_role(self):
        f2 = attractor_example(epsilon=0.5)
        s2 = assemble_sets(f2)
        g1 = estimate_gamma(self.f, self.sets, self.r, samples=3000, seed=1)
        g2 = estimate_gamma(f2, s2, self.r, samples=3000, seed=1)
        assert g1 == g2

    def test_scales_linearly_with_r_form(self):
        # doubling R doubles every branch value and nothing else
        f2 = PencilEndo(
            self.f.P, self.f.Q, BinaryForm(2.0 * self.f.R.coeffs), self.f.epsilon
        )
        s2 = assemble_sets(f2)
        g1 = estimate_gamma(self.f, self.sets, self.r, samples=3000, seed=2)
        g2 = estimate_gamma(f2, s2, self.r, samples=3000, seed=2)
        assert g2 == pytest.approx(2.0 * g1, rel=1e-12)

    def test_oversized_radius_raises(self):
        with pytest.raises(InsufficientData):
            estimate_gamma(self.f, self.sets, 0.999, samples=50, seed=0)

    def test_degree3_path(self):
        f = generic_family(3)
        sets = assemble_sets(f)
        g = estimate_gamma(f, sets, sets.margin_r / 2, samples=20000, seed=0)
        assert g == pytest.approx(8.626218519596298e-08, rel=1e-6)


class TestPerturbationBound:
    def test_reference_value_is_exact(self):
        assert epsilon_max(1.0, 1.0, 2) == 0.0625

    def test_degree3_closed_form(self):
        # (gamma * alpha^3 / (4 beta)^3) ** (1/2)
        assert epsilon_max(2.0, 0.5, 3, 1.0) == pytest.approx(0.25, rel=1e-15)

    def test_monotone_in_gamma_and_beta(self):
        lo = epsilon_max(1.0, 0.1, 2)
        hi = epsilon_max(1.0, 0.4, 2)
        assert lo < hi
        worse = epsilon_max(1.0, 0.1, 2, beta_hi=2.0)
        assert worse < lo


class TestVerdictPlumbing:
    def test_explicit_radius_overrides_default(self):
        f = attractor_example()
        sets = assemble_sets(f)
        v1 = check_conditions(sets, f)
        v2 = check_conditions(sets, f, r=sets.margin_r / 8)
        assert v1.gamma_hat != v2.gamma_hat

    def test_frozen_gamma_and_bound_for_attractor(self):
        f = attractor_example()
        v = check_conditions(assemble_sets(f), f)
        assert v.gamma_hat == pytest.approx(0.005472146386919619, rel=1e-9)
        assert v.epsilon_max == pytest.approx(7.959690286426132e-05, rel=1e-9)

    def test_configuration_ignores_epsilon_bitwise(self):
        s1 = assemble_sets(attractor_example(epsilon=1e-3))
        s2 = assemble_sets(attractor_example(epsilon=0.25))
        for a, b in (
            (s1.x_minus1, s2.x_minus1),
            (s1.y_minus2, s2.y_minus2),
            (s1.x_set, s2.x_set),
            (s1.y_set, s2.y_set),
            (s1.z_set, s2.z_set),
            (s1.script_z, s2.script_z),
        ):
            assert len(a) == len(b)
            for p, q in zip(a, b):
                assert np.array_equal(p.coords, q.coords)
        assert s1.margin_r == s2.margin_r
