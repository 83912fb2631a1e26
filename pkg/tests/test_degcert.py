"""Preimage counting and small-topological-degree certificates.

ORACLES
-------
Invariant-line enumeration for the map [z^2 : w^2 : t^2 + eps z^2]:
the line w = 0 is totally invariant (base preimages of [1:0] are [1:0]
doubled), so counting reduces to the scalar recursion t <- t^2 + eps in
the z = 1 chart. Backward itineraries from the attracting fixed point
tau = (1 - sqrt(1-4 eps))/2 are t_{k+1} = +-sqrt(t_k - eps); each tree
node carries base multiplicity 2 per level. Direct enumeration at
eps = 1e-3, rho from the collar certificate, depth 3:
    leaves with |t_3| < rho                  : 2  -> weighted 16
    of those, with |sqrt(t_3 - eps)| < rho   : 1  -> weighted  8
so the collar count is 16 and the image count is 8 = d^3, reaching the
threshold d^m = 8 and falsifying small degree. The power map eps = 0
keeps the whole tree on {t = 0}: every count is the full d^{2m}.

Forward-chain guarantee: if x = f^{m+1}(u) with u in the collar, then
f^m maps f(u) to x and f(u) lies in the image region, so the m-fold
image-region count of x is at least 1 whenever the fiber scales are
resolvable in double precision.
"""

import itertools

import numpy as np
import pytest

from attracting_kit.degcert import (
    DegreeCertificate,
    asymptotic_rate,
    certify,
    count_preimages_in,
)
from attracting_kit.degcert import _near_critical_value
from attracting_kit.errors import BudgetExceeded
from attracting_kit.families import (
    attractor_example,
    power_map,
    simplified_condition_example,
)
from attracting_kit.pencilmap import PencilEndo, apply
from attracting_kit.projgeom import BinaryForm, ProjPoint
from attracting_kit.specialsets import assemble_sets, check_conditions
from attracting_kit.trapping import certify_trapping, sample_attractor

from _support import pt


@pytest.fixture(scope="module")
def attractor_setup():
    f0 = attractor_example()
    verdict = check_conditions(assemble_sets(f0), f0)
    f = attractor_example(epsilon=min(verdict.epsilon_max / 2, 1e-3))
    cert = certify_trapping(f, epsilon_bound=verdict.epsilon_max)
    return f, cert.rho, verdict.epsilon_max


@pytest.fixture(scope="module")
def nonexample_setup():
    f = PencilEndo(
        BinaryForm([0, 0, 1]), BinaryForm([1, 0, 0]), BinaryForm([0, 0, 1]), 1e-3
    )
    rho = certify_trapping(f, epsilon_bound=1.0).rho
    return f, rho


class TestCountOracle:
    def test_invariant_line_counts_match_scalar_recursion(self, nonexample_setup):
        f, rho = nonexample_setup
        eps = float(np.real(f.epsilon))
        tau = (1 - np.sqrt(1 - 4 * eps)) / 2
        x = pt(1.0, 0.0, tau)

        leaves = []
        for signs in itertools.product([1, -1], repeat=3):
            t = tau + 0j
            for s in signs:
                t = s * np.sqrt(t - eps)
            leaves.append(t)
        collar_weighted = 8 * sum(1 for t in leaves if abs(t) < rho)
        image_weighted = 8 * sum(
            1
            for t in leaves
            if abs(t) < rho and abs(np.sqrt(t - eps)) < rho
        )
        assert collar_weighted == 16
        assert image_weighted == 8

        assert count_preimages_in(f, x, 3, rho, region="collar") == collar_weighted
        assert count_preimages_in(f, x, 3, rho, region="image") == image_weighted
        assert count_preimages_in(f, x, 3, rho, region="all") == 64

    def test_unconstrained_equals_topological_degree(self, attractor_setup):
        f, rho, _ = attractor_setup
        rng = np.random.default_rng(2)
        for _ in range(100):
            g = rng.standard_normal(6)
            x = ProjPoint([g[0] + 1j * g[1], g[2] + 1j * g[3], g[4] + 1j * g[5]])
            assert count_preimages_in(f, x, 2, rho, region="all") == 16

    def test_monotone_region_nesting(self, attractor_setup):
        f, rho, _ = attractor_setup
        for x in sample_attractor(f, rho, burn=4, keep=15, seed=5):
            ci = count_preimages_in(f, x, 3, rho, region="image")
            cc = count_preimages_in(f, x, 3, rho, region="collar")
            assert ci <= cc <= 64

    def test_forward_chain_guarantees_a_member(self):
        g = simplified_condition_example()
        f = PencilEndo(g.P, g.Q, g.R, 1e-3)
        rho = certify_trapping(f, epsilon_bound=1.0).rho
        u = sample_attractor(f, rho, burn=0, keep=1, seed=4)[0]
        x = apply(f, apply(f, apply(f, u)))
        assert count_preimages_in(f, x, 2, rho, region="image") >= 1

    def test_center_casework(self, attractor_setup):
        f, rho, _ = attractor_setup
        center = pt(0, 0, 1)
        assert count_preimages_in(f, center, 2, rho, region="all") == 16
        assert count_preimages_in(f, center, 2, rho, region="collar") == 0

    def test_budget_guard(self, attractor_setup):
        f, rho, _ = attractor_setup
        with pytest.raises(BudgetExceeded):
            count_preimages_in(f, pt(1, 1, 0), 3, rho, budget=10)


class TestCertify:
    def test_attractor_certifies_small_degree(self, attractor_setup):
        f, rho, _ = attractor_setup
        cert = certify(f, rho, m=3, samples=40, seed=0)
        assert cert.verdict
        assert cert.max_count <= 4 < 8 == cert.threshold
        assert 1 <= cert.dt_one_step <= 4
        assert cert.samples == 40
        assert cert.iterate_m == 3

    def test_simplified_family_two_step_certificate(self):
        # resolvable perturbation: trapping slack is positive and the
        # fiber scales stay well above double-precision noise
        g = simplified_condition_example()
        f = PencilEndo(g.P, g.Q, g.R, 1e-3)
        rho = certify_trapping(f, epsilon_bound=1.0).rho
        cert = certify(f, rho, m=2, samples=40, seed=0)
        assert cert.verdict
        assert cert.threshold == 4
        assert 1 <= cert.max_count <= 3

    def test_simplified_family_refuses_at_subresolvable_scale(self):
        # at the certified genericity bound the perturbation is ~1e-10
        # and backward fiber values live at ~1e-20, below double
        # resolution; once a sampled chain trips the undecidable-
        # membership guard, the conservative count reaches the
        # threshold and certification is refused rather than
        # undercounted (deterministic for this seeded configuration)
        g = simplified_condition_example()
        verdict = check_conditions(assemble_sets(g), g)
        f = PencilEndo(g.P, g.Q, g.R, min(verdict.epsilon_max / 2, 1e-3))
        assert abs(f.epsilon) < 1e-9
        rho = certify_trapping(f, epsilon_bound=verdict.epsilon_max).rho
        cert = certify(f, rho, m=2, samples=50, seed=0)
        assert not cert.verdict
        assert cert.max_count == cert.threshold == 4
        assert cert.dt_one_step == 2

    def test_nonexample_reaches_threshold(self, nonexample_setup):
        f, rho = nonexample_setup
        cert = certify(f, rho, m=3, samples=25, seed=0)
        assert not cert.verdict
        assert cert.max_count >= 8 == cert.threshold
        # samples sit near but not exactly on the line, so the doubled
        # base branch splits and four distinct preimages stay inside
        assert cert.dt_one_step == 4

    def test_power_map_full_degree_for_all_m(self):
        f = power_map(2, epsilon=0.0)
        for m in (2, 3):
            cert = certify(f, 0.5, m=m, samples=15, seed=0)
            assert not cert.verdict
            assert cert.max_count == 4**m
            # after the short burn the fiber value has not collapsed
            # yet, so both fiber square roots are distinct collar
            # points over each of the two base branches
            assert cert.dt_one_step == 4

    def test_worst_point_reproduces_max_count(self, attractor_setup):
        f, rho, _ = attractor_setup
        cert = certify(f, rho, m=3, samples=30, seed=1)
        again = count_preimages_in(
            f, cert.worst_point, 3, rho, region="image"
        )
        assert again == cert.max_count

    def test_seed_determinism(self, attractor_setup):
        f, rho, _ = attractor_setup
        a = certify(f, rho, m=2, samples=25, seed=9)
        b = certify(f, rho, m=2, samples=25, seed=9)
        assert a == b

    def test_intermediate_pruning_reported_and_bounded(self, attractor_setup):
        f, rho, _ = attractor_setup
        cert = certify(f, rho, m=3, samples=10, seed=0, prune_intermediate=True)
        assert cert.max_count_pruned is not None
        assert cert.max_count_pruned <= cert.max_count
        plain = certify(f, rho, m=3, samples=10, seed=0)
        assert plain.max_count_pruned is None
        assert plain.max_count == cert.max_count


class TestCriticalValueFilter:
    def test_invariant_line_point_is_flagged(self, nonexample_setup):
        from attracting_kit.precision import DEFAULT

        f, _ = nonexample_setup
        assert _near_critical_value(f, pt(1.0, 0.0, 0.001), DEFAULT)

    def test_generic_attractor_point_is_clean(self, attractor_setup):
        from attracting_kit.precision import DEFAULT

        f, rho, _ = attractor_setup
        x = sample_attractor(f, rho, burn=4, keep=1, seed=0)[0]
        assert not _near_critical_value(f, x, DEFAULT)


class TestAsymptoticRate:
    def test_first_entry_is_one_step_count(self):
        f = attractor_example(epsilon=1e-3)
        rho = certify_trapping(f, epsilon_bound=1.0).rho
        cert = certify(f, rho, m=3, samples=20, seed=0)
        rates = asymptotic_rate(f, rho, cert.worst_point, 4)
        assert rates[0][0] == 1
        assert rates[0][1] == count_preimages_in(
            f, cert.worst_point, 1, rho, region="collar", weighted=False
        )

    def test_three_step_rate_consistent_with_certificate(self):
        f = attractor_example(epsilon=1e-3)
        rho = certify_trapping(f, epsilon_bound=1.0).rho
        cert = certify(f, rho, m=3, samples=20, seed=0)
        rates = dict(asymptotic_rate(f, rho, cert.worst_point, 3))
        # certified 3-step count <= d^2 means the n=3 entry is at most
        # (d^2)^{1/3} up to the sampling margin
        assert rates[3] <= (4.0) ** (1.0 / 3.0) * 1.1
        assert all(v <= 4.0 + 1e-12 for v in rates.values())

    def test_power_map_rate_is_d_on_the_line(self):
        # the invariant line contributes exactly d distinct preimages
        # per step, so every normalized count equals d
        f = power_map(2, epsilon=0.0)
        rates = asymptotic_rate(f, 0.5, pt(0.3 + 0.1j, 1.0, 0.0), 4)
        for n, v in rates:
            assert v == pytest.approx(2.0, rel=1e-12)

    def test_budget_guard(self):
        f = attractor_example(epsilon=1e-3)
        with pytest.raises(BudgetExceeded):
            asymptotic_rate(f, 0.01, pt(1, 1, 0), 12, budget=10**5)
