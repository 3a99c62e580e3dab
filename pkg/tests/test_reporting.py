import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from fdrsmooth.densities import NullDensity, TwoGroupsFit
from fdrsmooth.reporting import bh_procedure, discoveries_at_fdr, two_groups_report


class TestDiscoveriesAtFdr:
    def test_all_certain_signals(self):
        rep = discoveries_at_fdr(np.ones(5), q=0.1)
        assert rep.discovered.all()
        assert rep.estimated_fdr == 0.0

    def test_all_half_empty_set(self):
        rep = discoveries_at_fdr(np.full(4, 0.5), q=0.1)
        assert not rep.discovered.any()
        assert rep.estimated_fdr == 0.0
        assert rep.n_discoveries == 0

    def test_prefix_means_admit_all_three(self):
        # running means 0.01, 0.02, 0.14/3 stay below q = 0.05
        rep = discoveries_at_fdr(np.array([0.99, 0.97, 0.90]), q=0.05)
        assert rep.discovered.all()
        assert rep.estimated_fdr == pytest.approx(0.14 / 3)

    def test_prefix_stops_when_mean_exceeds_budget(self):
        # running means 0.01, 0.02, 0.08: the third site breaks the budget
        rep = discoveries_at_fdr(np.array([0.99, 0.97, 0.80]), q=0.05)
        assert rep.discovered.tolist() == [True, True, False]
        assert rep.estimated_fdr == pytest.approx(0.02)

    def test_partial_prefix(self):
        # running means 0.01, 0.105: only the first site fits at q = 0.10
        rep = discoveries_at_fdr(np.array([0.99, 0.8, 0.5]), q=0.10)
        assert rep.discovered.tolist() == [True, False, False]
        assert rep.estimated_fdr == pytest.approx(0.01)

    def test_tie_block_excluded_when_it_breaks_budget(self):
        # lfdr 0, 0.18, 0.18: admitting the tie block would give mean 0.12 > q
        rep = discoveries_at_fdr(np.array([1.0, 0.82, 0.82]), q=0.10)
        assert rep.discovered.tolist() == [True, False, False]

    def test_tie_block_admitted_whole_when_budget_allows(self):
        rep = discoveries_at_fdr(np.array([1.0, 0.85, 0.85]), q=0.11)
        assert rep.discovered.tolist() == [True, True, True]

    def test_flags_follow_posterior_ordering(self, rng):
        w = rng.uniform(0, 1, 100)
        rep = discoveries_at_fdr(w, q=0.2)
        if rep.n_discoveries:
            cutoff = w[rep.discovered].min()
            assert np.all(w[~rep.discovered] < cutoff + 1e-15)

    def test_invalid_q(self):
        with pytest.raises(ValueError):
            discoveries_at_fdr(np.array([0.5]), q=0.0)
        with pytest.raises(ValueError):
            discoveries_at_fdr(np.array([0.5]), q=1.0)

    @given(data=st.data())
    @settings(max_examples=50, deadline=None)
    def test_mean_lfdr_of_reported_set_within_budget(self, data):
        n = data.draw(st.integers(1, 40))
        seed = data.draw(st.integers(0, 2**31))
        q = data.draw(st.sampled_from([0.05, 0.1, 0.3]))
        w = np.random.default_rng(seed).uniform(0, 1, n).round(2)
        rep = discoveries_at_fdr(w, q=q)
        if rep.n_discoveries:
            assert (1 - w[rep.discovered]).mean() <= q + 1e-12

    @given(data=st.data())
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariance(self, data):
        n = data.draw(st.integers(1, 30))
        seed = data.draw(st.integers(0, 2**31))
        r = np.random.default_rng(seed)
        w = r.uniform(0, 1, n).round(1)  # coarse grid forces ties
        rep = discoveries_at_fdr(w, q=0.2)
        perm = r.permutation(n)
        rep_p = discoveries_at_fdr(w[perm], q=0.2)
        assert np.array_equal(rep_p.discovered, rep.discovered[perm])

    @given(data=st.data())
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_q(self, data):
        n = data.draw(st.integers(1, 30))
        seed = data.draw(st.integers(0, 2**31))
        w = np.random.default_rng(seed).uniform(0, 1, n)
        small = discoveries_at_fdr(w, q=0.05)
        large = discoveries_at_fdr(w, q=0.2)
        assert np.all(large.discovered | ~small.discovered)


class TestBhProcedure:
    def test_single_pvalue_reduces_to_level_test(self):
        z = np.array([norm.isf(0.02)])  # two-sided p = 0.04
        rep = bh_procedure(z, NullDensity(0, 1), q=0.05)
        assert rep.discovered.tolist() == [True]
        assert rep.pvalues[0] == pytest.approx(0.04, abs=1e-12)

    def test_step_up_rule(self):
        p_targets = np.array([0.01, 0.02, 0.9])
        z = norm.isf(p_targets / 2)
        rep = bh_procedure(z, NullDensity(0, 1), q=0.05)
        assert rep.discovered.tolist() == [True, True, False]

    def test_vacuous_when_no_small_pvalues(self):
        z = np.array([0.1, -0.2, 0.5])
        rep = bh_procedure(z, NullDensity(0, 1), q=0.05)
        assert not rep.discovered.any()
        assert rep.estimated_fdr == 0.0

    def test_uses_supplied_null(self):
        z = np.array([5.0])
        wide = bh_procedure(z, NullDensity(0.0, 3.0), q=0.05)
        narrow = bh_procedure(z, NullDensity(0.0, 1.0), q=0.05)
        assert not wide.discovered[0] and narrow.discovered[0]

    def test_monotone_in_q(self, rng):
        z = rng.normal(0, 1.5, 200)
        f0 = NullDensity(0, 1)
        small = bh_procedure(z, f0, q=0.02)
        large = bh_procedure(z, f0, q=0.2)
        assert np.all(large.discovered | ~small.discovered)

    def test_null_fdp_controlled_on_average(self):
        # pure-null replicates: expected FDP = P(any rejection) * 1 <= q
        q = 0.1
        fdps = []
        master = np.random.default_rng(0)
        for _ in range(500):
            z = master.normal(size=100)
            rep = bh_procedure(z, NullDensity(0, 1), q=q)
            n_disc = rep.n_discoveries
            fdps.append(1.0 if n_disc else 0.0)
        assert np.mean(fdps) <= q + 0.02


class TestTwoGroupsReport:
    def _fit(self, c):
        class Wide:
            def pdf(self, z):
                return norm.pdf(z, scale=3.0)
        beta = np.log(c / (1 - c)) if 0 < c < 1 else -15.0
        return TwoGroupsFit(f0=NullDensity(0, 1), f1=Wide(), c=c, beta_s=beta)

    def test_tiny_prior_kills_discoveries(self, rng):
        z = rng.normal(0, 1.2, 300)
        rep = two_groups_report(z, self._fit(1e-6), q=0.1)
        assert rep.n_discoveries == 0

    def test_identical_z_all_or_nothing(self):
        z = np.full(20, 2.0)
        for c in (0.02, 0.6):
            rep = two_groups_report(z, self._fit(c), q=0.1)
            assert rep.n_discoveries in (0, 20)

    def test_method_tag(self, rng):
        rep = two_groups_report(rng.normal(size=10), self._fit(0.1), q=0.1)
        assert rep.method == "two-groups"
