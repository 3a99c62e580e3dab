import math

import numpy as np
import pytest
from scipy.stats import laplace, norm

from fdrsmooth.graphs import count_plateaus
from fdrsmooth.simulate import (ALTERNATIVES, GaussianMixtureSignal, LaplaceSignal,
                                PriorImage, aggregate_metrics, compute_metrics,
                                make_prior_image, oracle_report, run_experiment, simulate)

from oracles import convolve_with_unit_gaussian


class TestPriorImages:
    def test_toy1d_has_500_elevated_sites(self):
        prior = make_prior_image("toy1d", 1, 5000)
        assert prior.c.size == 5000
        assert (prior.c == 0.5).sum() == 500
        assert (prior.c == 0.02).sum() == 4500
        # 1-indexed sites 1501..2000
        assert prior.c[1500] == 0.5 and prior.c[1999] == 0.5
        assert prior.c[1499] == 0.02 and prior.c[2000] == 0.02

    def test_large_scenario_has_three_plateaus(self):
        prior = make_prior_image("large", 128, 128)
        assert sorted(np.unique(prior.c)) == [0.05, 0.5, 0.8]
        ps = count_plateaus(prior.c, prior.graph, eps=1e-6)
        assert len(ps) == 3

    def test_large_square_sides_quarter_of_grid(self):
        prior = make_prior_image("large", 128, 128)
        assert (prior.c == 0.8).sum() == 32 * 32
        assert (prior.c == 0.5).sum() == 32 * 32

    def test_small_square_sides_tenth_of_grid(self):
        prior = make_prior_image("small", 128, 128)
        assert (prior.c == 0.8).sum() == 13 * 13
        assert (prior.c == 0.5).sum() == 13 * 13

    def test_background_mass(self):
        prior = make_prior_image("large", 64, 64)
        background = prior.c == 0.05
        assert prior.c[background].sum() == pytest.approx(0.05 * background.sum())

    def test_unknown_scenario(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            make_prior_image("mystery", 64, 64)

    def test_toy1d_requires_exact_shape(self):
        with pytest.raises(ValueError):
            make_prior_image("toy1d", 1, 400)


class TestSignalDistributions:
    def test_gaussian_mixture_marginal_matches_quadrature(self):
        alt = ALTERNATIVES["alt1"]
        z = np.array([-3.0, -1.0, 0.0, 2.5, 4.0])
        mix_pdf = lambda t: (0.5 * norm.pdf(t, -2.5, 0.5) + 0.5 * norm.pdf(t, 2.5, 0.5))
        ref = convolve_with_unit_gaussian(mix_pdf, z)
        assert np.allclose(alt.marginal_pdf(z), ref, rtol=1e-7, atol=1e-12)

    def test_laplace_marginal_matches_quadrature(self):
        alt = ALTERNATIVES["alt3"]
        z = np.array([-6.0, -2.0, 0.0, 1.0, 3.0, 8.0])
        ref = convolve_with_unit_gaussian(lambda t: laplace.pdf(t, scale=1.0), z)
        assert np.allclose(alt.marginal_pdf(z), ref, rtol=1e-7, atol=1e-12)

    def test_marginals_integrate_to_one(self):
        grid = np.linspace(-30, 30, 12001)
        for name, alt in ALTERNATIVES.items():
            mass = np.trapezoid(alt.marginal_pdf(grid), grid)
            assert mass == pytest.approx(1.0, abs=1e-6), name

    def test_samples_match_distribution_moments(self, rng):
        alt = ALTERNATIVES["alt2"]
        draws = alt.sample(rng, 200_000)
        assert abs(draws.mean()) < 0.02
        assert abs(draws.std() - 2.0) < 0.02

    def test_toy_alternative_is_overdispersed_normal(self):
        alt = ALTERNATIVES["toy"]
        z = np.linspace(-8, 8, 33)
        assert np.allclose(alt.marginal_pdf(z), norm.pdf(z, scale=3.0), rtol=1e-9)


class TestSimulate:
    def test_null_prior_gives_standard_normal(self):
        prior = PriorImage(c=np.zeros(5000), scenario="custom", rows=1, cols=5000)
        data = simulate(prior, ALTERNATIVES["alt1"], seed=3)
        assert not data.h.any()
        assert np.all(data.theta == 0)
        assert abs(data.z.mean()) < 0.05 and abs(data.z.std() - 1.0) < 0.05

    def test_all_signal_point_mass(self):
        prior = PriorImage(c=np.ones(4000), scenario="custom", rows=1, cols=4000)
        point = GaussianMixtureSignal(means=(2.0,), sds=(0.0,), weights=(1.0,))
        data = simulate(prior, point, seed=4)
        assert data.h.all()
        assert np.all(data.theta == 2.0)
        assert abs(data.z.mean() - 2.0) < 0.06

    def test_signal_fraction_within_three_sds(self):
        prior = make_prior_image("large", 64, 64)
        data = simulate(prior, ALTERNATIVES["alt1"], seed=5)
        expected = prior.c.sum()
        sd = math.sqrt((prior.c * (1 - prior.c)).sum())
        assert abs(data.h.sum() - expected) <= 3 * sd

    def test_seed_reproducibility(self):
        prior = make_prior_image("small", 32, 32)
        d1 = simulate(prior, ALTERNATIVES["alt4"], seed=11)
        d2 = simulate(prior, ALTERNATIVES["alt4"], seed=11)
        assert np.array_equal(d1.z, d2.z) and np.array_equal(d1.h, d2.h)

    def test_nulls_are_exactly_zero_mean(self):
        prior = make_prior_image("large", 32, 32)
        data = simulate(prior, ALTERNATIVES["alt2"], seed=6)
        assert np.all(data.theta[~data.h] == 0.0)


class TestOracle:
    def test_point_mass_at_zero_reduces_to_prior(self):
        prior = PriorImage(c=np.full(200, 0.3), scenario="custom", rows=1, cols=200)
        degenerate = GaussianMixtureSignal(means=(0.0,), sds=(0.0,), weights=(1.0,))
        data = simulate(prior, degenerate, seed=7)
        rep = oracle_report(data, prior, degenerate, q=0.2)
        assert np.allclose(rep.w, 0.3)

    def test_oracle_mean_fdp_near_q(self):
        q = 0.10
        fdps, tprs = [], []
        for seed in range(20):
            prior = make_prior_image("large", 32, 32)
            data = simulate(prior, ALTERNATIVES["alt1"], seed=seed)
            rep = oracle_report(data, prior, ALTERNATIVES["alt1"], q=q)
            tpr, fdp = compute_metrics(rep.discovered, data.h)
            fdps.append(fdp)
            tprs.append(tpr)
        assert abs(np.mean(fdps) - q) < 0.04
        assert np.mean(tprs) > 0.3


class TestMetrics:
    def test_no_discoveries_zero_fdp(self):
        tpr, fdp = compute_metrics(np.zeros(5, dtype=bool), np.ones(5, dtype=bool))
        assert (tpr, fdp) == (0.0, 0.0)

    def test_no_signals_zero_tpr(self):
        tpr, fdp = compute_metrics(np.ones(5, dtype=bool), np.zeros(5, dtype=bool))
        assert (tpr, fdp) == (0.0, 1.0)

    def test_mixed_counts(self):
        discovered = np.array([True, True, False, False])
        truth = np.array([True, False, True, False])
        tpr, fdp = compute_metrics(discovered, truth)
        assert tpr == 0.5 and fdp == 0.5


class TestRunExperiment:
    def test_bh_only_smoke(self):
        rows = run_experiment("large", "alt1", replicates=2, q=0.1,
                              methods=("bh",), rows=32, cols=32, seed=0)
        assert len(rows) == 2
        assert all(r.method == "bh" and r.error is None for r in rows)

    def test_unknown_alternative_rejected(self):
        with pytest.raises(ValueError, match="unknown alternative"):
            run_experiment("large", "nope", replicates=1, q=0.1, methods=("bh",))

    def test_reproducible_metrics(self):
        kw = dict(replicates=2, q=0.1, methods=("bh", "oracle"), rows=32, cols=32, seed=5)
        r1 = run_experiment("large", "alt1", **kw)
        r2 = run_experiment("large", "alt1", **kw)
        assert [(m.method, m.tpr, m.fdp) for m in r1] == [(m.method, m.tpr, m.fdp) for m in r2]

    def test_cross_of_scenarios_and_alternatives(self):
        rows = run_experiment(["large", "small"], ["alt1", "alt2"], replicates=1,
                              q=0.1, methods=("bh",), rows=32, cols=32, seed=1)
        combos = {(r.scenario, r.alternative) for r in rows}
        assert combos == {("large", "alt1"), ("large", "alt2"),
                          ("small", "alt1"), ("small", "alt2")}

    def test_aggregate_shape(self):
        rows = run_experiment("large", "alt1", replicates=3, q=0.1,
                              methods=("bh", "oracle"), rows=32, cols=32, seed=2)
        table = aggregate_metrics(rows)
        assert len(table) == 2
        for entry in table:
            assert entry["replicates"] == 3 and entry["failures"] == 0
            assert 0.0 <= entry["mean_fdp"] <= 1.0

    def test_parallel_matches_serial(self):
        kw = dict(replicates=2, q=0.1, methods=("bh",), rows=16, cols=16, seed=9)
        serial = run_experiment("large", "alt1", n_jobs=1, **kw)
        parallel = run_experiment("large", "alt1", n_jobs=2, **kw)
        assert [(m.replicate, m.tpr, m.fdp) for m in serial] == \
            [(m.replicate, m.tpr, m.fdp) for m in parallel]
