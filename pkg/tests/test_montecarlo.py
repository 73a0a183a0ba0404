import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from risbc import montecarlo as mc
from risbc import single_tag as st
from risbc.channel import sample_link, substream
from risbc.config import ScenarioConfig
from risbc.figures import preset
from risbc.multi_tag import OptimizerOptions
from risbc.ris import PhasePolicy, policy_phases

mpmath.mp.dps = 30


def complex_path(links, sys, policy, trials, seed):
    """Reference sampler: build y = f + g^T Theta h from complex coefficients."""
    rng = substream(seed, 0)
    f = sample_link(links.f, rng, trials)
    u = sample_link(links.u, rng, trials)
    if sys.N == 0 or policy.kind == "none":
        return np.abs(f) ** 2, np.abs(u) ** 2
    g = sample_link(links.g, rng, (trials, sys.N))
    h = sample_link(links.h, rng, (trials, sys.N))
    phases = policy_phases(policy, np.angle(f), np.angle(g), np.angle(h), rng)
    y = f + np.sum(g * sys.eta_vector() * np.exp(1j * phases) * h, axis=1)
    return np.abs(y) ** 2, np.abs(u) ** 2


@pytest.mark.parametrize("kind,bits", [("optimal", None), ("quantized", 2), ("random", None), ("none", None)])
def test_fast_sampler_matches_complex_path(table2_links, kind, bits):
    sys = ScenarioConfig().system(N=16)
    policy = PhasePolicy(kind, bits)
    s = mc.sample_gains(table2_links, sys, policy, 500, 9, chunk=500)
    tag, reader = complex_path(table2_links, sys, policy, 500, 9)
    assert s.tag == pytest.approx(tag, rel=1e-9)
    assert s.reader == pytest.approx(reader, rel=1e-12)


def test_results_do_not_depend_on_workers(table2_links):
    sys = ScenarioConfig().system(N=8)
    a = mc.sample_gains(table2_links, sys, PhasePolicy.optimal(), 3000, 5, chunk=1000, workers=1)
    b = mc.sample_gains(table2_links, sys, PhasePolicy.optimal(), 3000, 5, chunk=1000, workers=2)
    assert np.array_equal(a.tag, b.tag) and np.array_equal(a.reader, b.reader)
    c = mc.sample_gains(table2_links, sys, PhasePolicy.optimal(), 3000, 6, chunk=1000)
    assert not np.array_equal(a.tag, c.tag)


def test_summary_statistics(table2_links):
    sys = ScenarioConfig().system()
    s = mc.sample_gains(table2_links, sys, PhasePolicy.optimal(), 20000, 2)
    rep = mc.summarize(s, sys, gamma_th=1.0)
    snr = s.snr(sys)
    assert rep.mean_rate == pytest.approx(np.mean(np.log2(1 + snr)))
    assert rep.ber == pytest.approx(np.mean(stats.norm.sf(np.sqrt(2 * snr))), rel=1e-10)
    eo = (1 - sys.beta) * s.received_power(sys) < sys.P_b / sys.phi
    assert rep.eo_rate == pytest.approx(eo.mean())
    assert rep.outage_rate >= max(rep.eo_rate, rep.snr_outage_rate)
    assert rep.hist_counts.sum() == rep.trials
    assert rep.stderr("rate") == pytest.approx(math.sqrt(rep.var_rate / rep.trials))
    assert s.cascade == pytest.approx(np.sqrt(s.reader * s.tag))


def test_ecdf_and_sup_distance(rng):
    x = rng.normal(size=5000)
    e = mc.empirical_cdf(x)
    assert e(np.inf) == 1.0 and e(-np.inf) == 0.0
    assert e(np.sort(x)[99]) == pytest.approx(100 / 5000)
    assert mc.sup_distance(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-12)
    with pytest.raises(ValueError):
        mc.ECDF([])


def test_fd_histogram(rng):
    x = rng.gamma(2.0, size=1000)
    edges, counts = mc.fd_histogram(x)
    ref_counts, ref_edges = np.histogram(x, bins="fd")
    assert np.array_equal(counts, ref_counts) and np.allclose(edges, ref_edges)


@pytest.mark.parametrize("k,scale,gb", [(3.0, 0.5, 2.0), (12.0, 0.01, 1e4), (40.0, 1e-3, 1e5)])
def test_ber_oracle_matches_mpmath(k, scale, gb):
    fit = st.GammaFit(k, scale)
    x = mpmath.sqrt(2 * gb) * scale
    f = lambda t: mpmath.erfc(x * t / mpmath.sqrt(2)) / 2 * t ** (k - 1) * mpmath.exp(-t) / mpmath.gamma(k)
    want = mpmath.quad(f, [0, k / 10, k / 3, k, 3 * k, mpmath.inf])
    assert mc.ber_quadrature_oracle(fit, gb) == pytest.approx(float(want), rel=1e-8)


def test_chunks_validation():
    assert mc._chunks(10, 4) == [(0, 4), (1, 4), (2, 2)]
    with pytest.raises(ValueError):
        mc._chunks(0, 4)


def test_multi_tag_runner():
    cfg = preset(11)
    geom, sys = cfg.geometry(), cfg.system(N=8)
    opts = OptimizerOptions(restarts=0)
    rep = mc.run_multi_tag(geom, sys, mc.OPTIMIZED, 3, 4, options=opts)
    again = mc.run_multi_tag(geom, sys, mc.OPTIMIZED, 3, 4, options=opts)
    assert rep.outage.shape == (2,) and np.array_equal(rep.outage, again.outage)
    assert rep.mean_sum_rate == pytest.approx(rep.mean_rate.sum())
    none = mc.run_multi_tag(geom, sys, "none", 3, 4)
    rand = mc.run_multi_tag(geom, sys, "random", 3, 4)
    assert rep.mean_sum_rate > none.mean_sum_rate and rand.infeasible == 0
    with pytest.raises(ValueError):
        mc.run_multi_tag(geom, sys, "bogus", 3, 4)
