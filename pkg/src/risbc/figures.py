"""Desk-scale presets that regenerate the data behind each evaluation figure.

Each preset returns CSV text in the same format as the other commands.  Trial
counts are scaled down from the original 1e5-1e8; ``trials`` overrides them.
"""

import math
from dataclasses import replace

import numpy as np
from scipy import optimize

from . import montecarlo as mc
from . import single_tag as st
from .cli import base_meta, render_csv
from .config import D_G_HYPOT, ScenarioConfig
from .ris import PhasePolicy

FIGURE_IDS = (3, 4, 6, 7, 8, 9, 10, 11, 12)

# caption geometries
FIG3 = dict(P_dbm=10.0, d_f=10.0, d_u=5.0, d_h=5.0, d_g=6.0, m_f=3.0, m_u=5.0, m_h=3.0, m_g=4.0)
FIG4 = dict(P_dbm=20.0, d_u=5.0, d_h=1.0, d_g_mode=D_G_HYPOT)
FIG8 = dict(d_f=8.0, d_u=4.0, d_h=1.0, d_g=8.0)
FIG11 = dict(d_h=2.0, tags=({"d_f": 4.0, "d_u": 5.0, "d_g": 4.5}, {"d_f": 5.0, "d_u": 5.0, "d_g": 5.4}))

DEFAULT_TRIALS = {3: 100000, 4: 10000, 6: 5000, 7: 20000, 8: 100000, 9: 100000, 10: 20000, 11: 100, 12: 100}


def preset(fig_id, seed=1, trials=None):
    base = {3: FIG3, 4: FIG4, 6: FIG4, 8: FIG8, 11: FIG11, 12: FIG11}.get(fig_id, {})
    return ScenarioConfig(**base, seed=seed, trials=trials or DEFAULT_TRIALS[fig_id])


def _sys(cfg, N, P_dbm=None):
    c = cfg if P_dbm is None else replace(cfg, P_dbm=P_dbm)
    return c.system(N=N)


def figure3(cfg, workers=1):
    """SNR distribution: Gamma and truncated-Gaussian fits against the ECDF."""
    links = cfg.links()
    header = ["N", "snr", "snr_db", "pdf_gamma", "pdf_gaussian", "cdf_gamma", "cdf_gaussian", "ecdf"]
    rows, extra = [], []
    for N in (100, 200, 400):
        sys = _sys(cfg, N)
        stats = st.cascade_moments(links, sys)
        snr = mc.sample_gains(links, sys, PhasePolicy.optimal(), cfg.trials, cfg.seed, workers=workers).snr(sys)
        ecdf = mc.empirical_cdf(snr)
        d_gamma = mc.sup_distance(snr, lambda r: st.cdf_snr(sys, stats, r, st.GAMMA))
        d_gauss = mc.sup_distance(snr, lambda r: st.cdf_snr(sys, stats, r, st.GAUSSIAN))
        extra.append((f"sup_distance N={N}", f"gamma={d_gamma:.6f} gaussian={d_gauss:.6f}"))
        lo, hi = np.quantile(snr, [0.001, 0.999])
        for r in np.linspace(lo, hi, 60):
            rows.append([N, r, 10 * math.log10(r),
                         st.pdf_snr(sys, stats, r, st.GAMMA), st.pdf_snr(sys, stats, r, st.GAUSSIAN),
                         st.cdf_snr(sys, stats, r, st.GAMMA), st.cdf_snr(sys, stats, r, st.GAUSSIAN), ecdf(r)])
    return base_meta("figure 3", cfg, extra), header, rows


def figure4(cfg, workers=1):
    """Energy-outage probability against the emitter-tag distance."""
    header = ["N", "d_f", "eo_gamma", "eo_gaussian", "mc_eo"]
    rows = []
    for N in (0, 100, 400):
        for d_f in np.arange(1.0, 41.0, 1.0):
            c = replace(cfg, d_f=float(d_f))
            sys, links = c.system(N=N), c.links()
            stats = st.cascade_moments(links, sys)
            rep = mc.run_single_tag(links, sys, PhasePolicy.optimal(), cfg.trials, cfg.seed, workers=workers)
            rows.append([N, d_f, st.eo_probability(sys, stats, st.GAMMA),
                         st.eo_probability(sys, stats, st.GAUSSIAN), rep.eo_rate])
    return base_meta("figure 4", cfg), header, rows


def mean_received_power(cfg, N, policy="optimal"):
    sys, links = cfg.system(N=N), cfg.links()
    if policy == "random":
        return st.avg_received_power_random(links, sys)
    return st.avg_received_power(sys, st.cascade_moments(links, sys))


def activation_distance(cfg, N, policy="optimal", threshold_dbm=-20.0, d_max=500.0):
    """Largest d_f at which the mean tag power still reaches the threshold."""
    thr = float(st.dbm_to_watt(threshold_dbm))

    def excess(d):
        return math.log(mean_received_power(replace(cfg, d_f=d), N, policy) / thr)

    if excess(1.0) < 0:
        return 0.0
    if excess(d_max) >= 0:
        return math.inf
    return optimize.brentq(excess, 1.0, d_max, xtol=1e-10)


def figure6(cfg, workers=1):
    """Mean tag received power against d_f, with activation distances."""
    header = ["N", "policy", "d_f", "rx_power_dbm", "mc_rx_power_dbm"]
    rows, extra = [], []
    for N in (0, 100, 400):
        for pol in ("optimal", "random"):
            if N == 0 and pol == "random":
                continue
            for d_f in np.arange(1.0, 41.0, 1.0):
                c = replace(cfg, d_f=float(d_f))
                sys, links = c.system(N=N), c.links()
                rep = mc.run_single_tag(links, sys, PhasePolicy(pol), cfg.trials, cfg.seed, workers=workers)
                rows.append([N, pol, d_f, float(st.watt_to_dbm(mean_received_power(c, N, pol))),
                             float(st.watt_to_dbm(rep.mean_received_power))])
            extra.append((f"activation_distance N={N} {pol}", f"{activation_distance(cfg, N, pol):.4f} m"))
    return base_meta("figure 6", cfg, extra), header, rows


def figure7(cfg, workers=1):
    """Rate-bound gain over the no-RIS link against N."""
    header = ["P_dbm", "N", "R_ub", "rate_gain", "mc_rate_gain"]
    links = cfg.links()
    rows = []
    for P in (0.0, 10.0, 20.0, 30.0):
        base_sys = _sys(cfg, 0, P)
        base_ub = st.rate_bounds(base_sys, st.cascade_moments(links, base_sys))[1]
        base_mc = mc.run_single_tag(links, base_sys, PhasePolicy.optimal(), cfg.trials, cfg.seed).mean_rate
        for N in range(0, 401, 50):
            sys = _sys(cfg, N, P)
            ub = st.rate_bounds(sys, st.cascade_moments(links, sys))[1]
            rate = mc.run_single_tag(links, sys, PhasePolicy.optimal(), cfg.trials, cfg.seed,
                                     workers=workers).mean_rate
            rows.append([P, N, ub, ub - base_ub, rate - base_mc])
    return base_meta("figure 7", cfg), header, rows


def figure8(cfg, workers=1):
    """Outage against transmit power; Monte Carlo shares channel draws across powers."""
    header = ["N", "P_dbm", "outage_gamma", "outage_literal", "outage_gaussian", "mc_outage",
              "eo_gamma", "mc_eo", "snr_outage_gamma", "mc_snr_outage", "outage_inf"]
    links = cfg.links()
    rows = []
    for N in (0, 100, 200):
        samples = mc.sample_gains(links, _sys(cfg, N), PhasePolicy.optimal(), cfg.trials, cfg.seed,
                                  workers=workers)
        for P in np.arange(20.0, 51.0, 2.0):
            sys = _sys(cfg, N, float(P))
            stats = st.cascade_moments(links, sys)
            rep = mc.summarize(samples, sys, cfg.gamma_th)
            g = cfg.gamma_th
            rows.append([N, P,
                         st.outage_probability(sys, stats, g, st.EO_ACTIVATION),
                         st.outage_probability(sys, stats, g, st.EO_LITERAL),
                         st.outage_probability(sys, stats, g, st.EO_ACTIVATION, st.GAUSSIAN),
                         rep.outage_rate, st.eo_probability(sys, stats), rep.eo_rate,
                         st.cdf_snr(sys, stats, g), rep.snr_outage_rate,
                         st.asymptotics(links, sys, stats, g).outage])
    return base_meta("figure 8", cfg), header, rows


def figure9(cfg, workers=1):
    """BPSK BER against transmit power."""
    header = ["N", "P_dbm", "ber_gamma", "ber_method", "ber_gaussian", "ber_exact_q", "mc_ber", "ber_inf"]
    links = cfg.links()
    rows = []
    for N in (0, 100, 200, 400):
        samples = mc.sample_gains(links, _sys(cfg, N), PhasePolicy.optimal(), cfg.trials, cfg.seed,
                                  workers=workers)
        for P in np.arange(-10.0, 31.0, 2.0):
            sys = _sys(cfg, N, float(P))
            stats = st.cascade_moments(links, sys)
            ber, method = st.avg_ber_detail(sys, stats)
            rows.append([N, P, ber, method, st.avg_ber(sys, stats, st.GAUSSIAN),
                         mc.ber_quadrature_oracle(stats.fit("L"), sys.gamma_bar),
                         mc.summarize(samples, sys).ber, st.asymptotics(links, sys, stats).ber])
    return base_meta("figure 9", cfg), header, rows


def figure10(cfg, workers=1):
    """Quantized over continuous rate bound, with the Monte Carlo rate ratio."""
    header = ["N", "bits", "P_dbm", "ratio", "mc_ratio"]
    links = cfg.links()
    rows = []
    for N in (100, 400):
        cont = mc.sample_gains(links, _sys(cfg, N), PhasePolicy.optimal(), cfg.trials, cfg.seed, workers=workers)
        for D in (1, 2, 4):
            quant = mc.sample_gains(links, _sys(cfg, N), PhasePolicy.quantized(D), cfg.trials, cfg.seed,
                                    workers=workers)
            for P in np.arange(0.0, 31.0, 5.0):
                sys = _sys(cfg, N, float(P))
                rows.append([N, D, P, st.rate_ratio(links, sys, D),
                             mc.summarize(quant, sys).mean_rate / mc.summarize(cont, sys).mean_rate])
    return base_meta("figure 10", cfg), header, rows


MULTI_CASES = (("optimized", 100), ("optimized", 200), ("random", 100), ("none", 0))


def multi_tag_sweep(cfg, workers=1):
    geom = cfg.geometry()
    out = []
    for policy, N in MULTI_CASES:
        for P in np.arange(20.0, 41.0, 5.0):
            sys = _sys(replace(cfg, policy="none" if policy == "none" else "optimal"), N, float(P))
            rep = mc.run_multi_tag(geom, sys, policy, cfg.trials, cfg.seed, cfg.gamma_th, workers=workers)
            out.append((policy, N, P, rep))
    return out


def figure11(cfg, workers=1):
    header = ["policy", "N", "P_dbm", "outage_0", "outage_1", "infeasible", "mc_sum_rate"]
    rows = [[pol, N, P, r.outage[0], r.outage[1], r.infeasible, r.mean_sum_rate]
            for pol, N, P, r in multi_tag_sweep(cfg, workers)]
    return base_meta("figure 11", cfg), header, rows


def figure12(cfg, workers=1):
    header = ["policy", "N", "P_dbm", "ber_0", "ber_1", "infeasible"]
    rows = [[pol, N, P, r.ber[0], r.ber[1], r.infeasible]
            for pol, N, P, r in multi_tag_sweep(cfg, workers)]
    return base_meta("figure 12", cfg), header, rows


BUILDERS = {3: figure3, 4: figure4, 6: figure6, 7: figure7, 8: figure8, 9: figure9,
            10: figure10, 11: figure11, 12: figure12}


def render_figure(fig_id, seed=None, trials=None, workers=1):
    if fig_id not in BUILDERS:
        raise KeyError(f"unknown figure {fig_id}; choose from {FIGURE_IDS}")
    cfg = preset(fig_id, seed=1 if seed is None else seed, trials=trials)
    meta, header, rows = BUILDERS[fig_id](cfg, workers)
    return render_csv(meta, header, rows)
