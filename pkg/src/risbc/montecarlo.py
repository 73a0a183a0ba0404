"""Monte Carlo oracle for the single- and multi-tag closed forms.

Trials are drawn in fixed-size chunks; chunk ``i`` uses the stream seeded
with ``seed ^ i``.  Results therefore depend only on (inputs, seed, trials)
and not on how many worker processes evaluate the chunks.

The single-tag sampler stores power-free gains, so one set of channel draws
serves every transmit power of a sweep (common random numbers).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import ris
from .channel import sample_amplitude, substream
from .multi_tag import (InfeasibleError, OptimizerOptions, energy_threshold,
                        optimize_phases, received_power, sinr)
from .single_tag import SystemParams

CHUNK_SIZE = 4096

OPTIMIZED = "optimized"
MULTI_POLICIES = (OPTIMIZED, ris.RANDOM, ris.NO_RIS)


def _chunks(trials, chunk):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_chunks = -(-trials // chunk)
    return [(i, min(chunk, trials - i * chunk)) for i in range(n_chunks)]


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


@dataclass(frozen=True)
class GainSamples:
    """Per-trial power-free gains: tag gain |f + g^T Theta h|^2 and reader gain |u|^2."""

    tag: np.ndarray
    reader: np.ndarray

    @property
    def trials(self):
        return self.tag.size

    @property
    def cascade(self):
        """|u| |f + g^T Theta h|, which is Lambda under co-phasing."""
        return np.sqrt(self.reader * self.tag)

    def snr(self, sys):
        return sys.gamma_bar * self.reader * self.tag

    def received_power(self, sys):
        return sys.P * self.tag


def _draw_link(p, rng, size):
    # same stream consumption as channel.sample_link: amplitudes, then phases
    amp = sample_amplitude(p.m, p.omega, rng, size=size)
    phase = rng.uniform(-math.pi, math.pi, size=size)
    return amp, phase


def _draw_chunk(job):
    links, N, eta, policy, seed, index, n = job
    rng = substream(seed, index)
    a_f, p_f = _draw_link(links.f, rng, n)
    a_u, _ = _draw_link(links.u, rng, n)
    if N == 0 or policy.kind == ris.NO_RIS:
        return a_f**2, a_u**2
    a_g, p_g = _draw_link(links.g, rng, (n, N))
    a_h, p_h = _draw_link(links.h, rng, (n, N))
    amp = eta * a_g * a_h
    if policy.kind == ris.OPTIMAL:
        # every cascaded path is co-phased with f, so the magnitudes add
        return (a_f + amp.sum(axis=-1)) ** 2, a_u**2
    phases = ris.policy_phases(policy, p_f, p_g, p_h, rng)
    # residual phase of each path relative to the direct path
    resid = p_g + p_h + phases - p_f[:, None]
    y = a_f + np.sum(amp * np.exp(1j * resid), axis=-1)
    return np.abs(y) ** 2, a_u**2


def sample_gains(links, sys: SystemParams, policy, trials, seed, chunk=CHUNK_SIZE, workers=1):
    """Draw ``trials`` channel realizations and apply ``policy`` to each."""
    eta = sys.eta_vector()
    jobs = [(links, sys.N, eta, policy, seed, i, n) for i, n in _chunks(trials, chunk)]
    parts = _map(_draw_chunk, jobs, workers)
    return GainSamples(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def fd_histogram(samples):
    """Freedman-Diaconis histogram (edges, counts) covering every sample."""
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins="fd")
    return edges, counts


@dataclass(frozen=True)
class TrialReport:
    trials: int
    mean_received_power: float
    var_received_power: float
    mean_harvested_power: float
    var_harvested_power: float
    mean_rate: float
    var_rate: float
    eo_rate: float
    outage_rate: float
    snr_outage_rate: float
    ber: float
    hist_edges: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)

    def stderr(self, name):
        return math.sqrt(getattr(self, "var_" + name) / self.trials)


def summarize(samples: GainSamples, sys: SystemParams, gamma_th=1.0):
    """Empirical counterparts of the single-tag closed forms at power ``sys.P``."""
    p_t = samples.received_power(sys)
    p_h = sys.phi * (1.0 - sys.beta) * p_t
    snr = samples.snr(sys)
    rate = np.log2(1.0 + snr)
    eo = (1.0 - sys.beta) * p_t < sys.P_b_eff
    low = snr < gamma_th
    edges, counts = fd_histogram(snr)
    return TrialReport(
        trials=samples.trials,
        mean_received_power=float(p_t.mean()), var_received_power=float(p_t.var()),
        mean_harvested_power=float(p_h.mean()), var_harvested_power=float(p_h.var()),
        mean_rate=float(rate.mean()), var_rate=float(rate.var()),
        eo_rate=float(eo.mean()), outage_rate=float((eo | low).mean()),
        snr_outage_rate=float(low.mean()),
        ber=float(special.ndtr(-np.sqrt(2.0 * snr)).mean()),
        hist_edges=edges, hist_counts=counts,
    )


def run_single_tag(links, sys, policy, trials, seed, gamma_th=1.0, chunk=CHUNK_SIZE, workers=1):
    return summarize(sample_gains(links, sys, policy, trials, seed, chunk, workers), sys, gamma_th)


class ECDF:
    """Right-continuous empirical CDF."""

    def __init__(self, samples):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("need at least one sample")
        self.x = x

    def __call__(self, r):
        out = np.searchsorted(self.x, r, side="right") / self.x.size
        return float(out) if np.ndim(out) == 0 else out


def empirical_cdf(samples):
    return ECDF(samples)


def sup_distance(samples, cdf):
    """Kolmogorov distance between the sample ECDF and the model ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    model = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - model
    lower = model - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ber_quadrature_oracle(fit, gamma_bar, lam=1.0, nu=2.0):
    """E{lam Q(sqrt(nu gamma_bar) L)} for L ~ Gamma(k, scale) with the exact Q function."""
    if gamma_bar == 0:
        return 0.5 * lam
    k, s = fit.k, fit.scale
    c = math.sqrt(nu * gamma_bar) * s
    log_norm = special.gammaln(k)

    def log_f(t):
        return special.log_ndtr(-c * t) + (k - 1.0) * math.log(t) - t - log_norm

    # locate the integrand peak on a log grid, then integrate piecewise around it
    grid = np.logspace(-12, math.log10(k + 60.0 * math.sqrt(k) + 60.0), 4000)
    vals = np.array([log_f(t) for t in grid])
    i = int(np.argmax(vals))
    peak, log_peak = grid[i], vals[i]
    width = max(peak, 1e-12)
    knots = sorted({0.0, *(x for x in (peak / 100, peak / 10, peak / 3, peak, 3 * peak, 10 * peak)),
                    peak + 20 * width, grid[-1]})
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        total += integrate.quad(lambda t: math.exp(log_f(t) - log_peak) if t > 0 else 0.0,
                                lo, hi, epsabs=0.0, epsrel=1e-11, limit=400)[0]
    return lam * math.exp(log_peak) * total


@dataclass(frozen=True)
class MultiTagReport:
    trials: int
    infeasible: int
    outage: np.ndarray        # per tag: EO or SINR below threshold
    ber: np.ndarray           # per tag mean Q(sqrt(2 SINR))
    mean_rate: np.ndarray     # per tag
    mean_sum_rate: float
    var_sum_rate: float


def _multi_job(job):
    geometry, sys, policy, options, seed, index, gamma_th = job
    rng = substream(seed, index)
    inst = geometry.sample(sys, rng)
    infeasible = False
    if policy == OPTIMIZED:
        try:
            theta = optimize_phases(inst, options).theta
        except InfeasibleError:
            infeasible = True
            relaxed = OptimizerOptions(**{**options.__dict__, "energy_constraints": False})
            theta = optimize_phases(inst, relaxed).theta
    elif policy == ris.RANDOM:
        theta = np.conj(inst.radius * np.exp(1j * rng.uniform(-math.pi, math.pi, inst.N)))
    elif policy == ris.NO_RIS:
        theta = np.zeros(inst.N, dtype=complex)
    else:
        raise ValueError(f"unknown multi-tag policy {policy!r}")
    g = sinr(inst, theta)
    eo = (received_power(inst, theta) < energy_threshold(sys)) if sys.P_b > 0 else np.zeros(inst.K, bool)
    return g, eo | (g < gamma_th), infeasible


def run_multi_tag(geometry, sys, policy, trials, seed, gamma_th=1.0, options=None, workers=1):
    """Per-tag outage and BER and the sum rate over ``trials`` channel draws.

    Draw ``i`` uses stream ``seed ^ i``.  When the activation constraints
    cannot be met the draw is counted as infeasible and the optimizer runs
    without them; the physical activation test still applies to its outage.
    """
    if policy not in MULTI_POLICIES:
        raise ValueError(f"policy must be one of {MULTI_POLICIES}")
    options = options or OptimizerOptions()
    jobs = [(geometry, sys, policy, options, seed, i, gamma_th) for i in range(trials)]
    if trials < 1:
        raise ValueError("trials must be >= 1")
    res = _map(_multi_job, jobs, workers)
    g = np.array([r[0] for r in res])
    out = np.array([r[1] for r in res])
    rates = np.log2(1.0 + g)
    sums = rates.sum(axis=1)
    return MultiTagReport(
        trials=trials, infeasible=int(sum(r[2] for r in res)),
        outage=out.mean(axis=0), ber=special.ndtr(-np.sqrt(2.0 * g)).mean(axis=0),
        mean_rate=rates.mean(axis=0), mean_sum_rate=float(sums.mean()), var_sum_rate=float(sums.var()),
    )
