"""Closed-form analysis of the single-tag RIS-assisted bistatic link.

The received envelope at the tag under co-phased RIS elements is
``Y = alpha_f + X`` with ``X = sum_n eta_n alpha_gn alpha_hn``; the reader
sees ``Lambda = alpha_u * Y`` and the SNR is ``gamma_bar * Lambda**2``.
``Y`` and ``Lambda`` are moment-matched to Gamma (default) or truncated
Gaussian laws and every metric below is evaluated from those fits.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from . import specfun
from .channel import LinkParams, Moments
from .ris import DEFAULT_ETA, quantization_halfwidth

BPSK_LAMBDA = 1.0
BPSK_NU = 2.0

GAMMA = "gamma"
GAUSSIAN = "gaussian"
FIT_KINDS = (GAMMA, GAUSSIAN)

EO_ACTIVATION = "activation"
EO_LITERAL = "literal"


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def noise_power_dbm(bandwidth_hz=10e6, noise_figure_db=10.0, n0_dbm_hz=-174.0):
    return n0_dbm_hz + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


@dataclass(frozen=True)
class SystemParams:
    """Scenario-wide constants.  Powers are in watts.

    ``eta`` is either a scalar applied to every element or a length-N tuple.
    ``N = 0`` models the link without a RIS.
    """

    P: float
    beta: float = 0.6
    phi: float = 0.8
    eta: object = DEFAULT_ETA
    N: int = 100
    noise: float = float(dbm_to_watt(noise_power_dbm()))
    P_b: float = float(dbm_to_watt(-20.0))

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("transmit power must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("reflection fraction beta must lie in (0, 1)")
        if not 0 < self.phi <= 1:
            raise ValueError("conversion efficiency phi must lie in (0, 1]")
        if self.N < 0:
            raise ValueError("element count must be >= 0")
        if not self.noise > 0:
            raise ValueError("noise power must be positive")
        if self.P_b < 0:
            raise ValueError("activation threshold must be >= 0")
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim > 0:
            if eta.shape != (self.N,):
                raise ValueError(f"eta has {eta.size} entries for N={self.N}")
            object.__setattr__(self, "eta", tuple(float(e) for e in eta))
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError("passive RIS amplitudes must lie in (0, 1]")

    @property
    def gamma_bar(self):
        return self.P * self.beta / self.noise

    @property
    def P_b_eff(self):
        """Received-power threshold after the linear harvester, P_b / phi."""
        return self.P_b / self.phi

    def eta_vector(self):
        return np.broadcast_to(np.asarray(self.eta, dtype=float), (self.N,)).copy()

    def uniform_eta(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim and not np.allclose(eta, eta[0]):
            raise ValueError("this expression assumes identical element amplitudes")
        return float(eta.flat[0]) if eta.ndim else float(eta)

    def with_power(self, P):
        return replace(self, P=float(P))

    def with_elements(self, N):
        eta = self.eta if np.ndim(self.eta) == 0 else self.eta[0]
        return replace(self, N=int(N), eta=eta)


@dataclass(frozen=True)
class SingleTagLinks:
    """Emitter-tag ``f``, tag-reader ``u``, RIS-tag ``g`` and emitter-RIS ``h``."""

    f: LinkParams
    u: LinkParams
    g: LinkParams
    h: LinkParams


@dataclass(frozen=True)
class GammaFit:
    k: float
    scale: float

    @property
    def mean(self):
        return self.k * self.scale

    @property
    def var(self):
        return self.k * self.scale**2

    def raw_moment(self, order):
        return math.exp(order * math.log(self.scale)
                        + specfun.ln_gamma(self.k + order) - specfun.ln_gamma(self.k))

    def cdf(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return specfun.gamma_lower_reg(self.k, r / self.scale)

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            log_pdf = ((self.k - 1.0) * np.log(r) - r / self.scale
                       - specfun.ln_gamma(self.k) - self.k * math.log(self.scale))
        out = np.where(r > 0, np.exp(log_pdf), 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncGaussFit:
    mu: float
    var: float
    psi: float

    @property
    def sigma(self):
        return math.sqrt(self.var)

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        out = 1.0 - self.psi * specfun.q_function((r - self.mu) / self.sigma)
        out = np.where(r >= 0, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        dens = self.psi / math.sqrt(2 * math.pi * self.var) * np.exp(-(r - self.mu) ** 2 / (2 * self.var))
        out = np.where(r >= 0, dens, 0.0)
        return float(out) if out.ndim == 0 else out


def fit_gamma(mean, var):
    if not (mean > 0 and var > 0):
        raise ValueError(f"Gamma fit needs positive mean and variance, got {mean}, {var}")
    return GammaFit(k=mean * mean / var, scale=var / mean)


def fit_trunc_gaussian(mean, var):
    if not (mean > 0 and var > 0):
        raise ValueError(f"Gaussian fit needs positive mean and variance, got {mean}, {var}")
    sigma = math.sqrt(var)
    return TruncGaussFit(mu=mean, var=var, psi=1.0 / specfun.q_function(-mean / sigma))


@dataclass(frozen=True)
class CascadeStats:
    """First and second order statistics of X, Y = alpha_f + X and Lambda = alpha_u Y.

    ``mu_XR``/``var_XR``/``var_XI`` describe the real and imaginary parts of
    the cascade under uniform phase errors; without quantization they equal
    ``mu_X``/``var_X``/0.  Lambda's raw 2nd and 4th moments come from its
    Gamma fit.
    """

    f: Moments
    u: Moments
    mu_X: float
    var_X: float
    mu_XR: float
    var_XR: float
    var_XI: float
    mu_Y: float
    var_Y: float
    mu_L: float
    var_L: float
    raw2_L: float
    raw4_L: float
    bits: int = None
    _fits: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def raw2_Y(self):
        return self.var_Y + self.mu_Y**2

    @property
    def mu_XI(self):
        return 0.0

    def fit(self, which="L", kind=GAMMA):
        """Moment-matched law of ``Y`` or ``L`` (Lambda)."""
        if kind not in FIT_KINDS:
            raise ValueError(f"fit kind must be one of {FIT_KINDS}")
        key = (which, kind)
        if key not in self._fits:
            if which == "Y":
                mean, var = self.mu_Y, self.var_Y
            elif which == "L":
                mean, var = self.mu_L, self.var_L
            else:
                raise ValueError("which must be 'Y' or 'L'")
            self._fits[key] = fit_gamma(mean, var) if kind == GAMMA else fit_trunc_gaussian(mean, var)
        return self._fits[key]

    @property
    def k_L(self):
        return self.fit("L").k

    @property
    def lam_L(self):
        return self.fit("L").scale


def cascade_moments(links: SingleTagLinks, sys: SystemParams, bits=None):
    """Moments of the co-phased cascade, optionally with D-bit phase errors."""
    mf, mu, mg, mh = (links.f.moments(), links.u.moments(),
                      links.g.moments(), links.h.moments())
    eta = sys.eta_vector()
    mean_n = eta * mg.mean * mh.mean
    raw2_n = eta**2 * mg.raw2 * mh.raw2
    mu_X = float(mean_n.sum())
    var_X = float((raw2_n - mean_n**2).sum())

    if bits is None:
        mu_XR, var_XR, var_XI = mu_X, var_X, 0.0
    else:
        tau = quantization_halfwidth(bits)
        sinc = math.sin(tau) / tau
        half = math.sin(2 * tau) / (4 * tau)
        mu_XR = sinc * mu_X
        # per-element variance; the cross-element mean term cancels
        var_XR = float((raw2_n * (0.5 + half) - (sinc * mean_n) ** 2).sum())
        var_XI = float((raw2_n * (0.5 - half)).sum())

    mu_Y = mf.mean + mu_X
    var_Y = mf.var + var_X
    raw2_Y = var_Y + mu_Y**2
    mu_L = mu.mean * mu_Y
    var_L = mu.raw2 * raw2_Y - mu_Y**2 * mu.mean**2
    if not (var_Y > 0 and var_L > 0):
        raise ValueError("degenerate cascade: zero variance")
    lam_fit = fit_gamma(mu_L, var_L)
    return CascadeStats(
        f=mf, u=mu, mu_X=mu_X, var_X=var_X, mu_XR=mu_XR, var_XR=var_XR, var_XI=var_XI,
        mu_Y=mu_Y, var_Y=var_Y, mu_L=mu_L, var_L=var_L,
        raw2_L=lam_fit.raw_moment(2), raw4_L=lam_fit.raw_moment(4), bits=bits,
    )


def _scaled_cdf(fit, r, scale):
    r = np.asarray(r, dtype=float)
    out = fit.cdf(np.sqrt(np.maximum(r, 0.0) / scale))
    out = np.where(r > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def cdf_snr(sys, stats, r, kind=GAMMA):
    """CDF of the optimal reader SNR gamma* = gamma_bar Lambda^2 at ``r``."""
    return _scaled_cdf(stats.fit("L", kind), r, sys.gamma_bar)


def cdf_received_power(sys, stats, r, kind=GAMMA):
    """CDF of the optimal tag received power P Y^2 at ``r`` watts."""
    return _scaled_cdf(stats.fit("Y", kind), r, sys.P)


def pdf_snr(sys, stats, r, kind=GAMMA):
    r = np.asarray(r, dtype=float)
    gb = sys.gamma_bar
    safe = np.where(r > 0, r, 1.0)
    out = np.where(r > 0, stats.fit("L", kind).pdf(np.sqrt(safe / gb)) / (2.0 * np.sqrt(gb * safe)), 0.0)
    return float(out) if out.ndim == 0 else out


def avg_received_power(sys, stats):
    f = stats.f
    return sys.P * (f.var + f.mean**2 + stats.var_X + stats.mu_X**2 + 2 * f.mean * stats.mu_X)


def avg_received_power_random(links, sys):
    """Mean tag power when the RIS phases are i.i.d. uniform (incoherent sum)."""
    eta = sys.eta_vector()
    mg, mh = links.g.moments(), links.h.moments()
    return sys.P * (links.f.moments().raw2 + float((eta**2).sum()) * mg.raw2 * mh.raw2)


def avg_harvested_power(sys, stats):
    return sys.phi * (1.0 - sys.beta) * avg_received_power(sys, stats)


def eo_probability(sys, stats, kind=GAMMA):
    """Probability that (1 - beta) P_T falls below P_b / phi."""
    if sys.P_b == 0:
        return 0.0
    return cdf_received_power(sys, stats, sys.P_b_eff / (1.0 - sys.beta), kind)


def rate_bounds(sys, stats):
    """Jensen lower and upper bounds on E{log2(1 + gamma*)} in bit/s/Hz."""
    mean_snr = sys.gamma_bar * stats.raw2_L
    var_snr = sys.gamma_bar**2 * (stats.raw4_L - stats.raw2_L**2)
    inv_mean = 1.0 / mean_snr + var_snr / mean_snr**3
    return math.log2(1.0 + 1.0 / inv_mean), math.log2(1.0 + mean_snr)


def mean_cascade_per_element(links, sys):
    """Per-element mean of eta alpha_g alpha_h, which sets the large-N scaling."""
    mg, mh = links.g.moments(), links.h.moments()
    return sys.uniform_eta() * mg.mean * mh.mean


def asymptotic_rate(links, sys, P_A):
    """Large-N rate when the transmit power scales as P_A / N^2."""
    if not P_A > 0:
        raise ValueError("P_A must be positive")
    gamma_a = sys.beta * P_A / sys.noise
    mu_bar = mean_cascade_per_element(links, sys)
    return math.log2(1.0 + gamma_a * links.u.moments().raw2 * mu_bar**2)


def power_scaled_rate_bounds(links, sys, P_A, N):
    scaled = sys.with_elements(N).with_power(P_A / N**2)
    return rate_bounds(scaled, cascade_moments(links, scaled))


def outage_probability(sys, stats, gamma_th, eo_threshold=EO_ACTIVATION, kind=GAMMA):
    """Energy-or-SNR outage ``F_EO + (1 - F_EO) F_SNR``.

    ``eo_threshold='activation'`` evaluates the energy term at the harvester
    threshold P_b/(phi (1 - beta)); ``'literal'`` evaluates it at ``gamma_th``
    itself, as the printed formula reads.
    """
    if not gamma_th > 0:
        raise ValueError("gamma_th must be positive")
    if eo_threshold == EO_ACTIVATION:
        f_eo = eo_probability(sys, stats, kind)
    elif eo_threshold == EO_LITERAL:
        f_eo = cdf_received_power(sys, stats, gamma_th, kind)
    else:
        raise ValueError(f"unknown eo_threshold {eo_threshold!r}")
    f_snr = cdf_snr(sys, stats, gamma_th, kind)
    return min(1.0, f_eo + (1.0 - f_eo) * f_snr)


def _log_quad(log_f, peak_guess, spread):
    """Integrate exp(log_f) over (0, inf) around its dominant peak."""
    res = optimize.minimize_scalar(lambda s: -log_f(math.exp(s)),
                                   bracket=(math.log(peak_guess) - 1, math.log(peak_guess)))
    t_peak = math.exp(res.x)
    log_peak = log_f(t_peak)
    edges = sorted({0.0, *(t_peak + k * spread for k in (-30, -10, -3, 0, 3, 10, 30)
                           if t_peak + k * spread > 0)})
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda t: math.exp(log_f(t) - log_peak) if t > 0 else 0.0,
                                lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    total += integrate.quad(lambda t: math.exp(log_f(t) - log_peak), edges[-1], math.inf,
                            epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return log_peak + math.log(total)


def ber_integral(fit, gamma_bar, lam=BPSK_LAMBDA, nu=BPSK_NU):
    """Direct quadrature of E{lam exp(-A nu gb L^2 - B sqrt(nu gb) L - C)} for Gamma L."""
    A, B, C = specfun.Q_APPROX
    k, s = fit.k, fit.scale
    a_bar = A * nu * gamma_bar * s * s
    b_bar = B * math.sqrt(nu * gamma_bar) * s

    def log_f(t):
        return (-a_bar * t * t - b_bar * t - C + (k - 1.0) * math.log(t) - t
                - specfun.ln_gamma(k))

    curv = 2 * a_bar + 1.0 + (k - 1.0)
    peak = max(k - 1.0, 1e-3) / (1.0 + b_bar + 2 * a_bar * max(k - 1.0, 1e-3) ** 0.5)
    return lam * math.exp(_log_quad(log_f, max(peak, 1e-6), 1.0 / math.sqrt(curv)))


def ber_closed_form_arguments(fit, gamma_bar, nu=BPSK_NU):
    """Order ``-k`` and argument ``B_hat / sqrt(2 A_bar)`` of the D_v evaluation."""
    A, B, _ = specfun.Q_APPROX
    a_bar = A * nu * gamma_bar
    b_hat = B * math.sqrt(nu * gamma_bar) + 1.0 / fit.scale
    return -fit.k, b_hat / math.sqrt(2.0 * a_bar)


def ber_gamma_closed_form(fit, gamma_bar, lam=BPSK_LAMBDA, nu=BPSK_NU):
    """Parabolic-cylinder form of the Gamma-fit BPSK BER (log-space evaluation)."""
    A, B, C = specfun.Q_APPROX
    k, s = fit.k, fit.scale
    a_bar = A * nu * gamma_bar
    b_hat = B * math.sqrt(nu * gamma_bar) + 1.0 / s
    z = b_hat / math.sqrt(2.0 * a_bar)
    log_val = (math.log(lam) - C - k * math.log(s)
               - 0.5 * k * math.log(2.0 * a_bar)
               + 0.25 * z * z
               + specfun.log_parabolic_cylinder_d(-k, z))
    return math.exp(log_val)


def avg_ber_detail(sys, stats, kind=GAMMA, lam=BPSK_LAMBDA, nu=BPSK_NU):
    """Average BPSK BER and the evaluation route ('closed-form' or 'quadrature')."""
    gb = sys.gamma_bar
    if kind == GAUSSIAN:
        fit = stats.fit("L", GAUSSIAN)
        A, B, C = specfun.Q_APPROX

        def integrand(x):
            return lam * math.exp(-A * nu * gb * x * x - B * math.sqrt(nu * gb) * x - C) * fit.pdf(x)

        lo = max(0.0, fit.mu - 12 * fit.sigma)
        hi = fit.mu + 12 * fit.sigma
        val = integrate.quad(integrand, 0.0, lo, limit=200)[0] if lo > 0 else 0.0
        val += integrate.quad(integrand, lo, hi, points=[fit.mu], limit=200, epsabs=0.0, epsrel=1e-10)[0]
        return val, "quadrature"
    fit = stats.fit("L", GAMMA)
    order, z = ber_closed_form_arguments(fit, gb, nu)
    if specfun.PCFD_MIN_ORDER <= order and z <= specfun.PCFD_MAX_ARG:
        return ber_gamma_closed_form(fit, gb, lam, nu), "closed-form"
    return ber_integral(fit, gb, lam, nu), "quadrature"


def avg_ber(sys, stats, kind=GAMMA, lam=BPSK_LAMBDA, nu=BPSK_NU):
    return avg_ber_detail(sys, stats, kind, lam, nu)[0]


def diversity_limit(m_u):
    """Large-N diversity order, set by the tag-reader link alone."""
    ratio = math.exp(specfun.ln_gamma(m_u) - specfun.ln_gamma(m_u + 0.5))
    return 0.5 / (m_u * ratio * ratio - 1.0)


def _upsilon(m):
    return math.exp(specfun.ln_gamma(m + 0.5) - specfun.ln_gamma(m))


def _array_gain(k, scale, lam, nu):
    log_c1 = (math.log(lam) + specfun.ln_gamma(0.5 * k) - math.log(8.0)
              - specfun.ln_gamma(k) - k * math.log(scale))
    bracket = math.log(2.0 ** (0.5 * k) / 3.0 + 1.5 ** (0.5 * k))
    return nu * math.exp(-2.0 / k * (bracket + log_c1))


@dataclass(frozen=True)
class Asymptotics:
    outage: float
    ber: float
    diversity: float
    coding_gain: float
    array_gain: float
    diversity_limit: float


def asymptotics(links, sys, stats, gamma_th=1.0, lam=BPSK_LAMBDA, nu=BPSK_NU):
    """High-SNR outage and BER together with diversity, coding and array gains."""
    fit = stats.fit("L", GAMMA)
    k, s = fit.k, fit.scale
    gb = sys.gamma_bar
    log_oc = -specfun.ln_gamma(k + 1.0) - k * math.log(s)
    outage = math.exp(log_oc + 0.5 * k * math.log(gamma_th / gb))
    g_a = _array_gain(k, s, lam, nu)
    ber = math.exp(-0.5 * k * math.log(g_a * gb))
    with np.errstate(over="ignore"):
        coding = float(np.exp(log_oc))
    return Asymptotics(outage=outage, ber=ber, diversity=0.5 * k, coding_gain=coding,
                       array_gain=g_a, diversity_limit=diversity_limit(links.u.m))


def large_n_lambda_scale(links, sys):
    """Gamma scale of Lambda as N grows: N mu_bar sqrt(zeta_u) Ubar_u / U_u."""
    ups_u = _upsilon(links.u.m)
    ups_bar_u = links.u.m - ups_u**2
    mu_bar = sys.uniform_eta() * _upsilon(links.g.m) * _upsilon(links.h.m) * math.sqrt(links.g.zeta * links.h.zeta)
    return sys.N * mu_bar * math.sqrt(links.u.zeta) * ups_bar_u / ups_u


def coding_gain_large_n(links, sys):
    k = 2.0 * diversity_limit(links.u.m)
    scale = large_n_lambda_scale(links, sys)
    return math.exp(-specfun.ln_gamma(k + 1.0) - k * math.log(scale))


def array_gain_large_n(links, sys, lam=BPSK_LAMBDA, nu=BPSK_NU):
    k = 2.0 * diversity_limit(links.u.m)
    return _array_gain(k, large_n_lambda_scale(links, sys), lam, nu)


def _quantized_tag_gain(st):
    # E{|alpha_f + X_R + j X_I|^2}
    f = st.f
    raw2_xr = st.var_XR + st.mu_XR**2
    raw2_xi = st.var_XI + st.mu_XI**2
    return f.raw2 + raw2_xr + 2 * f.mean * st.mu_XR + raw2_xi


def avg_received_power_quantized(links, sys, bits):
    return sys.P * _quantized_tag_gain(cascade_moments(links, sys, bits=bits))


def quantized_rate_ub(links, sys, bits):
    """Rate upper bound with D-bit phase quantization errors."""
    st = cascade_moments(links, sys, bits=bits)
    return math.log2(1.0 + sys.gamma_bar * st.u.raw2 * _quantized_tag_gain(st))


def rate_ratio(links, sys, bits):
    """Quantized over continuous rate upper bound."""
    return quantized_rate_ub(links, sys, bits) / rate_bounds(sys, cascade_moments(links, sys))[1]
