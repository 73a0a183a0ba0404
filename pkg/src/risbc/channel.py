"""Path loss and Nakagami-m fading: analytic moments and sampling.

Convention: a link with shape ``m`` and path-loss scale ``zeta`` has
Nakagami spread ``omega = m * zeta``, so the squared envelope is
Gamma(shape=m, scale=zeta).
"""

import math
from dataclasses import dataclass

import numpy as np

from .specfun import ln_gamma

DEFAULT_FC_HZ = 3e9
MIN_DISTANCE_M = 1.0


def pathloss_db(d, fc=DEFAULT_FC_HZ):
    """UMi LOS path loss in dB: 22 log10(d) + 28 + 20 log10(fc / 1 GHz)."""
    d = np.asarray(d, dtype=float)
    if np.any(d < MIN_DISTANCE_M):
        raise ValueError(f"path-loss model needs d >= {MIN_DISTANCE_M} m, got {d}")
    if not fc > 0:
        raise ValueError("carrier frequency must be positive")
    out = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(fc / 1e9)
    return float(out) if out.ndim == 0 else out


def pathloss(d, fc=DEFAULT_FC_HZ):
    """Linear large-scale power gain zeta = 10^(-PL/10)."""
    out = 10.0 ** (-np.asarray(pathloss_db(d, fc)) / 10.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LinkParams:
    m: float
    d: float
    fc: float = DEFAULT_FC_HZ

    def __post_init__(self):
        if not self.m >= 0.5:
            raise ValueError(f"Nakagami shape must be >= 0.5, got {self.m}")
        if not self.d >= MIN_DISTANCE_M:
            raise ValueError(f"link distance must be >= {MIN_DISTANCE_M} m, got {self.d}")
        if not self.fc > 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def zeta(self):
        return pathloss(self.d, self.fc)

    @property
    def omega(self):
        return self.m * self.zeta

    def moments(self):
        return nakagami_moments(self.m, self.omega)


@dataclass(frozen=True)
class Moments:
    """Mean, variance and raw 2nd/4th moments of a nonnegative quantity."""

    mean: float
    var: float
    raw2: float
    raw4: float

    @property
    def std(self):
        return math.sqrt(self.var)


def _check_shape_scale(m, omega):
    if not m >= 0.5:
        raise ValueError(f"Nakagami shape must be >= 0.5, got {m}")
    if not omega > 0:
        raise ValueError(f"Nakagami spread must be positive, got {omega}")


def nakagami_raw_moment(m, omega, order):
    """E{alpha^order} = Gamma(m + order/2)/Gamma(m) * (omega/m)^(order/2)."""
    _check_shape_scale(m, omega)
    if order <= 0:
        raise ValueError("moment order must be positive")
    log_val = ln_gamma(m + 0.5 * order) - ln_gamma(m) + 0.5 * order * math.log(omega / m)
    return math.exp(log_val)


def nakagami_variance(m, omega):
    _check_shape_scale(m, omega)
    ratio = math.exp(ln_gamma(m + 0.5) - ln_gamma(m))
    return omega * (1.0 - ratio * ratio / m)


def nakagami_moments(m, omega):
    mean = nakagami_raw_moment(m, omega, 1)
    var = nakagami_variance(m, omega)
    # E{alpha^4} of Gamma(m, omega/m) squared envelope is omega^2 (m+1)/m
    raw4 = omega * omega * (m + 1.0) / m
    return Moments(mean=mean, var=var, raw2=var + mean * mean, raw4=raw4)


def sample_amplitude(m, omega, rng, size=None):
    """Nakagami-m envelope draws via the square root of Gamma(m, omega/m)."""
    _check_shape_scale(m, omega)
    return np.sqrt(rng.gamma(m, omega / m, size=size))


def sample_link(p: LinkParams, rng, size=None):
    """Complex coefficient alpha * exp(j theta), theta uniform on [-pi, pi)."""
    amp = sample_amplitude(p.m, p.omega, rng, size=size)
    phase = rng.uniform(-math.pi, math.pi, size=size)
    return amp * np.exp(1j * phase)


def substream(seed, index):
    """Random stream ``index`` derived from a master seed as ``seed XOR index``."""
    return np.random.default_rng(int(seed) ^ int(index))
