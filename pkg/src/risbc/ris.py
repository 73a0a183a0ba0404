"""RIS phase-shift policies: co-phasing, quantization and random phases."""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_ETA = 0.8

OPTIMAL = "optimal"
QUANTIZED = "quantized"
RANDOM = "random"
NO_RIS = "none"
POLICY_KINDS = (OPTIMAL, QUANTIZED, RANDOM, NO_RIS)


def wrap_angle(theta):
    """Wrap angles into the half-open interval [-pi, pi)."""
    out = np.mod(np.asarray(theta, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PhaseVector:
    theta: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), theta.shape)
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError("passive RIS amplitudes must lie in (0, 1]")
        object.__setattr__(self, "theta", wrap_angle(theta))
        object.__setattr__(self, "eta", np.array(eta))

    @property
    def coefficients(self):
        return self.eta * np.exp(1j * self.theta)


@dataclass(frozen=True)
class PhasePolicy:
    kind: str = OPTIMAL
    bits: int = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown phase policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind == QUANTIZED and (self.bits is None or self.bits < 1):
            raise ValueError("quantized policy needs bits >= 1")

    @classmethod
    def optimal(cls):
        return cls(OPTIMAL)

    @classmethod
    def quantized(cls, bits):
        return cls(QUANTIZED, int(bits))

    @classmethod
    def random(cls):
        return cls(RANDOM)

    @classmethod
    def no_ris(cls):
        return cls(NO_RIS)

    def label(self):
        return f"{self.kind}{self.bits}" if self.kind == QUANTIZED else self.kind


def optimal_phases(theta_f, theta_g, theta_h):
    """Phases that co-phase every cascaded path with the direct path.

    ``theta_g`` and ``theta_h`` share their last axis (the RIS elements);
    ``theta_f`` broadcasts against the leading axes.
    """
    theta_g = np.asarray(theta_g, dtype=float)
    theta_h = np.asarray(theta_h, dtype=float)
    if theta_g.shape[-1:] != theta_h.shape[-1:]:
        raise ValueError(
            f"element count mismatch: theta_g has {theta_g.shape[-1:]}, theta_h has {theta_h.shape[-1:]}"
        )
    theta_f = np.asarray(theta_f, dtype=float)[..., None]
    return wrap_angle(theta_f - theta_g - theta_h)


def quantization_step(bits):
    if bits < 1:
        raise ValueError("bits must be >= 1")
    return 2.0 * math.pi / 2**bits


def quantization_halfwidth(bits):
    """Worst-case quantization error tau = pi / 2^D."""
    return 0.5 * quantization_step(bits)


def quantize_phase(theta, bits):
    """Round to the nearest point of the uniform 2^D-level grid on [-pi, pi)."""
    step = quantization_step(bits)
    return wrap_angle(np.round(np.asarray(theta, dtype=float) / step) * step)


def sample_quant_error(bits, rng, size=None):
    tau = quantization_halfwidth(bits)
    return rng.uniform(-tau, tau, size=size)


def random_phases(n, rng, size=None):
    if n < 1:
        raise ValueError("need at least one element")
    shape = (n,) if size is None else tuple(np.atleast_1d(size)) + (n,)
    return rng.uniform(-math.pi, math.pi, size=shape)


def policy_phases(policy, theta_f, theta_g, theta_h, rng=None):
    """Element phases under ``policy``; ``None`` when the RIS is absent."""
    if policy.kind == NO_RIS:
        return None
    if policy.kind == RANDOM:
        if rng is None:
            raise ValueError("random policy needs a random stream")
        return rng.uniform(-math.pi, math.pi, size=np.shape(theta_g))
    best = optimal_phases(theta_f, theta_g, theta_h)
    if policy.kind == QUANTIZED:
        return quantize_phase(best, policy.bits)
    return best
