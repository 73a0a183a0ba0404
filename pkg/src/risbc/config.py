"""Scenario configuration: JSON text, dBm at the interface, watts inside."""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import LinkParams
from .multi_tag import MultiTagGeometry
from .ris import POLICY_KINDS, PhasePolicy
from .single_tag import FIT_KINDS, SingleTagLinks, SystemParams, dbm_to_watt, noise_power_dbm

D_G_FIXED = "fixed"
D_G_HYPOT = "hypot"      # d_g = sqrt(d_h^2 + d_f^2), RIS beside the emitter


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Sweep:
    var: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def parse(cls, text):
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError("sweep", f"expected var:lo:hi:steps, got {text!r}")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ConfigError("sweep", str(exc)) from None

    def values(self):
        if self.steps == 1:
            return [self.lo]
        return [float(v) for v in np.linspace(self.lo, self.hi, self.steps)]


INT_FIELDS = {"N", "bits", "trials", "seed"}


@dataclass(frozen=True)
class ScenarioConfig:
    P_dbm: float = 20.0
    beta: float = 0.6
    phi: float = 0.8
    eta: float = 0.8
    N: int = 100
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 10.0
    P_b_dbm: float = -20.0
    fc_hz: float = 3e9
    m_f: float = 3.0
    m_u: float = 3.0
    m_g: float = 3.0
    m_h: float = 3.0
    d_f: float = 10.0
    d_u: float = 5.0
    d_g: float = 3.0
    d_h: float = 8.0
    d_g_mode: str = D_G_FIXED
    tags: tuple = None          # multi-tag: ({"d_f":..,"d_u":..,"d_g":..}, ...)
    policy: str = "optimal"
    bits: int = None
    gamma_th_db: float = 0.0
    fit: str = "gamma"
    P_A_dbm: float = None
    sweep: Sweep = None
    trials: int = 10000
    seed: int = 1

    def __post_init__(self):
        self.validate()

    # ---- validation -------------------------------------------------------
    def validate(self):
        if self.policy not in POLICY_KINDS:
            raise ConfigError("policy", f"must be one of {POLICY_KINDS}")
        if self.policy == "quantized" and (self.bits is None or self.bits < 1):
            raise ConfigError("bits", "quantized policy needs bits >= 1")
        if self.bits is not None and self.bits < 1:
            raise ConfigError("bits", "must be >= 1")
        if self.fit not in FIT_KINDS:
            raise ConfigError("fit", f"must be one of {FIT_KINDS}")
        if self.d_g_mode not in (D_G_FIXED, D_G_HYPOT):
            raise ConfigError("d_g_mode", f"must be {D_G_FIXED!r} or {D_G_HYPOT!r}")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz", "must be positive")
        for name in ("f", "u", "g", "h"):
            try:
                LinkParams(getattr(self, "m_" + name), self._distance(name), self.fc_hz)
            except ValueError as exc:
                raise ConfigError(f"d_{name}/m_{name}", str(exc)) from None
        try:
            self.system()
        except ValueError as exc:
            msg = str(exc)
            key = next((k for k in ("beta", "phi", "eta", "N") if k in msg), "P_dbm")
            raise ConfigError(key, msg) from None
        if self.tags is not None:
            if not self.tags:
                raise ConfigError("tags", "needs at least one tag")
            for i, tag in enumerate(self.tags):
                missing = {"d_f", "d_u", "d_g"} - set(tag)
                if missing:
                    raise ConfigError(f"tags[{i}]", f"missing {sorted(missing)}")
                for key, val in tag.items():
                    if key not in ("d_f", "d_u", "d_g"):
                        raise ConfigError(f"tags[{i}].{key}", "unknown field")
                    if not val >= 1.0:
                        raise ConfigError(f"tags[{i}].{key}", "distance must be >= 1 m")
        if self.sweep is not None:
            if self.sweep.var not in SWEEPABLE:
                raise ConfigError("sweep", f"cannot sweep {self.sweep.var!r}; choose from {sorted(SWEEPABLE)}")
            if self.sweep.steps < 1:
                raise ConfigError("sweep", "steps must be >= 1")

    def _distance(self, name):
        if name == "g" and self.d_g_mode == D_G_HYPOT:
            return math.hypot(self.d_h, self.d_f)
        return getattr(self, "d_" + name)

    # ---- model objects ----------------------------------------------------
    @property
    def noise_dbm(self):
        return noise_power_dbm(self.bandwidth_hz, self.noise_figure_db)

    def system(self, N=None):
        n = self.N if N is None else N
        if self.policy == "none":
            n = 0
        return SystemParams(P=float(dbm_to_watt(self.P_dbm)), beta=self.beta, phi=self.phi,
                            eta=self.eta, N=n, noise=float(dbm_to_watt(self.noise_dbm)),
                            P_b=float(dbm_to_watt(self.P_b_dbm)))

    def links(self):
        return SingleTagLinks(*(LinkParams(getattr(self, "m_" + n), self._distance(n), self.fc_hz)
                                for n in ("f", "u", "g", "h")))

    def geometry(self):
        if self.tags is None:
            return MultiTagGeometry.from_single(self.links())
        mk = lambda m, d: LinkParams(m, d, self.fc_hz)
        return MultiTagGeometry(
            tuple(mk(self.m_f, t["d_f"]) for t in self.tags),
            tuple(mk(self.m_u, t["d_u"]) for t in self.tags),
            tuple(mk(self.m_g, t["d_g"]) for t in self.tags),
            mk(self.m_h, self.d_h),
        )

    def phase_policy(self):
        return PhasePolicy(self.policy, self.bits if self.policy == "quantized" else None)

    @property
    def gamma_th(self):
        return 10.0 ** (self.gamma_th_db / 10.0)

    # ---- sweeps -----------------------------------------------------------
    def points(self):
        """(value, config) for each sweep point, in sweep order."""
        if self.sweep is None:
            return [(None, self)]
        out = []
        for v in self.sweep.values():
            if self.sweep.var in INT_FIELDS:
                v = int(round(v))
            out.append((v, replace(self, **{self.sweep.var: v})))
        return out

    # ---- serialization ----------------------------------------------------
    def to_dict(self):
        d = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, Sweep):
                val = dataclasses.asdict(val)
            elif f.name == "tags" and val is not None:
                val = [dict(t) for t in val]
            d[f.name] = val
        return d

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, val in data.items():
            if key not in known:
                raise ConfigError(key, "unknown field")
            if key == "sweep" and val is not None:
                if isinstance(val, str):
                    val = Sweep.parse(val)
                else:
                    try:
                        val = Sweep(str(val["var"]), float(val["lo"]), float(val["hi"]), int(val["steps"]))
                    except (KeyError, TypeError, ValueError) as exc:
                        raise ConfigError("sweep", f"malformed sweep: {exc}") from None
            elif key == "tags" and val is not None:
                if not isinstance(val, list) or not all(isinstance(t, dict) for t in val):
                    raise ConfigError("tags", "must be a list of objects")
                val = tuple(val)
            elif key in INT_FIELDS and val is not None:
                if isinstance(val, bool) or not float(val).is_integer():
                    raise ConfigError(key, f"must be an integer, got {val!r}")
                val = int(val)
            elif key in ("policy", "fit", "d_g_mode"):
                if not isinstance(val, str):
                    raise ConfigError(key, "must be a string")
            elif val is not None:
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ConfigError(key, f"must be a number, got {val!r}")
                val = float(val)
            kwargs[key] = val
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", str(exc)) from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


SWEEPABLE = {"P_dbm", "N", "d_f", "d_u", "d_g", "d_h", "bits", "beta", "phi", "eta",
             "P_b_dbm", "gamma_th_db", "m_f", "m_u", "m_g", "m_h", "P_A_dbm"}
