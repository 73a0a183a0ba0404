"""Command-line front end: analyze, simulate, optimize and figure presets.

Every command writes one CSV.  Lines starting with ``#`` carry metadata
(version, command, seed, trials, config hash and the config itself); the
first non-comment line is the header.  Output bytes depend only on the
inputs and the seed.
"""

import argparse
import csv
import io
import math
import sys as _sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import montecarlo as mc
from . import single_tag as st
from .channel import substream
from .config import ConfigError, ScenarioConfig, Sweep
from .multi_tag import (InfeasibleError, OptimizerOptions, energy_threshold, optimize_phases,
                        received_power, sinr)

NAN = float("nan")


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    return str(value)


def render_csv(meta, header, rows):
    buf = io.StringIO()
    for key, val in meta:
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def base_meta(command, cfg, extra=()):
    meta = [("version", f"risbc {__version__}"), ("command", command), ("seed", cfg.seed),
            ("trials", cfg.trials), ("config_sha256", cfg.sha256()),
            ("config", cfg.canonical_json())]
    return meta + list(extra)


def gap(analytic, measured):
    """(absolute, relative) gap of a measurement from its closed form."""
    if analytic is None or measured is None or not np.isfinite(analytic):
        return NAN, NAN
    diff = measured - analytic
    return diff, (diff / analytic if analytic != 0 else NAN)


def _dbm(watt):
    return float(st.watt_to_dbm(watt)) if watt > 0 else -math.inf


# ---- analyze ---------------------------------------------------------------

ANALYZE_HEADER = [
    "x", "P_dbm", "N", "noise_dbm", "mu_X", "var_X", "mu_Y", "var_Y", "mu_L", "var_L",
    "k_L", "lam_L", "rx_power_dbm", "harvested_power_dbm", "eo_prob", "R_lb", "R_ub",
    "snr_outage", "outage_activation", "outage_literal", "ber", "ber_method",
    "outage_inf", "ber_inf", "G_d", "O_c", "G_a", "G_d_limit", "R_q", "R_q_ratio", "R_inf",
]


def analyze_point(x, cfg):
    sys = cfg.system()
    links = cfg.links()
    row = dict.fromkeys(ANALYZE_HEADER, NAN)
    row.update(x=x, P_dbm=cfg.P_dbm, N=sys.N, noise_dbm=cfg.noise_dbm, ber_method="")
    if cfg.policy == "random":
        pt = st.avg_received_power_random(links, sys)
        row.update(rx_power_dbm=_dbm(pt), harvested_power_dbm=_dbm(sys.phi * (1 - sys.beta) * pt))
        return [row[h] for h in ANALYZE_HEADER]
    stats = st.cascade_moments(links, sys)
    kind = cfg.fit
    lb, ub = st.rate_bounds(sys, stats)
    ber, method = st.avg_ber_detail(sys, stats, kind)
    asym = st.asymptotics(links, sys, stats, cfg.gamma_th)
    row.update(
        mu_X=stats.mu_X, var_X=stats.var_X, mu_Y=stats.mu_Y, var_Y=stats.var_Y,
        mu_L=stats.mu_L, var_L=stats.var_L, k_L=stats.k_L, lam_L=stats.lam_L,
        rx_power_dbm=_dbm(st.avg_received_power(sys, stats)),
        harvested_power_dbm=_dbm(st.avg_harvested_power(sys, stats)),
        eo_prob=st.eo_probability(sys, stats, kind), R_lb=lb, R_ub=ub,
        snr_outage=st.cdf_snr(sys, stats, cfg.gamma_th, kind),
        outage_activation=st.outage_probability(sys, stats, cfg.gamma_th, st.EO_ACTIVATION, kind),
        outage_literal=st.outage_probability(sys, stats, cfg.gamma_th, st.EO_LITERAL, kind),
        ber=ber, ber_method=method,
        outage_inf=asym.outage, ber_inf=asym.ber, G_d=asym.diversity, O_c=asym.coding_gain,
        G_a=asym.array_gain, G_d_limit=asym.diversity_limit,
    )
    bits = cfg.bits if cfg.bits is not None else None
    if bits is not None and sys.N > 0:
        rq = st.quantized_rate_ub(links, sys, bits)
        row.update(R_q=rq, R_q_ratio=rq / ub)
    if cfg.P_A_dbm is not None and sys.N > 0:
        row.update(R_inf=st.asymptotic_rate(links, sys, float(st.dbm_to_watt(cfg.P_A_dbm))))
    return [row[h] for h in ANALYZE_HEADER]


def analyze(cfg):
    rows = [analyze_point(x, c) for x, c in cfg.points()]
    return render_csv(base_meta("analyze", cfg), ANALYZE_HEADER, rows)


# ---- simulate --------------------------------------------------------------

SIM_HEADER = [
    "x", "P_dbm", "N", "trials",
    "an_harvested_w", "mc_harvested_w", "gap_harvested_abs", "gap_harvested_rel",
    "an_eo", "mc_eo", "gap_eo_abs", "gap_eo_rel",
    "R_lb", "R_ub", "mc_rate", "rate_in_bounds",
    "an_snr_outage", "mc_snr_outage", "gap_snr_outage_abs", "gap_snr_outage_rel",
    "an_outage", "mc_outage", "gap_outage_abs", "gap_outage_rel",
    "an_ber", "mc_ber", "gap_ber_abs", "gap_ber_rel",
]


def simulate_point(x, cfg, cache, workers=1):
    sys = cfg.system()
    links = cfg.links()
    policy = cfg.phase_policy()
    key = (links, sys.N, sys.eta, policy, cfg.trials, cfg.seed)
    if key not in cache:
        cache[key] = mc.sample_gains(links, sys, policy, cfg.trials, cfg.seed, workers=workers)
    rep = mc.summarize(cache[key], sys, cfg.gamma_th)
    row = dict.fromkeys(SIM_HEADER, NAN)
    row.update(x=x, P_dbm=cfg.P_dbm, N=sys.N, trials=rep.trials,
               mc_harvested_w=rep.mean_harvested_power, mc_eo=rep.eo_rate, mc_rate=rep.mean_rate,
               mc_snr_outage=rep.snr_outage_rate, mc_outage=rep.outage_rate, mc_ber=rep.ber,
               rate_in_bounds="")
    if cfg.policy == "random":
        an_h = sys.phi * (1 - sys.beta) * st.avg_received_power_random(links, sys)
        row.update(an_harvested_w=an_h)
        row["gap_harvested_abs"], row["gap_harvested_rel"] = gap(an_h, rep.mean_harvested_power)
        return [row[h] for h in SIM_HEADER]
    stats = st.cascade_moments(links, sys)
    kind = cfg.fit
    lb, ub = st.rate_bounds(sys, stats)
    if cfg.policy == "quantized" and sys.N > 0:
        # only the mean power and the rate bound have quantized closed forms
        ub = st.quantized_rate_ub(links, sys, cfg.bits)
        an_h = sys.phi * (1 - sys.beta) * st.avg_received_power_quantized(links, sys, cfg.bits)
        an = {"harvested": (an_h, rep.mean_harvested_power)}
        lb = NAN
    else:
        an = {
            "harvested": (st.avg_harvested_power(sys, stats), rep.mean_harvested_power),
            "eo": (st.eo_probability(sys, stats, kind), rep.eo_rate),
            "snr_outage": (st.cdf_snr(sys, stats, cfg.gamma_th, kind), rep.snr_outage_rate),
            "outage": (st.outage_probability(sys, stats, cfg.gamma_th, st.EO_ACTIVATION, kind),
                       rep.outage_rate),
            "ber": (st.avg_ber(sys, stats, kind), rep.ber),
        }
    for name, (a, m) in an.items():
        col = "an_harvested_w" if name == "harvested" else "an_" + name
        row[col] = a
        row[f"gap_{name}_abs"], row[f"gap_{name}_rel"] = gap(a, m)
    row.update(R_lb=lb, R_ub=ub,
               rate_in_bounds=int((np.isnan(lb) or lb <= rep.mean_rate) and rep.mean_rate <= ub))
    return [row[h] for h in SIM_HEADER]


def simulate_multi_point(x, cfg, workers=1):
    sys = cfg.system()
    geom = cfg.geometry()
    policy = {"optimal": mc.OPTIMIZED, "quantized": mc.OPTIMIZED}.get(cfg.policy, cfg.policy)
    rep = mc.run_multi_tag(geom, sys, policy, cfg.trials, cfg.seed, cfg.gamma_th, workers=workers)
    row = [x, cfg.P_dbm, sys.N, rep.trials, rep.infeasible, rep.mean_sum_rate]
    for k in range(geom.K):
        row += [rep.outage[k], rep.ber[k], rep.mean_rate[k]]
    return row


def simulate(cfg, workers=1):
    if cfg.tags is not None:
        K = len(cfg.tags)
        header = ["x", "P_dbm", "N", "trials", "infeasible", "mc_sum_rate"]
        for k in range(K):
            header += [f"mc_outage_{k}", f"mc_ber_{k}", f"mc_rate_{k}"]
        rows = [simulate_multi_point(x, c, workers) for x, c in cfg.points()]
        return render_csv(base_meta("simulate", cfg), header, rows)
    cache = {}
    rows = [simulate_point(x, c, cache, workers) for x, c in cfg.points()]
    return render_csv(base_meta("simulate", cfg), SIM_HEADER, rows)


# ---- optimize --------------------------------------------------------------

OPT_HEADER = ["x", "record", "index", "v1", "v2", "v3", "v4"]


def optimize_point(x, cfg, options=None):
    """One channel draw (stream ``seed ^ 0``) optimized per the multi-tag algorithm."""
    options = options or OptimizerOptions()
    sys = cfg.system()
    inst = cfg.geometry().sample(sys, substream(cfg.seed, 0))
    feasible = True
    try:
        state = optimize_phases(inst, options)
    except InfeasibleError:
        feasible = False
        state = optimize_phases(inst, OptimizerOptions(**{**options.__dict__, "energy_constraints": False}))
    rows = [[x, "trace", i, v, "", "", ""] for i, v in enumerate(state.trace)]
    coeff = state.coefficients
    rows += [[x, "theta", n, float(np.angle(c)), float(abs(c)), "", ""] for n, c in enumerate(coeff)]
    g = sinr(inst, state.theta)
    pw = received_power(inst, state.theta)
    thr = energy_threshold(sys)
    for k in range(inst.K):
        rows.append([x, "tag", k, g[k], math.log2(1 + g[k]), _dbm(pw[k]), int(sys.P_b == 0 or pw[k] >= thr * (1 - 1e-9))])
    rows.append([x, "summary", 0, state.iterations, int(state.converged), int(feasible), state.init])
    return rows


def optimize(cfg):
    rows = []
    for x, c in cfg.points():
        rows += optimize_point(x, c)
    meta = base_meta("optimize", cfg, [
        ("records", "trace: index=iteration v1=sum rate; theta: v1=angle v2=modulus; "
                    "tag: v1=SINR v2=rate v3=received dBm v4=active; "
                    "summary: v1=iterations v2=converged v3=feasible v4=init"),
    ])
    return render_csv(meta, OPT_HEADER, rows)


# ---- entry point -----------------------------------------------------------

def build_config(args):
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.sweep is not None:
        updates["sweep"] = Sweep.parse(args.sweep)
    return replace(cfg, **updates) if updates else cfg


def make_parser():
    parser = argparse.ArgumentParser(prog="risbc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"risbc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, figure=False):
        if not figure:
            p.add_argument("--config", help="scenario JSON file (defaults when omitted)")
            p.add_argument("--sweep", help="var:lo:hi:steps")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output CSV path (stdout when omitted)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo")

    common(sub.add_parser("analyze", help="closed-form metrics per sweep point"))
    common(sub.add_parser("simulate", help="Monte Carlo next to the closed forms"))
    common(sub.add_parser("optimize", help="multi-tag phase optimization trace"))
    p = sub.add_parser("figure", help="desk-scale reproduction of a figure preset")
    p.add_argument("id", type=int)
    common(p, figure=True)
    sub.add_parser("dump-config", help="print the default scenario config")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dump-config":
            text = ScenarioConfig().to_json() + "\n"
            out = None
        elif args.command == "figure":
            from .figures import render_figure
            text = render_figure(args.id, seed=args.seed, trials=args.trials, workers=args.workers)
            out = args.out
        else:
            cfg = build_config(args)
            if args.workers < 1:
                raise ConfigError("workers", "must be >= 1")
            if args.command == "analyze":
                text = analyze(cfg)
            elif args.command == "simulate":
                text = simulate(cfg, args.workers)
            else:
                text = optimize(cfg)
            out = args.out
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=_sys.stderr)
        return 2
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
