"""Experiment registry: per-replica simulation and per-experiment summaries.

Every experiment is a pair of functions. ``replica(cfg, r)`` simulates one
replica from its own streams and returns a :class:`ReplicaResult`;
``summarize(cfg, results)`` turns the ordered results into ``key=value``
summary entries. Replicas may run in worker processes; results are always
consumed in replica order, so outputs do not depend on scheduling.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..duality import opinion_via_duality, stable_opinion_magnitude
from ..dynamics import run_forward
from ..errors import ConfigError
from ..fragmentation import init_fragmentation, run_fragmentation
from ..graph import Graph, build_graph
from ..initials import InitialLaw, law_mean, sample_profile
from ..stats import (effective_time, empirical_lp_norm, linear_fit, mean_ci, powerlaw_fit, tail_prob,
                     variance_estimate)
from .config import ExperimentConfig
from .streams import replica_streams


@dataclass
class ReplicaResult:
    rows: list
    extra: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    columns: tuple
    rows: list
    summary: dict
    snapshots: dict
    grid_shape: tuple | None = None


def tkey(t: float) -> str:
    """Compact label for a time: 64.0 -> '64', 0.5 -> '0.5'."""
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)


def make_domain(cfg: ExperimentConfig, n: int | None = None):
    gs = cfg.graph
    size = n if n is not None else (gs.n[0] if gs.n else None)
    return build_graph(gs.kind, n=size, w=gs.w, h=gs.h, radius=gs.radius)


def origin_of(cfg: ExperimentConfig, domain):
    if isinstance(domain, Graph):
        if not 0 <= cfg.graph.origin < domain.vertex_count:
            raise ConfigError("origin out of range", "graph.origin")
        return cfg.graph.origin
    return cfg.graph.origin if domain.dim == 1 else (cfg.graph.origin, 0)


def law_variance(law: InitialLaw) -> float:
    known = {"rademacher": 1.0, "uniform01": 1.0 / 12.0, "constant": 0.0}
    if law.kind in known:
        return known[law.kind]
    if law.kind == "stable" and law.alpha == 2.0:
        return 2.0
    raise ConfigError(f"the variance of {law.kind} initial opinions is not available", "init.kind")


def _ball(cfg):
    return cfg.ball_radius


# ---------------------------------------------------------------- consensus_scaling

def consensus_replica(cfg: ExperimentConfig, r: int) -> ReplicaResult:
    sizes = cfg.graph.n
    streams = replica_streams(cfg.seed, r, 2 * len(sizes))
    rows = []
    for j, n in enumerate(sizes):
        g = make_domain(cfg, n)
        f0 = sample_profile(cfg.init, g, streams[2 * j])
        rec = run_forward(g, f0, cfg.t_max, streams[2 * j + 1], observe_at=(), epsilon=cfg.epsilon,
                          stop_at_consensus=True)
        rows.append((r, n, math.inf if rec.consensus_time is None else rec.consensus_time))
    return ReplicaResult(rows)


def consensus_summary(cfg, results):
    taus = np.array([row[2] for res in results for row in res.rows]).reshape(len(results), -1)
    sizes = np.array(cfg.graph.n, dtype=float)
    out = {}
    means = []
    for j, n in enumerate(cfg.graph.n):
        col = taus[:, j]
        finite = np.isfinite(col)
        out[f"reached_n{n}"] = float(finite.mean())
        if finite.all() and col.size >= 2:
            est = mean_ci(col)
            out[f"mean_tau_n{n}"] = est.point
            out[f"se_tau_n{n}"] = est.standard_error
            out[f"ratio_log2_n{n}"] = est.point / math.log(n) ** 2
            means.append(est.point)
        else:
            means.append(math.nan)
    means = np.array(means)
    if len(sizes) >= 3 and np.all(np.isfinite(means)):
        ratios = means / np.log(sizes) ** 2
        out["ratio_spread"] = float(ratios.max() / ratios.min())
        _, _, r2_log = linear_fit(np.log(sizes) ** 2, means)
        _, _, r2_sq = linear_fit(sizes ** 2, means)
        out["r_squared_log2n"] = r2_log
        out["r_squared_n2"] = r2_sq
        out["tau_fit"] = powerlaw_fit(np.column_stack([sizes, means])).exponent
    return out


# ---------------------------------------------------------------- q_decay

def q_decay_replica(cfg, r):
    (rng,) = replica_streams(cfg.seed, r, 1)
    domain = make_domain(cfg)
    state = init_fragmentation(domain, origin_of(cfg, domain))
    run = run_fragmentation(state, cfg.t_max, rng, observe_at=cfg.times, ball_radius=_ball(cfg),
                            alpha=cfg.stats_alpha, check_energy=cfg.check_energy, mass_floor=cfg.mass_floor)
    rows = [(r, t, s.q, s.energy, s.support_size, s.ball_mass, s.alpha_norm) for t, s in run]
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events,
                                "dropped": state.dropped_mass})


def _energy_summary(results, out):
    out["energy_checked_states"] = int(sum(res.extra["events"] for res in results))
    out["energy_violations"] = int(sum(res.extra["violations"] for res in results))
    out["max_dropped_mass"] = max(res.extra.get("dropped", 0.0) for res in results)


def q_decay_summary(cfg, results):
    n = make_domain(cfg).vertex_count
    out = {}
    pts = []
    for k, t in enumerate(cfg.times):
        q = np.array([res.rows[k][2] for res in results])
        label = tkey(t)
        ts = effective_time(t, n)
        if len(q) >= 2:
            est = mean_ci(q)
            out[f"mean_q_t{label}"] = est.point
            out[f"se_q_t{label}"] = est.standard_error
            if ts > 0:
                bound = 8.0 / math.sqrt(ts)
                out[f"bound_q_t{label}"] = bound
                out[f"margin_se_t{label}"] = ((bound - est.point) / est.standard_error
                                              if est.standard_error > 0 else math.inf)
                tail = tail_prob(q, 6.0 / math.sqrt(ts))
                out[f"tail_q_t{label}"] = tail.point
                out[f"tail_se_t{label}"] = tail.standard_error
                out[f"tail_bound_t{label}"] = math.exp(-ts / 30.0)
                pts.append((t, est.point))
    if len(pts) >= 3:
        fit = powerlaw_fit(pts)
        out["exponent"] = fit.exponent
        out["r_squared"] = fit.r_squared
    _energy_summary(results, out)
    return out


# ---------------------------------------------------------------- duality-based runs

def _duality_values(cfg, state_list, rng, law=None):
    law = law or cfg.init
    values = []
    for s in state_list:
        if law.kind == "stable":
            values.append((stable_opinion_magnitude(s, law.alpha, rng), s.q,
                           float(np.sum(s.support_arrays()[1] ** law.alpha) ** (1 / law.alpha))))
        else:
            d = opinion_via_duality(s, law, rng, alpha=cfg.stats_alpha)
            values.append((d.value, d.q_of_run, d.alpha_norm_of_run))
    return values


def local_tail_replica(cfg, r):
    frag_rng, op_rng = replica_streams(cfg.seed, r, 2)
    domain = make_domain(cfg)
    state = init_fragmentation(domain, origin_of(cfg, domain))
    run = run_fragmentation(state, cfg.t_max, frag_rng, observe_at=cfg.times, ball_radius=_ball(cfg),
                            check_energy=cfg.check_energy, mass_floor=cfg.mass_floor, keep_states=True)
    vals = _duality_values(cfg, run.states, op_rng)
    rows = [(r, t, v, q) for t, (v, q, _) in zip(cfg.times, vals)]
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events,
                                "dropped": state.dropped_mass})


def local_tail_summary(cfg, results):
    domain = make_domain(cfg)
    mu = law_mean(cfg.init, domain if isinstance(domain, Graph) else None).value
    out = {"mu": mu}
    for k, t in enumerate(cfg.times):
        v = np.array([res.rows[k][2] for res in results]) - mu
        label = tkey(t)
        est = tail_prob(v, cfg.epsilon)
        ts = effective_time(t, domain.vertex_count)
        bound = 3.0 * math.exp(-cfg.epsilon ** 2 * math.sqrt(ts) / 12.0)
        out[f"tail_t{label}"] = est.point
        out[f"se_t{label}"] = est.standard_error
        out[f"bound_t{label}"] = bound
    _energy_summary(results, out)
    return out


def variance_identity_replica(cfg, r):
    init_rng, clock_rng, frag_rng = replica_streams(cfg.seed, r, 3)
    g = make_domain(cfg)
    o = origin_of(cfg, g)
    f0 = sample_profile(cfg.init, g, init_rng)
    rec = run_forward(g, f0, cfg.t_max, clock_rng, observe_at=cfg.times, snapshot_at=cfg.times)
    state = init_fragmentation(g, o)
    run = run_fragmentation(state, cfg.t_max, frag_rng, observe_at=cfg.times, check_energy=cfg.check_energy)
    rows = [(r, t, float(rec.snapshots[float(t)][o]), s.q) for t, (_, s) in zip(cfg.times, run)]
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events})


def variance_identity_summary(cfg, results):
    var0 = law_variance(cfg.init)
    out = {"var_f0": var0}
    for k, t in enumerate(cfg.times):
        label = tkey(t)
        direct = variance_estimate([res.rows[k][2] for res in results])
        q = mean_ci([res.rows[k][3] for res in results])
        pred, pred_se = q.point * var0, q.standard_error * var0
        se = math.hypot(direct.standard_error, pred_se)
        out[f"var_direct_t{label}"] = direct.point
        out[f"var_direct_se_t{label}"] = direct.standard_error
        out[f"var_predicted_t{label}"] = pred
        out[f"var_predicted_se_t{label}"] = pred_se
        out[f"z_t{label}"] = (direct.point - pred) / se if se > 0 else 0.0
    _energy_summary(results, out)
    return out


def duality_check_replica(cfg, r):
    init_rng, clock_rng, frag_rng, op_rng = replica_streams(cfg.seed, r, 4)
    g = make_domain(cfg)
    o = origin_of(cfg, g)
    f0 = sample_profile(cfg.init, g, init_rng)
    rec = run_forward(g, f0, cfg.t_max, clock_rng, observe_at=cfg.times, snapshot_at=cfg.times)
    state = init_fragmentation(g, o)
    run = run_fragmentation(state, cfg.t_max, frag_rng, observe_at=cfg.times, keep_states=True,
                            check_energy=cfg.check_energy)
    vals = _duality_values(cfg, run.states, op_rng)
    rows = [(r, t, float(rec.snapshots[float(t)][o]), v, q) for t, (v, q, _) in zip(cfg.times, vals)]
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events})


def duality_check_summary(cfg, results):
    out = {}
    for k, t in enumerate(cfg.times):
        label = tkey(t)
        direct = [res.rows[k][2] for res in results]
        dual = [res.rows[k][3] for res in results]
        for name, xs in (("direct", direct), ("duality", dual)):
            m, v = mean_ci(xs), variance_estimate(xs)
            out[f"mean_{name}_t{label}"] = m.point
            out[f"mean_{name}_se_t{label}"] = m.standard_error
            out[f"var_{name}_t{label}"] = v.point
            out[f"var_{name}_se_t{label}"] = v.standard_error
        md, mq = mean_ci(direct), mean_ci(dual)
        vd, vq = variance_estimate(direct), variance_estimate(dual)
        se_m = math.hypot(md.standard_error, mq.standard_error)
        se_v = math.hypot(vd.standard_error, vq.standard_error)
        out[f"z_mean_t{label}"] = (md.point - mq.point) / se_m if se_m > 0 else 0.0
        out[f"z_var_t{label}"] = (vd.point - vq.point) / se_v if se_v > 0 else 0.0
        out[f"min_duality_t{label}"] = float(min(dual))
        out[f"max_duality_t{label}"] = float(max(dual))
    _energy_summary(results, out)
    return out


def lp_norm_replica(cfg, r):
    frag_rng, op_rng = replica_streams(cfg.seed, r, 2)
    domain = make_domain(cfg)
    state = init_fragmentation(domain, origin_of(cfg, domain))
    run = run_fragmentation(state, cfg.t_max, frag_rng, observe_at=cfg.times, ball_radius=_ball(cfg),
                            check_energy=cfg.check_energy, mass_floor=cfg.mass_floor, keep_states=True)
    vals = _duality_values(cfg, run.states, op_rng)
    rows = [(r, t, v, q, a) for t, (v, q, a) in zip(cfg.times, vals)]
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events,
                                "dropped": state.dropped_mass})


def lp_norm_summary(cfg, results):
    mu = law_mean(cfg.init)
    out = {"mu": mu.value, "mu_finite": int(mu.finite)}
    for p in cfg.p:
        plabel = tkey(p)
        pts = []
        for k, t in enumerate(cfg.times):
            label = tkey(t)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                est = empirical_lp_norm([res.rows[k][2] for res in results], p, mu.value)
            out[f"lp_p{plabel}_t{label}"] = est.point
            out[f"lp_se_p{plabel}_t{label}"] = est.standard_error
            if caught:
                out[f"heavy_tail_warning_p{plabel}_t{label}"] = 1
            if est.point > 0:
                pts.append((t, est.point))
        if len(pts) >= 3:
            fit = powerlaw_fit(pts)
            out[f"exponent_p{plabel}"] = fit.exponent
            out[f"r_squared_p{plabel}"] = fit.r_squared
    _energy_summary(results, out)
    return out


def _arc_law(cfg, t):
    law = cfg.init
    center = law.arc_center if law.arc_center is not None else cfg.graph.origin
    radius = law.arc_radius if law.arc_radius is not None else 4.0 * math.sqrt(t)
    return replace(law, arc_center=center, arc_radius=radius)


def biased_arc_replica(cfg, r):
    frag_rng, op_rng = replica_streams(cfg.seed, r, 2)
    domain = make_domain(cfg)
    state = init_fragmentation(domain, origin_of(cfg, domain))

    def radius(t):
        return _arc_law(cfg, t).arc_radius

    run = run_fragmentation(state, cfg.t_max, frag_rng, observe_at=cfg.times, ball_radius=radius,
                            ball_center=_arc_law(cfg, 0.0).arc_center, check_energy=cfg.check_energy,
                            mass_floor=cfg.mass_floor, keep_states=True)
    rows = []
    for t, s, (_, st) in zip(cfg.times, run.states, run):
        d = opinion_via_duality(s, _arc_law(cfg, t), op_rng)
        rows.append((r, t, d.value, d.q_of_run, st.ball_mass, s.dropped_mass))
    return ReplicaResult(rows, {"violations": run.energy_violations, "events": run.events,
                                "dropped": state.dropped_mass})


def biased_arc_summary(cfg, results):
    out = {"threshold": 0.6}
    for k, t in enumerate(cfg.times):
        label = tkey(t)
        rows = [res.rows[k] for res in results]
        value = np.array([row[2] for row in rows])
        dropped = np.array([row[5] for row in rows])
        # |f| <= 1, so truncation moves f_t(o) by at most the dropped mass
        raw = mean_ci((value >= cfg.epsilon).astype(float))
        safe = mean_ci((value - dropped >= cfg.epsilon).astype(float))
        out[f"p_hat_t{label}"] = raw.point
        out[f"p_conservative_t{label}"] = safe.point
        out[f"se_t{label}"] = safe.standard_error
        out[f"mean_value_t{label}"] = float(value.mean())
        out[f"mean_ball_mass_t{label}"] = float(np.mean([row[4] for row in rows]))
    _energy_summary(results, out)
    return out


# ---------------------------------------------------------------- forward-only runs

def worst_case_replica(cfg, r):
    init_rng, clock_rng = replica_streams(cfg.seed, r, 2)
    g = make_domain(cfg)
    f0 = sample_profile(cfg.init, g, init_rng)
    rec = run_forward(g, f0, cfg.t_max, clock_rng, observe_at=(), epsilon=cfg.epsilon, stop_at_consensus=True)
    return ReplicaResult([(r, math.inf if rec.consensus_time is None else rec.consensus_time)])


def worst_case_summary(cfg, results):
    n = make_domain(cfg).vertex_count
    tau = np.array([res.rows[0][1] for res in results])
    out = {}
    for t in cfg.times or (cfg.t_max,):
        label = tkey(t)
        est = mean_ci((tau > t).astype(float))
        out[f"p_exceed_t{label}"] = est.point
        out[f"se_t{label}"] = est.standard_error
        out[f"bound_t{label}"] = 2.0 * n / cfg.epsilon ** 2 * math.exp(-2.0 * t / n ** 2)
    finite = np.isfinite(tau)
    out["reached"] = float(finite.mean())
    if finite.sum() >= 2:
        est = mean_ci(tau[finite])
        out["mean_tau_reached"] = est.point
        out["se_tau_reached"] = est.standard_error
    return out


def _grid_shape(g: Graph):
    if g.kind in ("torus", "lattice_window_2d"):
        w, h = g.shape
        return (h, w)
    return (1, g.vertex_count)


def _observation_times(cfg):
    obs = set(cfg.times)
    if cfg.record_every:
        k = 0
        while k * cfg.record_every <= cfg.t_max:
            obs.add(k * cfg.record_every)
            k += 1
    return tuple(sorted(obs))


def snapshot_replica(cfg, r):
    init_rng, clock_rng = replica_streams(cfg.seed, r, 2)
    g = make_domain(cfg)
    f0 = sample_profile(cfg.init, g, init_rng)
    obs = _observation_times(cfg)
    snap_at = cfg.times if r == 0 else ()
    rec = run_forward(g, f0, cfg.t_max, clock_rng, observe_at=obs, snapshot_at=snap_at)
    rows = [(r, t, o, h, s) for t, o, h, s in zip(rec.times.tolist(), rec.osc, rec.h_stat, rec.sum)]
    return ReplicaResult(rows, snapshots=rec.snapshots)


def snapshot_summary(cfg, results):
    rows = [row for row in results[0].rows if row[1] in set(cfg.times)]
    osc = [row[2] for row in rows]
    out = {f"osc_t{tkey(row[1])}": row[2] for row in rows}
    out["osc_strictly_decreasing"] = int(all(b < a for a, b in zip(osc, osc[1:])))
    return out


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class Experiment:
    replica: object
    summarize: object
    columns: tuple


FRAG_COLUMNS = ("replica", "t", "q", "energy", "support_size", "ball_mass", "alpha_norm")
REGISTRY = {
    "consensus_scaling": Experiment(consensus_replica, consensus_summary, ("replica", "n", "tau")),
    "q_decay": Experiment(q_decay_replica, q_decay_summary, FRAG_COLUMNS),
    "local_tail": Experiment(local_tail_replica, local_tail_summary, ("replica", "t", "value", "q_of_run")),
    "variance_identity": Experiment(variance_identity_replica, variance_identity_summary,
                                    ("replica", "t", "direct", "q_of_run")),
    "duality_check": Experiment(duality_check_replica, duality_check_summary,
                                ("replica", "t", "direct", "value", "q_of_run")),
    "lp_norm": Experiment(lp_norm_replica, lp_norm_summary,
                          ("replica", "t", "value", "q_of_run", "alpha_norm_of_run")),
    "biased_arc_lemma": Experiment(biased_arc_replica, biased_arc_summary,
                                   ("replica", "t", "value", "q_of_run", "ball_mass", "dropped_mass")),
    "worst_case_bound": Experiment(worst_case_replica, worst_case_summary, ("replica", "tau")),
    "snapshot": Experiment(snapshot_replica, snapshot_summary, ("replica", "t", "osc", "h_stat", "sum")),
}


def _one(args):
    cfg, r = args
    return REGISTRY[cfg.experiment].replica(cfg, r)


def run_replicas(cfg: ExperimentConfig) -> list[ReplicaResult]:
    jobs = [(cfg, r) for r in range(cfg.replicas)]
    if cfg.workers == 1 or cfg.replicas == 1:
        return [_one(j) for j in jobs]
    chunk = max(1, cfg.replicas // (8 * cfg.workers))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_one, jobs, chunksize=chunk))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate every replica and summarize; writes nothing (see ``output``)."""
    exp = REGISTRY[cfg.experiment]
    if cfg.experiment == "variance_identity":
        law_variance(cfg.init)
    make_domain(cfg, cfg.graph.n[0] if cfg.graph.n else None)
    results = run_replicas(cfg)
    rows = [row for res in results for row in res.rows]
    summary = {
        "experiment": cfg.experiment,
        "graph": cfg.graph.kind,
        "init": cfg.init.kind,
        "replicas": cfg.replicas,
        "seed": cfg.seed,
    }
    summary.update(exp.summarize(cfg, results))
    grid = None
    snaps = {}
    if cfg.experiment == "snapshot":
        grid = _grid_shape(make_domain(cfg))
        snaps = results[0].snapshots
    return ExperimentResult(exp.columns, rows, summary, snaps, grid)
