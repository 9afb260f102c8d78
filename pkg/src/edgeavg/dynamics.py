"""Exact continuous-time simulation of the edge-averaging process.

Each edge carries a unit-rate Poisson clock. The clocks are never
materialised: the superposition of ``m`` of them rings after an Exp(m) wait
at a uniformly chosen edge, and that is what :func:`next_event` draws.
When an edge rings both endpoints take the average of their two opinions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import InvariantError, ParameterError
from .graph import Graph

SUM_RTOL = 1e-9


@dataclass(frozen=True)
class RingEvent:
    time: float
    edge_index: int


def next_event(active_edge_count: int, rng: np.random.Generator) -> tuple[float, int]:
    """Wait until the next ring among ``active_edge_count`` unit clocks, and its rank.

    The wait is Exp(active_edge_count) by inverse-CDF sampling of one uniform;
    the rank is uniform on ``0..count-1`` from a second, independent uniform.
    """
    if active_edge_count < 1:
        raise ParameterError("active_edge_count must be at least 1")
    wait = -math.log1p(-rng.random()) / active_edge_count
    k = int(rng.random() * active_edge_count)
    return wait, min(k, active_edge_count - 1)


class MinMaxIndex:
    """Min/max over a value array with O(log n) single-slot replacement."""

    def __init__(self, values: np.ndarray):
        self.tmin, self.tmax, self.size = K.tree_build(np.ascontiguousarray(values, dtype=np.float64))

    def replace(self, i: int, value: float) -> None:
        K.tree_set(self.tmin, self.tmax, self.size, i, value)

    def min(self) -> float:
        return float(self.tmin[1])

    def max(self) -> float:
        return float(self.tmax[1])


class OpinionState:
    """Opinion profile at a point in time, with running trackers.

    ``h_tracker`` is sum_u (f(u) - mean)^2 where ``mean`` is the initial
    average, which the dynamics conserve.
    """

    def __init__(self, graph: Graph, opinions: Sequence[float], time: float = 0.0):
        f = np.array(opinions, dtype=np.float64)
        if f.shape != (graph.vertex_count,):
            raise ParameterError(f"need one opinion per vertex ({graph.vertex_count}), got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ParameterError("opinions must be finite")
        self.graph = graph
        self.opinions = f
        self.time = float(time)
        self.value_index = MinMaxIndex(f)
        self.sum_tracker = float(f.sum())
        self.mean = self.sum_tracker / f.size
        self.h_tracker = float(np.sum((f - self.mean) ** 2))

    @property
    def oscillation(self) -> float:
        return self.value_index.max() - self.value_index.min()

    def copy(self) -> OpinionState:
        new = OpinionState.__new__(OpinionState)
        new.graph = self.graph
        new.opinions = self.opinions.copy()
        new.time = self.time
        new.value_index = MinMaxIndex.__new__(MinMaxIndex)
        new.value_index.tmin = self.value_index.tmin.copy()
        new.value_index.tmax = self.value_index.tmax.copy()
        new.value_index.size = self.value_index.size
        new.sum_tracker = self.sum_tracker
        new.mean = self.mean
        new.h_tracker = self.h_tracker
        return new


def apply_ring(state: OpinionState, edge: int) -> OpinionState:
    """Ring ``edge``: both endpoints take the average. Mutates and returns ``state``."""
    u, v = state.graph.edges[edge]
    f = state.opinions
    x, y = f[u], f[v]
    avg = 0.5 * (x + y)
    state.h_tracker -= 0.5 * (x - y) ** 2
    state.sum_tracker += 2.0 * avg - x - y
    f[u] = avg
    f[v] = avg
    state.value_index.replace(int(u), avg)
    state.value_index.replace(int(v), avg)
    return state


def oscillation(state: OpinionState) -> float:
    return state.oscillation


def h_statistic(state: OpinionState) -> float:
    return state.h_tracker


@dataclass
class RunRecord:
    """Trackers sampled at the requested observation times.

    ``consensus_time`` is the first time the oscillation is <= epsilon
    (0.0 if the initial profile already qualifies; None if not reached
    before ``t_max`` or no epsilon was given).
    """

    times: np.ndarray
    osc: np.ndarray
    h_stat: np.ndarray
    sum: np.ndarray
    snapshots: dict = field(default_factory=dict)
    consensus_time: float | None = None
    events: int = 0
    final_opinions: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.osc, other.osc)
            and np.array_equal(self.h_stat, other.h_stat)
            and np.array_equal(self.sum, other.sum)
            and self.snapshots.keys() == other.snapshots.keys()
            and all(np.array_equal(self.snapshots[k], other.snapshots[k]) for k in self.snapshots)
            and self.consensus_time == other.consensus_time
            and self.events == other.events
        )


def _check_times(t_max, observe_at):
    if not t_max >= 0:
        raise ParameterError("t_max must be nonnegative")
    obs = np.asarray(observe_at, dtype=np.float64).reshape(-1)
    if obs.size and (np.any(np.diff(obs) < 0) or obs[0] < 0 or obs[-1] > t_max):
        raise ParameterError("observation times must be sorted and lie in [0, t_max]")
    return obs


def run_forward(g: Graph, init: Sequence[float], t_max: float, rng: np.random.Generator,
                observe_at: Sequence[float] = (0.0,), epsilon: float | None = None,
                snapshot_at: Sequence[float] = (), stop_at_consensus: bool = False) -> RunRecord:
    """Simulate from ``init`` up to ``t_max``.

    The state "at time s" is the state after every ring with time <= s.
    With ``stop_at_consensus`` the run ends at the consensus time and later
    observation times are omitted from the record; ``t_max`` may then be
    infinite.
    """
    if stop_at_consensus and epsilon is None:
        raise ParameterError("stop_at_consensus needs epsilon")
    if math.isinf(t_max) and not stop_at_consensus:
        raise ParameterError("infinite t_max requires stop_at_consensus")
    if epsilon is not None and not epsilon > 0 and stop_at_consensus:
        raise ParameterError("epsilon must be positive")
    obs = _check_times(t_max, observe_at)
    snap_times = np.asarray(snapshot_at, dtype=np.float64)
    slot = np.full(obs.size, -1, dtype=np.int64)
    for j, s in enumerate(snap_times):
        hit = np.flatnonzero(obs == s)
        if hit.size == 0:
            raise ParameterError(f"snapshot time {s} is not an observation time")
        slot[hit[0]] = j

    state = OpinionState(g, init)
    start_sum = state.sum_tracker
    eps = math.nan if epsilon is None else float(epsilon)
    tau = 0.0 if (epsilon is not None and state.oscillation <= epsilon) else math.nan
    fs = np.array([0.0, state.sum_tracker, state.h_tracker, tau, 0.0])
    out_osc = np.empty(obs.size)
    out_h = np.empty(obs.size)
    out_sum = np.empty(obs.size)
    snaps = np.empty((snap_times.size, g.vertex_count))
    done_at_start = stop_at_consensus and tau == 0.0
    if done_at_start:
        k = 0
        while k < obs.size and obs[k] == 0.0:
            out_osc[k], out_h[k], out_sum[k] = state.oscillation, state.h_tracker, state.sum_tracker
            if slot[k] >= 0:
                snaps[slot[k]] = state.opinions
            k += 1
    else:
        k = K.forward_kernel(state.opinions, g.eu, g.ev, state.value_index.tmin, state.value_index.tmax,
                             state.value_index.size, fs, float(t_max), obs, slot, eps, stop_at_consensus,
                             rng, out_osc, out_h, out_sum, snaps)
    final_sum = float(state.opinions.sum())
    scale = max(1.0, float(np.abs(init).sum()))
    if abs(final_sum - start_sum) > SUM_RTOL * scale:
        raise InvariantError(f"opinion sum drifted from {start_sum!r} to {final_sum!r}")
    tau = fs[3]
    recorded = set(slot[:k].tolist())
    return RunRecord(
        times=obs[:k].copy(),
        osc=out_osc[:k],
        h_stat=out_h[:k],
        sum=out_sum[:k],
        snapshots={float(s): snaps[j].copy() for j, s in enumerate(snap_times) if j in recorded},
        consensus_time=None if math.isnan(tau) else float(tau),
        events=int(fs[4]),
        final_opinions=state.opinions,
    )


def run_forward_reference(g: Graph, init: Sequence[float], t_max: float, rng: np.random.Generator,
                          observe_at: Sequence[float] = (0.0,), epsilon: float | None = None,
                          stop_at_consensus: bool = False) -> RunRecord:
    """Plain-Python engine recomputing oscillation and H from scratch after every ring.

    Consumes the random stream exactly as :func:`run_forward` does, so the
    two produce identical opinion arrays for the same seed.
    """
    obs = _check_times(t_max, observe_at)
    f = np.array(init, dtype=np.float64)
    mean = f.sum() / f.size
    osc = float(f.max() - f.min())
    h = float(np.sum((f - mean) ** 2))
    tau = 0.0 if (epsilon is not None and osc <= epsilon) else None
    rows = []
    t = 0.0
    k = 0
    events = 0
    m = g.edge_count
    if not (stop_at_consensus and tau == 0.0):
        while True:
            wait, e = next_event(m, rng)
            tn = t + wait
            while k < obs.size and obs[k] < tn:
                rows.append((osc, h, float(f.sum())))
                k += 1
            if tn > t_max:
                break
            u, v = g.edges[e]
            f[u] = f[v] = 0.5 * (f[u] + f[v])
            osc = float(f.max() - f.min())
            h = float(np.sum((f - mean) ** 2))
            t = tn
            events += 1
            if epsilon is not None and tau is None and osc <= epsilon:
                tau = t
                if stop_at_consensus:
                    break
    else:
        while k < obs.size and obs[k] == 0.0:
            rows.append((osc, h, float(f.sum())))
            k += 1
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return RunRecord(times=obs[:k].copy(), osc=arr[:, 0], h_stat=arr[:, 1], sum=arr[:, 2],
                     consensus_time=tau, events=events, final_opinions=f)
