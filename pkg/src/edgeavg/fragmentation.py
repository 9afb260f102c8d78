"""The fragmentation process and its dispersion statistics.

The fragmentation process started at ``o`` follows the averaging dynamics
from the indicator mass at ``o``. A ring of an edge whose endpoints both
carry zero mass changes nothing, so only edges touching the support need
clocks; that makes exact simulation on the infinite lattices possible
("support-local" mode).

Two engines are provided. ``engine="reference"`` draws one Exp(#active)
wait per ring with :func:`edgeavg.dynamics.next_event` and recomputes
statistics naively; it is the oracle. ``engine="fast"`` (finite graphs and
Z) counts rings per time span with a Poisson draw and picks each rung edge
uniformly from a buffer of raw random words, which is the same law at a
fraction of the cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .dynamics import _check_times, next_event
from .errors import InvariantError, ParameterError
from .graph import Graph, Lattice

MASS_ATOL = 1e-9
_BITS_WORDS = 1 << 16


@dataclass(frozen=True)
class DispersionStats:
    q: float
    energy: float
    support_size: int
    ball_mass: float
    alpha_norm: float


class MassState:
    """Sparse fragmentation mass ``m_t`` on a graph or lattice.

    Storage depends on the domain: a dense vector on finite graphs, a
    zero-padded window over the support interval on Z, and a dict keyed by
    coordinate on Z^2. ``dropped_mass`` bounds the L1 distance to the
    untruncated process when a mass floor was used (0 otherwise).
    """

    def __init__(self, domain: Graph | Lattice, origin=None):
        self.domain = domain
        self.time = 0.0
        self.q = 1.0
        self.dropped_mass = 0.0
        if isinstance(domain, Graph):
            origin = 0 if origin is None else int(origin)
            if not 0 <= origin < domain.vertex_count:
                raise ParameterError(f"origin {origin} out of range")
            self._m = np.zeros(domain.vertex_count)
            self._m[origin] = 1.0
            self._support_count = 1
        elif domain.dim == 1:
            origin = 0 if origin is None else int(origin)
            self._m = np.zeros(64)
            self._L = self._R = 32
            self._offset = origin - 32
            self._m[32] = 1.0
        else:
            origin = (0, 0) if origin is None else tuple(int(c) for c in origin)
            self._d = {origin: 1.0}
            self._active = []
            self._active_index = {}
            self._activate(origin)
        self.origin = origin

    @classmethod
    def from_masses(cls, domain: Graph | Lattice, masses: dict, origin=None, time: float = 0.0) -> MassState:
        """A state with the given {vertex: mass} (e.g. to evaluate statistics of a known profile)."""
        state = cls(domain, origin)
        state.time = float(time)
        if state.kind == "finite":
            state._m[:] = 0.0
            for v, x in masses.items():
                state._m[v] = x
            state._support_count = int(np.count_nonzero(state._m))
        elif state.kind == "z1":
            lo, hi = min(masses), max(masses)
            width = hi - lo + 1
            state._m = np.zeros(2 * width + 64)
            state._L = 32
            state._R = 32 + width - 1
            state._offset = lo - 32
            for v, x in masses.items():
                state._m[v - state._offset] = x
        else:
            state._d = {}
            state._active = []
            state._active_index = {}
            for v, x in masses.items():
                v = tuple(v)
                state._d[v] = float(x)
                state._activate(v)
        state.q = float(sum(x * x for x in masses.values()))
        return state

    # -- layout helpers
    @property
    def is_finite(self) -> bool:
        return isinstance(self.domain, Graph)

    @property
    def kind(self) -> str:
        if self.is_finite:
            return "finite"
        return "z1" if self.domain.dim == 1 else "z2"

    def _activate(self, v):
        for w in self.domain.neighbors(v):
            e = (v, w) if v < w else (w, v)
            if e not in self._active_index:
                self._active_index[e] = len(self._active)
                self._active.append(e)

    def _ensure_window(self, lo_idx, hi_idx):
        """Grow the Z window so indices lo_idx-1 .. hi_idx+2 exist."""
        n = self._m.shape[0]
        if lo_idx >= 2 and hi_idx <= n - 3:
            return
        width = self._R - self._L + 1
        new_n = max(2 * n, 4 * width + 64)
        new = np.zeros(new_n)
        start = (new_n - width) // 2
        new[start:start + width] = self._m[self._L:self._R + 1]
        self._offset += self._L - start
        self._R = start + width - 1
        self._L = start
        self._m = new

    # -- views
    def support_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(vertices, masses) over the vertices with positive mass."""
        if self.kind == "finite":
            idx = np.flatnonzero(self._m > 0)
            return idx, self._m[idx]
        if self.kind == "z1":
            ms = self._m[self._L:self._R + 1]
            coords = np.arange(self._L, self._R + 1) + self._offset
            keep = ms > 0
            return coords[keep], ms[keep]
        items = [(v, x) for v, x in self._d.items() if x > 0]
        coords = np.array([v for v, _ in items], dtype=np.int64).reshape(-1, 2)
        return coords, np.array([x for _, x in items])

    @property
    def support(self) -> set:
        coords, _ = self.support_arrays()
        return set(map(tuple, coords.tolist())) if self.kind == "z2" else set(coords.tolist())

    def mass_of(self, v) -> float:
        if self.kind == "finite":
            return float(self._m[v])
        if self.kind == "z1":
            i = int(v) - self._offset
            return float(self._m[i]) if 0 <= i < self._m.shape[0] else 0.0
        return float(self._d.get(tuple(v), 0.0))

    def total_mass(self) -> float:
        return float(self.support_arrays()[1].sum())

    def active_edge_count(self) -> int:
        if self.kind == "finite":
            return self.domain.edge_count
        if self.kind == "z1":
            return self._R - self._L + 2
        return len(self._active)

    def active_edge(self, rank: int):
        if self.kind == "finite":
            return rank
        if self.kind == "z1":
            a = self._L - 1 + rank + self._offset
            return (a, a + 1)
        return self._active[rank]

    def copy(self) -> MassState:
        new = MassState.__new__(MassState)
        new.__dict__.update(self.__dict__)
        if self.kind == "z2":
            new._d = dict(self._d)
            new._active = list(self._active)
            new._active_index = dict(self._active_index)
        else:
            new._m = self._m.copy()
        return new


def init_fragmentation(domain: Graph | Lattice, origin=None) -> MassState:
    """Unit mass at ``origin`` (default vertex 0 / the lattice origin)."""
    return MassState(domain, origin)


def apply_ring_mass(state: MassState, edge) -> MassState:
    """Ring one edge: both endpoints take the average mass. Mutates and returns ``state``.

    ``edge`` is an edge index on a finite graph and a pair of adjacent
    coordinates on a lattice.
    """
    if state.kind == "finite":
        u, v = state.domain.edges[edge]
        m = state._m
        x, y = m[u], m[v]
        avg = 0.5 * (x + y)
        state.q -= 0.5 * (x - y) ** 2
        state._support_count += 2 * (avg > 0) - (x > 0) - (y > 0)
        m[u] = m[v] = avg
        return state
    u, v = edge
    if state.kind == "z1":
        if abs(u - v) != 1:
            raise ParameterError(f"{edge} is not an edge of Z")
        a = min(u, v) - state._offset
        state._ensure_window(a, a + 1)
        a = min(u, v) - state._offset
        m = state._m
        x, y = m[a], m[a + 1]
        avg = 0.5 * (x + y)
        state.q -= 0.5 * (x - y) ** 2
        m[a] = m[a + 1] = avg
        if avg > 0:
            state._L = min(state._L, a)
            state._R = max(state._R, a + 1)
        return state
    u, v = tuple(u), tuple(v)
    if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
        raise ParameterError(f"{edge} is not an edge of Z^2")
    x, y = state._d.get(u, 0.0), state._d.get(v, 0.0)
    if x == 0.0 and y == 0.0:
        return state
    avg = 0.5 * (x + y)
    state.q -= 0.5 * (x - y) ** 2
    for w, old in ((u, x), (v, y)):
        state._d[w] = avg
        if old == 0.0 and avg > 0:
            state._activate(w)
    return state


@lru_cache(maxsize=256)
def _graph_ball_mask(g: Graph, center: int, radius: float) -> np.ndarray:
    return g.distances_from(center, cutoff=radius) >= 0


def _energy(state: MassState) -> float:
    if state.kind == "finite":
        return float(K.energy_finite(state._m, state.domain.eu, state.domain.ev))
    if state.kind == "z1":
        ms = state._m[state._L - 1:state._R + 2]
        return float(np.sum(np.diff(ms) ** 2))
    e = 0.0
    for v, x in state._d.items():
        for w in state.domain.neighbors(v):
            y = state._d.get(w)
            if y is None:
                e += x * x
            elif v < w:
                e += (x - y) ** 2
    return e


def dispersion_stats(state: MassState, ball_center=None, ball_radius: float = 0.0, alpha: float = 2.0) -> DispersionStats:
    """Q, Dirichlet energy, support size, ball mass and alpha-norm of the mass.

    The ball is the set of vertices at distance strictly less than
    ``ball_radius`` from ``ball_center`` (default: the origin).
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    coords, ms = state.support_arrays()
    center = state.origin if ball_center is None else ball_center
    if state.kind == "finite":
        inside = _graph_ball_mask(state.domain, int(center), float(ball_radius))[coords]
    else:
        inside = state.domain.distance(coords, center) < ball_radius
    return DispersionStats(
        q=float(np.sum(ms * ms)),
        energy=_energy(state),
        support_size=int(ms.size),
        ball_mass=float(ms[inside].sum()),
        alpha_norm=float(np.sum(ms ** alpha) ** (1.0 / alpha)),
    )


def energy_lemma_holds(q: float, energy: float, n=math.inf) -> bool:
    """energy >= q^3/8, vacuously true when q < 2/n."""
    return q < 2.0 / n or energy >= q ** 3 / 8.0


@dataclass
class FragmentationRun:
    """Observed statistics of one fragmentation trajectory."""

    times: np.ndarray
    stats: list
    states: list = field(default_factory=list)
    events: int = 0
    energy_violations: int = 0
    energy_checked: bool = False
    tracked_energy: float = math.nan
    final: MassState | None = None

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.stats))

    def __len__(self):
        return len(self.stats)


def _radius_at(ball_radius, t):
    if ball_radius is None:
        return 4.0 * math.sqrt(t)
    return float(ball_radius(t)) if callable(ball_radius) else float(ball_radius)


class _Bits:
    """Raw 32-bit words drawn from a generator's bit stream."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.words = np.empty(0, dtype=np.uint32)
        self.pos = 0

    def refill(self):
        self.words = self.rng.bit_generator.random_raw(_BITS_WORDS).view(np.uint32)
        self.pos = 0


def run_fragmentation(state: MassState, t_max: float, rng: np.random.Generator,
                      observe_at: Sequence[float] = (0.0,), mode: str | None = None,
                      engine: str = "fast", ball_center=None,
                      ball_radius: float | Callable[[float], float] | None = None, alpha: float = 2.0,
                      check_energy: bool = False, mass_floor: float = 0.0,
                      keep_states: bool = False) -> FragmentationRun:
    """Advance ``state`` (in place) to ``t_max`` and record statistics.

    ``mode`` is ``"finite"`` on a finite graph and ``"support_local"`` on a
    lattice; it defaults to whichever matches the state's domain. The ball
    radius defaults to 4*sqrt(t) at each observation time. With
    ``check_energy`` every visited state (with Q >= 2/n on finite graphs) is
    tested against energy >= Q^3/8 and failures are counted.

    ``mass_floor`` (Z only) drops boundary rings that would create a vertex
    with mass below the floor; the dropped mass is accumulated in
    ``state.dropped_mass`` as an L1 error bound.
    """
    expected = "finite" if state.is_finite else "support_local"
    mode = mode or expected
    if mode not in ("finite", "support_local"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode != expected:
        raise ParameterError(f"{mode} mode needs a {'finite graph' if mode == 'finite' else 'lattice'}")
    if engine not in ("fast", "reference"):
        raise ParameterError(f"unknown engine {engine!r}")
    if mass_floor and (state.kind != "z1" or engine != "fast"):
        raise ParameterError("mass_floor is only supported by the fast engine on Z")
    obs = _check_times(t_max, observe_at)
    if obs.size and obs[0] < state.time:
        raise ParameterError("observation before the state's current time")

    n = state.domain.vertex_count
    run = FragmentationRun(times=obs.copy(), stats=[], energy_checked=check_energy)

    def record(t):
        run.stats.append(dispersion_stats(state, ball_center, _radius_at(ball_radius, t), alpha))
        if keep_states:
            snap = state.copy()
            snap.time = t
            run.states.append(snap)

    if engine == "reference" or state.kind == "z2":
        _run_reference(state, t_max, obs, rng, record, run, n)
    elif state.kind == "finite":
        _run_fast_finite(state, t_max, obs, rng, record, run, n)
    else:
        _run_fast_z(state, t_max, obs, rng, record, run, mass_floor)
    state.time = float(t_max)
    total = state.total_mass()
    if abs(total - 1.0) > MASS_ATOL:
        raise InvariantError(f"fragmentation mass drifted to {total!r}")
    run.final = state
    return run


def _ring_energy_change(state, u, v):
    """Change of the Dirichlet energy if edge (u, v) rings now."""
    x, y = state.mass_of(u), state.mass_of(v)
    avg = 0.5 * (x + y)
    d = -(x - y) ** 2
    for a, old in ((u, x), (v, y)):
        other = v if a is u else u
        for w in state.domain.neighbors(a):
            if (w != other) if state.kind != "z2" else (tuple(w) != tuple(other)):
                mw = state.mass_of(w)
                d += (avg - mw) ** 2 - (old - mw) ** 2
    return d


def _run_reference(state, t_max, obs, rng, record, run, n):
    t = state.time
    k = 0
    energy = _energy(state) if run.energy_checked else 0.0
    while True:
        count = state.active_edge_count()
        wait, rank = next_event(count, rng)
        tn = t + wait
        while k < obs.size and obs[k] < tn:
            state.time = obs[k]
            record(obs[k])
            k += 1
        if tn > t_max:
            break
        edge = state.active_edge(rank)
        if run.energy_checked:
            u, v = state.domain.edges[edge] if state.is_finite else edge
            energy += _ring_energy_change(state, u, v)
        apply_ring_mass(state, edge)
        t = tn
        run.events += 1
        if run.energy_checked and not energy_lemma_holds(state.q, energy, n):
            run.energy_violations += 1
    if run.energy_checked:
        run.tracked_energy = energy


def _run_fast_finite(state, t_max, obs, rng, record, run, n):
    g = state.domain
    bits = _Bits(rng)
    fst = np.array([state.q, _energy(state)])
    ist = np.array([state._support_count, 0, 0, 0], dtype=np.int64)
    q_floor = 2.0 / n
    t = state.time
    stops = list(obs) + ([t_max] if not obs.size or obs[-1] < t_max else [])
    for j, s in enumerate(stops):
        pending = int(rng.poisson(g.edge_count * (s - t))) if s > t else 0
        while pending > 0:
            done, bits.pos = K.mass_finite_kernel(state._m, g.eu, g.ev, g.indptr, g.nbr, bits.words, bits.pos,
                                                  pending, fst, ist, run.energy_checked, q_floor)
            pending -= done
            if pending:
                bits.refill()
        t = s
        state.q = float(fst[0])
        state._support_count = int(ist[0])
        if j < obs.size:
            state.time = s
            record(s)
    run.events = int(ist[2])
    run.energy_violations = int(ist[1])
    if run.energy_checked:
        run.tracked_energy = float(fst[1])


def _run_fast_z(state, t_max, obs, rng, record, run, mass_floor):
    bits = _Bits(rng)
    fst = np.array([state.time, state.q, _energy(state), state.dropped_mass, 0.0])
    ist = np.array([state._L, state._R, 0, 0, 0, 0, 0], dtype=np.int64)
    stops = list(obs) + ([t_max] if not obs.size or obs[-1] < t_max else [])
    for j, s in enumerate(stops):
        while True:
            status, bits.pos = K.mass_z_kernel(state._m, bits.words, bits.pos, rng, fst, ist, float(s),
                                               float(mass_floor), run.energy_checked)
            state._L, state._R = int(ist[0]), int(ist[1])
            if status == 0:
                break
            if status == 1:
                bits.refill()
            else:
                state._ensure_window(state._L - 1, state._R + 1)
                ist[0], ist[1] = state._L, state._R
        state.q = float(fst[1])
        state.dropped_mass = float(fst[3])
        if j < obs.size:
            state.time = s
            record(s)
    run.events = int(ist[3])
    run.energy_violations = int(ist[2])
    if run.energy_checked:
        run.tracked_energy = float(fst[2])
