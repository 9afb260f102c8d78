"""Opinions at the origin through the duality with the fragmentation process.

The forward opinion at ``o`` at time ``t`` has the law of the weighted sum
``sum_v m_t(v) f_0(v)`` where ``m_t`` is the fragmentation mass started at
``o`` and ``f_0`` is drawn independently of it. Callers keep the two
independent by passing a separate random stream for the opinions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ParameterError
from .fragmentation import MassState
from .graph import Graph
from .initials import InitialLaw, sample_profile, sample_values, symmetric_stable


@dataclass(frozen=True)
class DualitySample:
    """One draw of f_t(o) together with the mass and opinions that produced it."""

    value: float
    q_of_run: float
    alpha_norm_of_run: float | None = None
    vertices: np.ndarray | None = field(default=None, repr=False, compare=False)
    weights: np.ndarray | None = field(default=None, repr=False, compare=False)
    opinions: np.ndarray | None = field(default=None, repr=False, compare=False)


def _check_law_fits(law: InitialLaw, mass: MassState):
    g = mass.domain
    if law.kind == "arc_mixture" and not (isinstance(g, Graph) and g.kind == "cycle"):
        raise ConfigError("arc_mixture needs the mass to live on a cycle", "init.kind")
    if law.kind == "biased_arc" and law.arc is not None and isinstance(g, Graph):
        if len(law.arc) and (law.arc.vertices[0] < 0 or law.arc.vertices[-1] >= g.vertex_count):
            raise ConfigError("arc lies outside the graph", "init.arc_center")
    if law.kind == "biased_arc" and law.arc is None and isinstance(g, Graph) and law.arc_center is not None:
        if not 0 <= law.arc_center < g.vertex_count:
            raise ConfigError("arc center lies outside the graph", "init.arc_center")


def opinion_via_duality(mass: MassState, law: InitialLaw, rng: np.random.Generator,
                        alpha: float | None = None, keep_terms: bool = False) -> DualitySample:
    """Draw f_0 on the support of ``mass`` and return the weighted sum.

    Vertices outside the support are never sampled. The result is clipped
    to the range of the drawn opinions, which the exact value lies in; this
    only removes rounding in the last bit.
    """
    _check_law_fits(law, mass)
    coords, ms = mass.support_arrays()
    if law.kind == "arc_mixture":
        f0 = sample_profile(law, mass.domain, rng)[coords]
    else:
        f0 = sample_values(law, coords, mass.domain, rng)
    value = float(np.clip(np.dot(ms, f0), f0.min(), f0.max()))
    q = float(np.dot(ms, ms))
    norm = None if alpha is None else float(np.sum(ms ** alpha) ** (1.0 / alpha))
    if keep_terms:
        return DualitySample(value, q, norm, coords, ms, f0)
    return DualitySample(value, q, norm)


def stable_opinion_magnitude(mass: MassState, alpha: float, rng: np.random.Generator) -> float:
    """f_t(o) under i.i.d. standard symmetric alpha-stable opinions.

    A weighted sum of such variables is stable with scale equal to the
    alpha-norm of the weights, so one draw S gives ``||m||_alpha * S``.
    """
    if not 0 < alpha <= 2:
        raise ParameterError("alpha must lie in (0, 2]")
    _, ms = mass.support_arrays()
    norm = float(np.sum(ms ** alpha) ** (1.0 / alpha))
    return norm * float(symmetric_stable(alpha, 1, rng)[0])


def random_walk_endpoints(g: Graph, origin: int, t: float, rng: np.random.Generator, count: int) -> np.ndarray:
    """Positions at time ``t`` of ``count`` independent walks from ``origin``.

    The walk waits Exp(deg) at each vertex for a ring among its edges,
    picks the rung edge uniformly and crosses it with probability 1/2; its
    law at time t is the mean fragmentation mass.
    """
    if not t >= 0:
        raise ParameterError("t must be nonnegative")
    if not 0 <= origin < g.vertex_count:
        raise ParameterError(f"origin {origin} out of range")
    return K.walk_kernel(g.indptr, g.nbr, int(origin), float(t), rng, int(count))


def random_walk_endpoint(g: Graph, origin: int, t: float, rng: np.random.Generator) -> int:
    return int(random_walk_endpoints(g, origin, t, rng, 1)[0])
