"""Initial-opinion laws.

Product laws (Rademacher, uniform, constant, symmetric stable, biased arc,
stripes) can be drawn for any finite list of vertices, which is what the
duality sampler needs on Z. The arc mixture is a mixture over arcs of a
cycle and is only drawn as a whole profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import Graph, Lattice, VertexSet, ball, in_ball

KINDS = ("rademacher", "uniform01", "biased_arc", "arc_mixture", "stable", "constant", "stripes")


def symmetric_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Symmetric alpha-stable draws with characteristic function exp(-|θ|^alpha).

    Chambers-Mallows-Stuck: a uniform angle on (-π/2, π/2) and a unit
    exponential. alpha=2 gives N(0, 2), alpha=1 the standard Cauchy.
    """
    if not 0 < alpha <= 2:
        raise ConfigError("alpha must lie in (0, 2]", "init.alpha")
    v = np.pi * (rng.random(size) - 0.5)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


@dataclass(frozen=True)
class ArcLayout:
    """Arc geometry for the mixture on the n-cycle: k arcs of 2*ell - 1 vertices."""

    n: int
    ell: int
    k: int
    centers: tuple
    arcs: tuple

    @classmethod
    def for_cycle(cls, n: int, epsilon: float) -> ArcLayout:
        ell = math.floor(math.log(n) / (36 * epsilon ** 2))
        if ell < 1:
            raise ConfigError(f"arc length ell = floor(log n / (36 eps^2)) = {ell} < 1", "init.epsilon")
        k = n // (2 * ell)
        if k < 1:
            raise ConfigError(f"arc count k = floor(n / (2 ell)) = {k} < 1", "graph.n")
        centers = tuple(2 * ell * i for i in range(k))
        arcs = tuple(VertexSet(tuple(sorted((c + d) % n for d in range(-(ell - 1), ell)))) for c in centers)
        layout = cls(n, ell, k, centers, arcs)
        layout._validate()
        return layout

    def _validate(self):
        seen = set()
        for arc in self.arcs:
            if len(arc) != 2 * self.ell - 1 or seen & set(arc):
                raise ConfigError("arcs overlap", "init.epsilon")
            seen |= set(arc)
        for i, a in enumerate(self.centers):
            for b in self.centers[i + 1:]:
                d = abs(a - b)
                if min(d, self.n - d) < 2 * self.ell:
                    raise ConfigError("arc centers closer than 2*ell", "init.epsilon")


@dataclass(frozen=True)
class InitialLaw:
    kind: str
    epsilon: float | None = None
    alpha: float | None = None
    value: float | None = None
    stripe_width: int | None = None
    arc: VertexSet | None = None
    arc_center: int | None = None
    arc_radius: float | None = None

    def __post_init__(self):
        k = self.kind
        if k not in KINDS:
            raise ConfigError(f"unknown law {k!r}", "init.kind")
        if k == "biased_arc":
            if self.epsilon is None or not 0 < self.epsilon <= 1 / 3:
                raise ConfigError("biased_arc needs epsilon in (0, 1/3]", "init.epsilon")
            if self.arc_radius is not None and self.arc_radius < 0:
                raise ConfigError("arc_radius must be nonnegative", "init.arc_radius")
        if k == "arc_mixture" and (self.epsilon is None or not 0 < self.epsilon <= 1 / 3):
            raise ConfigError("arc_mixture needs epsilon in (0, 1/3]", "init.epsilon")
        if k == "stable" and (self.alpha is None or not 0 < self.alpha <= 2):
            raise ConfigError("stable needs alpha in (0, 2]", "init.alpha")
        if k == "constant" and self.value is None:
            raise ConfigError("constant needs a value", "init.value")
        if k == "stripes" and (self.stripe_width is None or self.stripe_width < 1):
            raise ConfigError("stripes needs stripe_width >= 1", "init.stripe_width")

    @property
    def plus_probability(self) -> float:
        """P(+1) on the biased arc."""
        return (1 + 3 * self.epsilon) / 2

    def arc_mask(self, coords, domain: Graph | Lattice) -> np.ndarray:
        coords = np.asarray(coords)
        self._need_arc()
        if self.arc is not None:
            return np.isin(coords, self.arc.as_array())
        center = self.arc_center if self.arc_center is not None else (
            domain.origin() if isinstance(domain, Lattice) else 0)
        return in_ball(domain, coords, center, self.arc_radius)

    def _need_arc(self):
        if self.arc is None and self.arc_radius is None:
            raise ConfigError("biased_arc needs an arc or arc_radius", "init.arc_radius")

    def resolve_arc(self, g: Graph) -> VertexSet:
        self._need_arc()
        if self.arc is not None:
            return self.arc
        return ball(g, self.arc_center or 0, self.arc_radius)


def _stripes(coords, width, domain):
    pos = domain.column_of(coords) if isinstance(domain, Graph) else np.asarray(coords)
    if pos.ndim > 1:
        pos = pos[..., 0]
    return np.where((pos // width) % 2 == 0, 1.0, -1.0)


def sample_values(law: InitialLaw, coords, domain: Graph | Lattice, rng: np.random.Generator) -> np.ndarray:
    """Independent draws of the initial opinion at each of ``coords``."""
    coords = np.asarray(coords)
    size = coords.shape[0]
    k = law.kind
    if k == "rademacher":
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)
    if k == "uniform01":
        return rng.random(size)
    if k == "constant":
        return np.full(size, float(law.value))
    if k == "stable":
        return symmetric_stable(law.alpha, size, rng)
    if k == "stripes":
        return _stripes(coords, law.stripe_width, domain)
    if k == "biased_arc":
        p = np.where(law.arc_mask(coords, domain), law.plus_probability, 0.5)
        return np.where(rng.random(size) < p, 1.0, -1.0)
    raise ConfigError(f"{k} is not a product law; sample it as a whole profile", "init.kind")


def sample_profile(law: InitialLaw, g: Graph, rng: np.random.Generator) -> np.ndarray:
    """One full draw of the initial profile on ``g``."""
    if law.kind == "arc_mixture":
        if g.kind != "cycle":
            raise ConfigError("arc_mixture is defined on cycles only", "graph.kind")
        layout = ArcLayout.for_cycle(g.vertex_count, law.epsilon)
        i = int(rng.integers(layout.k))
        p = np.full(g.vertex_count, 0.5)
        p[layout.arcs[i].as_array()] = (1 + 3 * law.epsilon) / 2
        return np.where(rng.random(g.vertex_count) < p, 1.0, -1.0)
    if law.kind == "biased_arc" and law.arc is not None and law.arc.vertices \
            and law.arc.vertices[-1] >= g.vertex_count:
        raise ConfigError("arc lies outside the graph", "init.arc_center")
    return sample_values(law, np.arange(g.vertex_count), g, rng)


@dataclass(frozen=True)
class LawMean:
    """Mean of one initial opinion.

    ``finite`` is False for stable laws with alpha <= 1, where ``value`` is
    the symmetry center. For biased arcs ``value`` is the off-arc mean and
    ``arc_value`` the mean on the arc.
    """

    value: float
    finite: bool = True
    arc_value: float | None = None


def law_mean(law: InitialLaw, g: Graph | None = None) -> LawMean:
    k = law.kind
    if k == "rademacher":
        return LawMean(0.0)
    if k == "uniform01":
        return LawMean(0.5)
    if k == "constant":
        return LawMean(float(law.value))
    if k == "stable":
        return LawMean(0.0, finite=law.alpha > 1)
    if k == "biased_arc":
        return LawMean(0.0, arc_value=3 * law.epsilon)
    if k == "arc_mixture":
        if g is None:
            return LawMean(0.0, arc_value=math.nan)
        layout = ArcLayout.for_cycle(g.vertex_count, law.epsilon)
        return LawMean(0.0, arc_value=3 * law.epsilon / layout.k)
    # stripes: a deterministic pattern; the mean is its average over g
    if g is None:
        return LawMean(math.nan)
    return LawMean(float(_stripes(np.arange(g.vertex_count), law.stripe_width, g).mean()))
