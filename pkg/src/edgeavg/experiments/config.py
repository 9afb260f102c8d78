"""Experiment configuration: a flat ``key = value`` document with dotted keys.

Example::

    experiment = q_decay
    graph.kind = lattice_1d
    times = 16, 64, 256
    replicas = 1000
    seed = 7

``#`` starts a comment, lists are comma separated, and every key is
validated; unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Any

from ..errors import ConfigError
from ..graph import GRAPH_KINDS, LATTICE_KINDS
from ..initials import KINDS as INIT_KINDS, InitialLaw

EXPERIMENTS = (
    "consensus_scaling",
    "q_decay",
    "local_tail",
    "variance_identity",
    "duality_check",
    "lp_norm",
    "biased_arc_lemma",
    "worst_case_bound",
    "snapshot",
)

NEEDS_EPSILON = ("consensus_scaling", "local_tail", "worst_case_bound")
NEEDS_TIMES = ("q_decay", "local_tail", "variance_identity", "duality_check", "lp_norm", "biased_arc_lemma",
               "snapshot")
FINITE_ONLY = ("consensus_scaling", "variance_identity", "duality_check", "worst_case_bound", "snapshot")
LATTICE_1D_ONLY = ("lp_norm", "biased_arc_lemma")


def _int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key) from None


def _float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key) from None


def _bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}", key)


def _list(conv):
    def parse(key, raw):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if not items:
            raise ConfigError("empty list", key)
        return tuple(conv(key, s) for s in items)
    return parse


def _str(key, raw):
    return raw.strip()


# key -> parser; values parse to the types ExperimentConfig stores
KEYS = {
    "experiment": _str,
    "graph.kind": _str,
    "graph.n": _list(_int),
    "graph.w": _int,
    "graph.h": _int,
    "graph.radius": _int,
    "graph.origin": _int,
    "init.kind": _str,
    "init.epsilon": _float,
    "init.alpha": _float,
    "init.value": _float,
    "init.stripe_width": _int,
    "init.arc_center": _int,
    "init.arc_radius": _float,
    "epsilon": _float,
    "times": _list(_float),
    "t_max": _float,
    "replicas": _int,
    "seed": _int,
    "out_dir": _str,
    "record_every": _float,
    "p": _list(_float),
    "mass_floor": _float,
    "workers": _int,
    "check_energy": _bool,
    "stats.alpha": _float,
    "stats.ball_radius": _float,
}


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: tuple = ()
    w: int | None = None
    h: int | None = None
    radius: int | None = None
    origin: int = 0

    @property
    def is_lattice(self) -> bool:
        return self.kind in LATTICE_KINDS


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    graph: GraphSpec
    init: InitialLaw
    times: tuple
    t_max: float
    replicas: int
    seed: int
    out_dir: str = "edgeavg_out"
    epsilon: float | None = None
    record_every: float | None = None
    p: tuple = (2.0,)
    mass_floor: float = 0.0
    workers: int = 1
    check_energy: bool = True
    stats_alpha: float = 2.0
    ball_radius: float | None = None


def read_pairs(text: str) -> dict[str, Any]:
    """Parse the document into {key: typed value}, rejecting unknown keys."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", exc.option) from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc.message.splitlines()[0]}") from None
    out = {}
    for key, raw in parser.items("config"):
        if key not in KEYS:
            raise ConfigError("unknown key", key)
        if raw is None or not raw.strip():
            raise ConfigError("missing value", key)
        out[key] = KEYS[key](key, raw)
    return out


def build_config(pairs: dict[str, Any]) -> ExperimentConfig:
    """Validate typed key/value pairs into an :class:`ExperimentConfig`."""
    def need(key):
        if key not in pairs:
            raise ConfigError(f"{key} required", key)
        return pairs[key]

    exp = need("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}", "experiment")

    kind = need("graph.kind")
    if kind not in GRAPH_KINDS + LATTICE_KINDS:
        raise ConfigError(f"unknown graph kind {kind!r}", "graph.kind")
    n = pairs.get("graph.n", ())
    if kind in ("cycle", "path", "complete") and not n:
        raise ConfigError(f"graph.n required for {kind}", "graph.n")
    if len(n) > 1 and exp != "consensus_scaling":
        raise ConfigError("a list of sizes is only allowed for consensus_scaling", "graph.n")
    if kind == "torus":
        need("graph.w")
        need("graph.h")
    if kind.startswith("lattice_window"):
        need("graph.radius")
    graph = GraphSpec(kind, n, pairs.get("graph.w"), pairs.get("graph.h"), pairs.get("graph.radius"),
                      pairs.get("graph.origin", 0))
    if exp in FINITE_ONLY and graph.is_lattice:
        raise ConfigError(f"{exp} needs a finite graph", "graph.kind")
    if exp in LATTICE_1D_ONLY and kind != "lattice_1d":
        raise ConfigError(f"{exp} runs on lattice_1d", "graph.kind")
    if exp == "consensus_scaling" and kind != "cycle":
        raise ConfigError("consensus_scaling runs on cycles", "graph.kind")

    init_kind = pairs.get("init.kind", "rademacher")
    if init_kind not in INIT_KINDS:
        raise ConfigError(f"unknown law {init_kind!r}", "init.kind")
    law = InitialLaw(
        init_kind,
        epsilon=pairs.get("init.epsilon"),
        alpha=pairs.get("init.alpha"),
        value=pairs.get("init.value"),
        stripe_width=pairs.get("init.stripe_width"),
        arc_center=pairs.get("init.arc_center"),
        arc_radius=pairs.get("init.arc_radius"),
    )
    if exp == "biased_arc_lemma" and init_kind != "biased_arc":
        raise ConfigError("biased_arc_lemma needs init.kind = biased_arc", "init.kind")
    if exp == "lp_norm" and init_kind not in ("rademacher", "uniform01", "stable", "constant"):
        raise ConfigError("lp_norm supports i.i.d. laws only", "init.kind")

    epsilon = pairs.get("epsilon")
    if exp == "biased_arc_lemma" and epsilon is None:
        epsilon = law.epsilon
    if exp in NEEDS_EPSILON and epsilon is None:
        raise ConfigError("epsilon required", "epsilon")
    if epsilon is not None and not epsilon > 0:
        raise ConfigError("epsilon must be positive", "epsilon")

    times = pairs.get("times", ())
    if exp in NEEDS_TIMES and not times:
        raise ConfigError("times required", "times")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("times must be strictly increasing", "times")
    if times and times[0] < 0:
        raise ConfigError("times must be nonnegative", "times")
    default_t_max = math.inf if exp == "consensus_scaling" else (times[-1] if times else None)
    t_max = pairs.get("t_max", default_t_max)
    if t_max is None:
        raise ConfigError("t_max required", "t_max")
    if not t_max >= 0:
        raise ConfigError("t_max must be nonnegative", "t_max")
    if times and times[-1] > t_max:
        raise ConfigError("times must lie in [0, t_max]", "times")
    if math.isinf(t_max) and exp != "consensus_scaling":
        raise ConfigError("t_max must be finite", "t_max")

    replicas = need("replicas")
    if replicas < 1:
        raise ConfigError("replicas must be at least 1", "replicas")
    seed = need("seed")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
    record_every = pairs.get("record_every")
    if record_every is not None and not record_every > 0:
        raise ConfigError("record_every must be positive", "record_every")
    p = pairs.get("p", (2.0,))
    if any(not x >= 1 for x in p):
        raise ConfigError("p must be at least 1", "p")
    mass_floor = pairs.get("mass_floor", 0.0)
    if not 0 <= mass_floor < 1:
        raise ConfigError("mass_floor must lie in [0, 1)", "mass_floor")
    if mass_floor and kind != "lattice_1d":
        raise ConfigError("mass_floor is only supported on lattice_1d", "mass_floor")
    workers = pairs.get("workers", 1)
    if workers < 1:
        raise ConfigError("workers must be at least 1", "workers")
    stats_alpha = pairs.get("stats.alpha", 2.0)
    if not stats_alpha > 0:
        raise ConfigError("stats.alpha must be positive", "stats.alpha")

    return ExperimentConfig(
        experiment=exp, graph=graph, init=law, times=tuple(times), t_max=float(t_max), replicas=replicas,
        seed=seed, out_dir=pairs.get("out_dir", "edgeavg_out"), epsilon=epsilon, record_every=record_every,
        p=tuple(p), mass_floor=mass_floor, workers=workers, check_energy=pairs.get("check_energy", True),
        stats_alpha=stats_alpha, ball_radius=pairs.get("stats.ball_radius"),
    )


def parse_config(text: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Parse and validate a config document; ``overrides`` (typed, by key) win over the file."""
    pairs = read_pairs(text)
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError("unknown key", key)
        if value is not None:
            pairs[key] = value
    return build_config(pairs)
