import csv
import os

import numpy as np
import pytest

from edgeavg.errors import ConfigError
from edgeavg.experiments.cli import main
from edgeavg.experiments.config import EXPERIMENTS, parse_config
from edgeavg.experiments.output import read_grid, read_summary, write_outputs
from edgeavg.experiments.runner import REGISTRY, run_experiment, tkey
from edgeavg.experiments.streams import replica_streams, split_stream

MINIMAL_Q_DECAY = """
experiment = q_decay
graph.kind = lattice_1d
times = 16, 64, 256
replicas = 1000
seed = 7
"""

# small configs for every experiment: (text, rows per replica)
SMALL = {
    "consensus_scaling": ("graph.kind = cycle\ngraph.n = 8, 12, 16\nepsilon = 0.4\n", 3),
    "q_decay": ("graph.kind = lattice_1d\ntimes = 4, 16\nmass_floor = 1e-30\n", 2),
    "local_tail": ("graph.kind = cycle\ngraph.n = 30\nepsilon = 0.5\ntimes = 5, 20\n", 2),
    "variance_identity": ("graph.kind = cycle\ngraph.n = 12\ntimes = 3\n", 1),
    "duality_check": ("graph.kind = cycle\ngraph.n = 10\ntimes = 2, 5\n", 2),
    "lp_norm": ("graph.kind = lattice_1d\ntimes = 4, 16, 64\np = 2, 4\n", 3),
    "biased_arc_lemma": ("graph.kind = lattice_1d\ninit.kind = biased_arc\ninit.epsilon = 0.3\ntimes = 50\n"
                         "mass_floor = 1e-12\n", 1),
    "worst_case_bound": ("graph.kind = cycle\ngraph.n = 16\ninit.kind = stripes\ninit.stripe_width = 8\n"
                         "epsilon = 0.5\nt_max = 500\n", 1),
    "snapshot": ("graph.kind = torus\ngraph.w = 6\ngraph.h = 4\ntimes = 0, 2, 8\nrecord_every = 1\n", 9),
}


def _small(name, replicas=6, seed=5):
    body, per = SMALL[name]
    return f"experiment = {name}\n{body}replicas = {replicas}\nseed = {seed}\n", per


def test_minimal_q_decay_config():
    cfg = parse_config(MINIMAL_Q_DECAY)
    assert cfg.experiment == "q_decay" and cfg.graph.kind == "lattice_1d"
    assert cfg.times == (16.0, 64.0, 256.0) and cfg.t_max == 256.0
    assert cfg.replicas == 1000 and cfg.seed == 7 and cfg.init.kind == "rademacher"


def test_local_tail_requires_epsilon():
    text = "experiment = local_tail\ngraph.kind = cycle\ngraph.n = 10\ntimes = 1\nreplicas = 3\nseed = 1\n"
    with pytest.raises(ConfigError, match="epsilon required"):
        parse_config(text)


def test_flag_overrides_file_value():
    assert parse_config(MINIMAL_Q_DECAY, {"replicas": 50}).replicas == 50
    assert parse_config(MINIMAL_Q_DECAY, {"replicas": None}).replicas == 1000


@pytest.mark.parametrize("text, key", [
    (MINIMAL_Q_DECAY + "graph.size = 3\n", "graph.size"),
    (MINIMAL_Q_DECAY + "seed = 8\n", "seed"),
    (MINIMAL_Q_DECAY.replace("replicas = 1000", "replicas = many"), "replicas"),
    (MINIMAL_Q_DECAY.replace("16, 64, 256", "64, 16"), "times"),
    (MINIMAL_Q_DECAY + "t_max = 100\n", "times"),
    (MINIMAL_Q_DECAY.replace("lattice_1d", "cycle"), "graph.n"),
    (MINIMAL_Q_DECAY.replace("q_decay", "snapshot"), "graph.kind"),
    (MINIMAL_Q_DECAY.replace("seed = 7", ""), "seed"),
    (MINIMAL_Q_DECAY + "init.kind = gaussian\n", "init.kind"),
])
def test_config_errors_carry_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_split_stream_properties():
    a = split_stream(7, 0).random(10_000)
    b = split_stream(7, 1).random(10_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert np.array_equal(a, split_stream(7, 0).random(10_000))
    assert split_stream(7, 0).random() != split_stream(8, 0).random()
    kids = [s.random(1000) for s in replica_streams(7, 0, 3)]
    assert max(abs(np.corrcoef(kids)[i, j]) for i in range(3) for j in range(i + 1, 3)) < 0.1


def test_every_experiment_is_registered():
    assert set(REGISTRY) == set(EXPERIMENTS) == set(SMALL)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_outputs_round_trip(name, tmp_path):
    text, per = _small(name)
    cfg = parse_config(text, {"out_dir": str(tmp_path)})
    result = run_experiment(cfg)
    paths = write_outputs(cfg.out_dir, result)
    with open(paths[0], newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == REGISTRY[name].columns
    body = rows[1:]
    assert len(body) == cfg.replicas * per
    parsed = [[float(x) for x in row] for row in body]
    keys = [(row[0], row[1]) for row in parsed] if name != "worst_case_bound" else [row[0] for row in parsed]
    assert keys == sorted(keys)
    assert [r[0] for r in parsed] == sorted(r[0] for r in parsed)
    summary = read_summary(paths[1])
    assert summary["experiment"] == name and summary["replicas"] == str(cfg.replicas)


def test_snapshot_grids_parse(tmp_path):
    text, _ = _small("snapshot", replicas=1)
    out = tmp_path / "snap"
    assert main(["run", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    for t in (0, 2, 8):
        grid = read_grid(out / f"snapshot_t{tkey(t)}.csv")
        assert grid.shape == (4, 6)
    assert set(np.unique(read_grid(out / "snapshot_t0.csv"))) <= {-1.0, 1.0}
    summary = read_summary(out / "summary.txt")
    assert float(summary["osc_t0"]) == 2.0


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_all(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))}


@pytest.mark.parametrize("name", ["duality_check", "q_decay", "snapshot", "consensus_scaling"])
def test_reruns_are_byte_identical(name, tmp_path):
    text, _ = _small(name, replicas=8)
    cfg = _write(tmp_path, text)
    outs = []
    for k, workers in enumerate(("1", "1", "2")):
        d = str(tmp_path / f"out{k}")
        assert main(["run", "--config", cfg, "--out", d, "--workers", workers]) == 0
        outs.append(_read_all(d))
    assert outs[0] == outs[1] == outs[2]


def test_seed_flag_changes_output(tmp_path):
    text, _ = _small("duality_check")
    cfg = _write(tmp_path, text)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "6"])
    assert _read_all(tmp_path / "a")["timeseries.csv"] != _read_all(tmp_path / "b")["timeseries.csv"]


def test_cli_exit_codes(tmp_path, capsys):
    good, _ = _small("variance_identity")
    assert main(["run", "--config", _write(tmp_path, good), "--out", str(tmp_path / "ok")]) == 0
    assert str(tmp_path / "ok" / "timeseries.csv") in capsys.readouterr().out
    bad = good.replace("replicas = 6", "replicas = 0")
    assert main(["run", "--config", _write(tmp_path, bad, "bad.cfg")]) == 1
    assert "replicas" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "--config", _write(tmp_path, good), "--out", str(blocker / "sub")]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_cli_experiment_override(tmp_path):
    text, _ = _small("variance_identity")
    out = tmp_path / "o"
    assert main(["run", "--config", _write(tmp_path, text), "--experiment", "duality_check",
                 "--out", str(out)]) == 0
    assert read_summary(out / "summary.txt")["experiment"] == "duality_check"
