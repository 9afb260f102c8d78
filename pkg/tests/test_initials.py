import math

import numpy as np
import pytest
from scipy import stats as sps

from edgeavg.errors import ConfigError
from edgeavg.graph import Lattice, VertexSet, cycle, path, torus
from edgeavg.initials import ArcLayout, InitialLaw, law_mean, sample_profile, sample_values, symmetric_stable


def test_stable_alpha2_is_normal_with_variance_2():
    x = symmetric_stable(2.0, 100_000, np.random.default_rng(0))
    assert abs(x.var() - 2.0) < 0.05


def test_stable_alpha1_is_standard_cauchy():
    x = symmetric_stable(1.0, 100_000, np.random.default_rng(1))
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert abs((q3 - q1) - 2.0) < 0.05


@pytest.mark.parametrize("alpha", [0.7, 1.5])
def test_stable_matches_scipy_levy_stable(alpha):
    ours = symmetric_stable(alpha, 20_000, np.random.default_rng(2))
    ref = sps.levy_stable.rvs(alpha, 0.0, size=20_000, random_state=np.random.default_rng(3))
    assert sps.ks_2samp(ours, ref).pvalue > 1e-3


def test_stable_rejects_bad_alpha():
    with pytest.raises(ConfigError):
        symmetric_stable(2.5, 3, np.random.default_rng())
    with pytest.raises(ConfigError):
        InitialLaw("stable", alpha=0.0)


def test_biased_arc_frequencies():
    eps = 0.1
    law = InitialLaw("biased_arc", epsilon=eps, arc=VertexSet(tuple(range(50))))
    g = cycle(100)
    rng = np.random.default_rng(4)
    draws = np.array([sample_profile(law, g, rng) for _ in range(2000)])
    on, off = draws[:, :50], draws[:, 50:]
    p_on, p_off = np.mean(on == 1), np.mean(off == 1)
    assert abs(p_on - (1 + 3 * eps) / 2) < 4 * math.sqrt(0.25 / on.size)
    assert abs(p_off - 0.5) < 4 * math.sqrt(0.25 / off.size)


def test_biased_arc_third_is_all_plus():
    law = InitialLaw("biased_arc", epsilon=1 / 3, arc_radius=5.0)
    coords = np.arange(-10, 11)
    vals = sample_values(law, coords, Lattice(1), np.random.default_rng(5))
    assert np.all(vals[np.abs(coords) < 5] == 1.0)


def test_biased_arc_on_lattice_ball_radius_is_strict():
    law = InitialLaw("biased_arc", epsilon=0.2, arc_radius=2.0)
    mask = law.arc_mask(np.array([-2, -1, 0, 1, 2]), Lattice(1))
    assert mask.tolist() == [False, True, True, True, False]


def test_biased_arc_needs_arc_only_when_used():
    law = InitialLaw("biased_arc", epsilon=0.2)
    with pytest.raises(ConfigError, match="arc"):
        sample_values(law, np.arange(3), cycle(5), np.random.default_rng())
    with pytest.raises(ConfigError):
        InitialLaw("biased_arc", epsilon=0.5)
    with pytest.raises(ConfigError):
        InitialLaw("biased_arc", epsilon=0.2, arc_radius=-1.0)
    outside = InitialLaw("biased_arc", epsilon=0.2, arc=VertexSet((3, 9)))
    with pytest.raises(ConfigError):
        sample_profile(outside, cycle(5), np.random.default_rng())


def test_arc_layout_examples():
    lay = ArcLayout.for_cycle(1000, 0.1)
    assert (lay.ell, lay.k, len(lay.arcs[0])) == (19, 26, 37)
    lay = ArcLayout.for_cycle(10_000, 0.05)
    assert lay.ell == math.floor(math.log(10_000) / (36 * 0.0025))
    assert lay.k == 10_000 // (2 * lay.ell)
    covered = [v for arc in lay.arcs for v in arc]
    assert len(covered) == len(set(covered)) == lay.k * (2 * lay.ell - 1)


def test_arc_layout_spacing_and_sizes():
    for n, eps in [(1000, 0.1), (5000, 0.08), (257, 0.3)]:
        lay = ArcLayout.for_cycle(n, eps)
        assert all(len(a) == 2 * lay.ell - 1 for a in lay.arcs)
        for i, a in enumerate(lay.centers):
            for b in lay.centers[i + 1:]:
                assert min(abs(a - b), n - abs(a - b)) >= 2 * lay.ell


def test_arc_layout_rejects_short_arcs():
    with pytest.raises(ConfigError, match="ell"):
        ArcLayout.for_cycle(10, 1 / 3)


def test_arc_mixture_biases_one_arc():
    eps = 0.05
    g = cycle(2000)
    law = InitialLaw("arc_mixture", epsilon=eps)
    lay = ArcLayout.for_cycle(2000, eps)
    rng = np.random.default_rng(6)
    draws = np.array([sample_profile(law, g, rng) for _ in range(3000)])
    on = np.concatenate([a.as_array() for a in lay.arcs])
    off = np.setdiff1d(np.arange(2000), on)
    # each arc vertex is biased with probability 1/k
    expected = 3 * eps / lay.k
    mean_on = draws[:, on].mean()
    assert abs(mean_on - expected) < 4 / math.sqrt(draws[:, on].size)
    assert abs(draws[:, off].mean()) < 4 / math.sqrt(draws[:, off].size)
    assert math.isclose(law_mean(law, g).arc_value, expected)
    with pytest.raises(ConfigError):
        sample_profile(law, path(2000), rng)
    with pytest.raises(ConfigError):
        sample_values(law, np.arange(3), g, rng)


def test_rademacher_and_uniform_means():
    rng = np.random.default_rng(7)
    r = sample_values(InitialLaw("rademacher"), np.arange(100_000), cycle(3), rng)
    assert set(np.unique(r)) == {-1.0, 1.0} and abs(r.mean()) < 0.015
    u = sample_values(InitialLaw("uniform01"), np.arange(100_000), cycle(3), rng)
    assert 0 <= u.min() and u.max() < 1 and abs(u.mean() - 0.5) < 0.005


def test_stripes_on_cycle_and_torus():
    law = InitialLaw("stripes", stripe_width=2)
    assert sample_profile(law, cycle(8), None).tolist() == [1, 1, -1, -1, 1, 1, -1, -1]
    t = sample_profile(law, torus(4, 3), None).reshape(3, 4)
    assert np.all(t == np.array([1, 1, -1, -1]))
    z2 = sample_values(law, np.array([[0, 5], [2, -1], [-1, 0]]), Lattice(2), None)
    assert z2.tolist() == [1.0, -1.0, -1.0]
    assert law_mean(law, cycle(8)).value == 0.0


def test_constant_and_law_means():
    assert sample_values(InitialLaw("constant", value=0.3), np.arange(4), cycle(4), None).tolist() == [0.3] * 4
    assert law_mean(InitialLaw("uniform01")).value == 0.5
    assert not law_mean(InitialLaw("stable", alpha=1.0)).finite
    assert law_mean(InitialLaw("stable", alpha=1.5)).finite
    assert math.isclose(law_mean(InitialLaw("biased_arc", epsilon=0.2, arc_radius=1.0)).arc_value, 0.6)


def test_config_errors_name_keys():
    with pytest.raises(ConfigError) as info:
        InitialLaw("levy")
    assert info.value.key == "init.kind"
    with pytest.raises(ConfigError):
        InitialLaw("constant")
    with pytest.raises(ConfigError):
        InitialLaw("stripes", stripe_width=0)
    with pytest.raises(ConfigError):
        InitialLaw("arc_mixture", epsilon=0.0)
