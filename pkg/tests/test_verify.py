import numpy as np
import pytest

from conftest import make_net
from leocompress.bounds import interval_propagate
from leocompress.errors import DimensionError, EnumerationCapError
from leocompress.fixtures import FixtureSpec, generate_fixture
from leocompress.leo import compress
from leocompress.milp.bnb import Mode, solve_stability
from leocompress.milp.model import build_stability_model
from leocompress.net import BoxDomain, Layer, RectifierNetwork, evaluate
from leocompress.stability import Classification, analyze
from leocompress.verify import (
    compare_region_maps,
    enumerate_regions,
    oracle_extreme_preactivation,
    oracle_stability,
    sample_points,
    verify_by_sampling,
)


def shift_output_bias(net, delta):
    out = net.output_layer
    return RectifierNetwork(net.layers, Layer(out.weights, out.bias + delta), net.input_dim)


@pytest.fixture
def fx():
    return generate_fixture(FixtureSpec((5, 4), 3, inactive=(1, 1), active=(2, 1), dependent=(1, 0), seed=3))


def test_sampling_self_is_zero(fx):
    assert verify_by_sampling(fx.net, fx.net, fx.domain).max_abs_diff == 0.0


def test_sampling_detects_bias_perturbation(fx):
    res = verify_by_sampling(fx.net, shift_output_bias(fx.net, 1e-3), fx.domain)
    assert res.max_abs_diff >= 1e-3 - 1e-15
    layers = list(fx.net.layers)
    layers[0] = Layer(layers[0].weights, layers[0].bias + 1e-3)
    res = verify_by_sampling(fx.net, RectifierNetwork(tuple(layers), fx.net.output_layer, fx.net.input_dim), fx.domain)
    assert res.max_abs_diff > 0


def test_sampling_compressed_fixture(fx):
    out, _ = compress(fx.net, fx.domain, analyze(fx.net, fx.domain))
    res = verify_by_sampling(fx.net, out, fx.domain)
    assert res.max_abs_diff <= 1e-9 and res.n_points == 10_000 + 8 + 1


def test_sampling_points_and_determinism():
    dom = BoxDomain.unit_box(2)
    X = sample_points(dom, 5, seed=4)
    assert X.shape == (5 + 4 + 1, 2)
    assert np.array_equal(X[-1], dom.midpoint) and np.array_equal(X, sample_points(dom, 5, seed=4))
    assert sample_points(BoxDomain.unit_box(11), 3).shape == (4, 11)


def test_sampling_dimension_mismatch():
    a = make_net(([[1.0]], [0.0]), ([[1.0]], [0.0]))
    b = make_net(([[1.0, 1.0]], [0.0]), ([[1.0]], [0.0]))
    with pytest.raises(DimensionError):
        verify_by_sampling(a, b, BoxDomain.unit_box(1))
    c = make_net(([[1.0]], [0.0]), ([[1.0], [2.0]], [0.0, 0.0]))
    with pytest.raises(DimensionError):
        verify_by_sampling(a, c, BoxDomain.unit_box(1))


def test_single_unit_two_regions():
    net = make_net(([[1.0]], [-0.5]), ([[1.0]], [0.0]))
    cat = enumerate_regions(net, BoxDomain.unit_box(1))
    assert sorted(cat.patterns()) == [(False,), (True,)]


def test_dead_unit_kills_active_patterns():
    net = make_net(([[1.0], [1.0]], [-2.0, -0.5]), ([[1.0, 1.0]], [0.0]))
    cat = enumerate_regions(net, BoxDomain.unit_box(1))
    assert all(not bits[0] for bits in cat.patterns()) and len(cat) == 2


def test_two_lines_at_most_four_regions():
    net = make_net(([[1.0, -0.3], [0.2, 1.0]], [-0.4, -0.6]), ([[1.0, 1.0]], [0.0]))
    cat = enumerate_regions(net, BoxDomain.unit_box(2))
    assert len(cat) <= 4 and len(set(cat.patterns())) == len(cat)


def test_cap_refuses_large_nets():
    fx = generate_fixture(FixtureSpec((9, 9), 2, seed=0))
    with pytest.raises(EnumerationCapError):
        enumerate_regions(fx.net, fx.domain)


def test_region_maps_match_forward(fx):
    cat = enumerate_regions(fx.net, fx.domain)
    rng = np.random.default_rng(0)
    n = fx.domain.dim
    for region in cat.regions:
        # the cube of half-width margin/sqrt(n) around the witness lies inside every sign constraint
        r = region.margin / np.sqrt(n)
        X = region.witness + rng.uniform(-r, r, size=(2000, n))
        X = X[np.all((X >= fx.domain.lower) & (X <= fx.domain.upper), axis=1)][:100]
        assert len(X) == 100
        assert np.all(X @ region.A.T + region.c >= -1e-12)
        M, m = region.affine
        assert np.max(np.abs(X @ M.T + m - evaluate(fx.net, X))) <= 1e-9
    assert len(cat) > 1


def test_oracle_dead_unit_matches_milp(two_layer_fixture):
    net, dom = two_layer_fixture
    cat = enumerate_regions(net, dom)
    assert oracle_extreme_preactivation(cat, (1, 0), "max") == pytest.approx(-0.1, abs=1e-12)
    model = build_stability_model(net, dom, interval_propagate(net, dom), (1, 0))
    assert solve_stability(model, Mode.TIGHTEN_BOUND).incumbent_value == pytest.approx(-0.1, abs=1e-9)
    assert oracle_stability(cat, (1, 0)) is Classification.STABLY_INACTIVE
    assert oracle_stability(cat, (1, 1)) is Classification.STABLY_ACTIVE
    assert oracle_stability(cat, (1, 2)) is Classification.STABLY_INACTIVE  # zero row, zero bias


def test_oracle_layer_one_equals_interval(fx):
    cat = enumerate_regions(fx.net, fx.domain)
    bounds = interval_propagate(fx.net, fx.domain)
    for i, b in enumerate(bounds[0]):
        assert oracle_extreme_preactivation(cat, (0, i), "max") == pytest.approx(b.g_max, abs=1e-12)
        assert oracle_extreme_preactivation(cat, (0, i), "min") == pytest.approx(b.g_min, abs=1e-12)


def test_oracle_unstable_unit(unstable_fixture):
    net, dom = unstable_fixture
    cat = enumerate_regions(net, dom)
    assert oracle_extreme_preactivation(cat, (1, 2), "max") > 0 > oracle_extreme_preactivation(cat, (1, 2), "min")
    assert oracle_stability(cat, (1, 2)) is Classification.UNSTABLE
    with pytest.raises(ValueError):
        oracle_extreme_preactivation(cat, (1, 2), "both")


def test_region_map_comparison(fx):
    out, _ = compress(fx.net, fx.domain, analyze(fx.net, fx.domain))
    assert compare_region_maps(fx.net, out, fx.domain) <= 1e-8
    assert compare_region_maps(fx.net, shift_output_bias(fx.net, 1e-3), fx.domain) >= 1e-3 - 1e-12
