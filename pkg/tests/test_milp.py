import numpy as np
import pytest

from conftest import make_net
from leocompress.bounds import interval_propagate
from leocompress.errors import OrderingError
from leocompress.milp.bnb import Budget, Mode, SolveStatus, solve_lp, solve_stability
from leocompress.milp.model import Sense, build_stability_model
from leocompress.net import BoxDomain


def one_d_net(w2, b2):
    return make_net(([[1.0]], [-0.5]), ([[w2]], [b2]), ([[1.0]], [0.0]))


def model_for(net, dom, target, sense=Sense.MAXIMIZE):
    return build_stability_model(net, dom, interval_propagate(net, dom), target, sense)


def test_layer_one_target_is_pure_lp():
    net = make_net(([[2.0, -3.0]], [1.0]), ([[1.0]], [0.0]))
    model = model_for(net, BoxDomain.unit_box(2), (0, 0))
    assert model.num_binaries == 0
    out = solve_stability(model, Mode.TIGHTEN_BOUND)
    assert out.status is SolveStatus.OPTIMAL and out.nodes == 0
    assert out.incumbent_value == 3.0 and out.incumbent_point.tolist() == [1.0, 0.0]


def test_one_binary_per_unstable_unit():
    rng = np.random.default_rng(0)
    W1 = np.array([[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    net = make_net((W1, [0.0, 0.0, -1.0]), (rng.normal(size=(1, 3)), [0.0]), ([[1.0]], [0.0]))
    model = model_for(net, BoxDomain.unit_box(2), (1, 0))
    assert model.num_binaries == 3
    assert model.binary_units == [(0, 0), (0, 1), (0, 2)]


def test_stable_units_are_hard_encoded():
    net = make_net(([[1.0], [1.0], [0.0]], [-2.0, 1.0, 0.5]), ([[1.0, 1.0, 1.0]], [0.0]), ([[1.0]], [0.0]))
    model = model_for(net, BoxDomain.unit_box(1), (1, 0))
    assert model.num_binaries == 0
    assert "h1_1" not in model.names and "h1_2" in model.names and "h1_3" in model.names


def test_model_optimum_matches_analytic():
    net = one_d_net(-1.0, 0.2)
    model = model_for(net, BoxDomain.unit_box(1), (1, 0))
    assert model.num_binaries == 1
    out = solve_stability(model, Mode.TIGHTEN_BOUND)
    assert out.status is SolveStatus.OPTIMAL
    assert out.incumbent_value == pytest.approx(0.2, abs=1e-12)
    grid = np.linspace(0, 1, 1001)
    assert out.incumbent_value == pytest.approx((-np.maximum(grid - 0.5, 0) + 0.2).max(), abs=1e-12)


def test_prove_inactive_dead_unit():
    model = model_for(one_d_net(-1.0, -0.1), BoxDomain.unit_box(1), (1, 0))
    out = solve_stability(model, Mode.PROVE_INACTIVE)
    assert out.status is SolveStatus.PROVED_NEGATIVE_MAX
    assert out.global_bound <= -0.1 + 1e-9


def test_prove_inactive_refuted_with_witness():
    model = model_for(one_d_net(-1.0, 0.2), BoxDomain.unit_box(1), (1, 0))
    out = solve_stability(model, Mode.PROVE_INACTIVE)
    assert out.status is SolveStatus.FOUND_POSITIVE_VALUE
    assert out.incumbent_point[0] <= 0.5 and out.incumbent_value > 0


def test_prove_active():
    model = model_for(one_d_net(1.0, 0.1), BoxDomain.unit_box(1), (1, 0), Sense.MINIMIZE)
    out = solve_stability(model, Mode.PROVE_ACTIVE)
    assert out.status is SolveStatus.PROVED_POSITIVE_MIN and out.global_bound >= 0.1 - 1e-9
    model = model_for(one_d_net(1.0, -0.1), BoxDomain.unit_box(1), (1, 0), Sense.MINIMIZE)
    assert solve_stability(model, Mode.PROVE_ACTIVE).status is SolveStatus.FOUND_NEGATIVE_VALUE


def test_mode_sense_mismatch():
    model = model_for(one_d_net(1.0, 0.1), BoxDomain.unit_box(1), (1, 0), Sense.MINIMIZE)
    with pytest.raises(ValueError):
        solve_stability(model, Mode.PROVE_INACTIVE)


def test_missing_bounds_is_ordering_error():
    net = one_d_net(1.0, 0.1)
    with pytest.raises(OrderingError):
        build_stability_model(net, BoxDomain.unit_box(1), [], (1, 0))


def test_solve_lp_examples():
    net = make_net(([[2.0, -3.0]], [1.0]), ([[1.0]], [0.0]))
    res = solve_lp(model_for(net, BoxDomain.unit_box(2), (0, 0)))
    assert res.value == 3.0
    zero = make_net(([[0.0, 0.0]], [0.0]), ([[1.0]], [0.0]))
    assert solve_lp(model_for(zero, BoxDomain.unit_box(2), (0, 0))).value == 0.0


def _random_deep_net(seed):
    rng = np.random.default_rng(seed)
    return make_net(
        (rng.normal(size=(6, 3)), rng.normal(size=6) * 0.3),
        (rng.normal(size=(6, 6)), rng.normal(size=6) * 0.3),
        (rng.normal(size=(1, 6)), rng.normal(size=1) * 0.3),
        (rng.normal(size=(1, 1)), [0.0]),
    )


def test_zero_time_budget_returns_valid_box_bound():
    net = _random_deep_net(1)
    dom = BoxDomain.unit_box(3)
    model = model_for(net, dom, (2, 0))
    out = solve_stability(model, Mode.TIGHTEN_BOUND, Budget(time_limit=0.0))
    exact = solve_stability(model, Mode.TIGHTEN_BOUND)
    assert out.status is SolveStatus.BOUND_ONLY
    assert exact.status is SolveStatus.OPTIMAL
    assert out.global_bound >= exact.incumbent_value - 1e-9


def test_node_limit_keeps_sandwich():
    net = _random_deep_net(4)
    model = model_for(net, BoxDomain.unit_box(3), (2, 0))
    exact = solve_stability(model, Mode.TIGHTEN_BOUND)
    for limit in (1, 3, 8):
        out = solve_stability(model, Mode.TIGHTEN_BOUND, Budget(node_limit=limit))
        assert out.global_bound >= exact.incumbent_value - 1e-9
        if out.incumbent_value is not None:
            assert out.incumbent_value <= exact.incumbent_value + 1e-9


def test_solve_is_deterministic():
    model = model_for(_random_deep_net(2), BoxDomain.unit_box(3), (2, 0))
    a, b = solve_stability(model), solve_stability(model)
    assert (a.status, a.nodes, a.global_bound, a.incumbent_value) == (b.status, b.nodes, b.global_bound, b.incumbent_value)


def test_lp_text_dump():
    text = model_for(one_d_net(-1.0, 0.2), BoxDomain.unit_box(1), (1, 0)).to_lp_text()
    assert text.startswith("\\ target hidden layer 2 unit 1")
    assert "Maximize" in text and "Binaries" in text and " z1_1" in text and text.rstrip().endswith("End")
