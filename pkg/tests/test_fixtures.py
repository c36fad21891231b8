import numpy as np
import pytest

from leocompress.errors import FixtureSpecError
from leocompress.fixtures import FixtureSpec, fixture_from_stability, generate_fixture
from leocompress.net import preactivations
from leocompress.stability import Classification

C = Classification


def test_planted_inactive_listed_exactly():
    fx = generate_fixture(FixtureSpec((6, 6), 2, inactive=(2, 0), seed=0))
    classes = fx.classes()
    assert sum(c is C.STABLY_INACTIVE for c in classes[0]) == 2
    assert all(c is C.UNSTABLE for c in classes[1])
    G = preactivations(fx.net, fx.domain.sample(np.random.default_rng(1), 5000))
    dead = [i for i, c in enumerate(classes[0]) if c is C.STABLY_INACTIVE]
    assert np.all(G[0][:, dead] < 0)


def test_same_seed_same_files(tmp_path):
    spec = FixtureSpec((6, 6), 3, inactive=1, active=2, dependent=1, seed=5)
    a = generate_fixture(spec).write(tmp_path / "a")
    b = generate_fixture(spec).write(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = generate_fixture(FixtureSpec((6, 6), 3, inactive=1, active=2, dependent=1, seed=6)).write(tmp_path / "c")
    assert a["net"].read_bytes() != c["net"].read_bytes()


def test_rank_deficient_active_rows():
    fx = generate_fixture(FixtureSpec((4, 5), 2, active=(0, 3), dependent=(0, 1), seed=4))
    layer = fx.net.layers[1]
    act = [i for i, c in enumerate(fx.classes()[1]) if c is C.STABLY_ACTIVE]
    assert len(act) == 3 and np.linalg.matrix_rank(layer.weights[act]) == 2


def test_unstable_units_attain_both_signs():
    fx = generate_fixture(FixtureSpec((5, 5), 2, inactive=1, active=1, seed=2))
    G = preactivations(fx.net, fx.domain.sample(np.random.default_rng(0), 20_000))
    for l, classes in enumerate(fx.classes()):
        for i, c in enumerate(classes):
            if c is C.UNSTABLE:
                assert G[l][:, i].max() > 0 > G[l][:, i].min()
            elif c is C.STABLY_ACTIVE:
                assert G[l][:, i].min() > 0


def test_exact_mode_is_dyadic():
    fx = generate_fixture(FixtureSpec((4, 4), 2, inactive=1, active=2, dependent=1, seed=3, exact=True))
    for layer in fx.net.all_layers():
        for arr in (layer.weights, layer.bias):
            scaled = arr * 64
            assert np.array_equal(scaled, np.round(scaled))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(widths=(3,), input_dim=2, inactive=2, active=2),
        dict(widths=(5,), input_dim=2, active=3),
        dict(widths=(5,), input_dim=2, active=2, dependent=2),
        dict(widths=(5,), input_dim=2, active=1, dependent=2),
        dict(widths=(5, 5), input_dim=2, inactive=(1, 1, 1)),
        dict(widths=(0,), input_dim=2),
        dict(widths=(3,), input_dim=2, margin=0.0),
    ],
)
def test_infeasible_specs(kwargs):
    with pytest.raises(FixtureSpecError):
        generate_fixture(FixtureSpec(**kwargs))


def test_stability_fraction_helper():
    fx = fixture_from_stability((10, 10), 40.0, input_dim=3, seed=1)
    assert fx.truth["stability_pct"] == 40.0
