import pytest

from conftest import make_net
from leocompress.bounds import ProofLevel
from leocompress.errors import DimensionError
from leocompress.fixtures import FixtureSpec, generate_fixture
from leocompress.net import BoxDomain, dumps_json, forward
from leocompress.stability import (
    Classification,
    StabilityConfig,
    StabilityReport,
    SummaryRow,
    analyze,
    format_1dp,
    render_stability_table,
    round_half_even,
    stability_summary,
)

C = Classification


def test_zero_row_units():
    net = make_net(([[0.0, 0.0], [0.0, 0.0]], [0.5, -0.5]), ([[1.0, 1.0]], [0.0]))
    rep = analyze(net, BoxDomain.unit_box(2))
    assert rep[(0, 0)].classification is C.CONSTANT_POSITIVE
    assert rep[(0, 1)].classification is C.STABLY_INACTIVE


def test_two_layer_fixture(unstable_fixture):
    net, dom = unstable_fixture
    rep = analyze(net, dom)
    assert [e.classification for e in rep.entries[1]] == [C.STABLY_INACTIVE, C.STABLY_ACTIVE, C.UNSTABLE]
    a, b, c = rep.entries[1]
    assert a.bounds.g_max == pytest.approx(-0.1) and b.bounds.g_min == pytest.approx(0.1)
    assert c.bounds.g_max >= 0.5 - 1e-9 and c.bounds.g_min <= -0.5 + 1e-9


def test_unstable_witnesses_show_both_signs():
    fx = generate_fixture(FixtureSpec((5, 5), 3, inactive=1, active=1, seed=2))
    rep = analyze(fx.net, fx.domain, StabilityConfig(tighten=True))
    for l, layer in enumerate(rep.entries):
        for i, e in enumerate(layer):
            if e.classification is C.UNSTABLE:
                assert e.witness_pos is not None and e.witness_neg is not None
                assert forward(fx.net, e.witness_pos)[1][l][i] > 0
                assert forward(fx.net, e.witness_neg)[1][l][i] < 0
                assert e.proof_level is ProofLevel.MILP_EXACT


def test_matches_planted_truth():
    fx = generate_fixture(FixtureSpec((6, 6, 4), 3, inactive=(2, 1, 1), active=(1, 2, 1), seed=7))
    rep = analyze(fx.net, fx.domain)
    assert [[e.classification for e in layer] for layer in rep.entries] == fx.classes()


def test_zero_time_limit_leaves_unknowns():
    fx = generate_fixture(FixtureSpec((6, 6), 3, inactive=(2, 1), active=(1, 1), seed=5))
    rep = analyze(fx.net, fx.domain, StabilityConfig(time_limit=0.0))
    truth = fx.classes()
    for l, layer in enumerate(rep.entries):
        for i, e in enumerate(layer):
            if e.proof_level is ProofLevel.INTERVAL:
                assert e.classification is truth[l][i]
            else:
                assert e.classification is C.UNKNOWN
    assert rep.unknown_units > 0 and rep.runtime >= 0


def test_report_json_round_trip_and_determinism():
    fx = generate_fixture(FixtureSpec((5, 4), 2, inactive=1, active=1, seed=1))
    r1 = analyze(fx.net, fx.domain)
    r2 = analyze(fx.net, fx.domain)
    assert dumps_json(r1.to_dict()) == dumps_json(r2.to_dict())
    back = StabilityReport.from_dict(r1.to_dict())
    assert dumps_json(back.to_dict()) == dumps_json(r1.to_dict())


def test_parallel_jobs_match_serial():
    fx = generate_fixture(FixtureSpec((6, 5), 3, inactive=1, active=1, seed=9))
    serial = analyze(fx.net, fx.domain)
    parallel = analyze(fx.net, fx.domain, StabilityConfig(jobs=2))
    assert dumps_json(serial.to_dict()) == dumps_json(parallel.to_dict())


def test_dump_lp(tmp_path):
    fx = generate_fixture(FixtureSpec((3, 3), 2, seed=0))
    analyze(fx.net, fx.domain, StabilityConfig(dump_lp=str(tmp_path / "lp")))
    files = sorted(p.name for p in (tmp_path / "lp").iterdir())
    assert files and all(f.endswith(".lp") for f in files)


def test_dimension_mismatch():
    net = make_net(([[1.0]], [0.0]), ([[1.0]], [0.0]))
    with pytest.raises(DimensionError):
        analyze(net, BoxDomain.unit_box(2))


def test_summary_formatting():
    assert format_1dp(2.5) == "2.5"
    assert format_1dp(0.25) == "0.2" and format_1dp(0.35) == "0.4"
    assert round_half_even(41.25) == 41.2
    table = render_stability_table([SummaryRow("1", 2.5, 0.0, 10.0)], runtime=1.0)
    assert "2.5" in table and "Runtime (s): 1.000" in table


def test_summary_extremes():
    dead = make_net(([[1.0], [1.0]], [-2.0, -3.0]), ([[1.0, 1.0]], [0.0]))
    rows = stability_summary(analyze(dead, BoxDomain.unit_box(1)))
    assert rows[-1].stability_pct == 100.0 and rows[0].stably_inactive == 2.0
    unstable = make_net(([[1.0], [-1.0]], [-0.5, 0.5]), ([[1.0, 1.0]], [0.0]))
    rows = stability_summary(analyze(unstable, BoxDomain.unit_box(1)))
    assert rows[-1].stability_pct == 0.0


def test_summary_averages_reports():
    fx_a = generate_fixture(FixtureSpec((4,), 2, active=2, seed=0))
    fx_b = generate_fixture(FixtureSpec((4,), 3, active=3, seed=1))
    rows = stability_summary([analyze(fx_a.net, fx_a.domain), analyze(fx_b.net, fx_b.domain)])
    assert rows[0].stably_active == 2.5
    assert format_1dp(rows[0].stably_active) == "2.5"
    assert rows[0].stability_pct == 62.5
