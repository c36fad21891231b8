import numpy as np
import pytest

from leocompress.net import BoxDomain, RectifierNetwork


def make_net(*params, input_dim=None):
    return RectifierNetwork.from_arrays([(np.array(W, dtype=float), np.array(b, dtype=float)) for W, b in params], input_dim)


@pytest.fixture
def two_layer_fixture():
    """h1 = max(0, x - 0.5) on [0, 1]; layer 2 has a dead, an active and an unstable unit."""
    net = make_net(
        ([[1.0]], [-0.5]),
        ([[-1.0], [1.0], [0.0]], [-0.1, 0.1, 0.0]),
        ([[1.0, 1.0, 1.0]], [0.0]),
    )
    return net, BoxDomain.unit_box(1)


@pytest.fixture
def unstable_fixture():
    """Layer 2 unit C: g2 = x - 0.5 expressed through an always-active layer-1 unit."""
    net = make_net(
        ([[1.0], [1.0]], [-0.5, 0.0]),
        ([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [-0.1, 0.1, -0.5]),
        ([[1.0, 1.0, 1.0]], [0.0]),
    )
    return net, BoxDomain.unit_box(1)


# -- acceptance summary --------------------------------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        status = "PASS" if report.passed else "FAIL"
        _CRITERIA.append((status, props["criterion"], props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _CRITERIA:
        terminalreporter.write_line(f"[{status}] {name}" + (f"  ({detail})" if detail else ""))
